//! Dataset handling, configuration, the experiment protocol and reports.

pub mod config;
pub mod data;
pub mod method;
pub mod model_io;
pub mod report;
pub mod runner;

pub use config::{load_config, parse_config, DataSource, ExperimentConfig, KernelChoice};
pub use data::{load_csv, synth_generate, write_csv, ClusterSpec, Dataset, MeanSpec, SynthSpec};
pub use method::{parse_method_list, FitParams, MethodSpec};
pub use report::{emit_report, format_results_csv, parse_results_csv};
pub use runner::{run_experiment, stratified_split, ResultRow};
