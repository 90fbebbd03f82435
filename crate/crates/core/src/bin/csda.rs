use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use csda::csda::criterion_values;
use csda::eval::{
    average_precision_11pt, cross_validate, diagnostics_table, score_samples, signed_labels,
    split_classes, CvOptions, Similarity, DEFAULT_DIM_GRID, DEFAULT_FOLDS,
};
use csda::experiment::config::DataSource;
use csda::experiment::model_io::{load_model, save_model, SavedModel};
use csda::experiment::report::format_summary;
use csda::experiment::{
    emit_report, load_config, load_csv, parse_method_list, run_experiment, stratified_split,
    synth_generate, write_csv, ClusterSpec, Dataset, FitParams, KernelChoice, MethodSpec,
    SynthSpec,
};
use csda::hetero::DEFAULT_K_GRID;
use csda::kernel::{npt_fit, npt_transform, NptModel};
use csda::linalg::ZeroThreshold;
use csda::scatter::{center_to_positive_mean, scatter_about, scatter_matrices};
use csda::{Error, Result};

#[derive(Parser)]
#[command(
    name = "csda",
    version,
    about = "Class-specific subspace discriminant analysis"
)]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labelled dataset as CSV.
    Synth(SynthArgs),
    /// Fit one one-vs-rest model and save it.
    Fit(FitArgs),
    /// Score a dataset with a saved model and print its average precision.
    Eval(EvalArgs),
    /// Run a full experiment from a config file and write the report.
    Experiment(ExperimentArgs),
    /// Fit methods on one train/test split and print constraint diagnostics.
    Diagnose(DiagnoseArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file, one sample per row, label in the last column.
    #[arg(long)]
    data: PathBuf,
    /// The first CSV row is a header.
    #[arg(long)]
    header: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    None,
    Linear,
    Rbf,
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long, value_enum, default_value = "rbf")]
    kernel: KernelArg,
    /// RBF width; computed from the training data when omitted.
    #[arg(long)]
    sigma: Option<f64>,
}

impl KernelArgs {
    fn choice(&self) -> KernelChoice {
        match self.kernel {
            KernelArg::None => KernelChoice::None,
            KernelArg::Linear => KernelChoice::Linear,
            KernelArg::Rbf => KernelChoice::Rbf(self.sigma),
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Read synth_* keys from an experiment config instead of the flags.
    #[arg(long, conflicts_with_all = ["dim", "positive", "negative"])]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    /// Positive cluster as count:mean:stdev.
    #[arg(long)]
    positive: Option<ClusterSpec>,
    /// Negative cluster as count:mean:stdev (repeatable).
    #[arg(long)]
    negative: Vec<ClusterSpec>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    positive_class: i64,
    #[arg(long, default_value = "ncsda")]
    method: MethodSpec,
    /// Output dimension; full width when omitted.
    #[arg(long)]
    dim: Option<usize>,
    /// Number of negative clusters for hncsda and hocsda.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Choose dim and k by stratified cross-validation instead.
    #[arg(long)]
    cv: bool,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "euclidean")]
    similarity: SimilarityArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimilarityArg {
    Euclidean,
    Cosine,
}

impl From<SimilarityArg> for Similarity {
    fn from(s: SimilarityArg) -> Self {
        match s {
            SimilarityArg::Euclidean => Similarity::Euclidean,
            SimilarityArg::Cosine => Similarity::Cosine,
        }
    }
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides output_dir from the config.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    positive_class: i64,
    /// `;`-separated method list; the benchmark set when omitted.
    #[arg(long)]
    methods: Option<String>,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value_t = 3)]
    k: usize,
}

/// Embedding (if any), mapped training data, mapped test data.
type Embedded = (Option<NptModel>, DMatrix<f64>, Option<DMatrix<f64>>);

/// Fits the kernel embedding on `train` and maps both sets.
fn embed(
    choice: KernelChoice,
    train: &DMatrix<f64>,
    test: Option<&DMatrix<f64>>,
    thr: ZeroThreshold,
) -> Result<Embedded> {
    match choice.resolve(train)? {
        None => Ok((None, train.clone(), test.cloned())),
        Some(spec) => {
            let npt = npt_fit(train, spec, thr)?;
            let zt = test.map(|t| npt_transform(&npt, t)).transpose()?;
            let z = npt.train_mapped();
            Ok((Some(npt), z, zt))
        }
    }
}

fn positives(data: &Dataset, class: i64) -> Result<Vec<bool>> {
    let p: Vec<bool> = data.labels.iter().map(|&l| l == class).collect();
    if !p.iter().any(|&b| b) {
        return Err(Error::Input(format!(
            "class {class} does not occur in the data"
        )));
    }
    Ok(p)
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = match a.config {
        Some(path) => match load_config(&path)?.data {
            DataSource::Synth(s) => s,
            DataSource::Csv { .. } => {
                return Err(Error::Config(format!(
                    "{} describes a CSV dataset, not synthetic data",
                    path.display()
                )))
            }
        },
        None => SynthSpec {
            dim: a
                .dim
                .ok_or_else(|| Error::Config("--dim is required".into()))?,
            positive: a
                .positive
                .ok_or_else(|| Error::Config("--positive is required".into()))?,
            negatives: a.negative,
            seed: a.seed,
        },
    };
    let data = synth_generate(&spec)?;
    write_csv(&a.out, &data)?;
    println!(
        "wrote {} samples of dimension {} to {}",
        data.len(),
        data.dim(),
        a.out.display()
    );
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let data = load_csv(&a.data.data, a.data.header)?;
    let positive = positives(&data, a.positive_class)?;
    let params = FitParams {
        mu: a.mu.unwrap_or(FitParams::default().mu),
        ..FitParams::default()
    };
    let (npt, z, _) = embed(
        a.kernel.choice(),
        &data.features,
        None,
        params.zero_threshold,
    )?;
    let max_dim = DEFAULT_DIM_GRID.max().unwrap_or(1).max(a.dim.unwrap_or(0));
    let method = a.method;
    let fitter =
        |d: &csda::scatter::ClassSplitData, k: usize, s: u64| method.fit(d, k, s, max_dim, &params);

    let (dim, k) = if a.cv {
        let opts = CvOptions {
            folds: DEFAULT_FOLDS,
            dims: DEFAULT_DIM_GRID.collect(),
            ks: if method.uses_clusters() {
                DEFAULT_K_GRID.to_vec()
            } else {
                vec![0]
            },
            bound_k_by_negatives: method.uses_clusters(),
            ..CvOptions::new(a.seed)
        };
        let out = cross_validate(&z, &positive, fitter, &opts)?;
        println!(
            "cross-validation: dim {} k {} (mean AP {:.4})",
            out.chosen_dim, out.chosen_k, out.best_ap
        );
        (Some(out.chosen_dim), out.chosen_k)
    } else {
        (a.dim, a.k)
    };

    let (xp, xn) = split_classes(&z, &positive, |_| true);
    let split = center_to_positive_mean(&xp, &xn)?;
    let mut model = fitter(&split, k, a.seed)?;
    if let Some(d) = dim {
        model = model.truncated(d);
    }
    let s = scatter_matrices(&split, params.zero_threshold)?;
    let r = criterion_values(&s, &model.projection, params.zero_threshold)?;
    let ranked = score_samples(
        &model,
        &z,
        &split.positive_mean,
        &signed_labels(&positive),
        Similarity::Euclidean,
    )?;
    println!("method {}", model.method_tag);
    println!("dims {} -> {}", model.input_dim(), model.output_dim());
    println!("train AP {:.6}", average_precision_11pt(&ranked)?);
    println!("J {:e}  J2 {:e}  J3 {:e}", r.j, r.j2, r.j3);
    println!(
        "A_sum {:e}  A_frob {:e}  B {:e}",
        r.constraint_a_sum, r.constraint_a_frob, r.criterion_b
    );

    if let Some(path) = a.model_out {
        let saved = SavedModel {
            positive_class: a.positive_class,
            model,
            positive_mean: split.positive_mean.clone(),
            embedding: npt,
        };
        save_model(&path, &saved)?;
        println!("saved model to {}", path.display());
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let saved = load_model(&a.model)?;
    let data = load_csv(&a.data.data, a.data.header)?;
    let positive = positives(&data, saved.positive_class)?;
    let z = saved.embed(&data.features)?;
    let ranked = score_samples(
        &saved.model,
        &z,
        &saved.positive_mean,
        &signed_labels(&positive),
        a.similarity.into(),
    )?;
    println!("{}", average_precision_11pt(&ranked)?);
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let mut cfg = load_config(&a.config)?;
    if let Some(dir) = a.output_dir {
        cfg.output_dir = dir;
    }
    let rows = run_experiment(&cfg)?;
    let (csv, md) = emit_report(&rows, &cfg.output_dir)?;
    print!("{}", format_summary(&rows));
    println!("\nwrote {} and {}", csv.display(), md.display());
    Ok(())
}

fn diagnose(a: DiagnoseArgs) -> Result<()> {
    let data = load_csv(&a.data.data, a.data.header)?;
    positives(&data, a.positive_class)?;
    let methods = match &a.methods {
        Some(m) => parse_method_list(m)?,
        None => MethodSpec::benchmark(),
    };
    if !(a.train_fraction > 0.0 && a.train_fraction < 1.0) {
        return Err(Error::Config("--train-fraction must lie in (0, 1)".into()));
    }
    let params = FitParams::default();
    let thr = params.zero_threshold;
    let (train_idx, test_idx) = stratified_split(&data.labels, a.train_fraction, a.seed);
    let (train, test) = (data.subset(&train_idx), data.subset(&test_idx));
    let (_, ztr, zte) = embed(
        a.kernel.choice(),
        &train.features,
        Some(&test.features),
        thr,
    )?;
    let zte = zte.expect("test set was embedded");

    let ptr: Vec<bool> = train
        .labels
        .iter()
        .map(|&l| l == a.positive_class)
        .collect();
    let pte: Vec<bool> = test.labels.iter().map(|&l| l == a.positive_class).collect();
    let (xp, xn) = split_classes(&ztr, &ptr, |_| true);
    let split = center_to_positive_mean(&xp, &xn)?;
    let (tp, tn) = split_classes(&zte, &pte, |_| true);
    let s_train = scatter_matrices(&split, thr)?;
    let s_test = scatter_about(&tp, &tn, &split.positive_mean, thr)?;

    let max_dim = a.dim.unwrap_or(usize::MAX);
    let mut models = Vec::with_capacity(methods.len());
    for m in &methods {
        let k = if m.uses_clusters() { a.k } else { 0 };
        let model = m
            .fit(&split, k, a.seed, max_dim.min(ztr.nrows()), &params)
            .map_err(|e| e.context(format!("method {m}")))?;
        let model = match a.dim {
            Some(d) => model.truncated(d),
            None => model,
        };
        models.push((m.to_string(), model));
    }
    let refs: Vec<(String, &csda::csda::SubspaceModel)> =
        models.iter().map(|(n, m)| (n.clone(), m)).collect();
    let rows = diagnostics_table(&refs, &s_train, &s_test, thr)?;
    println!(
        "{:<18} {:>5} {:>5} {:>13} {:>13} {:>13}",
        "method", "dim", "split", "A_sum", "A_frob", "B"
    );
    for row in rows {
        let dim = models
            .iter()
            .find(|(n, _)| *n == row.model)
            .map_or(0, |(_, m)| m.output_dim());
        println!(
            "{:<18} {:>5} {:>5} {:>13.4e} {:>13.4e} {:>13.4e}",
            row.model,
            dim,
            row.split.label(),
            row.a_sum,
            row.a_frob,
            row.b
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Fit(a) => fit(a),
        Command::Eval(a) => eval(a),
        Command::Experiment(a) => experiment(a),
        Command::Diagnose(a) => diagnose(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
