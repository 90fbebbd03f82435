//! Flat `key = value` experiment configuration.

use std::path::{Path, PathBuf};

use crate::csda::DEFAULT_MU;
use crate::error::{Error, Result};
use crate::eval::{Similarity, DEFAULT_DIM_GRID, DEFAULT_FOLDS};
use crate::hetero::DEFAULT_K_GRID;
use crate::kernel::KernelSpec;
use crate::kmeans::InertiaKind;
use crate::linalg::{ThresholdMode, ZeroThreshold};
use crate::orthogonal::DEFAULT_ALPHA;

use super::data::{ClusterSpec, SynthSpec};
use super::method::{parse_method_list, FitParams, MethodSpec};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelChoice {
    /// Use the features as they are.
    None,
    Linear,
    /// RBF with a fixed width, or the automatic width when `None`.
    Rbf(Option<f64>),
}

impl KernelChoice {
    /// Resolves the kernel for a training matrix.
    pub fn resolve(&self, train: &nalgebra::DMatrix<f64>) -> Result<Option<KernelSpec>> {
        Ok(match self {
            KernelChoice::None => None,
            KernelChoice::Linear => Some(KernelSpec::Linear),
            KernelChoice::Rbf(Some(sigma)) => Some(KernelSpec::Rbf { sigma: *sigma }),
            KernelChoice::Rbf(None) => Some(KernelSpec::Rbf {
                sigma: crate::kernel::compute_sigma(train)?,
            }),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Csv { path: PathBuf, has_header: bool },
    Synth(SynthSpec),
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub methods: Vec<MethodSpec>,
    pub kernel: KernelChoice,
    pub train_fraction: f64,
    pub repetitions: usize,
    pub seed: u64,
    /// Positive classes to evaluate; all classes when `None`.
    pub classes: Option<Vec<i64>>,
    pub dim_grid: Vec<usize>,
    pub k_grid: Vec<usize>,
    pub folds: usize,
    /// When off, the largest dimension and first K are used without search.
    pub cross_validate: bool,
    pub similarity: Similarity,
    pub params: FitParams,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn with_data(data: DataSource) -> Self {
        Self {
            data,
            methods: MethodSpec::benchmark(),
            kernel: KernelChoice::Rbf(None),
            train_fraction: 0.7,
            repetitions: 5,
            seed: 0,
            classes: None,
            dim_grid: DEFAULT_DIM_GRID.collect(),
            k_grid: DEFAULT_K_GRID.to_vec(),
            folds: DEFAULT_FOLDS,
            cross_validate: true,
            similarity: Similarity::Euclidean,
            params: FitParams {
                mu: DEFAULT_MU,
                zero_threshold: ZeroThreshold::default(),
                alpha: DEFAULT_ALPHA,
                kmeans_restarts: 10,
                kmeans_max_iters: 300,
                kmeans_selection: InertiaKind::Squared,
            },
            output_dir: PathBuf::from("results"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if self.dim_grid.is_empty() || self.dim_grid.contains(&0) {
            return Err(Error::Config(
                "dim_grid must list positive dimensions".into(),
            ));
        }
        if self.k_grid.is_empty() || self.k_grid.contains(&0) {
            return Err(Error::Config(
                "k_grid must list positive cluster counts".into(),
            ));
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be at least 2".into()));
        }
        if let KernelChoice::Rbf(Some(s)) = self.kernel {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("sigma must be positive, got {s}")));
            }
        }
        self.params.zero_threshold.validate()?;
        if !(self.params.mu > 0.0) || !(self.params.alpha > 0.0) {
            return Err(Error::Config("mu and alpha must be positive".into()));
        }
        if self.params.kmeans_restarts == 0 || self.params.kmeans_max_iters == 0 {
            return Err(Error::Config(
                "k-means restarts and iterations must be positive".into(),
            ));
        }
        if let DataSource::Synth(s) = &self.data {
            s.validate()?;
        }
        Ok(())
    }

    pub fn max_dim(&self) -> usize {
        self.dim_grid.iter().copied().max().unwrap_or(1)
    }
}

/// `1-25`, `1,2,3,5,10` or a mix such as `1-5,10`.
pub fn parse_grid(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("invalid grid '{s}'"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once('-') {
            let (a, b) = (
                a.trim().parse::<usize>().map_err(|_| bad())?,
                b.trim().parse::<usize>().map_err(|_| bad())?,
            );
            if a > b {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse::<usize>().map_err(|_| bad())?);
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected true or false, got '{v}'"
        ))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse::<T>()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

pub fn parse_config(text: &str, base_dir: &Path) -> Result<ExperimentConfig> {
    let mut dataset: Option<PathBuf> = None;
    let mut has_header = false;
    let mut synth_dim: Option<usize> = None;
    let mut synth_positive: Option<ClusterSpec> = None;
    let mut synth_negatives: Option<Vec<ClusterSpec>> = None;
    let mut synth_seed: Option<u64> = None;
    let mut kernel = "rbf".to_string();
    let mut sigma: Option<f64> = None;
    let mut threshold_eps = ZeroThreshold::default().eps;
    let mut threshold_mode = ThresholdMode::Relative;
    let mut cfg = ExperimentConfig::with_data(DataSource::Csv {
        path: PathBuf::new(),
        has_header: false,
    });
    let mut seen = std::collections::BTreeSet::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| Error::Config(format!("line {line_no}: expected key = value")))?;
        if !seen.insert(key.to_string()) {
            return Err(Error::Config(format!(
                "line {line_no}: duplicate key '{key}'"
            )));
        }
        let at = |e: Error| e.context(format!("line {line_no}"));
        match key {
            "dataset" => dataset = Some(base_dir.join(value)),
            "has_header" => has_header = parse_bool(key, value).map_err(at)?,
            "synth_dim" => synth_dim = Some(parse_num(key, value).map_err(at)?),
            "synth_positive" => synth_positive = Some(value.parse().map_err(at)?),
            "synth_negatives" => {
                synth_negatives = Some(
                    value
                        .split(';')
                        .map(str::trim)
                        .filter(|t| !t.is_empty())
                        .map(str::parse)
                        .collect::<Result<Vec<ClusterSpec>>>()
                        .map_err(at)?,
                )
            }
            "synth_seed" => synth_seed = Some(parse_num(key, value).map_err(at)?),
            "methods" => cfg.methods = parse_method_list(value).map_err(at)?,
            "kernel" => kernel = value.to_ascii_lowercase(),
            "sigma" => {
                sigma = if value.eq_ignore_ascii_case("auto") {
                    None
                } else {
                    Some(parse_num(key, value).map_err(at)?)
                }
            }
            "train_fraction" => cfg.train_fraction = parse_num(key, value).map_err(at)?,
            "repetitions" => cfg.repetitions = parse_num(key, value).map_err(at)?,
            "seed" => cfg.seed = parse_num(key, value).map_err(at)?,
            "classes" => {
                cfg.classes = if value.eq_ignore_ascii_case("all") {
                    None
                } else {
                    Some(
                        value
                            .split(',')
                            .map(|c| parse_num::<i64>(key, c.trim()))
                            .collect::<Result<Vec<_>>>()
                            .map_err(at)?,
                    )
                }
            }
            "dim_grid" => cfg.dim_grid = parse_grid(value).map_err(at)?,
            "k_grid" => cfg.k_grid = parse_grid(value).map_err(at)?,
            "folds" => cfg.folds = parse_num(key, value).map_err(at)?,
            "cross_validate" => cfg.cross_validate = parse_bool(key, value).map_err(at)?,
            "similarity" => cfg.similarity = value.parse().map_err(at)?,
            "output_dir" => cfg.output_dir = base_dir.join(value),
            "mu" => cfg.params.mu = parse_num(key, value).map_err(at)?,
            "zero_threshold" => threshold_eps = parse_num(key, value).map_err(at)?,
            "threshold_mode" => {
                threshold_mode = match value.to_ascii_lowercase().as_str() {
                    "relative" => ThresholdMode::Relative,
                    "absolute" => ThresholdMode::Absolute,
                    _ => {
                        return Err(at(Error::Config(format!(
                            "threshold_mode must be relative or absolute, got '{value}'"
                        ))))
                    }
                }
            }
            "alpha" => cfg.params.alpha = parse_num(key, value).map_err(at)?,
            "kmeans_restarts" => cfg.params.kmeans_restarts = parse_num(key, value).map_err(at)?,
            "kmeans_max_iters" => {
                cfg.params.kmeans_max_iters = parse_num(key, value).map_err(at)?
            }
            "kmeans_inertia" => {
                cfg.params.kmeans_selection = match value.to_ascii_lowercase().as_str() {
                    "squared" => InertiaKind::Squared,
                    "unsquared" => InertiaKind::Unsquared,
                    _ => {
                        return Err(at(Error::Config(format!(
                            "kmeans_inertia must be squared or unsquared, got '{value}'"
                        ))))
                    }
                }
            }
            _ => {
                return Err(Error::Config(format!(
                    "line {line_no}: unknown key '{key}'"
                )));
            }
        }
    }

    cfg.params.zero_threshold = ZeroThreshold {
        eps: threshold_eps,
        mode: threshold_mode,
    };
    cfg.kernel = match kernel.as_str() {
        "none" => KernelChoice::None,
        "linear" => KernelChoice::Linear,
        "rbf" => KernelChoice::Rbf(sigma),
        other => return Err(Error::Config(format!("unknown kernel '{other}'"))),
    };
    if sigma.is_some() && kernel != "rbf" {
        return Err(Error::Config(
            "sigma is only meaningful for the rbf kernel".into(),
        ));
    }

    let any_synth = synth_dim.is_some()
        || synth_positive.is_some()
        || synth_negatives.is_some()
        || synth_seed.is_some();
    cfg.data = match (dataset, any_synth) {
        (Some(_), true) => {
            return Err(Error::Config(
                "give either dataset or synth_* keys, not both".into(),
            ))
        }
        (Some(path), false) => DataSource::Csv { path, has_header },
        (None, true) => DataSource::Synth(SynthSpec {
            dim: synth_dim.ok_or_else(|| Error::Config("synth_dim is required".into()))?,
            positive: synth_positive
                .ok_or_else(|| Error::Config("synth_positive is required".into()))?,
            negatives: synth_negatives
                .ok_or_else(|| Error::Config("synth_negatives is required".into()))?,
            seed: synth_seed.unwrap_or(cfg.seed),
        }),
        (None, false) => {
            return Err(Error::Config(
                "no dataset or synthetic data specified".into(),
            ))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SYNTH: &str = "\
# three-class mixture
synth_dim = 10
synth_positive = 20:10:1
synth_negatives = 20:rand(8,12):1; 20:12:1
methods = csda; ncsda:EC+s4; rocsda:gend
kernel = rbf
sigma = auto
repetitions = 2   # short run
seed = 9
dim_grid = 1-5,8
k_grid = 1,2
threshold_mode = absolute
zero_threshold = 1e-12
";

    #[test]
    fn parses_a_full_config() {
        let cfg = parse_config(SYNTH, Path::new("/tmp")).unwrap();
        assert_eq!(cfg.methods.len(), 3);
        assert_eq!(cfg.repetitions, 2);
        assert_eq!(cfg.dim_grid, vec![1, 2, 3, 4, 5, 8]);
        assert_eq!(cfg.k_grid, vec![1, 2]);
        assert_eq!(cfg.kernel, KernelChoice::Rbf(None));
        assert_eq!(cfg.params.zero_threshold, ZeroThreshold::absolute(1e-12));
        match &cfg.data {
            DataSource::Synth(s) => {
                assert_eq!(s.negatives.len(), 2);
                assert_eq!(s.seed, 9);
            }
            other => panic!("unexpected source {other:?}"),
        }
        assert_eq!(cfg.train_fraction, 0.7);
    }

    #[test]
    fn rejects_unknown_and_invalid_keys() {
        let unknown = format!("{SYNTH}colour = blue\n");
        assert!(matches!(
            parse_config(&unknown, Path::new(".")),
            Err(Error::Config(m)) if m.contains("unknown key")
        ));
        let frac = format!("{SYNTH}train_fraction = 1.5\n");
        assert!(matches!(
            parse_config(&frac, Path::new(".")),
            Err(Error::Config(_))
        ));
        let reps = SYNTH.replace("repetitions = 2", "repetitions = 0");
        assert!(parse_config(&reps, Path::new(".")).is_err());
        let both = format!("{SYNTH}dataset = x.csv\n");
        assert!(parse_config(&both, Path::new(".")).is_err());
        assert!(parse_config("seed = 1\n", Path::new(".")).is_err());
        let dup = format!("{SYNTH}seed = 3\n");
        assert!(parse_config(&dup, Path::new(".")).is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("1-25").unwrap().len(), 25);
        assert_eq!(parse_grid("10,1,2,3,5").unwrap(), vec![1, 2, 3, 5, 10]);
        assert!(parse_grid("5-1").is_err());
        assert!(parse_grid("a").is_err());
    }
}
