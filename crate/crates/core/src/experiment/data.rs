//! CSV datasets (one sample per row, class id in the last column) and
//! synthetic Gaussian mixtures.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};

/// Features as columns (D × N) with one class id per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: DMatrix<f64>,
    pub labels: Vec<i64>,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.features.nrows()
    }

    pub fn len(&self) -> usize {
        self.features.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Distinct class ids, ascending.
    pub fn classes(&self) -> Vec<i64> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_columns(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

pub fn parse_csv(text: &str, has_header: bool) -> Result<Dataset> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if (has_header && i == 0) || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: line_no,
                message: "expected feature columns followed by a class column".into(),
            });
        }
        if let Some(w) = width {
            if fields.len() != w {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {w} fields, found {}", fields.len()),
                });
            }
        }
        width = Some(fields.len());
        let (class, feats) = fields.split_last().expect("at least two fields");
        let label = class.parse::<i64>().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("class id '{class}' is not an integer"),
        })?;
        let values = feats
            .iter()
            .enumerate()
            .map(|(c, f)| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line: line_no,
                        message: format!("feature {} value '{f}' is not a finite number", c + 1),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(Error::Input("dataset has no samples".into()));
    }
    let d = rows[0].len();
    let features = DMatrix::from_fn(d, rows.len(), |r, c| rows[c][r]);
    Ok(Dataset { features, labels })
}

pub fn load_csv(path: &Path, has_header: bool) -> Result<Dataset> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
    parse_csv(&text, has_header).map_err(|e| e.context(path.display().to_string()))
}

pub fn format_csv(data: &Dataset) -> String {
    let mut out = String::new();
    for (j, label) in data.labels.iter().enumerate() {
        for v in data.features.column(j).iter() {
            write!(out, "{v},").expect("writing to a string");
        }
        writeln!(out, "{label}").expect("writing to a string");
    }
    out
}

pub fn write_csv(path: &Path, data: &Dataset) -> Result<()> {
    fs::write(path, format_csv(data))
        .map_err(|e| Error::from(e).context(format!("writing {}", path.display())))
}

/// Where a cluster's mean comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum MeanSpec {
    /// The same value in every coordinate.
    Constant(f64),
    /// An explicit vector of length D.
    Vector(Vec<f64>),
    /// Each coordinate drawn uniformly from `[lo, hi)` with a seed derived
    /// from the dataset seed and the cluster index.
    Uniform { lo: f64, hi: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterSpec {
    pub count: usize,
    pub mean: MeanSpec,
    pub stdev: f64,
}

impl std::str::FromStr for ClusterSpec {
    type Err = Error;

    /// `count:mean:stdev` where mean is `v`, `v1,v2,...` or `rand(lo,hi)`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: &str| Error::Config(format!("cluster '{s}': {m}"));
        let parts: Vec<&str> = s.trim().split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(bad("expected count:mean:stdev"));
        }
        let count = parts[0]
            .parse::<usize>()
            .map_err(|_| bad("count is not an integer"))?;
        let stdev = parts[2]
            .parse::<f64>()
            .map_err(|_| bad("stdev is not a number"))?;
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| bad("mean is not numeric"))
        };
        let mean = if let Some(inner) = parts[1]
            .strip_prefix("rand(")
            .and_then(|r| r.strip_suffix(')'))
        {
            let b: Vec<&str> = inner.split(',').collect();
            if b.len() != 2 {
                return Err(bad("rand needs two bounds"));
            }
            MeanSpec::Uniform {
                lo: num(b[0])?,
                hi: num(b[1])?,
            }
        } else if parts[1].contains(',') {
            MeanSpec::Vector(parts[1].split(',').map(num).collect::<Result<_>>()?)
        } else {
            MeanSpec::Constant(num(parts[1])?)
        };
        Ok(Self { count, mean, stdev })
    }
}

impl std::fmt::Display for ClusterSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mean = match &self.mean {
            MeanSpec::Constant(v) => v.to_string(),
            MeanSpec::Vector(v) => v.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
            MeanSpec::Uniform { lo, hi } => format!("rand({lo},{hi})"),
        };
        write!(f, "{}:{}:{}", self.count, mean, self.stdev)
    }
}

/// Positive class (label 0) plus negative clusters (labels 1..=k).
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub dim: usize,
    pub positive: ClusterSpec,
    pub negatives: Vec<ClusterSpec>,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config(
                "synthetic dimension must be at least 1".into(),
            ));
        }
        if self.negatives.is_empty() {
            return Err(Error::Config(
                "at least one negative cluster is required".into(),
            ));
        }
        for c in std::iter::once(&self.positive).chain(&self.negatives) {
            if c.count == 0 {
                return Err(Error::Config(format!("cluster '{c}' has no samples")));
            }
            if !(c.stdev >= 0.0 && c.stdev.is_finite()) {
                return Err(Error::Config(format!("cluster '{c}' has an invalid stdev")));
            }
            match &c.mean {
                MeanSpec::Vector(v) if v.len() != self.dim => {
                    return Err(Error::Config(format!(
                        "cluster '{c}' mean has {} entries, dimension is {}",
                        v.len(),
                        self.dim
                    )))
                }
                MeanSpec::Uniform { lo, hi } if !(lo < hi) => {
                    return Err(Error::Config(format!("cluster '{c}' has an empty range")))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Resolved mean of cluster `index` (0 = positive).
    pub fn cluster_mean(&self, index: usize) -> DVector<f64> {
        let c = if index == 0 {
            &self.positive
        } else {
            &self.negatives[index - 1]
        };
        match &c.mean {
            MeanSpec::Constant(v) => DVector::from_element(self.dim, *v),
            MeanSpec::Vector(v) => DVector::from_column_slice(v),
            MeanSpec::Uniform { lo, hi } => {
                let mut rng = rng_from(derive_seed(self.seed, &[0x6d65_616e, index as u64]));
                DVector::from_fn(self.dim, |_, _| rng.random_range(*lo..*hi))
            }
        }
    }
}

pub fn synth_generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let clusters: Vec<&ClusterSpec> = std::iter::once(&spec.positive)
        .chain(&spec.negatives)
        .collect();
    let n: usize = clusters.iter().map(|c| c.count).sum();
    let mut features = DMatrix::zeros(spec.dim, n);
    let mut labels = Vec::with_capacity(n);
    let mut col = 0;
    for (index, c) in clusters.iter().enumerate() {
        let mean = spec.cluster_mean(index);
        let mut rng = rng_from(derive_seed(spec.seed, &[index as u64]));
        let noise =
            Normal::new(0.0, c.stdev).map_err(|e| Error::Config(format!("cluster '{c}': {e}")))?;
        for _ in 0..c.count {
            for r in 0..spec.dim {
                features[(r, col)] = mean[r] + noise.sample(&mut rng);
            }
            labels.push(index as i64);
            col += 1;
        }
    }
    Ok(Dataset { features, labels })
}
