//! Ranking by similarity to the positive mean, 11-point interpolated average
//! precision, cross-validation over dimension and cluster count, and the
//! constraint diagnostics.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::csda::{criterion_values, CriterionReport, SubspaceModel};
use crate::error::{Error, Result};
use crate::linalg::ZeroThreshold;
use crate::rng::{derive_seed, rng_from};
use crate::scatter::{center_to_positive_mean, ClassSplitData, ScatterSet};

pub const DEFAULT_DIM_GRID: std::ops::RangeInclusive<usize> = 1..=25;
pub const DEFAULT_FOLDS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Similarity {
    /// Negative Euclidean distance to the projected positive mean.
    #[default]
    Euclidean,
    /// Cosine between the projected sample and the projected positive mean,
    /// both taken in input coordinates (zero when either vanishes).
    Cosine,
}

impl std::str::FromStr for Similarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "euclidean" => Ok(Self::Euclidean),
            "cosine" => Ok(Self::Cosine),
            _ => Err(Error::Config(format!("unknown similarity '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankedResult {
    pub scores: Vec<f64>,
    /// Sample indices by descending score; ties keep the original order.
    pub order: Vec<usize>,
    /// +1 for the class of interest, −1 otherwise.
    pub labels: Vec<i8>,
}

impl RankedResult {
    pub fn from_scores(scores: Vec<f64>, labels: Vec<i8>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} scores for {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|l| **l != 1 && **l != -1) {
            return Err(Error::Input(format!("labels must be +1 or -1, got {bad}")));
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::Numeric("NaN similarity score".into()));
        }
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        Ok(Self {
            scores,
            order,
            labels,
        })
    }

    /// Labels in ranked order, positives as `true`.
    pub fn ranked_relevance(&self) -> Vec<bool> {
        self.order.iter().map(|&i| self.labels[i] == 1).collect()
    }
}

/// Converts a positive-class mask into ±1 labels.
pub fn signed_labels(positive: &[bool]) -> Vec<i8> {
    positive.iter().map(|&p| if p { 1 } else { -1 }).collect()
}

pub fn score_samples(
    model: &SubspaceModel,
    x: &DMatrix<f64>,
    positive_mean: &DVector<f64>,
    labels: &[i8],
    similarity: Similarity,
) -> Result<RankedResult> {
    if x.nrows() != model.input_dim() || positive_mean.len() != model.input_dim() {
        return Err(Error::Dimension(format!(
            "model expects {} features, samples have {} and the mean {}",
            model.input_dim(),
            x.nrows(),
            positive_mean.len()
        )));
    }
    let w = &model.projection;
    let scores = match similarity {
        Similarity::Euclidean => {
            let mut centered = x.clone();
            for mut c in centered.column_iter_mut() {
                c -= positive_mean;
            }
            let z = w.transpose() * centered;
            z.column_iter().map(|c| -c.norm()).collect()
        }
        Similarity::Cosine => {
            let anchor = w.transpose() * positive_mean;
            let z = w.transpose() * x;
            let an = anchor.norm();
            z.column_iter()
                .map(|c| {
                    let denom = c.norm() * an;
                    if denom == 0.0 {
                        0.0
                    } else {
                        c.dot(&anchor) / denom
                    }
                })
                .collect()
        }
    };
    RankedResult::from_scores(scores, labels.to_vec())
}

/// The 11 interpolated precisions as exact fractions `(true positives, k)`:
/// for recall level `i/10` the best precision over prefixes whose recall is
/// at least that level.
pub fn interpolated_precisions(ranked: &RankedResult) -> Result<[(usize, usize); 11]> {
    let relevance = ranked.ranked_relevance();
    let total = relevance.iter().filter(|r| **r).count();
    if total == 0 {
        return Err(Error::UndefinedAp);
    }
    let mut prefix = Vec::with_capacity(relevance.len());
    let mut tp = 0;
    for (k, &r) in relevance.iter().enumerate() {
        tp += usize::from(r);
        prefix.push((tp, k + 1));
    }
    let mut out = [(0usize, 1usize); 11];
    for (i, slot) in out.iter_mut().enumerate() {
        // Recall tp/P ≥ i/10, compared in integers.
        let best = prefix
            .iter()
            .filter(|(tp, _)| 10 * tp >= i * total)
            .copied()
            .reduce(|a, b| if b.0 * a.1 > a.0 * b.1 { b } else { a });
        *slot = best.expect("the full ranking reaches recall 1");
    }
    Ok(out)
}

pub fn average_precision_11pt(ranked: &RankedResult) -> Result<f64> {
    let p = interpolated_precisions(ranked)?;
    Ok(p.iter().map(|&(tp, k)| tp as f64 / k as f64).sum::<f64>() / 11.0)
}

pub fn average_precision_from_scores(scores: &[f64], positive: &[bool]) -> Result<f64> {
    average_precision_11pt(&RankedResult::from_scores(
        scores.to_vec(),
        signed_labels(positive),
    )?)
}

/// Assigns each sample to one of `folds` folds, stratified by class.
pub fn stratified_folds(positive: &[bool], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::Fold(format!("need at least 2 folds, got {folds}")));
    }
    let mut out = vec![0; positive.len()];
    for (c, class) in [true, false].into_iter().enumerate() {
        let mut idx: Vec<usize> = (0..positive.len())
            .filter(|&i| positive[i] == class)
            .collect();
        if idx.len() < folds {
            return Err(Error::Fold(format!(
                "{} {} samples cannot fill {folds} folds",
                idx.len(),
                if class { "positive" } else { "negative" }
            )));
        }
        idx.shuffle(&mut rng_from(derive_seed(seed, &[c as u64])));
        for (pos, &i) in idx.iter().enumerate() {
            out[i] = pos % folds;
        }
    }
    Ok(out)
}

/// Positive and negative columns of `x` selected by a sample mask.
pub fn split_classes(
    x: &DMatrix<f64>,
    positive: &[bool],
    keep: impl Fn(usize) -> bool,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let pos: Vec<usize> = (0..x.ncols()).filter(|&i| keep(i) && positive[i]).collect();
    let neg: Vec<usize> = (0..x.ncols())
        .filter(|&i| keep(i) && !positive[i])
        .collect();
    (x.select_columns(&pos), x.select_columns(&neg))
}

#[derive(Clone, Debug)]
pub struct CvOptions {
    pub folds: usize,
    pub dims: Vec<usize>,
    pub ks: Vec<usize>,
    /// Skip cluster counts above the negatives available in a fold.
    pub bound_k_by_negatives: bool,
    pub similarity: Similarity,
    pub seed: u64,
}

impl CvOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            folds: DEFAULT_FOLDS,
            dims: DEFAULT_DIM_GRID.collect(),
            ks: vec![1],
            bound_k_by_negatives: false,
            similarity: Similarity::Euclidean,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvRow {
    pub dim: usize,
    pub k: usize,
    pub mean_ap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvOutcome {
    pub chosen_dim: usize,
    pub chosen_k: usize,
    pub best_ap: f64,
    pub table: Vec<CvRow>,
}

/// Picks the (dim, K) pair with the best mean validation AP.
///
/// `fit` receives positive-centered fold training data, a cluster count and a
/// seed, and returns a full-width model; every dimension candidate is
/// evaluated by truncating that model.
pub fn cross_validate<F>(
    x: &DMatrix<f64>,
    positive: &[bool],
    fit: F,
    opts: &CvOptions,
) -> Result<CvOutcome>
where
    F: Fn(&ClassSplitData, usize, u64) -> Result<SubspaceModel> + Sync,
{
    if x.ncols() != positive.len() {
        return Err(Error::Dimension(format!(
            "{} samples but {} labels",
            x.ncols(),
            positive.len()
        )));
    }
    if opts.dims.is_empty() || opts.ks.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    if opts.dims.contains(&0) {
        return Err(Error::Config(
            "dimension candidates must be positive".into(),
        ));
    }
    let fold_of = stratified_folds(positive, opts.folds, opts.seed)?;
    let jobs: Vec<(usize, usize)> = (0..opts.folds)
        .flat_map(|f| opts.ks.iter().map(move |&k| (f, k)))
        .collect();

    // Per (fold, K): validation AP for every dimension, or None when skipped.
    let results: Vec<Option<Vec<f64>>> = jobs
        .par_iter()
        .map(|&(f, k)| -> Result<Option<Vec<f64>>> {
            let (xp, xn) = split_classes(x, positive, |i| fold_of[i] != f);
            if opts.bound_k_by_negatives && k > xn.ncols() {
                return Ok(None);
            }
            let train = center_to_positive_mean(&xp, &xn)?;
            let model = fit(&train, k, derive_seed(opts.seed, &[f as u64, k as u64]))
                .map_err(|e| e.context(format!("fold {f}, K = {k}")))?;
            let val: Vec<usize> = (0..x.ncols()).filter(|&i| fold_of[i] == f).collect();
            let xv = x.select_columns(&val);
            let labels: Vec<i8> = val
                .iter()
                .map(|&i| if positive[i] { 1 } else { -1 })
                .collect();
            let aps = opts
                .dims
                .iter()
                .map(|&d| {
                    let ranked = score_samples(
                        &model.truncated(d),
                        &xv,
                        &train.positive_mean,
                        &labels,
                        opts.similarity,
                    )?;
                    average_precision_11pt(&ranked)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(Some(aps))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut table = Vec::new();
    for (ki, &k) in opts.ks.iter().enumerate() {
        let per_fold: Vec<&Vec<f64>> = (0..opts.folds)
            .filter_map(|f| results[f * opts.ks.len() + ki].as_ref())
            .collect();
        // A K candidate counts only when every fold could evaluate it.
        if per_fold.len() != opts.folds {
            continue;
        }
        for (di, &dim) in opts.dims.iter().enumerate() {
            let mean_ap = per_fold.iter().map(|v| v[di]).sum::<f64>() / opts.folds as f64;
            table.push(CvRow { dim, k, mean_ap });
        }
    }
    let best = table
        .iter()
        .reduce(|a, b| {
            let better =
                b.mean_ap > a.mean_ap || (b.mean_ap == a.mean_ap && (b.dim, b.k) < (a.dim, a.k));
            if better {
                b
            } else {
                a
            }
        })
        .ok_or_else(|| Error::Fold("no cluster-count candidate fits every fold".into()))?
        .clone();
    Ok(CvOutcome {
        chosen_dim: best.dim,
        chosen_k: best.k,
        best_ap: best.mean_ap,
        table,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn label(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticRow {
    pub model: String,
    pub split: Split,
    pub a_sum: f64,
    pub a_frob: f64,
    pub b: f64,
}

/// Constraint A (entry sum and Frobenius) and spread B for each model on
/// training scatters and on test scatters built about the training mean.
pub fn diagnostics_table(
    models: &[(String, &SubspaceModel)],
    train: &ScatterSet,
    test: &ScatterSet,
    threshold: ZeroThreshold,
) -> Result<Vec<DiagnosticRow>> {
    let mut rows = Vec::with_capacity(2 * models.len());
    for (name, model) in models {
        for (split, s) in [(Split::Train, train), (Split::Test, test)] {
            let r: CriterionReport = criterion_values(s, &model.projection, threshold)?;
            rows.push(DiagnosticRow {
                model: name.clone(),
                split,
                a_sum: r.constraint_a_sum,
                a_frob: r.constraint_a_frob,
                b: r.criterion_b,
            });
        }
    }
    Ok(rows)
}

/// Per-class AP and their unweighted mean, with the selected hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub ap: f64,
    pub per_class_ap: BTreeMap<i64, f64>,
    pub chosen_dim: usize,
    pub chosen_k: usize,
    pub diagnostics: Vec<CriterionReport>,
}

impl EvalReport {
    pub fn from_per_class(
        per_class_ap: BTreeMap<i64, f64>,
        chosen_dim: usize,
        chosen_k: usize,
        diagnostics: Vec<CriterionReport>,
    ) -> Result<Self> {
        if per_class_ap.is_empty() {
            return Err(Error::Input("no per-class results to aggregate".into()));
        }
        let ap = per_class_ap.values().sum::<f64>() / per_class_ap.len() as f64;
        Ok(Self {
            ap,
            per_class_ap,
            chosen_dim,
            chosen_k,
            diagnostics,
        })
    }
}
