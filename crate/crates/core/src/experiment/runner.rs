//! One-vs-rest protocol: split, embed, cross-validate, fit, score, diagnose.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::csda::criterion_values;
use crate::error::{Error, Result};
use crate::eval::{
    average_precision_11pt, cross_validate, score_samples, split_classes, CvOptions, Split,
};
use crate::kernel::{npt_fit, npt_transform};
use crate::rng::{derive_seed, rng_from};
use crate::scatter::{center_to_positive_mean, scatter_about, scatter_matrices};

use super::config::{DataSource, ExperimentConfig};
use super::data::{load_csv, synth_generate, Dataset};
use super::method::MethodSpec;

/// One line of the results table.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub class: i64,
    pub rep: usize,
    pub method: String,
    pub dim: usize,
    /// Cluster count for the heterogeneous methods, 0 otherwise.
    pub k: usize,
    pub split: Split,
    pub ap: f64,
    pub a_sum: f64,
    pub a_frob: f64,
    pub b: f64,
}

pub fn load_dataset(source: &DataSource) -> Result<Dataset> {
    match source {
        DataSource::Csv { path, has_header } => load_csv(path, *has_header),
        DataSource::Synth(spec) => synth_generate(spec),
    }
}

/// Per-class train/test split; each class keeps `round(fraction·n)` training
/// samples, at least one on each side when it has two or more.
pub fn stratified_split(labels: &[i64], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for c in classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng_from(derive_seed(seed, &[c as u64])));
        let n = idx.len();
        let mut n_train = (fraction * n as f64).round() as usize;
        if n >= 2 {
            n_train = n_train.clamp(1, n - 1);
        } else {
            n_train = n;
        }
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Training and test features in the embedded space of one repetition.
struct Embedded {
    train: DMatrix<f64>,
    train_labels: Vec<i64>,
    test: DMatrix<f64>,
    test_labels: Vec<i64>,
}

fn embed(data: &Dataset, cfg: &ExperimentConfig, rep: usize) -> Result<Embedded> {
    let (train_idx, test_idx) = stratified_split(
        &data.labels,
        cfg.train_fraction,
        derive_seed(cfg.seed, &[rep as u64]),
    );
    let train = data.subset(&train_idx);
    let test = data.subset(&test_idx);
    // The kernel width and the embedding see training samples only.
    let (ztrain, ztest) = match cfg.kernel.resolve(&train.features)? {
        None => (train.features.clone(), test.features.clone()),
        Some(spec) => {
            let model = npt_fit(&train.features, spec, cfg.params.zero_threshold)?;
            let zt = npt_transform(&model, &test.features)?;
            (model.train_mapped(), zt)
        }
    };
    Ok(Embedded {
        train: ztrain,
        train_labels: train.labels,
        test: ztest,
        test_labels: test.labels,
    })
}

fn run_one(
    e: &Embedded,
    cfg: &ExperimentConfig,
    class: i64,
    class_index: usize,
    rep: usize,
    method: &MethodSpec,
) -> Result<Vec<ResultRow>> {
    let pos_train: Vec<bool> = e.train_labels.iter().map(|&l| l == class).collect();
    let pos_test: Vec<bool> = e.test_labels.iter().map(|&l| l == class).collect();
    let seed = derive_seed(cfg.seed, &[rep as u64, class_index as u64]);
    let max_dim = cfg.max_dim();
    let fit = |d: &crate::scatter::ClassSplitData, k: usize, s: u64| {
        method.fit(d, k, s, max_dim, &cfg.params)
    };
    let ks = if method.uses_clusters() {
        cfg.k_grid.clone()
    } else {
        vec![0]
    };

    let (dim, k) = if cfg.cross_validate {
        let opts = CvOptions {
            folds: cfg.folds,
            dims: cfg.dim_grid.clone(),
            ks: ks.clone(),
            bound_k_by_negatives: method.uses_clusters(),
            similarity: cfg.similarity,
            seed,
        };
        let out = cross_validate(&e.train, &pos_train, fit, &opts)?;
        (out.chosen_dim, out.chosen_k)
    } else {
        (max_dim, ks[0])
    };

    let (xp, xn) = split_classes(&e.train, &pos_train, |_| true);
    let data = center_to_positive_mean(&xp, &xn)?;
    let model = fit(&data, k, derive_seed(seed, &[u64::MAX]))?.truncated(dim);

    let train_s = scatter_matrices(&data, cfg.params.zero_threshold)?;
    let (tp, tn) = split_classes(&e.test, &pos_test, |_| true);
    let test_s = scatter_about(&tp, &tn, &data.positive_mean, cfg.params.zero_threshold)?;

    let mut rows = Vec::with_capacity(2);
    for (split, x, positive, scatters) in [
        (Split::Train, &e.train, &pos_train, &train_s),
        (Split::Test, &e.test, &pos_test, &test_s),
    ] {
        let labels: Vec<i8> = positive.iter().map(|&p| if p { 1 } else { -1 }).collect();
        let ranked = score_samples(&model, x, &data.positive_mean, &labels, cfg.similarity)?;
        let ap = average_precision_11pt(&ranked)?;
        let r = criterion_values(scatters, &model.projection, cfg.params.zero_threshold)?;
        rows.push(ResultRow {
            class,
            rep,
            method: method.to_string(),
            dim: model.output_dim(),
            k,
            split,
            ap,
            a_sum: r.constraint_a_sum,
            a_frob: r.constraint_a_frob,
            b: r.criterion_b,
        });
    }
    Ok(rows)
}

/// Runs every (repetition, class, method) combination. Rows come back in
/// that key order regardless of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let data = load_dataset(&cfg.data)?;
    let all_classes = data.classes();
    if all_classes.len() < 2 {
        return Err(Error::Input("dataset needs at least two classes".into()));
    }
    let classes = match &cfg.classes {
        None => all_classes.clone(),
        Some(list) => {
            if let Some(missing) = list.iter().find(|c| !all_classes.contains(c)) {
                return Err(Error::Input(format!(
                    "class {missing} does not occur in the data"
                )));
            }
            list.clone()
        }
    };
    log::info!(
        "{} samples, {} features, {} classes, {} methods, {} repetitions",
        data.len(),
        data.dim(),
        all_classes.len(),
        cfg.methods.len(),
        cfg.repetitions
    );

    let embedded = (0..cfg.repetitions)
        .into_par_iter()
        .map(|r| embed(&data, cfg, r).map_err(|e| e.context(format!("repetition {r}"))))
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize, usize)> = (0..cfg.repetitions)
        .flat_map(|r| {
            (0..classes.len()).flat_map(move |c| (0..cfg.methods.len()).map(move |m| (r, c, m)))
        })
        .collect();
    let per_job = jobs
        .par_iter()
        .map(|&(r, c, m)| {
            let method = &cfg.methods[m];
            run_one(&embedded[r], cfg, classes[c], c, r, method).map_err(|e| {
                e.context(format!(
                    "class {}, repetition {r}, method {method}",
                    classes[c]
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_stratified() {
        let labels: Vec<i64> = (0..53).map(|i| i % 3).collect();
        let (train, test) = stratified_split(&labels, 0.7, 4);
        assert_eq!(train.len() + test.len(), 53);
        for c in 0..3 {
            let n = labels.iter().filter(|&&l| l == c).count() as f64;
            let nt = train.iter().filter(|&&i| labels[i] == c).count() as f64;
            assert!((nt - 0.7 * n).abs() <= 1.0);
        }
        assert_eq!(
            (train.clone(), test.clone()),
            stratified_split(&labels, 0.7, 4)
        );
        let mut all: Vec<usize> = train.into_iter().chain(test).collect();
        all.sort();
        assert_eq!(all, (0..53).collect::<Vec<_>>());
    }

    #[test]
    fn tiny_classes_keep_one_test_sample() {
        let labels = vec![0, 0, 1, 1, 1];
        let (train, test) = stratified_split(&labels, 0.9, 0);
        assert_eq!(train.len(), 3);
        assert_eq!(test.len(), 2);
    }
}
