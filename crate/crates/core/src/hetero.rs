//! Heterogeneous solvers: the negative class is clustered in the projected
//! space and the between-cluster scatter is maximized.

use nalgebra::{DMatrix, DVector};

use crate::csda::{SubspaceModel, DEFAULT_MU};
use crate::error::{Error, Result};
use crate::kmeans::{kmeans, InertiaKind, KMeansOptions};
use crate::linalg::{self, ZeroThreshold};
use crate::nullspace::{
    compose, map_data, null_basis, require_null_space, row_space, Eigenproblem,
};
use crate::orthogonal::whiten;
use crate::scatter::{cluster_scatters_of, ClassSplitData, ClusterScatter};

pub const DEFAULT_K_GRID: [usize; 5] = [1, 2, 3, 5, 10];

#[derive(Clone, Debug)]
pub struct HeteroConfig {
    pub k: usize,
    pub mu: f64,
    pub zero_threshold: ZeroThreshold,
    pub kmeans_restarts: usize,
    pub kmeans_max_iters: usize,
    pub kmeans_selection: InertiaKind,
    pub seed: u64,
    pub target_dim: Option<usize>,
}

impl HeteroConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            mu: DEFAULT_MU,
            zero_threshold: ZeroThreshold::default(),
            kmeans_restarts: 10,
            kmeans_max_iters: 300,
            kmeans_selection: InertiaKind::Squared,
            seed,
            target_dim: None,
        }
    }

    pub fn validate(&self, n_neg: usize) -> Result<()> {
        self.zero_threshold.validate()?;
        if self.k == 0 {
            return Err(Error::Config("cluster count must be at least 1".into()));
        }
        if self.k > n_neg {
            return Err(Error::Input(format!(
                "cluster count {} exceeds the {n_neg} negative samples",
                self.k
            )));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Config(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        if self.target_dim == Some(0) {
            return Err(Error::Config("target dimension must be at least 1".into()));
        }
        Ok(())
    }

    fn kmeans_options(&self) -> KMeansOptions {
        KMeansOptions {
            restarts: self.kmeans_restarts,
            max_iters: self.kmeans_max_iters,
            seed: self.seed,
            selection: self.kmeans_selection,
        }
    }
}

/// Fitted model plus the clustering it was built from.
#[derive(Clone, Debug)]
pub struct HeteroFit {
    pub model: SubspaceModel,
    pub assignments: Vec<usize>,
    /// Cluster scatters in the projected space where clustering ran.
    pub projected: ClusterScatter,
}

struct ClusterBasis {
    m: DMatrix<f64>,
    values: DVector<f64>,
    assignments: Vec<usize>,
    scatter: ClusterScatter,
}

/// Clusters (or takes the given labels for) the projected negatives and
/// returns the non-zero eigenvectors of their between-cluster scatter.
fn between_cluster_basis(
    xn_star: &DMatrix<f64>,
    cfg: &HeteroConfig,
    labels: Option<&[usize]>,
) -> Result<ClusterBasis> {
    let assignments = match labels {
        Some(l) => l.to_vec(),
        None => kmeans(xn_star, cfg.k, &cfg.kmeans_options())?.assignments,
    };
    let cs = cluster_scatters_of(xn_star, &assignments, cfg.k)?;
    let e = linalg::sym_eig(&cs.snb)?;
    let max = e.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let keep = e
        .values
        .iter()
        .take_while(|v| **v > 0.0 && !cfg.zero_threshold.is_zero(**v, max))
        .count();
    if keep == 0 {
        return Err(Error::Degenerate("between-cluster scatter vanishes".into()));
    }
    Ok(ClusterBasis {
        m: e.vectors.columns(0, keep).into_owned(),
        values: e.values.rows(0, keep).into_owned(),
        assignments,
        scatter: cs,
    })
}

fn hncsda_impl(
    data: &ClassSplitData,
    cfg: &HeteroConfig,
    labels: Option<&[usize]>,
) -> Result<HeteroFit> {
    cfg.validate(data.n_neg())?;
    let svd = row_space(data, cfg.zero_threshold)?;
    let mapped = map_data(data, svd.u);
    require_null_space(&mapped.sp, cfg.zero_threshold)?;
    let (v, _) = null_basis(&mapped, Eigenproblem::C, cfg.mu, cfg.zero_threshold)?;
    let xn_star = v.transpose() * &mapped.xn;
    let cb = between_cluster_basis(&xn_star, cfg, labels)?;
    let w = &mapped.p * v * cb.m;
    let tag = format!("hncsda-k{}", cfg.k);
    let model = compose(w, cb.values, true, tag, cfg.target_dim)?;
    Ok(HeteroFit {
        model,
        assignments: cb.assignments,
        projected: cb.scatter,
    })
}

fn hocsda_impl(
    data: &ClassSplitData,
    cfg: &HeteroConfig,
    labels: Option<&[usize]>,
) -> Result<HeteroFit> {
    cfg.validate(data.n_neg())?;
    // Plain whitening here, never the regularized one.
    let mapped = whiten(data, 0.0, cfg.zero_threshold)?;
    let cb = between_cluster_basis(&mapped.xn, cfg, labels)?;
    let w = &mapped.p * cb.m;
    let tag = format!("hocsda-k{}", cfg.k);
    let model = compose(w, cb.values, true, tag, cfg.target_dim)?;
    Ok(HeteroFit {
        model,
        assignments: cb.assignments,
        projected: cb.scatter,
    })
}

pub fn hncsda_fit(data: &ClassSplitData, cfg: &HeteroConfig) -> Result<SubspaceModel> {
    Ok(hncsda_impl(data, cfg, None)?.model)
}

pub fn hocsda_fit(data: &ClassSplitData, cfg: &HeteroConfig) -> Result<SubspaceModel> {
    Ok(hocsda_impl(data, cfg, None)?.model)
}

/// HNCSDA with its clustering exposed.
pub fn hncsda_fit_detailed(data: &ClassSplitData, cfg: &HeteroConfig) -> Result<HeteroFit> {
    hncsda_impl(data, cfg, None)
}

/// HOCSDA with its clustering exposed.
pub fn hocsda_fit_detailed(data: &ClassSplitData, cfg: &HeteroConfig) -> Result<HeteroFit> {
    hocsda_impl(data, cfg, None)
}

/// HNCSDA with known negative subclass labels in place of k-means.
pub fn hncsda_fit_labeled(
    data: &ClassSplitData,
    cfg: &HeteroConfig,
    labels: &[usize],
) -> Result<HeteroFit> {
    hncsda_impl(data, cfg, Some(labels))
}

/// HOCSDA with known negative subclass labels in place of k-means.
pub fn hocsda_fit_labeled(
    data: &ClassSplitData,
    cfg: &HeteroConfig,
    labels: &[usize],
) -> Result<HeteroFit> {
    hocsda_impl(data, cfg, Some(labels))
}
