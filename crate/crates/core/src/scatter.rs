//! Positive-mean centering and scatter matrices.
//!
//! Every scatter is measured about the positive class mean, so after
//! centering `Sp = XpXpᵀ`, `Sn = XnXnᵀ` and `St = XXᵀ = Sp + Sn`. Each one is
//! formed as `M Mᵀ` from its own freshly materialized sample matrix and then
//! symmetrized; slicing columns out of a shared matrix is avoided.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, ZeroThreshold};

/// Positive and negative samples as columns, optionally centered on `m_p`.
#[derive(Clone, Debug)]
pub struct ClassSplitData {
    pub xp: DMatrix<f64>,
    pub xn: DMatrix<f64>,
    pub positive_mean: DVector<f64>,
    pub centered: bool,
}

impl ClassSplitData {
    pub fn dim(&self) -> usize {
        self.xp.nrows()
    }

    pub fn n_pos(&self) -> usize {
        self.xp.ncols()
    }

    pub fn n_neg(&self) -> usize {
        self.xn.ncols()
    }

    /// `[Xp Xn]` as one contiguous matrix.
    pub fn all(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut x = DMatrix::zeros(d, self.n_pos() + self.n_neg());
        x.columns_mut(0, self.n_pos()).copy_from(&self.xp);
        x.columns_mut(self.n_pos(), self.n_neg())
            .copy_from(&self.xn);
        x
    }

    /// Subtracts the stored positive mean from arbitrary samples, the way
    /// held-out data has to be prepared before scoring.
    pub fn center_samples(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.dim() {
            return Err(Error::Dimension(format!(
                "expected {} features, got {}",
                self.dim(),
                x.nrows()
            )));
        }
        Ok(subtract_column(x, &self.positive_mean))
    }

    pub(crate) fn require_centered(&self) -> Result<()> {
        if !self.centered {
            return Err(Error::State(
                "data must be centered to the positive mean".into(),
            ));
        }
        Ok(())
    }
}

fn subtract_column(x: &DMatrix<f64>, m: &DVector<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for mut c in out.column_iter_mut() {
        c -= m;
    }
    out
}

pub fn center_to_positive_mean(xp: &DMatrix<f64>, xn: &DMatrix<f64>) -> Result<ClassSplitData> {
    if xp.ncols() == 0 {
        return Err(Error::Input("positive class is empty".into()));
    }
    if xn.ncols() == 0 {
        return Err(Error::Input("negative class is empty".into()));
    }
    if xp.nrows() != xn.nrows() {
        return Err(Error::Dimension(format!(
            "positive samples have {} features, negatives {}",
            xp.nrows(),
            xn.nrows()
        )));
    }
    let m = xp.column_mean();
    Ok(ClassSplitData {
        xp: subtract_column(xp, &m),
        xn: subtract_column(xn, &m),
        positive_mean: m,
        centered: true,
    })
}

#[derive(Clone, Debug)]
pub struct ScatterRanks {
    pub sp: usize,
    pub sn: usize,
    pub st: usize,
}

#[derive(Clone, Debug)]
pub struct ScatterSet {
    pub sp: DMatrix<f64>,
    pub sn: DMatrix<f64>,
    pub st: DMatrix<f64>,
    pub ranks: ScatterRanks,
}

/// Numerical rank of a PSD matrix under the zero threshold.
pub fn psd_rank(s: &DMatrix<f64>, threshold: ZeroThreshold) -> Result<usize> {
    let eig = linalg::sym_eig(s)?;
    let max = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return Ok(0);
    }
    Ok(eig
        .values
        .iter()
        .filter(|v| **v > 0.0 && !threshold.is_zero(**v, max))
        .count())
}

pub fn scatter_matrices(data: &ClassSplitData, threshold: ZeroThreshold) -> Result<ScatterSet> {
    data.require_centered()?;
    let sp = linalg::gram(&data.xp);
    let sn = linalg::gram(&data.xn);
    let st = linalg::gram(&data.all());
    let ranks = ScatterRanks {
        sp: psd_rank(&sp, threshold)?,
        sn: psd_rank(&sn, threshold)?,
        st: psd_rank(&st, threshold)?,
    };
    Ok(ScatterSet { sp, sn, st, ranks })
}

/// Scatters of held-out data measured about a *training* positive mean.
pub fn scatter_about(
    xp: &DMatrix<f64>,
    xn: &DMatrix<f64>,
    positive_mean: &DVector<f64>,
    threshold: ZeroThreshold,
) -> Result<ScatterSet> {
    let data = ClassSplitData {
        xp: subtract_column(xp, positive_mean),
        xn: subtract_column(xn, positive_mean),
        positive_mean: positive_mean.clone(),
        centered: true,
    };
    scatter_matrices(&data, threshold)
}

/// Within-cluster and between-cluster decomposition of the negative scatter.
#[derive(Clone, Debug)]
pub struct ClusterScatter {
    pub snw: DMatrix<f64>,
    pub snb: DMatrix<f64>,
    pub cluster_sizes: Vec<usize>,
    pub centroids: DMatrix<f64>,
}

/// Builds `Snw = Σ_k Σ_j (x_kj − m_k)(x_kj − m_k)ᵀ` and
/// `Snb = Σ_k N_k m_k m_kᵀ` for negatives already centered on the positive
/// mean (so `m_p = 0`).
pub fn cluster_scatters_of(
    xn: &DMatrix<f64>,
    assignments: &[usize],
    k: usize,
) -> Result<ClusterScatter> {
    let (d, nn) = xn.shape();
    if k == 0 {
        return Err(Error::Input("cluster count must be at least 1".into()));
    }
    if assignments.len() != nn {
        return Err(Error::Input(format!(
            "{} assignments for {} negative samples",
            assignments.len(),
            nn
        )));
    }
    if let Some(bad) = assignments.iter().find(|&&a| a >= k) {
        return Err(Error::Input(format!(
            "cluster label {bad} out of range 0..{k}"
        )));
    }
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptyCluster { cluster: empty });
    }
    let mut centroids = DMatrix::zeros(d, k);
    for (j, &a) in assignments.iter().enumerate() {
        let mut c = centroids.column_mut(a);
        c += xn.column(j);
    }
    for (c, &s) in sizes.iter().enumerate() {
        centroids.column_mut(c).unscale_mut(s as f64);
    }
    let mut deviations = DMatrix::zeros(d, nn);
    for (j, &a) in assignments.iter().enumerate() {
        deviations.set_column(j, &(xn.column(j) - centroids.column(a)));
    }
    let mut weighted = centroids.clone();
    for (c, &s) in sizes.iter().enumerate() {
        weighted.column_mut(c).scale_mut((s as f64).sqrt());
    }
    Ok(ClusterScatter {
        snw: linalg::gram(&deviations),
        snb: linalg::gram(&weighted),
        cluster_sizes: sizes,
        centroids,
    })
}

pub fn cluster_scatters(
    data: &ClassSplitData,
    assignments: &[usize],
    k: usize,
) -> Result<ClusterScatter> {
    data.require_centered()?;
    cluster_scatters_of(&data.xn, assignments, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::gaussian;

    fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn centering_examples() {
        let xp = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let xn = gaussian(3, 2, 1);
        let data = center_to_positive_mean(&xp, &xn).unwrap();
        assert_eq!(data.xp, DMatrix::zeros(3, 1));

        let xp = gaussian(4, 6, 2);
        let data = center_to_positive_mean(&xp, &xn.clone().resize(4, 2, 0.0)).unwrap();
        assert!(data.xp.column_mean().amax() <= 1e-12);
        let again = center_to_positive_mean(&data.xp, &data.xn).unwrap();
        assert!((again.xp - &data.xp).amax() <= 1e-15);

        assert!(matches!(
            center_to_positive_mean(&DMatrix::zeros(3, 0), &xn),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn scatter_examples() {
        let xp = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let xn = gaussian(2, 3, 4);
        let data = center_to_positive_mean(&xp, &xn).unwrap();
        let s = scatter_matrices(&data, ZeroThreshold::default()).unwrap();
        assert_eq!(s.sp, DMatrix::zeros(2, 2));
        assert!(rel(&(&s.sp + &s.sn), &s.st) <= 1e-10);

        let raw = ClassSplitData {
            centered: false,
            ..data
        };
        assert!(matches!(
            scatter_matrices(&raw, ZeroThreshold::default()),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn scatter_ranks_for_independent_samples() {
        // D = 12 ≥ N - 1 = 9, samples in general position.
        let data = center_to_positive_mean(&gaussian(12, 4, 5), &gaussian(12, 6, 6)).unwrap();
        let s = scatter_matrices(&data, ZeroThreshold::default()).unwrap();
        // Oracle: rank of the stacked sample matrix through an SVD.
        let oracle = linalg::reduced_svd(&data.all(), ZeroThreshold::default())
            .unwrap()
            .rank();
        assert_eq!(oracle, 9);
        assert_eq!(s.ranks.st, 9);
        assert_eq!(s.ranks.sp, 3);
        assert_eq!(s.ranks.sn, 6);
    }

    #[test]
    fn cluster_scatter_limits() {
        let data = center_to_positive_mean(&gaussian(5, 3, 7), &gaussian(5, 6, 8)).unwrap();
        let s = scatter_matrices(&data, ZeroThreshold::default()).unwrap();
        let nn = data.n_neg();

        let one = cluster_scatters(&data, &vec![0; nn], 1).unwrap();
        let mn = data.xn.column_mean();
        let expected_b = &mn * mn.transpose() * nn as f64;
        assert!(rel(&one.snb, &expected_b) <= 1e-12);
        let mut dev = data.xn.clone();
        for mut c in dev.column_iter_mut() {
            c -= &mn;
        }
        assert!(rel(&one.snw, &(&dev * dev.transpose())) <= 1e-12);

        let singletons: Vec<usize> = (0..nn).collect();
        let all = cluster_scatters(&data, &singletons, nn).unwrap();
        assert!(rel(&all.snb, &s.sn) <= 1e-10);
        assert!(all.snw.norm() <= 1e-12);

        let two: Vec<usize> = (0..nn).map(|j| j % 2).collect();
        let cs = cluster_scatters(&data, &two, 2).unwrap();
        assert!(rel(&(&cs.snw + &cs.snb), &s.sn) <= 1e-10);
        assert_eq!(cs.cluster_sizes.iter().sum::<usize>(), nn);
    }

    #[test]
    fn cluster_errors() {
        let data = center_to_positive_mean(&gaussian(3, 2, 1), &gaussian(3, 4, 2)).unwrap();
        assert!(matches!(
            cluster_scatters(&data, &[0, 0, 2, 2], 3),
            Err(Error::EmptyCluster { cluster: 1 })
        ));
        assert!(matches!(
            cluster_scatters(&data, &[0, 0, 5, 1], 3),
            Err(Error::Input(_))
        ));
    }
}
