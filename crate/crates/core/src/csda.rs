//! Regularized class-specific discriminant analysis and the criterion
//! evaluators shared by every solver.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, ZeroThreshold};
use crate::scatter::ScatterSet;

/// Default Tikhonov regularizer added to singular scatter matrices.
pub const DEFAULT_MU: f64 = 1e-4;

/// A learned projection `W` (input_dim × output_dim) with its column ranking.
#[derive(Clone, Debug)]
pub struct SubspaceModel {
    pub projection: DMatrix<f64>,
    /// `Wᵀ m_p`; zero when the model was fitted on positive-centered data.
    pub projected_positive_mean: DVector<f64>,
    /// Columns are ordered by these values, descending.
    pub ranking_values: DVector<f64>,
    pub method_tag: String,
}

impl SubspaceModel {
    pub fn new(
        projection: DMatrix<f64>,
        ranking_values: DVector<f64>,
        method_tag: impl Into<String>,
    ) -> Result<Self> {
        if projection.ncols() == 0 {
            return Err(Error::Degenerate("projection has no columns".into()));
        }
        if projection.ncols() != ranking_values.len() {
            return Err(Error::Dimension(format!(
                "{} columns but {} ranking values",
                projection.ncols(),
                ranking_values.len()
            )));
        }
        let l = projection.ncols();
        Ok(Self {
            projection,
            projected_positive_mean: DVector::zeros(l),
            ranking_values,
            method_tag: method_tag.into(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.projection.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.projection.ncols()
    }

    /// Keeps the `dim` highest-ranked columns (all of them if `dim` is larger).
    pub fn truncated(&self, dim: usize) -> SubspaceModel {
        let k = dim.clamp(1, self.output_dim());
        SubspaceModel {
            projection: self.projection.columns(0, k).into_owned(),
            projected_positive_mean: self.projected_positive_mean.rows(0, k).into_owned(),
            ranking_values: self.ranking_values.rows(0, k).into_owned(),
            method_tag: self.method_tag.clone(),
        }
    }

    pub fn project(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "model expects {} features, got {}",
                self.input_dim(),
                x.nrows()
            )));
        }
        Ok(self.projection.transpose() * x)
    }
}

/// Keeps the leading `dim` entries of an already ranked basis and records a
/// truncation in the tag when fewer columns were available than requested.
pub(crate) fn finish_model(
    projection: DMatrix<f64>,
    ranking: DVector<f64>,
    mut tag: String,
    target_dim: Option<usize>,
) -> Result<SubspaceModel> {
    let available = projection.ncols();
    let keep = match target_dim {
        Some(0) => return Err(Error::Config("target dimension must be at least 1".into())),
        Some(d) if d > available => {
            log::warn!("{tag}: requested {d} dimensions, only {available} available");
            tag.push_str(&format!("[truncated:{d}->{available}]"));
            available
        }
        Some(d) => d,
        None => available,
    };
    let model = SubspaceModel::new(projection, ranking, tag)?;
    Ok(model.truncated(keep))
}

/// Solves `Sn w = λ (Sp + μI) w` and keeps the leading `dim` eigenvectors
/// with non-zero eigenvalue.
///
/// Columns are (Sp + μI)-orthonormal, not unit length.
pub fn csda_fit(
    scatters: &ScatterSet,
    dim: usize,
    mu: f64,
    threshold: ZeroThreshold,
) -> Result<SubspaceModel> {
    if dim == 0 {
        return Err(Error::Config(
            "subspace dimension must be at least 1".into(),
        ));
    }
    if !(mu >= 0.0) {
        return Err(Error::Config(format!("mu must be non-negative, got {mu}")));
    }
    let d = scatters.sp.nrows();
    let b = &scatters.sp + DMatrix::identity(d, d) * mu;
    let eig = linalg::gen_sym_eig(&scatters.sn, &b)?;
    let max = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let nonzero = eig
        .values
        .iter()
        .take_while(|v| **v > 0.0 && !threshold.is_zero(**v, max))
        .count();
    if nonzero == 0 {
        return Err(Error::Degenerate(
            "no non-zero generalized eigenvalue for the out-of-class scatter".into(),
        ));
    }
    let w = eig.vectors.columns(0, nonzero).into_owned();
    let ranking = eig.values.rows(0, nonzero).into_owned();
    finish_model(w, ranking, "csda".into(), Some(dim))
}

/// The class-specific criteria, null-constraint residuals and spread for a
/// projection `W`.
#[derive(Clone, Debug, PartialEq)]
pub struct CriterionReport {
    /// `trace((WᵀSpW)⁺ WᵀSnW)`.
    pub j: f64,
    /// `trace((WᵀSpW)⁺ WᵀStW)`.
    pub j2: f64,
    /// `trace((WᵀStW)⁺ WᵀSnW)`.
    pub j3: f64,
    /// Set when `WᵀSpW` is numerically zero; `j` and `j2` are then +∞.
    pub j_infinite: bool,
    /// Numerical rank of `WᵀSpW`.
    pub sp_rank: usize,
    /// Sum of all entries of `WᵀSpW`. Signed entries can cancel.
    pub constraint_a_sum: f64,
    /// `‖WᵀSpW‖_F`.
    pub constraint_a_frob: f64,
    /// `trace(WᵀSnW)`.
    pub criterion_b: f64,
}

fn spectral_norm_sq(w: &DMatrix<f64>) -> f64 {
    let s = w.singular_values().max();
    s * s
}

fn largest_eig(s: &DMatrix<f64>) -> Result<f64> {
    Ok(linalg::sym_eig(s)?
        .values
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs())))
}

fn quad(w: &DMatrix<f64>, s: &DMatrix<f64>) -> DMatrix<f64> {
    linalg::symmetrize(&(w.transpose() * s * w)).expect("square")
}

pub fn criterion_values(
    scatters: &ScatterSet,
    w: &DMatrix<f64>,
    threshold: ZeroThreshold,
) -> Result<CriterionReport> {
    let d = scatters.sp.nrows();
    if w.nrows() != d {
        return Err(Error::Dimension(format!(
            "projection has {} rows, scatters are {d}x{d}",
            w.nrows()
        )));
    }
    let a = quad(w, &scatters.sp);
    let b = quad(w, &scatters.sn);
    let t = quad(w, &scatters.st);
    let w_norm = spectral_norm_sq(w);

    // WᵀSpW is judged against the scale Sp could reach through W, so a
    // projection that annihilates Sp is seen as rank zero.
    let sp_scale = largest_eig(&scatters.sp)? * w_norm;
    let (a_pinv, sp_rank) = linalg::pinv_sym_scaled(&a, threshold, Some(sp_scale))?;
    let st_scale = largest_eig(&scatters.st)? * w_norm;
    let (t_pinv, _) = linalg::pinv_sym_scaled(&t, threshold, Some(st_scale))?;

    let j_infinite = sp_rank == 0;
    let (j, j2) = if j_infinite {
        (f64::INFINITY, f64::INFINITY)
    } else {
        (
            linalg::trace(&(&a_pinv * &b)),
            linalg::trace(&(&a_pinv * &t)),
        )
    };
    Ok(CriterionReport {
        j,
        j2,
        j3: linalg::trace(&(&t_pinv * &b)),
        j_infinite,
        sp_rank,
        constraint_a_sum: a.iter().sum(),
        constraint_a_frob: a.norm(),
        criterion_b: linalg::trace(&b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::gaussian;
    use crate::scatter::{center_to_positive_mean, scatter_matrices};

    fn scatters_from(sp: DMatrix<f64>, sn: DMatrix<f64>) -> ScatterSet {
        let st = &sp + &sn;
        ScatterSet {
            sp,
            sn,
            st,
            ranks: crate::scatter::ScatterRanks {
                sp: 0,
                sn: 0,
                st: 0,
            },
        }
    }

    #[test]
    #[rustfmt::skip]
    fn informative_axis_is_found() {
        // Positives tight around the origin; negatives spread along axis 0 only.
        let xp = DMatrix::from_row_slice(3, 4, &[
            0.01, -0.01, 0.02, -0.02,
            0.5, -0.4, 0.3, -0.4,
            -0.3, 0.4, 0.5, -0.6,
        ]);
        let xn = DMatrix::from_row_slice(3, 4, &[
            5.0, -4.0, 6.0, -7.0,
            0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
        ]);
        let data = center_to_positive_mean(&xp, &xn).unwrap();
        let s = scatter_matrices(&data, ZeroThreshold::default()).unwrap();
        let model = csda_fit(&s, 1, DEFAULT_MU, ZeroThreshold::default()).unwrap();

        // Oracle: dominant eigenvector of the dense (Sp + μI)⁻¹ Sn.
        let b = &s.sp + DMatrix::identity(3, 3) * DEFAULT_MU;
        let m = b.try_inverse().unwrap() * &s.sn;
        let mut v = DVector::from_element(3, 1.0);
        for _ in 0..200 {
            v = &m * v;
            v /= v.norm();
        }
        let w = model.projection.column(0);
        let cosine = w.dot(&v).abs() / w.norm();
        assert!(cosine >= 1.0 - 1e-8, "cosine {cosine}");
    }

    #[test]
    fn identical_scatters_give_unit_eigenvalues() {
        let g = gaussian(4, 6, 3);
        let s = linalg::gram(&g);
        let sc = scatters_from(s.clone(), s);
        let model = csda_fit(&sc, 3, 0.0, ZeroThreshold::default()).unwrap();
        for v in model.ranking_values.iter() {
            assert!((v - 1.0).abs() < 1e-10);
        }
        let report = criterion_values(&sc, &model.projection, ZeroThreshold::default()).unwrap();
        assert!((report.j - 3.0).abs() < 1e-8);
    }

    #[test]
    fn csda_columns_are_regularized_orthonormal() {
        let data = center_to_positive_mean(&gaussian(10, 5, 1), &gaussian(10, 8, 2)).unwrap();
        let s = scatter_matrices(&data, ZeroThreshold::default()).unwrap();
        let model = csda_fit(&s, 4, DEFAULT_MU, ZeroThreshold::default()).unwrap();
        let b = &s.sp + DMatrix::identity(10, 10) * DEFAULT_MU;
        let g = model.projection.transpose() * b * &model.projection;
        assert!((g - DMatrix::identity(4, 4)).norm() <= 1e-6);
        for w in model.ranking_values.as_slice().windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn csda_truncates_when_asking_too_much() {
        let data = center_to_positive_mean(&gaussian(3, 2, 1), &gaussian(3, 1, 2)).unwrap();
        let s = scatter_matrices(&data, ZeroThreshold::default()).unwrap();
        let model = csda_fit(&s, 3, DEFAULT_MU, ZeroThreshold::default()).unwrap();
        assert_eq!(model.output_dim(), 1);
        assert!(model.method_tag.contains("truncated"));
    }

    #[test]
    fn j2_is_l_plus_j() {
        let sp = linalg::gram(&gaussian(4, 6, 4));
        let sn = linalg::gram(&gaussian(4, 6, 5));
        let sc = scatters_from(sp, sn);
        let w = gaussian(4, 3, 6);
        let r = criterion_values(&sc, &w, ZeroThreshold::default()).unwrap();
        assert!(!r.j_infinite);
        assert!((r.j2 - (3.0 + r.j)).abs() <= 1e-8 * r.j2.abs());
    }

    #[test]
    fn j_is_scale_invariant() {
        let sp = linalg::gram(&gaussian(5, 7, 7));
        let sn = linalg::gram(&gaussian(5, 7, 8));
        let sc = scatters_from(sp, sn);
        let w = gaussian(5, 3, 9);
        let mut scaled = w.clone();
        for (j, c) in [0.3, 2.0, 11.0].iter().enumerate() {
            scaled.column_mut(j).scale_mut(*c);
        }
        let a = criterion_values(&sc, &w, ZeroThreshold::default()).unwrap();
        let b = criterion_values(&sc, &scaled, ZeroThreshold::default()).unwrap();
        assert!((a.j - b.j).abs() <= 1e-8 * a.j.abs());
    }

    #[test]
    fn null_projection_reports_infinite_j() {
        let sp = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0, 0.0]));
        let sn = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0, 1.0]));
        let sc = scatters_from(sp, sn);
        let w = DMatrix::from_column_slice(3, 2, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let r = criterion_values(&sc, &w, ZeroThreshold::default()).unwrap();
        assert!(r.j_infinite && r.j.is_infinite());
        assert_eq!(r.constraint_a_frob, 0.0);
        assert_eq!(r.criterion_b, 4.0);
        assert!((r.j3 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn truncated_model_keeps_leading_columns() {
        let w = gaussian(4, 3, 1);
        let m = SubspaceModel::new(w.clone(), DVector::from_vec(vec![3.0, 2.0, 1.0]), "x").unwrap();
        let t = m.truncated(2);
        assert_eq!(t.projection, w.columns(0, 2).into_owned());
        assert_eq!(t.output_dim(), 2);
        assert_eq!(m.truncated(10).output_dim(), 3);
    }
}
