//! Kernel functions and the nonlinear projection trick (NPT).
//!
//! NPT replaces the implicit kernel feature space with an explicit one: the
//! centered training kernel matrix `K' = U Λ Uᵀ` is factored and training
//! samples are represented by the columns of `Z = Λ^{1/2} Uᵀ`, so `ZᵀZ = K'`.
//! Test samples are mapped with the same eigensystem, which lets every
//! discriminant solver downstream stay linear.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, ZeroThreshold};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelSpec {
    Rbf { sigma: f64 },
    Linear,
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { sigma } if !(sigma > 0.0 && sigma.is_finite()) => Err(Error::Config(
                format!("RBF sigma must be positive, got {sigma}"),
            )),
            _ => Ok(()),
        }
    }

    fn eval(&self, x: nalgebra::DVectorView<'_, f64>, y: nalgebra::DVectorView<'_, f64>) -> f64 {
        match *self {
            KernelSpec::Linear => x.dot(&y),
            KernelSpec::Rbf { sigma } => {
                let d2: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
        }
    }
}

/// RBF width from the mean of all raw feature values: `σ = sqrt(mean(x_ij))`.
///
/// The formula is only defined for a positive sum; signed features need an
/// explicit σ.
pub fn compute_sigma(x: &DMatrix<f64>) -> Result<f64> {
    let count = x.len();
    if count == 0 {
        return Err(Error::Config("cannot compute sigma of empty data".into()));
    }
    let sum: f64 = x.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::Config(format!(
            "automatic RBF sigma needs a positive sum of feature values (got {sum}); \
             supply sigma explicitly"
        )));
    }
    Ok((sum / count as f64).sqrt())
}

/// `K[i, j] = κ(x_i, y_j)` for column samples of `x` (D×N) and `y` (D×M).
pub fn kernel_matrix(x: &DMatrix<f64>, y: &DMatrix<f64>, spec: KernelSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if x.nrows() != y.nrows() {
        return Err(Error::Dimension(format!(
            "kernel inputs have {} and {} features",
            x.nrows(),
            y.nrows()
        )));
    }
    Ok(DMatrix::from_fn(x.ncols(), y.ncols(), |i, j| {
        spec.eval(x.column(i), y.column(j))
    }))
}

/// Self-kernel of the training data, exactly symmetric.
pub fn train_kernel(x: &DMatrix<f64>, spec: KernelSpec) -> Result<DMatrix<f64>> {
    linalg::symmetrize(&kernel_matrix(x, x, spec)?)
}

/// Statistics of an uncentered training kernel needed to center test columns.
#[derive(Clone, Debug)]
pub struct CenteringStats {
    pub row_means: DVector<f64>,
    pub grand_mean: f64,
}

/// Double-centers a symmetric kernel: `K' = K − 1rᵀ − r1ᵀ + g11ᵀ`.
pub fn center_kernel(k: &DMatrix<f64>) -> Result<(DMatrix<f64>, CenteringStats)> {
    if k.nrows() != k.ncols() {
        return Err(Error::Dimension("kernel matrix must be square".into()));
    }
    let asym = linalg::asymmetry(k);
    if asym > linalg::SYMMETRY_TOLERANCE {
        return Err(Error::Symmetry(asym));
    }
    let n = k.nrows();
    if n == 0 {
        return Err(Error::Input("empty kernel matrix".into()));
    }
    let row_means = DVector::from_iterator(n, k.row_iter().map(|r| r.mean()));
    let grand_mean = row_means.mean();
    let centered = DMatrix::from_fn(n, n, |i, j| {
        k[(i, j)] - row_means[i] - row_means[j] + grand_mean
    });
    Ok((
        linalg::symmetrize(&centered)?,
        CenteringStats {
            row_means,
            grand_mean,
        },
    ))
}

/// Fitted NPT mapping. Keeps the training matrix for test-time kernels, so
/// memory grows with `D × N`.
#[derive(Clone, Debug)]
pub struct NptModel {
    pub train_data: DMatrix<f64>,
    pub kernel: KernelSpec,
    pub eig_values: DVector<f64>,
    pub eig_vectors: DMatrix<f64>,
    pub stats: CenteringStats,
}

impl NptModel {
    pub fn dim(&self) -> usize {
        self.eig_values.len()
    }

    /// Mapped training data `Z = Λ^{1/2} Uᵀ`, r×N.
    pub fn train_mapped(&self) -> DMatrix<f64> {
        let mut z = self.eig_vectors.transpose();
        for (i, lambda) in self.eig_values.iter().enumerate() {
            z.row_mut(i).scale_mut(lambda.sqrt());
        }
        z
    }
}

pub fn npt_fit(x: &DMatrix<f64>, spec: KernelSpec, threshold: ZeroThreshold) -> Result<NptModel> {
    threshold.validate()?;
    if x.ncols() < 2 {
        return Err(Error::Input(format!(
            "NPT needs at least 2 training samples, got {}",
            x.ncols()
        )));
    }
    let k = train_kernel(x, spec)?;
    let (centered, stats) = center_kernel(&k)?;
    let eig = linalg::sym_eig(&centered)?;
    let max = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let keep: Vec<usize> = (0..eig.values.len())
        .filter(|&i| eig.values[i] > 0.0 && !threshold.is_zero(eig.values[i], max))
        .collect();
    if keep.is_empty() {
        return Err(Error::Degenerate(
            "centered kernel matrix has no eigenvalue above the zero threshold".into(),
        ));
    }
    let eig_values = DVector::from_iterator(keep.len(), keep.iter().map(|&i| eig.values[i]));
    let eig_vectors = eig.vectors.select_columns(&keep);
    Ok(NptModel {
        train_data: x.clone(),
        kernel: spec,
        eig_values,
        eig_vectors,
        stats,
    })
}

/// Maps test samples (D×M) into the r-dimensional NPT space.
pub fn npt_transform(model: &NptModel, x_test: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x_test.nrows() != model.train_data.nrows() {
        return Err(Error::Dimension(format!(
            "model expects {} features, got {}",
            model.train_data.nrows(),
            x_test.nrows()
        )));
    }
    let mut k = kernel_matrix(&model.train_data, x_test, model.kernel)?;
    let stats = &model.stats;
    for mut col in k.column_iter_mut() {
        let col_mean = col.mean();
        for (i, v) in col.iter_mut().enumerate() {
            *v += stats.grand_mean - col_mean - stats.row_means[i];
        }
    }
    let mut z = model.eig_vectors.transpose() * k;
    for (i, lambda) in model.eig_values.iter().enumerate() {
        z.row_mut(i).unscale_mut(lambda.sqrt());
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::gaussian;

    #[test]
    fn sigma_examples() {
        assert_eq!(
            compute_sigma(&DMatrix::from_element(2, 2, 1.0)).unwrap(),
            1.0
        );
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0]);
        assert_eq!(compute_sigma(&x).unwrap(), 1.0);
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        // (1 + 2 + ... + 6) / 6 = 3.5
        assert!((compute_sigma(&x).unwrap() - 3.5_f64.sqrt()).abs() < 1e-15);
        let neg = DMatrix::from_row_slice(1, 2, &[-1.0, 0.5]);
        assert!(matches!(compute_sigma(&neg), Err(Error::Config(_))));
    }

    #[test]
    fn kernel_examples() {
        let x = gaussian(3, 4, 1);
        let k = kernel_matrix(&x, &x, KernelSpec::Rbf { sigma: 1.3 }).unwrap();
        for i in 0..4 {
            assert_eq!(k[(i, i)], 1.0);
        }
        let eye = DMatrix::identity(3, 3);
        assert_eq!(kernel_matrix(&eye, &eye, KernelSpec::Linear).unwrap(), eye);
        assert!(matches!(
            kernel_matrix(&x, &gaussian(2, 2, 1), KernelSpec::Linear),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn rbf_matches_scalar_loop() {
        let x = gaussian(3, 4, 2);
        let y = gaussian(3, 2, 3);
        let k = kernel_matrix(&x, &y, KernelSpec::Rbf { sigma: 1.0 }).unwrap();
        for i in 0..4 {
            for j in 0..2 {
                let mut d2 = 0.0;
                for f in 0..3 {
                    let diff = x[(f, i)] - y[(f, j)];
                    d2 += diff * diff;
                }
                assert!((k[(i, j)] - (-d2 / 2.0).exp()).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn centering_examples() {
        let (c, _) = center_kernel(&DMatrix::from_element(3, 3, 2.5)).unwrap();
        assert!(c.norm() < 1e-15);

        let x = gaussian(4, 4, 5);
        let k = linalg::gram(&x.transpose());
        let (c, _) = center_kernel(&k).unwrap();
        for r in c.row_iter() {
            assert!(r.sum().abs() <= 1e-10);
        }
        let (again, _) = center_kernel(&c).unwrap();
        assert!((again - &c).abs().max() <= 1e-12);

        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        assert!(matches!(center_kernel(&bad), Err(Error::Symmetry(_))));
    }

    #[test]
    fn npt_linear_rank_on_centered_data() {
        let mut x = gaussian(3, 6, 8);
        let mean = x.column_mean();
        for mut c in x.column_iter_mut() {
            c -= &mean;
        }
        let model = npt_fit(&x, KernelSpec::Linear, ZeroThreshold::default()).unwrap();
        assert_eq!(model.dim(), 3);
        let x = gaussian(10, 4, 8);
        let model = npt_fit(&x, KernelSpec::Linear, ZeroThreshold::default()).unwrap();
        assert_eq!(model.dim(), 3);
    }

    #[test]
    fn npt_duplicate_point_drops_rank() {
        let mut x = gaussian(10, 5, 9);
        let c0 = x.column(0).into_owned();
        x.set_column(4, &c0);
        let model = npt_fit(&x, KernelSpec::Rbf { sigma: 3.0 }, ZeroThreshold::default()).unwrap();
        assert!(model.dim() <= 5 - 2);
    }

    #[test]
    fn npt_reproduces_centered_kernel() {
        let x = gaussian(5, 12, 10);
        let spec = KernelSpec::Rbf { sigma: 2.0 };
        let model = npt_fit(&x, spec, ZeroThreshold::default()).unwrap();
        let z = model.train_mapped();
        let (kc, _) = center_kernel(&train_kernel(&x, spec).unwrap()).unwrap();
        assert!((z.transpose() * &z - &kc).norm() <= 1e-6 * kc.norm());
        let gram = &z * z.transpose();
        let diag = DMatrix::from_diagonal(&model.eig_values);
        assert!((gram - &diag).norm() <= 1e-8 * diag.norm());

        let mapped = npt_transform(&model, &x).unwrap();
        assert!((mapped - &z).abs().max() <= 1e-6);
    }

    #[test]
    fn npt_transform_held_out_points() {
        let x = gaussian(4, 10, 12);
        let spec = KernelSpec::Rbf { sigma: 1.5 };
        let model = npt_fit(&x, spec, ZeroThreshold::relative(1e-12)).unwrap();
        let z = model.train_mapped();
        let mut test = gaussian(4, 3, 13);
        let c = test.column(0).into_owned();
        test.set_column(2, &c);
        let mapped = npt_transform(&model, &test).unwrap();
        assert_eq!(mapped.column(0), mapped.column(2));

        // Centered cross-kernel computed independently from the raw kernels.
        let k_train = train_kernel(&x, spec).unwrap();
        let k_test = kernel_matrix(&x, &test, spec).unwrap();
        let n = x.ncols();
        let one = DMatrix::from_element(n, n, 1.0 / n as f64);
        let one_t = DMatrix::from_element(n, test.ncols(), 1.0 / n as f64);
        let kc = &k_test - &one * &k_test - &k_train * &one_t + &one * &k_train * &one_t;
        let inner = z.transpose() * mapped;
        assert!((inner - kc).abs().max() <= 1e-6);
        assert!(matches!(
            npt_transform(&model, &gaussian(3, 1, 1)),
            Err(Error::Dimension(_))
        ));
    }
}
