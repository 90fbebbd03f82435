//! Dense symmetric linear algebra used by every solver in the crate.
//!
//! Scatter matrices are symmetric positive semi-definite, and the discriminant
//! solvers depend on that structure being preserved exactly: eigenvalues must
//! come out real and eigenvectors orthogonal. Everything here therefore works
//! on explicitly symmetrized inputs and never falls back to a general
//! (non-symmetric) eigensolver. Generalized problems are reduced to standard
//! symmetric ones with a Cholesky factor of the right-hand matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen, QR, SVD};

use crate::error::{Error, Result};

/// Relative asymmetry accepted by [`sym_eig`] before it refuses the input.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Components below this magnitude are skipped when fixing eigenvector signs.
const SIGN_TOLERANCE: f64 = 1e-12;

/// Column rank test used by [`qr_orthonormalize`], relative to the column norm.
const QR_RANK_TOLERANCE: f64 = 1e-10;

/// How a spectral value is compared against the zero threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ThresholdMode {
    /// `value <= eps * max_value` counts as zero.
    #[default]
    Relative,
    /// `value <= eps` counts as zero.
    Absolute,
}

/// Decides which eigenvalues or singular values are treated as zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZeroThreshold {
    pub eps: f64,
    pub mode: ThresholdMode,
}

impl Default for ZeroThreshold {
    fn default() -> Self {
        Self::relative(1e-6)
    }
}

impl ZeroThreshold {
    pub fn relative(eps: f64) -> Self {
        Self {
            eps,
            mode: ThresholdMode::Relative,
        }
    }

    pub fn absolute(eps: f64) -> Self {
        Self {
            eps,
            mode: ThresholdMode::Absolute,
        }
    }

    /// The cut-off below which a value is zero, given the largest magnitude in
    /// the spectrum it belongs to.
    pub fn cutoff(&self, max_magnitude: f64) -> f64 {
        match self.mode {
            ThresholdMode::Relative => self.eps * max_magnitude,
            ThresholdMode::Absolute => self.eps,
        }
    }

    pub fn is_zero(&self, value: f64, max_magnitude: f64) -> bool {
        value.abs() <= self.cutoff(max_magnitude)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::Config(format!(
                "zero threshold must be positive, got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues descending.
#[derive(Clone, Debug)]
pub struct SymEig {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

/// Solution of `A v = λ B v` with B symmetric positive definite.
///
/// Columns of `vectors` are B-orthonormal: `VᵀBV = I`.
#[derive(Clone, Debug)]
pub struct GenEig {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

/// Rank-revealing thin SVD `X ≈ U diag(S) Vᵀ` restricted to the retained rank.
#[derive(Clone, Debug)]
pub struct ReducedSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl ReducedSvd {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

fn ensure_square(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

fn ensure_finite(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("{what} has non-finite entries")));
    }
    Ok(())
}

/// Returns `(A + Aᵀ) / 2`. The result is bit-for-bit symmetric because
/// floating-point addition is commutative.
pub fn symmetrize(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_square(a, "matrix")?;
    let n = a.nrows();
    Ok(DMatrix::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)]) * 0.5))
}

/// `M Mᵀ`, symmetrized. All scatter matrices go through here.
pub fn gram(m: &DMatrix<f64>) -> DMatrix<f64> {
    let g = m * m.transpose();
    symmetrize(&g).expect("gram matrix is square")
}

/// Relative Frobenius asymmetry `‖A − Aᵀ‖ / ‖A‖`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let norm = a.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (a - a.transpose()).norm() / norm
}

fn fix_column_signs(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        if let Some(first) = col.iter().copied().find(|v| v.abs() > SIGN_TOLERANCE) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
}

fn sorted_descending(values: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // Stable: equal eigenvalues keep their solver order.
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

fn permute_columns(m: &DMatrix<f64>, order: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), order.len(), |i, j| m[(i, order[j])])
}

/// Full spectrum of a symmetric matrix, eigenvalues descending.
///
/// Each eigenvector is signed so that its first component larger than 1e-12
/// in magnitude is positive.
pub fn sym_eig(a: &DMatrix<f64>) -> Result<SymEig> {
    ensure_square(a, "matrix")?;
    ensure_finite(a, "matrix")?;
    let asym = asymmetry(a);
    if asym > SYMMETRY_TOLERANCE {
        return Err(Error::Symmetry(asym));
    }
    if a.nrows() == 0 {
        return Ok(SymEig {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::new(a.clone());
    let order = sorted_descending(&eig.eigenvalues);
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = permute_columns(&eig.eigenvectors, &order);
    fix_column_signs(&mut vectors);
    Ok(SymEig { values, vectors })
}

/// Lower Cholesky factor `L` with `B = L Lᵀ`.
///
/// Fails with the index of the first non-positive pivot.
pub fn cholesky(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_square(b, "matrix")?;
    ensure_finite(b, "matrix")?;
    let n = b.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = b[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(Error::Definiteness { pivot: j });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = b[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `A v = λ B v` for symmetric A and symmetric positive definite B.
///
/// With `B = L Lᵀ` the problem becomes the standard symmetric problem for
/// `C = L⁻¹ A L⁻ᵀ`; eigenvectors are mapped back with `v = L⁻ᵀ y`.
pub fn gen_sym_eig(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<GenEig> {
    ensure_square(a, "left matrix")?;
    ensure_square(b, "right matrix")?;
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "pencil sizes differ: {} vs {}",
            a.nrows(),
            b.nrows()
        )));
    }
    ensure_finite(a, "left matrix")?;
    let asym = asymmetry(a).max(asymmetry(b));
    if asym > SYMMETRY_TOLERANCE {
        return Err(Error::Symmetry(asym));
    }
    let l = cholesky(b)?;
    let linv_a = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
    let c = l
        .solve_lower_triangular(&linv_a.transpose())
        .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
    let c = symmetrize(&c)?;
    let eig = sym_eig(&c)?;
    let mut vectors = l
        .transpose()
        .solve_upper_triangular(&eig.vectors)
        .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
    fix_column_signs(&mut vectors);
    Ok(GenEig {
        values: eig.values,
        vectors,
    })
}

/// Thin SVD keeping singular values above the zero threshold.
///
/// An all-zero input yields rank zero with empty factors.
pub fn reduced_svd(x: &DMatrix<f64>, threshold: ZeroThreshold) -> Result<ReducedSvd> {
    ensure_finite(x, "data matrix")?;
    let (d, n) = x.shape();
    let empty = || ReducedSvd {
        u: DMatrix::zeros(d, 0),
        singular_values: DVector::zeros(0),
        v: DMatrix::zeros(n, 0),
    };
    if d == 0 || n == 0 || x.iter().all(|v| *v == 0.0) {
        return Ok(empty());
    }
    let svd = SVD::new(x.clone(), true, true);
    let u = svd.u.expect("left vectors requested");
    let v = svd.v_t.expect("right vectors requested").transpose();
    let s = svd.singular_values;
    let order = sorted_descending(&s);
    let s_max = s[order[0]];
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| s[i] > threshold.cutoff(s_max))
        .collect();
    if keep.is_empty() {
        return Ok(empty());
    }
    let mut u = permute_columns(&u, &keep);
    let mut v = permute_columns(&v, &keep);
    for j in 0..keep.len() {
        if let Some(first) = u
            .column(j)
            .iter()
            .copied()
            .find(|c| c.abs() > SIGN_TOLERANCE)
        {
            if first < 0.0 {
                u.column_mut(j).neg_mut();
                v.column_mut(j).neg_mut();
            }
        }
    }
    let singular_values = DVector::from_iterator(keep.len(), keep.iter().map(|&i| s[i]));
    Ok(ReducedSvd {
        u,
        singular_values,
        v,
    })
}

/// Orthonormal basis of `span(W)` from a Householder QR, signed so that the
/// diagonal of R is positive.
pub fn qr_orthonormalize(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_finite(w, "projection matrix")?;
    let (d, l) = w.shape();
    if l > d {
        return Err(Error::Rank { column: d });
    }
    if l == 0 {
        return Ok(DMatrix::zeros(d, 0));
    }
    let qr = QR::new(w.clone());
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..l {
        let col_norm = w.column(j).norm();
        let rjj = r[(j, j)];
        if col_norm == 0.0 || rjj.abs() <= QR_RANK_TOLERANCE * col_norm {
            return Err(Error::Rank { column: j });
        }
        if rjj < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// Scales every non-zero column to unit Euclidean norm.
pub fn normalize_columns(w: &mut DMatrix<f64>) {
    for mut col in w.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col.unscale_mut(norm);
        }
    }
}

/// Orthonormal basis of the orthogonal complement of `span(Q)` for a
/// column-orthonormal Q.
pub fn orthogonal_complement(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = q.nrows();
    let projector = DMatrix::identity(d, d) - q * q.transpose();
    let eig = sym_eig(&symmetrize(&projector)?)?;
    let keep = d.saturating_sub(q.ncols());
    Ok(eig.vectors.columns(0, keep).into_owned())
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix and its numerical rank.
pub fn pinv_sym(a: &DMatrix<f64>, threshold: ZeroThreshold) -> Result<(DMatrix<f64>, usize)> {
    pinv_sym_scaled(a, threshold, None)
}

/// Like [`pinv_sym`], but eigenvalues are judged against `scale` instead of
/// the matrix's own largest eigenvalue. Needed when the whole matrix is
/// expected to vanish, e.g. `WᵀSpW` for null projections.
pub fn pinv_sym_scaled(
    a: &DMatrix<f64>,
    threshold: ZeroThreshold,
    scale: Option<f64>,
) -> Result<(DMatrix<f64>, usize)> {
    let a = symmetrize(a)?;
    let eig = sym_eig(&a)?;
    let own_max = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let max = scale.unwrap_or(own_max);
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, n);
    let mut rank = 0;
    if own_max == 0.0 {
        return Ok((out, 0));
    }
    for (i, lambda) in eig.values.iter().enumerate() {
        if threshold.is_zero(*lambda, max) {
            continue;
        }
        rank += 1;
        let v = eig.vectors.column(i);
        out += (v * v.transpose()) / *lambda;
    }
    Ok((out, rank))
}

/// Largest principal angle (radians) between the column spans of `a` and `b`.
///
/// Computed from the sine form `‖(I − QₐQₐᵀ) Q_b‖₂`, which stays accurate for
/// nearly identical subspaces where the cosine form loses all precision.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "subspaces must have equal shape, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if a.ncols() == 0 {
        return Ok(0.0);
    }
    let qa = qr_orthonormalize(a)?;
    let qb = qr_orthonormalize(b)?;
    let residual = &qb - &qa * (qa.transpose() * &qb);
    let sine = residual.singular_values().max().min(1.0);
    Ok(sine.asin())
}

/// `trace(A)` for square A.
pub fn trace(a: &DMatrix<f64>) -> f64 {
    a.diagonal().sum()
}
