//! Null-space CSDA: restrict to the row space of St, find the null space of
//! the mapped positive scatter through one of five eigenproblems, optionally
//! re-rank it by the negative scatter and orthonormalize.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::csda::{finish_model, SubspaceModel, DEFAULT_MU};
use crate::error::{Error, Result};
use crate::linalg::{self, ZeroThreshold};
use crate::scatter::{psd_rank, ClassSplitData};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Eigenproblem {
    /// Zero block of `S̃p v = λ v`.
    A,
    /// Non-zero block of `S̃n v = λ v`.
    B,
    /// Zero block of `S̃p v = λ (S̃n + μI) v`.
    C,
    /// Non-zero block of `S̃n v = λ (S̃p + μI) v`.
    D,
    /// Non-zero block of `S̃n v = λ S̃t v`.
    E,
}

impl Eigenproblem {
    pub const ALL: [Eigenproblem; 5] = [Self::A, Self::B, Self::C, Self::D, Self::E];

    pub fn label(&self) -> &'static str {
        match self {
            Self::A => "EA",
            Self::B => "EB",
            Self::C => "EC",
            Self::D => "ED",
            Self::E => "EE",
        }
    }
}

impl fmt::Display for Eigenproblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Eigenproblem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_uppercase().replace(['_', '-'], "");
        Self::ALL
            .into_iter()
            .find(|e| e.label() == t || e.label()[1..] == t)
            .ok_or_else(|| Error::Config(format!("unknown eigenproblem '{s}'")))
    }
}

#[derive(Clone, Debug)]
pub struct NcsdaConfig {
    pub eigenproblem: Eigenproblem,
    pub use_step4: bool,
    pub use_qr: bool,
    pub target_dim: Option<usize>,
    pub mu: f64,
    pub zero_threshold: ZeroThreshold,
}

impl Default for NcsdaConfig {
    fn default() -> Self {
        Self {
            eigenproblem: Eigenproblem::A,
            use_step4: true,
            use_qr: true,
            target_dim: None,
            mu: DEFAULT_MU,
            zero_threshold: ZeroThreshold::default(),
        }
    }
}

impl NcsdaConfig {
    pub fn validate(&self) -> Result<()> {
        self.zero_threshold.validate()?;
        if !(self.mu > 0.0) || !self.mu.is_finite() {
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

    pub fn tag(&self) -> String {
        let mut t = format!("ncsda-{}", self.eigenproblem);
        if self.use_step4 {
            t.push_str("+s4");
        }
        if self.use_qr {
            t.push_str("+qr");
        }
        t
    }
}

/// Data expressed in coordinates `Pᵀx` for some mapping `P` (the row-space
/// basis of St, or a whitening of it).
#[derive(Clone, Debug)]
pub(crate) struct MappedData {
    pub p: DMatrix<f64>,
    pub xn: DMatrix<f64>,
    pub sp: DMatrix<f64>,
    pub sn: DMatrix<f64>,
    pub st: DMatrix<f64>,
}

/// Reduced SVD of the centered data, giving `U_t` and `S_t`.
pub(crate) fn row_space(
    data: &ClassSplitData,
    threshold: ZeroThreshold,
) -> Result<linalg::ReducedSvd> {
    data.require_centered()?;
    if data.n_pos() + data.n_neg() < 3 {
        return Err(Error::Input("at least three samples are required".into()));
    }
    let svd = linalg::reduced_svd(&data.all(), threshold)?;
    if svd.rank() == 0 {
        return Err(Error::Degenerate("centered data is all zero".into()));
    }
    Ok(svd)
}

/// Maps both classes through `p` and forms the scatters in the new coordinates.
pub(crate) fn map_data(data: &ClassSplitData, p: DMatrix<f64>) -> MappedData {
    let pt = p.transpose();
    let xp = &pt * &data.xp;
    let xn = &pt * &data.xn;
    let sp = linalg::gram(&xp);
    let sn = linalg::gram(&xn);
    let st = linalg::symmetrize(&(&sp + &sn)).expect("square");
    MappedData { p, xn, sp, sn, st }
}

/// Fails when the mapped positive scatter has no null space.
pub(crate) fn require_null_space(sp: &DMatrix<f64>, threshold: ZeroThreshold) -> Result<usize> {
    let r = sp.nrows();
    let rank = psd_rank(sp, threshold)?;
    if rank >= r {
        return Err(Error::NoNullSpace { rank, dim: r });
    }
    Ok(r - rank)
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Column subset with matching ranking values, in the given order.
fn pick(vectors: &DMatrix<f64>, idx: &[usize], ranking: Vec<f64>) -> (DMatrix<f64>, DVector<f64>) {
    (vectors.select_columns(idx), DVector::from_vec(ranking))
}

/// Non-zero block of a descending spectrum, kept in order.
fn nonzero_block(
    values: &DVector<f64>,
    vectors: &DMatrix<f64>,
    threshold: ZeroThreshold,
) -> (DMatrix<f64>, DVector<f64>) {
    let max = max_abs(values);
    let idx: Vec<usize> = (0..values.len())
        .filter(|&i| values[i] > 0.0 && !threshold.is_zero(values[i], max))
        .collect();
    let ranking = idx.iter().map(|&i| values[i]).collect();
    pick(vectors, &idx, ranking)
}

/// Zero block of a spectrum ordered by ascending magnitude (ties keep solver
/// order). The ranking values are the negated magnitudes so that columns stay
/// in descending ranking order.
fn zero_block(
    values: &DVector<f64>,
    vectors: &DMatrix<f64>,
    threshold: ZeroThreshold,
) -> (DMatrix<f64>, DVector<f64>) {
    let max = max_abs(values);
    let mut idx: Vec<usize> = (0..values.len())
        .filter(|&i| threshold.is_zero(values[i], max))
        .collect();
    idx.sort_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()));
    let ranking = idx.iter().map(|&i| -values[i].abs()).collect();
    pick(vectors, &idx, ranking)
}

/// Solves the selected eigenproblem in row-space coordinates.
///
/// Returned columns are raw solver output (orthonormal for A and B,
/// B-orthonormal for the generalized variants).
pub(crate) fn null_basis(
    m: &MappedData,
    problem: Eigenproblem,
    mu: f64,
    threshold: ZeroThreshold,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let r = m.sp.nrows();
    let eye = DMatrix::<f64>::identity(r, r);
    let (v, rank) = match problem {
        Eigenproblem::A => {
            let e = linalg::sym_eig(&m.sp)?;
            zero_block(&e.values, &e.vectors, threshold)
        }
        Eigenproblem::B => {
            let e = linalg::sym_eig(&m.sn)?;
            nonzero_block(&e.values, &e.vectors, threshold)
        }
        Eigenproblem::C => {
            let e = linalg::gen_sym_eig(&m.sp, &(&m.sn + &eye * mu))?;
            zero_block(&e.values, &e.vectors, threshold)
        }
        Eigenproblem::D => {
            let e = linalg::gen_sym_eig(&m.sn, &(&m.sp + &eye * mu))?;
            nonzero_block(&e.values, &e.vectors, threshold)
        }
        Eigenproblem::E => {
            let e = linalg::gen_sym_eig(&m.sn, &m.st)?;
            nonzero_block(&e.values, &e.vectors, threshold)
        }
    };
    if v.ncols() == 0 {
        return Err(Error::NoNullSpace { rank: r, dim: r });
    }
    Ok((v, rank))
}

/// Eigenvectors of `VᵀS̃nV` with non-zero eigenvalue, descending.
pub fn step4_remap(
    v: &DMatrix<f64>,
    sn: &DMatrix<f64>,
    threshold: ZeroThreshold,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if v.nrows() != sn.nrows() {
        return Err(Error::Dimension(format!(
            "basis has {} rows, scatter is {}x{}",
            v.nrows(),
            sn.nrows(),
            sn.ncols()
        )));
    }
    let inner = linalg::symmetrize(&(v.transpose() * sn * v))?;
    let e = linalg::sym_eig(&inner)?;
    let (m, values) = nonzero_block(&e.values, &e.vectors, threshold);
    if m.ncols() == 0 {
        return Err(Error::Degenerate(
            "negative scatter vanishes on the null-space basis".into(),
        ));
    }
    Ok((m, values))
}

/// Turns a composed basis into a model: unit columns, optional QR, truncation.
pub(crate) fn compose(
    mut w: DMatrix<f64>,
    ranking: DVector<f64>,
    use_qr: bool,
    tag: String,
    target_dim: Option<usize>,
) -> Result<SubspaceModel> {
    linalg::normalize_columns(&mut w);
    if use_qr {
        w = linalg::qr_orthonormalize(&w)?;
    }
    finish_model(w, ranking, tag, target_dim)
}

pub fn ncsda_fit(data: &ClassSplitData, cfg: &NcsdaConfig) -> Result<SubspaceModel> {
    cfg.validate()?;
    let svd = row_space(data, cfg.zero_threshold)?;
    let mapped = map_data(data, svd.u);
    require_null_space(&mapped.sp, cfg.zero_threshold)?;

    let (v, mut ranking) = null_basis(&mapped, cfg.eigenproblem, cfg.mu, cfg.zero_threshold)?;
    let mut basis = v;
    if cfg.use_step4 {
        let (m, values) = step4_remap(&basis, &mapped.sn, cfg.zero_threshold)?;
        basis = &basis * m;
        ranking = values;
    }
    let w = &mapped.p * basis;
    compose(w, ranking, cfg.use_qr, cfg.tag(), cfg.target_dim)
}
