//! Whitened solvers: uncorrelated (UCSDA), orthogonal (OCSDA) and
//! regularized orthogonal (ROCSDA) CSDA.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::csda::{finish_model, SubspaceModel, DEFAULT_MU};
use crate::error::{Error, Result};
use crate::linalg::{self, ZeroThreshold};
use crate::nullspace::{self, map_data, require_null_space, row_space, Eigenproblem, MappedData};
use crate::scatter::{ClassSplitData, ScatterSet};

pub const DEFAULT_ALPHA: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OrthoMethod {
    Ucsda,
    Ocsda,
    Rocsda,
}

impl OrthoMethod {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Ucsda => "ucsda",
            Self::Ocsda => "ocsda",
            Self::Rocsda => "rocsda",
        }
    }
}

impl fmt::Display for OrthoMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for OrthoMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ucsda" => Ok(Self::Ucsda),
            "ocsda" => Ok(Self::Ocsda),
            "rocsda" => Ok(Self::Rocsda),
            _ => Err(Error::Config(format!("unknown orthogonal method '{s}'"))),
        }
    }
}

/// How the row space of the whitened negative scatter is extracted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Step4Variant {
    /// Left singular vectors of `X̃n` with non-zero singular value.
    SvdN,
    /// Left singular vectors of `X̃p` for its zero singular values.
    SvdP,
    /// Non-zero block of `S̃n v = λ (S̃p + μI) v`.
    GenD,
}

impl Step4Variant {
    pub fn label(&self) -> &'static str {
        match self {
            Self::SvdN => "svdn",
            Self::SvdP => "svdp",
            Self::GenD => "gend",
        }
    }
}

impl FromStr for Step4Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s
            .trim()
            .to_ascii_lowercase()
            .replace(['_', '-'], "")
            .as_str()
        {
            "svdn" => Ok(Self::SvdN),
            "svdp" => Ok(Self::SvdP),
            "gend" => Ok(Self::GenD),
            _ => Err(Error::Config(format!("unknown step-4 variant '{s}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct OrthoConfig {
    pub method: OrthoMethod,
    pub step4: Step4Variant,
    /// Added to the singular values before inversion; ROCSDA only.
    pub alpha: f64,
    pub target_dim: Option<usize>,
    pub mu: f64,
    pub zero_threshold: ZeroThreshold,
}

impl OrthoConfig {
    pub fn new(method: OrthoMethod) -> Self {
        Self {
            method,
            step4: Step4Variant::SvdN,
            alpha: DEFAULT_ALPHA,
            target_dim: None,
            mu: DEFAULT_MU,
            zero_threshold: ZeroThreshold::default(),
        }
    }

    /// The regularizer actually applied, zero unless the method is ROCSDA.
    pub fn effective_alpha(&self) -> f64 {
        match self.method {
            OrthoMethod::Rocsda => self.alpha,
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.zero_threshold.validate()?;
        if self.method == OrthoMethod::Rocsda && !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!(
                "rocsda needs a positive alpha, got {}",
                self.alpha
            )));
        }
        if self.step4 == Step4Variant::GenD && !(self.mu > 0.0 && self.mu.is_finite()) {
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
        format!("{}-{}", self.method, self.step4.label())
    }
}

/// `P = U_t diag(S_t + α)⁻¹` and the data mapped through it.
pub(crate) fn whiten(
    data: &ClassSplitData,
    alpha: f64,
    threshold: ZeroThreshold,
) -> Result<MappedData> {
    let svd = row_space(data, threshold)?;
    let mut p = svd.u;
    for (j, s) in svd.singular_values.iter().enumerate() {
        p.column_mut(j).unscale_mut(s + alpha);
    }
    Ok(map_data(data, p))
}

fn step4_basis(
    data: &ClassSplitData,
    m: &MappedData,
    cfg: &OrthoConfig,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let r = m.p.ncols();
    match cfg.step4 {
        Step4Variant::SvdN => {
            let svd = linalg::reduced_svd(&m.xn, cfg.zero_threshold)?;
            if svd.rank() == 0 {
                return Err(Error::NoNullSpace { rank: r, dim: r });
            }
            Ok((svd.u, svd.singular_values))
        }
        Step4Variant::SvdP => {
            let xp = m.p.transpose() * &data.xp;
            let svd = linalg::reduced_svd(&xp, cfg.zero_threshold)?;
            let q = linalg::orthogonal_complement(&svd.u)?;
            let keep = r - svd.rank();
            if keep == 0 || q.ncols() < keep {
                return Err(Error::NoNullSpace {
                    rank: svd.rank(),
                    dim: r,
                });
            }
            let v = q.columns(0, keep).into_owned();
            Ok((v, DVector::zeros(keep)))
        }
        Step4Variant::GenD => {
            let (mut v, ranking) =
                nullspace::null_basis(m, Eigenproblem::D, cfg.mu, cfg.zero_threshold)?;
            linalg::normalize_columns(&mut v);
            Ok((v, ranking))
        }
    }
}

pub fn ortho_fit(data: &ClassSplitData, cfg: &OrthoConfig) -> Result<SubspaceModel> {
    cfg.validate()?;
    let m = whiten(data, cfg.effective_alpha(), cfg.zero_threshold)?;
    require_null_space(&m.sp, cfg.zero_threshold)?;
    let (v, ranking) = step4_basis(data, &m, cfg)?;
    let mut w = &m.p * v;
    let mut tag = cfg.tag();
    if cfg.method != OrthoMethod::Ucsda {
        w = linalg::qr_orthonormalize(&w)?;
        tag.push_str("+qr");
    }
    // UCSDA columns keep their scale: WᵀStW = I is the defining property.
    finish_model(w, ranking, tag, cfg.target_dim)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaxCheck {
    /// `trace((WᵀStW)⁺ WᵀSnW)`.
    pub value: f64,
    pub l: usize,
    pub st_rank: usize,
    /// `value ≤ l` up to `1e-8·l`.
    pub within_bound: bool,
}

pub fn criterion_max_check(
    scatters: &ScatterSet,
    w: &DMatrix<f64>,
    threshold: ZeroThreshold,
) -> Result<MaxCheck> {
    if w.nrows() != scatters.st.nrows() {
        return Err(Error::Dimension(format!(
            "projection has {} rows, scatters are {}x{}",
            w.nrows(),
            scatters.st.nrows(),
            scatters.st.ncols()
        )));
    }
    let t = linalg::symmetrize(&(w.transpose() * &scatters.st * w))?;
    let b = linalg::symmetrize(&(w.transpose() * &scatters.sn * w))?;
    let st_max = linalg::sym_eig(&scatters.st)?
        .values
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let s = w.singular_values().max();
    let (t_pinv, st_rank) = linalg::pinv_sym_scaled(&t, threshold, Some(st_max * s * s))?;
    let value = linalg::trace(&(t_pinv * b));
    let l = w.ncols();
    Ok(MaxCheck {
        value,
        l,
        st_rank,
        within_bound: value <= l as f64 * (1.0 + 1e-8),
    })
}
