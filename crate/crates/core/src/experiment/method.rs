//! Method specifications as written in configs and on the command line, and
//! dispatch to the solvers.

use std::fmt;
use std::str::FromStr;

use crate::csda::{csda_fit, SubspaceModel, DEFAULT_MU};
use crate::error::{Error, Result};
use crate::hetero::{hncsda_fit, hocsda_fit, HeteroConfig};
use crate::kmeans::InertiaKind;
use crate::linalg::ZeroThreshold;
use crate::nullspace::{ncsda_fit, Eigenproblem, NcsdaConfig};
use crate::orthogonal::{ortho_fit, OrthoConfig, OrthoMethod, Step4Variant, DEFAULT_ALPHA};
use crate::scatter::{scatter_matrices, ClassSplitData};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MethodSpec {
    Csda,
    Ncsda {
        problem: Eigenproblem,
        step4: bool,
        qr: bool,
    },
    Ortho {
        method: OrthoMethod,
        step4: Step4Variant,
    },
    Hncsda,
    Hocsda,
}

/// Numerical settings shared by every fit.
#[derive(Clone, Copy, Debug)]
pub struct FitParams {
    pub mu: f64,
    pub zero_threshold: ZeroThreshold,
    pub alpha: f64,
    pub kmeans_restarts: usize,
    pub kmeans_max_iters: usize,
    pub kmeans_selection: InertiaKind,
}

impl Default for FitParams {
    fn default() -> Self {
        Self {
            mu: DEFAULT_MU,
            zero_threshold: ZeroThreshold::default(),
            alpha: DEFAULT_ALPHA,
            kmeans_restarts: 10,
            kmeans_max_iters: 300,
            kmeans_selection: InertiaKind::Squared,
        }
    }
}

impl MethodSpec {
    /// The seven methods of the standard benchmark.
    pub fn benchmark() -> Vec<MethodSpec> {
        vec![
            MethodSpec::Csda,
            MethodSpec::Ncsda {
                problem: Eigenproblem::A,
                step4: true,
                qr: true,
            },
            MethodSpec::Ortho {
                method: OrthoMethod::Ucsda,
                step4: Step4Variant::SvdN,
            },
            MethodSpec::Ortho {
                method: OrthoMethod::Ocsda,
                step4: Step4Variant::SvdN,
            },
            MethodSpec::Ortho {
                method: OrthoMethod::Rocsda,
                step4: Step4Variant::SvdN,
            },
            MethodSpec::Hncsda,
            MethodSpec::Hocsda,
        ]
    }

    pub fn uses_clusters(&self) -> bool {
        matches!(self, MethodSpec::Hncsda | MethodSpec::Hocsda)
    }

    /// Fits at full width; `max_dim` bounds the baseline solver, which keeps
    /// only its leading eigenvectors.
    pub fn fit(
        &self,
        data: &ClassSplitData,
        k: usize,
        seed: u64,
        max_dim: usize,
        p: &FitParams,
    ) -> Result<SubspaceModel> {
        match *self {
            MethodSpec::Csda => {
                let s = scatter_matrices(data, p.zero_threshold)?;
                csda_fit(&s, max_dim, p.mu, p.zero_threshold)
            }
            MethodSpec::Ncsda { problem, step4, qr } => ncsda_fit(
                data,
                &NcsdaConfig {
                    eigenproblem: problem,
                    use_step4: step4,
                    use_qr: qr,
                    target_dim: None,
                    mu: p.mu,
                    zero_threshold: p.zero_threshold,
                },
            ),
            MethodSpec::Ortho { method, step4 } => ortho_fit(
                data,
                &OrthoConfig {
                    method,
                    step4,
                    alpha: p.alpha,
                    target_dim: None,
                    mu: p.mu,
                    zero_threshold: p.zero_threshold,
                },
            ),
            MethodSpec::Hncsda | MethodSpec::Hocsda => {
                let cfg = HeteroConfig {
                    k,
                    mu: p.mu,
                    zero_threshold: p.zero_threshold,
                    kmeans_restarts: p.kmeans_restarts,
                    kmeans_max_iters: p.kmeans_max_iters,
                    kmeans_selection: p.kmeans_selection,
                    seed,
                    target_dim: None,
                };
                if *self == MethodSpec::Hncsda {
                    hncsda_fit(data, &cfg)
                } else {
                    hocsda_fit(data, &cfg)
                }
            }
        }
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodSpec::Csda => f.write_str("csda"),
            MethodSpec::Ncsda { problem, step4, qr } => {
                write!(f, "ncsda:{problem}")?;
                if *step4 {
                    f.write_str("+s4")?;
                }
                if *qr {
                    f.write_str("+qr")?;
                }
                Ok(())
            }
            MethodSpec::Ortho { method, step4 } => write!(f, "{method}:{}", step4.label()),
            MethodSpec::Hncsda => f.write_str("hncsda"),
            MethodSpec::Hocsda => f.write_str("hocsda"),
        }
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    /// `csda`, `ncsda[:EA[+s4][+qr]]`, `ucsda|ocsda|rocsda[:svdn|svdp|gend]`,
    /// `hncsda`, `hocsda`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, opts) = match s.split_once(':') {
            Some((n, o)) => (n.trim().to_ascii_lowercase(), Some(o.trim())),
            None => (s.to_ascii_lowercase(), None),
        };
        let no_opts = |m: MethodSpec| match opts {
            None => Ok(m),
            Some(o) => Err(Error::Config(format!(
                "method '{name}' takes no options, got '{o}'"
            ))),
        };
        match name.as_str() {
            "csda" => no_opts(MethodSpec::Csda),
            "hncsda" => no_opts(MethodSpec::Hncsda),
            "hocsda" => no_opts(MethodSpec::Hocsda),
            "ncsda" => {
                let Some(o) = opts else {
                    return Ok(MethodSpec::Ncsda {
                        problem: Eigenproblem::A,
                        step4: true,
                        qr: true,
                    });
                };
                let mut parts = o.split('+');
                let problem = parts.next().unwrap_or_default().parse::<Eigenproblem>()?;
                let (mut step4, mut qr) = (false, false);
                for flag in parts {
                    match flag.trim().to_ascii_lowercase().as_str() {
                        "s4" => step4 = true,
                        "qr" => qr = true,
                        other => {
                            return Err(Error::Config(format!("unknown ncsda flag '{other}'")))
                        }
                    }
                }
                Ok(MethodSpec::Ncsda { problem, step4, qr })
            }
            "ucsda" | "ocsda" | "rocsda" => Ok(MethodSpec::Ortho {
                method: name.parse()?,
                step4: match opts {
                    Some(o) => o.parse()?,
                    None => Step4Variant::SvdN,
                },
            }),
            _ => Err(Error::Config(format!("unknown method '{s}'"))),
        }
    }
}

/// Parses a `;`-separated method list.
pub fn parse_method_list(s: &str) -> Result<Vec<MethodSpec>> {
    let methods = s
        .split(';')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect::<Result<Vec<MethodSpec>>>()?;
    if methods.is_empty() {
        return Err(Error::Config("method list is empty".into()));
    }
    Ok(methods)
}
