//! Classical opacity of a cloud in its four equivalent forms.
//!
//! `g = 1 - tr_cl = 1 - exp(-tau) = 1 - 10^(-abs)`. `g` is the fraction of
//! the detector surface a localized cloud covers and normalizes every
//! absorption probability in the model.

use std::f64::consts::LN_10;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which representation a scalar opacity value is given in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpacityKind {
    G,
    TrCl,
    Tau,
    Abs,
}

impl OpacityKind {
    pub const ALL: [OpacityKind; 4] = [Self::G, Self::TrCl, Self::Tau, Self::Abs];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::G => "g",
            Self::TrCl => "tr_cl",
            Self::Tau => "tau",
            Self::Abs => "abs",
        }
    }
}

impl fmt::Display for OpacityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OpacityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "g" => Ok(Self::G),
            "tr_cl" | "trcl" => Ok(Self::TrCl),
            "tau" => Ok(Self::Tau),
            "abs" => Ok(Self::Abs),
            other => Err(Error::Usage(format!(
                "unknown opacity kind '{other}' (expected g, tr_cl, tau or abs)"
            ))),
        }
    }
}

/// All four representations, populated eagerly and mutually consistent.
///
/// `g == 1.0 - tr_cl` holds bit-exactly. For a fully opaque cloud
/// (`g == 1`) `tau` and `abs` are `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpacitySpec {
    pub g: f64,
    pub tr_cl: f64,
    pub tau: f64,
    pub abs: f64,
}

impl OpacitySpec {
    /// Builds all four forms from any one of them.
    pub fn new(kind: OpacityKind, value: f64) -> Result<Self> {
        if value.is_nan() {
            return Err(Error::Domain {
                name: kind.as_str(),
                value,
                bound: "a number",
            });
        }
        let tr_cl = match kind {
            OpacityKind::G => {
                if !(value > 0.0 && value <= 1.0) {
                    return Err(Error::Domain {
                        name: "g",
                        value,
                        bound: "0 < g <= 1",
                    });
                }
                1.0 - value
            }
            OpacityKind::TrCl => {
                if !(0.0..1.0).contains(&value) {
                    return Err(Error::Domain {
                        name: "tr_cl",
                        value,
                        bound: "0 <= tr_cl < 1",
                    });
                }
                value
            }
            OpacityKind::Tau => {
                if value <= 0.0 {
                    return Err(Error::Domain {
                        name: "tau",
                        value,
                        bound: "tau > 0 (g must exceed 0)",
                    });
                }
                (-value).exp()
            }
            OpacityKind::Abs => {
                if value <= 0.0 {
                    return Err(Error::Domain {
                        name: "abs",
                        value,
                        bound: "abs > 0 (g must exceed 0)",
                    });
                }
                (-value * LN_10).exp()
            }
        };
        let g = 1.0 - tr_cl;
        if g <= 0.0 {
            return Err(Error::Domain {
                name: kind.as_str(),
                value,
                bound: "g = 1 - tr_cl representable as > 0",
            });
        }
        // depth inputs are kept verbatim; otherwise read tau from whichever of
        // g and tr_cl still carries full relative precision
        let (tau, abs) = match kind {
            OpacityKind::Tau => (value, value / LN_10),
            OpacityKind::Abs => (value * LN_10, value),
            _ => {
                let tau = if tr_cl > 0.0 && tr_cl < 0.5 {
                    -tr_cl.ln()
                } else {
                    -(-g).ln_1p()
                };
                (tau, tau / LN_10)
            }
        };
        Ok(Self { g, tr_cl, tau, abs })
    }

    pub fn from_g(g: f64) -> Result<Self> {
        Self::new(OpacityKind::G, g)
    }

    pub fn from_tr_cl(tr_cl: f64) -> Result<Self> {
        Self::new(OpacityKind::TrCl, tr_cl)
    }

    pub fn from_tau(tau: f64) -> Result<Self> {
        Self::new(OpacityKind::Tau, tau)
    }

    pub fn get(&self, kind: OpacityKind) -> f64 {
        match kind {
            OpacityKind::G => self.g,
            OpacityKind::TrCl => self.tr_cl,
            OpacityKind::Tau => self.tau,
            OpacityKind::Abs => self.abs,
        }
    }

    /// Stacks independent layers: transmittances multiply, depths add.
    pub fn compose(layers: &[OpacitySpec]) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Usage(
                "compose_layers needs at least one layer".into(),
            ));
        }
        if let [only] = layers {
            return Ok(*only);
        }
        let mut taus: Vec<f64> = layers.iter().map(|l| l.tau).collect();
        taus.sort_by(f64::total_cmp);
        Self::from_tau(taus.iter().sum())
    }
}
