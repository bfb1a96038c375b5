use crate::error::{Error, Result};
use crate::spaces::{InterfaceClassification, PbsTargets};

pub const MMMFEM_ALPHA: f64 = 1e-6;
pub const MHM_ALPHA: f64 = 1e6;

/// Choice of the Robin `α` field and of which unknowns get physics-based spaces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodPreset {
    /// Constant `α` everywhere.
    Mrcm { alpha: f64 },
    /// Mortar limit, `α = 1e-6`. Physics-based spaces replace the pressure space only.
    Mmmfem,
    /// Hybrid-mixed limit, `α = 1e6`. Physics-based spaces replace the flux space only.
    Mhm,
    /// `α_small` on fracture edges, `α_large` elsewhere.
    Amrcm { small: f64, large: f64 },
}

impl MethodPreset {
    pub fn amrcm() -> Self {
        MethodPreset::Amrcm {
            small: 1e-2,
            large: 1e2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            MethodPreset::Mrcm { alpha } => alpha > 0.0 && alpha.is_finite(),
            MethodPreset::Amrcm { small, large } => {
                small > 0.0 && small < large && large.is_finite()
            }
            MethodPreset::Mmmfem | MethodPreset::Mhm => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid method parameters {self:?}")))
        }
    }

    /// Short name used in tables, e.g. `MMMFEM`, `aMRCM`, `MRCM(1e-2)`.
    pub fn label(&self) -> String {
        match *self {
            MethodPreset::Mrcm { alpha } => format!("MRCM({alpha:e})"),
            MethodPreset::Mmmfem => "MMMFEM".into(),
            MethodPreset::Mhm => "MHM".into(),
            MethodPreset::Amrcm { small, large } if (small, large) == (1e-2, 1e2) => "aMRCM".into(),
            MethodPreset::Amrcm { small, large } => format!("aMRCM({small:e},{large:e})"),
        }
    }

    pub fn pbs_targets(&self) -> PbsTargets {
        match self {
            MethodPreset::Mmmfem => PbsTargets {
                pressure: true,
                flux: false,
            },
            MethodPreset::Mhm => PbsTargets {
                pressure: false,
                flux: true,
            },
            MethodPreset::Mrcm { .. } | MethodPreset::Amrcm { .. } => PbsTargets::BOTH,
        }
    }

    /// Robin `α` per interface edge.
    pub fn alpha_field(&self, classification: &InterfaceClassification) -> Vec<Vec<f64>> {
        classification
            .interfaces
            .iter()
            .map(|labels| {
                labels
                    .edges
                    .iter()
                    .map(|e| match *self {
                        MethodPreset::Mrcm { alpha } => alpha,
                        MethodPreset::Mmmfem => MMMFEM_ALPHA,
                        MethodPreset::Mhm => MHM_ALPHA,
                        MethodPreset::Amrcm { small, large } => {
                            if e.fracture {
                                small
                            } else {
                                large
                            }
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

impl std::str::FromStr for MethodPreset {
    type Err = Error;

    /// Accepts `mmmfem`, `mhm`, `amrcm`, `amrcm6` (the `1e∓6` variant),
    /// `amrcm:<small>,<large>` and `mrcm:<alpha>`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let preset = match lower.as_str() {
            "mmmfem" => MethodPreset::Mmmfem,
            "mhm" => MethodPreset::Mhm,
            "amrcm" => MethodPreset::amrcm(),
            "amrcm6" => MethodPreset::Amrcm {
                small: 1e-6,
                large: 1e6,
            },
            other => {
                let bad = || Error::Config(format!("bad alpha in method {s:?}"));
                if let Some(a) = other.strip_prefix("mrcm:") {
                    MethodPreset::Mrcm {
                        alpha: a.trim().parse().map_err(|_| bad())?,
                    }
                } else if let Some((small, large)) =
                    other.strip_prefix("amrcm:").and_then(|r| r.split_once(','))
                {
                    MethodPreset::Amrcm {
                        small: small.trim().parse().map_err(|_| bad())?,
                        large: large.trim().parse().map_err(|_| bad())?,
                    }
                } else {
                    return Err(Error::Config(format!(
                        "unknown method {s:?} (expected mmmfem, mhm, amrcm, amrcm6, amrcm:<small>,<large> or mrcm:<alpha>)"
                    )));
                }
            }
        };
        preset.validate()?;
        Ok(preset)
    }
}
