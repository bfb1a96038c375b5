//! Interface classification and interface spaces.

mod basis;
mod classify;

pub use basis::{
    build_flux_pbs, build_full_space, build_polynomial_space, build_pressure_pbs, InterfaceSpace,
    SpaceKind,
};
pub use classify::{
    classify, extract_runs, ClassifierConfig, EdgeLabel, InterfaceClassification, InterfaceLabels,
    Run,
};

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Skeleton;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceScheme {
    /// Linear polynomials on every interface.
    Pol,
    /// Physics-based spaces on flagged interfaces, linear elsewhere.
    Pbs,
    /// Per-edge indicators for both unknowns (reproduces the fine solution).
    Full,
}

impl SpaceScheme {
    pub fn label(self) -> &'static str {
        match self {
            SpaceScheme::Pol => "POL",
            SpaceScheme::Pbs => "PBS",
            SpaceScheme::Full => "FULL",
        }
    }
}

impl std::str::FromStr for SpaceScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pol" => Ok(SpaceScheme::Pol),
            "pbs" => Ok(SpaceScheme::Pbs),
            "full" => Ok(SpaceScheme::Full),
            _ => Err(Error::Config(format!(
                "unknown space scheme {s:?} (expected pol, pbs or full)"
            ))),
        }
    }
}

/// Which unknowns receive physics-based spaces under [`SpaceScheme::Pbs`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PbsTargets {
    pub pressure: bool,
    pub flux: bool,
}

impl PbsTargets {
    pub const BOTH: PbsTargets = PbsTargets {
        pressure: true,
        flux: true,
    };
}

impl Default for PbsTargets {
    fn default() -> Self {
        Self::BOTH
    }
}

/// Flux and pressure spaces for every interface, indexed by interface id.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceSpaces {
    pub flux: Vec<InterfaceSpace>,
    pub pressure: Vec<InterfaceSpace>,
}

impl InterfaceSpaces {
    pub fn n_interfaces(&self) -> usize {
        self.flux.len()
    }

    /// Total number of interface unknowns `Σ_k N_U(k) + N_P(k)`.
    pub fn n_dofs(&self) -> usize {
        self.flux.iter().map(InterfaceSpace::dim).sum::<usize>()
            + self.pressure.iter().map(InterfaceSpace::dim).sum::<usize>()
    }

    /// Write every basis as CSV (`interface,unknown,edge,f0,f1,..`).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let width = self
            .flux
            .iter()
            .chain(&self.pressure)
            .map(InterfaceSpace::dim)
            .max()
            .unwrap_or(0);
        let mut s = String::from("interface,unknown,edge");
        for j in 0..width {
            let _ = write!(s, ",f{j}");
        }
        s.push('\n');
        for (k, (u, p)) in self.flux.iter().zip(&self.pressure).enumerate() {
            for (name, space) in [("flux", u), ("pressure", p)] {
                for l in 0..space.n_edges {
                    let _ = write!(s, "{k},{name},{l}");
                    for j in 0..width {
                        match space.functions.get(j) {
                            Some(f) => {
                                let _ = write!(s, ",{}", f[l]);
                            }
                            None => s.push(','),
                        }
                    }
                    s.push('\n');
                }
            }
        }
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }
}

/// Choose the flux and pressure space of every interface.
pub fn assemble_spaces(
    skeleton: &Skeleton,
    classification: &InterfaceClassification,
    scheme: SpaceScheme,
    targets: PbsTargets,
) -> Result<InterfaceSpaces> {
    if classification.interfaces.len() != skeleton.n_interfaces() {
        return Err(Error::Contract(format!(
            "classification covers {} interfaces, skeleton has {}",
            classification.interfaces.len(),
            skeleton.n_interfaces()
        )));
    }
    let mut flux = Vec::with_capacity(skeleton.n_interfaces());
    let mut pressure = Vec::with_capacity(skeleton.n_interfaces());
    for (it, labels) in skeleton.interfaces.iter().zip(&classification.interfaces) {
        let m = it.len;
        let (u, p) = match scheme {
            SpaceScheme::Full => (build_full_space(m)?, build_full_space(m)?),
            SpaceScheme::Pol => (build_polynomial_space(m, 1)?, build_polynomial_space(m, 1)?),
            SpaceScheme::Pbs => {
                let u = if targets.flux && labels.in_barrier_set() {
                    build_flux_pbs(m, &labels.barrier_runs)?
                } else {
                    build_polynomial_space(m, 1)?
                };
                let p = if targets.pressure && labels.in_fracture_set() {
                    build_pressure_pbs(m, &labels.fracture_runs)?
                } else {
                    build_polynomial_space(m, 1)?
                };
                (u, p)
            }
        };
        flux.push(u);
        pressure.push(p);
    }
    Ok(InterfaceSpaces { flux, pressure })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{generate_field, presets, PermeabilityField};
    use crate::grid::{build_decomposition, FineGrid};

    #[test]
    fn homogeneous_pbs_equals_pol() {
        let g = FineGrid::unit_square(40).unwrap();
        let (_, s) = build_decomposition(&g, 4, 4).unwrap();
        let f = PermeabilityField::uniform(&g, 1.0).unwrap();
        let c = classify(&g, &f, &s, &ClassifierConfig::default());
        let pol = assemble_spaces(&s, &c, SpaceScheme::Pol, PbsTargets::BOTH).unwrap();
        let pbs = assemble_spaces(&s, &c, SpaceScheme::Pbs, PbsTargets::BOTH).unwrap();
        assert_eq!(pol, pbs);
        assert_eq!(pol.n_dofs(), 24 * 4);
    }

    #[test]
    fn combined_field_gets_physics_spaces_where_flagged() {
        let g = FineGrid::unit_square(160).unwrap();
        let (_, s) = build_decomposition(&g, 8, 8).unwrap();
        let f = generate_field(&presets::combined(1e8), &g).unwrap();
        let c = classify(&g, &f, &s, &ClassifierConfig::default());
        let pbs = assemble_spaces(&s, &c, SpaceScheme::Pbs, PbsTargets::BOTH).unwrap();
        let pol = assemble_spaces(&s, &c, SpaceScheme::Pol, PbsTargets::BOTH).unwrap();
        for (k, labels) in c.interfaces.iter().enumerate() {
            let pk = pbs.pressure[k].kind;
            let uk = pbs.flux[k].kind;
            assert_eq!(labels.in_fracture_set(), pk == SpaceKind::PhysicsPressure);
            assert_eq!(labels.in_barrier_set(), uk == SpaceKind::PhysicsFlux);
            assert_eq!(pol.pressure[k].dim(), 2);
            assert_eq!(pol.flux[k].dim(), 2);
        }
        // Pressure-only targeting leaves every flux space linear.
        let p_only = assemble_spaces(
            &s,
            &c,
            SpaceScheme::Pbs,
            PbsTargets {
                pressure: true,
                flux: false,
            },
        )
        .unwrap();
        assert_eq!(p_only.flux, pol.flux);
        assert_eq!(p_only.pressure, pbs.pressure);
    }

    #[test]
    fn scheme_parsing_and_csv_dump() {
        assert_eq!("PBS".parse::<SpaceScheme>().unwrap(), SpaceScheme::Pbs);
        assert!("cubic".parse::<SpaceScheme>().is_err());
        let g = FineGrid::unit_square(8).unwrap();
        let (_, s) = build_decomposition(&g, 2, 1).unwrap();
        let f = PermeabilityField::uniform(&g, 1.0).unwrap();
        let c = classify(&g, &f, &s, &ClassifierConfig::default());
        let sp = assemble_spaces(&s, &c, SpaceScheme::Pol, PbsTargets::BOTH).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bases.csv");
        sp.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 8);
        assert!(text.starts_with("interface,unknown,edge,f0,f1\n"));
    }
}
