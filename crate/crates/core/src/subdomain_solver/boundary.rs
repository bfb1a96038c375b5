use crate::error::{Error, Result};
use crate::grid::{FineGrid, Side};

/// Condition on one external boundary face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceBc {
    /// Prescribed pressure `g`.
    Pressure(f64),
    /// Prescribed outward normal velocity `z` (negative means inflow).
    Flux(f64),
}

/// Boundary conditions of the global problem plus point sources.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    /// Indexed by [`Side::index`]; west/east have `ny` entries (by `j`),
    /// south/north have `nx` entries (by `i`).
    pub sides: [Vec<FaceBc>; 4],
    /// Volumetric rate per cell, positive for injection.
    pub sources: Vec<f64>,
    /// Saturation of fluid entering through inflow faces and injectors.
    pub inflow_saturation: f64,
}

impl BoundarySpec {
    /// The same condition on every face of each side.
    pub fn from_sides(grid: &FineGrid, sides: [FaceBc; 4]) -> Self {
        let len = |s: Side| match s {
            Side::West | Side::East => grid.ny(),
            Side::South | Side::North => grid.nx(),
        };
        Self {
            sides: Side::ALL.map(|s| vec![sides[s.index()]; len(s)]),
            sources: vec![0.0; grid.n_cells()],
            inflow_saturation: 1.0,
        }
    }

    pub fn no_flow(grid: &FineGrid) -> Self {
        Self::from_sides(grid, [FaceBc::Flux(0.0); 4])
    }

    /// Uniform inflow velocity `rate` on the west side, matching outflow on
    /// the east side, no flow on south and north.
    pub fn slab_flux(grid: &FineGrid, rate: f64) -> Self {
        Self::from_sides(
            grid,
            [
                FaceBc::Flux(-rate),
                FaceBc::Flux(rate),
                FaceBc::Flux(0.0),
                FaceBc::Flux(0.0),
            ],
        )
    }

    /// Pressure `left` on the west side, `right` on the east side, no flow elsewhere.
    pub fn slab_pressure(grid: &FineGrid, left: f64, right: f64) -> Self {
        Self::from_sides(
            grid,
            [
                FaceBc::Pressure(left),
                FaceBc::Pressure(right),
                FaceBc::Flux(0.0),
                FaceBc::Flux(0.0),
            ],
        )
    }

    /// No-flow box with an injector of rate `q` in the bottom-left cell and
    /// a producer of rate `q` in the top-right cell.
    pub fn quarter_five_spot(grid: &FineGrid, q: f64) -> Self {
        let mut b = Self::no_flow(grid);
        b.sources[grid.cell(0, 0)] += q;
        b.sources[grid.cell(grid.nx() - 1, grid.ny() - 1)] -= q;
        b
    }

    pub fn fixes_pressure(&self) -> bool {
        self.sides
            .iter()
            .flatten()
            .any(|bc| matches!(bc, FaceBc::Pressure(_)))
    }

    #[inline]
    pub fn face(&self, side: Side, l: usize) -> FaceBc {
        self.sides[side.index()][l]
    }

    /// Net prescribed outflow through flux faces minus the net source rate.
    /// Zero for compatible pure-flux problems.
    pub fn flux_imbalance(&self, grid: &FineGrid) -> f64 {
        let mut out = 0.0;
        for side in Side::ALL {
            let area = face_area(grid, side);
            for bc in &self.sides[side.index()] {
                if let FaceBc::Flux(z) = bc {
                    out += z * area;
                }
            }
        }
        out - self.sources.iter().sum::<f64>()
    }

    pub fn validate(&self, grid: &FineGrid) -> Result<()> {
        for side in Side::ALL {
            let want = match side {
                Side::West | Side::East => grid.ny(),
                Side::South | Side::North => grid.nx(),
            };
            let have = self.sides[side.index()].len();
            if have != want {
                return Err(Error::Config(format!(
                    "{side:?} boundary has {have} face conditions, expected {want}"
                )));
            }
        }
        if self.sources.len() != grid.n_cells() {
            return Err(Error::Config(format!(
                "source vector has {} entries, grid has {} cells",
                self.sources.len(),
                grid.n_cells()
            )));
        }
        let finite = self.sides.iter().flatten().all(|bc| match bc {
            FaceBc::Pressure(v) | FaceBc::Flux(v) => v.is_finite(),
        }) && self.sources.iter().all(|q| q.is_finite());
        if !finite {
            return Err(Error::Config("boundary data must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.inflow_saturation) {
            return Err(Error::Config(format!(
                "inflow saturation {} outside [0, 1]",
                self.inflow_saturation
            )));
        }
        if !self.fixes_pressure() {
            let boundary: f64 = Side::ALL
                .iter()
                .map(|&side| {
                    let a = face_area(grid, side);
                    self.sides[side.index()]
                        .iter()
                        .map(|bc| match bc {
                            FaceBc::Flux(z) => (z * a).abs(),
                            FaceBc::Pressure(_) => 0.0,
                        })
                        .sum::<f64>()
                })
                .sum();
            let scale = boundary + self.sources.iter().map(|q| q.abs()).sum::<f64>();
            let imbalance = self.flux_imbalance(grid);
            if imbalance.abs() > 1e-10 * scale {
                return Err(Error::Config(format!(
                    "pure-flux boundary data is incompatible: net outflow minus sources = {imbalance:e}"
                )));
            }
        }
        Ok(())
    }
}

/// Area (length in 2D) of one fine face on `side`.
pub(crate) fn face_area(grid: &FineGrid, side: Side) -> f64 {
    match side {
        Side::West | Side::East => grid.hy(),
        Side::South | Side::North => grid.hx(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        let g = FineGrid::unit_square(10).unwrap();
        for b in [
            BoundarySpec::slab_flux(&g, 1.0),
            BoundarySpec::slab_pressure(&g, 1.0, 0.0),
            BoundarySpec::quarter_five_spot(&g, 0.5),
            BoundarySpec::no_flow(&g),
        ] {
            b.validate(&g).unwrap();
        }
        assert!(BoundarySpec::slab_pressure(&g, 1.0, 0.0).fixes_pressure());
        assert!(!BoundarySpec::slab_flux(&g, 1.0).fixes_pressure());
    }

    #[test]
    fn incompatible_flux_data_rejected() {
        let g = FineGrid::unit_square(4).unwrap();
        let mut b = BoundarySpec::slab_flux(&g, 1.0);
        b.sides[Side::East.index()][0] = FaceBc::Flux(2.0);
        assert!(matches!(b.validate(&g), Err(Error::Config(_))));
        let mut b = BoundarySpec::no_flow(&g);
        b.sources[0] = 1.0;
        assert!(b.validate(&g).is_err());
    }

    #[test]
    fn wrong_lengths_rejected() {
        let g = FineGrid::new(4, 3, 1.0, 1.0).unwrap();
        let mut b = BoundarySpec::no_flow(&g);
        b.sides[0].pop();
        assert!(b.validate(&g).is_err());
    }
}
