//! Per-cell scalar permeability fields, rasterized fracture/barrier
//! generators and the two-phase fluid model.

mod fluid;
mod io;
pub mod presets;

pub use fluid::FluidModel;
pub use io::{encode_field, load_field, save_field, FieldFormat};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FineGrid;

/// Scalar permeability per fine cell, row-major with x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct PermeabilityField {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl PermeabilityField {
    pub fn new(grid: &FineGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::Data(format!(
                "permeability field has {} values, grid has {} cells",
                values.len(),
                grid.n_cells()
            )));
        }
        if let Some((c, k)) = values
            .iter()
            .enumerate()
            .find(|(_, k)| !(k.is_finite() && **k > 0.0))
        {
            return Err(Error::Data(format!(
                "permeability must be positive and finite, cell {c} has {k}"
            )));
        }
        Ok(Self {
            nx: grid.nx(),
            ny: grid.ny(),
            values,
        })
    }

    pub fn uniform(grid: &FineGrid, k: f64) -> Result<Self> {
        Self::new(grid, vec![k; grid.n_cells()])
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, c: usize) -> f64 {
        self.values[c]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn matches(&self, grid: &FineGrid) -> bool {
        self.nx == grid.nx() && self.ny == grid.ny()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    /// High-permeability strip with value `k_max`.
    Fracture,
    /// Low-permeability strip with value `k_min`.
    Barrier,
}

fn default_width() -> f64 {
    1.0
}

/// A straight strip from `from` to `to` (domain coordinates), `width` cells wide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Feature {
    pub kind: FeatureKind,
    pub from: [f64; 2],
    pub to: [f64; 2],
    #[serde(default = "default_width")]
    pub width: f64,
}

impl Feature {
    pub fn fracture(from: [f64; 2], to: [f64; 2]) -> Self {
        Self {
            kind: FeatureKind::Fracture,
            from,
            to,
            width: 1.0,
        }
    }

    pub fn barrier(from: [f64; 2], to: [f64; 2]) -> Self {
        Self {
            kind: FeatureKind::Barrier,
            from,
            to,
            width: 1.0,
        }
    }

    pub fn with_width(mut self, width: f64) -> Self {
        self.width = width;
        self
    }
}

/// Background permeability plus a list of rasterized features. Features are
/// painted in order, so later ones overwrite earlier ones where they cross.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub background: f64,
    pub k_max: f64,
    pub k_min: f64,
    #[serde(default)]
    pub features: Vec<Feature>,
}

impl FieldSpec {
    pub fn homogeneous(k: f64) -> Self {
        Self {
            background: k,
            k_max: k,
            k_min: k,
            features: Vec::new(),
        }
    }

    pub fn contrast(&self) -> f64 {
        self.k_max / self.k_min
    }

    fn validate(&self, grid: &FineGrid) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(self.background) && positive(self.k_max) && positive(self.k_min)) {
            return Err(Error::Config("field values must be positive".into()));
        }
        if !(self.k_min <= self.background && self.background <= self.k_max) {
            return Err(Error::Config(format!(
                "need k_min <= background <= k_max, got {} <= {} <= {}",
                self.k_min, self.background, self.k_max
            )));
        }
        let tol = 1e-12 * grid.lx().max(grid.ly());
        for (n, f) in self.features.iter().enumerate() {
            for p in [f.from, f.to] {
                if p[0] < -tol || p[0] > grid.lx() + tol || p[1] < -tol || p[1] > grid.ly() + tol {
                    return Err(Error::Config(format!(
                        "feature {n} endpoint ({}, {}) lies outside the domain",
                        p[0], p[1]
                    )));
                }
            }
            if f.from == f.to {
                return Err(Error::Config(format!("feature {n} has zero length")));
            }
            if !(f.width > 0.0) {
                return Err(Error::Config(format!("feature {n} needs a positive width")));
            }
        }
        Ok(())
    }
}

/// Rasterize `spec` onto `grid`.
///
/// A cell belongs to a feature when its center lies in the strip around the
/// segment whose half-width, in cell units, is `width/2 * (|n_x| + |n_y|)`
/// (`n` the unit normal of the segment). This gives one-cell-wide strips for
/// axis-aligned segments and 4-connected staircases for oblique ones, so
/// rasterized fractures stay connected under two-point fluxes.
pub fn generate_field(spec: &FieldSpec, grid: &FineGrid) -> Result<PermeabilityField> {
    spec.validate(grid)?;
    let mut values = vec![spec.background; grid.n_cells()];
    for f in &spec.features {
        let value = match f.kind {
            FeatureKind::Fracture => spec.k_max,
            FeatureKind::Barrier => spec.k_min,
        };
        // Work in cell units so centers are exact half-integers.
        let p = [f.from[0] / grid.hx(), f.from[1] / grid.hy()];
        let q = [f.to[0] / grid.hx(), f.to[1] / grid.hy()];
        let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
        let len = dx.hypot(dy);
        let (tx, ty) = (dx / len, dy / len);
        let (nx, ny) = (-ty, tx);
        let half = 0.5 * f.width * (nx.abs() + ny.abs());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (rx, ry) = (i as f64 + 0.5 - p[0], j as f64 + 0.5 - p[1]);
                let s = rx * nx + ry * ny;
                let t = rx * tx + ry * ty;
                if s >= -half && s < half && t >= -1e-9 && t <= len + 1e-9 {
                    values[grid.cell(i, j)] = value;
                }
            }
        }
    }
    PermeabilityField::new(grid, values)
}
