use crate::error::{Error, Result};

/// Water/oil fluid pair with quadratic relative permeabilities
/// `k_rw = s^2`, `k_ro = (1 - s)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidModel {
    mu_w: f64,
    mu_o: f64,
}

const SATURATION_SLACK: f64 = 1e-10;

impl FluidModel {
    pub fn new(mu_w: f64, mu_o: f64) -> Result<Self> {
        if !(mu_w > 0.0 && mu_o > 0.0) || !mu_w.is_finite() || !mu_o.is_finite() {
            return Err(Error::Config(format!(
                "viscosities must be positive, got mu_w={mu_w}, mu_o={mu_o}"
            )));
        }
        Ok(Self { mu_w, mu_o })
    }

    /// Unit water viscosity and oil viscosity `m`.
    pub fn with_viscosity_ratio(m: f64) -> Result<Self> {
        Self::new(1.0, m)
    }

    pub fn mu_w(&self) -> f64 {
        self.mu_w
    }
    pub fn mu_o(&self) -> f64 {
        self.mu_o
    }

    /// `M = mu_o / mu_w`.
    pub fn viscosity_ratio(&self) -> f64 {
        self.mu_o / self.mu_w
    }

    fn check(s: f64) -> Result<f64> {
        if !(s >= -SATURATION_SLACK && s <= 1.0 + SATURATION_SLACK) {
            return Err(Error::Contract(format!("saturation {s} outside [0, 1]")));
        }
        Ok(s.clamp(0.0, 1.0))
    }

    pub fn total_mobility(&self, s: f64) -> Result<f64> {
        Ok(self.mobility_unchecked(Self::check(s)?))
    }

    pub fn fractional_flow(&self, s: f64) -> Result<f64> {
        Ok(self.fractional_flow_unchecked(Self::check(s)?))
    }

    pub(crate) fn mobility_unchecked(&self, s: f64) -> f64 {
        s * s / self.mu_w + (1.0 - s) * (1.0 - s) / self.mu_o
    }

    pub(crate) fn fractional_flow_unchecked(&self, s: f64) -> f64 {
        let w = self.viscosity_ratio() * s * s;
        let o = (1.0 - s) * (1.0 - s);
        w / (w + o)
    }

    /// `f'(s)` from the closed form `2 M s (1 - s) / (M s^2 + (1 - s)^2)^2`.
    pub fn fractional_flow_slope(&self, s: f64) -> f64 {
        let m = self.viscosity_ratio();
        let d = m * s * s + (1.0 - s) * (1.0 - s);
        2.0 * m * s * (1.0 - s) / (d * d)
    }

    /// `max |f'|` over 1001 equispaced saturations in `[0, 1]`.
    pub fn max_fractional_flow_slope(&self) -> f64 {
        (0..=1000)
            .map(|k| self.fractional_flow_slope(k as f64 / 1000.0).abs())
            .fold(0.0, f64::max)
    }

    /// Per-cell total mobility for a saturation field.
    pub fn mobility_field(&self, saturation: &[f64]) -> Result<Vec<f64>> {
        saturation.iter().map(|&s| self.total_mobility(s)).collect()
    }
}
