use super::classify::Run;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    Polynomial(usize),
    PhysicsPressure,
    PhysicsFlux,
    /// One indicator per fine edge.
    Full,
}

/// A basis on one interface, each function stored as one constant per fine edge.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceSpace {
    pub kind: SpaceKind,
    pub n_edges: usize,
    pub functions: Vec<Vec<f64>>,
}

impl InterfaceSpace {
    fn from_functions(kind: SpaceKind, n_edges: usize, functions: Vec<Vec<f64>>) -> Result<Self> {
        for (j, f) in functions.iter().enumerate() {
            if f.len() != n_edges {
                return Err(Error::Contract(format!(
                    "basis function {j} has {} values, interface has {n_edges} edges",
                    f.len()
                )));
            }
            if f.iter().all(|v| *v == 0.0) {
                return Err(Error::Contract(format!(
                    "basis function {j} is identically zero"
                )));
            }
        }
        Ok(Self {
            kind,
            n_edges,
            functions,
        })
    }

    pub fn dim(&self) -> usize {
        self.functions.len()
    }

    /// Edgewise values of `Σ_j c_j f_j`.
    pub fn combine(&self, coefficients: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_edges];
        for (f, c) in self.functions.iter().zip(coefficients) {
            for (o, v) in out.iter_mut().zip(f) {
                *o += c * v;
            }
        }
        out
    }

    /// Coefficients representing the constant function 1 in this basis.
    pub fn constant_coefficients(&self) -> Vec<f64> {
        match self.kind {
            SpaceKind::Polynomial(_) => {
                let mut c = vec![0.0; self.dim()];
                c[0] = 1.0;
                c
            }
            SpaceKind::PhysicsPressure | SpaceKind::PhysicsFlux | SpaceKind::Full => {
                vec![1.0; self.dim()]
            }
        }
    }

    /// Gram matrix `G_ij = Σ_e f_i(e) f_j(e)`.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut g = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = self.functions[i]
                    .iter()
                    .zip(&self.functions[j])
                    .map(|(a, b)| a * b)
                    .sum();
                g[i][j] = v;
                g[j][i] = v;
            }
        }
        g
    }

    /// Cholesky of the Gram matrix with a relative pivot threshold.
    pub fn is_linearly_independent(&self) -> bool {
        let mut g = self.gram();
        let n = g.len();
        let scale = (0..n).map(|i| g[i][i]).fold(0.0, f64::max);
        if n == 0 || scale <= 0.0 {
            return n == 0;
        }
        for k in 0..n {
            let mut d = g[k][k];
            for p in 0..k {
                d -= g[k][p] * g[k][p];
            }
            if d <= 1e-12 * scale {
                return false;
            }
            let d = d.sqrt();
            g[k][k] = d;
            for i in k + 1..n {
                let mut v = g[i][k];
                for p in 0..k {
                    v -= g[i][p] * g[k][p];
                }
                g[i][k] = v / d;
            }
        }
        true
    }
}

/// Midpoint samples of the monomials `1, x̂, ..` up to `degree` with `x̂ ∈ [0, 1]`.
///
/// A one-edge interface cannot carry a linear function and gets the constant only.
pub fn build_polynomial_space(n_edges: usize, degree: usize) -> Result<InterfaceSpace> {
    if degree > 1 {
        return Err(Error::Config(format!(
            "polynomial interface spaces support degree 0 or 1, got {degree}"
        )));
    }
    if n_edges == 0 {
        return Err(Error::Contract("interface without edges".into()));
    }
    let m = n_edges as f64;
    let degree = if n_edges == 1 { 0 } else { degree };
    let functions = (0..=degree)
        .map(|p| {
            (0..n_edges)
                .map(|l| ((l as f64 + 0.5) / m).powi(p as i32))
                .collect()
        })
        .collect();
    InterfaceSpace::from_functions(SpaceKind::Polynomial(degree), n_edges, functions)
}

pub fn build_full_space(n_edges: usize) -> Result<InterfaceSpace> {
    let functions = (0..n_edges)
        .map(|l| {
            let mut f = vec![0.0; n_edges];
            f[l] = 1.0;
            f
        })
        .collect();
    InterfaceSpace::from_functions(SpaceKind::Full, n_edges, functions)
}

fn check_runs(n_edges: usize, runs: &[Run]) -> Result<()> {
    if runs.is_empty() {
        return Err(Error::Contract(
            "physics-based space needs at least one run".into(),
        ));
    }
    let mut prev_end = None;
    for r in runs {
        if r.is_empty() || r.end > n_edges || prev_end.is_some_and(|e| r.start <= e) {
            return Err(Error::Contract(format!(
                "runs must be nonempty, sorted, separated and inside [0, {n_edges}): {runs:?}"
            )));
        }
        prev_end = Some(r.end);
    }
    Ok(())
}

/// Hat/plateau pressure basis: a ramp from the interface start down to the
/// first run, one plateau per run ramping linearly to zero across the
/// neighbouring gaps, and a ramp up from the last run to the interface end.
/// Ramps that would live on an empty segment are dropped.
pub fn build_pressure_pbs(n_edges: usize, runs: &[Run]) -> Result<InterfaceSpace> {
    check_runs(n_edges, runs)?;
    let (a, d) = (0.0, n_edges as f64);
    let mid = |l: usize| l as f64 + 0.5;
    let mut functions = Vec::with_capacity(runs.len() + 2);

    let b0 = runs[0].start as f64;
    if runs[0].start > 0 {
        functions.push(
            (0..n_edges)
                .map(|l| {
                    let x = mid(l);
                    if x < b0 {
                        (b0 - x) / (b0 - a)
                    } else {
                        0.0
                    }
                })
                .collect(),
        );
    }
    for (k, r) in runs.iter().enumerate() {
        let (b, c) = (r.start as f64, r.end as f64);
        let left = if k == 0 { a } else { runs[k - 1].end as f64 };
        let right = runs.get(k + 1).map_or(d, |n| n.start as f64);
        functions.push(
            (0..n_edges)
                .map(|l| {
                    let x = mid(l);
                    if x < left || x > right {
                        0.0
                    } else if x < b {
                        (x - left) / (b - left)
                    } else if x < c {
                        1.0
                    } else {
                        (right - x) / (right - c)
                    }
                })
                .collect(),
        );
    }
    let cn = runs[runs.len() - 1].end as f64;
    if runs[runs.len() - 1].end < n_edges {
        functions.push(
            (0..n_edges)
                .map(|l| {
                    let x = mid(l);
                    if x > cn {
                        (x - cn) / (d - cn)
                    } else {
                        0.0
                    }
                })
                .collect(),
        );
    }
    InterfaceSpace::from_functions(SpaceKind::PhysicsPressure, n_edges, functions)
}

/// Indicator flux basis: one indicator per run and one per nonempty gap
/// between, before and after the runs.
pub fn build_flux_pbs(n_edges: usize, runs: &[Run]) -> Result<InterfaceSpace> {
    check_runs(n_edges, runs)?;
    let indicator = |s: usize, e: usize| -> Vec<f64> {
        (0..n_edges)
            .map(|l| if l >= s && l < e { 1.0 } else { 0.0 })
            .collect()
    };
    let mut functions = Vec::with_capacity(2 * runs.len() + 1);
    let mut cursor = 0;
    for r in runs {
        if r.start > cursor {
            functions.push(indicator(cursor, r.start));
        }
        functions.push(indicator(r.start, r.end));
        cursor = r.end;
    }
    if cursor < n_edges {
        functions.push(indicator(cursor, n_edges));
    }
    InterfaceSpace::from_functions(SpaceKind::PhysicsFlux, n_edges, functions)
}
