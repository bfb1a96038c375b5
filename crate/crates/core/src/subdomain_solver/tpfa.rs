use crate::error::{Error, Result};
use crate::grid::{CellBlock, FineGrid, Side};
use crate::linalg::{SpdFactor, TripletBuilder};

/// Type of condition on one boundary face of a block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceKind {
    /// Prescribed pressure.
    Dirichlet,
    /// Prescribed outward velocity.
    Neumann,
    /// `−β u·n + p = r` with the given `β > 0`.
    Robin(f64),
}

/// Per-call data matching the [`FaceKind`]s of a [`BlockOperator`]:
/// pressure, outward velocity or Robin trace `r` per boundary face, and
/// volumetric sources per local cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRhs {
    pub side_values: [Vec<f64>; 4],
    pub sources: Vec<f64>,
}

impl BlockRhs {
    pub fn zeros(block: &CellBlock) -> Self {
        Self {
            side_values: Side::ALL.map(|s| vec![0.0; side_len(block, s)]),
            sources: vec![0.0; block.n_cells()],
        }
    }
}

pub(crate) fn side_len(block: &CellBlock, side: Side) -> usize {
    match side {
        Side::West | Side::East => block.ny,
        Side::South | Side::North => block.nx,
    }
}

/// Local cell of the block touching boundary face `l` of `side`.
pub(crate) fn side_cell(block: &CellBlock, side: Side, l: usize) -> (usize, usize) {
    match side {
        Side::West => (0, l),
        Side::East => (block.nx - 1, l),
        Side::South => (l, 0),
        Side::North => (l, block.ny - 1),
    }
}

/// Pressure and face velocities on a block. Velocities are per unit area in
/// the +x / +y orientation; x-faces are `i + (nx+1) j`, y-faces `i + nx j` in
/// block-local indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSolution {
    pub block: CellBlock,
    pub pressure: Vec<f64>,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
}

impl LocalSolution {
    #[inline]
    pub fn xface(&self, i: usize, j: usize) -> usize {
        i + (self.block.nx + 1) * j
    }

    #[inline]
    pub fn yface(&self, i: usize, j: usize) -> usize {
        i + self.block.nx * j
    }

    /// Outward normal velocity on face `l` of `side`.
    pub fn outflow(&self, side: Side, l: usize) -> f64 {
        let b = &self.block;
        match side {
            Side::West => -self.ux[self.xface(0, l)],
            Side::East => self.ux[self.xface(b.nx, l)],
            Side::South => -self.uy[self.yface(l, 0)],
            Side::North => self.uy[self.yface(l, b.ny)],
        }
    }

    pub fn side_outflow(&self, side: Side) -> Vec<f64> {
        (0..side_len(&self.block, side))
            .map(|l| self.outflow(side, l))
            .collect()
    }

    /// Face pressures on `side` from the inside cell pressure and the
    /// outward velocity, given the half-cell resistances `h⊥ / (2κ)`.
    pub fn side_trace(&self, side: Side, half: &[f64]) -> Vec<f64> {
        (0..side_len(&self.block, side))
            .map(|l| {
                let (i, j) = side_cell(&self.block, side, l);
                self.pressure[self.block.local(i, j)] - self.outflow(side, l) * half[l]
            })
            .collect()
    }

    /// Per-cell `outflow − Q`.
    pub fn conservation_residual(&self, hx: f64, hy: f64, sources: &[f64]) -> Vec<f64> {
        let b = &self.block;
        let mut r = Vec::with_capacity(b.n_cells());
        for j in 0..b.ny {
            for i in 0..b.nx {
                let out = hy * (self.ux[self.xface(i + 1, j)] - self.ux[self.xface(i, j)])
                    + hx * (self.uy[self.yface(i, j + 1)] - self.uy[self.yface(i, j)]);
                r.push(out - sources[b.local(i, j)]);
            }
        }
        r
    }

    /// Cancel a small conservation residual by adjusting interior face
    /// velocities along a serpentine path through the block; only the first
    /// cell of the path keeps the sum. Pressures are left alone: the point is
    /// to remove round-off that no pressure vector can, when a large
    /// transmissibility meets a large pressure level.
    pub fn route_residual(&mut self, hx: f64, hy: f64, residual: &[f64]) {
        let b = self.block;
        let path: Vec<(usize, usize)> = (0..b.ny)
            .flat_map(|j| {
                let row: Vec<(usize, usize)> = if j % 2 == 0 {
                    (0..b.nx).map(|i| (i, j)).collect()
                } else {
                    (0..b.nx).rev().map(|i| (i, j)).collect()
                };
                row
            })
            .collect();
        let mut carry = 0.0;
        for k in (1..path.len()).rev() {
            let (i, j) = path[k];
            let (pi, pj) = path[k - 1];
            // Net outflow of cell k still to be removed, sent to cell k − 1.
            carry += residual[b.local(i, j)];
            if pj == j {
                if pi + 1 == i {
                    let f = self.xface(i, j);
                    self.ux[f] += carry / hy;
                } else {
                    let f = self.xface(pi, j);
                    self.ux[f] -= carry / hy;
                }
            } else {
                let f = self.yface(i, j);
                self.uy[f] += carry / hx;
            }
        }
    }

    /// `Σ c_k s_k` for solutions on the same block.
    pub fn accumulate(&mut self, c: f64, other: &LocalSolution) {
        debug_assert_eq!(self.block, other.block);
        for (a, b) in self.pressure.iter_mut().zip(&other.pressure) {
            *a += c * b;
        }
        for (a, b) in self.ux.iter_mut().zip(&other.ux) {
            *a += c * b;
        }
        for (a, b) in self.uy.iter_mut().zip(&other.uy) {
            *a += c * b;
        }
    }
}

/// Factorized two-point flux operator on a rectangular block of fine cells.
#[derive(Debug)]
pub struct BlockOperator {
    block: CellBlock,
    hx: f64,
    hy: f64,
    kappa: Vec<f64>,
    kinds: [Vec<FaceKind>; 4],
    factor: SpdFactor,
    /// Cell held at zero pressure in a pure Neumann block.
    pin: Option<usize>,
    /// Per-cell Robin diagonal when the block has no Dirichlet face. The
    /// constant mode is then only weakly anchored and gets deflated.
    floating: Option<Vec<f64>>,
}

impl BlockOperator {
    /// Assemble and factorize. `kappa` is indexed by global cell. A block
    /// without Dirichlet or Robin faces is pure Neumann and gets its first
    /// cell of largest permeability pinned to zero pressure, which keeps
    /// pressures small where transmissibilities are large.
    pub fn new(
        grid: &FineGrid,
        block: CellBlock,
        kappa: &[f64],
        kinds: [Vec<FaceKind>; 4],
    ) -> Result<Self> {
        for side in Side::ALL {
            if kinds[side.index()].len() != side_len(&block, side) {
                return Err(Error::Contract(format!(
                    "{side:?} side has {} face kinds, block side has {} faces",
                    kinds[side.index()].len(),
                    side_len(&block, side)
                )));
            }
            if let Some(FaceKind::Robin(beta)) = kinds[side.index()]
                .iter()
                .find(|k| matches!(k, FaceKind::Robin(b) if !(*b > 0.0 && b.is_finite())))
            {
                return Err(Error::Contract(format!(
                    "Robin parameter must be positive, got {beta}"
                )));
            }
        }
        let (hx, hy) = (grid.hx(), grid.hy());
        let mut local_kappa = Vec::with_capacity(block.n_cells());
        for j in 0..block.ny {
            for i in 0..block.nx {
                local_kappa.push(kappa[block.global(grid, i, j)]);
            }
        }
        let n = block.n_cells();
        let mut a = TripletBuilder::with_capacity(n, 5 * n);
        // Interior faces.
        for j in 0..block.ny {
            for i in 0..block.nx {
                let c = block.local(i, j);
                if i + 1 < block.nx {
                    let d = block.local(i + 1, j);
                    let t = hy / (hx / (2.0 * local_kappa[c]) + hx / (2.0 * local_kappa[d]));
                    a.add(c, c, t);
                    a.add(d, d, t);
                    a.add(c, d, -t);
                    a.add(d, c, -t);
                }
                if j + 1 < block.ny {
                    let d = block.local(i, j + 1);
                    let t = hx / (hy / (2.0 * local_kappa[c]) + hy / (2.0 * local_kappa[d]));
                    a.add(c, c, t);
                    a.add(d, d, t);
                    a.add(c, d, -t);
                    a.add(d, c, -t);
                }
            }
        }
        let mut anchored = false;
        let mut dirichlet = false;
        let mut robin_weight = vec![0.0; n];
        for side in Side::ALL {
            let (area, h) = side_geometry(hx, hy, side);
            for (l, kind) in kinds[side.index()].iter().enumerate() {
                let (i, j) = side_cell(&block, side, l);
                let c = block.local(i, j);
                let half = h / (2.0 * local_kappa[c]);
                match kind {
                    FaceKind::Dirichlet => {
                        a.add(c, c, area / half);
                        anchored = true;
                        dirichlet = true;
                    }
                    FaceKind::Robin(beta) => {
                        a.add(c, c, area / (half + beta));
                        robin_weight[c] += area / (half + beta);
                        anchored = true;
                    }
                    FaceKind::Neumann => {}
                }
            }
        }
        let pin = (!anchored).then(|| {
            local_kappa.iter().enumerate().fold(
                0,
                |best, (c, k)| if *k > local_kappa[best] { c } else { best },
            )
        });
        if let Some(c) = pin {
            a.pin(c);
        }
        let factor = SpdFactor::new(&a)?;
        Ok(Self {
            block,
            hx,
            hy,
            kappa: local_kappa,
            kinds,
            factor,
            pin,
            floating: (anchored && !dirichlet).then_some(robin_weight),
        })
    }

    pub fn block(&self) -> &CellBlock {
        &self.block
    }

    pub fn kinds(&self) -> &[Vec<FaceKind>; 4] {
        &self.kinds
    }

    pub fn is_pinned(&self) -> bool {
        self.pin.is_some()
    }

    fn rhs_vector(&self, rhs: &BlockRhs) -> Result<Vec<f64>> {
        let b = &self.block;
        if rhs.sources.len() != b.n_cells()
            || Side::ALL
                .iter()
                .any(|s| rhs.side_values[s.index()].len() != side_len(b, *s))
        {
            return Err(Error::Contract(
                "block right-hand side has wrong shape".into(),
            ));
        }
        let mut f = rhs.sources.clone();
        for side in Side::ALL {
            let (area, h) = side_geometry(self.hx, self.hy, side);
            for (l, kind) in self.kinds[side.index()].iter().enumerate() {
                let (i, j) = side_cell(b, side, l);
                let c = b.local(i, j);
                let v = rhs.side_values[side.index()][l];
                let half = h / (2.0 * self.kappa[c]);
                match kind {
                    FaceKind::Dirichlet => f[c] += area * v / half,
                    FaceKind::Robin(beta) => f[c] += area * v / (half + beta),
                    FaceKind::Neumann => f[c] -= area * v,
                }
            }
        }
        if let Some(c) = self.pin {
            f[c] = 0.0;
        }
        Ok(f)
    }

    /// Fluxes from a pressure that is `shift` below the true one.
    fn recover(&self, mut pressure: Vec<f64>, rhs: &BlockRhs, shift: f64) -> LocalSolution {
        let b = self.block;
        let (hx, hy) = (self.hx, self.hy);
        let k = &self.kappa;
        let mut ux = vec![0.0; (b.nx + 1) * b.ny];
        let mut uy = vec![0.0; b.nx * (b.ny + 1)];
        for j in 0..b.ny {
            for i in 1..b.nx {
                let (c, d) = (b.local(i - 1, j), b.local(i, j));
                let t = 1.0 / (hx / (2.0 * k[c]) + hx / (2.0 * k[d]));
                ux[i + (b.nx + 1) * j] = t * (pressure[c] - pressure[d]);
            }
        }
        for j in 1..b.ny {
            for i in 0..b.nx {
                let (c, d) = (b.local(i, j - 1), b.local(i, j));
                let t = 1.0 / (hy / (2.0 * k[c]) + hy / (2.0 * k[d]));
                uy[i + b.nx * j] = t * (pressure[c] - pressure[d]);
            }
        }
        for side in Side::ALL {
            let (_, h) = side_geometry(hx, hy, side);
            for (l, kind) in self.kinds[side.index()].iter().enumerate() {
                let (i, j) = side_cell(&b, side, l);
                let c = b.local(i, j);
                let v = rhs.side_values[side.index()][l];
                let half = h / (2.0 * k[c]);
                let out = match kind {
                    FaceKind::Dirichlet => (pressure[c] - v) / half,
                    FaceKind::Robin(beta) => (pressure[c] - (v - shift)) / (half + beta),
                    FaceKind::Neumann => v,
                };
                match side {
                    Side::West => ux[(b.nx + 1) * l] = -out,
                    Side::East => ux[b.nx + (b.nx + 1) * l] = out,
                    Side::South => uy[l] = -out,
                    Side::North => uy[l + b.nx * b.ny] = out,
                }
            }
        }
        if shift != 0.0 {
            pressure.iter_mut().for_each(|p| *p += shift);
        }
        LocalSolution {
            block: b,
            pressure,
            ux,
            uy,
        }
    }

    pub fn solve(&self, rhs: &BlockRhs) -> Result<LocalSolution> {
        Ok(self.solve_many(std::slice::from_ref(rhs))?.pop().unwrap())
    }

    /// Solve for several right-hand sides with the one factorization.
    pub fn solve_many(&self, rhs: &[BlockRhs]) -> Result<Vec<LocalSolution>> {
        let mut vectors = rhs
            .iter()
            .map(|r| self.rhs_vector(r))
            .collect::<Result<Vec<_>>>()?;
        // With only Robin anchoring the pressure level is O(beta) and the
        // interior fluxes would be differences of large numbers. Solve for
        // the deviation from the level instead.
        let mut shifts = vec![0.0; rhs.len()];
        if let Some(w) = &self.floating {
            let total: f64 = w.iter().sum();
            for (f, shift) in vectors.iter_mut().zip(&mut shifts) {
                *shift = f.iter().sum::<f64>() / total;
                for (fi, wi) in f.iter_mut().zip(w) {
                    *fi -= *shift * wi;
                }
            }
        }
        let mut pressures = self.factor.solve_many(&vectors)?;
        // Refine against the flux-form residual: with strong contrasts the
        // matrix residual hides cancellation in the recovered fluxes.
        for _ in 0..REFINE_STEPS {
            let mut todo = Vec::new();
            let mut corrections = Vec::new();
            for (k, ((p, r), &s)) in pressures.iter().zip(rhs).zip(&shifts).enumerate() {
                let sol = self.recover(p.clone(), r, s);
                let mut res = sol.conservation_residual(self.hx, self.hy, &r.sources);
                if let Some(c) = self.pin {
                    res[c] = 0.0;
                }
                let scale = flux_scale(&sol, self.hx, self.hy, &r.sources);
                if res.iter().any(|v| v.abs() > REFINE_BELOW * scale) {
                    res.iter_mut().for_each(|v| *v = -*v);
                    todo.push(k);
                    corrections.push(res);
                }
            }
            if todo.is_empty() {
                break;
            }
            for (k, d) in todo.into_iter().zip(self.factor.solve_many(&corrections)?) {
                pressures[k].iter_mut().zip(d).for_each(|(p, d)| *p += d);
            }
        }
        Ok(pressures
            .into_iter()
            .zip(rhs)
            .zip(shifts)
            .map(|((p, r), s)| {
                let mut sol = self.recover(p, r, s);
                let res = sol.conservation_residual(self.hx, self.hy, &r.sources);
                let scale = flux_scale(&sol, self.hx, self.hy, &r.sources);
                if res.iter().any(|v| v.abs() > REFINE_BELOW * scale) {
                    sol.route_residual(self.hx, self.hy, &res);
                }
                sol
            })
            .collect())
    }

    /// Face pressure on a Robin or Dirichlet boundary face reconstructed from
    /// the cell pressure and the outward velocity.
    pub fn trace_pressure(&self, sol: &LocalSolution, side: Side, l: usize) -> f64 {
        let (_, h) = side_geometry(self.hx, self.hy, side);
        let (i, j) = side_cell(&self.block, side, l);
        let c = self.block.local(i, j);
        sol.pressure[c] - sol.outflow(side, l) * h / (2.0 * self.kappa[c])
    }
}

const REFINE_STEPS: usize = 2;
const REFINE_BELOW: f64 = 1e-14;

fn flux_scale(sol: &LocalSolution, hx: f64, hy: f64, sources: &[f64]) -> f64 {
    let ux = sol.ux.iter().fold(0.0f64, |m, v| m.max(hy * v.abs()));
    let uy = sol.uy.iter().fold(0.0f64, |m, v| m.max(hx * v.abs()));
    sources.iter().fold(ux.max(uy), |m, q| m.max(q.abs()))
}

/// Face area and cell size normal to the faces of `side`.
fn side_geometry(hx: f64, hy: f64, side: Side) -> (f64, f64) {
    match side {
        Side::West | Side::East => (hy, hx),
        Side::South | Side::North => (hx, hy),
    }
}
