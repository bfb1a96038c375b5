//! Thin wrappers over faer's sparse direct solvers.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Triplet accumulator for a square sparse matrix. Duplicate entries are summed.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<Triplet<usize, usize, f64>>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Self {
            n,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n);
        self.entries.push(Triplet::new(row, col, value));
    }

    /// Drop every entry in row `r` and column `r` and put `1` on the diagonal.
    pub fn pin(&mut self, r: usize) {
        self.entries.retain(|t| t.row != r && t.col != r);
        self.entries.push(Triplet::new(r, r, 1.0));
    }

    /// Replace row `r` by the given entries.
    pub fn replace_row(&mut self, r: usize, row: impl IntoIterator<Item = (usize, f64)>) {
        self.entries.retain(|t| t.row != r);
        for (c, v) in row {
            self.entries.push(Triplet::new(r, c, v));
        }
    }

    fn build(&self) -> Result<SparseColMat<usize, f64>> {
        SparseColMat::try_new_from_triplets(self.n, self.n, &self.entries)
            .map_err(|e| Error::Solver(format!("cannot assemble sparse matrix: {e:?}")))
    }

    /// Dense copy, mostly for tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.n];
        for t in &self.entries {
            a[t.row][t.col] += t.val;
        }
        a
    }
}

fn to_mat(n: usize, rhs: &[Vec<f64>]) -> Mat<f64> {
    Mat::from_fn(n, rhs.len(), |i, j| rhs[j][i])
}

fn from_mat(x: &Mat<f64>) -> Result<Vec<Vec<f64>>> {
    let out: Vec<Vec<f64>> = (0..x.ncols())
        .map(|j| (0..x.nrows()).map(|i| x[(i, j)]).collect())
        .collect();
    if out.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Solver(
            "direct solve produced non-finite values".into(),
        ));
    }
    Ok(out)
}

/// Sparse Cholesky factorization of a symmetric positive definite matrix.
pub struct SpdFactor {
    n: usize,
    llt: Llt<usize, f64>,
}

impl std::fmt::Debug for SpdFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpdFactor").field("n", &self.n).finish()
    }
}

impl SpdFactor {
    pub fn new(a: &TripletBuilder) -> Result<Self> {
        let m = a.build()?;
        let llt = m
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Solver(format!("Cholesky factorization failed: {e:?}")))?;
        Ok(Self { n: a.n, llt })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve_many(&[rhs.to_vec()])?.pop().unwrap())
    }

    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if rhs.is_empty() {
            return Ok(Vec::new());
        }
        let b = to_mat(self.n, rhs);
        from_mat(&self.llt.solve(&b))
    }
}

/// Row- and column-equilibrated sparse LU of a general square matrix.
pub struct GeneralFactor {
    n: usize,
    entries: Vec<Triplet<usize, usize, f64>>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    lu: Lu<usize, f64>,
}

impl std::fmt::Debug for GeneralFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeneralFactor").field("n", &self.n).finish()
    }
}

impl GeneralFactor {
    pub fn new(a: &TripletBuilder) -> Result<Self> {
        let n = a.n;
        let mut row_scale = vec![0.0f64; n];
        for t in &a.entries {
            row_scale[t.row] = row_scale[t.row].max(t.val.abs());
        }
        if let Some(r) = row_scale.iter().position(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(Error::Solver(format!(
                "row {r} of the system is empty or non-finite"
            )));
        }
        let mut col_scale = vec![0.0f64; n];
        for t in &a.entries {
            col_scale[t.col] = col_scale[t.col].max((t.val / row_scale[t.row]).abs());
        }
        if let Some(c) = col_scale.iter().position(|&m| !(m > 0.0)) {
            return Err(Error::Solver(format!("column {c} of the system is empty")));
        }
        let scaled: Vec<Triplet<usize, usize, f64>> = a
            .entries
            .iter()
            .map(|t| Triplet::new(t.row, t.col, t.val / (row_scale[t.row] * col_scale[t.col])))
            .collect();
        let m = SparseColMat::try_new_from_triplets(n, n, &scaled)
            .map_err(|e| Error::Solver(format!("cannot assemble sparse matrix: {e:?}")))?;
        let lu = m
            .sp_lu()
            .map_err(|e| Error::Solver(format!("LU factorization failed: {e:?}")))?;
        Ok(Self {
            n,
            entries: a.entries.clone(),
            row_scale,
            col_scale,
            lu,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn solve_scaled(&self, r: &[f64]) -> Result<Vec<f64>> {
        let b = Mat::from_fn(self.n, 1, |i, _| r[i] / self.row_scale[i]);
        let y = from_mat(&self.lu.solve(&b))?.pop().unwrap();
        Ok(y.iter().zip(&self.col_scale).map(|(y, c)| y / c).collect())
    }

    /// `rhs − A x`.
    pub fn residual(&self, x: &[f64], rhs: &[f64]) -> Vec<f64> {
        let mut res = rhs.to_vec();
        for t in &self.entries {
            res[t.row] -= t.val * x[t.col];
        }
        res
    }

    /// Solve with one step of iterative refinement, then check the residual
    /// to catch singular systems that LU let through.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if rhs.len() != n {
            return Err(Error::Contract(format!(
                "right-hand side has {} entries, matrix is {n}x{n}",
                rhs.len()
            )));
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut x = self.solve_scaled(rhs)?;
        let d = self.solve_scaled(&self.residual(&x, rhs))?;
        x.iter_mut().zip(&d).for_each(|(x, d)| *x += d);
        let rel = self
            .residual(&x, rhs)
            .iter()
            .zip(&self.row_scale)
            .map(|(r, s)| (r / s).abs())
            .fold(0.0, f64::max);
        let xmax = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        if rel > 1e-6 * xmax {
            return Err(Error::Solver(format!(
                "interface system is singular or ill-conditioned (scaled residual {rel:.3e})"
            )));
        }
        Ok(x)
    }
}

/// Solve a general sparse system with equilibration and partial-pivoting LU.
pub fn solve_general(a: &TripletBuilder, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != a.n {
        return Err(Error::Contract(format!(
            "right-hand side has {} entries, matrix is {}x{}",
            rhs.len(),
            a.n,
            a.n
        )));
    }
    if a.n == 0 {
        return Ok(Vec::new());
    }
    GeneralFactor::new(a)?.solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> TripletBuilder {
        let mut a = TripletBuilder::new(n);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
                a.add(i - 1, i, -1.0);
            }
        }
        a
    }

    #[test]
    fn cholesky_solves_laplacian() {
        let n = 50;
        let a = laplacian_1d(n);
        let f = SpdFactor::new(&a).unwrap();
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let dense = a.to_dense();
        let b: Vec<f64> = dense
            .iter()
            .map(|row| row.iter().zip(&x_true).map(|(a, x)| a * x).sum())
            .collect();
        let x = f.solve(&b).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn duplicates_are_summed() {
        let mut a = TripletBuilder::new(2);
        a.add(0, 0, 1.0);
        a.add(0, 0, 1.0);
        a.add(1, 1, 4.0);
        let x = solve_general(&a, &[2.0, 8.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
    }

    #[test]
    fn general_solve_with_bad_scaling() {
        let mut a = TripletBuilder::new(3);
        a.add(0, 0, 1e12);
        a.add(0, 1, 2e12);
        a.add(1, 1, 1e-9);
        a.add(1, 2, 1e-9);
        a.add(2, 0, 1.0);
        a.add(2, 2, 3.0);
        let x_true = [1.0, -2.0, 0.5];
        let b = [
            1e12 * 1.0 + 2e12 * -2.0,
            1e-9 * -2.0 + 1e-9 * 0.5,
            1.0 + 1.5,
        ];
        let x = solve_general(&a, &b).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_system_reported() {
        let mut a = TripletBuilder::new(2);
        a.add(0, 0, 1.0);
        a.add(0, 1, 1.0);
        a.add(1, 0, 1.0);
        a.add(1, 1, 1.0);
        assert!(matches!(
            solve_general(&a, &[1.0, 2.0]),
            Err(Error::Solver(_))
        ));
    }

    #[test]
    fn pin_and_replace_row() {
        let mut a = laplacian_1d(3);
        a.pin(0);
        let d = a.to_dense();
        assert_eq!(d[0], vec![1.0, 0.0, 0.0]);
        assert_eq!(d[1][0], 0.0);
        a.replace_row(2, [(0, 1.0), (1, 1.0), (2, 1.0)]);
        assert_eq!(a.to_dense()[2], vec![1.0, 1.0, 1.0]);
    }
}
