//! Fine Cartesian grid, uniform subdomain decomposition and the skeleton of
//! interfaces between subdomains.
//!
//! Cells are indexed row-major with x fastest. Faces normal to x ("x-faces")
//! are indexed `i + (nx + 1) * j` for `i in 0..=nx`; faces normal to y
//! ("y-faces") are indexed `i + nx * j` for `j in 0..=ny`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FineGrid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    hx: f64,
    hy: f64,
}

impl FineGrid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Config(format!(
                "grid needs at least one cell per axis, got {nx}x{ny}"
            )));
        }
        if !(lx > 0.0 && ly > 0.0) || !lx.is_finite() || !ly.is_finite() {
            return Err(Error::Config(format!(
                "domain extents must be positive, got {lx}x{ly}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            hx: lx / nx as f64,
            hy: ly / ny as f64,
        })
    }

    /// Unit square with `n x n` cells.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hy(&self) -> f64 {
        self.hy
    }

    /// Fine-scale mesh size `h = max(hx, hy)`.
    pub fn h(&self) -> f64 {
        self.hx.max(self.hy)
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_volume(&self) -> f64 {
        self.hx * self.hy
    }

    pub fn domain_volume(&self) -> f64 {
        self.lx * self.ly
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        i + self.nx * j
    }

    #[inline]
    pub fn cell_coords(&self, c: usize) -> (usize, usize) {
        (c % self.nx, c / self.nx)
    }

    pub fn cell_center(&self, c: usize) -> (f64, f64) {
        let (i, j) = self.cell_coords(c);
        ((i as f64 + 0.5) * self.hx, (j as f64 + 0.5) * self.hy)
    }

    pub fn n_xfaces(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn n_yfaces(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    #[inline]
    pub fn xface(&self, i: usize, j: usize) -> usize {
        i + (self.nx + 1) * j
    }

    #[inline]
    pub fn yface(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }
}

/// Axis-aligned rectangular block of fine cells `[i0, i0 + nx) x [j0, j0 + ny)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellBlock {
    pub i0: usize,
    pub j0: usize,
    pub nx: usize,
    pub ny: usize,
}

impl CellBlock {
    pub fn whole(grid: &FineGrid) -> Self {
        Self {
            i0: 0,
            j0: 0,
            nx: grid.nx(),
            ny: grid.ny(),
        }
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn local(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    /// Global cell index of local cell `(i, j)`.
    #[inline]
    pub fn global(&self, grid: &FineGrid, i: usize, j: usize) -> usize {
        grid.cell(self.i0 + i, self.j0 + j)
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i >= self.i0 && i < self.i0 + self.nx && j >= self.j0 && j < self.j0 + self.ny
    }
}

/// The four sides of a rectangular block, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    West,
    East,
    South,
    North,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::West, Side::East, Side::South, Side::North];

    pub fn index(self) -> usize {
        match self {
            Side::West => 0,
            Side::East => 1,
            Side::South => 2,
            Side::North => 3,
        }
    }

    /// Sign of the outward normal relative to the +x / +y face orientation.
    pub fn outward_sign(self) -> f64 {
        match self {
            Side::West | Side::South => -1.0,
            Side::East | Side::North => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Normal along +x; edges are x-faces stacked in y.
    Vertical,
    /// Normal along +y; edges are y-faces stacked in x.
    Horizontal,
}

/// What lies beyond one side of a subdomain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SideKind {
    Boundary,
    /// Interface `id`; `sign` is `ň·ň^i` for this subdomain.
    Interface {
        id: usize,
        sign: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subdomain {
    pub index: usize,
    pub ix: usize,
    pub iy: usize,
    pub cells: CellBlock,
    /// Indexed by [`Side::index`].
    pub sides: [SideKind; 4],
}

impl Subdomain {
    pub fn interfaces(&self) -> impl Iterator<Item = (Side, usize, f64)> + '_ {
        Side::ALL
            .into_iter()
            .filter_map(|side| match self.sides[side.index()] {
                SideKind::Interface { id, sign } => Some((side, id, sign)),
                SideKind::Boundary => None,
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub mx: usize,
    pub my: usize,
    /// Cells per subdomain along x and y.
    pub sub_nx: usize,
    pub sub_ny: usize,
    /// Characteristic subdomain size `H`.
    pub coarse_size: f64,
    pub subdomains: Vec<Subdomain>,
}

impl Decomposition {
    pub fn n_subdomains(&self) -> usize {
        self.subdomains.len()
    }

    pub fn subdomain_of_cell(&self, grid: &FineGrid, c: usize) -> usize {
        let (i, j) = grid.cell_coords(c);
        i / self.sub_nx + self.mx * (j / self.sub_ny)
    }
}

/// A maximal straight segment shared by two adjacent subdomains.
#[derive(Debug, Clone, PartialEq)]
pub struct Interface {
    pub id: usize,
    pub orientation: Orientation,
    /// Subdomain with the smaller index; the fixed normal points out of it.
    pub lo: usize,
    pub hi: usize,
    /// Face line: x-face column for vertical interfaces, y-face row for horizontal ones.
    pub line: usize,
    /// First cell index along the interface (j for vertical, i for horizontal).
    pub start: usize,
    /// Number of fine edges `m_k`.
    pub len: usize,
    /// Length of one fine edge.
    pub edge_length: f64,
}

impl Interface {
    /// Fixed unit normal `ň`.
    pub fn normal(&self) -> (f64, f64) {
        match self.orientation {
            Orientation::Vertical => (1.0, 0.0),
            Orientation::Horizontal => (0.0, 1.0),
        }
    }

    /// `ň·ň^i` for subdomain `sub`, or `None` if it does not touch the interface.
    pub fn sign_for(&self, sub: usize) -> Option<f64> {
        if sub == self.lo {
            Some(1.0)
        } else if sub == self.hi {
            Some(-1.0)
        } else {
            None
        }
    }

    /// Cells on the low (`lo`) and high (`hi`) side of edge `l`.
    pub fn edge_cells(&self, grid: &FineGrid, l: usize) -> (usize, usize) {
        match self.orientation {
            Orientation::Vertical => {
                let j = self.start + l;
                (grid.cell(self.line - 1, j), grid.cell(self.line, j))
            }
            Orientation::Horizontal => {
                let i = self.start + l;
                (grid.cell(i, self.line - 1), grid.cell(i, self.line))
            }
        }
    }

    /// Global face index of edge `l` (an x-face or a y-face depending on orientation).
    pub fn edge_face(&self, grid: &FineGrid, l: usize) -> usize {
        match self.orientation {
            Orientation::Vertical => grid.xface(self.line, self.start + l),
            Orientation::Horizontal => grid.yface(self.start + l, self.line),
        }
    }

    /// Midpoint of edge `l` in interface-local coordinates `x̂ ∈ [0, 1]`.
    pub fn local_coordinate(&self, l: usize) -> f64 {
        (l as f64 + 0.5) / self.len as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub interfaces: Vec<Interface>,
}

impl Skeleton {
    pub fn n_interfaces(&self) -> usize {
        self.interfaces.len()
    }

    pub fn n_edges(&self) -> usize {
        self.interfaces.iter().map(|f| f.len).sum()
    }
}

pub fn build_grid(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<FineGrid> {
    FineGrid::new(nx, ny, lx, ly)
}

/// Split the grid into `mx x my` equal rectangular subdomains and build the skeleton.
///
/// Subdomain `(ix, iy)` has index `ix + mx * iy`. Vertical interfaces are
/// numbered first (row by row), then horizontal ones.
pub fn build_decomposition(
    grid: &FineGrid,
    mx: usize,
    my: usize,
) -> Result<(Decomposition, Skeleton)> {
    if mx == 0 || my == 0 {
        return Err(Error::Config(format!(
            "decomposition needs at least one subdomain per axis, got {mx}x{my}"
        )));
    }
    if grid.nx() % mx != 0 || grid.ny() % my != 0 {
        return Err(Error::Config(format!(
            "{}x{} grid cannot be split evenly into {mx}x{my} subdomains",
            grid.nx(),
            grid.ny()
        )));
    }
    let sub_nx = grid.nx() / mx;
    let sub_ny = grid.ny() / my;
    let coarse_size = (grid.lx() / mx as f64).max(grid.ly() / my as f64);

    let mut interfaces = Vec::new();
    for iy in 0..my {
        for ix in 0..mx - 1 {
            interfaces.push(Interface {
                id: interfaces.len(),
                orientation: Orientation::Vertical,
                lo: ix + mx * iy,
                hi: ix + 1 + mx * iy,
                line: (ix + 1) * sub_nx,
                start: iy * sub_ny,
                len: sub_ny,
                edge_length: grid.hy(),
            });
        }
    }
    for iy in 0..my - 1 {
        for ix in 0..mx {
            interfaces.push(Interface {
                id: interfaces.len(),
                orientation: Orientation::Horizontal,
                lo: ix + mx * iy,
                hi: ix + mx * (iy + 1),
                line: (iy + 1) * sub_ny,
                start: ix * sub_nx,
                len: sub_nx,
                edge_length: grid.hx(),
            });
        }
    }

    let mut subdomains: Vec<Subdomain> = (0..mx * my)
        .map(|index| {
            let (ix, iy) = (index % mx, index / mx);
            Subdomain {
                index,
                ix,
                iy,
                cells: CellBlock {
                    i0: ix * sub_nx,
                    j0: iy * sub_ny,
                    nx: sub_nx,
                    ny: sub_ny,
                },
                sides: [SideKind::Boundary; 4],
            }
        })
        .collect();
    for f in &interfaces {
        let (lo_side, hi_side) = match f.orientation {
            Orientation::Vertical => (Side::East, Side::West),
            Orientation::Horizontal => (Side::North, Side::South),
        };
        subdomains[f.lo].sides[lo_side.index()] = SideKind::Interface {
            id: f.id,
            sign: 1.0,
        };
        subdomains[f.hi].sides[hi_side.index()] = SideKind::Interface {
            id: f.id,
            sign: -1.0,
        };
    }

    Ok((
        Decomposition {
            mx,
            my,
            sub_nx,
            sub_ny,
            coarse_size,
            subdomains,
        },
        Skeleton { interfaces },
    ))
}

/// Grid, decomposition and skeleton bundled together.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretization {
    pub grid: FineGrid,
    pub decomposition: Decomposition,
    pub skeleton: Skeleton,
}

impl Discretization {
    pub fn new(grid: FineGrid, mx: usize, my: usize) -> Result<Self> {
        let (decomposition, skeleton) = build_decomposition(&grid, mx, my)?;
        Ok(Self {
            grid,
            decomposition,
            skeleton,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        let g = build_grid(160, 160, 1.0, 1.0).unwrap();
        assert_eq!(g.hx(), 1.0 / 160.0);
        assert_eq!(g.hy(), 1.0 / 160.0);
        let g = build_grid(1, 1, 1.0, 1.0).unwrap();
        assert_eq!((g.n_cells(), g.hx(), g.hy()), (1, 1.0, 1.0));
        let g = build_grid(100, 100, 1.0, 1.0).unwrap();
        assert!((g.hx() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn grid_rejects_bad_dimensions() {
        assert!(matches!(build_grid(0, 4, 1.0, 1.0), Err(Error::Config(_))));
        assert!(matches!(build_grid(4, 4, -1.0, 1.0), Err(Error::Config(_))));
        assert!(matches!(build_grid(4, 4, 1.0, 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn cell_centers_row_major() {
        let g = build_grid(4, 2, 2.0, 1.0).unwrap();
        assert_eq!(g.cell(1, 1), 5);
        assert_eq!(g.cell_center(5), (0.75, 0.75));
        assert_eq!(g.cell_coords(5), (1, 1));
    }

    /// Brute-force count of fine faces whose two cells sit in different subdomains.
    fn count_cross_faces(g: &FineGrid, d: &Decomposition) -> usize {
        let mut n = 0;
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let a = d.subdomain_of_cell(g, g.cell(i, j));
                if i + 1 < g.nx() && a != d.subdomain_of_cell(g, g.cell(i + 1, j)) {
                    n += 1;
                }
                if j + 1 < g.ny() && a != d.subdomain_of_cell(g, g.cell(i, j + 1)) {
                    n += 1;
                }
            }
        }
        n
    }

    fn count_adjacent_pairs(g: &FineGrid, d: &Decomposition) -> usize {
        let mut pairs = std::collections::BTreeSet::new();
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let a = d.subdomain_of_cell(g, g.cell(i, j));
                for (ii, jj) in [(i + 1, j), (i, j + 1)] {
                    if ii < g.nx() && jj < g.ny() {
                        let b = d.subdomain_of_cell(g, g.cell(ii, jj));
                        if a != b {
                            pairs.insert((a.min(b), a.max(b)));
                        }
                    }
                }
            }
        }
        pairs.len()
    }

    #[test]
    fn interface_count_matches_enumeration() {
        for (n, m) in [(8, 2), (12, 3), (12, 4), (6, 1), (10, 5)] {
            let g = FineGrid::unit_square(n).unwrap();
            let (d, s) = build_decomposition(&g, m, m).unwrap();
            assert_eq!(s.n_interfaces(), count_adjacent_pairs(&g, &d));
            assert_eq!(s.n_interfaces(), (m - 1) * m + (m - 1) * m);
        }
    }

    #[test]
    fn paper_decompositions() {
        let g = FineGrid::unit_square(160).unwrap();
        let (d, s) = build_decomposition(&g, 8, 8).unwrap();
        assert_eq!(d.n_subdomains(), 64);
        assert_eq!((d.sub_nx, d.sub_ny), (20, 20));
        assert_eq!(s.n_interfaces(), 112);
        assert_eq!(d.coarse_size, 0.125);

        let g = FineGrid::unit_square(100).unwrap();
        let (d, _) = build_decomposition(&g, 5, 5).unwrap();
        assert_eq!(d.n_subdomains(), 25);
        assert_eq!((d.sub_nx, d.sub_ny), (20, 20));
    }

    #[test]
    fn single_subdomain_has_empty_skeleton() {
        let g = FineGrid::unit_square(4).unwrap();
        let (d, s) = build_decomposition(&g, 1, 1).unwrap();
        assert_eq!(d.n_subdomains(), 1);
        assert_eq!(s.n_interfaces(), 0);
        assert!(d.subdomains[0]
            .sides
            .iter()
            .all(|k| *k == SideKind::Boundary));
    }

    #[test]
    fn non_divisible_partition_rejected() {
        let g = FineGrid::unit_square(10).unwrap();
        assert!(matches!(
            build_decomposition(&g, 3, 2),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn partition_and_skeleton_completeness() {
        let g = FineGrid::new(12, 8, 1.5, 1.0).unwrap();
        let (d, s) = build_decomposition(&g, 3, 2).unwrap();
        let mut owner = vec![0usize; g.n_cells()];
        for sub in &d.subdomains {
            for j in 0..sub.cells.ny {
                for i in 0..sub.cells.nx {
                    owner[sub.cells.global(&g, i, j)] += 1;
                }
            }
        }
        assert!(owner.iter().all(|&n| n == 1));
        assert_eq!(s.n_edges(), count_cross_faces(&g, &d));

        // Each cross face appears in exactly one interface.
        let mut seen = std::collections::BTreeSet::new();
        for f in &s.interfaces {
            for l in 0..f.len {
                let (a, b) = f.edge_cells(&g, l);
                assert_eq!(d.subdomain_of_cell(&g, a), f.lo);
                assert_eq!(d.subdomain_of_cell(&g, b), f.hi);
                assert!(seen.insert((f.orientation == Orientation::Vertical, f.edge_face(&g, l))));
            }
        }
    }

    #[test]
    fn orientation_consistency() {
        let g = FineGrid::unit_square(12).unwrap();
        let (d, s) = build_decomposition(&g, 3, 3).unwrap();
        for f in &s.interfaces {
            assert!(f.lo < f.hi);
            let signs: Vec<f64> = d
                .subdomains
                .iter()
                .filter_map(|sub| {
                    sub.interfaces()
                        .find(|(_, id, _)| *id == f.id)
                        .map(|(_, _, sign)| sign)
                })
                .collect();
            assert_eq!(signs.len(), 2);
            assert_eq!(signs.iter().filter(|&&x| x == 1.0).count(), 1);
            assert_eq!(signs.iter().filter(|&&x| x == -1.0).count(), 1);
            assert_eq!(f.sign_for(f.lo), Some(1.0));
            assert_eq!(f.sign_for(f.hi), Some(-1.0));
        }
    }
}
