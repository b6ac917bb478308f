//! Periodic Cartesian grid and nodal scalar fields.
//!
//! The computational domain is the unit cell `D = [0,1]²` discretised into
//! `n × n` square elements of width `dx = 1/n`. Nodes coincide with element
//! corners and wrap periodically, so there are exactly `n²` nodes and
//! `Vol(D) = 1` holds identically.

use crate::{Error, Result};

/// Uniform periodic discretisation of the unit cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodicGrid {
    n: usize,
}

impl PeriodicGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::Parameter(format!(
                "grid needs at least 4 nodes per axis, got {n}"
            )));
        }
        Ok(Self { n })
    }

    /// Elements (and nodes) per axis.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Element width; `dx * n == 1` exactly up to division rounding.
    #[inline]
    pub fn dx(&self) -> f64 {
        1.0 / self.n as f64
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn num_elements(&self) -> usize {
        self.n * self.n
    }

    /// Flat node index with periodic wrap on both axes.
    #[inline]
    pub fn node(&self, i: i64, j: i64) -> usize {
        let n = self.n as i64;
        let i = i.rem_euclid(n) as usize;
        let j = j.rem_euclid(n) as usize;
        j * self.n + i
    }

    /// Inverse of [`PeriodicGrid::node`] for indices already in range.
    #[inline]
    pub fn node_ij(&self, k: usize) -> (usize, usize) {
        (k % self.n, k / self.n)
    }

    /// Coordinates of node `(i, j)`.
    #[inline]
    pub fn node_pos(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.dx(), j as f64 * self.dx())
    }

    /// The four corner nodes of element `(ei, ej)` in counterclockwise order
    /// starting at the lower-left corner.
    #[inline]
    pub fn element_nodes(&self, ei: usize, ej: usize) -> [usize; 4] {
        let (ei, ej) = (ei as i64, ej as i64);
        [
            self.node(ei, ej),
            self.node(ei + 1, ej),
            self.node(ei + 1, ej + 1),
            self.node(ei, ej + 1),
        ]
    }

    #[inline]
    pub fn element_ij(&self, e: usize) -> (usize, usize) {
        (e % self.n, e / self.n)
    }

    /// Shortest signed periodic distance between two coordinates in [0,1).
    #[inline]
    pub fn periodic_delta(a: f64, b: f64) -> f64 {
        let mut d = a - b;
        if d > 0.5 {
            d -= 1.0;
        } else if d < -0.5 {
            d += 1.0;
        }
        d
    }
}

/// One real value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl NodalField {
    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.num_nodes()],
        }
    }

    pub fn constant(grid: PeriodicGrid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.num_nodes()],
        }
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.num_nodes());
        for j in 0..grid.n() {
            for i in 0..grid.n() {
                let (x, y) = grid.node_pos(i, j);
                values.push(f(x, y));
            }
        }
        Self { grid, values }
    }

    pub fn from_values(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} nodal values, got {}",
                grid.num_nodes(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    #[inline]
    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, i: i64, j: i64) -> f64 {
        self.values[self.grid.node(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: i64, j: i64, v: f64) {
        let k = self.grid.node(i, j);
        self.values[k] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &NodalField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Errors with the index of the first non-finite entry.
    pub fn check_finite(&self, context: &str) -> Result<()> {
        for (k, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                let (i, j) = self.grid.node_ij(k);
                return Err(Error::Parameter(format!(
                    "{context}: non-finite value {v} at node ({i}, {j})"
                )));
            }
        }
        Ok(())
    }

    /// Central-difference gradient at node `(i, j)` with periodic wrap.
    #[inline]
    pub fn central_gradient(&self, i: i64, j: i64) -> (f64, f64) {
        let h2 = 2.0 * self.grid.dx();
        let gx = (self.get(i + 1, j) - self.get(i - 1, j)) / h2;
        let gy = (self.get(i, j + 1) - self.get(i, j - 1)) / h2;
        (gx, gy)
    }

    /// `|∇φ|` by central differences at every node.
    pub fn gradient_norm_central(&self) -> NodalField {
        let mut out = NodalField::zeros(self.grid);
        for j in 0..self.grid.n() as i64 {
            for i in 0..self.grid.n() as i64 {
                let (gx, gy) = self.central_gradient(i, j);
                out.set(i, j, gx.hypot(gy));
            }
        }
        out
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &NodalField) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
    }

    pub fn shift(&mut self, c: f64) {
        for v in &mut self.values {
            *v += c;
        }
    }
}

/// `∫_D a b dΩ` by element quadrature of the bilinear interpolants.
///
/// This is exactly `aᵀ M b` for the consistent mass matrix used by the
/// extension operator, so `inner_product_l2(1, 1) = Vol(D) = 1`.
pub fn inner_product_l2(a: &NodalField, b: &NodalField) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::ShapeMismatch(
            "L2 inner product of fields on different grids".into(),
        ));
    }
    let grid = a.grid();
    let n = grid.n();
    // Consistent mass matrix of a bilinear square element, times 36/dx².
    const M: [[f64; 4]; 4] = [
        [4.0, 2.0, 1.0, 2.0],
        [2.0, 4.0, 2.0, 1.0],
        [1.0, 2.0, 4.0, 2.0],
        [2.0, 1.0, 2.0, 4.0],
    ];
    let w = grid.dx() * grid.dx() / 36.0;
    let mut total = 0.0;
    for ej in 0..n {
        for ei in 0..n {
            let nodes = grid.element_nodes(ei, ej);
            let av: [f64; 4] = std::array::from_fn(|k| a.values()[nodes[k]]);
            let bv: [f64; 4] = std::array::from_fn(|k| b.values()[nodes[k]]);
            let mut acc = 0.0;
            for p in 0..4 {
                for q in 0..4 {
                    acc += av[p] * M[p][q] * bv[q];
                }
            }
            total += w * acc;
        }
    }
    Ok(total)
}
