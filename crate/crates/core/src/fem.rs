//! Shared bilinear quadrilateral element machinery.
//!
//! All integrals in the crate use the same discretisation: bilinear shape
//! functions on the square elements of a [`PeriodicGrid`] with 2×2 Gauss
//! quadrature, which is exact for products of bilinear functions.

use crate::grid::{NodalField, PeriodicGrid};

/// Per-element values at the four Gauss points.
pub type GaussField = Vec<[f64; 4]>;

/// Gauss abscissa on the reference element [-1,1]².
const G: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)

/// Gauss points in the same counterclockwise order as the element corners.
pub const GAUSS_XI: [(f64, f64); 4] = [(-G, -G), (G, -G), (G, G), (-G, G)];

/// Reference corner coordinates, counterclockwise from lower-left.
pub const CORNER_XI: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

/// Shape function values and physical gradients at the Gauss points of one
/// (any) element, plus the quadrature weight `jw = w |J| = dx²/4`.
#[derive(Debug, Clone)]
pub struct ElementBasis {
    /// `nval[g][a]` = N_a at Gauss point g.
    pub nval: [[f64; 4]; 4],
    /// `gx[g][a]`, `gy[g][a]` = ∂N_a/∂x, ∂N_a/∂y at Gauss point g.
    pub gx: [[f64; 4]; 4],
    pub gy: [[f64; 4]; 4],
    /// Quadrature weight times Jacobian determinant (uniform grid: constant).
    pub jw: f64,
    pub dx: f64,
}

impl ElementBasis {
    pub fn new(grid: PeriodicGrid) -> Self {
        let dx = grid.dx();
        let mut nval = [[0.0; 4]; 4];
        let mut gx = [[0.0; 4]; 4];
        let mut gy = [[0.0; 4]; 4];
        for (g, &(xi, et)) in GAUSS_XI.iter().enumerate() {
            for (a, &(xa, ya)) in CORNER_XI.iter().enumerate() {
                nval[g][a] = 0.25 * (1.0 + xi * xa) * (1.0 + et * ya);
                gx[g][a] = 0.25 * xa * (1.0 + et * ya) * 2.0 / dx;
                gy[g][a] = 0.25 * ya * (1.0 + xi * xa) * 2.0 / dx;
            }
        }
        Self {
            nval,
            gx,
            gy,
            jw: dx * dx / 4.0,
            dx,
        }
    }

    /// Strain-displacement matrix (engineering shear) at Gauss point `g` for
    /// the interleaved dof order `[u1_0, u2_0, ..., u1_3, u2_3]`.
    pub fn b_matrix(&self, g: usize) -> [[f64; 8]; 3] {
        let mut b = [[0.0; 8]; 3];
        for a in 0..4 {
            b[0][2 * a] = self.gx[g][a];
            b[1][2 * a + 1] = self.gy[g][a];
            b[2][2 * a] = self.gy[g][a];
            b[2][2 * a + 1] = self.gx[g][a];
        }
        b
    }
}

/// Interpolate a nodal field to the Gauss points of every element.
pub fn gauss_values(basis: &ElementBasis, field: &NodalField) -> GaussField {
    let grid = field.grid();
    let n = grid.n();
    let mut out = Vec::with_capacity(grid.num_elements());
    for ej in 0..n {
        for ei in 0..n {
            let nodes = grid.element_nodes(ei, ej);
            let v: [f64; 4] = std::array::from_fn(|a| field.values()[nodes[a]]);
            let mut vals = [0.0; 4];
            for g in 0..4 {
                let mut acc = 0.0;
                for a in 0..4 {
                    acc += basis.nval[g][a] * v[a];
                }
                vals[g] = acc;
            }
            out.push(vals);
        }
    }
    out
}

/// Gradient of the bilinear interpolant at the Gauss points of every element.
pub fn gauss_gradients(basis: &ElementBasis, field: &NodalField) -> Vec<[(f64, f64); 4]> {
    let grid = field.grid();
    let n = grid.n();
    let mut out = Vec::with_capacity(grid.num_elements());
    for ej in 0..n {
        for ei in 0..n {
            let nodes = grid.element_nodes(ei, ej);
            let v: [f64; 4] = std::array::from_fn(|a| field.values()[nodes[a]]);
            let mut vals = [(0.0, 0.0); 4];
            for g in 0..4 {
                let (mut ax, mut ay) = (0.0, 0.0);
                for a in 0..4 {
                    ax += basis.gx[g][a] * v[a];
                    ay += basis.gy[g][a] * v[a];
                }
                vals[g] = (ax, ay);
            }
            out.push(vals);
        }
    }
    out
}

/// Quadrature of a Gauss field over the whole cell.
pub fn integrate(basis: &ElementBasis, f: &GaussField) -> f64 {
    let mut acc = 0.0;
    for vals in f {
        acc += vals[0] + vals[1] + vals[2] + vals[3];
    }
    acc * basis.jw
}
