//! Hilbertian extension-regularisation of shape sensitivities.
//!
//! A raw shape derivative `J'(Ω)(θ) = ∫_∂Ω f θ·n dΓ` is turned into a field
//! over the whole cell by solving the identification problem
//!
//! ```text
//! find g ∈ H¹_per(D):   ⟨g, w⟩_H = −J'(Ω)(w n)   ∀ w,
//! ⟨u, v⟩_H = β² ∫ ∇u·∇v dΩ + ∫ u v dΩ,
//! ```
//!
//! with the boundary integral relaxed through the smeared interface delta
//! `δ_η = H'_η(φ)|∇φ|`. The same bilinear FE space as the elasticity solves
//! is used; the mass term removes the constant null space so no gauge is
//! needed. Multi-phase sensitivities live in the product space `H × H` whose
//! inner product is the sum of the component inner products.

use crate::fem::{ElementBasis, GaussField};
use crate::grid::{NodalField, PeriodicGrid};
use crate::linalg::{pcg, CsrMatrix};
use crate::{Error, Result};

const EXTENSION_RTOL: f64 = 1e-12;
const EXTENSION_MAX_ITER: usize = 20_000;

/// Factorised-once operator `β²K + M` on periodic scalar bilinear elements.
#[derive(Debug, Clone)]
pub struct ExtensionOperator {
    grid: PeriodicGrid,
    beta: f64,
    a: CsrMatrix,
    basis: ElementBasis,
}

impl ExtensionOperator {
    pub fn new(grid: PeriodicGrid, beta: f64) -> Result<Self> {
        if beta <= 0.0 {
            return Err(Error::Parameter(format!(
                "regularisation length must be positive, got {beta}"
            )));
        }
        let basis = ElementBasis::new(grid);
        let n = grid.n() as i64;
        let mut rows = Vec::with_capacity(grid.num_nodes());
        for j in 0..n {
            for i in 0..n {
                let mut neigh = Vec::with_capacity(9);
                for dj in -1..=1 {
                    for di in -1..=1 {
                        neigh.push(grid.node(i + di, j + dj));
                    }
                }
                neigh.sort_unstable();
                neigh.dedup();
                rows.push(neigh);
            }
        }
        let mut a = CsrMatrix::from_pattern(rows);
        // element matrices: jw Σ_g (β² ∇N·∇N + N N)
        let mut ae = [[0.0f64; 4]; 4];
        for g in 0..4 {
            for p in 0..4 {
                for q in 0..4 {
                    ae[p][q] += basis.jw
                        * (beta * beta
                            * (basis.gx[g][p] * basis.gx[g][q] + basis.gy[g][p] * basis.gy[g][q])
                            + basis.nval[g][p] * basis.nval[g][q]);
                }
            }
        }
        for ej in 0..grid.n() {
            for ei in 0..grid.n() {
                let nodes = grid.element_nodes(ei, ej);
                for p in 0..4 {
                    for q in 0..4 {
                        a.add(nodes[p], nodes[q], ae[p][q]);
                    }
                }
            }
        }
        Ok(Self {
            grid,
            beta,
            a,
            basis,
        })
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `⟨u, v⟩_H` for single fields.
    pub fn h_inner_single(&self, u: &NodalField, v: &NodalField) -> f64 {
        self.a.quadratic(u.values(), v.values())
    }

    /// Product-space inner product: sum over level set components.
    pub fn h_inner(&self, u: &[NodalField], v: &[NodalField]) -> Result<f64> {
        if u.len() != v.len() {
            return Err(Error::ShapeMismatch(format!(
                "product-space inner product of {} vs {} components",
                u.len(),
                v.len()
            )));
        }
        Ok(u.iter()
            .zip(v)
            .map(|(a, b)| self.h_inner_single(a, b))
            .sum())
    }

    pub fn h_norm(&self, u: &[NodalField]) -> f64 {
        u.iter()
            .map(|a| self.h_inner_single(a, a))
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    /// Solve `⟨g, w⟩_H = −∫ f w δ_η dΩ` for one component; `f` and `delta`
    /// are sampled at the Gauss points.
    pub fn extend_component(&self, f: &GaussField, delta: &GaussField) -> Result<NodalField> {
        let rhs = self.boundary_load(f, delta);
        self.solve(rhs)
    }

    /// Identification solves for every level set component of a sensitivity.
    pub fn extend(&self, f: &[GaussField], delta: &[GaussField]) -> Result<Vec<NodalField>> {
        f.iter()
            .zip(delta)
            .map(|(fi, di)| self.extend_component(fi, di))
            .collect()
    }

    /// Negative weighted load vector `b_j = −∫ f δ_η N_j dΩ`.
    fn boundary_load(&self, f: &GaussField, delta: &GaussField) -> Vec<f64> {
        let grid = self.grid;
        let mut b = vec![0.0; grid.num_nodes()];
        for ej in 0..grid.n() {
            for ei in 0..grid.n() {
                let e = ej * grid.n() + ei;
                let nodes = grid.element_nodes(ei, ej);
                for g in 0..4 {
                    let w = self.basis.jw * f[e][g] * delta[e][g];
                    if w == 0.0 {
                        continue;
                    }
                    for p in 0..4 {
                        b[nodes[p]] -= w * self.basis.nval[g][p];
                    }
                }
            }
        }
        b
    }

    /// Test hook: volumetric load without the interface delta,
    /// `⟨g, w⟩_H = −∫ c w dΩ`. A constant load `c` returns `g ≡ −c`.
    pub fn extend_volumetric(&self, load: &GaussField) -> Result<NodalField> {
        let ones = vec![[1.0; 4]; self.grid.num_elements()];
        let rhs = self.boundary_load(load, &ones);
        self.solve(rhs)
    }

    /// The discrete load vector paired with a field; used by the descent
    /// identity `⟨g, g⟩_H = −(load)·g`.
    pub fn load_pairing(&self, f: &GaussField, delta: &GaussField, g: &NodalField) -> f64 {
        let b = self.boundary_load(f, delta);
        crate::linalg::dot(&b, g.values())
    }

    fn solve(&self, rhs: Vec<f64>) -> Result<NodalField> {
        let mut x = vec![0.0; rhs.len()];
        pcg(&self.a, &rhs, &mut x, EXTENSION_RTOL, 0.0, EXTENSION_MAX_ITER)?;
        NodalField::from_values(self.grid, x)
    }
}
