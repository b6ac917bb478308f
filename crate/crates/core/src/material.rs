//! Pointwise stiffness interpolation driven by the level set functions.
//!
//! Every material distribution used by the assembly kernels is stored as a
//! linear combination `C(x) = Σ_k w_k(x) C_k` with the scalar weights sampled
//! at the element Gauss points. Single-phase ersatz and the four-phase colour
//! interpolation are both of this form, which keeps element integration down
//! to a handful of scalar-times-constant-matrix products.

use crate::fem::{gauss_values, ElementBasis, GaussField};
use crate::grid::PeriodicGrid;
use crate::levelset::{smoothed_heaviside, LevelSetState};
use crate::tensor::StiffnessTensor;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub enum MaterialKind {
    /// `C(φ) = C (1 − H_η(φ)) + ε_void C H_η(φ)`
    SinglePhase { base: StiffnessTensor, eps_void: f64 },
    /// Four-phase colour interpolation over two level sets:
    /// `C = C₁(1−g₁)g₂ + C₂ g₁(1−g₂) + C₃(1−g₁)(1−g₂) + C₄ g₁ g₂`
    /// with `g_m = H_η(d_m)`.
    MultiPhase { phases: Box<[StiffnessTensor; 4]> },
    /// Arbitrary prescribed weights (oracles and uniform cells).
    Custom,
}

#[derive(Debug, Clone)]
pub struct MaterialField {
    grid: PeriodicGrid,
    kind: MaterialKind,
    bases: Vec<StiffnessTensor>,
    weights: Vec<GaussField>,
}

impl MaterialField {
    /// Spec entry point: one base tensor builds the single-phase ersatz
    /// interpolation, four build the colour interpolation (the void phases
    /// are expected to carry their `eps_void` scaling already).
    pub fn from_bases(
        state: &LevelSetState,
        bases: &[StiffnessTensor],
        eps_void: f64,
    ) -> Result<Self> {
        match bases.len() {
            1 => Self::single_phase(state, bases[0].clone(), eps_void),
            4 => Self::multi_phase(
                state,
                [
                    bases[0].clone(),
                    bases[1].clone(),
                    bases[2].clone(),
                    bases[3].clone(),
                ],
            ),
            k => Err(Error::Parameter(format!(
                "material interpolation needs 1 (single-phase) or 4 (colour) base tensors, got {k}"
            ))),
        }
    }

    pub fn single_phase(
        state: &LevelSetState,
        base: StiffnessTensor,
        eps_void: f64,
    ) -> Result<Self> {
        if state.num_level_sets() != 1 {
            return Err(Error::Parameter(
                "single-phase material needs exactly one level set function".into(),
            ));
        }
        if !(eps_void > 0.0 && eps_void < 1.0) {
            return Err(Error::Parameter(format!(
                "ersatz coefficient must lie in (0,1), got {eps_void}"
            )));
        }
        let grid = state.grid();
        let basis = ElementBasis::new(grid);
        let phi_g = gauss_values(&basis, &state.phi[0]);
        let eta = state.eta;
        let weights: GaussField = phi_g
            .iter()
            .map(|vals| std::array::from_fn(|g| 1.0 - (1.0 - eps_void) * smoothed_heaviside(vals[g], eta)))
            .collect();
        Ok(Self {
            grid,
            kind: MaterialKind::SinglePhase { base: base.clone(), eps_void },
            bases: vec![base],
            weights: vec![weights],
        })
    }

    pub fn multi_phase(state: &LevelSetState, phases: [StiffnessTensor; 4]) -> Result<Self> {
        if state.num_level_sets() != 2 {
            return Err(Error::Parameter(
                "colour interpolation needs exactly two level set functions".into(),
            ));
        }
        let grid = state.grid();
        let basis = ElementBasis::new(grid);
        let eta = state.eta;
        let g1: GaussField = gauss_values(&basis, &state.phi[0])
            .iter()
            .map(|v| std::array::from_fn(|g| smoothed_heaviside(v[g], eta)))
            .collect();
        let g2: GaussField = gauss_values(&basis, &state.phi[1])
            .iter()
            .map(|v| std::array::from_fn(|g| smoothed_heaviside(v[g], eta)))
            .collect();
        let ne = grid.num_elements();
        let mut weights = vec![
            Vec::with_capacity(ne),
            Vec::with_capacity(ne),
            Vec::with_capacity(ne),
            Vec::with_capacity(ne),
        ];
        for e in 0..ne {
            let w: [[f64; 4]; 4] = std::array::from_fn(|phase| {
                std::array::from_fn(|g| colour_weight(phase, g1[e][g], g2[e][g]))
            });
            for phase in 0..4 {
                weights[phase].push(w[phase]);
            }
        }
        Ok(Self {
            grid,
            kind: MaterialKind::MultiPhase {
                phases: Box::new(phases.clone()),
            },
            bases: phases.to_vec(),
            weights,
        })
    }

    /// Spatially uniform cell (identity weights).
    pub fn uniform(grid: PeriodicGrid, c: StiffnessTensor) -> Self {
        let w = vec![[1.0; 4]; grid.num_elements()];
        Self {
            grid,
            kind: MaterialKind::Custom,
            bases: vec![c],
            weights: vec![w],
        }
    }

    /// Fully prescribed combination, mainly for oracle tests.
    pub fn from_parts(
        grid: PeriodicGrid,
        bases: Vec<StiffnessTensor>,
        weights: Vec<GaussField>,
    ) -> Result<Self> {
        if bases.len() != weights.len() || bases.is_empty() {
            return Err(Error::ShapeMismatch(
                "one weight field per base tensor required".into(),
            ));
        }
        for w in &weights {
            if w.len() != grid.num_elements() {
                return Err(Error::ShapeMismatch(
                    "weight field length must equal element count".into(),
                ));
            }
        }
        Ok(Self {
            grid,
            kind: MaterialKind::Custom,
            bases,
            weights,
        })
    }

    #[inline]
    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn kind(&self) -> &MaterialKind {
        &self.kind
    }

    pub fn bases(&self) -> &[StiffnessTensor] {
        &self.bases
    }

    pub fn weights(&self) -> &[GaussField] {
        &self.weights
    }

    /// Combined Voigt matrix at one Gauss point.
    pub fn tensor_at(&self, element: usize, gauss: usize) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for (k, base) in self.bases.iter().enumerate() {
            let w = self.weights[k][element][gauss];
            if w == 0.0 {
                continue;
            }
            for a in 0..3 {
                for b in 0..3 {
                    m[a][b] += w * base.voigt(a, b);
                }
            }
        }
        m
    }
}

/// Colour-table weight of phase `Ω_{phase+1}` given `g_m = H_η(d_m)`.
///
/// Ω₁: φ₁<0, φ₂>0; Ω₂: φ₁>0, φ₂<0; Ω₃: both negative; Ω₄: both positive.
#[inline]
pub fn colour_weight(phase: usize, g1: f64, g2: f64) -> f64 {
    match phase {
        0 => (1.0 - g1) * g2,
        1 => g1 * (1.0 - g2),
        2 => (1.0 - g1) * (1.0 - g2),
        3 => g1 * g2,
        _ => unreachable!(),
    }
}

/// ∂C/∂g_m of the colour interpolation as a combination of the phase
/// tensors; `other` is the Heaviside value of the other level set at the
/// evaluation point. Returned as the four phase coefficients.
#[inline]
pub fn colour_weight_derivative(lsf: usize, other: f64) -> [f64; 4] {
    match lsf {
        // ∂/∂g₁ at fixed g₂ = other
        0 => [-other, 1.0 - other, -(1.0 - other), other],
        // ∂/∂g₂ at fixed g₁ = other
        1 => [1.0 - other, -other, -(1.0 - other), other],
        _ => unreachable!(),
    }
}
