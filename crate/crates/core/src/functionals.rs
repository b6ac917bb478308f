//! Objective and constraint functionals with their shape-derivative
//! integrands.
//!
//! Each functional yields a scalar value and, for the sensitivity, the
//! boundary integrand `f_m` such that the shape derivative under a normal
//! perturbation of level set `m` is `∫_{∂D_m} f_m θ·n dΓ`. Boundary
//! integrals are relaxed with the smeared interface delta
//! `δ_η = H'_η(φ)|∇φ|`, consistent with the smoothed ersatz interpolation.
//!
//! Stiffness-based functionals are fixed algebraic combinations of the
//! homogenised Voigt entries `M_ab`, so their integrands are the same
//! combinations of the per-entry integrands: the self-adjoint quadratic form
//! `(ε(ũᵃ)+ε̄ᵃ)ᵀ C (ε(ũᵇ)+ε̄ᵇ)` in the single-phase case, and its colour
//! derivative `−(εᵃ)ᵀ ∂C/∂g_m (εᵇ)` per level set in the multi-phase case.

use crate::fem::{gauss_gradients, gauss_values, ElementBasis, GaussField};
use crate::grid::PeriodicGrid;
use crate::homogenization::{homogenised_tensor, CellSolution};
use crate::levelset::{smoothed_heaviside, smoothed_heaviside_prime, LevelSetState};
use crate::material::{colour_weight, colour_weight_derivative, MaterialField, MaterialKind};
use crate::tensor::StiffnessTensor;
use crate::{Error, Result};

/// Guard below which the anisotropy measure is treated as exactly zero and
/// its (kinked) sensitivity as the zero subgradient.
pub const ANISOTROPY_KINK_GUARD: f64 = 1e-12;

/// Per-level-set boundary integrand sampled at the element Gauss points.
#[derive(Debug, Clone)]
pub struct SensitivityIntegrand {
    pub f: Vec<GaussField>,
}

/// Everything needed to evaluate functionals at one design iterate.
pub struct EvalContext<'a> {
    pub state: &'a LevelSetState,
    pub mat: &'a MaterialField,
    pub sol: &'a CellSolution,
    pub cbar: StiffnessTensor,
    /// `H_η(φ_m)` at Gauss points, one field per level set.
    pub h_gauss: Vec<GaussField>,
    /// `δ_η = H'_η(φ_m)|∇φ_m|` at Gauss points, one field per level set.
    pub delta_gauss: Vec<GaussField>,
    pub basis: ElementBasis,
}

impl<'a> EvalContext<'a> {
    pub fn new(
        state: &'a LevelSetState,
        mat: &'a MaterialField,
        sol: &'a CellSolution,
    ) -> Result<Self> {
        let grid = state.grid();
        if mat.grid() != grid || sol.grid() != grid {
            return Err(Error::ShapeMismatch(
                "state, material and cell solution must share one grid".into(),
            ));
        }
        let basis = ElementBasis::new(grid);
        let eta = state.eta;
        let mut h_gauss = Vec::new();
        let mut delta_gauss = Vec::new();
        for phi in &state.phi {
            let vals = gauss_values(&basis, phi);
            let grads = gauss_gradients(&basis, phi);
            let ne = grid.num_elements();
            let mut h = Vec::with_capacity(ne);
            let mut d = Vec::with_capacity(ne);
            for e in 0..ne {
                h.push(std::array::from_fn(|g| smoothed_heaviside(vals[e][g], eta)));
                d.push(std::array::from_fn(|g| {
                    let (gx, gy) = grads[e][g];
                    smoothed_heaviside_prime(vals[e][g], eta) * gx.hypot(gy)
                }));
            }
            h_gauss.push(h);
            delta_gauss.push(d);
        }
        let cbar = homogenised_tensor(sol, mat);
        Ok(Self {
            state,
            mat,
            sol,
            cbar,
            h_gauss,
            delta_gauss,
            basis,
        })
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.state.grid()
    }
}

// ---------------------------------------------------------------------------
// algebra on homogenised tensors
// ---------------------------------------------------------------------------

/// Effective bulk modulus: `¼(M₀₀ + M₁₁ + 2M₀₁)` in 2D, the nine-term
/// average in 3D.
pub fn bulk_modulus(cbar: &StiffnessTensor) -> f64 {
    match cbar.dim() {
        2 => 0.25 * (cbar.voigt(0, 0) + cbar.voigt(1, 1) + 2.0 * cbar.voigt(0, 1)),
        _ => {
            (cbar.voigt(0, 0)
                + cbar.voigt(1, 1)
                + cbar.voigt(2, 2)
                + 2.0 * (cbar.voigt(0, 1) + cbar.voigt(0, 2) + cbar.voigt(1, 2)))
                / 9.0
        }
    }
}

/// Isotropic shear modulus `⅛(M₀₀+M₁₁) − ¼M₀₁ + ½M₂₂` (2D).
pub fn shear_modulus_2d(cbar: &StiffnessTensor) -> f64 {
    0.125 * (cbar.voigt(0, 0) + cbar.voigt(1, 1)) - 0.25 * cbar.voigt(0, 1)
        + 0.5 * cbar.voigt(2, 2)
}

/// Shared normaliser `√(4κ̄² + 8μ̄²)` of the isotropy residuals. Held
/// constant during shape differentiation and refreshed at every evaluation.
pub fn isotropy_normaliser(cbar: &StiffnessTensor) -> Result<f64> {
    let k = bulk_modulus(cbar);
    let m = shear_modulus_2d(cbar);
    let s = (4.0 * k * k + 8.0 * m * m).sqrt();
    if s < 1e-12 {
        return Err(Error::DegenerateDesign(
            "isotropy normaliser √(4κ̄²+8μ̄²) vanished".into(),
        ));
    }
    Ok(s)
}

/// Unnormalised coefficient matrices of the six isotropy residuals on the
/// Voigt entries `(M₀₀, M₁₁, M₀₁, M₂₂, M₀₂, M₁₂)`; residual i is
/// `contract(coeffs_i, M) / s`. Only `a ≤ b` entries are populated.
fn residual_coeffs(index: usize) -> [[f64; 3]; 3] {
    let mut w = [[0.0; 3]; 3];
    let sq2 = std::f64::consts::SQRT_2;
    match index {
        // M₀₀ − κ̄ − μ̄
        0 => {
            w[0][0] = 1.0 - 0.25 - 0.125;
            w[1][1] = -0.25 - 0.125;
            w[0][1] = -0.5 + 0.25;
            w[2][2] = -0.5;
        }
        // M₁₁ − κ̄ − μ̄
        1 => {
            w[0][0] = -0.25 - 0.125;
            w[1][1] = 1.0 - 0.25 - 0.125;
            w[0][1] = -0.5 + 0.25;
            w[2][2] = -0.5;
        }
        // √2 (M₀₁ − κ̄ + μ̄)
        2 => {
            w[0][0] = sq2 * (-0.25 + 0.125);
            w[1][1] = sq2 * (-0.25 + 0.125);
            w[0][1] = sq2 * (1.0 - 0.5 - 0.25);
            w[2][2] = sq2 * 0.5;
        }
        // 2 M₀₂
        3 => w[0][2] = 2.0,
        // 2 M₁₂
        4 => w[1][2] = 2.0,
        // 2 (M₂₂ − μ̄)
        5 => {
            w[0][0] = -0.25;
            w[1][1] = -0.25;
            w[0][1] = 0.5;
            w[2][2] = 2.0 - 1.0;
        }
        _ => unreachable!(),
    }
    w
}

fn contract(w: &[[f64; 3]; 3], cbar: &StiffnessTensor) -> f64 {
    let mut acc = 0.0;
    for a in 0..3 {
        for b in a..3 {
            acc += w[a][b] * cbar.voigt(a, b);
        }
    }
    acc
}

/// The six normalised isotropy residuals `C₁..C₆`.
pub fn isotropy_residuals_2d(cbar: &StiffnessTensor) -> Result<[f64; 6]> {
    let s = isotropy_normaliser(cbar)?;
    Ok(std::array::from_fn(|i| contract(&residual_coeffs(i), cbar) / s))
}

/// `Ā = √(Σ Cᵢ²)`
pub fn anisotropy_measure(residuals: &[f64; 6]) -> f64 {
    residuals.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// `ν̄ = M₀₁ / M₀₀`
pub fn poisson_ratio(cbar: &StiffnessTensor) -> Result<f64> {
    let denom = cbar.voigt(0, 0);
    if denom.abs() < 1e-8 {
        return Err(Error::DegenerateDesign(format!(
            "effective Poisson ratio undefined: C̄₁₁₁₁ = {denom}"
        )));
    }
    Ok(cbar.voigt(0, 1) / denom)
}

// ---------------------------------------------------------------------------
// functionals
// ---------------------------------------------------------------------------

/// A scalar functional of the design, used as objective or constraint.
/// Constraint residuals are `value − target`, unscaled beyond the stated
/// normalisation of the isotropy set.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Functional {
    BulkModulus,
    ShearModulus,
    /// Solid volume `∫_D (1 − H_η(φ)) dΩ` of a single-phase design.
    Volume { target: f64 },
    /// Volume of colour phase `Ω_k`, `phase` in `1..=4`.
    PhaseVolume { phase: usize, target: f64 },
    /// One of the six normalised residuals, `index` in `0..=5`.
    IsotropyResidual { index: usize },
    AnisotropyMeasure,
    /// Pin a homogenised Voigt entry `M_ab` to a value.
    StiffnessTarget { a: usize, b: usize, target: f64 },
    PoissonRatio,
}

impl Functional {
    pub fn target(&self) -> f64 {
        match self {
            Functional::Volume { target }
            | Functional::PhaseVolume { target, .. }
            | Functional::StiffnessTarget { target, .. } => *target,
            _ => 0.0,
        }
    }

    pub fn value(&self, ctx: &EvalContext) -> Result<f64> {
        match self {
            Functional::BulkModulus => Ok(bulk_modulus(&ctx.cbar)),
            Functional::ShearModulus => Ok(shear_modulus_2d(&ctx.cbar)),
            Functional::Volume { .. } => {
                require_level_sets(ctx, 1)?;
                let h = &ctx.h_gauss[0];
                let mut acc = 0.0;
                for e in 0..ctx.grid().num_elements() {
                    for g in 0..4 {
                        acc += 1.0 - h[e][g];
                    }
                }
                Ok(acc * ctx.basis.jw)
            }
            Functional::PhaseVolume { phase, .. } => {
                require_level_sets(ctx, 2)?;
                let k = phase_index(*phase)?;
                let (h1, h2) = (&ctx.h_gauss[0], &ctx.h_gauss[1]);
                let mut acc = 0.0;
                for e in 0..ctx.grid().num_elements() {
                    for g in 0..4 {
                        acc += colour_weight(k, h1[e][g], h2[e][g]);
                    }
                }
                Ok(acc * ctx.basis.jw)
            }
            Functional::IsotropyResidual { index } => {
                check_residual_index(*index)?;
                Ok(isotropy_residuals_2d(&ctx.cbar)?[*index])
            }
            Functional::AnisotropyMeasure => {
                Ok(anisotropy_measure(&isotropy_residuals_2d(&ctx.cbar)?))
            }
            Functional::StiffnessTarget { a, b, .. } => Ok(ctx.cbar.voigt(*a, *b)),
            Functional::PoissonRatio => poisson_ratio(&ctx.cbar),
        }
    }

    /// Constraint residual `value − target`.
    pub fn residual(&self, ctx: &EvalContext) -> Result<f64> {
        Ok(self.value(ctx)? - self.target())
    }

    /// Derivative coefficients with respect to the homogenised Voigt entries
    /// (upper triangle), or `None` for the volume functionals.
    fn cbar_weights(&self, ctx: &EvalContext) -> Result<Option<[[f64; 3]; 3]>> {
        let mut w = [[0.0; 3]; 3];
        match self {
            Functional::BulkModulus => {
                w[0][0] = 0.25;
                w[1][1] = 0.25;
                w[0][1] = 0.5;
            }
            Functional::ShearModulus => {
                w[0][0] = 0.125;
                w[1][1] = 0.125;
                w[0][1] = -0.25;
                w[2][2] = 0.5;
            }
            Functional::IsotropyResidual { index } => {
                check_residual_index(*index)?;
                let s = isotropy_normaliser(&ctx.cbar)?;
                w = residual_coeffs(*index);
                scale_weights(&mut w, 1.0 / s);
            }
            Functional::AnisotropyMeasure => {
                let residuals = isotropy_residuals_2d(&ctx.cbar)?;
                let abar = anisotropy_measure(&residuals);
                if abar < ANISOTROPY_KINK_GUARD {
                    // zero subgradient at the kink
                    return Ok(Some(w));
                }
                let s = isotropy_normaliser(&ctx.cbar)?;
                for (i, c) in residuals.iter().enumerate() {
                    let wi = residual_coeffs(i);
                    for a in 0..3 {
                        for b in a..3 {
                            w[a][b] += (c / abar) * wi[a][b] / s;
                        }
                    }
                }
            }
            Functional::StiffnessTarget { a, b, .. } => {
                w[*a.min(b)][*a.max(b)] = 1.0;
            }
            Functional::PoissonRatio => {
                let m00 = ctx.cbar.voigt(0, 0);
                if m00.abs() < 1e-8 {
                    return Err(Error::DegenerateDesign(
                        "Poisson-ratio sensitivity undefined: C̄₁₁₁₁ ≈ 0".into(),
                    ));
                }
                w[0][1] = 1.0 / m00;
                w[0][0] = -ctx.cbar.voigt(0, 1) / (m00 * m00);
            }
            Functional::Volume { .. } | Functional::PhaseVolume { .. } => return Ok(None),
        }
        Ok(Some(w))
    }

    /// Boundary integrand(s) of the shape derivative, one Gauss field per
    /// level set.
    pub fn integrand(&self, ctx: &EvalContext) -> Result<SensitivityIntegrand> {
        match self {
            Functional::Volume { .. } => {
                require_level_sets(ctx, 1)?;
                Ok(SensitivityIntegrand {
                    f: vec![vec![[1.0; 4]; ctx.grid().num_elements()]],
                })
            }
            Functional::PhaseVolume { phase, .. } => {
                require_level_sets(ctx, 2)?;
                let k = phase_index(*phase)?;
                let ne = ctx.grid().num_elements();
                let mut f = vec![Vec::with_capacity(ne), Vec::with_capacity(ne)];
                for m in 0..2 {
                    let other = &ctx.h_gauss[1 - m];
                    for e in 0..ne {
                        f[m].push(std::array::from_fn(|g| {
                            -colour_weight_derivative(m, other[e][g])[k]
                        }));
                    }
                }
                Ok(SensitivityIntegrand { f })
            }
            _ => {
                let w = self
                    .cbar_weights(ctx)?
                    .expect("stiffness-based functionals always carry weights");
                Ok(stiffness_combination_integrand(ctx, &w))
            }
        }
    }
}

fn scale_weights(w: &mut [[f64; 3]; 3], s: f64) {
    for a in 0..3 {
        for b in 0..3 {
            w[a][b] *= s;
        }
    }
}

fn require_level_sets(ctx: &EvalContext, m: usize) -> Result<()> {
    if ctx.state.num_level_sets() != m {
        return Err(Error::Parameter(format!(
            "functional needs {m} level set function(s), state has {}",
            ctx.state.num_level_sets()
        )));
    }
    Ok(())
}

fn phase_index(phase: usize) -> Result<usize> {
    if (1..=4).contains(&phase) {
        Ok(phase - 1)
    } else {
        Err(Error::Parameter(format!("colour phase must be 1..=4, got {phase}")))
    }
}

fn check_residual_index(index: usize) -> Result<()> {
    if index < 6 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "2D isotropy residual index must be 0..=5, got {index}"
        )))
    }
}

/// Integrand of a single homogenised entry `M_ab` (the self-adjoint product
/// of total strains). Exposed for tests and composed functionals.
pub fn stiffness_sensitivity(ctx: &EvalContext, a: usize, b: usize) -> SensitivityIntegrand {
    let mut w = [[0.0; 3]; 3];
    w[a.min(b)][a.max(b)] = 1.0;
    stiffness_combination_integrand(ctx, &w)
}

/// Shared kernel: integrand of `Σ_{a≤b} W_ab M_ab`.
///
/// Single-phase: `f = Σ W_ab (εᵃ)ᵀ C_base (εᵇ)` on the single interface.
/// Multi-phase: `f_m = −Σ W_ab (εᵃ)ᵀ (∂C/∂g_m) (εᵇ)` per level set, where
/// `∂C/∂g_m` follows from the colour interpolation and the Heaviside of the
/// other level set.
fn stiffness_combination_integrand(ctx: &EvalContext, w: &[[f64; 3]; 3]) -> SensitivityIntegrand {
    let ne = ctx.grid().num_elements();
    match ctx.mat.kind() {
        // Custom materials only occur in oracle setups where the first base
        // tensor plays the single-phase role.
        MaterialKind::SinglePhase { .. } | MaterialKind::Custom => {
            let c = match ctx.mat.kind() {
                MaterialKind::SinglePhase { base, .. } => base.voigt3(),
                _ => ctx.mat.bases()[0].voigt3(),
            };
            let mut f = Vec::with_capacity(ne);
            for e in 0..ne {
                f.push(std::array::from_fn(|g| quadform_combination(ctx, w, &c, e, g)));
            }
            SensitivityIntegrand { f: vec![f] }
        }
        MaterialKind::MultiPhase { phases } => {
            let voigts: Vec<[[f64; 3]; 3]> = phases.iter().map(|p| p.voigt3()).collect();
            let mut f = vec![Vec::with_capacity(ne), Vec::with_capacity(ne)];
            for m in 0..2 {
                let other = &ctx.h_gauss[1 - m];
                for e in 0..ne {
                    f[m].push(std::array::from_fn(|g| {
                        let coefs = colour_weight_derivative(m, other[e][g]);
                        let mut dc = [[0.0; 3]; 3];
                        for (p, cp) in voigts.iter().enumerate() {
                            if coefs[p] == 0.0 {
                                continue;
                            }
                            for r in 0..3 {
                                for s in 0..3 {
                                    dc[r][s] += coefs[p] * cp[r][s];
                                }
                            }
                        }
                        -quadform_combination(ctx, w, &dc, e, g)
                    }));
                }
            }
            SensitivityIntegrand { f }
        }
    }
}

#[inline]
fn quadform_combination(
    ctx: &EvalContext,
    w: &[[f64; 3]; 3],
    c: &[[f64; 3]; 3],
    e: usize,
    g: usize,
) -> f64 {
    let mut acc = 0.0;
    for a in 0..3 {
        let ea = &ctx.sol.total_strain(a)[e][g];
        for b in a..3 {
            if w[a][b] == 0.0 {
                continue;
            }
            let eb = &ctx.sol.total_strain(b)[e][g];
            let mut q = 0.0;
            for r in 0..3 {
                for s in 0..3 {
                    q += ea[r] * c[r][s] * eb[s];
                }
            }
            acc += w[a][b] * q;
        }
    }
    acc
}
