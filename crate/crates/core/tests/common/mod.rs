//! Shared helpers for the integration and acceptance suites: seeded smooth
//! bumps and a central finite-difference oracle for shape derivatives.
//!
//! The oracle never touches the sensitivity code paths it is checking: it
//! re-solves the cell problems at perturbed level sets and differences the
//! functional values directly.

#![allow(dead_code)]

use cellopt::fem::{gauss_values, integrate, ElementBasis, GaussField};
use cellopt::functionals::{EvalContext, Functional};
use cellopt::grid::{NodalField, PeriodicGrid};
use cellopt::homogenization::{solve_cell_problems, CellSolution};
use cellopt::levelset::LevelSetState;
use cellopt::material::MaterialField;
use cellopt::tensor::StiffnessTensor;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Smooth periodic bump: a low-order random trigonometric polynomial with
/// unit max-norm.
pub fn smooth_bump(grid: PeriodicGrid, rng: &mut ChaCha8Rng) -> NodalField {
    let mut terms = Vec::new();
    for k in -2i32..=2 {
        for l in -2i32..=2 {
            if k == 0 && l == 0 {
                continue;
            }
            let amp: f64 = rng.gen_range(-1.0..1.0);
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            terms.push((k as f64, l as f64, amp, phase));
        }
    }
    let mut f = NodalField::from_fn(grid, |x, y| {
        let mut acc = 0.3; // constant part keeps the bump from averaging out
        for &(k, l, a, p) in &terms {
            acc += a * (std::f64::consts::TAU * (k * x + l * y) + p).cos();
        }
        acc
    });
    let scale = f.max_abs();
    f.scale(1.0 / scale);
    f
}

/// A design plus its materials, the unit under differentiation.
pub struct FdCase {
    pub state: LevelSetState,
    pub bases: Vec<StiffnessTensor>,
    pub eps_void: f64,
}

impl FdCase {
    pub fn solve(&self, warm: Option<&CellSolution>) -> (MaterialField, CellSolution) {
        let mat = MaterialField::from_bases(&self.state, &self.bases, self.eps_void).unwrap();
        let sol = solve_cell_problems(&mat, warm, 1e-11).unwrap();
        (mat, sol)
    }

    /// Apply the transport-consistent perturbation `δφ_m = −τ w_m |∇φ_m|`
    /// to every level set.
    pub fn perturbed(&self, bumps: &[NodalField], tau: f64) -> FdCase {
        let grid = self.state.grid();
        let mut phi = self.state.phi.clone();
        for (m, p) in phi.iter_mut().enumerate() {
            let gnorm = p.gradient_norm_central();
            for j in 0..grid.n() as i64 {
                for i in 0..grid.n() as i64 {
                    let d = -tau * bumps[m].get(i, j) * gnorm.get(i, j);
                    p.set(i, j, p.get(i, j) + d);
                }
            }
        }
        FdCase {
            state: LevelSetState {
                phi,
                eta: self.state.eta,
                is_reinitialised: false,
            },
            bases: self.bases.clone(),
            eps_void: self.eps_void,
        }
    }
}

/// Central finite difference of `value` along the bump direction.
pub fn fd_derivative(
    case: &FdCase,
    bumps: &[NodalField],
    tau: f64,
    warm: &CellSolution,
    value: &dyn Fn(&EvalContext) -> f64,
) -> f64 {
    let plus = case.perturbed(bumps, tau);
    let minus = case.perturbed(bumps, -tau);
    let (mat_p, sol_p) = plus.solve(Some(warm));
    let (mat_m, sol_m) = minus.solve(Some(warm));
    let ctx_p = EvalContext::new(&plus.state, &mat_p, &sol_p).unwrap();
    let ctx_m = EvalContext::new(&minus.state, &mat_m, &sol_m).unwrap();
    (value(&ctx_p) - value(&ctx_m)) / (2.0 * tau)
}

/// Predicted directional derivative `Σ_m ∫ f_m w_m δ_η dΩ` from a
/// sensitivity integrand.
pub fn predicted_derivative(
    ctx: &EvalContext,
    integrand: &cellopt::functionals::SensitivityIntegrand,
    bumps: &[NodalField],
) -> f64 {
    let basis = ElementBasis::new(ctx.grid());
    let mut total = 0.0;
    for (m, f) in integrand.f.iter().enumerate() {
        let w = gauss_values(&basis, &bumps[m]);
        let weighted: GaussField = (0..f.len())
            .map(|e| std::array::from_fn(|g| f[e][g] * w[e][g] * ctx.delta_gauss[m][e][g]))
            .collect();
        total += integrate(&basis, &weighted);
    }
    total
}

/// Run the FD comparison for one functional over several random bumps;
/// returns the worst relative error.
pub fn fd_worst_error(
    case: &FdCase,
    functional: &Functional,
    value: &dyn Fn(&EvalContext) -> f64,
    n_bumps: usize,
    tau: f64,
    seed: u64,
) -> f64 {
    let (mat, sol) = case.solve(None);
    let ctx = EvalContext::new(&case.state, &mat, &sol).unwrap();
    let integrand = functional.integrand(&ctx).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_bumps {
        let bumps: Vec<NodalField> = (0..case.state.num_level_sets())
            .map(|_| smooth_bump(case.state.grid(), &mut rng))
            .collect();
        let predicted = predicted_derivative(&ctx, &integrand, &bumps);
        let fd = fd_derivative(case, &bumps, tau, &sol, value);
        let err = (predicted - fd).abs() / fd.abs().max(1e-8);
        worst = worst.max(err);
    }
    worst
}
