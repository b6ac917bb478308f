//! Orthogonal-projection velocity for equality-constrained descent.
//!
//! Given the extended objective sensitivity `g` and extended constraint
//! sensitivities `μ_i` (all living in `H` or the product space `H × H`), the
//! normal velocity is the linear combination
//!
//! ```text
//! v = √(1 − Σ α_p²) · P g / ‖P g‖  +  Σ_p α_p μ̄_p / ‖μ̄_p‖,
//! P g = g − Σ_p (⟨μ̄_p, g⟩ / ‖μ̄_p‖²) μ̄_p,
//! ```
//!
//! where `{μ̄_p}` is the Gram-Schmidt basis of the constraint sensitivities
//! (linearly dependent constraints drop out) and the coefficients `α_p` solve
//! the lower-triangular system `λ C_p = Σ_{l<p} α_l ⟨μ̄_l, μ_p⟩/‖μ̄_l‖ +
//! α_p ‖μ̄_p‖` by forward substitution, so that `⟨μ_i, v⟩ = λ C_i` and every
//! violated constraint decreases at rate `λ`.
//!
//! Modified Gram-Schmidt with one full re-orthogonalisation pass bounds the
//! loss of orthogonality to order machine-epsilon times the conditioning,
//! which keeps the projection identities at the 1e-9..1e-10 level without
//! extended-precision arithmetic.

use crate::grid::NodalField;
use crate::hilbertian::ExtensionOperator;
use crate::{Error, Result};

/// Relative Gram-Schmidt drop tolerance: a candidate whose residual norm
/// falls below this fraction of its original norm is treated as linearly
/// dependent.
pub const DROP_TOL: f64 = 1e-8;

/// A velocity-space element: one nodal field per level set function.
pub type MultiField = Vec<NodalField>;

fn axpy(dst: &mut MultiField, s: f64, src: &MultiField) {
    for (d, x) in dst.iter_mut().zip(src) {
        d.axpy(s, x);
    }
}

fn scaled(src: &MultiField, s: f64) -> MultiField {
    let mut out = src.clone();
    for f in out.iter_mut() {
        f.scale(s);
    }
    out
}

/// Constraint residuals plus the orthogonalised sensitivity basis.
#[derive(Debug, Clone)]
pub struct ConstraintBundle {
    /// Residual of every constraint, retained or not.
    pub values: Vec<f64>,
    /// Original extended sensitivities, one per constraint.
    pub extended: Vec<MultiField>,
    /// Orthogonal basis spanning the retained sensitivities.
    pub basis: Vec<MultiField>,
    /// `retained[p]` is the original index of basis vector `p`.
    pub retained: Vec<usize>,
    /// `‖μ̄_p‖_H`
    pub basis_norms: Vec<f64>,
}

impl ConstraintBundle {
    pub fn num_constraints(&self) -> usize {
        self.values.len()
    }

    pub fn num_retained(&self) -> usize {
        self.basis.len()
    }

    pub fn dropped(&self) -> Vec<usize> {
        (0..self.values.len())
            .filter(|i| !self.retained.contains(i))
            .collect()
    }
}

/// Modified Gram-Schmidt with one full re-orthogonalisation pass over the
/// extended constraint sensitivities.
///
/// Errors when every sensitivity is (numerically) zero or dependent while
/// some residual is nonzero beyond `residual_tol`: no direction can then
/// improve the constraints.
pub fn orthogonalise(
    op: &ExtensionOperator,
    extended: Vec<MultiField>,
    values: Vec<f64>,
    residual_tol: f64,
) -> Result<ConstraintBundle> {
    if extended.is_empty() || extended.len() != values.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} sensitivities for {} constraint values",
            extended.len(),
            values.len()
        )));
    }
    let mut basis: Vec<MultiField> = Vec::new();
    let mut basis_norms: Vec<f64> = Vec::new();
    let mut retained: Vec<usize> = Vec::new();
    for (i, mu) in extended.iter().enumerate() {
        let orig_norm = op.h_norm(mu);
        let mut u = mu.clone();
        for _pass in 0..2 {
            for (b, &nb) in basis.iter().zip(&basis_norms) {
                let proj = op.h_inner(b, &u)? / (nb * nb);
                axpy(&mut u, -proj, b);
            }
        }
        let res_norm = op.h_norm(&u);
        if res_norm <= DROP_TOL * orig_norm || orig_norm == 0.0 {
            continue;
        }
        basis.push(u);
        basis_norms.push(res_norm);
        retained.push(i);
    }
    if basis.is_empty() {
        let worst = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if worst > residual_tol {
            return Err(Error::InfeasibleDirection(format!(
                "largest residual {worst:.3e}"
            )));
        }
    }
    Ok(ConstraintBundle {
        values,
        extended,
        basis,
        retained,
        basis_norms,
    })
}

/// `P g = g − Σ_p (⟨μ̄_p, g⟩/‖μ̄_p‖²) μ̄_p`
pub fn project(op: &ExtensionOperator, g: &MultiField, bundle: &ConstraintBundle) -> Result<MultiField> {
    let mut out = g.clone();
    for (b, &nb) in bundle.basis.iter().zip(&bundle.basis_norms) {
        let proj = op.h_inner(b, &out)? / (nb * nb);
        axpy(&mut out, -proj, b);
    }
    Ok(out)
}

/// Forward substitution of `λ C_p = Σ_{l<p} α_l ⟨μ̄_l, μ_p⟩/‖μ̄_l‖ + α_p ‖μ̄_p‖`
/// over the retained constraints in retention order.
pub fn solve_alphas(op: &ExtensionOperator, bundle: &ConstraintBundle, lambda: f64) -> Result<Vec<f64>> {
    let nbar = bundle.num_retained();
    let mut alphas = vec![0.0; nbar];
    for p in 0..nbar {
        let mu_p = &bundle.extended[bundle.retained[p]];
        let c_p = bundle.values[bundle.retained[p]];
        let mut acc = lambda * c_p;
        for l in 0..p {
            let cross = op.h_inner(&bundle.basis[l], mu_p)? / bundle.basis_norms[l];
            acc -= alphas[l] * cross;
        }
        alphas[p] = acc / bundle.basis_norms[p];
    }
    Ok(alphas)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ProjectionParams {
    /// Nominal constraint decrease rate (Table-1 value 0.5).
    pub lambda: f64,
    /// Lower bound on `Σ α²` while any constraint is violated.
    pub alpha_min_sq: f64,
    /// Violation threshold deciding whether the `α_min` push applies.
    pub eps2: f64,
    /// Optional cap on `λ_used / λ` when pushing `Σ α²` up to `α_min²`.
    pub lambda_boost_cap: Option<f64>,
}

impl Default for ProjectionParams {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            alpha_min_sq: 0.1,
            eps2: 1e-4,
            lambda_boost_cap: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VelocityResult {
    pub v: MultiField,
    pub alphas: Vec<f64>,
    pub lambda_used: f64,
    pub alpha_sq_sum: f64,
    pub pg_norm: f64,
    /// Dropped constraints whose implied `⟨μ_i, v⟩` disagrees with
    /// `λ_used C_i` beyond `eps2` (inconsistent dependent constraints).
    pub inconsistent: Vec<usize>,
    /// Both the projected objective and all α vanished: a first-order
    /// stationary point of the constrained problem.
    pub stationary: bool,
}

/// Combine the projected objective direction and the constraint-correcting
/// basis combination into a unit normal velocity.
///
/// `α` is linear in `λ`, so the coefficients are computed once at the
/// nominal rate and rescaled multiplicatively when `Σ α²` leaves
/// `[α_min², 1]`: down so that `Σ α² = 1`, or up to `α_min²` whenever some
/// constraint is violated beyond `eps2` (optionally capped).
pub fn compute_velocity(
    op: &ExtensionOperator,
    g: &MultiField,
    bundle: &ConstraintBundle,
    params: &ProjectionParams,
) -> Result<VelocityResult> {
    let pg = project(op, g, bundle)?;
    let pg_norm = op.h_norm(&pg);
    let mut alphas = solve_alphas(op, bundle, params.lambda)?;
    let mut lambda_used = params.lambda;
    let mut s2: f64 = alphas.iter().map(|a| a * a).sum();

    let violated = bundle.values.iter().any(|c| c.abs() > params.eps2);
    let mut factor = 1.0;
    if s2 > 1.0 {
        factor = (1.0 / s2).sqrt();
    } else if violated && s2 > 0.0 && s2 < params.alpha_min_sq {
        factor = (params.alpha_min_sq / s2).sqrt();
        if let Some(cap) = params.lambda_boost_cap {
            factor = factor.min(cap);
        }
    }
    if factor != 1.0 {
        for a in alphas.iter_mut() {
            *a *= factor;
        }
        lambda_used *= factor;
        s2 *= factor * factor;
    }

    let degenerate_pg = pg_norm < 1e-12;
    let mut v: MultiField = g.iter().map(|f| NodalField::zeros(f.grid())).collect();
    let mut stationary = false;
    if degenerate_pg {
        if s2 <= 0.0 {
            stationary = true;
        } else {
            // pure constraint-satisfaction step on the unit sphere
            let rescale = (1.0 / s2).sqrt();
            for a in alphas.iter_mut() {
                *a *= rescale;
            }
            lambda_used *= rescale;
            s2 = 1.0;
        }
    } else {
        let obj_coef = (1.0 - s2).max(0.0).sqrt() / pg_norm;
        axpy(&mut v, obj_coef, &pg);
    }
    for (p, &alpha) in alphas.iter().enumerate() {
        if alpha != 0.0 {
            axpy(&mut v, alpha / bundle.basis_norms[p], &bundle.basis[p]);
        }
    }

    // consistency of dropped (dependent) constraints with the realised step
    let mut inconsistent = Vec::new();
    for i in bundle.dropped() {
        let implied = op.h_inner(&bundle.extended[i], &v)?;
        if (implied - lambda_used * bundle.values[i]).abs() > params.eps2 {
            inconsistent.push(i);
        }
    }

    Ok(VelocityResult {
        v,
        alphas,
        lambda_used,
        alpha_sq_sum: s2,
        pg_norm,
        inconsistent,
        stationary,
    })
}

/// Convenience used by tests: velocity when there are no constraints at all,
/// `v = g / ‖g‖`.
pub fn unconstrained_velocity(op: &ExtensionOperator, g: &MultiField) -> Result<VelocityResult> {
    let norm = op.h_norm(g);
    if norm < 1e-14 {
        return Ok(VelocityResult {
            v: g.clone(),
            alphas: Vec::new(),
            lambda_used: 0.0,
            alpha_sq_sum: 0.0,
            pg_norm: 0.0,
            inconsistent: Vec::new(),
            stationary: true,
        });
    }
    Ok(VelocityResult {
        v: scaled(g, 1.0 / norm),
        alphas: Vec::new(),
        lambda_used: 0.0,
        alpha_sq_sum: 0.0,
        pg_norm: norm,
        inconsistent: Vec::new(),
        stationary: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{NodalField, PeriodicGrid};

    fn setup(n: usize) -> (PeriodicGrid, ExtensionOperator) {
        let grid = PeriodicGrid::new(n).unwrap();
        let op = ExtensionOperator::new(grid, 4.0 * grid.dx()).unwrap();
        (grid, op)
    }

    fn rand_field(grid: PeriodicGrid, seed: u64) -> MultiField {
        let mut s = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        vec![NodalField::from_values(grid, (0..grid.num_nodes()).map(|_| next()).collect()).unwrap()]
    }

    #[test]
    fn duplicate_constraint_is_dropped() {
        let (grid, op) = setup(16);
        let mu = rand_field(grid, 3);
        let bundle = orthogonalise(&op, vec![mu.clone(), mu.clone()], vec![0.1, 0.1], 1e-4).unwrap();
        assert_eq!(bundle.num_retained(), 1);
        assert_eq!(bundle.dropped(), vec![1]);
    }

    #[test]
    fn scalar_multiple_dropped_orthogonal_kept() {
        let (grid, op) = setup(16);
        let mu = rand_field(grid, 5);
        let two_mu = scaled(&mu, 2.0);
        let mut nu = rand_field(grid, 11);
        // make nu orthogonal to mu
        let proj = op.h_inner(&mu, &nu).unwrap() / op.h_norm(&mu).powi(2);
        axpy(&mut nu, -proj, &mu);
        let bundle =
            orthogonalise(&op, vec![mu.clone(), two_mu, nu.clone()], vec![0.1, 0.2, 0.3], 1e-4)
                .unwrap();
        assert_eq!(bundle.num_retained(), 2);
        assert_eq!(bundle.retained, vec![0, 2]);
        // basis spans {mu, nu}: projecting either annihilates it
        let pmu = project(&op, &mu, &bundle).unwrap();
        assert!(op.h_norm(&pmu) <= 1e-9 * op.h_norm(&mu));
    }

    #[test]
    fn all_zero_sensitivities_with_nonzero_residuals_fail() {
        let (grid, op) = setup(8);
        let zero = vec![NodalField::zeros(grid)];
        let err = orthogonalise(&op, vec![zero], vec![0.5], 1e-4);
        assert!(matches!(err, Err(crate::Error::InfeasibleDirection(_))));
    }

    #[test]
    fn basis_is_orthogonal() {
        let (grid, op) = setup(16);
        let mus: Vec<MultiField> = (0..4).map(|k| rand_field(grid, 23 + k)).collect();
        let bundle = orthogonalise(&op, mus, vec![0.1; 4], 1e-4).unwrap();
        for p in 0..bundle.num_retained() {
            for q in (p + 1)..bundle.num_retained() {
                let ip = op.h_inner(&bundle.basis[p], &bundle.basis[q]).unwrap();
                assert!(
                    ip.abs() <= 1e-10 * bundle.basis_norms[p] * bundle.basis_norms[q],
                    "basis not orthogonal: {ip}"
                );
            }
        }
    }

    #[test]
    fn projection_annihilates_and_is_idempotent() {
        let (grid, op) = setup(16);
        let mus: Vec<MultiField> = (0..3).map(|k| rand_field(grid, 31 + k)).collect();
        let bundle = orthogonalise(&op, mus.clone(), vec![0.0; 3], 1e-4).unwrap();
        // in-span annihilation
        let p1 = project(&op, &bundle.basis[0].clone(), &bundle).unwrap();
        assert!(op.h_norm(&p1) <= 1e-10 * bundle.basis_norms[0]);
        // random g: orthogonality and idempotency
        let g = rand_field(grid, 77);
        let pg = project(&op, &g, &bundle).unwrap();
        for mu in &mus {
            let ip = op.h_inner(&pg, mu).unwrap();
            assert!(ip.abs() <= 1e-9 * op.h_norm(&pg) * op.h_norm(mu));
        }
        let ppg = project(&op, &pg, &bundle).unwrap();
        let mut diff = ppg.clone();
        axpy(&mut diff, -1.0, &pg);
        assert!(op.h_norm(&diff) <= 1e-9 * op.h_norm(&pg));
        // orthogonal input passes through
        let pg2 = project(&op, &pg, &bundle).unwrap();
        let mut diff2 = pg2;
        axpy(&mut diff2, -1.0, &pg);
        assert!(op.h_norm(&diff2) <= 1e-9 * op.h_norm(&pg));
    }

    #[test]
    fn forward_substitution_hand_case() {
        let (grid, op) = setup(16);
        // two constraints made exactly orthonormal
        let mu1 = {
            let f = rand_field(grid, 41);
            scaled(&f, 1.0 / op.h_norm(&f))
        };
        let mut mu2 = rand_field(grid, 43);
        let proj = op.h_inner(&mu1, &mu2).unwrap();
        axpy(&mut mu2, -proj, &mu1);
        let mu2 = scaled(&mu2, 1.0 / op.h_norm(&mu2));
        let bundle =
            orthogonalise(&op, vec![mu1, mu2], vec![0.2, -0.4], 1e-4).unwrap();
        let alphas = solve_alphas(&op, &bundle, 0.5).unwrap();
        assert!((alphas[0] - 0.1).abs() < 1e-9);
        assert!((alphas[1] + 0.2).abs() < 1e-9);
    }

    #[test]
    fn single_constraint_alpha() {
        let (grid, op) = setup(16);
        let mu = rand_field(grid, 47);
        let norm = op.h_norm(&mu);
        let bundle = orthogonalise(&op, vec![mu], vec![0.3], 1e-4).unwrap();
        let alphas = solve_alphas(&op, &bundle, 0.5).unwrap();
        assert!((alphas[0] - 0.5 * 0.3 / norm).abs() < 1e-10 * (1.0 + alphas[0].abs()));
    }

    #[test]
    fn zero_residuals_give_zero_alphas_and_projected_gradient_velocity() {
        let (grid, op) = setup(16);
        let mus: Vec<MultiField> = (0..2).map(|k| rand_field(grid, 53 + k)).collect();
        let g = rand_field(grid, 59);
        let bundle = orthogonalise(&op, mus, vec![0.0, 0.0], 1e-4).unwrap();
        let vr = compute_velocity(&op, &g, &bundle, &ProjectionParams::default()).unwrap();
        assert!(vr.alphas.iter().all(|a| a.abs() < 1e-14));
        assert!((op.h_norm(&vr.v) - 1.0).abs() <= 1e-8);
        // v ∝ P g
        let pg = project(&op, &g, &bundle).unwrap();
        let cos = op.h_inner(&vr.v, &pg).unwrap() / op.h_norm(&pg);
        assert!((cos - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn velocity_satisfies_constraint_rate_equations() {
        let (grid, op) = setup(16);
        let mus: Vec<MultiField> = (0..3).map(|k| rand_field(grid, 61 + k)).collect();
        let values = vec![0.05, -0.12, 0.33];
        let g = rand_field(grid, 71);
        let bundle = orthogonalise(&op, mus.clone(), values.clone(), 1e-4).unwrap();
        let vr = compute_velocity(&op, &g, &bundle, &ProjectionParams::default()).unwrap();
        assert!((op.h_norm(&vr.v) - 1.0).abs() <= 1e-8);
        for (i, mu) in mus.iter().enumerate() {
            let got = op.h_inner(mu, &vr.v).unwrap();
            assert!(
                (got - vr.lambda_used * values[i]).abs() <= 1e-8,
                "⟨μ_{i}, v⟩ = {got} vs λC = {}",
                vr.lambda_used * values[i]
            );
        }
        assert!(1.0 - vr.alpha_sq_sum >= -1e-12);
    }

    #[test]
    fn objective_scaling_invariance() {
        let (grid, op) = setup(16);
        let mus: Vec<MultiField> = (0..2).map(|k| rand_field(grid, 81 + k)).collect();
        let values = vec![0.2, -0.1];
        let g = rand_field(grid, 89);
        let bundle = orthogonalise(&op, mus, values, 1e-4).unwrap();
        let v1 = compute_velocity(&op, &g, &bundle, &ProjectionParams::default()).unwrap();
        let g_scaled = scaled(&g, 37.5);
        let v2 = compute_velocity(&op, &g_scaled, &bundle, &ProjectionParams::default()).unwrap();
        let mut diff = v1.v.clone();
        axpy(&mut diff, -1.0, &v2.v);
        assert!(op.h_norm(&diff) <= 1e-10);
    }

    #[test]
    fn alpha_sq_rescaled_when_above_one() {
        let (grid, op) = setup(16);
        let mu = rand_field(grid, 97);
        let norm = op.h_norm(&mu);
        // choose C so that the nominal α₁ = λC/‖μ‖ = 2, i.e. α² = 4
        let c = 2.0 * norm / 0.5;
        let g = rand_field(grid, 101);
        let bundle = orthogonalise(&op, vec![mu], vec![c], 1e-4).unwrap();
        let vr = compute_velocity(&op, &g, &bundle, &ProjectionParams::default()).unwrap();
        assert!((vr.alpha_sq_sum - 1.0).abs() <= 1e-10);
        assert!((vr.lambda_used - 0.25).abs() <= 1e-10, "λ halved: {}", vr.lambda_used);
        assert!((vr.alphas[0].abs() - 1.0).abs() <= 1e-10);
        assert!((op.h_norm(&vr.v) - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn alpha_min_push_applies_only_when_violated() {
        let (grid, op) = setup(16);
        let mu = rand_field(grid, 103);
        let g = rand_field(grid, 107);
        let params = ProjectionParams::default();
        // violated: tiny residual above eps2 gets pushed to α_min²
        let bundle = orthogonalise(&op, vec![mu.clone()], vec![5e-3], 1e-4).unwrap();
        let vr = compute_velocity(&op, &g, &bundle, &params).unwrap();
        assert!((vr.alpha_sq_sum - params.alpha_min_sq).abs() <= 1e-10);
        // satisfied: residual below eps2 keeps its nominal (tiny) α
        let bundle = orthogonalise(&op, vec![mu], vec![5e-5], 1e-4).unwrap();
        let vr = compute_velocity(&op, &g, &bundle, &params).unwrap();
        assert!(vr.alpha_sq_sum < params.alpha_min_sq);
        assert!((vr.lambda_used - params.lambda).abs() < 1e-14);
    }

    #[test]
    fn boost_cap_limits_lambda() {
        let (grid, op) = setup(16);
        let mu = rand_field(grid, 109);
        let g = rand_field(grid, 113);
        let params = ProjectionParams {
            lambda_boost_cap: Some(10.0),
            ..ProjectionParams::default()
        };
        let bundle = orthogonalise(&op, vec![mu], vec![1e-3], 1e-4).unwrap();
        let vr = compute_velocity(&op, &g, &bundle, &params).unwrap();
        assert!(vr.lambda_used <= 10.0 * params.lambda + 1e-12);
        assert!(vr.alpha_sq_sum < params.alpha_min_sq);
    }

    #[test]
    fn permuting_constraints_barely_changes_v() {
        let (grid, op) = setup(16);
        let mus: Vec<MultiField> = (0..3).map(|k| rand_field(grid, 127 + k)).collect();
        let values = vec![0.3, -0.2, 0.15];
        let g = rand_field(grid, 137);
        let b1 = orthogonalise(&op, mus.clone(), values.clone(), 1e-4).unwrap();
        let v1 = compute_velocity(&op, &g, &b1, &ProjectionParams::default()).unwrap();
        let perm = vec![2usize, 0, 1];
        let mus2: Vec<MultiField> = perm.iter().map(|&i| mus[i].clone()).collect();
        let values2: Vec<f64> = perm.iter().map(|&i| values[i]).collect();
        let b2 = orthogonalise(&op, mus2, values2, 1e-4).unwrap();
        let v2 = compute_velocity(&op, &g, &b2, &ProjectionParams::default()).unwrap();
        let mut diff = v1.v.clone();
        axpy(&mut diff, -1.0, &v2.v);
        assert!(op.h_norm(&diff) <= 1e-6, "order dependence {}", op.h_norm(&diff));
    }

    #[test]
    fn consistent_dependent_constraints_do_not_warn() {
        let (grid, op) = setup(16);
        let mu = rand_field(grid, 139);
        let two_mu = scaled(&mu, 2.0);
        // dependent and consistent: C₂ = 2 C₁
        let bundle = orthogonalise(&op, vec![mu.clone(), two_mu.clone()], vec![0.1, 0.2], 1e-4).unwrap();
        let g = rand_field(grid, 149);
        let vr = compute_velocity(&op, &g, &bundle, &ProjectionParams::default()).unwrap();
        assert!(vr.inconsistent.is_empty());
        // inconsistent: C₂ ≠ 2 C₁ by a wide margin
        let bundle = orthogonalise(&op, vec![mu, two_mu], vec![0.1, -0.3], 1e-4).unwrap();
        let vr = compute_velocity(&op, &g, &bundle, &ProjectionParams::default()).unwrap();
        assert_eq!(vr.inconsistent, vec![1]);
    }

    #[test]
    fn descent_direction_when_feasible() {
        let (grid, op) = setup(16);
        let mus: Vec<MultiField> = (0..2).map(|k| rand_field(grid, 151 + k)).collect();
        let g = rand_field(grid, 157);
        let bundle = orthogonalise(&op, mus, vec![0.0, 0.0], 1e-4).unwrap();
        let vr = compute_velocity(&op, &g, &bundle, &ProjectionParams::default()).unwrap();
        let descent = op.h_inner(&g, &vr.v).unwrap();
        assert!(descent >= 0.0);
        assert!((descent - vr.pg_norm).abs() <= 1e-8 * vr.pg_norm);
    }
}
