//! Sequential linear programming baseline.
//!
//! The velocity is sought as `v = λ₀ g + Σ λ_i μ_i`. The coefficients solve
//! the linearised subproblem
//!
//! ```text
//! max  λ₀ ‖g‖² + Σ λ_i ⟨g, μ_i⟩          (= ⟨g, v⟩, best first-order descent)
//! s.t. ⟨μ_i, v⟩ = λ_rate C_i             (linearised constraint decrease)
//!      |λ_i| ≤ Δx / (2‖μ_i‖),  |λ₀| ≤ Δx / (2‖g‖)
//! ```
//!
//! solved with a small dense two-phase simplex. When the trust boxes make
//! the equalities infeasible they are relaxed: a ridge least-squares
//! solution is clipped into the box and the attainable right-hand side is
//! re-solved exactly (the "polish" step), so the baseline degrades
//! gracefully instead of crashing on hard subproblems.

use crate::hilbertian::ExtensionOperator;
use crate::projection::MultiField;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SlpParams {
    /// Constraint decrease rate, shared with the projection method.
    pub lambda_rate: f64,
    pub dx: f64,
}

#[derive(Debug, Clone)]
pub struct SlpStep {
    /// `λ₀` followed by one coefficient per constraint.
    pub lambdas: Vec<f64>,
    /// Trust bound for each coefficient (same ordering).
    pub trust: Vec<f64>,
    /// The equality system was infeasible under the boxes and was relaxed.
    pub relaxed: bool,
}

#[derive(Debug, Clone)]
pub struct SlpResult {
    pub v: MultiField,
    pub step: SlpStep,
    pub stationary: bool,
}

const TINY_NORM: f64 = 1e-12;

pub fn slp_velocity(
    op: &ExtensionOperator,
    g: &MultiField,
    mus: &[MultiField],
    values: &[f64],
    params: &SlpParams,
) -> Result<SlpResult> {
    if mus.len() != values.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} sensitivities for {} constraint values",
            mus.len(),
            values.len()
        )));
    }
    let n = mus.len();
    let g_norm = op.h_norm(g);
    let mu_norms: Vec<f64> = mus.iter().map(|m| op.h_norm(m)).collect();
    if g_norm < TINY_NORM && mu_norms.iter().all(|&x| x < TINY_NORM) {
        return Ok(SlpResult {
            v: g.clone(),
            step: SlpStep {
                lambdas: vec![0.0; n + 1],
                trust: vec![0.0; n + 1],
                relaxed: false,
            },
            stationary: true,
        });
    }

    // trust boxes; a vanished sensitivity gets a zero box (coefficient pinned)
    let mut trust = Vec::with_capacity(n + 1);
    trust.push(if g_norm < TINY_NORM {
        0.0
    } else {
        params.dx / (2.0 * g_norm)
    });
    for &nm in &mu_norms {
        trust.push(if nm < TINY_NORM { 0.0 } else { params.dx / (2.0 * nm) });
    }

    // objective and equality coefficients in terms of λ = (λ₀, λ_1..λ_N)
    let mut c = Vec::with_capacity(n + 1);
    c.push(g_norm * g_norm);
    for mu in mus {
        c.push(op.h_inner(g, mu)?);
    }
    let mut m = vec![vec![0.0; n + 1]; n];
    let mut r = vec![0.0; n];
    for i in 0..n {
        m[i][0] = op.h_inner(&mus[i], g)?;
        for j in 0..n {
            m[i][j + 1] = op.h_inner(&mus[i], &mus[j])?;
        }
        r[i] = params.lambda_rate * values[i];
    }

    let (lambdas, relaxed) = solve_box_lp(&m, &r, &c, &trust);
    debug_assert!(lambdas
        .iter()
        .zip(&trust)
        .all(|(l, t)| l.abs() <= t + 1e-9 * (1.0 + t)));

    let mut v: MultiField = g.iter().map(|f| {
        let mut out = f.clone();
        out.scale(lambdas[0]);
        out
    }).collect();
    for (i, mu) in mus.iter().enumerate() {
        for (vc, mc) in v.iter_mut().zip(mu) {
            vc.axpy(lambdas[i + 1], mc);
        }
    }
    Ok(SlpResult {
        v,
        step: SlpStep {
            lambdas,
            trust,
            relaxed,
        },
        stationary: false,
    })
}

/// `max cᵀλ  s.t.  Mλ = r, |λ_j| ≤ u_j`. Returns the coefficients and a flag
/// marking the soft-relaxation path.
fn solve_box_lp(m: &[Vec<f64>], r: &[f64], c: &[f64], u: &[f64]) -> (Vec<f64>, bool) {
    let nv = c.len();
    let neq = m.len();

    if neq == 0 {
        // unconstrained LP over a box: optimum at the corner along sign(c)
        let lam: Vec<f64> = (0..nv).map(|j| c[j].signum() * u[j]).collect();
        return (lam, false);
    }

    // shift λ = x − u so 0 ≤ x ≤ 2u, then the standard-form system is
    //   [M 0; I I] [x; s] = [r + M u; 2u]
    let mut a = vec![vec![0.0; 2 * nv]; neq + nv];
    let mut b = vec![0.0; neq + nv];
    for i in 0..neq {
        for j in 0..nv {
            a[i][j] = m[i][j];
        }
        b[i] = r[i] + (0..nv).map(|j| m[i][j] * u[j]).sum::<f64>();
    }
    for j in 0..nv {
        a[neq + j][j] = 1.0;
        a[neq + j][nv + j] = 1.0;
        b[neq + j] = 2.0 * u[j];
    }
    let mut cost = vec![0.0; 2 * nv];
    cost[..nv].copy_from_slice(c);

    if let Some(x) = two_phase_simplex(&a, &b, &cost) {
        let lam: Vec<f64> = (0..nv).map(|j| x[j] - u[j]).collect();
        return (lam, false);
    }

    // soft relaxation: ridge least squares, clipped into the box
    let lam_ls = ridge_least_squares(m, r, u);
    let clipped: Vec<f64> = lam_ls
        .iter()
        .zip(u)
        .map(|(&l, &uj)| l.clamp(-uj, uj))
        .collect();
    // polish: the attainable right-hand side M·λ_clip is feasible by
    // construction, so re-run the LP against it to recover optimality in the
    // remaining degrees of freedom
    let r_attained: Vec<f64> = (0..neq)
        .map(|i| (0..nv).map(|j| m[i][j] * clipped[j]).sum())
        .collect();
    let mut b2 = vec![0.0; neq + nv];
    for i in 0..neq {
        b2[i] = r_attained[i] + (0..nv).map(|j| m[i][j] * u[j]).sum::<f64>();
    }
    for j in 0..nv {
        b2[neq + j] = 2.0 * u[j];
    }
    if let Some(x) = two_phase_simplex(&a, &b2, &cost) {
        return ((0..nv).map(|j| x[j] - u[j]).collect(), true);
    }
    (clipped, true)
}

fn ridge_least_squares(m: &[Vec<f64>], r: &[f64], u: &[f64]) -> Vec<f64> {
    let nv = u.len();
    let neq = m.len();
    let mut scale: f64 = 0.0;
    let mut normal = vec![vec![0.0; nv]; nv];
    let mut rhs = vec![0.0; nv];
    for i in 0..nv {
        for j in 0..nv {
            let mut acc = 0.0;
            for k in 0..neq {
                acc += m[k][i] * m[k][j];
            }
            normal[i][j] = acc;
            if i == j {
                scale = scale.max(acc.abs());
            }
        }
        rhs[i] = (0..neq).map(|k| m[k][i] * r[k]).sum();
    }
    let ridge = 1e-10 * scale.max(1e-30);
    for i in 0..nv {
        normal[i][i] += ridge;
    }
    solve_dense(&mut normal, &mut rhs);
    rhs
}

/// Gaussian elimination with partial pivoting; solution overwrites `b`.
fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        for row in (col + 1)..n {
            if a[row][col].abs() > a[piv][col].abs() {
                piv = row;
            }
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        if d.abs() < 1e-300 {
            continue;
        }
        for row in (col + 1)..n {
            let f = a[row][col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let d = a[col][col];
        if d.abs() < 1e-300 {
            b[col] = 0.0;
            continue;
        }
        let mut acc = b[col];
        for k in (col + 1)..n {
            acc -= a[col][k] * b[k];
        }
        b[col] = acc / d;
    }
}

/// Dense two-phase tableau simplex with Bland's rule for
/// `max cᵀx s.t. Ax = b, x ≥ 0`. Returns `None` when infeasible.
fn two_phase_simplex(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<Vec<f64>> {
    let m = a.len();
    let n = c.len();
    let total = n + m; // originals + artificials
    const TOL: f64 = 1e-9;

    // tableau rows: [coefficients | rhs], one artificial per row
    let mut t = vec![vec![0.0; total + 1]; m];
    let mut basis = vec![0usize; m];
    for i in 0..m {
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = flip * a[i][j];
        }
        t[i][n + i] = 1.0;
        t[i][total] = flip * b[i];
        basis[i] = n + i;
    }

    let pivot = |t: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, row: usize, col: usize| {
        let d = t[row][col];
        for v in t[row].iter_mut() {
            *v /= d;
        }
        for i in 0..t.len() {
            if i != row && t[i][col].abs() > 0.0 {
                let f = t[i][col];
                for j in 0..=total {
                    let sub = f * t[row][j];
                    t[i][j] -= sub;
                }
            }
        }
        basis[row] = col;
    };

    // generic phase: maximise obj over allowed columns
    let run_phase = |t: &mut Vec<Vec<f64>>,
                     basis: &mut Vec<usize>,
                     obj: &[f64],
                     allowed: usize|
     -> f64 {
        loop {
            // reduced costs z_j − c_j via the current basis
            let mut entering = None;
            for j in 0..allowed {
                if basis.contains(&j) {
                    continue;
                }
                let mut red = -obj[j];
                for i in 0..t.len() {
                    red += obj[basis[i]] * t[i][j];
                }
                if red < -TOL {
                    entering = Some(j); // Bland: first improving index
                    break;
                }
            }
            let Some(col) = entering else {
                let mut val = 0.0;
                for i in 0..t.len() {
                    val += obj[basis[i]] * t[i][total];
                }
                return val;
            };
            // ratio test, Bland tie-break on the leaving basic index
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..t.len() {
                if t[i][col] > TOL {
                    let ratio = t[i][total] / t[i][col];
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12
                                || ((ratio - lr).abs() <= 1e-12 && basis[i] < basis[li])
                            {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((row, _)) = leave else {
                // unbounded: cannot happen with the box rows present, but
                // bail out rather than loop
                return f64::INFINITY;
            };
            pivot(t, basis, row, col);
        }
    };

    // phase 1: maximise −Σ artificials
    let mut phase1_obj = vec![0.0; total];
    for j in n..total {
        phase1_obj[j] = -1.0;
    }
    let p1 = run_phase(&mut t, &mut basis, &phase1_obj, total);
    if p1 < -1e-7 || !p1.is_finite() {
        return None;
    }
    // drive leftover zero-level artificials out where possible
    for i in 0..m {
        if basis[i] >= n {
            if let Some(col) = (0..n).find(|&j| t[i][j].abs() > TOL) {
                pivot(&mut t, &mut basis, i, col);
            }
        }
    }

    // phase 2 over the original columns only
    let mut phase2_obj = vec![0.0; total];
    phase2_obj[..n].copy_from_slice(c);
    let val = run_phase(&mut t, &mut basis, &phase2_obj, n);
    if !val.is_finite() {
        return None;
    }

    let mut x = vec![0.0; n];
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] = t[i][total];
        }
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{NodalField, PeriodicGrid};

    fn setup() -> (PeriodicGrid, ExtensionOperator) {
        let grid = PeriodicGrid::new(16).unwrap();
        let op = ExtensionOperator::new(grid, 4.0 * grid.dx()).unwrap();
        (grid, op)
    }

    fn rand_field(grid: PeriodicGrid, seed: u64) -> MultiField {
        let mut s = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(7);
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        vec![NodalField::from_values(grid, (0..grid.num_nodes()).map(|_| next()).collect()).unwrap()]
    }

    #[test]
    fn simplex_solves_known_lp() {
        // max x + 2y s.t. x + y = 1, x,y ≥ 0 → (0, 1), value 2
        let a = vec![vec![1.0, 1.0]];
        let b = vec![1.0];
        let c = vec![1.0, 2.0];
        let x = two_phase_simplex(&a, &b, &c).unwrap();
        assert!((x[0] - 0.0).abs() < 1e-9);
        assert!((x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn simplex_detects_infeasible() {
        // x + y = -1 with x,y ≥ 0
        let a = vec![vec![1.0, 1.0]];
        let b = vec![-1.0];
        let c = vec![1.0, 0.0];
        assert!(two_phase_simplex(&a, &b, &c).is_none());
    }

    #[test]
    fn no_constraints_gives_trust_bound_gradient_step() {
        let (_, op) = setup();
        let g = rand_field(op.grid(), 3);
        let params = SlpParams { lambda_rate: 0.5, dx: op.grid().dx() };
        let out = slp_velocity(&op, &g, &[], &[], &params).unwrap();
        assert!(!out.stationary);
        let expect = params.dx / (2.0 * op.h_norm(&g));
        assert!((out.step.lambdas[0] - expect).abs() < 1e-12);
        // v ∝ g with positive coefficient
        let cos = op.h_inner(&out.v, &g).unwrap() / (op.h_norm(&out.v) * op.h_norm(&g));
        assert!((cos - 1.0).abs() < 1e-10);
    }

    #[test]
    fn satisfied_orthogonal_constraints_leave_pure_gradient() {
        let (grid, op) = setup();
        let g = rand_field(grid, 5);
        let mut mu = rand_field(grid, 9);
        let proj = op.h_inner(&g, &mu).unwrap() / op.h_norm(&g).powi(2);
        for (m, gg) in mu.iter_mut().zip(&g) {
            m.axpy(-proj, gg);
        }
        let params = SlpParams { lambda_rate: 0.5, dx: grid.dx() };
        let out = slp_velocity(&op, &g, &[mu.clone()], &[0.0], &params).unwrap();
        assert!(out.step.lambdas[1].abs() < 1e-9, "λ₁ = {}", out.step.lambdas[1]);
        assert!(out.step.lambdas[0] > 0.0);
    }

    #[test]
    fn equality_rate_satisfied_when_feasible() {
        let (grid, op) = setup();
        let g = rand_field(grid, 11);
        let mus = vec![rand_field(grid, 13), rand_field(grid, 17)];
        // small residuals keep the equalities inside the trust box
        let values = vec![1e-4, -2e-4];
        let params = SlpParams { lambda_rate: 0.5, dx: grid.dx() };
        let out = slp_velocity(&op, &g, &mus, &values, &params).unwrap();
        assert!(!out.step.relaxed);
        for (i, mu) in mus.iter().enumerate() {
            let got = op.h_inner(mu, &out.v).unwrap();
            assert!(
                (got - 0.5 * values[i]).abs() <= 1e-7,
                "⟨μ,v⟩ = {got} vs {}",
                0.5 * values[i]
            );
        }
    }

    #[test]
    fn infeasible_equalities_relax_but_respect_trust() {
        let (grid, op) = setup();
        let g = rand_field(grid, 19);
        let mus = vec![rand_field(grid, 23)];
        // huge residual that the box cannot reach
        let values = vec![50.0];
        let params = SlpParams { lambda_rate: 0.5, dx: grid.dx() };
        let out = slp_velocity(&op, &g, &mus, &values, &params).unwrap();
        assert!(out.step.relaxed);
        for (l, t) in out.step.lambdas.iter().zip(&out.step.trust) {
            assert!(l.abs() <= t + 1e-9);
        }
    }

    #[test]
    fn all_zero_sensitivities_signal_stationary() {
        let (grid, op) = setup();
        let zero = vec![NodalField::zeros(grid)];
        let params = SlpParams { lambda_rate: 0.5, dx: grid.dx() };
        let out = slp_velocity(&op, &zero, &[zero.clone()], &[0.0], &params).unwrap();
        assert!(out.stationary);
    }
}
