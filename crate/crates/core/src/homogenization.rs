//! Periodic linear-elasticity cell problems and homogenised stiffness.
//!
//! For each unique macroscopic strain `ε̄^(kl)` (three in 2D) the fluctuation
//! displacement solves
//!
//! ```text
//! ∫_D C ε(ũ^(kl)) : ε(v) dΩ  =  −∫_D C ε̄^(kl) : ε(v) dΩ   ∀ v periodic,
//! ```
//!
//! discretised with bilinear quads and 2×2 Gauss quadrature. Rigid-body
//! translations are removed by pinning both displacement components of node
//! (0,0); the mean of the fluctuation is irrelevant to strains. The
//! homogenised tensor follows from
//! `C̄_ijkl = ∫_D C (ε(ũ^(ij)) + ε̄^(ij)) : ε̄^(kl) dΩ` with `Vol(D) = 1`.

use crate::fem::ElementBasis;
use crate::grid::PeriodicGrid;
use crate::linalg::{pcg, CsrMatrix, SolveStats};
use crate::material::MaterialField;
use crate::tensor::StiffnessTensor;
use crate::Result;

/// Default relative residual for the cell solves.
pub const CELL_SOLVE_RTOL: f64 = 1e-10;
pub const CELL_SOLVE_MAX_ITER: usize = 40_000;
/// Absolute residual floor: balanced loads (uniform cells) assemble to
/// round-off noise and should return zero fluctuations immediately.
pub const CELL_SOLVE_ATOL: f64 = 1e-13;

/// Unit macroscopic strains in engineering Voigt form
/// (`ε̄^(12)` has `2ε₁₂ = 1`).
pub const MACRO_STRAINS: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[derive(Debug, Clone)]
pub struct CellSolution {
    grid: PeriodicGrid,
    /// Fluctuation displacement dof vectors (2 per node), one per load case.
    pub fluctuations: [Vec<f64>; 3],
    pub stats: [SolveStats; 3],
    /// Total strain (fluctuation + macroscopic) at each Gauss point of each
    /// element, one field per load case.
    total_strain: [Vec<[[f64; 3]; 4]>; 3],
}

impl CellSolution {
    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn macro_strain(load: usize) -> [f64; 3] {
        MACRO_STRAINS[load]
    }

    /// Total strain sampler for one load case: `strain(e)[g]` is the
    /// engineering strain vector at Gauss point `g` of element `e`.
    pub fn total_strain(&self, load: usize) -> &[[[f64; 3]; 4]] {
        &self.total_strain[load]
    }
}

/// Sparsity pattern of the periodic vector Laplacian/elasticity operator:
/// every dof couples with the 18 dofs of the 3×3 node neighbourhood.
fn elastic_pattern(grid: PeriodicGrid) -> CsrMatrix {
    let n = grid.n() as i64;
    let mut rows: Vec<Vec<usize>> = Vec::with_capacity(2 * grid.num_nodes());
    for j in 0..n {
        for i in 0..n {
            let mut neigh = Vec::with_capacity(18);
            for dj in -1..=1 {
                for di in -1..=1 {
                    let node = grid.node(i + di, j + dj);
                    neigh.push(2 * node);
                    neigh.push(2 * node + 1);
                }
            }
            neigh.sort_unstable();
            neigh.dedup();
            rows.push(neigh.clone());
            rows.push(neigh);
        }
    }
    CsrMatrix::from_pattern(rows)
}

fn element_dofs(grid: PeriodicGrid, ei: usize, ej: usize) -> [usize; 8] {
    let nodes = grid.element_nodes(ei, ej);
    std::array::from_fn(|k| {
        let node = nodes[k / 2];
        2 * node + (k % 2)
    })
}

/// Assemble the global stiffness matrix and the three load vectors.
fn assemble(mat: &MaterialField, basis: &ElementBasis) -> (CsrMatrix, [Vec<f64>; 3]) {
    let grid = mat.grid();
    let n = grid.n();
    let ndof = 2 * grid.num_nodes();
    let mut k = elastic_pattern(grid);
    let mut rhs = [vec![0.0; ndof], vec![0.0; ndof], vec![0.0; ndof]];

    // Per base tensor and Gauss point: jw·BᵀCB (8×8) and jw·BᵀC ε̄ᵃ (8×3).
    let nb = mat.bases().len();
    let mut ke_base = vec![[[[0.0f64; 8]; 8]; 4]; nb];
    let mut fe_base = vec![[[[0.0f64; 8]; 3]; 4]; nb];
    for (kb, base) in mat.bases().iter().enumerate() {
        let c = base.voigt3();
        for g in 0..4 {
            let b = basis.b_matrix(g);
            // cb = C·B (3×8)
            let mut cb = [[0.0; 8]; 3];
            for r in 0..3 {
                for col in 0..8 {
                    cb[r][col] = (0..3).map(|s| c[r][s] * b[s][col]).sum();
                }
            }
            for p in 0..8 {
                for q in 0..8 {
                    ke_base[kb][g][p][q] = basis.jw * (0..3).map(|r| b[r][p] * cb[r][q]).sum::<f64>();
                }
            }
            for (a, macro_e) in MACRO_STRAINS.iter().enumerate() {
                for p in 0..8 {
                    let mut acc = 0.0;
                    for r in 0..3 {
                        for s in 0..3 {
                            acc += b[r][p] * c[r][s] * macro_e[s];
                        }
                    }
                    fe_base[kb][g][a][p] = basis.jw * acc;
                }
            }
        }
    }

    let weights = mat.weights();
    for ej in 0..n {
        for ei in 0..n {
            let e = ej * n + ei;
            let dofs = element_dofs(grid, ei, ej);
            let mut ke = [[0.0f64; 8]; 8];
            let mut fe = [[0.0f64; 8]; 3];
            for kb in 0..nb {
                let w = &weights[kb][e];
                for g in 0..4 {
                    let wg = w[g];
                    if wg == 0.0 {
                        continue;
                    }
                    let kbg = &ke_base[kb][g];
                    for p in 0..8 {
                        let row = &kbg[p];
                        for q in 0..8 {
                            ke[p][q] += wg * row[q];
                        }
                    }
                    for a in 0..3 {
                        for p in 0..8 {
                            fe[a][p] -= wg * fe_base[kb][g][a][p];
                        }
                    }
                }
            }
            for p in 0..8 {
                for q in 0..8 {
                    k.add(dofs[p], dofs[q], ke[p][q]);
                }
                for a in 0..3 {
                    rhs[a][dofs[p]] += fe[a][p];
                }
            }
        }
    }
    (k, rhs)
}

/// Solve the three cell problems. `warm` supplies initial guesses (e.g. the
/// solution at the previous optimisation iterate).
pub fn solve_cell_problems(
    mat: &MaterialField,
    warm: Option<&CellSolution>,
    rtol: f64,
) -> Result<CellSolution> {
    let grid = mat.grid();
    let basis = ElementBasis::new(grid);
    let (mut k, mut rhs) = assemble(mat, &basis);
    // gauge: pin both components of node (0,0)
    k.pin_dof(0);
    k.pin_dof(1);

    let ndof = 2 * grid.num_nodes();
    let mut fluctuations: [Vec<f64>; 3] = [vec![0.0; ndof], vec![0.0; ndof], vec![0.0; ndof]];
    let mut stats = [SolveStats {
        iterations: 0,
        rel_residual: 0.0,
    }; 3];
    for a in 0..3 {
        rhs[a][0] = 0.0;
        rhs[a][1] = 0.0;
        if let Some(prev) = warm {
            if prev.grid == grid {
                fluctuations[a].copy_from_slice(&prev.fluctuations[a]);
                fluctuations[a][0] = 0.0;
                fluctuations[a][1] = 0.0;
            }
        }
        stats[a] = pcg(&k, &rhs[a], &mut fluctuations[a], rtol, CELL_SOLVE_ATOL, CELL_SOLVE_MAX_ITER)?;
    }

    let total_strain = std::array::from_fn(|a| strain_field(grid, &basis, &fluctuations[a], a));
    Ok(CellSolution {
        grid,
        fluctuations,
        stats,
        total_strain,
    })
}

fn strain_field(
    grid: PeriodicGrid,
    basis: &ElementBasis,
    u: &[f64],
    load: usize,
) -> Vec<[[f64; 3]; 4]> {
    let n = grid.n();
    let macro_e = MACRO_STRAINS[load];
    let mut out = Vec::with_capacity(grid.num_elements());
    for ej in 0..n {
        for ei in 0..n {
            let dofs = element_dofs(grid, ei, ej);
            let ue: [f64; 8] = std::array::from_fn(|k| u[dofs[k]]);
            let mut per_gauss = [[0.0; 3]; 4];
            for g in 0..4 {
                let b = basis.b_matrix(g);
                for r in 0..3 {
                    per_gauss[g][r] = macro_e[r] + (0..8).map(|p| b[r][p] * ue[p]).sum::<f64>();
                }
            }
            out.push(per_gauss);
        }
    }
    out
}

/// `C̄[a][b] = ∫ (ε(ũᵃ)+ε̄ᵃ)ᵀ C ε̄ᵇ dΩ`
pub fn homogenised_tensor(sol: &CellSolution, mat: &MaterialField) -> StiffnessTensor {
    contract(sol, mat, false)
}

/// Symmetric energy form `∫ (ε(ũᵃ)+ε̄ᵃ)ᵀ C (ε(ũᵇ)+ε̄ᵇ) dΩ`. Equal to
/// [`homogenised_tensor`] by self-adjointness; used as a regression oracle.
pub fn homogenised_tensor_energy(sol: &CellSolution, mat: &MaterialField) -> StiffnessTensor {
    contract(sol, mat, true)
}

fn contract(sol: &CellSolution, mat: &MaterialField, energy_form: bool) -> StiffnessTensor {
    let grid = sol.grid;
    let basis = ElementBasis::new(grid);
    let ne = grid.num_elements();
    let mut m = [[0.0f64; 3]; 3];
    for e in 0..ne {
        for g in 0..4 {
            let c = mat.tensor_at(e, g);
            for a in 0..3 {
                let ea = &sol.total_strain[a][e][g];
                for b in 0..3 {
                    let eb: [f64; 3] = if energy_form {
                        sol.total_strain[b][e][g]
                    } else {
                        MACRO_STRAINS[b]
                    };
                    let mut acc = 0.0;
                    for r in 0..3 {
                        for s in 0..3 {
                            acc += ea[r] * c[r][s] * eb[s];
                        }
                    }
                    m[a][b] += basis.jw * acc;
                }
            }
        }
    }
    let mut out = StiffnessTensor::zero(2);
    for a in 0..3 {
        for b in 0..3 {
            out.set_voigt(a, b, 0.5 * (m[a][b] + m[b][a]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::GaussField;
    use crate::tensor::{isotropic_tensor, PlanarMode};

    fn base() -> StiffnessTensor {
        isotropic_tensor(1.0, 0.3, 2, PlanarMode::PlaneStress).unwrap()
    }

    #[test]
    fn uniform_cell_has_zero_fluctuations_and_exact_cbar() {
        let grid = PeriodicGrid::new(16).unwrap();
        let mat = MaterialField::uniform(grid, base());
        let sol = solve_cell_problems(&mat, None, 1e-12).unwrap();
        for a in 0..3 {
            assert!(crate::linalg::norm2(&sol.fluctuations[a]) == 0.0);
        }
        let cbar = homogenised_tensor(&sol, &mat);
        for a in 0..3 {
            for b in 0..3 {
                let expect = base().voigt(a, b);
                let rel = (cbar.voigt(a, b) - expect).abs() / base().max_abs();
                assert!(rel <= 1e-12, "entry ({a},{b}) off by {rel}");
            }
        }
    }

    #[test]
    fn uniform_ersatz_cell_scales_cbar() {
        let grid = PeriodicGrid::new(8).unwrap();
        let eps = 1e-3;
        let mat = MaterialField::uniform(grid, base().scaled(eps));
        let sol = solve_cell_problems(&mat, None, 1e-12).unwrap();
        let cbar = homogenised_tensor(&sol, &mat);
        for a in 0..3 {
            for b in 0..3 {
                assert!((cbar.voigt(a, b) - eps * base().voigt(a, b)).abs() < 1e-14);
            }
        }
    }

    fn laminate_material(grid: PeriodicGrid, eps: f64) -> MaterialField {
        // phase A on x < 1/2, phase B = eps·A on x ≥ 1/2, element-wise sharp
        let n = grid.n();
        let mut wa: GaussField = Vec::with_capacity(grid.num_elements());
        let mut wb: GaussField = Vec::with_capacity(grid.num_elements());
        for ej in 0..n {
            for ei in 0..n {
                let _ = ej;
                let in_a = (ei as f64 + 0.5) * grid.dx() < 0.5;
                wa.push(if in_a { [1.0; 4] } else { [0.0; 4] });
                wb.push(if in_a { [0.0; 4] } else { [1.0; 4] });
            }
        }
        MaterialField::from_parts(grid, vec![base(), base().scaled(eps)], vec![wa, wb]).unwrap()
    }

    /// Closed-form laminate stiffness for layering normal x and proportional
    /// phases (B = eps·A), volume fractions 1/2 each.
    fn laminate_reference(eps: f64) -> [[f64; 3]; 3] {
        let c = base();
        let (c11, c12, c66) = (c.voigt(0, 0), c.voigt(0, 1), c.voigt(2, 2));
        let hm = 2.0 * eps / (1.0 + eps); // harmonic-mean factor for ⟨1/c⟩⁻¹
        let am = 0.5 * (1.0 + eps); // arithmetic-mean factor
        let c1111 = hm * c11;
        let c1122 = (c12 / c11) * c1111;
        let c2222 = am * (c11 - c12 * c12 / c11) + (c12 / c11).powi(2) * c1111;
        let c1212 = hm * c66;
        [
            [c1111, c1122, 0.0],
            [c1122, c2222, 0.0],
            [0.0, 0.0, c1212],
        ]
    }

    #[test]
    fn laminate_matches_series_parallel_closed_forms() {
        let grid = PeriodicGrid::new(64).unwrap();
        let eps = 1e-3;
        let mat = laminate_material(grid, eps);
        let sol = solve_cell_problems(&mat, None, 1e-12).unwrap();
        let cbar = homogenised_tensor(&sol, &mat);
        let reference = laminate_reference(eps);
        for a in 0..3 {
            for b in 0..3 {
                let expect = reference[a][b];
                let got = cbar.voigt(a, b);
                if expect.abs() > 1e-12 {
                    let rel = (got - expect).abs() / expect.abs();
                    assert!(rel <= 0.01, "entry ({a},{b}): got {got}, expected {expect}");
                } else {
                    assert!(got.abs() < 1e-8, "entry ({a},{b}) should vanish, got {got}");
                }
            }
        }
    }

    #[test]
    fn laminate_fluctuation_matches_series_spring_profile() {
        let grid = PeriodicGrid::new(64).unwrap();
        let eps = 1e-3;
        let mat = laminate_material(grid, eps);
        let sol = solve_cell_problems(&mat, None, 1e-13).unwrap();
        // under ε̄^(11): piecewise-constant fluctuation slope, a_A in the stiff
        // layer and −a_A in the soft layer with a_A = (eps−1)/(1+eps)
        let a_slope = (eps - 1.0) / (1.0 + eps);
        let n = grid.n();
        let dx = grid.dx();
        let u = &sol.fluctuations[0];
        let u1 = |i: usize, j: usize| u[2 * (j * n + i)];
        let j = 7;
        for i in 1..(n / 2) {
            let slope = (u1(i, j) - u1(i - 1, j)) / dx;
            assert!(
                (slope - a_slope).abs() < 1e-6,
                "stiff-layer slope {slope} vs {a_slope}"
            );
        }
        for i in (n / 2 + 2)..n {
            let slope = (u1(i, j) - u1(i - 1, j)) / dx;
            assert!(
                (slope + a_slope).abs() < 1e-6,
                "soft-layer slope {slope} vs {}",
                -a_slope
            );
        }
    }

    #[test]
    fn laminate_strain_jump_matches_oracle() {
        let grid = PeriodicGrid::new(32).unwrap();
        let eps = 1e-2;
        let mat = laminate_material(grid, eps);
        let sol = solve_cell_problems(&mat, None, 1e-13).unwrap();
        let strains = sol.total_strain(0);
        // stiff layer total ε₁₁ = 2eps/(1+eps); soft layer 2/(1+eps)
        let stiff = 2.0 * eps / (1.0 + eps);
        let soft = 2.0 / (1.0 + eps);
        let n = grid.n();
        let e_stiff = 4 + 3 * n; // element x-index 4 (stiff), row 3
        let e_soft = (n - 4) + 3 * n;
        for g in 0..4 {
            assert!((strains[e_stiff][g][0] - stiff).abs() < 1e-8);
            assert!((strains[e_soft][g][0] - soft).abs() < 1e-8);
            // total strain stays symmetric by construction: the shear row is
            // the engineering shear, no antisymmetric part exists
            assert!(strains[e_stiff][g][1].abs() < 1e-8);
        }
    }

    #[test]
    fn uniform_total_strain_equals_macro_strain() {
        let grid = PeriodicGrid::new(8).unwrap();
        let mat = MaterialField::uniform(grid, base());
        let sol = solve_cell_problems(&mat, None, 1e-12).unwrap();
        for a in 0..3 {
            for e in 0..grid.num_elements() {
                for g in 0..4 {
                    for r in 0..3 {
                        assert!((sol.total_strain(a)[e][g][r] - MACRO_STRAINS[a][r]).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn asymmetric_and_energy_forms_agree() {
        let grid = PeriodicGrid::new(24).unwrap();
        let mat = laminate_material(grid, 0.05);
        let sol = solve_cell_problems(&mat, None, 1e-12).unwrap();
        let c1 = homogenised_tensor(&sol, &mat);
        let c2 = homogenised_tensor_energy(&sol, &mat);
        for a in 0..3 {
            for b in 0..3 {
                assert!(
                    (c1.voigt(a, b) - c2.voigt(a, b)).abs() <= 1e-9 * c1.max_abs(),
                    "self-adjointness violated at ({a},{b})"
                );
            }
        }
    }
}
