//! Symmetric stiffness tensors in Voigt form.
//!
//! Convention (fixed for the whole crate): strain vectors use engineering
//! shear, `e = [ε₁₁, ε₂₂, 2ε₁₂]` in 2D, and the Voigt matrix is arranged so
//! that the energy density is `½ eᵀ C e`. Under this convention the Voigt
//! entries of a stiffness matrix equal the tensor components directly, e.g.
//! `C₁₂₁₂ = voigt(2,2)` and `C₁₁₁₂ = voigt(0,2)` in 2D — no factors of two
//! appear on the stiffness side (they would on the compliance side).

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PlanarMode {
    PlaneStress,
    PlaneStrain,
}

/// Fourth-order elasticity tensor with minor and major symmetries, stored as
/// a symmetric Voigt matrix (3×3 for d=2, 6×6 for d=3).
#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessTensor {
    dim: usize,
    v: [[f64; 6]; 6],
}

impl StiffnessTensor {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            v: [[0.0; 6]; 6],
        }
    }

    pub fn from_voigt_2d(m: [[f64; 3]; 3]) -> Self {
        let mut v = [[0.0; 6]; 6];
        for a in 0..3 {
            for b in 0..3 {
                v[a][b] = m[a][b];
            }
        }
        Self { dim: 2, v }
    }

    /// Spatial dimension (2 or 3).
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Size of the Voigt matrix (3 in 2D, 6 in 3D).
    #[inline]
    pub fn size(&self) -> usize {
        if self.dim == 2 {
            3
        } else {
            6
        }
    }

    #[inline]
    pub fn voigt(&self, a: usize, b: usize) -> f64 {
        self.v[a][b]
    }

    #[inline]
    pub fn set_voigt(&mut self, a: usize, b: usize, val: f64) {
        self.v[a][b] = val;
        self.v[b][a] = val;
    }

    /// 3×3 Voigt block for 2D assembly kernels.
    #[inline]
    pub fn voigt3(&self) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] = self.v[a][b];
            }
        }
        m
    }

    /// Voigt index of a tensor index pair (1-based, as in `C₁₁₂₂`).
    ///
    /// 2D: (1,1)→0, (2,2)→1, (1,2)=(2,1)→2.
    pub fn voigt_index_2d(i: usize, j: usize) -> Result<usize> {
        match (i, j) {
            (1, 1) => Ok(0),
            (2, 2) => Ok(1),
            (1, 2) | (2, 1) => Ok(2),
            _ => Err(Error::Parameter(format!("bad 2D tensor index pair ({i},{j})"))),
        }
    }

    /// Tensor component `C_ijkl` (1-based indices) from the Voigt matrix.
    pub fn component_2d(&self, i: usize, j: usize, k: usize, l: usize) -> Result<f64> {
        let a = Self::voigt_index_2d(i, j)?;
        let b = Self::voigt_index_2d(k, l)?;
        Ok(self.v[a][b])
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for a in 0..6 {
            for b in 0..6 {
                out.v[a][b] *= s;
            }
        }
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let s = self.size();
        for a in 0..s {
            for b in (a + 1)..s {
                if (self.v[a][b] - self.v[b][a]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn max_abs(&self) -> f64 {
        let s = self.size();
        let mut m: f64 = 0.0;
        for a in 0..s {
            for b in 0..s {
                m = m.max(self.v[a][b].abs());
            }
        }
        m
    }

    /// Smallest eigenvalue of the (symmetric) Voigt matrix, by cyclic Jacobi.
    pub fn min_eigenvalue(&self) -> f64 {
        let s = self.size();
        let mut m = [[0.0f64; 6]; 6];
        for a in 0..s {
            for b in 0..s {
                m[a][b] = 0.5 * (self.v[a][b] + self.v[b][a]);
            }
        }
        for _sweep in 0..50 {
            let mut off = 0.0;
            for p in 0..s {
                for q in (p + 1)..s {
                    off += m[p][q] * m[p][q];
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..s {
                for q in (p + 1)..s {
                    if m[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = 0.5 * (m[q][q] - m[p][p]) / m[p][q];
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let sn = t * c;
                    for k in 0..s {
                        let (mkp, mkq) = (m[k][p], m[k][q]);
                        m[k][p] = c * mkp - sn * mkq;
                        m[k][q] = sn * mkp + c * mkq;
                    }
                    for k in 0..s {
                        let (mpk, mqk) = (m[p][k], m[q][k]);
                        m[p][k] = c * mpk - sn * mqk;
                        m[q][k] = sn * mpk + c * mqk;
                    }
                }
            }
        }
        (0..s).map(|a| m[a][a]).fold(f64::INFINITY, f64::min)
    }
}

/// Isotropic stiffness tensor for Young's modulus `e` and Poisson ratio `nu`.
///
/// `mode` selects the planar assumption in 2D and is ignored in 3D.
pub fn isotropic_tensor(e: f64, nu: f64, dim: usize, mode: PlanarMode) -> Result<StiffnessTensor> {
    if e <= 0.0 {
        return Err(Error::Parameter(format!("Young's modulus must be positive, got {e}")));
    }
    if !(-1.0 < nu && nu < 0.5) {
        return Err(Error::Parameter(format!(
            "Poisson ratio must lie in (-1, 0.5), got {nu}"
        )));
    }
    let mu = e / (2.0 * (1.0 + nu));
    let mut t = StiffnessTensor::zero(dim);
    match dim {
        2 => {
            let (c11, c12) = match mode {
                PlanarMode::PlaneStress => {
                    let f = e / (1.0 - nu * nu);
                    (f, f * nu)
                }
                PlanarMode::PlaneStrain => {
                    let f = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
                    (f * (1.0 - nu), f * nu)
                }
            };
            t.set_voigt(0, 0, c11);
            t.set_voigt(1, 1, c11);
            t.set_voigt(0, 1, c12);
            t.set_voigt(2, 2, mu);
        }
        3 => {
            let lam = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
            for a in 0..3 {
                t.set_voigt(a, a, lam + 2.0 * mu);
                t.set_voigt(a + 3, a + 3, mu);
            }
            t.set_voigt(0, 1, lam);
            t.set_voigt(0, 2, lam);
            t.set_voigt(1, 2, lam);
        }
        _ => return Err(Error::Parameter(format!("dimension must be 2 or 3, got {dim}"))),
    }
    Ok(t)
}
