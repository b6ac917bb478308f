//! wasm-bindgen bindings for the browser demo: a stepping optimisation run
//! with live homogenised properties, and a level set transport sandbox.
//!
//! Build with `wasm-pack build --target web crates/wasm` (or cargo +
//! wasm-bindgen-cli) and serve `crates/wasm/www/`.

use wasm_bindgen::prelude::*;

use cellopt::driver::{hs_reference, Method, Preset, Run, RunConfig, Status};
use cellopt::functionals::{
    anisotropy_measure, bulk_modulus, isotropy_residuals_2d, poisson_ratio, shear_modulus_2d,
};
use cellopt::grid::{NodalField, PeriodicGrid};
use cellopt::levelset::{
    advect, reinitialise, smoothed_heaviside, InitialStructure, LevelSetState,
};

fn err_to_js(e: cellopt::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Interactive optimisation run: construct, call `step()` repeatedly, and
/// render `design_rgba()` into an `ImageData` of size `n × n`.
#[wasm_bindgen]
pub struct OptimDemo {
    run: Run,
}

#[wasm_bindgen]
impl OptimDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(preset: &str, n: usize, method: &str) -> Result<OptimDemo, JsValue> {
        let preset = Preset::parse(preset).map_err(err_to_js)?;
        let mut cfg = RunConfig::for_preset(preset, n);
        cfg.method = Method::parse(method).map_err(err_to_js)?;
        let run = Run::new(cfg).map_err(err_to_js)?;
        Ok(OptimDemo { run })
    }

    /// One outer optimisation iteration; returns the status afterwards
    /// ("running" | "converged" | "max_iterations").
    pub fn step(&mut self) -> Result<String, JsValue> {
        let status = self.run.step().map_err(err_to_js)?;
        Ok(status_name(status).to_string())
    }

    pub fn status(&self) -> String {
        status_name(self.run.status()).to_string()
    }

    pub fn iteration(&self) -> u32 {
        self.run.iteration() as u32
    }

    pub fn objective(&self) -> f64 {
        self.run.objective()
    }

    pub fn constraints(&self) -> Vec<f64> {
        self.run.residuals().to_vec()
    }

    pub fn gamma(&self) -> f64 {
        self.run
            .history()
            .last()
            .map(|r| r.gamma)
            .unwrap_or(self.run.config().gamma_max)
    }

    pub fn grid_n(&self) -> u32 {
        self.run.config().n as u32
    }

    pub fn num_level_sets(&self) -> u32 {
        self.run.state().num_level_sets() as u32
    }

    /// Reference bound for the preset's objective, if one is tabulated.
    pub fn reference_bound(&self) -> f64 {
        hs_reference(self.run.config().preset.name()).unwrap_or(f64::NAN)
    }

    /// Level set values of one function, row-major, y fastest ascending.
    pub fn phi(&self, m: usize) -> Vec<f32> {
        self.run.state().phi[m].values().iter().map(|&v| v as f32).collect()
    }

    /// Homogenised properties of the current design as a JSON object.
    pub fn properties_json(&self) -> String {
        let cbar = self.run.cbar();
        let kappa = bulk_modulus(&cbar);
        let mu = shear_modulus_2d(&cbar);
        let nu = poisson_ratio(&cbar).unwrap_or(f64::NAN);
        let abar = isotropy_residuals_2d(&cbar)
            .map(|r| anisotropy_measure(&r))
            .unwrap_or(f64::NAN);
        format!(
            concat!(
                "{{\"kappa\":{:.6},\"mu\":{:.6},\"nu\":{:.6},\"anisotropy\":{:.6},",
                "\"C1111\":{:.6},\"C2222\":{:.6},\"C1122\":{:.6},\"C1212\":{:.6},",
                "\"C1112\":{:.6},\"C2212\":{:.6}}}"
            ),
            kappa,
            mu,
            nu,
            abar,
            cbar.voigt(0, 0),
            cbar.voigt(1, 1),
            cbar.voigt(0, 1),
            cbar.voigt(2, 2),
            cbar.voigt(0, 2),
            cbar.voigt(1, 2),
        )
    }

    /// RGBA rendering of the current design (n × n pixels).
    pub fn design_rgba(&self) -> Vec<u8> {
        render_state(self.run.state())
    }
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Running => "running",
        Status::Converged => "converged",
        Status::MaxIterations => "max_iterations",
    }
}

fn render_state(state: &LevelSetState) -> Vec<u8> {
    let grid = state.grid();
    let n = grid.n();
    let eta = state.eta;
    let mut out = Vec::with_capacity(4 * n * n);
    // colours: solid slate, stiff phase blue, soft phase green, void white
    const SOLID: [f64; 3] = [52.0, 66.0, 89.0];
    const STIFF: [f64; 3] = [43.0, 98.0, 166.0];
    const SOFT: [f64; 3] = [84.0, 158.0, 98.0];
    const VOID: [f64; 3] = [245.0, 246.0, 248.0];
    for j in 0..n {
        for i in 0..n {
            let rgb = if state.num_level_sets() == 1 {
                let h = smoothed_heaviside(state.phi[0].get(i as i64, j as i64), eta);
                lerp3(SOLID, VOID, h)
            } else {
                let g1 = smoothed_heaviside(state.phi[0].get(i as i64, j as i64), eta);
                let g2 = smoothed_heaviside(state.phi[1].get(i as i64, j as i64), eta);
                // colour table: Ω₁,Ω₄ void, Ω₂ stiff, Ω₃ soft
                let w = [
                    (1.0 - g1) * g2,
                    g1 * (1.0 - g2),
                    (1.0 - g1) * (1.0 - g2),
                    g1 * g2,
                ];
                let mut c = [0.0; 3];
                for k in 0..3 {
                    c[k] = w[0] * VOID[k] + w[1] * STIFF[k] + w[2] * SOFT[k] + w[3] * VOID[k];
                }
                c
            };
            out.push(rgb[0] as u8);
            out.push(rgb[1] as u8);
            out.push(rgb[2] as u8);
            out.push(255);
        }
    }
    out
}

fn lerp3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    let t = t.clamp(0.0, 1.0);
    [
        a[0] + (b[0] - a[0]) * t,
        a[1] + (b[1] - a[1]) * t,
        a[2] + (b[2] - a[2]) * t,
    ]
}

/// Level set transport sandbox: a circle under constant normal speed with
/// optional reinitialisation, for exploring the kinematics.
#[wasm_bindgen]
pub struct TransportDemo {
    state: LevelSetState,
}

#[wasm_bindgen]
impl TransportDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, radius: f64) -> Result<TransportDemo, JsValue> {
        let grid = PeriodicGrid::new(n).map_err(err_to_js)?;
        let eta = 1.5 * grid.dx();
        let state = if radius > 0.0 {
            let phi = NodalField::from_fn(grid, |x, y| (x - 0.5).hypot(y - 0.5) - radius);
            LevelSetState::new(vec![phi], eta).map_err(err_to_js)?
        } else {
            cellopt::levelset::initial_structure(
                grid,
                InitialStructure::Holes { m: 2, r: 0.15 },
                eta,
            )
            .map_err(err_to_js)?
        };
        Ok(TransportDemo { state })
    }

    /// Advance the front with a uniform normal speed (sign moves the
    /// interface out of or into the solid).
    pub fn advect(&mut self, speed: f64, gamma: f64) -> Result<(), JsValue> {
        if speed == 0.0 {
            return Ok(());
        }
        let v = vec![NodalField::constant(self.state.grid(), speed)];
        self.state = advect(&self.state, &v, gamma).map_err(err_to_js)?;
        Ok(())
    }

    pub fn reinitialise(&mut self) -> Result<u32, JsValue> {
        let (next, stats) = reinitialise(&self.state, 0.1).map_err(err_to_js)?;
        self.state = next;
        Ok(stats.iterations as u32)
    }

    pub fn grid_n(&self) -> u32 {
        self.state.grid().n() as u32
    }

    pub fn phi(&self) -> Vec<f32> {
        self.state.phi[0].values().iter().map(|&v| v as f32).collect()
    }

    /// Diverging colour rendering of φ with the zero contour emphasised.
    pub fn phi_rgba(&self) -> Vec<u8> {
        let grid = self.state.grid();
        let n = grid.n();
        let phi = &self.state.phi[0];
        let scale = phi.max_abs().max(1e-9);
        let mut out = Vec::with_capacity(4 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v = phi.get(i as i64, j as i64) / scale;
                // negative (solid) blue, positive (void) orange, white at 0
                let rgb = if v < 0.0 {
                    lerp3([255.0, 255.0, 255.0], [38.0, 84.0, 160.0], (-v).min(1.0))
                } else {
                    lerp3([255.0, 255.0, 255.0], [224.0, 123.0, 57.0], v.min(1.0))
                };
                let near_zero = phi.get(i as i64, j as i64).abs() < 0.75 * grid.dx();
                out.push(if near_zero { 30 } else { rgb[0] as u8 });
                out.push(if near_zero { 30 } else { rgb[1] as u8 });
                out.push(if near_zero { 30 } else { rgb[2] as u8 });
                out.push(255);
            }
        }
        out
    }

    /// Max-norm deviation of `|∇φ|` from 1 away from the interface band,
    /// showing what reinitialisation restores.
    pub fn eikonal_deviation(&self) -> f64 {
        let phi = &self.state.phi[0];
        let grid = self.state.grid();
        let band = 2.0 * self.state.eta;
        let mut worst: f64 = 0.0;
        for j in 0..grid.n() as i64 {
            for i in 0..grid.n() as i64 {
                let v = phi.get(i, j);
                if v.abs() < band {
                    continue;
                }
                let dxm = v - phi.get(i - 1, j);
                let dxp = phi.get(i + 1, j) - v;
                let dym = v - phi.get(i, j - 1);
                let dyp = phi.get(i, j + 1) - v;
                if dxm * dxp < 0.0 || dym * dyp < 0.0 {
                    continue; // skeleton kink
                }
                let (gx, gy) = phi.central_gradient(i, j);
                worst = worst.max((gx.hypot(gy) - 1.0).abs());
            }
        }
        worst
    }
}
