use cellopt::driver::*;
use cellopt::functionals::*;

fn trace(tag: &str, preset: Preset, method: Method, max_q: usize) {
    let t0 = std::time::Instant::now();
    let mut cfg = RunConfig::for_preset(preset, 100);
    cfg.method = method;
    cfg.q_max = max_q;
    let mut run = match Run::new(cfg) {
        Ok(r) => r,
        Err(e) => { println!("[{tag}] INIT ERROR {e}"); return; }
    };
    loop {
        match run.step() {
            Ok(st) => {
                let r = run.history().last().cloned();
                if let Some(r) = r {
                    if r.iter % 20 == 0 || st != Status::Running {
                        let maxc = r.constraints.iter().fold(0.0f64, |m, c| m.max(c.abs()));
                        println!("[{tag}] q={:3} J={:+.5} max|C|={:.6} gamma={:.4}", r.iter, r.j, maxc, r.gamma);
                    }
                }
                if st != Status::Running {
                    let cbar = run.cbar();
                    println!("[{tag}] {:?} iters={} kappa={:.5} nu={:+.4} vol_obj={:.4} C={:?} {:.0}s",
                        st, run.iteration(), bulk_modulus(&cbar),
                        poisson_ratio(&cbar).unwrap_or(f64::NAN),
                        run.objective(),
                        run.residuals().iter().map(|c| format!("{c:+.1e}")).collect::<Vec<_>>(),
                        t0.elapsed().as_secs_f64());
                    break;
                }
            }
            Err(e) => { println!("[{tag}] ERROR at q={}: {e}", run.iteration()); break; }
        }
    }
}

#[test] fn dbg_measure() { trace("measure", Preset::Bulk2dIsoMeasure, Method::Projection, 400); }
#[test] fn dbg_auxetic() { trace("auxetic", Preset::Auxetic2d, Method::Projection, 400); }
#[test] fn dbg_mp() { trace("mp", Preset::Multiphase2d, Method::Projection, 400); }
#[test] fn dbg_mp_iso() { trace("mp_iso", Preset::Multiphase2dIso, Method::Projection, 400); }
#[test] fn dbg_slp() { trace("slp", Preset::Bulk2d, Method::Slp, 400); }
