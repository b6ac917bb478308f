//! Command line runner.
//!
//! Exit codes: 0 converged, 1 usage/config error, 2 iteration budget
//! exhausted, 3 design collapse.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cellopt::driver::{hs_reference, Method, Preset, Run, RunConfig, Status};
use cellopt::io::{
    emit_history, emit_state_fields, emit_summary, parse_config_file, OutputConfig,
};
use cellopt::Error;

#[derive(Parser)]
#[command(name = "cellopt", about = "Level set topology optimisation of periodic microstructures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an optimisation problem to convergence and emit artifacts.
    Run {
        /// Config file (flat key = value with [problem]/[params]/[output]).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Built-in problem preset (overrides the config's choice).
        #[arg(long)]
        preset: Option<String>,
        /// Velocity strategy: projection | slp.
        #[arg(long)]
        method: Option<String>,
        /// Output directory (default: current directory or config's out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Grid resolution override.
        #[arg(long)]
        n: Option<usize>,
        /// Emit level set snapshots every k accepted iterations (0 = none).
        #[arg(long)]
        snapshot_every: Option<usize>,
        /// Suppress the per-iteration progress lines.
        #[arg(long)]
        quiet: bool,
    },
    /// List the built-in problem presets.
    Presets,
    /// Check a config file without running.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::DesignCollapse(_) => ExitCode::from(3),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn dispatch(cli: Cli) -> cellopt::Result<ExitCode> {
    match cli.command {
        Command::Presets => {
            for p in Preset::ALL {
                println!("{}", p.name());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config } => {
            let (cfg, _) = parse_config_file(&config)?;
            println!(
                "ok: preset {} at n = {} ({} method)",
                cfg.preset.name(),
                cfg.n,
                match cfg.method {
                    Method::Projection => "projection",
                    Method::Slp => "slp",
                }
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            config,
            preset,
            method,
            out,
            n,
            snapshot_every,
            quiet,
        } => {
            let (mut cfg, mut out_cfg) = match config {
                Some(path) => parse_config_file(&path)?,
                None => {
                    let name = preset.clone().ok_or_else(|| {
                        Error::Config("either --config or --preset is required".into())
                    })?;
                    let p = Preset::parse(&name)?;
                    (RunConfig::for_preset(p, 100), OutputConfig::default())
                }
            };
            if let Some(name) = preset {
                let p = Preset::parse(&name)?;
                if p != cfg.preset {
                    // re-derive preset defaults, keeping resolution and method
                    let keep_n = cfg.n;
                    let keep_method = cfg.method;
                    cfg = RunConfig::for_preset(p, keep_n);
                    cfg.method = keep_method;
                }
            }
            if let Some(m) = method {
                cfg.method = Method::parse(&m)?;
            }
            if let Some(n) = n {
                cfg.n = n;
            }
            if let Some(k) = snapshot_every {
                out_cfg.snapshot_every = k;
            }
            if let Some(dir) = out {
                out_cfg.out_dir = Some(dir);
            }
            cfg.validate()?;
            run_to_files(cfg, out_cfg, quiet)
        }
    }
}

fn run_to_files(cfg: RunConfig, out_cfg: OutputConfig, quiet: bool) -> cellopt::Result<ExitCode> {
    let out_dir = out_cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)?;

    let mut run = Run::new(cfg.clone())?;
    if !quiet {
        eprintln!(
            "preset {} | n = {} | {} constraints | method {}",
            cfg.preset.name(),
            cfg.n,
            run.problem().constraints.len(),
            match cfg.method {
                Method::Projection => "projection",
                Method::Slp => "slp",
            }
        );
    }
    emit_state_fields(run.state(), "phi_0", &out_dir)?;

    let status = loop {
        let status = run.step()?;
        if let Some(rec) = run.history().last() {
            if !quiet {
                let maxc = rec.constraints.iter().fold(0.0f64, |m, c| m.max(c.abs()));
                eprintln!(
                    "iter {:4}  J = {:+.6e}  max|C| = {:.3e}  gamma = {:.4}  rejections = {}",
                    rec.iter, rec.j, maxc, rec.gamma, rec.rejections
                );
            }
            if out_cfg.snapshot_every > 0 && rec.iter % out_cfg.snapshot_every == 0 {
                emit_state_fields(run.state(), &format!("phi_{:05}", rec.iter), &out_dir)?;
            }
        }
        if status != Status::Running {
            break status;
        }
    };

    emit_history(run.history(), &out_dir.join("history.csv"))?;
    emit_state_fields(run.state(), "phi_final", &out_dir)?;
    emit_summary(&run.summary(), &cfg, &out_dir.join("summary.json"))?;

    let kappa = cellopt::functionals::bulk_modulus(&run.cbar());
    let reference = hs_reference(cfg.preset.name()).ok();
    println!(
        "{}: J = {:+.6e}, kappa = {:.6}{}, {} iterations",
        match status {
            Status::Converged => "converged",
            Status::MaxIterations => "max iterations reached",
            Status::Running => unreachable!(),
        },
        run.objective(),
        kappa,
        reference
            .map(|hs| format!(" ({:.1}% of reference bound {hs})", 100.0 * kappa / hs))
            .unwrap_or_default(),
        run.iteration()
    );

    Ok(match status {
        Status::Converged => ExitCode::SUCCESS,
        Status::MaxIterations => ExitCode::from(2),
        Status::Running => unreachable!(),
    })
}
