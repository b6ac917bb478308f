//! Configuration ingestion and artifact emission.
//!
//! Config files are flat `key = value` text with `[problem]`, `[params]` and
//! `[output]` sections; parameter keys use the published table's names
//! (`q_max`, `eps_void`, `eta`, `beta`, `alpha_min_sq`, `lambda`,
//! `gamma_min`, ...). `eta` and `beta` are given in units of `Δx`, matching
//! their tabulated form. Lines starting with `#` are comments.
//!
//! Run artifacts: `history.csv` (one row per accepted iteration),
//! `summary.json`, and ASCII legacy-VTK `STRUCTURED_POINTS` snapshots of the
//! nodal fields.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::driver::{HistoryRecord, Method, Preset, RunConfig, RunSummary, Status};
use crate::grid::NodalField;
use crate::levelset::LevelSetState;
use crate::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct OutputConfig {
    pub out_dir: Option<PathBuf>,
    pub snapshot_every: usize,
}

/// Paths produced by a completed run.
#[derive(Debug, Clone)]
pub struct OutputBundle {
    pub history: PathBuf,
    pub summary: PathBuf,
    pub fields: Vec<PathBuf>,
}

pub fn parse_config_file(path: &Path) -> Result<(RunConfig, OutputConfig)> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<(RunConfig, OutputConfig)> {
    let mut section = String::new();
    let mut problem: Vec<(String, String)> = Vec::new();
    let mut params: Vec<(String, String)> = Vec::new();
    let mut output: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            section = line[1..line.len() - 1].trim().to_string();
            if !matches!(section.as_str(), "problem" | "params" | "output") {
                return Err(Error::Config(format!(
                    "line {}: unknown section [{section}]",
                    lineno + 1
                )));
            }
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected 'key = value', got '{line}'",
                lineno + 1
            )));
        };
        let entry = (k.trim().to_string(), v.trim().to_string());
        match section.as_str() {
            "problem" => problem.push(entry),
            "params" => params.push(entry),
            "output" => output.push(entry),
            _ => {
                return Err(Error::Config(format!(
                    "line {}: key outside of a section",
                    lineno + 1
                )))
            }
        }
    }

    let mut preset = Preset::Bulk2d;
    let mut n = 100usize;
    let mut method = Method::Projection;
    for (k, v) in &problem {
        match k.as_str() {
            "preset" => preset = Preset::parse(v)?,
            "n" => n = parse_num(k, v)? as usize,
            "method" => method = Method::parse(v)?,
            other => return Err(Error::Config(format!("unknown [problem] key '{other}'"))),
        }
    }
    let mut cfg = RunConfig::for_preset(preset, n);
    cfg.method = method;
    for (k, v) in &params {
        apply_param(&mut cfg, k, v)?;
    }
    cfg.validate()?;

    let mut out = OutputConfig::default();
    for (k, v) in &output {
        match k.as_str() {
            "out_dir" => out.out_dir = Some(PathBuf::from(v)),
            "snapshot_every" => out.snapshot_every = parse_num(k, v)? as usize,
            other => return Err(Error::Config(format!("unknown [output] key '{other}'"))),
        }
    }
    Ok((cfg, out))
}

fn parse_num(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| Error::Config(format!("key '{key}': '{v}' is not a number")))
}

fn apply_param(cfg: &mut RunConfig, key: &str, v: &str) -> Result<()> {
    match key {
        "q_max" => cfg.q_max = parse_num(key, v)? as usize,
        "k_max" => cfg.k_max = parse_num(key, v)? as usize,
        "j_max" => cfg.j_max = parse_num(key, v)? as usize,
        "eps_void" => cfg.eps_void = parse_num(key, v)?,
        "eta" => cfg.eta = parse_num(key, v)?,
        "beta" => cfg.beta = parse_num(key, v)?,
        "alpha_min_sq" => cfg.alpha_min_sq = parse_num(key, v)?,
        "lambda" => cfg.lambda = parse_num(key, v)?,
        "gamma_min" => cfg.gamma_min = parse_num(key, v)?,
        "gamma_max" => cfg.gamma_max = parse_num(key, v)?,
        "gamma_reinit" => cfg.gamma_reinit = parse_num(key, v)?,
        "xi" => cfg.xi = parse_num(key, v)?,
        "delta_inc" => cfg.delta_inc = parse_num(key, v)?,
        "delta_dec" => cfg.delta_dec = parse_num(key, v)?,
        "eps_1" => cfg.eps_1 = parse_num(key, v)?,
        "eps_2" => cfg.eps_2 = parse_num(key, v)?,
        "hole_radius" => cfg.hole_radius = Some(parse_num(key, v)?),
        "lambda_boost_cap" => cfg.lambda_boost_cap = Some(parse_num(key, v)?),
        "planar_mode" => {
            cfg.planar_mode = match v {
                "plane_stress" => crate::tensor::PlanarMode::PlaneStress,
                "plane_strain" => crate::tensor::PlanarMode::PlaneStrain,
                other => {
                    return Err(Error::Config(format!(
                        "planar_mode must be plane_stress or plane_strain, got '{other}'"
                    )))
                }
            }
        }
        other => return Err(Error::Config(format!("unknown [params] key '{other}'"))),
    }
    Ok(())
}

/// Render a config back to text; `validate(emit(config))` accepts every
/// config the runner accepted.
pub fn emit_config(cfg: &RunConfig, out: &OutputConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[problem]");
    let _ = writeln!(s, "preset = {}", cfg.preset.name());
    let _ = writeln!(s, "n = {}", cfg.n);
    let _ = writeln!(
        s,
        "method = {}",
        match cfg.method {
            Method::Projection => "projection",
            Method::Slp => "slp",
        }
    );
    let _ = writeln!(s, "\n[params]");
    let _ = writeln!(s, "q_max = {}", cfg.q_max);
    let _ = writeln!(s, "k_max = {}", cfg.k_max);
    let _ = writeln!(s, "eps_void = {}", cfg.eps_void);
    let _ = writeln!(s, "eta = {}", cfg.eta);
    let _ = writeln!(s, "beta = {}", cfg.beta);
    let _ = writeln!(s, "alpha_min_sq = {}", cfg.alpha_min_sq);
    let _ = writeln!(s, "lambda = {}", cfg.lambda);
    let _ = writeln!(s, "gamma_min = {}", cfg.gamma_min);
    let _ = writeln!(s, "gamma_max = {}", cfg.gamma_max);
    let _ = writeln!(s, "gamma_reinit = {}", cfg.gamma_reinit);
    let _ = writeln!(s, "xi = {}", cfg.xi);
    let _ = writeln!(s, "delta_inc = {}", cfg.delta_inc);
    let _ = writeln!(s, "delta_dec = {}", cfg.delta_dec);
    let _ = writeln!(s, "eps_1 = {}", cfg.eps_1);
    let _ = writeln!(s, "eps_2 = {}", cfg.eps_2);
    let _ = writeln!(s, "j_max = {}", cfg.j_max);
    if let Some(r) = cfg.hole_radius {
        let _ = writeln!(s, "hole_radius = {r}");
    }
    if let Some(c) = cfg.lambda_boost_cap {
        let _ = writeln!(s, "lambda_boost_cap = {c}");
    }
    let _ = writeln!(
        s,
        "planar_mode = {}",
        match cfg.planar_mode {
            crate::tensor::PlanarMode::PlaneStress => "plane_stress",
            crate::tensor::PlanarMode::PlaneStrain => "plane_strain",
        }
    );
    let _ = writeln!(s, "\n[output]");
    if let Some(dir) = &out.out_dir {
        let _ = writeln!(s, "out_dir = {}", dir.display());
    }
    let _ = writeln!(s, "snapshot_every = {}", out.snapshot_every);
    s
}

/// `history.csv`: header `iter,J,C_1..C_N,gamma,rejections,alpha_sq,
/// lambda_used,wall_ms`, one row per accepted iteration, 12 significant
/// digits.
pub fn emit_history(records: &[HistoryRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Parameter("no history records to emit".into()));
    }
    let ncons = records[0].constraints.len();
    let mut s = String::new();
    s.push_str("iter,J");
    for i in 1..=ncons {
        let _ = write!(s, ",C_{i}");
    }
    s.push_str(",gamma,rejections,alpha_sq,lambda_used,wall_ms\n");
    for r in records {
        let _ = write!(s, "{},{:.12e}", r.iter, r.j);
        for c in &r.constraints {
            let _ = write!(s, ",{c:.12e}");
        }
        let _ = writeln!(
            s,
            ",{:.12e},{},{:.12e},{:.12e},{:.3}",
            r.gamma, r.rejections, r.alpha_sq, r.lambda_used, r.wall_ms
        );
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// ASCII legacy VTK `STRUCTURED_POINTS` writer for one nodal field.
pub fn emit_vtk(field: &NodalField, name: &str, path: &Path) -> Result<()> {
    let grid = field.grid();
    let n = grid.n();
    let dx = grid.dx();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "cellopt nodal field {name}");
    s.push_str("ASCII\nDATASET STRUCTURED_POINTS\n");
    let _ = writeln!(s, "DIMENSIONS {n} {n} 1");
    s.push_str("ORIGIN 0 0 0\n");
    let _ = writeln!(s, "SPACING {dx} {dx} {dx}");
    let _ = writeln!(s, "POINT_DATA {}", n * n);
    let _ = writeln!(s, "SCALARS {name} double 1");
    s.push_str("LOOKUP_TABLE default\n");
    for v in field.values() {
        let _ = writeln!(s, "{v:.9e}");
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Write every level set function of a state as `<stem>_<m>.vtk` (single
/// level set: `<stem>.vtk`).
pub fn emit_state_fields(state: &LevelSetState, stem: &str, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    if state.num_level_sets() == 1 {
        let p = dir.join(format!("{stem}.vtk"));
        emit_vtk(&state.phi[0], stem, &p)?;
        paths.push(p);
    } else {
        for (m, phi) in state.phi.iter().enumerate() {
            let name = format!("{stem}_{}", m + 1);
            let p = dir.join(format!("{name}.vtk"));
            emit_vtk(phi, &name, &p)?;
            paths.push(p);
        }
    }
    Ok(paths)
}

#[derive(serde::Serialize)]
struct SummaryDoc<'a> {
    objective: f64,
    constraints: &'a [f64],
    iterations: usize,
    status: Status,
    hs_reference: Option<f64>,
    config: &'a RunConfig,
}

pub fn emit_summary(
    summary: &RunSummary,
    cfg: &RunConfig,
    path: &Path,
) -> Result<()> {
    let doc = SummaryDoc {
        objective: summary.objective,
        constraints: &summary.constraints,
        iterations: summary.iterations,
        status: summary.status,
        hs_reference: crate::driver::hs_reference(cfg.preset.name()).ok(),
        config: cfg,
    };
    let text = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::Config(format!("summary serialisation failed: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}
