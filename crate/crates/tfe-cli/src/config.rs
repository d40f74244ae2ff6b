//! Resolution of command line arguments into a fully explicit run
//! configuration. The configuration is what lands in `manifest.json`; it
//! contains every value that influences the outputs, so a run can be
//! reproduced from the manifest alone.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use tfe_core::foliation::EquationId;
use tfe_core::surface::{Branch, Builtin, SurfaceError, Term, TwistorSurface};

use crate::args::RunArgs;
use crate::CliError;

/// Step used for first-derivative residuals (the shear-free pairs, the
/// conformality sums, the orthogonality check).
pub const GRAD_H: f64 = 2e-4;

/// Step used for residuals containing second derivatives, where a smaller
/// step would push the halved evaluation into rounding noise.
pub const SECOND_H: f64 = 1e-3;

/// Residuals whose value at both steps sits below this floor are rounding
/// noise; their step-halving ratio carries no order information. One floor
/// per stencil class: second differences of an O(1) field at the halved step
/// carry rounding of order eps*|f|*4/h^2 ~ 5e-9, and ratios stay contaminated
/// to roughly two orders of magnitude above that; first-difference rounding
/// sits near 1e-12.
pub const ORDER_FLOOR_GRAD: f64 = 1e-10;
pub const ORDER_FLOOR_SECOND: f64 = 5e-7;

/// Wider floors for potentials evaluated by characteristic tracing: the
/// integrator contributes a bias of roughly 1e-9 per evaluation that does
/// not shrink with the stencil step, so residual magnitudes below these
/// carry no order information either. Genuine equation violations measure
/// orders of magnitude above (1e-2 and up).
pub const TRACED_FLOOR_GRAD: f64 = 1e-7;
pub const TRACED_FLOOR_SECOND: f64 = 5e-6;

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct TermDesc {
    pub exp: [u32; 4],
    pub re: f64,
    pub im: f64,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceDesc {
    Builtin { name: String },
    File { path: String, degree: u32, terms: Vec<TermDesc> },
    Control { name: String },
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct GridDesc {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub step: [f64; 3],
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub surface: SurfaceDesc,
    pub t: f64,
    /// Base point as four (re, im) pairs.
    pub a: [[f64; 2]; 4],
    pub grid: GridDesc,
    pub seeds: Vec<[f64; 3]>,
    pub branch: String,
    pub checks: Vec<String>,
    pub tolerances: BTreeMap<String, f64>,
    pub fd_step_gradient: f64,
    pub fd_step_second: f64,
    pub sample_points: usize,
    pub sample_seed: u64,
    pub trace_step: f64,
    pub trace_max_len: f64,
    pub out_dir: String,
    pub threads: usize,
}

impl RunConfig {
    pub fn base(&self) -> [Complex64; 4] {
        self.a.map(|[re, im]| Complex64::new(re, im))
    }

    pub fn branch_enum(&self) -> Branch {
        Branch::parse(&self.branch).expect("branch validated at resolve time")
    }
}

/// A resolved surface argument.
pub enum SurfaceSrc {
    Builtin(Builtin),
    File(TwistorSurface),
    Control(ControlKind),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ControlKind {
    RadialPerturbed,
    Sheared,
}

impl ControlKind {
    pub fn name(&self) -> &'static str {
        match self {
            ControlKind::RadialPerturbed => "radial-perturbed",
            ControlKind::Sheared => "sheared",
        }
    }
}

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

fn parse_floats(key: &str, s: &str, n: usize) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != n {
        return Err(bad(key, format!("expected {n} comma-separated numbers, got {}", parts.len())));
    }
    parts
        .iter()
        .map(|p| {
            let v: f64 = p
                .trim()
                .parse()
                .map_err(|_| bad(key, format!("'{}' is not a number", p.trim())))?;
            if !v.is_finite() {
                return Err(bad(key, format!("'{}' is not finite", p.trim())));
            }
            Ok(v)
        })
        .collect()
}

fn parse_grid(s: &str) -> Result<GridDesc, CliError> {
    let triples: Vec<&str> = s.split(',').collect();
    if triples.len() != 1 && triples.len() != 3 {
        return Err(bad("--grid", format!("expected 1 or 3 'min:max:step' triples, got {}", triples.len())));
    }
    let mut axes = Vec::with_capacity(3);
    for t in &triples {
        let parts: Vec<&str> = t.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("--grid", format!("'{t}' is not of the form min:max:step")));
        }
        let mut v = [0.0f64; 3];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p
                .trim()
                .parse()
                .map_err(|_| bad("--grid", format!("'{}' is not a number", p.trim())))?;
        }
        axes.push(v);
    }
    if axes.len() == 1 {
        axes = vec![axes[0]; 3];
    }
    Ok(GridDesc {
        min: [axes[0][0], axes[1][0], axes[2][0]],
        max: [axes[0][1], axes[1][1], axes[2][1]],
        step: [axes[0][2], axes[1][2], axes[2][2]],
    })
}

/// Expands check tokens. Pair names expand to their two constituents.
fn parse_checks(s: &str) -> Result<Vec<EquationId>, CliError> {
    let mut out = Vec::new();
    for tok in s.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        let expanded: &[EquationId] = match tok {
            "ER" => &[EquationId::Er1, EquationId::Er2],
            "EM" => &[EquationId::Em1, EquationId::Em2],
            _ => match EquationId::parse(tok) {
                Some(e) => {
                    out.push(e);
                    continue;
                }
                None => return Err(bad("--checks", format!("unknown check '{tok}'"))),
            },
        };
        out.extend_from_slice(expanded);
    }
    if out.is_empty() {
        return Err(bad("--checks", "no checks requested"));
    }
    // keep first occurrence order, drop duplicates
    let mut seen = Vec::new();
    out.retain(|e| {
        if seen.contains(e) {
            false
        } else {
            seen.push(*e);
            true
        }
    });
    Ok(out)
}

/// Residual checks that make sense for each kind of field. Morphism checks
/// need a chart inverse, which only the built-ins carry; the control fields
/// certify only the equations they were built to break or preserve.
pub fn applicable_checks(src: &SurfaceSrc) -> Vec<EquationId> {
    use EquationId::*;
    match src {
        SurfaceSrc::Builtin(_) => EquationId::ALL.to_vec(),
        SurfaceSrc::File(_) => vec![Er1, Er2, Em1, Em2, Laplace, Wave, HwcEucl, HwcMink, Conf],
        SurfaceSrc::Control(ControlKind::RadialPerturbed) => vec![Er1, Er2, Em1, Em2, Conf],
        SurfaceSrc::Control(ControlKind::Sheared) => vec![Conf],
    }
}

fn surface_error_msg(e: &SurfaceError) -> String {
    match e {
        SurfaceError::BadExponent { term, expected, got } => {
            format!("term {term}: exponents sum to {got}, expected {expected}")
        }
        other => other.to_string(),
    }
}

fn resolve_surface(args: &RunArgs, command: &str) -> Result<(SurfaceDesc, SurfaceSrc), CliError> {
    if let Some(name) = &args.surface {
        if let Ok(b) = Builtin::parse(name) {
            return Ok((SurfaceDesc::Builtin { name: b.name() }, SurfaceSrc::Builtin(b)));
        }
        let control = match name.as_str() {
            "radial-perturbed" => Some(ControlKind::RadialPerturbed),
            "sheared" => Some(ControlKind::Sheared),
            _ => None,
        };
        match control {
            Some(c) => {
                if command != "verify" {
                    return Err(bad(
                        "--surface",
                        format!("control field '{name}' only works with verify"),
                    ));
                }
                Ok((SurfaceDesc::Control { name: c.name().into() }, SurfaceSrc::Control(c)))
            }
            None => Err(bad("--surface", format!("unknown surface '{name}'"))),
        }
    } else if let Some(path) = &args.surface_file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad("--surface-file", format!("{}: {e}", path.display())))?;
        let psi = TwistorSurface::from_json_str(&text)
            .map_err(|e| bad("--surface-file", format!("{}: {}", path.display(), surface_error_msg(&e))))?;
        let terms = psi
            .terms()
            .iter()
            .map(|t: &Term| TermDesc { exp: t.exp, re: t.coeff.re, im: t.coeff.im })
            .collect();
        Ok((
            SurfaceDesc::File {
                path: path.display().to_string(),
                degree: psi.degree(),
                terms,
            },
            SurfaceSrc::File(psi),
        ))
    } else {
        Err(CliError::Config("one of --surface or --surface-file is required".into()))
    }
}

fn thread_count() -> usize {
    match std::env::var("TFE_THREADS") {
        Ok(s) => s.trim().parse::<usize>().map(|n| n.max(1)).unwrap_or_else(|_| default_threads()),
        Err(_) => default_threads(),
    }
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(8)
}

pub fn resolve(command: &str, args: &RunArgs) -> Result<(RunConfig, SurfaceSrc), CliError> {
    let (surface_desc, src) = resolve_surface(args, command)?;

    if !args.t.is_finite() {
        return Err(bad("--t", "must be finite"));
    }

    let mut a = [[0.0f64; 2]; 4];
    if let Some(s) = &args.a {
        let v = parse_floats("--a", s, 8)?;
        for i in 0..4 {
            a[i] = [v[2 * i], v[2 * i + 1]];
        }
    }
    if let Some(s) = &args.a0 {
        let v = parse_floats("--a0", s, 2)?;
        a[0] = [v[0], v[1]];
    }

    let grid = match &args.grid {
        Some(s) => parse_grid(s)?,
        None => GridDesc { min: [-2.0; 3], max: [2.0; 3], step: [0.25; 3] },
    };

    let mut seeds = Vec::new();
    for s in &args.seed {
        let v = parse_floats("--seed", s, 3)?;
        seeds.push([v[0], v[1], v[2]]);
    }
    if seeds.is_empty() {
        seeds.push([0.0, 1.0, 0.0]);
    }

    let branch = match &args.branch {
        Some(s) => {
            Branch::parse(s).ok_or_else(|| bad("--branch", format!("expected '+' or '-', got '{s}'")))?;
            s.clone()
        }
        None => "+".to_string(),
    };

    let applicable = applicable_checks(&src);
    let checks = match &args.checks {
        Some(s) => {
            let requested = parse_checks(s)?;
            for e in &requested {
                if !applicable.contains(e) {
                    return Err(bad(
                        "--checks",
                        format!(
                            "{} does not apply to this surface (applicable: {})",
                            e.as_str(),
                            applicable.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(",")
                        ),
                    ));
                }
            }
            requested
        }
        None => applicable,
    };

    let tol = match args.tol {
        Some(t) if t > 0.0 && t.is_finite() => t,
        Some(t) => return Err(bad("--tol", format!("must be positive and finite, got {t}"))),
        None => 1e-5,
    };
    let tolerances: BTreeMap<String, f64> =
        checks.iter().map(|e| (e.as_str().to_string(), tol)).collect();

    let out_dir = args
        .out
        .as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "tfe-out".to_string());

    let cfg = RunConfig {
        command: command.to_string(),
        surface: surface_desc,
        t: args.t,
        a,
        grid,
        seeds,
        branch,
        checks: checks.iter().map(|e| e.as_str().to_string()).collect(),
        tolerances,
        fd_step_gradient: GRAD_H,
        fd_step_second: SECOND_H,
        sample_points: 10,
        sample_seed: 11,
        trace_step: 0.01,
        trace_max_len: 100.0,
        out_dir,
        threads: thread_count(),
    };
    Ok((cfg, src))
}

/// Parsed check list of a resolved config.
pub fn config_checks(cfg: &RunConfig) -> Vec<EquationId> {
    cfg.checks
        .iter()
        .map(|s| EquationId::parse(s).expect("checks validated at resolve time"))
        .collect()
}

pub fn ensure_out_dir(cfg: &RunConfig) -> Result<std::path::PathBuf, CliError> {
    let dir = Path::new(&cfg.out_dir).to_path_buf();
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}
