//! `tfe solve`: branch continuation of the fiber field over a spatial grid,
//! written as one CSV row per resolved node.

use tfe_core::geom::{mu_to_direction, ExtendedComplex};
use tfe_core::surface::{
    kerr_polynomial, solve_mu, sort_lex, Branch, GridSpec, SurfaceError, TwistorSurface,
};
use tfe_core::twistor::SliceSpec;

use crate::config::{ensure_out_dir, RunConfig, SurfaceSrc};
use crate::output::{fmt_f64, write_csv, write_manifest};
use crate::par::par_map;
use crate::CliError;

pub fn surface_of(src: &SurfaceSrc) -> Option<TwistorSurface> {
    match src {
        SurfaceSrc::Builtin(b) => Some(b.surface()),
        SurfaceSrc::File(psi) => Some(psi.clone()),
        SurfaceSrc::Control(_) => None,
    }
}

pub fn grid_of(cfg: &RunConfig) -> Result<GridSpec, CliError> {
    GridSpec::new(cfg.grid.min, cfg.grid.max, cfg.grid.step)
        .map_err(|e| CliError::Config(format!("--grid: {e}")))
}

/// Fiber value at the grid node nearest the seed, on the given slice.
pub fn seed_mu_at(
    src: &SurfaceSrc,
    psi: &TwistorSurface,
    slice: &SliceSpec,
    grid: &GridSpec,
    seed: [f64; 3],
    branch: Branch,
) -> Result<ExtendedComplex, CliError> {
    let node = grid.point(grid.nearest_node(seed));
    let p = slice.embed3(node);
    let mu = match src {
        SurfaceSrc::Builtin(b) => b.seed_mu(&p, branch),
        _ => {
            let poly = kerr_polynomial(psi, &p);
            solve_mu(&poly).ok().and_then(|mut roots| {
                sort_lex(&mut roots);
                match branch {
                    Branch::Plus => roots.first().copied(),
                    Branch::Minus => roots.last().copied(),
                }
            })
        }
    };
    mu.ok_or_else(|| {
        CliError::Runtime(format!(
            "no fiber value at seed node ({}, {}, {})",
            node[0], node[1], node[2]
        ))
    })
}

fn map_solve_err(e: SurfaceError) -> CliError {
    match e {
        SurfaceError::SeedNotRoot { residual } => CliError::Runtime(format!(
            "seed is not a fiber root (residual {residual:.3e}); move --seed onto the surface"
        )),
        SurfaceError::BadGrid(msg) => CliError::Config(format!("--grid: {msg}")),
        other => CliError::Runtime(other.to_string()),
    }
}

pub fn run(cfg: &RunConfig, src: &SurfaceSrc) -> Result<(), CliError> {
    let psi = surface_of(src)
        .ok_or_else(|| CliError::Config("control fields only work with verify".into()))?;
    let slice = SliceSpec::r3(cfg.t).with_base(cfg.base());
    let grid = grid_of(cfg)?;
    let branch = cfg.branch_enum();
    let seed = cfg.seeds[0];
    let seed_mu = seed_mu_at(src, &psi, &slice, &grid, seed, branch)?;

    let field =
        tfe_core::surface::field_over_grid(&psi, &slice, &grid, seed, seed_mu).map_err(map_solve_err)?;

    // A node's value belongs to the associated family only if flowing back
    // along its direction lands on a time-zero fiber root. Inside a caustic
    // the continuation still assigns some root, but the flow-back check
    // fails; such rows are kept and flagged.
    let indices: Vec<[usize; 3]> = grid.iter_indices().collect();
    let slice0 = SliceSpec::r3(0.0).with_base(cfg.base());
    let flags: Vec<bool> = if cfg.t == 0.0 {
        vec![false; indices.len()]
    } else {
        par_map(&indices, cfg.threads, |&idx| {
            let mu = match field.mu_at(idx) {
                Some(m) => m,
                None => return false,
            };
            let p = grid.point(idx);
            let u = mu_to_direction(mu).u();
            let q = [p[0] - cfg.t * u[0], p[1] - cfg.t * u[1], p[2] - cfg.t * u[2]];
            let poly = kerr_polynomial(&psi, &slice0.embed3(q));
            match solve_mu(&poly) {
                Ok(roots) => !roots.iter().any(|r| r.chordal(&mu) < 1e-6),
                Err(_) => true,
            }
        })
    };

    let dir = ensure_out_dir(cfg)?;
    write_manifest(&dir, cfg)?;

    let rows = indices.iter().enumerate().filter_map(|(k, &idx)| {
        let mu = field.mu_at(idx)?;
        let p = grid.point(idx);
        let lin = grid.lin(idx);
        let (re, im, inf) = match mu.as_finite() {
            Some(z) => (z.re, z.im, 0),
            None => (0.0, 0.0, 1),
        };
        Some(format!(
            "{},{},{},{},{},{},{},{}",
            fmt_f64(p[0]),
            fmt_f64(p[1]),
            fmt_f64(p[2]),
            fmt_f64(re),
            fmt_f64(im),
            inf,
            field.branch[lin],
            i32::from(flags[k]),
        ))
    });
    let path = dir.join("mu.csv");
    let n = write_csv(&path, "x1,x2,x3,re_mu,im_mu,is_inf,branch,singular", rows)?;
    println!("wrote {n} rows to {}", path.display());
    Ok(())
}
