//! `tfe trace`: integrate foliation leaves from seed points and plot them.

use tfe_core::foliation::{
    closed_direction_field, direction_field_r3, trace_leaf, DirectionSampler, Leaf,
};
use tfe_core::surface::field_over_grid;
use tfe_core::twistor::SliceSpec;

use crate::config::{ensure_out_dir, RunConfig, SurfaceSrc};
use crate::output::{fmt_f64, write_csv, write_manifest, write_svg};
use crate::solve::{grid_of, seed_mu_at, surface_of};
use crate::CliError;

fn build_sampler(cfg: &RunConfig, src: &SurfaceSrc) -> Result<Box<dyn DirectionSampler>, CliError> {
    let slice = SliceSpec::r3(cfg.t).with_base(cfg.base());
    let branch = cfg.branch_enum();
    if let SurfaceSrc::Builtin(b) = src {
        if let Some(field) = closed_direction_field(*b, slice, branch) {
            return Ok(Box::new(field));
        }
    }
    // no closed fiber form: solve over the grid and interpolate
    let psi = surface_of(src)
        .ok_or_else(|| CliError::Config("control fields only work with verify".into()))?;
    let grid = grid_of(cfg)?;
    let seed = cfg.seeds[0];
    let seed_mu = seed_mu_at(src, &psi, &slice, &grid, seed, branch)?;
    let field = field_over_grid(&psi, &slice, &grid, seed, seed_mu)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let sampled = direction_field_r3(field).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(Box::new(sampled))
}

pub fn run(cfg: &RunConfig, src: &SurfaceSrc) -> Result<(), CliError> {
    if matches!(src, SurfaceSrc::Control(_)) {
        return Err(CliError::Config("control fields only work with verify".into()));
    }
    if cfg.seeds.is_empty() {
        return Err(CliError::Runtime("no seed points given".into()));
    }
    let sampler = build_sampler(cfg, src)?;

    let mut leaves: Vec<Leaf> = Vec::new();
    for seed in &cfg.seeds {
        match trace_leaf(sampler.as_ref(), *seed, cfg.trace_step, cfg.trace_max_len) {
            Ok(leaf) => leaves.push(leaf),
            Err(e) => eprintln!("seed ({}, {}, {}): {e}", seed[0], seed[1], seed[2]),
        }
    }
    if leaves.is_empty() {
        return Err(CliError::Runtime("no seed produced a leaf".into()));
    }

    let dir = ensure_out_dir(cfg)?;
    write_manifest(&dir, cfg)?;

    let rows = leaves.iter().enumerate().flat_map(|(id, leaf)| {
        leaf.points.iter().zip(&leaf.arclength).map(move |(p, s)| {
            format!("{id},{},{},{},{}", fmt_f64(*s), fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(p[2]))
        })
    });
    let csv_path = dir.join("leaves.csv");
    let n = write_csv(&csv_path, "leaf_id,s,x1,x2,x3", rows)?;

    let svg_path = dir.join("leaves.svg");
    write_svg(&svg_path, &leaves)?;
    println!(
        "traced {} leaves ({n} points) to {} and {}",
        leaves.len(),
        csv_path.display(),
        svg_path.display()
    );
    Ok(())
}
