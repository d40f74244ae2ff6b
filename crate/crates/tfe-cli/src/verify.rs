//! `tfe verify`: evaluate the requested equation residuals at sampled
//! admissible points, estimate convergence order by step halving, and gate
//! the exit code on both.
//!
//! First-derivative equations run at a smaller step than second-derivative
//! ones: their rounding floor is far lower, so the smaller step buys accuracy
//! without corrupting the order estimate. A residual sitting below
//! `ORDER_FLOOR` at both steps is pure rounding noise and passes without an
//! order requirement.

use num_complex::Complex64;
use tfe_core::controls::{sheared_field, PerturbedRadial};
use tfe_core::foliation::{shear_residual, hwc3_residual, ClosedField, EquationId};
use tfe_core::geom::mu_to_direction;
use tfe_core::morphism::{mu_residuals, pde_residual, phi_field, BuiltinMu, MuField, PhiField, PhiSource, SurfaceMu};
use tfe_core::sampling::{builtin_plan, sample_admissible, sample_box, SamplePlan};
use tfe_core::surface::Builtin;
use tfe_core::twistor::{SliceKind, SliceSpec};

use crate::config::{
    config_checks, ensure_out_dir, ControlKind, RunConfig, SurfaceSrc, GRAD_H,
    ORDER_FLOOR_GRAD, ORDER_FLOOR_SECOND, SECOND_H, TRACED_FLOOR_GRAD, TRACED_FLOOR_SECOND,
};
use crate::output::{fmt_f64, write_csv, write_manifest};
use crate::par::par_map;
use crate::solve::surface_of;
use crate::CliError;

struct Row {
    eq: EquationId,
    point: Vec<f64>,
    h: f64,
    value: f64,
    half: f64,
    traced: bool,
}

impl Row {
    fn order(&self) -> f64 {
        if self.value > 0.0 && self.half > 0.0 {
            (self.value / self.half).log2()
        } else {
            f64::INFINITY
        }
    }

    fn passes(&self, tol: f64) -> bool {
        let second = matches!(
            self.eq,
            EquationId::Laplace | EquationId::Wave | EquationId::Hyp
        );
        let floor = match (second, self.traced) {
            (true, true) => TRACED_FLOOR_SECOND,
            (true, false) => ORDER_FLOOR_SECOND,
            (false, true) => TRACED_FLOOR_GRAD,
            (false, false) => ORDER_FLOOR_GRAD,
        };
        self.value <= tol
            && self.half <= tol
            && (self.order() >= 1.8 || self.value.max(self.half) <= floor)
    }
}

fn step_for(eq: EquationId) -> f64 {
    match eq {
        EquationId::Laplace | EquationId::Wave | EquationId::Hyp => SECOND_H,
        _ => GRAD_H,
    }
}

fn traced_phi(phi: &PhiField) -> bool {
    matches!(phi.source, PhiSource::CharacteristicTraced)
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// All requested residuals at one sample point, at the class step and its
/// half.
fn eval_point(
    checks: &[EquationId],
    field: Option<&dyn MuField>,
    phi: Option<&PhiField>,
    base: [Complex64; 4],
    conf_closed: Option<(Builtin, tfe_core::surface::Branch)>,
    sheared: bool,
    x: [f64; 4],
) -> Result<Vec<Row>, CliError> {
    use EquationId::*;
    let xm = [x[0] * 0.4, x[1], x[2], x[3]];
    let x_orth = [0.0, x[1], x[2], x[3]];
    let v3 = [x[1], x[2], x[3]];
    let mut rows = Vec::with_capacity(checks.len());

    let need = |eq: EquationId| checks.contains(&eq);

    if need(Er1) || need(Er2) {
        let f = field.expect("shear-free checks need a fiber field");
        let full = mu_residuals(f, SliceKind::RealR4, x, GRAD_H).map_err(runtime)?;
        let half = mu_residuals(f, SliceKind::RealR4, x, GRAD_H / 2.0).map_err(runtime)?;
        for (i, eq) in [Er1, Er2].into_iter().enumerate() {
            if need(eq) {
                rows.push(Row { eq, point: x.to_vec(), h: GRAD_H, value: full[i].value, half: half[i].value, traced: false });
            }
        }
    }
    if need(Em1) || need(Em2) {
        let f = field.expect("shear-free checks need a fiber field");
        let full = mu_residuals(f, SliceKind::Minkowski, xm, GRAD_H).map_err(runtime)?;
        let half = mu_residuals(f, SliceKind::Minkowski, xm, GRAD_H / 2.0).map_err(runtime)?;
        for (i, eq) in [Em1, Em2].into_iter().enumerate() {
            if need(eq) {
                rows.push(Row { eq, point: xm.to_vec(), h: GRAD_H, value: full[i].value, half: half[i].value, traced: false });
            }
        }
    }

    if need(Laplace) || need(HwcEucl) {
        let f = field.expect("harmonicity checks need a fiber field");
        let center = f
            .mu(&tfe_core::geom::NullCoords::real_r4(x), None)
            .ok_or_else(|| CliError::Runtime(format!("no fiber value at ({x:?})")))?;
        let on_r4 = |y: [f64; 4]| {
            f.mu(&tfe_core::geom::NullCoords::real_r4(y), Some(&center)).and_then(|m| m.as_finite())
        };
        for eq in [Laplace, HwcEucl] {
            if need(eq) {
                let h = step_for(eq);
                let full = pde_residual(&on_r4, eq, x, h).map_err(runtime)?;
                let half = pde_residual(&on_r4, eq, x, h / 2.0).map_err(runtime)?;
                rows.push(Row { eq, point: x.to_vec(), h, value: full.value, half: half.value, traced: false });
            }
        }
    }
    if need(Wave) || need(HwcMink) {
        let f = field.expect("harmonicity checks need a fiber field");
        let center = f
            .mu(&tfe_core::geom::NullCoords::minkowski(xm[0], [xm[1], xm[2], xm[3]]), None)
            .ok_or_else(|| CliError::Runtime(format!("no fiber value at ({xm:?})")))?;
        let on_mink = |y: [f64; 4]| {
            f.mu(&tfe_core::geom::NullCoords::minkowski(y[0], [y[1], y[2], y[3]]), Some(&center))
                .and_then(|m| m.as_finite())
        };
        for eq in [Wave, HwcMink] {
            if need(eq) {
                let h = step_for(eq);
                let full = pde_residual(&on_mink, eq, xm, h).map_err(runtime)?;
                let half = pde_residual(&on_mink, eq, xm, h / 2.0).map_err(runtime)?;
                rows.push(Row { eq, point: xm.to_vec(), h, value: full.value, half: half.value, traced: false });
            }
        }
    }

    if need(Hyp) {
        let phi = phi.expect("morphism checks need a chart");
        let f4 = |y: [f64; 4]| phi.eval_r4(y);
        let full = pde_residual(&f4, Hyp, x, SECOND_H).map_err(runtime)?;
        let half = pde_residual(&f4, Hyp, x, SECOND_H / 2.0).map_err(runtime)?;
        rows.push(Row { eq: Hyp, point: x.to_vec(), h: SECOND_H, value: full.value, half: half.value, traced: traced_phi(phi) });
    }
    if need(Orthog) {
        let phi = phi.expect("morphism checks need a chart");
        let f4 = |y: [f64; 4]| phi.eval_r4(y);
        let full = pde_residual(&f4, Orthog, x_orth, GRAD_H).map_err(runtime)?;
        let half = pde_residual(&f4, Orthog, x_orth, GRAD_H / 2.0).map_err(runtime)?;
        rows.push(Row { eq: Orthog, point: x_orth.to_vec(), h: GRAD_H, value: full.value, half: half.value, traced: traced_phi(phi) });
    }
    if need(Hc0) {
        let phi = phi.expect("morphism checks need a chart");
        let f3 = |v: [f64; 3]| phi.eval_r3(v);
        let full = hwc3_residual(&f3, v3, GRAD_H).map_err(runtime)?;
        let half = hwc3_residual(&f3, v3, GRAD_H / 2.0).map_err(runtime)?;
        rows.push(Row { eq: Hc0, point: v3.to_vec(), h: GRAD_H, value: full.value, half: half.value, traced: traced_phi(phi) });
    }

    if need(Conf) {
        let (full, half) = if sheared {
            let sf = sheared_field();
            (
                shear_residual(&sf, v3, GRAD_H).map_err(runtime)?,
                shear_residual(&sf, v3, GRAD_H / 2.0).map_err(runtime)?,
            )
        } else if let Some((b, branch)) = conf_closed {
            let slice = SliceSpec::r3(0.0).with_base(base);
            let cf = tfe_core::foliation::closed_direction_field(b, slice, branch)
                .expect("closed fiber form checked before dispatch");
            (
                shear_residual(&cf, v3, GRAD_H).map_err(runtime)?,
                shear_residual(&cf, v3, GRAD_H / 2.0).map_err(runtime)?,
            )
        } else {
            let f = field.expect("shear checks need a fiber field");
            let slice = SliceSpec::r3(0.0).with_base(base);
            let center = f
                .mu(&slice.embed3(v3), None)
                .ok_or_else(|| CliError::Runtime(format!("no fiber value at ({v3:?})")))?;
            let cf = ClosedField::new(move |q: [f64; 3]| {
                f.mu(&slice.embed3(q), Some(&center)).map(mu_to_direction)
            });
            (
                shear_residual(&cf, v3, GRAD_H).map_err(runtime)?,
                shear_residual(&cf, v3, GRAD_H / 2.0).map_err(runtime)?,
            )
        };
        rows.push(Row { eq: Conf, point: v3.to_vec(), h: GRAD_H, value: full.value, half: half.value, traced: false });
    }

    Ok(rows)
}

pub fn run(cfg: &RunConfig, src: &SurfaceSrc) -> Result<(), CliError> {
    let checks = config_checks(cfg);
    let branch = cfg.branch_enum();
    let base = cfg.base();
    let wants_phi = checks
        .iter()
        .any(|e| matches!(e, EquationId::Hc0 | EquationId::Hyp | EquationId::Orthog));

    // Owned pieces built per source kind; the references passed to
    // eval_point all borrow from these.
    let psi = surface_of(src);
    let builtin_field;
    let file_field;
    let perturbed_field;
    let phi_store;

    let (field, phi, conf_closed, points): (
        Option<&dyn MuField>,
        Option<&PhiField>,
        Option<(Builtin, tfe_core::surface::Branch)>,
        Vec<[f64; 4]>,
    ) = match src {
        SurfaceSrc::Builtin(b) => {
            builtin_field = BuiltinMu { builtin: *b, branch };
            phi_store = phi_field(*b, base, branch);
            let psi_ref = psi.as_ref().expect("builtin carries a surface");
            let plan = builtin_plan(psi_ref, &builtin_field, branch, *b, Some(&phi_store));
            let pts = sample_admissible(&plan, cfg.sample_seed, cfg.sample_points, 200_000);
            let conf = if b.has_closed_mu() { Some((*b, branch)) } else { None };
            (Some(&builtin_field), Some(&phi_store), conf, pts)
        }
        SurfaceSrc::File(surface) => {
            file_field = SurfaceMu { psi: surface.clone(), branch };
            let psi_ref = psi.as_ref().expect("file carries a surface");
            let plan = SamplePlan {
                psi: Some(psi_ref),
                field: &file_field,
                branch,
                builtin: None,
                phi: None,
                mink_t_scale: 0.4,
            };
            let pts = sample_admissible(&plan, cfg.sample_seed, cfg.sample_points, 200_000);
            (Some(&file_field), None, None, pts)
        }
        SurfaceSrc::Control(ControlKind::RadialPerturbed) => {
            perturbed_field = PerturbedRadial::default();
            let plan = SamplePlan {
                psi: None,
                field: &perturbed_field,
                branch,
                builtin: Some(Builtin::Radial),
                phi: None,
                mink_t_scale: 0.4,
            };
            let pts = sample_admissible(&plan, cfg.sample_seed, cfg.sample_points, 200_000);
            (Some(&perturbed_field), None, None, pts)
        }
        SurfaceSrc::Control(ControlKind::Sheared) => {
            (None, None, None, sample_box(cfg.sample_seed, cfg.sample_points))
        }
    };

    if wants_phi && phi.is_none() {
        return Err(CliError::Config(
            "--checks: morphism checks (HC0, HYP, ORTHOG) need a built-in surface".into(),
        ));
    }
    if points.len() < cfg.sample_points {
        return Err(CliError::Runtime(format!(
            "found only {} of {} admissible sample points",
            points.len(),
            cfg.sample_points
        )));
    }

    let evals: Vec<Result<Vec<Row>, CliError>> = par_map(&points, cfg.threads, |&x| {
        eval_point(&checks, field, phi, base, conf_closed, matches!(src, SurfaceSrc::Control(ControlKind::Sheared)), x)
    });
    let mut per_point = Vec::with_capacity(evals.len());
    for e in evals {
        per_point.push(e?);
    }

    let dir = ensure_out_dir(cfg)?;
    write_manifest(&dir, cfg)?;

    let mut failures = Vec::new();
    let mut csv_rows = Vec::new();
    for eq in &checks {
        let tol = cfg.tolerances[eq.as_str()];
        for rows in &per_point {
            let row = rows
                .iter()
                .find(|r| r.eq == *eq)
                .expect("every requested check is evaluated at every point");
            let point_str =
                row.point.iter().map(|c| fmt_f64(*c)).collect::<Vec<_>>().join(" ");
            csv_rows.push(format!(
                "{},{},{},{},{}",
                eq.as_str(),
                point_str,
                fmt_f64(row.h),
                fmt_f64(row.value),
                fmt_f64(row.order()),
            ));
            if !row.passes(tol) {
                failures.push(format!(
                    "{} at ({point_str}): value {:.3e}, halved {:.3e}, order {:.2}, tol {tol:.1e}",
                    eq.as_str(),
                    row.value,
                    row.half,
                    row.order(),
                ));
            }
        }
    }

    let path = dir.join("report.csv");
    let total = write_csv(&path, "equation,point,h,value,order_estimate", csv_rows)?;

    for f in &failures {
        println!("FAIL {f}");
    }
    println!(
        "verify: {}/{} residual rows passed; report at {}",
        total - failures.len(),
        total,
        path.display()
    );
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "{} of {} residual checks failed",
            failures.len(),
            total
        )))
    }
}
