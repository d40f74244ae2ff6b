//! Direction fields on spatial slices, integral-curve (leaf) tracing, the
//! associated family of fields at nonzero slice time, and the residual
//! checks for conformal-foliation and horizontal-conformality equations.

use crate::geom::{
    add3, cross3, dot3, frame_from_direction, mu_to_direction, norm3, scale3, sub3, Direction3,
    ExtendedComplex,
};
use crate::numdiff::{self, Stencil};
use crate::surface::{Branch, Builtin, DirectionField};
use crate::twistor::{SliceKind, SliceSpec};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FoliationError {
    #[error("field has no usable nodes (everything masked)")]
    EmptyField,
    #[error("field slice must be a spatial slice (kind R3)")]
    WrongSliceKind,
    #[error("invalid seed {point:?}: outside the hull or on the singular set")]
    SeedInvalid { point: [f64; 3] },
    #[error("step and length parameters must be positive, got {0}")]
    BadStep(f64),
    #[error("finite-difference stencil around {point:?} leaves the field domain")]
    StencilOutOfDomain { point: [f64; 3] },
    #[error("implicit field equation did not converge at {point:?}")]
    NoConvergence { point: [f64; 3] },
}

/// The residual equations this crate can evaluate numerically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EquationId {
    Hc0,
    Conf,
    Er1,
    Er2,
    Em1,
    Em2,
    Wave,
    HwcMink,
    Laplace,
    HwcEucl,
    Hyp,
    Orthog,
}

impl EquationId {
    pub const ALL: [EquationId; 12] = [
        EquationId::Hc0,
        EquationId::Conf,
        EquationId::Er1,
        EquationId::Er2,
        EquationId::Em1,
        EquationId::Em2,
        EquationId::Wave,
        EquationId::HwcMink,
        EquationId::Laplace,
        EquationId::HwcEucl,
        EquationId::Hyp,
        EquationId::Orthog,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EquationId::Hc0 => "HC0",
            EquationId::Conf => "CONF",
            EquationId::Er1 => "ER1",
            EquationId::Er2 => "ER2",
            EquationId::Em1 => "EM1",
            EquationId::Em2 => "EM2",
            EquationId::Wave => "WAVE",
            EquationId::HwcMink => "HWC_MINK",
            EquationId::Laplace => "LAPLACE",
            EquationId::HwcEucl => "HWC_EUCL",
            EquationId::Hyp => "HYP",
            EquationId::Orthog => "ORTHOG",
        }
    }

    pub fn parse(s: &str) -> Option<EquationId> {
        EquationId::ALL.iter().copied().find(|e| e.as_str() == s)
    }
}

/// One numerical residual evaluation: which equation, where, at what step,
/// and the magnitude obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSample {
    pub equation_id: EquationId,
    pub point: Vec<f64>,
    pub h: f64,
    pub value: f64,
}

/// Why leaf tracing stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Left the field's hull.
    Boundary,
    /// Hit a masked / undefined region inside the hull.
    SingularMask,
    /// Returned to the start with an aligned tangent.
    Closure,
    /// Reached the arclength budget.
    StepLimit,
}

/// A traced integral curve of a direction field.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub points: Vec<[f64; 3]>,
    pub arclength: Vec<f64>,
    pub closed: bool,
    pub stop_reason: StopReason,
}

/// A unit direction field on (a region of) ℝ³. `direction` returns None on
/// the singular set; `in_hull` bounds the trackable region.
pub trait DirectionSampler {
    fn direction(&self, p: [f64; 3]) -> Option<Direction3>;

    fn in_hull(&self, p: [f64; 3]) -> bool;
}

/// A field given by a closed-form evaluator, defined wherever the evaluator
/// returns a value.
pub struct ClosedField<F> {
    f: F,
}

impl<F: Fn([f64; 3]) -> Option<Direction3>> ClosedField<F> {
    pub fn new(f: F) -> Self {
        ClosedField { f }
    }
}

impl<F: Fn([f64; 3]) -> Option<Direction3>> DirectionSampler for ClosedField<F> {
    fn direction(&self, p: [f64; 3]) -> Option<Direction3> {
        (self.f)(p)
    }

    fn in_hull(&self, _p: [f64; 3]) -> bool {
        true
    }
}

/// The closed-form direction field of a built-in surface on a slice, when
/// the surface has closed-form fiber values.
pub fn closed_direction_field(
    b: Builtin,
    slice: SliceSpec,
    branch: Branch,
) -> Option<ClosedField<impl Fn([f64; 3]) -> Option<Direction3>>> {
    if !b.has_closed_mu() {
        return None;
    }
    Some(ClosedField::new(move |v: [f64; 3]| {
        b.closed_mu(&slice.embed3(v), branch).map(mu_to_direction)
    }))
}

/// A direction field interpolated from a solved grid. The fiber coordinate
/// is interpolated trilinearly (switching to the reciprocal chart when the
/// cell's values live near ∞) and then converted to a direction; cells
/// touching masked nodes or straddling both charts report None.
pub struct SampledField {
    field: DirectionField,
}

impl SampledField {
    pub fn field(&self) -> &DirectionField {
        &self.field
    }

    fn interp_mu(&self, p: [f64; 3]) -> Option<ExtendedComplex> {
        let g = &self.field.grid;
        let counts = g.counts();
        let mut i0 = [0usize; 3];
        let mut fr = [0f64; 3];
        for ax in 0..3 {
            let n = counts[ax];
            let u = (p[ax] - g.coord(ax, 0)) / g.step()[ax];
            if u < -1e-9 || u > (n - 1) as f64 + 1e-9 {
                return None;
            }
            if n == 1 {
                continue;
            }
            let i = (u.floor() as i64).clamp(0, n as i64 - 2) as usize;
            i0[ax] = i;
            fr[ax] = (u - i as f64).clamp(0.0, 1.0);
        }
        let mut corners = [ExtendedComplex::zero(); 8];
        for (c, corner) in corners.iter_mut().enumerate() {
            let idx = [
                (i0[0] + ((c >> 2) & 1)).min(counts[0] - 1),
                (i0[1] + ((c >> 1) & 1)).min(counts[1] - 1),
                (i0[2] + (c & 1)).min(counts[2] - 1),
            ];
            *corner = self.field.mu_at(idx)?;
        }
        let any_inf = corners.iter().any(|v| v.is_inf());
        let max_mod = corners
            .iter()
            .filter_map(|v| v.as_finite())
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if any_inf || max_mod > 2.0 {
            // Reciprocal chart; only sound if every corner is away from 0.
            let away = corners.iter().all(|v| match v.as_finite() {
                Some(z) => z.norm() > 0.5,
                None => true,
            });
            if !away {
                return None;
            }
            let mut nu = [Complex64::new(0.0, 0.0); 8];
            for (k, v) in corners.iter().enumerate() {
                nu[k] = v.recip().as_finite().expect("reciprocal of nonzero");
            }
            Some(ExtendedComplex::new(trilinear(&nu, fr)).recip())
        } else {
            let mut vals = [Complex64::new(0.0, 0.0); 8];
            for (k, v) in corners.iter().enumerate() {
                vals[k] = v.as_finite().expect("finite chart");
            }
            Some(ExtendedComplex::new(trilinear(&vals, fr)))
        }
    }
}

fn trilinear(vals: &[Complex64; 8], fr: [f64; 3]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (c, v) in vals.iter().enumerate() {
        let w0 = if (c >> 2) & 1 == 1 { fr[0] } else { 1.0 - fr[0] };
        let w1 = if (c >> 1) & 1 == 1 { fr[1] } else { 1.0 - fr[1] };
        let w2 = if c & 1 == 1 { fr[2] } else { 1.0 - fr[2] };
        acc += v * (w0 * w1 * w2);
    }
    acc
}

impl DirectionSampler for SampledField {
    fn direction(&self, p: [f64; 3]) -> Option<Direction3> {
        self.interp_mu(p).map(mu_to_direction)
    }

    fn in_hull(&self, p: [f64; 3]) -> bool {
        let g = &self.field.grid;
        (0..3).all(|ax| {
            let lo = g.coord(ax, 0);
            let hi = g.coord(ax, g.counts()[ax] - 1);
            p[ax] >= lo - 1e-9 && p[ax] <= hi + 1e-9
        })
    }
}

/// Wraps a solved grid as an interpolating direction field on its slice.
pub fn direction_field_r3(field: DirectionField) -> Result<SampledField, FoliationError> {
    if field.slice.kind != SliceKind::R3 {
        return Err(FoliationError::WrongSliceKind);
    }
    let usable = (0..field.mu.len()).any(|i| !field.singular_mask[i] && field.branch[i] >= 0);
    if !usable {
        return Err(FoliationError::EmptyField);
    }
    Ok(SampledField { field })
}

enum StepOutcome {
    Ok {
        next: [f64; 3],
        dir_next: Direction3,
        turn: f64,
    },
    Fail {
        out_of_hull: bool,
    },
}

fn rk4_step<F: DirectionSampler + ?Sized>(field: &F, x: [f64; 3], h: f64) -> StepOutcome {
    let eval = |q: [f64; 3]| -> Result<[f64; 3], bool> {
        if !field.in_hull(q) {
            return Err(true);
        }
        match field.direction(q) {
            Some(d) => Ok(d.u()),
            None => Err(false),
        }
    };
    macro_rules! stage {
        ($q:expr) => {
            match eval($q) {
                Ok(u) => u,
                Err(out) => return StepOutcome::Fail { out_of_hull: out },
            }
        };
    }
    let k1 = stage!(x);
    let k2 = stage!(add3(x, scale3(k1, h / 2.0)));
    let k3 = stage!(add3(x, scale3(k2, h / 2.0)));
    let k4 = stage!(add3(x, scale3(k3, h)));
    let incr = add3(add3(k1, scale3(k2, 2.0)), add3(scale3(k3, 2.0), k4));
    let next = add3(x, scale3(incr, h / 6.0));
    let u_next = stage!(next);
    let turn = dot3(k1, u_next).clamp(-1.0, 1.0).acos();
    let dir_next = Direction3::new(u_next).expect("sampler returns unit vectors");
    StepOutcome::Ok {
        next,
        dir_next,
        turn,
    }
}

/// Traces the integral curve of the field from `seed`: classical RK4 with
/// internal step halving driven by the turn angle per step (cap 0.1 rad),
/// recording points at arclength cadence `step`. Stops at the hull boundary,
/// on the singular set, on closure (return to the seed within 1e−3 with an
/// aligned tangent), or at the arclength budget `max_len`.
///
/// `step` should be well below the leaf's curvature radius; recorded point
/// spacing then stays within [0.25·step, 4·step].
pub fn trace_leaf<F: DirectionSampler + ?Sized>(
    field: &F,
    seed: [f64; 3],
    step: f64,
    max_len: f64,
) -> Result<Leaf, FoliationError> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(FoliationError::BadStep(step));
    }
    if !(max_len > 0.0) || !max_len.is_finite() {
        return Err(FoliationError::BadStep(max_len));
    }
    if !field.in_hull(seed) {
        return Err(FoliationError::SeedInvalid { point: seed });
    }
    let u0 = field
        .direction(seed)
        .ok_or(FoliationError::SeedInvalid { point: seed })?;

    let base = step;
    let h_floor = base / 64.0;
    let h_cap = base / 2.0;
    let mut h = h_cap;
    let mut x = seed;
    let mut tangent = u0;
    let mut s_total = 0.0;
    let mut s_since = 0.0;
    let mut points = vec![seed];
    let mut arcs = vec![0.0];

    let stop = loop {
        if s_total >= max_len {
            break StopReason::StepLimit;
        }
        // Closure detection with a controlled final approach: once the
        // trajectory re-enters a step-sized ball around the seed moving the
        // same way, shrink the stride to land precisely.
        let dist = norm3(sub3(x, seed));
        let aligned = dot3(tangent.u(), u0.u());
        if s_total > 10.0 * base && dist < base && aligned > 0.99 {
            if dist < 5e-4 && aligned > 0.999 {
                break StopReason::Closure;
            }
            h = h.min((dist / 3.0).max(base / 256.0));
        }
        let mut failed = None;
        loop {
            match rk4_step(field, x, h) {
                StepOutcome::Ok { next, dir_next, turn } => {
                    if turn > 0.1 && h > h_floor {
                        h = (h / 2.0).max(h_floor);
                        continue;
                    }
                    x = next;
                    tangent = dir_next;
                    s_total += h;
                    s_since += h;
                    if turn < 0.02 {
                        h = (h * 1.5).min(h_cap);
                    }
                    break;
                }
                StepOutcome::Fail { out_of_hull } => {
                    if h > h_floor {
                        h = (h / 2.0).max(h_floor);
                        continue;
                    }
                    failed = Some(if out_of_hull {
                        StopReason::Boundary
                    } else {
                        StopReason::SingularMask
                    });
                    break;
                }
            }
        }
        if let Some(reason) = failed {
            break reason;
        }
        if s_since >= base {
            points.push(x);
            arcs.push(s_total);
            s_since = 0.0;
        }
    };

    // Always end the record at the final position, merging with the last
    // sample if it would land closer than the spacing floor.
    let gap = norm3(sub3(x, *points.last().expect("nonempty")));
    if gap > 0.0 {
        if gap < 0.25 * base && points.len() >= 2 {
            *points.last_mut().expect("nonempty") = x;
            *arcs.last_mut().expect("nonempty") = s_total;
        } else {
            points.push(x);
            arcs.push(s_total);
        }
    }

    Ok(Leaf {
        points,
        arclength: arcs,
        closed: stop == StopReason::Closure,
        stop_reason: stop,
    })
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let mut m = [[0.0f64; 4]; 3];
    for r in 0..3 {
        m[r][..3].copy_from_slice(&a[r]);
        m[r][3] = b[r];
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| {
            m[i][col]
                .abs()
                .partial_cmp(&m[j][col].abs())
                .expect("finite pivots")
        })?;
        if m[pivot][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, pivot);
        for r in (col + 1)..3 {
            let f = m[r][col] / m[col][col];
            for c in col..4 {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = [0.0f64; 3];
    for r in (0..3).rev() {
        let mut acc = m[r][3];
        for c in (r + 1)..3 {
            acc -= m[r][c] * x[c];
        }
        x[r] = acc / m[r][r];
    }
    Some(x)
}

/// The field of the associated family at slice time `t`, evaluated at `p`:
/// the unit vector W solving W = U₀(p − t·W). Damped fixed-point iteration
/// with a Newton fallback; convergence failure signals that `p` lies outside
/// the family's regular region at this time.
pub fn associated_field<F: DirectionSampler + ?Sized>(
    u0: &F,
    t: f64,
    p: [f64; 3],
) -> Result<Direction3, FoliationError> {
    let fail = || FoliationError::NoConvergence { point: p };
    let eval = |w: [f64; 3]| -> Option<[f64; 3]> {
        let q = sub3(p, scale3(w, t));
        if !u0.in_hull(q) {
            return None;
        }
        u0.direction(q).map(|d| d.u())
    };
    let mut w = eval([0.0; 3]).ok_or_else(fail)?;
    let mut iters = 0usize;
    while iters < 50 {
        iters += 1;
        let target = eval(w).ok_or_else(fail)?;
        let f = sub3(w, target);
        if norm3(f) < 1e-10 {
            return Direction3::new(w).map_err(|_| fail());
        }
        let mixed = add3(scale3(w, 0.5), scale3(target, 0.5));
        let n = norm3(mixed);
        if n < 1e-12 {
            return Err(fail());
        }
        w = scale3(mixed, 1.0 / n);
    }
    while iters < 500 {
        iters += 1;
        let target = eval(w).ok_or_else(fail)?;
        let f = sub3(w, target);
        if norm3(f) < 1e-10 {
            return Direction3::new(w).map_err(|_| fail());
        }
        let delta = 1e-6;
        let mut jac = [[0.0f64; 3]; 3];
        for col in 0..3 {
            let mut wp = w;
            wp[col] += delta;
            let mut wm = w;
            wm[col] -= delta;
            let tp = eval(wp).ok_or_else(fail)?;
            let tm = eval(wm).ok_or_else(fail)?;
            let fp = sub3(wp, tp);
            let fm = sub3(wm, tm);
            for row in 0..3 {
                jac[row][col] = (fp[row] - fm[row]) / (2.0 * delta);
            }
        }
        let step = solve3(jac, f).ok_or_else(fail)?;
        let wn = sub3(w, step);
        let n = norm3(wn);
        if !(n > 1e-12) || !n.is_finite() {
            return Err(fail());
        }
        w = scale3(wn, 1.0 / n);
    }
    Err(fail())
}

fn central_direction_derivative<F: DirectionSampler + ?Sized>(
    field: &F,
    p: [f64; 3],
    dir: [f64; 3],
    h: f64,
) -> Result<[f64; 3], FoliationError> {
    let sample = |q: [f64; 3]| -> Result<[f64; 3], FoliationError> {
        field
            .direction(q)
            .map(|d| d.u())
            .ok_or(FoliationError::StencilOutOfDomain { point: q })
    };
    let up = sample(add3(p, scale3(dir, h)))?;
    let um = sample(sub3(p, scale3(dir, h)))?;
    Ok(scale3(sub3(up, um), 0.5 / h))
}

/// Shear residual of a direction field at `p`: with X = e₂(U(p)) and the
/// quarter-turn Y = U × X, compares ∇_Y U against the quarter-turn of the
/// U-orthogonal part of ∇_X U, projected back onto U⊥. Zero (to truncation
/// order) exactly for conformal foliations.
pub fn shear_residual<F: DirectionSampler + ?Sized>(
    field: &F,
    p: [f64; 3],
    h: f64,
) -> Result<ResidualSample, FoliationError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(FoliationError::BadStep(h));
    }
    let u = field
        .direction(p)
        .ok_or(FoliationError::SeedInvalid { point: p })?;
    let uu = u.u();
    let (e2, _) = frame_from_direction(&u);
    let y = cross3(uu, e2);
    let grad_x = central_direction_derivative(field, p, e2, h)?;
    let grad_y = central_direction_derivative(field, p, y, h)?;
    let ax_perp = sub3(grad_x, scale3(uu, dot3(grad_x, uu)));
    let r = sub3(grad_y, cross3(uu, ax_perp));
    let r_perp = sub3(r, scale3(uu, dot3(r, uu)));
    Ok(ResidualSample {
        equation_id: EquationId::Conf,
        point: p.to_vec(),
        h,
        value: norm3(r_perp),
    })
}

/// Horizontal-conformality residual of a complex-valued function on ℝ³:
/// |Σᵢ (∂f/∂xᵢ)²| by central differences.
pub fn hwc3_residual<F: Fn([f64; 3]) -> Option<Complex64>>(
    f: &F,
    p: [f64; 3],
    h: f64,
) -> Result<ResidualSample, FoliationError> {
    let stencil =
        Stencil::full(&p, h).map_err(|_| FoliationError::BadStep(h))?;
    let g = numdiff::fd_gradient(
        &|x: &[f64]| f([x[0], x[1], x[2]]),
        &stencil,
    )
    .map_err(|e| match e {
        numdiff::NumDiffError::Eval { point } => FoliationError::StencilOutOfDomain {
            point: [point[0], point[1], point[2]],
        },
        _ => FoliationError::BadStep(h),
    })?;
    let value = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).norm();
    Ok(ResidualSample {
        equation_id: EquationId::Hc0,
        point: p.to_vec(),
        h,
        value,
    })
}
