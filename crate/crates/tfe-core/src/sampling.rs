//! Rejection sampling of points where finite-difference residuals are
//! trustworthy.
//!
//! Central differences certify an equation only where the field is smooth at
//! the stencil scale.  Near a branch locus, a pole of the fiber coordinate, or
//! a zero of the defining polynomial's discriminant, the truncation term blows
//! up and a failed residual says nothing about the equation.  The filters here
//! reject such points before any residual is computed, using direct probes of
//! the field rather than estimates derived from a particular surface.
//!
//! A point is admissible when, on every slice the checks will use:
//! * the fiber polynomial has well separated roots,
//! * the tracked root is finite and of moderate modulus, and
//! * divided differences of the field up to fourth order stay under fixed
//!   caps, so the h^2 truncation of each residual stays well below tolerance.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::NullCoords;
use crate::morphism::{MuField, PhiField};
use crate::surface::{kerr_polynomial, solve_mu, Branch, Builtin, TwistorSurface};
use crate::twistor::SliceKind;

/// Minimum pairwise chordal separation of fiber roots.
pub const ROOT_SEP: f64 = 0.05;

/// Stricter separation for the degree three builtin, whose root tracking is
/// purely lexicographic.
pub const CUBIC_ROOT_SEP: f64 = 0.12;

/// Minimum gap between real parts of finite roots for the cubic builtin.
pub const CUBIC_RE_SEP: f64 = 6e-2;

/// The tracked fiber value must satisfy `MU_BAND.0 <= |mu| <= MU_BAND.1`.
pub const MU_BAND: (f64, f64) = (0.5, 1.7);

/// Step used by the divided difference probes.
pub const PROBE_DELTA: f64 = 5e-3;

/// Caps on divided differences of a complex valued function along each
/// coordinate axis.
#[derive(Clone, Copy, Debug)]
pub struct ProbeCaps {
    pub slope: f64,
    pub third: f64,
    pub fourth: f64,
}

/// Caps applied to the fiber coordinate.
pub const MU_CAPS: ProbeCaps = ProbeCaps { slope: 2.0, third: 10.0, fourth: 15.0 };

/// Caps applied to a morphism value (looser, since the morphism compounds the
/// fiber coordinate with the chart inversion).
pub const PHI_CAPS: ProbeCaps = ProbeCaps { slope: 3.0, third: 15.0, fourth: 20.0 };

/// Largest morphism modulus accepted at a sample point.
pub const PHI_VALUE_CAP: f64 = 2.5;

/// Everything needed to decide admissibility for one field.
pub struct SamplePlan<'a> {
    /// Defining polynomial, when the field comes from one.  `None` skips the
    /// root separation gate (used by the synthetic control fields).
    pub psi: Option<&'a TwistorSurface>,
    pub field: &'a dyn MuField,
    pub branch: Branch,
    /// Enables surface specific floors that keep stencils away from known
    /// singular loci.
    pub builtin: Option<Builtin>,
    /// When present, sample points must also carry a tame morphism value.
    pub phi: Option<&'a PhiField>,
    /// Time coordinate of the Minkowski slice as a fraction of the sampled
    /// `x0`.
    pub mink_t_scale: f64,
}

fn embed(kind: SliceKind, x: [f64; 4]) -> NullCoords {
    match kind {
        SliceKind::RealR4 => NullCoords::real_r4(x),
        SliceKind::Minkowski => NullCoords::minkowski(x[0], [x[1], x[2], x[3]]),
        SliceKind::R3 => NullCoords::r3([x[1], x[2], x[3]]),
    }
}

fn roots_ok(psi: &TwistorSurface, p: &NullCoords, cubic: bool) -> bool {
    let poly = kerr_polynomial(psi, p);
    let roots = match solve_mu(&poly) {
        Ok(r) if !r.is_empty() => r,
        _ => return false,
    };
    let sep = if cubic { CUBIC_ROOT_SEP } else { ROOT_SEP };
    for i in 0..roots.len() {
        for j in (i + 1)..roots.len() {
            if roots[i].chordal(&roots[j]) < sep {
                return false;
            }
        }
    }
    if cubic {
        let re: Vec<f64> = roots.iter().filter_map(|r| r.as_finite().map(|z| z.re)).collect();
        for i in 0..re.len() {
            for j in (i + 1)..re.len() {
                if (re[i] - re[j]).abs() < CUBIC_RE_SEP {
                    return false;
                }
            }
        }
    }
    true
}

fn geometry_ok(b: Builtin, p: &NullCoords, mu: Complex64) -> bool {
    let [z1, zt1, z2, zt2] = p.z;
    match b {
        Builtin::Radial => (z2 * zt2).norm() > 0.81,
        Builtin::Villarceau { s } => (zt1 + Complex64::new(s, 0.0)).norm() > 0.8,
        Builtin::Circles => {
            let x0 = z1 + zt1;
            ((x0 * x0 * 0.25) + z2 * zt2).norm() > 0.35 && (z2 * zt2).norm() > 0.09
        }
        Builtin::Rotsym => {
            if zt1.norm() < 0.5 || zt2.norm() < 0.5 {
                return false;
            }
            let g = Complex64::new(1.0, 0.0) + z1 * zt1 - z2 * zt2;
            let disc = g * g + 4.0 * z1 * zt1 * z2 * zt2;
            (disc.sqrt() / (2.0 * zt1 * zt2)).norm() > 0.35
        }
        Builtin::Cubic => {
            let eta = -Complex64::i() * (z1 - mu * zt2);
            eta.norm() > 0.45 && (eta - 1.0).norm() > 0.45
        }
    }
}

fn differences_ok<F>(eval: F, caps: &ProbeCaps, center: Complex64) -> bool
where
    F: Fn(f64) -> Option<Complex64>,
{
    let d = PROBE_DELTA;
    let vals: Option<Vec<Complex64>> = [-2.0, -1.0, 1.0, 2.0].iter().map(|k| eval(k * d)).collect();
    let v = match vals {
        Some(v) => v,
        None => return false,
    };
    if (v[2] - v[1]).norm() / (2.0 * d) > caps.slope {
        return false;
    }
    let third = (v[3] - v[0] - 2.0 * (v[2] - v[1])).norm() / (2.0 * d.powi(3));
    if third > caps.third {
        return false;
    }
    let fourth = (v[0] - 4.0 * v[1] + 6.0 * center - 4.0 * v[2] + v[3]).norm() / d.powi(4);
    fourth <= caps.fourth
}

impl SamplePlan<'_> {
    fn slice_ok(&self, kind: SliceKind, x: [f64; 4]) -> bool {
        let p = embed(kind, x);
        if let Some(psi) = self.psi {
            if !roots_ok(psi, &p, matches!(self.builtin, Some(Builtin::Cubic))) {
                return false;
            }
        }
        let center = match self.field.mu(&p, None) {
            Some(c) => c,
            None => return false,
        };
        let mu = match center.as_finite() {
            Some(z) => z,
            None => return false,
        };
        if mu.norm() < MU_BAND.0 || mu.norm() > MU_BAND.1 {
            return false;
        }
        if let Some(b) = self.builtin {
            if !geometry_ok(b, &p, mu) {
                return false;
            }
        }
        let coords: &[usize] = match kind {
            SliceKind::R3 => &[1, 2, 3],
            _ => &[0, 1, 2, 3],
        };
        for &i in coords {
            let along = |s: f64| {
                let mut y = x;
                y[i] += s;
                self.field.mu(&embed(kind, y), Some(&center)).and_then(|m| m.as_finite())
            };
            if !differences_ok(along, &MU_CAPS, mu) {
                return false;
            }
        }
        true
    }

    fn phi_ok(&self, x: [f64; 4]) -> bool {
        let phi = match self.phi {
            Some(phi) => phi,
            None => return true,
        };
        for base in [x, [0.0, x[1], x[2], x[3]]] {
            let center = match phi.eval_r4(base) {
                Some(v) => v,
                None => return false,
            };
            if center.norm() > PHI_VALUE_CAP {
                return false;
            }
            for i in 0..4 {
                let along = |s: f64| {
                    let mut y = base;
                    y[i] += s;
                    phi.eval_r4(y)
                };
                if !differences_ok(along, &PHI_CAPS, center) {
                    return false;
                }
            }
        }
        match phi.eval_r3([x[1], x[2], x[3]]) {
            Some(v) => v.norm() <= PHI_VALUE_CAP,
            None => false,
        }
    }

    /// True when residual checks at `x` (and on the derived Minkowski and
    /// spatial slices) sit inside the trustworthy region.
    pub fn admissible(&self, x: [f64; 4]) -> bool {
        let xm = [x[0] * self.mink_t_scale, x[1], x[2], x[3]];
        let x3 = [0.0, x[1], x[2], x[3]];
        self.slice_ok(SliceKind::RealR4, x)
            && self.slice_ok(SliceKind::Minkowski, xm)
            && self.slice_ok(SliceKind::R3, x3)
            && self.phi_ok(x)
    }
}

fn draw(rng: &mut ChaCha8Rng) -> [f64; 4] {
    [
        {
            let a: f64 = rng.gen_range(0.25..1.0);
            if rng.gen_bool(0.5) {
                a
            } else {
                -a
            }
        },
        rng.gen_range(-1.2..1.2),
        rng.gen_range(-1.5..1.5),
        rng.gen_range(-1.5..1.5),
    ]
}

/// Draws `count` points from the sample box with no admissibility gate, for
/// fields defined and smooth everywhere.
pub fn sample_box(seed: u64, count: usize) -> Vec<[f64; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| draw(&mut rng)).collect()
}

/// Draws `count` admissible points, or fewer if `max_tries` runs out.
///
/// Points have `|x0|` in `[0.25, 1)`, `x1` in `[-1.2, 1.2)`, and `x2`, `x3`
/// in `[-1.5, 1.5)`.  The draw order is fixed so a given seed always yields
/// the same points.
pub fn sample_admissible(
    plan: &SamplePlan<'_>,
    seed: u64,
    count: usize,
    max_tries: usize,
) -> Vec<[f64; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count && tries < max_tries {
        tries += 1;
        let x = draw(&mut rng);
        if plan.admissible(x) {
            out.push(x);
        }
    }
    out
}

/// Plan for a builtin surface: closed or tracked fiber, geometric floors, and
/// morphism gates.
pub fn builtin_plan<'a>(
    psi: &'a TwistorSurface,
    field: &'a dyn MuField,
    branch: Branch,
    builtin: Builtin,
    phi: Option<&'a PhiField>,
) -> SamplePlan<'a> {
    SamplePlan { psi: Some(psi), field, branch, builtin: Some(builtin), phi, mink_t_scale: 0.4 }
}
