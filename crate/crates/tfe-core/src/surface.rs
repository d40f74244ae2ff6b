//! Holomorphic surfaces in twistor space as homogeneous polynomials, their
//! reduction at a point of ℂ⁴ to a univariate polynomial in the fiber
//! coordinate μ, root solving, and branch continuation over spatial grids.
//!
//! Substituting the fundamental map w = [1, μ, z₁ − μz̃₂, z₂ + μz̃₁] into a
//! degree-d surface ψ(w) = 0 produces, at each point p, a polynomial of
//! degree ≤ d in μ whose roots are the fiber values over p.

use crate::geom::{ExtendedComplex, NullCoords};
use crate::twistor::SliceSpec;
use num_complex::Complex64;
use serde::Deserialize;
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("surface degree must be positive")]
    ZeroDegree,
    #[error("surface has no nonzero coefficient")]
    EmptySurface,
    #[error("term {term}: exponents sum to {got}, expected degree {expected}")]
    BadExponent {
        term: usize,
        expected: u32,
        got: u32,
    },
    #[error("surface JSON: {0}")]
    Json(String),
    #[error("surface contains the fiber over this point (all reduced coefficients vanish)")]
    FiberContained,
    #[error("seed value is not a root at the seed node (residual {residual:.3e})")]
    SeedNotRoot { residual: f64 },
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("unknown surface `{0}`")]
    UnknownSurface(String),
}

/// One monomial coeff · w₀^e₀ w₁^e₁ w₂^e₂ w₃^e₃.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub exp: [u32; 4],
    pub coeff: Complex64,
}

/// A homogeneous polynomial on ℂ⁴ defining a surface {ψ = 0} in the
/// projective space.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistorSurface {
    degree: u32,
    terms: Vec<Term>,
}

#[derive(Deserialize)]
struct SurfaceDoc {
    degree: u32,
    terms: Vec<TermDoc>,
}

#[derive(Deserialize)]
struct TermDoc {
    exp: [u32; 4],
    re: f64,
    im: f64,
}

impl TwistorSurface {
    pub fn new(degree: u32, terms: Vec<Term>) -> Result<Self, SurfaceError> {
        if degree == 0 {
            return Err(SurfaceError::ZeroDegree);
        }
        for (k, t) in terms.iter().enumerate() {
            let sum: u32 = t.exp.iter().sum();
            if sum != degree {
                return Err(SurfaceError::BadExponent {
                    term: k + 1,
                    expected: degree,
                    got: sum,
                });
            }
        }
        if !terms.iter().any(|t| t.coeff.norm_sqr() > 0.0) {
            return Err(SurfaceError::EmptySurface);
        }
        Ok(TwistorSurface { degree, terms })
    }

    /// Parses the JSON document {"degree": d, "terms": [{"exp": [e0,e1,e2,e3],
    /// "re": r, "im": i}, ...]}. Exponent sums are validated against the
    /// degree; violations name the offending term (1-based).
    pub fn from_json_str(s: &str) -> Result<Self, SurfaceError> {
        let doc: SurfaceDoc =
            serde_json::from_str(s).map_err(|e| SurfaceError::Json(e.to_string()))?;
        let terms = doc
            .terms
            .iter()
            .map(|t| Term {
                exp: t.exp,
                coeff: Complex64::new(t.re, t.im),
            })
            .collect();
        TwistorSurface::new(doc.degree, terms)
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn eval(&self, w: [Complex64; 4]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            acc += t.coeff
                * w[0].powu(t.exp[0])
                * w[1].powu(t.exp[1])
                * w[2].powu(t.exp[2])
                * w[3].powu(t.exp[3]);
        }
        acc
    }

    pub fn scaled(&self, lambda: Complex64) -> TwistorSurface {
        TwistorSurface {
            degree: self.degree,
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    exp: t.exp,
                    coeff: lambda * t.coeff,
                })
                .collect(),
        }
    }
}

/// The reduced polynomial Σ cₖ μᵏ at a point. Length is always nominal
/// degree + 1; trailing zero coefficients are kept because a degree drop
/// encodes roots at μ = ∞.
#[derive(Debug, Clone, PartialEq)]
pub struct KerrPoly {
    pub coeffs: Vec<Complex64>,
}

impl KerrPoly {
    pub fn nominal_degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, mu: Complex64) -> Complex64 {
        let mut p = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            p = p * mu + c;
        }
        p
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Scale-free residual of a candidate root: |p(μ)| / (max|cₖ| · (1+|μ|)ᵈ)
    /// for finite μ, and |c_d| / max|cₖ| for μ = ∞ (the reversed polynomial
    /// at 0). The (1+|μ|)ᵈ factor keeps the bound meaningful for
    /// large-modulus roots. An all-zero polynomial has no valid root and
    /// returns +∞.
    pub fn residual(&self, mu: &ExtendedComplex) -> f64 {
        let maxc = self.max_coeff();
        if maxc == 0.0 {
            return f64::INFINITY;
        }
        match mu {
            ExtendedComplex::Infinity => self.coeffs[self.nominal_degree()].norm() / maxc,
            ExtendedComplex::Finite(m) => {
                let scale = (1.0 + m.norm()).powi(self.nominal_degree() as i32);
                self.eval(*m).norm() / (maxc * scale)
            }
        }
    }
}

fn binom(n: u32, k: u32) -> f64 {
    let mut acc = 1u128;
    for j in 0..k as u128 {
        acc = acc * (n as u128 - j) / (j + 1);
    }
    acc as f64
}

/// Reduces ψ at p: substitutes w₀ = 1, w₁ = μ, w₂ = z₁ − μz̃₂,
/// w₃ = z₂ + μz̃₁ and expands in powers of μ.
pub fn kerr_polynomial(psi: &TwistorSurface, p: &NullCoords) -> KerrPoly {
    let d = psi.degree() as usize;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); d + 1];
    let [z1, zt1, z2, zt2] = p.z;
    for t in psi.terms() {
        let [_, e1, e2, e3] = t.exp;
        for j in 0..=e2 {
            for k in 0..=e3 {
                let c = t.coeff
                    * binom(e2, j)
                    * binom(e3, k)
                    * z1.powu(e2 - j)
                    * (-zt2).powu(j)
                    * z2.powu(e3 - k)
                    * zt1.powu(k);
                coeffs[(e1 + j + k) as usize] += c;
            }
        }
    }
    KerrPoly { coeffs }
}

fn horner_both(c: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &ck in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + ck;
    }
    (p, dp)
}

/// Both roots of c₂μ² + c₁μ + c₀ with c₂ ≠ 0, using the cancellation-free
/// form: q = −(c₁ + sign·√disc)/2 with the sign chosen to maximize |q|,
/// roots q/c₂ and c₀/q.
fn solve_quadratic(c0: Complex64, c1: Complex64, c2: Complex64) -> [Complex64; 2] {
    let disc = c1 * c1 - 4.0 * c2 * c0;
    let sq = disc.sqrt();
    let sign = if (c1.conj() * sq).re >= 0.0 { 1.0 } else { -1.0 };
    let q = -(c1 + sign * sq) / 2.0;
    if q.norm_sqr() == 0.0 {
        // Only possible with c₀ = 0 (and then c₁ = 0 or the root at 0 pairs
        // with −c₁/c₂).
        return [Complex64::new(0.0, 0.0), -c1 / c2];
    }
    [q / c2, c0 / q]
}

/// Aberth-Ehrlich simultaneous iteration on the (normalized) coefficient
/// slice with nonzero leading term, followed by two Newton polish steps.
/// Fully deterministic: fixed initial circle, fixed sweep order.
fn solve_aberth(coeffs: &[Complex64]) -> Vec<Complex64> {
    let d = coeffs.len() - 1;
    let lead = coeffs[d];
    let monic: Vec<Complex64> = coeffs.iter().map(|c| c / lead).collect();
    let radius = 1.0 + monic[..d].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..d)
        .map(|k| {
            let th = std::f64::consts::TAU * (k as f64 + 0.25) / d as f64;
            radius * Complex64::new(th.cos(), th.sin())
        })
        .collect();
    for _ in 0..200 {
        let mut moved = false;
        for i in 0..d {
            let (p, dp) = horner_both(&monic, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            if dp.norm() == 0.0 {
                // Stationary point of the polynomial; nudge deterministically.
                let nudge = 1e-8 * (1.0 + z[i].norm());
                z[i] += Complex64::new(nudge, 0.0);
                moved = true;
                continue;
            }
            let newton = p / dp;
            let mut sum = Complex64::new(0.0, 0.0);
            for j in 0..d {
                if j != i {
                    let diff = z[i] - z[j];
                    if diff.norm_sqr() > 0.0 {
                        sum += diff.inv();
                    }
                }
            }
            let denom = Complex64::new(1.0, 0.0) - newton * sum;
            let corr = if denom.norm_sqr() > 0.0 {
                newton / denom
            } else {
                newton
            };
            z[i] -= corr;
            if corr.norm() > 1e-14 * (1.0 + z[i].norm()) {
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    for zi in z.iter_mut() {
        for _ in 0..2 {
            let (p, dp) = horner_both(&monic, *zi);
            if dp.norm() > 0.0 {
                let step = p / dp;
                if step.norm().is_finite() {
                    *zi -= step;
                }
            }
        }
    }
    z
}

/// All nominal-degree roots of the reduced polynomial, counted with
/// multiplicity; degree drop is reported as roots at ∞. Degree ≤ 2 uses
/// closed formulas, higher degrees the Aberth iteration.
pub fn solve_mu(poly: &KerrPoly) -> Result<Vec<ExtendedComplex>, SurfaceError> {
    let maxc = poly.max_coeff();
    if maxc == 0.0 {
        return Err(SurfaceError::FiberContained);
    }
    let c: Vec<Complex64> = poly.coeffs.iter().map(|v| v / maxc).collect();
    let mut d_eff = c.len() - 1;
    while d_eff > 0 && c[d_eff].norm() < 1e-12 {
        d_eff -= 1;
    }
    let mut roots: Vec<ExtendedComplex> =
        vec![ExtendedComplex::Infinity; c.len() - 1 - d_eff];
    match d_eff {
        0 => {}
        1 => roots.push(ExtendedComplex::new(-c[0] / c[1])),
        2 => {
            let [r1, r2] = solve_quadratic(c[0], c[1], c[2]);
            roots.push(ExtendedComplex::new(r1));
            roots.push(ExtendedComplex::new(r2));
        }
        _ => {
            for r in solve_aberth(&c[..=d_eff]) {
                roots.push(ExtendedComplex::new(r));
            }
        }
    }
    Ok(roots)
}

/// Which of the (up to two) closed-form fiber branches of a built-in
/// surface to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn parse(s: &str) -> Option<Branch> {
        match s {
            "+" | "plus" => Some(Branch::Plus),
            "-" | "minus" => Some(Branch::Minus),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Plus => "+",
            Branch::Minus => "-",
        }
    }
}

/// Division extended to the sphere: num/0 = ∞ for num ≠ 0, 0/0 undefined.
pub(crate) fn ediv(num: Complex64, den: Complex64) -> Option<ExtendedComplex> {
    if den.norm_sqr() == 0.0 {
        if num.norm_sqr() == 0.0 {
            None
        } else {
            Some(ExtendedComplex::Infinity)
        }
    } else {
        Some(ExtendedComplex::new(num / den))
    }
}

/// The built-in example surfaces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Builtin {
    /// ψ = w₀w₃ − w₁w₂: leaves are radial lines from the origin.
    Radial,
    /// ψ = s·w₁ + w₃: leaves are the Villarceau circles of the tori around
    /// the x₁-axis (s = 0 degenerates to circles tangent to the axis).
    Villarceau { s: f64 },
    /// ψ = w₀w₃ + w₁w₂: leaves are circles around the x₁-axis; the
    /// associated family at t ≠ 0 gives involutes of a circle.
    Circles,
    /// ψ = w₀w₁ + w₂w₃: a rotationally symmetric foliation with a branch
    /// circle at x₁ = 0, |x| = 1.
    Rotsym,
    /// ψ = w₁w₂² + i·w₀²w₃: a cubic with no closed-form fiber solution.
    Cubic,
}

impl Builtin {
    /// Parses `radial`, `circles`, `rotsym`, `cubic`, or `villarceau:<s>`.
    pub fn parse(spec: &str) -> Result<Builtin, SurfaceError> {
        let (name, param) = match spec.split_once(':') {
            Some((n, p)) => (n.trim(), Some(p.trim())),
            None => (spec.trim(), None),
        };
        match (name, param) {
            ("radial", None) => Ok(Builtin::Radial),
            ("circles", None) => Ok(Builtin::Circles),
            ("rotsym", None) => Ok(Builtin::Rotsym),
            ("cubic", None) => Ok(Builtin::Cubic),
            ("villarceau", Some(p)) => p
                .parse::<f64>()
                .map(|s| Builtin::Villarceau { s })
                .map_err(|_| {
                    SurfaceError::UnknownSurface(format!("villarceau:{p} (bad parameter)"))
                }),
            ("villarceau", None) => Err(SurfaceError::UnknownSurface(
                "villarceau (requires a parameter, e.g. villarceau:1)".into(),
            )),
            _ => Err(SurfaceError::UnknownSurface(spec.into())),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Builtin::Radial => "radial".into(),
            Builtin::Villarceau { s } => format!("villarceau:{s}"),
            Builtin::Circles => "circles".into(),
            Builtin::Rotsym => "rotsym".into(),
            Builtin::Cubic => "cubic".into(),
        }
    }

    /// Names accepted by [`Builtin::parse`], for help and listing output.
    pub fn catalog() -> [&'static str; 5] {
        ["radial", "villarceau:<s>", "circles", "rotsym", "cubic"]
    }

    pub fn surface(&self) -> TwistorSurface {
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::i();
        let terms = match self {
            Builtin::Radial => vec![
                Term { exp: [1, 0, 0, 1], coeff: one },
                Term { exp: [0, 1, 1, 0], coeff: -one },
            ],
            Builtin::Villarceau { s } => vec![
                Term { exp: [0, 1, 0, 0], coeff: Complex64::new(*s, 0.0) },
                Term { exp: [0, 0, 0, 1], coeff: one },
            ],
            Builtin::Circles => vec![
                Term { exp: [1, 0, 0, 1], coeff: one },
                Term { exp: [0, 1, 1, 0], coeff: one },
            ],
            Builtin::Rotsym => vec![
                Term { exp: [1, 1, 0, 0], coeff: one },
                Term { exp: [0, 0, 1, 1], coeff: one },
            ],
            Builtin::Cubic => vec![
                Term { exp: [0, 1, 2, 0], coeff: one },
                Term { exp: [2, 0, 0, 1], coeff: i },
            ],
        };
        let degree = match self {
            Builtin::Villarceau { .. } => 1,
            Builtin::Cubic => 3,
            _ => 2,
        };
        TwistorSurface::new(degree, terms).expect("built-in surfaces are valid")
    }

    pub fn has_closed_mu(&self) -> bool {
        !matches!(self, Builtin::Cubic)
    }

    /// The closed-form fiber value on real or Minkowski slice points
    /// (spatial coordinates real; x₀ may be −i t). Returns None where the
    /// surface contains the fiber or no closed form exists.
    pub fn closed_mu(&self, p: &NullCoords, branch: Branch) -> Option<ExtendedComplex> {
        let i = Complex64::i();
        let [z1, zt1, z2, zt2] = p.z;
        match self {
            Builtin::Cubic => None,
            Builtin::Villarceau { s } => ediv(-z2, zt1 + Complex64::new(*s, 0.0)),
            Builtin::Radial => {
                // Roots of z̃₂μ² − 2i x₁ μ + z₂: μ± = i(x₁ ∓ m)/z̃₂
                // = −i z₂/(x₁ ± m), m = √(x₁² + z₂z̃₂) (principal; the
                // spatial radius on real slices, t-independent on the
                // Minkowski family). Each branch uses whichever form avoids
                // cancellation.
                let x1 = p.x[1];
                let m = (x1 * x1 + z2 * zt2).sqrt();
                if m.norm() < 1e-300 {
                    return None;
                }
                let (direct_num, alt_den) = match branch {
                    Branch::Plus => (x1 - m, x1 + m),
                    Branch::Minus => (x1 + m, x1 - m),
                };
                if direct_num.norm() >= alt_den.norm() {
                    ediv(i * direct_num, zt2)
                } else {
                    ediv(-i * z2, alt_den)
                }
            }
            Builtin::Circles => {
                // Roots of z̃₂μ² − 2x₀μ − z₂: μ± = (x₀ ± s)/z̃₂
                // = −z₂/(x₀ ∓ s), s = √(x₀² + z₂z̃₂) (principal).
                let x0 = p.x[0];
                let s = (x0 * x0 + z2 * zt2).sqrt();
                let (direct_num, alt_den) = match branch {
                    Branch::Plus => (x0 + s, x0 - s),
                    Branch::Minus => (x0 - s, x0 + s),
                };
                if direct_num.norm() >= alt_den.norm() {
                    ediv(direct_num, zt2)
                } else {
                    ediv(-z2, alt_den)
                }
            }
            Builtin::Rotsym => {
                // Roots of z̃₁z̃₂μ² − gμ − z₁z₂, g = 1 + z₁z̃₁ − z₂z̃₂:
                // μ± = (g ± √disc)/(2z̃₁z̃₂) = −2z₁z₂/(g ∓ √disc),
                // disc = g² + 4·z₁z̃₁·z₂z̃₂ (principal root).
                let a = z1 * zt1;
                let b = z2 * zt2;
                let g = Complex64::new(1.0, 0.0) + a - b;
                let sq = (g * g + 4.0 * a * b).sqrt();
                let (direct_num, alt_den) = match branch {
                    Branch::Plus => (g + sq, g - sq),
                    Branch::Minus => (g - sq, g + sq),
                };
                if direct_num.norm() >= alt_den.norm() {
                    ediv(direct_num, 2.0 * zt1 * zt2)
                } else {
                    ediv(-2.0 * z1 * z2, alt_den)
                }
            }
        }
    }

    /// Numeric fiber value nearest (chordally) to `hint`. None where the
    /// surface contains the fiber.
    pub fn mu_at(&self, p: &NullCoords, hint: &ExtendedComplex) -> Option<ExtendedComplex> {
        let poly = kerr_polynomial(&self.surface(), p);
        let roots = solve_mu(&poly).ok()?;
        nearest_root(&roots, hint)
    }

    /// Branch value at a seed point: the closed form when one exists,
    /// otherwise the lexicographic rule (roots ordered by (Re, Im) with ∞
    /// last; `+` is the first, `-` the last).
    pub fn seed_mu(&self, p: &NullCoords, branch: Branch) -> Option<ExtendedComplex> {
        if self.has_closed_mu() {
            self.closed_mu(p, branch)
        } else {
            let poly = kerr_polynomial(&self.surface(), p);
            let mut roots = solve_mu(&poly).ok()?;
            sort_lex(&mut roots);
            match branch {
                Branch::Plus => roots.first().copied(),
                Branch::Minus => roots.last().copied(),
            }
        }
    }
}

/// Orders sphere values by (finite first, then Re, then Im); ∞ sorts last.
pub fn sort_lex(roots: &mut [ExtendedComplex]) {
    roots.sort_by(|a, b| {
        let ka = match a {
            ExtendedComplex::Infinity => (1u8, 0.0, 0.0),
            ExtendedComplex::Finite(z) => (0u8, z.re, z.im),
        };
        let kb = match b {
            ExtendedComplex::Infinity => (1u8, 0.0, 0.0),
            ExtendedComplex::Finite(z) => (0u8, z.re, z.im),
        };
        ka.partial_cmp(&kb).expect("root keys are finite")
    });
}

/// The root chordally nearest to `target`.
pub fn nearest_root(roots: &[ExtendedComplex], target: &ExtendedComplex) -> Option<ExtendedComplex> {
    roots
        .iter()
        .min_by(|a, b| {
            target
                .chordal(a)
                .partial_cmp(&target.chordal(b))
                .expect("chordal distances are finite")
        })
        .copied()
}

/// Axis-aligned rectilinear grid over (x₁, x₂, x₃) with uniform spacing per
/// axis. Linear index order: x₁ outermost, x₃ innermost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    min: [f64; 3],
    step: [f64; 3],
    counts: [usize; 3],
}

impl GridSpec {
    pub fn new(min: [f64; 3], max: [f64; 3], step: [f64; 3]) -> Result<Self, SurfaceError> {
        let mut counts = [0usize; 3];
        for ax in 0..3 {
            if !(step[ax] > 0.0) || !step[ax].is_finite() {
                return Err(SurfaceError::BadGrid(format!(
                    "axis {ax}: step must be positive, got {}",
                    step[ax]
                )));
            }
            if !(max[ax] >= min[ax]) || !min[ax].is_finite() || !max[ax].is_finite() {
                return Err(SurfaceError::BadGrid(format!(
                    "axis {ax}: need min <= max, got [{}, {}]",
                    min[ax], max[ax]
                )));
            }
            counts[ax] = ((max[ax] - min[ax]) / step[ax] + 1e-9).floor() as usize + 1;
        }
        Ok(GridSpec { min, step, counts })
    }

    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    pub fn len(&self) -> usize {
        self.counts[0] * self.counts[1] * self.counts[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step(&self) -> [f64; 3] {
        self.step
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.min[axis] + i as f64 * self.step[axis]
    }

    pub fn point(&self, idx: [usize; 3]) -> [f64; 3] {
        [
            self.coord(0, idx[0]),
            self.coord(1, idx[1]),
            self.coord(2, idx[2]),
        ]
    }

    pub fn lin(&self, idx: [usize; 3]) -> usize {
        (idx[0] * self.counts[1] + idx[1]) * self.counts[2] + idx[2]
    }

    /// The grid node nearest to `p` (clamped to the grid box).
    pub fn nearest_node(&self, p: [f64; 3]) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for ax in 0..3 {
            let raw = ((p[ax] - self.min[ax]) / self.step[ax]).round();
            idx[ax] = raw.clamp(0.0, (self.counts[ax] - 1) as f64) as usize;
        }
        idx
    }

    pub fn iter_indices(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let [n0, n1, n2] = self.counts;
        (0..n0).flat_map(move |i| (0..n1).flat_map(move |j| (0..n2).map(move |k| [i, j, k])))
    }

    fn neighbors(&self, idx: [usize; 3]) -> Vec<[usize; 3]> {
        let mut out = Vec::with_capacity(6);
        for ax in 0..3 {
            if idx[ax] > 0 {
                let mut n = idx;
                n[ax] -= 1;
                out.push(n);
            }
            if idx[ax] + 1 < self.counts[ax] {
                let mut n = idx;
                n[ax] += 1;
                out.push(n);
            }
        }
        out
    }
}

/// A sampled fiber branch over a grid on a slice. Masked nodes carry no
/// field value: the surface contains the fiber there, roots collide, the
/// branch jumps, or continuation never reached them.
#[derive(Debug, Clone)]
pub struct DirectionField {
    pub slice: SliceSpec,
    pub grid: GridSpec,
    pub mu: Vec<ExtendedComplex>,
    pub branch: Vec<i32>,
    pub singular_mask: Vec<bool>,
}

impl DirectionField {
    pub fn mu_at(&self, idx: [usize; 3]) -> Option<ExtendedComplex> {
        let lin = self.grid.lin(idx);
        if self.singular_mask[lin] || self.branch[lin] < 0 {
            None
        } else {
            Some(self.mu[lin])
        }
    }

    pub fn direction_at(&self, idx: [usize; 3]) -> Option<crate::geom::Direction3> {
        self.mu_at(idx).map(crate::geom::mu_to_direction)
    }
}

/// Masking rules applied at each node during continuation. Scale factors
/// make the thresholds dimensionless.
const FIBER_ABS_TOL: f64 = 1e-12;
const DISC_TOL: f64 = 1e-10;
const COLLISION_CHORDAL_TOL: f64 = 1e-4;
const CONTINUITY_CHORDAL_TOL: f64 = 0.3;

enum NodeRoots {
    Fiber,
    Collision,
    Roots(Vec<ExtendedComplex>),
}

fn eval_node(psi: &TwistorSurface, p: &NullCoords) -> NodeRoots {
    let poly = kerr_polynomial(psi, p);
    let maxz = p.z.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let scale = (1.0 + maxz).powi(psi.degree() as i32);
    if poly.max_coeff() < FIBER_ABS_TOL * scale {
        return NodeRoots::Fiber;
    }
    if poly.nominal_degree() == 2 {
        let [c0, c1, c2] = [poly.coeffs[0], poly.coeffs[1], poly.coeffs[2]];
        let disc = c1 * c1 - 4.0 * c2 * c0;
        let m = poly.max_coeff();
        if disc.norm() < DISC_TOL * m * m {
            return NodeRoots::Collision;
        }
    }
    let roots = solve_mu(&poly).expect("nonzero polynomial");
    if roots.len() >= 2 {
        let mut min_sep = f64::INFINITY;
        for i in 0..roots.len() {
            for j in (i + 1)..roots.len() {
                min_sep = min_sep.min(roots[i].chordal(&roots[j]));
            }
        }
        if min_sep < COLLISION_CHORDAL_TOL {
            return NodeRoots::Collision;
        }
    }
    NodeRoots::Roots(roots)
}

/// Breadth-first branch continuation of the fiber field from a seed node.
/// At each frontier node the root chordally nearest to an already-assigned
/// neighbor is taken, provided the jump stays below the continuity guard;
/// every assigned node therefore connects to the seed through a chain of
/// sub-guard jumps. Nodes with colliding roots or fiber-containing points
/// are masked, as are nodes no admissible route ever reaches. Sequential by
/// design: the result is order-dependent and reproducible.
pub fn field_over_grid(
    psi: &TwistorSurface,
    slice: &SliceSpec,
    grid: &GridSpec,
    seed_point: [f64; 3],
    seed_mu: ExtendedComplex,
) -> Result<DirectionField, SurfaceError> {
    if grid.is_empty() {
        return Err(SurfaceError::BadGrid("empty grid".into()));
    }
    let n = grid.len();
    let mut mu = vec![ExtendedComplex::zero(); n];
    let mut branch = vec![-1i32; n];
    let mut singular_mask = vec![false; n];

    let seed_idx = grid.nearest_node(seed_point);
    let seed_p = slice.embed3(grid.point(seed_idx));
    let seed_poly = kerr_polynomial(psi, &seed_p);
    let res = seed_poly.residual(&seed_mu);
    if !(res < 1e-8) {
        return Err(SurfaceError::SeedNotRoot { residual: res });
    }
    match eval_node(psi, &seed_p) {
        NodeRoots::Roots(roots) => {
            let best = nearest_root(&roots, &seed_mu).expect("roots nonempty");
            let lin = grid.lin(seed_idx);
            mu[lin] = best;
            branch[lin] = 0;
        }
        _ => {
            // Fiber-containing or colliding seed node: no branch to start.
            return Err(SurfaceError::SeedNotRoot {
                residual: f64::INFINITY,
            });
        }
    }

    let mut queue = VecDeque::new();
    queue.push_back(seed_idx);
    while let Some(cur) = queue.pop_front() {
        let cur_mu = mu[grid.lin(cur)];
        for nb in grid.neighbors(cur) {
            let lin = grid.lin(nb);
            if branch[lin] >= 0 || singular_mask[lin] {
                continue;
            }
            let p = slice.embed3(grid.point(nb));
            match eval_node(psi, &p) {
                NodeRoots::Fiber | NodeRoots::Collision => {
                    singular_mask[lin] = true;
                }
                NodeRoots::Roots(roots) => {
                    let best = nearest_root(&roots, &cur_mu).expect("roots nonempty");
                    if cur_mu.chordal(&best) > CONTINUITY_CHORDAL_TOL {
                        // No trustworthy match along this route; another
                        // assigned neighbor may still reach the node with a
                        // smaller jump, so leave it unassigned rather than
                        // masking it outright.
                        continue;
                    }
                    mu[lin] = best;
                    branch[lin] = 0;
                    queue.push_back(nb);
                }
            }
        }
    }

    // Unreached nodes carry no trustworthy value; mask them.
    for lin in 0..n {
        if branch[lin] < 0 {
            singular_mask[lin] = true;
        }
    }

    Ok(DirectionField {
        slice: *slice,
        grid: *grid,
        mu,
        branch,
        singular_mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_c(rng: &mut ChaCha8Rng, scale: f64) -> Complex64 {
        c(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))
    }

    fn random_point(rng: &mut ChaCha8Rng) -> NullCoords {
        NullCoords::from_cartesian(std::array::from_fn(|_| random_c(rng, 2.0)))
    }

    #[test]
    fn radial_reduction_symbolic() {
        let psi = Builtin::Radial.surface();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let p = random_point(&mut rng);
            let poly = kerr_polynomial(&psi, &p);
            assert!((poly.coeffs[0] - p.z[2]).norm() < 1e-14);
            assert!((poly.coeffs[1] - (p.z[1] - p.z[0])).norm() < 1e-14);
            assert!((poly.coeffs[2] - p.z[3]).norm() < 1e-14);
        }
        let p = NullCoords::r3([0.0, 1.0, 0.0]);
        let poly = kerr_polynomial(&psi, &p);
        assert!((poly.coeffs[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!(poly.coeffs[1].norm() < 1e-15);
        assert!((poly.coeffs[2] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn villarceau_reduction_symbolic() {
        let s = 0.75;
        let psi = Builtin::Villarceau { s }.surface();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let p = random_point(&mut rng);
            let poly = kerr_polynomial(&psi, &p);
            assert_eq!(poly.coeffs.len(), 2);
            assert!((poly.coeffs[0] - p.z[2]).norm() < 1e-14);
            assert!((poly.coeffs[1] - (p.z[1] + s)).norm() < 1e-14);
        }
    }

    #[test]
    fn reduction_matches_surface_evaluation() {
        // The expanded coefficients must reproduce ψ on the fiber line for
        // arbitrary μ, for every built-in.
        let builtins = [
            Builtin::Radial,
            Builtin::Villarceau { s: 1.0 },
            Builtin::Circles,
            Builtin::Rotsym,
            Builtin::Cubic,
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for b in builtins {
            let psi = b.surface();
            for _ in 0..5 {
                let p = random_point(&mut rng);
                let poly = kerr_polynomial(&psi, &p);
                for _ in 0..20 {
                    let mu = random_c(&mut rng, 3.0);
                    let w = [
                        c(1.0, 0.0),
                        mu,
                        p.z[0] - mu * p.z[3],
                        p.z[2] + mu * p.z[1],
                    ];
                    let direct = psi.eval(w);
                    let expanded = poly.eval(mu);
                    let scale = 1.0 + direct.norm();
                    assert!(
                        (direct - expanded).norm() < 1e-10 * scale,
                        "{} at mu={mu}",
                        b.name()
                    );
                }
            }
        }
    }

    #[test]
    fn solve_direct_cases() {
        let roots = solve_mu(&KerrPoly {
            coeffs: vec![c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        })
        .unwrap();
        let mut found_i = false;
        let mut found_mi = false;
        for r in &roots {
            let z = r.as_finite().unwrap();
            if (z - c(0.0, 1.0)).norm() < 1e-14 {
                found_i = true;
            }
            if (z - c(0.0, -1.0)).norm() < 1e-14 {
                found_mi = true;
            }
        }
        assert!(found_i && found_mi);

        // Villarceau with s=1 at a point with z₂ = 1, z̃₁ = 0.
        let roots = solve_mu(&KerrPoly {
            coeffs: vec![c(1.0, 0.0), c(1.0, 0.0)],
        })
        .unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0].as_finite().unwrap() - c(-1.0, 0.0)).norm() < 1e-15);

        let roots = solve_mu(&KerrPoly {
            coeffs: vec![c(0.0, 0.0), c(1.0, 0.0)],
        })
        .unwrap();
        assert!(roots[0].as_finite().unwrap().norm() < 1e-15);

        let roots = solve_mu(&KerrPoly {
            coeffs: vec![c(1.0, 0.0), c(0.0, 0.0)],
        })
        .unwrap();
        assert!(roots[0].is_inf());

        assert!(matches!(
            solve_mu(&KerrPoly {
                coeffs: vec![c(0.0, 0.0); 3]
            }),
            Err(SurfaceError::FiberContained)
        ));
    }

    #[test]
    fn solver_reconstructs_known_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for deg in 3..=6 {
            for _ in 0..20 {
                let truth: Vec<Complex64> =
                    (0..deg).map(|_| random_c(&mut rng, 2.0)).collect();
                // Expand Π (μ − rᵢ) into ascending coefficients.
                let mut coeffs = vec![c(0.0, 0.0); deg + 1];
                coeffs[0] = c(1.0, 0.0);
                let mut top = 0;
                for r in &truth {
                    top += 1;
                    for k in (0..=top).rev() {
                        let lower = if k > 0 { coeffs[k - 1] } else { c(0.0, 0.0) };
                        coeffs[k] = lower - r * coeffs[k];
                    }
                }
                let poly = KerrPoly { coeffs };
                let got = solve_mu(&poly).unwrap();
                assert_eq!(got.len(), deg);
                // Greedy chordal matching.
                let mut used = vec![false; deg];
                for t in &truth {
                    let te = ExtendedComplex::new(*t);
                    let mut best = (f64::INFINITY, 0usize);
                    for (k, g) in got.iter().enumerate() {
                        if !used[k] {
                            let d = te.chordal(g);
                            if d < best.0 {
                                best = (d, k);
                            }
                        }
                    }
                    assert!(best.0 < 1e-7, "deg {deg}: unmatched root {t}");
                    used[best.1] = true;
                }
                for g in &got {
                    assert!(poly.residual(g) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn solver_reports_degree_drop_as_infinity() {
        // Nominal degree 3 with vanishing cubic coefficient.
        let poly = KerrPoly {
            coeffs: vec![c(-2.0, 0.0), c(0.0, 1.0), c(1.0, 0.0), c(0.0, 0.0)],
        };
        let roots = solve_mu(&poly).unwrap();
        assert_eq!(roots.len(), 3);
        assert_eq!(roots.iter().filter(|r| r.is_inf()).count(), 1);
        for r in roots.iter().filter(|r| !r.is_inf()) {
            assert!(poly.residual(r) < 1e-12);
        }
    }

    #[test]
    fn root_set_invariant_under_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let psi = Builtin::Cubic.surface();
        for _ in 0..20 {
            let p = random_point(&mut rng);
            let lam = random_c(&mut rng, 3.0) + c(4.0, 0.0);
            let r1 = solve_mu(&kerr_polynomial(&psi, &p)).unwrap();
            let r2 = solve_mu(&kerr_polynomial(&psi.scaled(lam), &p)).unwrap();
            for (a, b) in r1.iter().zip(r2.iter()) {
                assert!(a.chordal(b) < 1e-9);
            }
        }
    }

    #[test]
    fn closed_forms_are_roots() {
        let builtins = [
            Builtin::Radial,
            Builtin::Villarceau { s: 1.0 },
            Builtin::Villarceau { s: 0.0 },
            Builtin::Circles,
            Builtin::Rotsym,
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for b in builtins {
            let psi = b.surface();
            for _ in 0..100 {
                let v = [
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                ];
                let t = rng.gen_range(-0.5..0.5);
                let p = NullCoords::minkowski(t, v);
                for branch in [Branch::Plus, Branch::Minus] {
                    if let Some(m) = b.closed_mu(&p, branch) {
                        let poly = kerr_polynomial(&psi, &p);
                        assert!(
                            poly.residual(&m) < 1e-9,
                            "{} {} at {v:?} t={t}: residual {}",
                            b.name(),
                            branch.as_str(),
                            poly.residual(&m)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn circles_closed_form_unit_modulus_at_t0() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let v = [
                rng.gen_range(-2.0..2.0),
                rng.gen_range(0.3..2.0),
                rng.gen_range(-2.0..2.0),
            ];
            let p = NullCoords::r3(v);
            for branch in [Branch::Plus, Branch::Minus] {
                let m = Builtin::Circles.closed_mu(&p, branch).unwrap();
                assert!((m.as_finite().unwrap().norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rotsym_branch_values_at_reference_point() {
        let p = NullCoords::r3([0.0, 2.0, 0.0]);
        let plus = Builtin::Rotsym.closed_mu(&p, Branch::Plus).unwrap();
        let minus = Builtin::Rotsym.closed_mu(&p, Branch::Minus).unwrap();
        assert!(plus.as_finite().unwrap().norm() < 1e-14);
        assert!(minus.is_inf());
    }

    #[test]
    fn grid_spec_counts_and_indexing() {
        let g = GridSpec::new([-2.0; 3], [2.0; 3], [0.25; 3]).unwrap();
        assert_eq!(g.counts(), [17, 17, 17]);
        assert_eq!(g.len(), 17 * 17 * 17);
        assert_eq!(g.point([0, 0, 0]), [-2.0, -2.0, -2.0]);
        assert_eq!(g.point([16, 16, 16]), [2.0, 2.0, 2.0]);
        assert_eq!(g.lin([0, 0, 1]), 1);
        assert_eq!(g.lin([0, 1, 0]), 17);
        assert_eq!(g.lin([1, 0, 0]), 17 * 17);
        assert_eq!(g.nearest_node([0.13, -1.9, 5.0]), [9, 0, 16]);
        assert_eq!(g.nearest_node([0.12, -1.9, 5.0]), [8, 0, 16]);
        assert!(GridSpec::new([0.0; 3], [1.0; 3], [0.0; 3]).is_err());
        assert!(GridSpec::new([1.0; 3], [0.0; 3], [0.5; 3]).is_err());
    }

    #[test]
    fn field_continuation_matches_closed_form() {
        let b = Builtin::Radial;
        let slice = SliceSpec::r3(0.0);
        let grid = GridSpec::new([-1.0; 3], [1.0; 3], [0.25; 3]).unwrap();
        let seed = [0.0, 1.0, 0.0];
        let seed_mu = b.seed_mu(&slice.embed3(seed), Branch::Plus).unwrap();
        let field = field_over_grid(&b.surface(), &slice, &grid, seed, seed_mu).unwrap();
        let mut checked = 0;
        for idx in grid.iter_indices() {
            let v = grid.point(idx);
            let lin = grid.lin(idx);
            if v == [0.0, 0.0, 0.0] {
                assert!(field.singular_mask[lin], "origin is fiber-contained");
                continue;
            }
            let closed = b.closed_mu(&slice.embed3(v), Branch::Plus).unwrap();
            let got = field.mu_at(idx).expect("off-origin nodes assigned");
            assert!(got.chordal(&closed) < 1e-8, "at {v:?}: {got} vs {closed}");
            checked += 1;
        }
        assert_eq!(checked, grid.len() - 1);
    }

    #[test]
    fn field_respects_residual_and_continuity_invariants() {
        let b = Builtin::Circles;
        let slice = SliceSpec::r3(0.0);
        let grid = GridSpec::new([-1.0; 3], [1.0; 3], [0.25; 3]).unwrap();
        let seed = [0.0, 1.0, 0.0];
        let seed_mu = b.seed_mu(&slice.embed3(seed), Branch::Plus).unwrap();
        let psi = b.surface();
        let field = field_over_grid(&psi, &slice, &grid, seed, seed_mu).unwrap();
        for idx in grid.iter_indices() {
            let v = grid.point(idx);
            if let Some(m) = field.mu_at(idx) {
                let p = slice.embed3(v);
                let poly = kerr_polynomial(&psi, &p);
                assert!(poly.residual(&m) < 1e-8);
                // Unit modulus off the axis at t = 0, and the whole grid
                // stays on the branch picked at the seed.
                assert!((m.as_finite().unwrap().norm() - 1.0).abs() < 1e-10);
                let closed = b.closed_mu(&p, Branch::Plus).unwrap();
                assert!(m.chordal(&closed) < 1e-8, "branch flip at {v:?}");
            } else {
                // Only the x₁-axis is masked on this grid.
                assert!(v[1] == 0.0 && v[2] == 0.0, "unexpected mask at {v:?}");
            }
        }
    }

    #[test]
    fn rotsym_mask_detects_branch_circle() {
        let b = Builtin::Rotsym;
        let slice = SliceSpec::r3(0.0);
        let grid = GridSpec::new([-0.1, 0.8, -0.1], [0.1, 1.2, 0.1], [0.05; 3]).unwrap();
        let seed = [0.1, 1.2, 0.1];
        let seed_mu = b.seed_mu(&slice.embed3(seed), Branch::Plus).unwrap();
        let field = field_over_grid(&b.surface(), &slice, &grid, seed, seed_mu).unwrap();
        // The node exactly on the branch circle x₁=0, |x|=1 must be masked.
        let on_circle = grid.nearest_node([0.0, 1.0, 0.0]);
        assert_eq!(grid.point(on_circle), [0.0, 1.0, 0.0]);
        assert!(field.singular_mask[grid.lin(on_circle)]);
    }

    #[test]
    fn field_errors() {
        let b = Builtin::Radial;
        let slice = SliceSpec::r3(0.0);
        let grid = GridSpec::new([-1.0; 3], [1.0; 3], [0.5; 3]).unwrap();
        let err = field_over_grid(
            &b.surface(),
            &slice,
            &grid,
            [0.0, 1.0, 0.0],
            ExtendedComplex::finite(0.7, 0.7),
        );
        assert!(matches!(err, Err(SurfaceError::SeedNotRoot { .. })));
    }

    #[test]
    fn field_is_deterministic() {
        let b = Builtin::Rotsym;
        let slice = SliceSpec::r3(0.0);
        let grid = GridSpec::new([-1.0; 3], [1.0; 3], [0.25; 3]).unwrap();
        // Seed away from the branch circle.
        let seed = [1.0, 1.0, 1.0];
        let p = slice.embed3(seed);
        let seed_mu = b.seed_mu(&p, Branch::Plus).unwrap();
        let f1 = field_over_grid(&b.surface(), &slice, &grid, seed, seed_mu).unwrap();
        let f2 = field_over_grid(&b.surface(), &slice, &grid, seed, seed_mu).unwrap();
        assert_eq!(f1.branch, f2.branch);
        assert_eq!(f1.singular_mask, f2.singular_mask);
        for (a, b) in f1.mu.iter().zip(f2.mu.iter()) {
            match (a, b) {
                (ExtendedComplex::Finite(x), ExtendedComplex::Finite(y)) => {
                    assert_eq!(x.re.to_bits(), y.re.to_bits());
                    assert_eq!(x.im.to_bits(), y.im.to_bits());
                }
                (x, y) => assert_eq!(x.is_inf(), y.is_inf()),
            }
        }
    }

    #[test]
    fn json_parsing() {
        let text = r#"{
            "degree": 2,
            "terms": [
                {"exp": [1, 0, 0, 1], "re": 1.0, "im": 0.0},
                {"exp": [0, 1, 1, 0], "re": -1.0, "im": 0.0}
            ]
        }"#;
        let psi = TwistorSurface::from_json_str(text).unwrap();
        assert_eq!(psi.degree(), 2);
        let radial = Builtin::Radial.surface();
        let p = NullCoords::r3([0.3, -0.4, 0.9]);
        let a = kerr_polynomial(&psi, &p);
        let b = kerr_polynomial(&radial, &p);
        for (x, y) in a.coeffs.iter().zip(b.coeffs.iter()) {
            assert!((x - y).norm() < 1e-15);
        }

        let bad_sum = r#"{"degree": 2, "terms": [{"exp": [1,0,0,0], "re": 1.0, "im": 0.0}]}"#;
        match TwistorSurface::from_json_str(bad_sum) {
            Err(SurfaceError::BadExponent { term, expected, got }) => {
                assert_eq!((term, expected, got), (1, 2, 1));
            }
            other => panic!("expected exponent error, got {other:?}"),
        }

        let syntax = "{\"degree\": 2,";
        match TwistorSurface::from_json_str(syntax) {
            Err(SurfaceError::Json(msg)) => assert!(msg.contains("line")),
            other => panic!("expected JSON error, got {other:?}"),
        }

        let zero = r#"{"degree": 1, "terms": [{"exp": [1,0,0,0], "re": 0.0, "im": 0.0}]}"#;
        assert!(matches!(
            TwistorSurface::from_json_str(zero),
            Err(SurfaceError::EmptySurface)
        ));
    }

    #[test]
    fn builtin_parsing() {
        assert_eq!(Builtin::parse("radial").unwrap(), Builtin::Radial);
        assert_eq!(Builtin::parse("cubic").unwrap(), Builtin::Cubic);
        assert_eq!(
            Builtin::parse("villarceau:0.5").unwrap(),
            Builtin::Villarceau { s: 0.5 }
        );
        assert!(Builtin::parse("villarceau").is_err());
        assert!(Builtin::parse("moebius").is_err());
        assert_eq!(Builtin::parse("villarceau:2").unwrap().name(), "villarceau:2");
    }

    #[test]
    fn seed_mu_lex_rule_for_cubic() {
        let p = NullCoords::r3([0.4, 1.1, -0.3]);
        let plus = Builtin::Cubic.seed_mu(&p, Branch::Plus).unwrap();
        let minus = Builtin::Cubic.seed_mu(&p, Branch::Minus).unwrap();
        let poly = kerr_polynomial(&Builtin::Cubic.surface(), &p);
        assert!(poly.residual(&plus) < 1e-9);
        assert!(poly.residual(&minus) < 1e-9);
        let mut roots = solve_mu(&poly).unwrap();
        sort_lex(&mut roots);
        assert!(plus.chordal(&roots[0]) < 1e-12);
        assert!(minus.chordal(&roots[roots.len() - 1]) < 1e-12);
    }
}
