//! The projective-space side of the correspondence: homogeneous twistor
//! points, incidence with points of ℂ⁴, projection to real slices, the
//! real quadric cut out by a slice, translations, and the holomorphic
//! contact pairing.
//!
//! Incidence relations (null coordinates, see [`crate::geom::NullCoords`]):
//!
//! w₂ = w₀ z₁ − w₁ z̃₂,  w₃ = w₀ z₂ + w₁ z̃₁.

use crate::geom::NullCoords;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TwistorError {
    #[error("homogeneous coordinates must not all vanish")]
    AllZero,
    #[error("the leading pair [w0, w1] must not be [0, 0]")]
    ZeroLeadingPair,
}

/// A point of the projective space, stored as one homogeneous representative
/// [w₀, w₁, w₂, w₃]. Equality is projective; [`TwistorPoint::normalized`]
/// fixes the representative by its largest-modulus component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwistorPoint {
    w: [Complex64; 4],
}

impl TwistorPoint {
    pub fn new(w: [Complex64; 4]) -> Result<Self, TwistorError> {
        if w.iter().all(|c| c.norm_sqr() == 0.0) || w.iter().any(|c| !c.is_finite()) {
            return Err(TwistorError::AllZero);
        }
        Ok(TwistorPoint { w })
    }

    pub fn w(&self) -> [Complex64; 4] {
        self.w
    }

    /// The representative scaled so its largest-modulus component is 1.
    /// Keeps residuals comparable across chart boundaries.
    pub fn normalized(&self) -> TwistorPoint {
        let mut best = 0usize;
        let mut mag = 0.0f64;
        for (k, c) in self.w.iter().enumerate() {
            let m = c.norm_sqr();
            if m > mag {
                mag = m;
                best = k;
            }
        }
        let pivot = self.w[best];
        TwistorPoint {
            w: self.w.map(|c| c / pivot),
        }
    }

    /// Distance between projective points: ‖â ∧ b̂‖ on unit representatives
    /// (the sine of the angle between the lines). Zero iff the points
    /// coincide projectively; computed from the 2×2 minors, so it stays
    /// accurate for nearly equal points.
    pub fn projective_distance(&self, other: &TwistorPoint) -> f64 {
        let na: f64 = self.w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let nb: f64 = other.w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let mut acc = 0.0;
        for i in 0..4 {
            for j in (i + 1)..4 {
                let minor = self.w[i] * other.w[j] - self.w[j] * other.w[i];
                acc += minor.norm_sqr();
            }
        }
        acc.sqrt() / (na * nb)
    }
}

/// Which real slice of ℂ⁴ an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceKind {
    /// A translated copy of the real ℝ⁴ ⊂ ℂ⁴.
    RealR4,
    /// The slice {x₀ = 0} at time t of a Minkowski family; its base point
    /// carries a₀ = −i t.
    R3,
    /// The Minkowski slice: x₀ = −i t with t ranging over ℝ.
    Minkowski,
}

/// A real slice ℝ⁴ₐ = a + ℝ⁴ of ℂ⁴, together with how it is being used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceSpec {
    pub a: [Complex64; 4],
    pub kind: SliceKind,
    pub t: f64,
}

impl SliceSpec {
    pub fn real_r4(a: [Complex64; 4]) -> Self {
        SliceSpec {
            a,
            kind: SliceKind::RealR4,
            t: 0.0,
        }
    }

    /// The untranslated slice at time `t` of the standard Minkowski family.
    pub fn r3(t: f64) -> Self {
        SliceSpec {
            a: [Complex64::new(0.0, 0.0); 4],
            kind: SliceKind::R3,
            t,
        }
    }

    pub fn minkowski(t: f64) -> Self {
        SliceSpec {
            a: [Complex64::new(0.0, 0.0); 4],
            kind: SliceKind::Minkowski,
            t,
        }
    }

    /// Adds a spatial/base translation on top of the kind's own time part.
    pub fn with_base(mut self, a: [Complex64; 4]) -> Self {
        self.a = a;
        self
    }

    /// The base point actually used by projections and the quadric. For the
    /// time-sliced kinds the time component is pinned to a₀ = −i t.
    pub fn effective_base(&self) -> [Complex64; 4] {
        match self.kind {
            SliceKind::RealR4 => self.a,
            SliceKind::R3 | SliceKind::Minkowski => {
                let mut a = self.a;
                a[0] = Complex64::new(a[0].re, -self.t);
                a
            }
        }
    }

    /// The point of the slice with spatial coordinates (x₁, x₂, x₃):
    /// effective base + (0, x₁, x₂, x₃).
    pub fn embed3(&self, v: [f64; 3]) -> NullCoords {
        let a = self.effective_base();
        NullCoords::from_cartesian([
            a[0],
            a[1] + Complex64::new(v[0], 0.0),
            a[2] + Complex64::new(v[1], 0.0),
            a[3] + Complex64::new(v[2], 0.0),
        ])
    }
}

/// Result of projecting a twistor point to a real slice: either a point of
/// the slice or its single point at infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlicePoint {
    Point(NullCoords),
    Infinity,
}

impl SlicePoint {
    pub fn as_point(&self) -> Option<&NullCoords> {
        match self {
            SlicePoint::Point(p) => Some(p),
            SlicePoint::Infinity => None,
        }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, SlicePoint::Infinity)
    }
}

/// Residuals of the two incidence relations, evaluated on the normalized
/// representative: (w₀z₁ − w₁z̃₂ − w₂, w₀z₂ + w₁z̃₁ − w₃). Both vanish iff
/// `p` lies on the plane of `w`.
pub fn incidence_residual(w: &TwistorPoint, p: &NullCoords) -> (Complex64, Complex64) {
    let w = w.normalized().w;
    let z = p.z;
    (
        w[0] * z[0] - w[1] * z[3] - w[2],
        w[0] * z[2] + w[1] * z[1] - w[3],
    )
}

fn translate_components(a_null: [Complex64; 4], w: [Complex64; 4]) -> [Complex64; 4] {
    // a_null = (a₁, ã₁, a₂, ã₂) in the NullCoords ordering.
    [
        w[0],
        w[1],
        w[2] + a_null[0] * w[0] - a_null[3] * w[1],
        w[3] + a_null[2] * w[0] + a_null[1] * w[1],
    ]
}

/// Action on twistor space of the translation x ↦ x + a of ℂ⁴, with `a`
/// given in Cartesian coordinates (converted to null form internally).
pub fn translate_twistor(a: [Complex64; 4], w: &TwistorPoint) -> TwistorPoint {
    let a_null = NullCoords::from_cartesian(a).z;
    TwistorPoint {
        w: translate_components(a_null, w.w),
    }
}

/// Projects a twistor point to the real slice described by `s` (the unique
/// intersection of its plane with the slice), or to the slice's point at
/// infinity when [w₀, w₁] = [0, 0].
pub fn twistor_project(w: &TwistorPoint, s: &SliceSpec) -> SlicePoint {
    let a = s.effective_base();
    let neg_a = a.map(|c| -c);
    let v = translate_twistor(neg_a, w).normalized().w;
    let det = v[0].norm_sqr() + v[1].norm_sqr();
    if det < 1e-24 {
        return SlicePoint::Infinity;
    }
    let z1 = (v[0].conj() * v[2] + v[1] * v[3].conj()) / det;
    let z2 = (v[0].conj() * v[3] - v[1] * v[2].conj()) / det;
    let base = NullCoords::from_null([z1, z1.conj(), z2, z2.conj()]);
    let x = [
        base.x[0] + a[0],
        base.x[1] + a[1],
        base.x[2] + a[2],
        base.x[3] + a[3],
    ];
    SlicePoint::Point(NullCoords::from_cartesian(x))
}

fn quadric_bilinear(v: [Complex64; 4]) -> f64 {
    2.0 * (v[0].conj() * v[2] + v[1] * v[3].conj()).re
}

/// Defining function of the real quadric associated with the slice: zero iff
/// the plane of `w` meets the slice at its time t. Scale-stable: evaluated on
/// the unit representative (value divided by ‖w‖²).
pub fn n5_value(w: &TwistorPoint, s: &SliceSpec) -> f64 {
    let a = s.effective_base();
    let neg_a = a.map(|c| -c);
    let v = translate_twistor(neg_a, w).w;
    let norm2: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    quadric_bilinear(v) / norm2
}

/// The fundamental map: the twistor point through `p` with leading pair
/// [w₀, w₁], namely [w₀, w₁, w₀z₁ − w₁z̃₂, w₀z₂ + w₁z̃₁]. Satisfies the
/// incidence relations exactly by construction.
pub fn fundamental_map(
    p: &NullCoords,
    w01: [Complex64; 2],
) -> Result<TwistorPoint, TwistorError> {
    if w01[0].norm_sqr() + w01[1].norm_sqr() == 0.0 {
        return Err(TwistorError::ZeroLeadingPair);
    }
    let z = p.z;
    TwistorPoint::new([
        w01[0],
        w01[1],
        w01[0] * z[0] - w01[1] * z[3],
        w01[0] * z[2] + w01[1] * z[1],
    ])
}

/// [`fundamental_map`] with leading pair [1, μ], or [0, 1] for μ = ∞.
pub fn fundamental_map_mu(
    p: &NullCoords,
    mu: crate::geom::ExtendedComplex,
) -> Result<TwistorPoint, TwistorError> {
    let one = Complex64::new(1.0, 0.0);
    let w01 = match mu.as_finite() {
        Some(m) => [one, m],
        None => [Complex64::new(0.0, 0.0), one],
    };
    fundamental_map(p, w01)
}

/// Value of the holomorphic contact pairing with parameter a₀ on a tangent
/// vector δw at w, evaluated on the given representatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactValue {
    pub value: Complex64,
}

/// Θₐ(w, δw) = −2a₀(w₁δw₀ − w₀δw₁) + w₁δw₂ − w₂δw₁ − w₀δw₃ + w₃δw₀.
///
/// Homogeneous of degree 2: scaling (w, δw) by λ scales the value by λ².
pub fn contact_form(a0: Complex64, w: &TwistorPoint, dw: [Complex64; 4]) -> ContactValue {
    let w = w.w;
    let value = -2.0 * a0 * (w[1] * dw[0] - w[0] * dw[1]) + w[1] * dw[2] - w[2] * dw[1]
        - w[0] * dw[3]
        + w[3] * dw[0];
    ContactValue { value }
}
