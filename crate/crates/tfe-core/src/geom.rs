//! Pointwise correspondences between the fiber coordinate μ ∈ ℂ ∪ {∞}, unit
//! direction vectors U ∈ S² ⊂ ℝ³, orthonormal frames, and positive Hermitian
//! structures on ℝ⁴.
//!
//! The stereographic convention is fixed once for the whole crate: σ projects
//! from (−1, 0, 0), so σ⁻¹(0) = (1,0,0) and σ⁻¹(∞) = (−1,0,0), and a fiber
//! coordinate μ corresponds to the direction U = σ⁻¹(i μ).

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("cannot normalize a near-zero vector (|v| = {0:.3e})")]
    ZeroVector(f64),
    #[error("vector is not orthogonal to the direction (|<X,U>| = {0:.3e})")]
    NotOrthogonal(f64),
}

// Small fixed-size vector helpers used across the crate. Kept as free
// functions on plain arrays; the geometry here never needs more structure.

pub fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

pub fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale3(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// A point of the Riemann sphere ℂ ∪ {∞}.
///
/// Houses fiber coordinates μ and u = iμ. The chordal metric treats ∞ as an
/// ordinary point, which is what makes branch continuation across poles
/// well posed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedComplex {
    Finite(Complex64),
    Infinity,
}

impl ExtendedComplex {
    /// Wraps a complex value; non-finite floats collapse to ∞.
    pub fn new(z: Complex64) -> Self {
        if z.re.is_finite() && z.im.is_finite() {
            ExtendedComplex::Finite(z)
        } else {
            ExtendedComplex::Infinity
        }
    }

    pub fn finite(re: f64, im: f64) -> Self {
        ExtendedComplex::new(Complex64::new(re, im))
    }

    pub fn zero() -> Self {
        ExtendedComplex::Finite(Complex64::new(0.0, 0.0))
    }

    pub fn is_inf(&self) -> bool {
        matches!(self, ExtendedComplex::Infinity)
    }

    pub fn as_finite(&self) -> Option<Complex64> {
        match self {
            ExtendedComplex::Finite(z) => Some(*z),
            ExtendedComplex::Infinity => None,
        }
    }

    /// 1/z with the conventions 1/0 = ∞ and 1/∞ = 0.
    pub fn recip(&self) -> Self {
        match self {
            ExtendedComplex::Infinity => ExtendedComplex::zero(),
            ExtendedComplex::Finite(z) if z.norm_sqr() == 0.0 => ExtendedComplex::Infinity,
            ExtendedComplex::Finite(z) => ExtendedComplex::new(z.inv()),
        }
    }

    /// Multiplication by i (finite values only; i·∞ = ∞).
    pub fn times_i(&self) -> Self {
        match self {
            ExtendedComplex::Finite(z) => ExtendedComplex::Finite(Complex64::i() * z),
            ExtendedComplex::Infinity => ExtendedComplex::Infinity,
        }
    }

    /// Chordal distance on the sphere: d(a,b) = |a−b| / √((1+|a|²)(1+|b|²)),
    /// extended by d(a,∞) = 1/√(1+|a|²) and d(∞,∞) = 0. Antipodal points are
    /// at distance 1 in this normalization.
    pub fn chordal(&self, other: &ExtendedComplex) -> f64 {
        match (self, other) {
            (ExtendedComplex::Infinity, ExtendedComplex::Infinity) => 0.0,
            (ExtendedComplex::Finite(a), ExtendedComplex::Infinity)
            | (ExtendedComplex::Infinity, ExtendedComplex::Finite(a)) => {
                1.0 / (1.0 + a.norm_sqr()).sqrt()
            }
            (ExtendedComplex::Finite(a), ExtendedComplex::Finite(b)) => {
                let na = 1.0 + a.norm_sqr();
                let nb = 1.0 + b.norm_sqr();
                if na.is_finite() && nb.is_finite() {
                    (a - b).norm() / (na * nb).sqrt()
                } else {
                    // Values this large are ∞ for all practical purposes.
                    ExtendedComplex::Infinity.chordal(if na.is_finite() {
                        self
                    } else {
                        other
                    })
                }
            }
        }
    }
}

impl std::fmt::Display for ExtendedComplex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExtendedComplex::Finite(z) => write!(f, "{z}"),
            ExtendedComplex::Infinity => write!(f, "inf"),
        }
    }
}

/// A point of ℂ⁴ carried in both coordinate systems at once: Cartesian
/// (x₀, x₁, x₂, x₃) and null (z₁, z̃₁, z₂, z̃₂) with
///
/// z₁ = x₀ + i x₁, z̃₁ = x₀ − i x₁, z₂ = x₂ + i x₃, z̃₂ = x₂ − i x₃.
///
/// On real ℝ⁴-slices z̃ᵢ = conj(zᵢ); a Minkowski slice embeds time as
/// x₀ = −i t, making z₁ = i(x₁ − t) and z̃₁ = −i(x₁ + t) for real data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullCoords {
    pub x: [Complex64; 4],
    pub z: [Complex64; 4],
}

impl NullCoords {
    pub fn from_cartesian(x: [Complex64; 4]) -> Self {
        let i = Complex64::i();
        let z = [
            x[0] + i * x[1],
            x[0] - i * x[1],
            x[2] + i * x[3],
            x[2] - i * x[3],
        ];
        NullCoords { x, z }
    }

    pub fn from_null(z: [Complex64; 4]) -> Self {
        let i = Complex64::i();
        let x = [
            0.5 * (z[0] + z[1]),
            -0.5 * i * (z[0] - z[1]),
            0.5 * (z[2] + z[3]),
            -0.5 * i * (z[2] - z[3]),
        ];
        NullCoords { x, z }
    }

    /// Point of the real slice ℝ⁴ (all Cartesian coordinates real).
    pub fn real_r4(x: [f64; 4]) -> Self {
        Self::from_cartesian([
            Complex64::new(x[0], 0.0),
            Complex64::new(x[1], 0.0),
            Complex64::new(x[2], 0.0),
            Complex64::new(x[3], 0.0),
        ])
    }

    /// Point of the slice ℝ³₀ = {x₀ = 0} inside the real ℝ⁴.
    pub fn r3(v: [f64; 3]) -> Self {
        Self::real_r4([0.0, v[0], v[1], v[2]])
    }

    /// Point of the Minkowski slice at time t: x₀ = −i t, spatial part real.
    pub fn minkowski(t: f64, v: [f64; 3]) -> Self {
        Self::from_cartesian([
            Complex64::new(0.0, -t),
            Complex64::new(v[0], 0.0),
            Complex64::new(v[1], 0.0),
            Complex64::new(v[2], 0.0),
        ])
    }

    /// Whether the point lies on the real slice (z̃ᵢ = conj(zᵢ)) to `tol`.
    pub fn is_real_slice(&self, tol: f64) -> bool {
        (self.z[1] - self.z[0].conj()).norm() <= tol
            && (self.z[3] - self.z[2].conj()).norm() <= tol
    }
}

/// Conversion between Cartesian and null coordinates.
pub fn null_coords(x: [Complex64; 4]) -> NullCoords {
    NullCoords::from_cartesian(x)
}

/// A unit vector in ℝ³ (components along x₁, x₂, x₃).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction3 {
    u: [f64; 3],
}

impl Direction3 {
    /// Normalizes `v`; rejects vectors too short to carry a direction.
    pub fn new(v: [f64; 3]) -> Result<Self, GeomError> {
        let n = norm3(v);
        if !(n > 1e-12) || !n.is_finite() {
            return Err(GeomError::ZeroVector(n));
        }
        Ok(Direction3 { u: scale3(v, 1.0 / n) })
    }

    pub fn u(&self) -> [f64; 3] {
        self.u
    }
}

/// Positive almost Hermitian structure on ℝ⁴ as a real 4×4 matrix J with
/// J² = −I, acting on tangent vectors in the Cartesian basis (x₀..x₃).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermitianJ {
    m: [[f64; 4]; 4],
}

impl HermitianJ {
    pub fn matrix(&self) -> [[f64; 4]; 4] {
        self.m
    }

    pub fn apply(&self, v: [f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (r, row) in self.m.iter().enumerate() {
            out[r] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3];
        }
        out
    }
}

/// Inverse stereographic projection from (−1, 0, 0):
/// u ↦ (1−|u|², 2 Re u, 2 Im u) / (1+|u|²), with ∞ ↦ (−1, 0, 0).
pub fn stereo_inv(u: ExtendedComplex) -> Direction3 {
    match u {
        ExtendedComplex::Infinity => Direction3 { u: [-1.0, 0.0, 0.0] },
        ExtendedComplex::Finite(u) => {
            let n = u.norm_sqr();
            if !n.is_finite() {
                return Direction3 { u: [-1.0, 0.0, 0.0] };
            }
            let d = 1.0 + n;
            Direction3 {
                u: [(1.0 - n) / d, 2.0 * u.re / d, 2.0 * u.im / d],
            }
        }
    }
}

/// Stereographic projection from (−1, 0, 0): the left inverse of
/// [`stereo_inv`]. U = (−1,0,0) maps to ∞.
pub fn stereo(dir: &Direction3) -> ExtendedComplex {
    let u = dir.u();
    let d = 1.0 + u[0];
    if d.abs() < 1e-300 {
        return ExtendedComplex::Infinity;
    }
    ExtendedComplex::new(Complex64::new(u[1] / d, u[2] / d))
}

/// Direction of a fiber coordinate: U = σ⁻¹(i μ).
pub fn mu_to_direction(mu: ExtendedComplex) -> Direction3 {
    stereo_inv(mu.times_i())
}

/// Fiber coordinate of a direction: μ = −i σ(U). Inverse of
/// [`mu_to_direction`].
pub fn direction_to_mu(dir: &Direction3) -> ExtendedComplex {
    match stereo(dir) {
        ExtendedComplex::Infinity => ExtendedComplex::Infinity,
        ExtendedComplex::Finite(u) => ExtendedComplex::new(-Complex64::i() * u),
    }
}

/// Completes U to a positively oriented orthonormal frame {U, e₂, e₃} via
///
/// e₂ + i e₃ = (−2u, 1−u², i(1+u²)) / (1+|u|²), u = σ(U).
///
/// The formula has no continuous extension to u = ∞ (no global frame on S²
/// exists); there the frame is fixed to its limit along real u → ∞:
/// e₂ = (0,−1,0), e₃ = (0,0,1).
pub fn frame_from_direction(dir: &Direction3) -> ([f64; 3], [f64; 3]) {
    match stereo(dir) {
        ExtendedComplex::Infinity => ([0.0, -1.0, 0.0], [0.0, 0.0, 1.0]),
        ExtendedComplex::Finite(u) => {
            let d = 1.0 + u.norm_sqr();
            if !d.is_finite() {
                return ([0.0, -1.0, 0.0], [0.0, 0.0, 1.0]);
            }
            let u2 = u * u;
            let c1 = -2.0 * u / d;
            let c2 = (1.0 - u2) / d;
            let c3 = Complex64::i() * (1.0 + u2) / d;
            ([c1.re, c2.re, c3.re], [c1.im, c2.im, c3.im])
        }
    }
}

/// The unique positive almost Hermitian structure J on ℝ⁴ with J(∂x₀) = U:
/// J(∂x₀) = U, J(U) = −∂x₀, J(e₂) = e₃, J(e₃) = −e₂
/// in the frame from [`frame_from_direction`].
pub fn hermitian_from_direction(dir: &Direction3) -> HermitianJ {
    let u = dir.u();
    let (e2, e3) = frame_from_direction(dir);
    let uh = [0.0, u[0], u[1], u[2]];
    let e0 = [1.0, 0.0, 0.0, 0.0];
    let e2h = [0.0, e2[0], e2[1], e2[2]];
    let e3h = [0.0, e3[0], e3[1], e3[2]];
    let mut m = [[0.0; 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            m[r][c] = uh[r] * e0[c] - e0[r] * uh[c] + e3h[r] * e2h[c] - e2h[r] * e3h[c];
        }
    }
    HermitianJ { m }
}

/// Rotation by +π/2 in the oriented plane U⊥: X ↦ U × X.
/// Requires X ⊥ U; applying it twice gives −X.
pub fn jperp_rotate(dir: &Direction3, x: [f64; 3]) -> Result<[f64; 3], GeomError> {
    let misalign = dot3(dir.u(), x).abs();
    if misalign > 1e-10 * norm3(x).max(1.0) {
        return Err(GeomError::NotOrthogonal(misalign));
    }
    Ok(cross3(dir.u(), x))
}

/// The null 4-vector (1, U) in Minkowski coordinates (t, x₁, x₂, x₃);
/// −v₀² + v₁² + v₂² + v₃² = 0 exactly because |U| = 1.
pub fn null_direction_from_u(dir: &Direction3) -> [f64; 4] {
    let u = dir.u();
    [1.0, u[0], u[1], u[2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_unit(rng: &mut ChaCha8Rng) -> Direction3 {
        loop {
            let v = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            if norm3(v) > 0.1 {
                return Direction3::new(v).unwrap();
            }
        }
    }

    #[test]
    fn null_coords_direct_cases() {
        let p = null_coords([c(0.0, 0.0); 4]);
        assert_eq!(p.z, [c(0.0, 0.0); 4]);

        let p = null_coords([c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(p.z, [c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);

        let p = null_coords([c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(p.z, [c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn null_coords_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let x: [Complex64; 4] = std::array::from_fn(|_| {
                c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))
            });
            let p = NullCoords::from_cartesian(x);
            let q = NullCoords::from_null(p.z);
            for k in 0..4 {
                assert!((p.x[k] - q.x[k]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn real_slice_predicate() {
        assert!(NullCoords::real_r4([0.3, -1.0, 2.0, 0.7]).is_real_slice(1e-14));
        assert!(!NullCoords::minkowski(0.5, [1.0, 0.0, 0.0]).is_real_slice(1e-10));
        // t = 0 Minkowski points are also real-slice points.
        assert!(NullCoords::minkowski(0.0, [1.0, 2.0, 3.0]).is_real_slice(1e-14));
    }

    #[test]
    fn stereo_inv_poles_and_equator() {
        assert_eq!(stereo_inv(ExtendedComplex::zero()).u(), [1.0, 0.0, 0.0]);
        assert_eq!(stereo_inv(ExtendedComplex::Infinity).u(), [-1.0, 0.0, 0.0]);
        let u = stereo_inv(ExtendedComplex::finite(1.0, 0.0)).u();
        assert!(norm3(sub3(u, [0.0, 1.0, 0.0])) < 1e-15);
    }

    #[test]
    fn mu_to_direction_cases() {
        assert_eq!(mu_to_direction(ExtendedComplex::zero()).u(), [1.0, 0.0, 0.0]);
        let up = mu_to_direction(ExtendedComplex::finite(0.0, -1.0)).u();
        assert!(norm3(sub3(up, [0.0, 1.0, 0.0])) < 1e-15);
        let dn = mu_to_direction(ExtendedComplex::finite(0.0, 1.0)).u();
        assert!(norm3(sub3(dn, [0.0, -1.0, 0.0])) < 1e-15);
    }

    #[test]
    fn frame_direct_cases() {
        let d = Direction3::new([1.0, 0.0, 0.0]).unwrap();
        let (e2, e3) = frame_from_direction(&d);
        assert!(norm3(sub3(e2, [0.0, 1.0, 0.0])) < 1e-15);
        assert!(norm3(sub3(e3, [0.0, 0.0, 1.0])) < 1e-15);

        let d = Direction3::new([0.0, 1.0, 0.0]).unwrap();
        let (e2, e3) = frame_from_direction(&d);
        assert!(norm3(sub3(e2, [-1.0, 0.0, 0.0])) < 1e-15);
        assert!(norm3(sub3(e3, [0.0, 0.0, 1.0])) < 1e-15);

        let d = Direction3::new([-1.0, 0.0, 0.0]).unwrap();
        let (e2, e3) = frame_from_direction(&d);
        assert_eq!(e2, [0.0, -1.0, 0.0]);
        assert_eq!(e3, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn frame_orthonormal_and_oriented() {
        // Gram-matrix and triple-product oracle on random directions.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let d = random_unit(&mut rng);
            let (e2, e3) = frame_from_direction(&d);
            let u = d.u();
            assert!((norm3(e2) - 1.0).abs() < 1e-12);
            assert!((norm3(e3) - 1.0).abs() < 1e-12);
            assert!(dot3(u, e2).abs() < 1e-12);
            assert!(dot3(u, e3).abs() < 1e-12);
            assert!(dot3(e2, e3).abs() < 1e-12);
            // det[U|e2|e3] = U · (e2 × e3) = +1.
            assert!((dot3(u, cross3(e2, e3)) - 1.0).abs() < 1e-10);
            assert!(norm3(sub3(cross3(u, e2), e3)) < 1e-10);
        }
    }

    #[test]
    fn hermitian_standard_structure() {
        let j = hermitian_from_direction(&Direction3::new([1.0, 0.0, 0.0]).unwrap());
        assert!(norm3_4(sub4(j.apply([1.0, 0.0, 0.0, 0.0]), [0.0, 1.0, 0.0, 0.0])) < 1e-14);
        assert!(norm3_4(sub4(j.apply([0.0, 1.0, 0.0, 0.0]), [-1.0, 0.0, 0.0, 0.0])) < 1e-14);
        assert!(norm3_4(sub4(j.apply([0.0, 0.0, 1.0, 0.0]), [0.0, 0.0, 0.0, 1.0])) < 1e-14);
        assert!(norm3_4(sub4(j.apply([0.0, 0.0, 0.0, 1.0]), [0.0, 0.0, -1.0, 0.0])) < 1e-14);

        let j = hermitian_from_direction(&Direction3::new([0.0, 0.0, 1.0]).unwrap());
        assert!(norm3_4(sub4(j.apply([1.0, 0.0, 0.0, 0.0]), [0.0, 0.0, 0.0, 1.0])) < 1e-14);
    }

    fn sub4(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
        [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
    }

    fn norm3_4(a: [f64; 4]) -> f64 {
        (a[0] * a[0] + a[1] * a[1] + a[2] * a[2] + a[3] * a[3]).sqrt()
    }

    #[test]
    fn hermitian_invariants_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..1000 {
            let d = random_unit(&mut rng);
            let j = hermitian_from_direction(&d);
            let m = j.matrix();
            // J² = −I and JᵀJ = I.
            for r in 0..4 {
                for cidx in 0..4 {
                    let mut sq = 0.0;
                    let mut gram = 0.0;
                    for k in 0..4 {
                        sq += m[r][k] * m[k][cidx];
                        gram += m[k][r] * m[k][cidx];
                    }
                    let id = if r == cidx { 1.0 } else { 0.0 };
                    assert!((sq + id).abs() < 1e-12);
                    assert!((gram - id).abs() < 1e-12);
                }
            }
            // J(∂x₀) stays inside span(x₁,x₂,x₃).
            let je0 = j.apply([1.0, 0.0, 0.0, 0.0]);
            assert!(je0[0].abs() < 1e-13);
            assert!(norm3_4(sub4(je0, [0.0, d.u()[0], d.u()[1], d.u()[2]])) < 1e-12);
            // Positive orientation: det(e0, J e0, e2, J e2) = +1.
            let (e2, _) = frame_from_direction(&d);
            let e2h = [0.0, e2[0], e2[1], e2[2]];
            let det = det4([[1.0, 0.0, 0.0, 0.0], je0, e2h, j.apply(e2h)]);
            assert!((det - 1.0).abs() < 1e-10, "det {det}");
        }
    }

    fn det4(rows: [[f64; 4]; 4]) -> f64 {
        // Direct cofactor expansion; only used by tests.
        let mut det = 0.0;
        for c0 in 0..4 {
            let mut minor = [[0.0; 3]; 3];
            for r in 1..4 {
                let mut cc = 0;
                for col in 0..4 {
                    if col != c0 {
                        minor[r - 1][cc] = rows[r][col];
                        cc += 1;
                    }
                }
            }
            let m = minor;
            let d3 = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            let sign = if c0 % 2 == 0 { 1.0 } else { -1.0 };
            det += sign * rows[0][c0] * d3;
        }
        det
    }

    #[test]
    fn jperp_cases() {
        let u = Direction3::new([1.0, 0.0, 0.0]).unwrap();
        assert_eq!(jperp_rotate(&u, [0.0, 1.0, 0.0]).unwrap(), [0.0, 0.0, 1.0]);
        assert_eq!(jperp_rotate(&u, [0.0, 0.0, 1.0]).unwrap(), [0.0, -1.0, 0.0]);
        let x = [0.0, 0.3, -0.4];
        let twice = jperp_rotate(&u, jperp_rotate(&u, x).unwrap()).unwrap();
        assert!(norm3(sub3(twice, scale3(x, -1.0))) < 1e-15);
        assert!(jperp_rotate(&u, [0.5, 1.0, 0.0]).is_err());
    }

    #[test]
    fn null_direction_cases() {
        let v = null_direction_from_u(&Direction3::new([1.0, 0.0, 0.0]).unwrap());
        assert_eq!(v, [1.0, 1.0, 0.0, 0.0]);
        let v = null_direction_from_u(&Direction3::new([0.0, 0.0, 1.0]).unwrap());
        assert_eq!(v, [1.0, 0.0, 0.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let v = null_direction_from_u(&random_unit(&mut rng));
            let q = -v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3];
            assert!(q.abs() < 1e-12);
        }
    }

    #[test]
    fn chordal_metric_values() {
        let zero = ExtendedComplex::zero();
        let inf = ExtendedComplex::Infinity;
        assert_eq!(inf.chordal(&inf), 0.0);
        assert!((zero.chordal(&inf) - 1.0).abs() < 1e-15);
        let one = ExtendedComplex::finite(1.0, 0.0);
        let minus = ExtendedComplex::finite(-1.0, 0.0);
        assert!((one.chordal(&minus) - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn stereo_roundtrip(re in -50.0f64..50.0, im in -50.0f64..50.0) {
            let u = ExtendedComplex::finite(re, im);
            let back = stereo(&stereo_inv(u));
            prop_assert!(u.chordal(&back) < 1e-12);
        }

        #[test]
        fn direction_roundtrip(re in -20.0f64..20.0, im in -20.0f64..20.0) {
            let mu = ExtendedComplex::finite(re, im);
            let back = direction_to_mu(&mu_to_direction(mu));
            prop_assert!(mu.chordal(&back) < 1e-12);
        }

        #[test]
        fn mu_to_direction_injective(
            re1 in -5.0f64..5.0, im1 in -5.0f64..5.0,
            re2 in -5.0f64..5.0, im2 in -5.0f64..5.0,
        ) {
            let m1 = ExtendedComplex::finite(re1, im1);
            let m2 = ExtendedComplex::finite(re2, im2);
            if m1.chordal(&m2) > 1e-9 {
                let d = norm3(sub3(mu_to_direction(m1).u(), mu_to_direction(m2).u()));
                prop_assert!(d > 0.0);
            }
        }
    }

    #[test]
    fn stereo_roundtrip_includes_infinity() {
        let back = stereo(&stereo_inv(ExtendedComplex::Infinity));
        assert!(back.is_inf());
        // Round trip through 1000 seeded values mixing scales.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for k in 0..1000 {
            let u = if k % 97 == 0 {
                ExtendedComplex::Infinity
            } else {
                let r = 10f64.powf(rng.gen_range(-3.0..3.0));
                let th = rng.gen_range(0.0..std::f64::consts::TAU);
                ExtendedComplex::finite(r * th.cos(), r * th.sin())
            };
            assert!(u.chordal(&stereo(&stereo_inv(u))) < 1e-12);
        }
    }
}
