//! Central finite-difference kernels shared by the residual checks.
//!
//! Everything here is second order: first derivatives use the symmetric
//! two-point formula, second derivatives the three-point formula. One-sided
//! stencils are deliberately not provided; callers near a domain boundary
//! must shrink their domain instead of silently losing an order of accuracy.

use num_complex::Complex64;
use thiserror::Error;

/// Residuals at or below this magnitude are considered converged to the
/// floating-point noise floor; convergence-order estimates are meaningless
/// there (the ratio of two rounding errors carries no information).
pub const NOISE_FLOOR: f64 = 1e-11;

#[derive(Debug, Error)]
pub enum NumDiffError {
    #[error("stencil step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("stencil axes must be distinct and in range (axis {0})")]
    BadAxis(usize),
    #[error("field evaluation failed at stencil point {point:?}")]
    Eval { point: Vec<f64> },
}

/// A symmetric difference stencil: a center point, a step, and the axes
/// along which derivatives are requested.
#[derive(Debug, Clone)]
pub struct Stencil {
    center: Vec<f64>,
    h: f64,
    axes: Vec<usize>,
}

impl Stencil {
    /// Stencil over an explicit set of axes.
    pub fn new(center: &[f64], h: f64, axes: &[usize]) -> Result<Self, NumDiffError> {
        if !(h > 0.0) {
            return Err(NumDiffError::NonPositiveStep(h));
        }
        for (i, &a) in axes.iter().enumerate() {
            if a >= center.len() || axes[..i].contains(&a) {
                return Err(NumDiffError::BadAxis(a));
            }
        }
        Ok(Self { center: center.to_vec(), h, axes: axes.to_vec() })
    }

    /// Stencil over all coordinate axes of `center`.
    pub fn full(center: &[f64], h: f64) -> Result<Self, NumDiffError> {
        let axes: Vec<usize> = (0..center.len()).collect();
        Self::new(center, h, &axes)
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn axes(&self) -> &[usize] {
        &self.axes
    }

    fn offset(&self, axis: usize, step: f64) -> Vec<f64> {
        let mut p = self.center.clone();
        p[axis] += step;
        p
    }
}

fn eval<F>(f: &F, point: Vec<f64>) -> Result<Complex64, NumDiffError>
where
    F: Fn(&[f64]) -> Option<Complex64>,
{
    f(&point).ok_or(NumDiffError::Eval { point })
}

/// First derivatives (f(x+h eᵢ) − f(x−h eᵢ)) / 2h along each stencil axis.
/// Exact on affine functions up to rounding.
pub fn fd_gradient<F>(f: &F, s: &Stencil) -> Result<Vec<Complex64>, NumDiffError>
where
    F: Fn(&[f64]) -> Option<Complex64>,
{
    let mut out = Vec::with_capacity(s.axes.len());
    for &a in &s.axes {
        let fp = eval(f, s.offset(a, s.h))?;
        let fm = eval(f, s.offset(a, -s.h))?;
        out.push((fp - fm) / (2.0 * s.h));
    }
    Ok(out)
}

/// Pure second derivatives (f(x+h eᵢ) − 2 f(x) + f(x−h eᵢ)) / h² along each
/// stencil axis. Exact on quadratics up to rounding.
pub fn fd_second<F>(f: &F, s: &Stencil) -> Result<Vec<Complex64>, NumDiffError>
where
    F: Fn(&[f64]) -> Option<Complex64>,
{
    let fc = eval(f, s.center.clone())?;
    let mut out = Vec::with_capacity(s.axes.len());
    for &a in &s.axes {
        let fp = eval(f, s.offset(a, s.h))?;
        let fm = eval(f, s.offset(a, -s.h))?;
        out.push((fp - 2.0 * fc + fm) / (s.h * s.h));
    }
    Ok(out)
}

/// Observed convergence order log₂(r(h) / r(h/2)) from residuals at two
/// steps. Returns `None` when both residuals sit at the noise floor, where
/// the ratio is rounding noise rather than a truncation-order signal.
pub fn order_estimate(r_h: f64, r_half: f64) -> Option<f64> {
    if r_h.max(r_half) < NOISE_FLOOR {
        return None;
    }
    if r_half == 0.0 {
        // Exact at the finer step: better than any finite order.
        return Some(f64::INFINITY);
    }
    Some((r_h / r_half).log2())
}

/// Wirtinger combination ∂/∂z = ½(∂/∂x − i ∂/∂y) for z = x + i y, from
/// already-computed real-axis derivatives.
pub fn d_dz(dx: Complex64, dy: Complex64) -> Complex64 {
    0.5 * (dx - Complex64::i() * dy)
}

/// Wirtinger combination ∂/∂z̄ = ½(∂/∂x + i ∂/∂y) for z = x + i y.
pub fn d_dzbar(dx: Complex64, dy: Complex64) -> Complex64 {
    0.5 * (dx + Complex64::i() * dy)
}
