//! Numerical engine for the twistor correspondence between complex surfaces
//! in CP³ and shear-free geometry on flat 3- and 4-dimensional slices.
//!
//! The pipeline runs in one direction: a homogeneous polynomial on CP³
//! ([`surface::TwistorSurface`]) is reduced at each point of a chosen slice
//! to a univariate polynomial in μ ([`surface::kerr_polynomial`]); its roots
//! are continued over grids into direction fields ([`surface::field_over_grid`]);
//! the fields are integrated into foliations and flowed in time
//! ([`foliation`]); and every defining differential equation along the way is
//! certified by finite-difference residuals ([`morphism`], [`numdiff`]).
//!
//! Conventions fixed throughout the crate:
//!
//! * null coordinates z₁ = x₀ + i x₁, z̃₁ = x₀ − i x₁, z₂ = x₂ + i x₃,
//!   z̃₂ = x₂ − i x₃ on ℂ⁴;
//! * real ℝ⁴-slices have z̃ᵢ = conj(zᵢ); Minkowski slices embed time as
//!   x₀ = −i t;
//! * stereographic projection is from (−1, 0, 0), and the direction of a
//!   fiber coordinate μ is U = σ⁻¹(i μ).

pub mod controls;
pub mod foliation;
pub mod geom;
pub mod morphism;
pub mod numdiff;
pub mod sampling;
pub mod surface;
pub mod twistor;
