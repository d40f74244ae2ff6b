//! Deliberately broken fields used as negative controls. Each one looks like
//! a direction field but violates a defining equation by a margin far above
//! finite-difference noise, so a verification pass that reports it clean is
//! itself broken.

use crate::foliation::ClosedField;
use crate::geom::{mu_to_direction, Direction3, ExtendedComplex, NullCoords};
use crate::morphism::MuField;
use crate::surface::{Branch, Builtin};
use crate::twistor::SliceSpec;

/// The radial fiber field plus the perturbation 0.1·z̃₁. Still finite and
/// smooth away from the origin, still harmonic, but the first-order
/// shear-free residuals come out near 0.1 at unit scale.
#[derive(Debug, Clone, Copy, Default)]
pub struct PerturbedRadial;

impl MuField for PerturbedRadial {
    fn mu(&self, p: &NullCoords, _hint: Option<&ExtendedComplex>) -> Option<ExtendedComplex> {
        let base = Builtin::Radial.closed_mu(p, Branch::Plus)?;
        Some(match base.as_finite() {
            Some(z) => ExtendedComplex::new(z + 0.1 * p.z[1]),
            None => ExtendedComplex::Infinity,
        })
    }
}

/// The perturbed radial field as a spatial direction field at time `t`.
pub fn perturbed_radial_field(t: f64) -> ClosedField<impl Fn([f64; 3]) -> Option<Direction3>> {
    let slice = SliceSpec::r3(t);
    ClosedField::new(move |v: [f64; 3]| {
        PerturbedRadial
            .mu(&slice.embed3(v), None)
            .map(mu_to_direction)
    })
}

/// A unit field with visible shear: normalize(1, x₂, 0). The integral
/// curves fan apart in the x₂-direction without any compensating rotation.
pub fn sheared_field() -> ClosedField<impl Fn([f64; 3]) -> Option<Direction3>> {
    ClosedField::new(|v: [f64; 3]| Direction3::new([1.0, v[1], 0.0]).ok())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foliation::shear_residual;
    use crate::morphism::mu_residuals;
    use crate::twistor::SliceKind;

    #[test]
    fn perturbed_radial_fails_shear_free_residuals() {
        let r = mu_residuals(
            &PerturbedRadial,
            SliceKind::RealR4,
            [0.0, 0.0, 2.0, 0.0],
            1e-3,
        )
        .unwrap();
        let worst = r[0].value.max(r[1].value);
        assert!(worst > 1e-2, "residuals {} / {}", r[0].value, r[1].value);
        assert!(
            (0.05..0.3).contains(&worst),
            "perturbation scale drifted: {worst}"
        );
    }

    #[test]
    fn perturbed_radial_direction_field_evaluates() {
        let f = perturbed_radial_field(0.0);
        let base = closed_radial([0.4, 1.0, 0.0]);
        let pert = field_dir(&f, [0.4, 1.0, 0.0]);
        let dot: f64 = (0..3).map(|k| base[k] * pert[k]).sum();
        assert!(dot > 0.9, "perturbation should be mild, dot {dot}");
        assert!(dot < 1.0 - 1e-6, "field did not change");
    }

    #[test]
    fn sheared_field_shear_matches_frozen_value() {
        // At (0,1,0) the shear residual of normalize(1, x₂, 0) is 1/(2√2).
        let f = sheared_field();
        let r = shear_residual(&f, [0.0, 1.0, 0.0], 1e-3).unwrap();
        let expect = 0.5 / 2.0_f64.sqrt();
        assert!(
            (r.value - expect).abs() < 1e-4,
            "got {}, want {}",
            r.value,
            expect
        );
        assert!(r.value > 0.05);
    }

    fn closed_radial(p: [f64; 3]) -> [f64; 3] {
        let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        [p[0] / n, p[1] / n, p[2] / n]
    }

    fn field_dir<F: Fn([f64; 3]) -> Option<Direction3>>(
        f: &ClosedField<F>,
        p: [f64; 3],
    ) -> [f64; 3] {
        use crate::foliation::DirectionSampler;
        f.direction(p).unwrap().u()
    }
}
