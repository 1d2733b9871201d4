//! Medium description and the skew-parameter algebra connecting interface
//! conditions to excursion sign-flip probabilities.

use crate::error::{Result, SimError};

/// Piecewise-constant diffusivity with a single jump at the origin:
/// `D(x) = d_minus` for `x < 0`, `d_plus` for `x > 0`.
///
/// The origin itself reads the minus side; every estimator in this crate uses
/// that convention for positions exactly at an interface or window edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MediumSpec {
    d_minus: f64,
    d_plus: f64,
}

impl MediumSpec {
    pub fn new(d_minus: f64, d_plus: f64) -> Result<Self> {
        check_positive("d_minus", d_minus)?;
        check_positive("d_plus", d_plus)?;
        Ok(MediumSpec { d_minus, d_plus })
    }

    pub fn uniform(d: f64) -> Result<Self> {
        MediumSpec::new(d, d)
    }

    pub fn d_minus(&self) -> f64 {
        self.d_minus
    }

    pub fn d_plus(&self) -> f64 {
        self.d_plus
    }

    pub fn sqrt_d_minus(&self) -> f64 {
        self.d_minus.sqrt()
    }

    pub fn sqrt_d_plus(&self) -> f64 {
        self.d_plus.sqrt()
    }

    /// Diffusivity read at a position (minus side at exactly 0).
    #[inline]
    pub fn diffusivity_at(&self, x: f64) -> f64 {
        if x <= 0.0 {
            self.d_minus
        } else {
            self.d_plus
        }
    }

    /// Swap the two sides; mirror image of the medium.
    pub fn mirrored(&self) -> MediumSpec {
        MediumSpec {
            d_minus: self.d_plus,
            d_plus: self.d_minus,
        }
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if !(value.is_finite() && value > 0.0) {
        return Err(SimError::ParameterDomain {
            name,
            value,
            constraint: "finite and > 0",
        });
    }
    Ok(())
}

fn check_open_unit(name: &'static str, value: f64) -> Result<()> {
    if !(value.is_finite() && value > 0.0 && value < 1.0) {
        return Err(SimError::ParameterDomain {
            name,
            value,
            constraint: "inside the open interval (0, 1)",
        });
    }
    Ok(())
}

/// Probability that a fresh excursion from the interface is signed positive.
/// Always strictly inside (0, 1); the endpoints would degenerate the motion to
/// reflection and are rejected.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SkewParam(f64);

impl SkewParam {
    pub fn new(alpha: f64) -> Result<Self> {
        check_open_unit("alpha", alpha)?;
        Ok(SkewParam(alpha))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `1 - alpha`, the parameter of the space-mirrored motion.
    pub fn mirrored(self) -> SkewParam {
        SkewParam(1.0 - self.0)
    }
}

/// Skew parameter induced by the interface condition
/// `lambda f'(0+) = (1 - lambda) f'(0-)` over the medium:
/// `alpha(lambda) = lambda sqrt(D-) / (lambda sqrt(D-) + (1 - lambda) sqrt(D+))`.
pub fn alpha_of_lambda(medium: MediumSpec, lambda: f64) -> Result<SkewParam> {
    check_open_unit("lambda", lambda)?;
    let num = lambda * medium.sqrt_d_minus();
    let den = num + (1.0 - lambda) * medium.sqrt_d_plus();
    SkewParam::new(num / den)
}

/// Inverse of [`alpha_of_lambda`]:
/// `lambda(alpha) = alpha sqrt(D+) / (alpha sqrt(D+) + (1 - alpha) sqrt(D-))`.
pub fn lambda_of_alpha(medium: MediumSpec, alpha: SkewParam) -> f64 {
    let a = alpha.value();
    let num = a * medium.sqrt_d_plus();
    num / (num + (1.0 - a) * medium.sqrt_d_minus())
}

/// Flux-continuity (mass-conserving) choice `lambda = D+ / (D+ + D-)`.
pub fn physical_lambda(medium: MediumSpec) -> f64 {
    medium.d_plus() / (medium.d_plus() + medium.d_minus())
}

/// Skew parameter of the flux-continuity diffusion:
/// `alpha* = sqrt(D+) / (sqrt(D+) + sqrt(D-))`.
pub fn physical_alpha(medium: MediumSpec) -> SkewParam {
    let sp = medium.sqrt_d_plus();
    SkewParam(sp / (sp + medium.sqrt_d_minus()))
}

/// Skew parameter of the derivative-continuity (lambda = 1/2) diffusion:
/// `alpha# = 1 - alpha* = sqrt(D-) / (sqrt(D+) + sqrt(D-))`.
pub fn stroock_varadhan_alpha(medium: MediumSpec) -> SkewParam {
    physical_alpha(medium).mirrored()
}

/// Threshold lambda above which mean occupation favors the plus side:
/// `lambda_c = sqrt(D+) / (sqrt(D+) + sqrt(D-))`. Numerically equal to the
/// value of `alpha*`, but it lives on the lambda axis.
pub fn residence_critical_lambda(medium: MediumSpec) -> f64 {
    physical_alpha(medium).value()
}

/// Piecewise-linear space map `sigma(x) = sqrt(D+) x` for `x >= 0`,
/// `sqrt(D-) x` for `x < 0`. Strictly increasing, fixes 0, preserves signs.
#[inline]
pub fn sigma_map(medium: MediumSpec, x: f64) -> f64 {
    if x >= 0.0 {
        medium.sqrt_d_plus() * x
    } else {
        medium.sqrt_d_minus() * x
    }
}

#[inline]
pub fn sigma_inverse(medium: MediumSpec, y: f64) -> f64 {
    if y >= 0.0 {
        y / medium.sqrt_d_plus()
    } else {
        y / medium.sqrt_d_minus()
    }
}

/// Medium plus interface condition plus the skew parameter driving the paths.
///
/// `alpha` normally derives from `lambda`; [`InterfaceModel::with_alpha_override`]
/// decouples them so hypothesis tests can probe motions that do NOT satisfy
/// the interface condition (the martingale characterization is an iff).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceModel {
    medium: MediumSpec,
    lambda: f64,
    alpha: SkewParam,
}

impl InterfaceModel {
    pub fn from_lambda(medium: MediumSpec, lambda: f64) -> Result<Self> {
        let alpha = alpha_of_lambda(medium, lambda)?;
        Ok(InterfaceModel {
            medium,
            lambda,
            alpha,
        })
    }

    pub fn from_alpha(medium: MediumSpec, alpha: SkewParam) -> Self {
        InterfaceModel {
            medium,
            lambda: lambda_of_alpha(medium, alpha),
            alpha,
        }
    }

    /// Flux-continuity model for the medium.
    pub fn physical(medium: MediumSpec) -> Self {
        InterfaceModel {
            medium,
            lambda: physical_lambda(medium),
            alpha: physical_alpha(medium),
        }
    }

    /// Derivative-continuity model (`lambda = 1/2`).
    pub fn derivative_matching(medium: MediumSpec) -> Self {
        InterfaceModel {
            medium,
            lambda: 0.5,
            alpha: stroock_varadhan_alpha(medium),
        }
    }

    /// Pair a lambda-class with a possibly mismatched motion parameter.
    pub fn with_alpha_override(medium: MediumSpec, lambda: f64, alpha: SkewParam) -> Result<Self> {
        check_open_unit("lambda", lambda)?;
        Ok(InterfaceModel {
            medium,
            lambda,
            alpha,
        })
    }

    pub fn medium(&self) -> MediumSpec {
        self.medium
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> SkewParam {
        self.alpha
    }

    /// Whether `alpha` matches `alpha(lambda)` up to floating point.
    pub fn is_consistent(&self) -> bool {
        match alpha_of_lambda(self.medium, self.lambda) {
            Ok(a) => (a.value() - self.alpha.value()).abs() <= 1e-12,
            Err(_) => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(MediumSpec::new(0.0, 1.0).is_err());
        assert!(MediumSpec::new(1.0, -2.0).is_err());
        assert!(MediumSpec::new(f64::NAN, 1.0).is_err());
        assert!(SkewParam::new(0.0).is_err());
        assert!(SkewParam::new(1.0).is_err());
        let m = MediumSpec::new(1.0, 4.0).unwrap();
        assert!(alpha_of_lambda(m, 0.0).is_err());
        assert!(alpha_of_lambda(m, 1.0).is_err());
    }

    #[test]
    fn alpha_reduces_to_lambda_for_uniform_medium() {
        let m = MediumSpec::uniform(1.0).unwrap();
        assert_relative_eq!(alpha_of_lambda(m, 0.3).unwrap().value(), 0.3, max_relative = 1e-15);
    }

    #[test]
    fn alpha_examples_for_one_four_medium() {
        let m = MediumSpec::new(1.0, 4.0).unwrap();
        assert_relative_eq!(
            alpha_of_lambda(m, 0.5).unwrap().value(),
            1.0 / 3.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            alpha_of_lambda(m, 0.8).unwrap().value(),
            2.0 / 3.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(physical_lambda(m), 0.8, max_relative = 1e-15);
        assert_relative_eq!(physical_alpha(m).value(), 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(stroock_varadhan_alpha(m).value(), 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(residence_critical_lambda(m), 2.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn sigma_map_examples() {
        let m = MediumSpec::new(1.0, 4.0).unwrap();
        assert_eq!(sigma_map(m, 1.5), 3.0);
        assert_eq!(sigma_map(m, -1.5), -1.5);
        assert_eq!(sigma_map(m, 0.0), 0.0);
        assert_eq!(sigma_inverse(m, 3.0), 1.5);
    }

    #[test]
    fn diffusivity_at_origin_reads_minus_side() {
        let m = MediumSpec::new(1.0, 4.0).unwrap();
        assert_eq!(m.diffusivity_at(0.0), 1.0);
        assert_eq!(m.diffusivity_at(-1e-300), 1.0);
        assert_eq!(m.diffusivity_at(1e-300), 4.0);
    }

    #[test]
    fn consistency_flag_tracks_override() {
        let m = MediumSpec::new(1.0, 4.0).unwrap();
        let consistent = InterfaceModel::from_lambda(m, 0.5).unwrap();
        assert!(consistent.is_consistent());
        let probe =
            InterfaceModel::with_alpha_override(m, 0.5, SkewParam::new(0.18).unwrap()).unwrap();
        assert!(!probe.is_consistent());
    }

    fn arb_medium() -> impl Strategy<Value = MediumSpec> {
        (0.05f64..20.0, 0.05f64..20.0)
            .prop_map(|(dm, dp)| MediumSpec::new(dm, dp).unwrap())
    }

    proptest! {
        #[test]
        fn alpha_lambda_round_trip(m in arb_medium(), lambda in 0.01f64..0.99) {
            let alpha = alpha_of_lambda(m, lambda).unwrap();
            let back = lambda_of_alpha(m, alpha);
            prop_assert!((back - lambda).abs() <= 1e-12);
        }

        #[test]
        fn alpha_strictly_increasing_in_lambda(m in arb_medium(), lo in 0.01f64..0.97) {
            let hi = lo + 0.02;
            let a_lo = alpha_of_lambda(m, lo).unwrap().value();
            let a_hi = alpha_of_lambda(m, hi).unwrap().value();
            prop_assert!(a_hi > a_lo);
        }

        #[test]
        fn mirror_symmetry(m in arb_medium(), lambda in 0.01f64..0.99) {
            let a = alpha_of_lambda(m, lambda).unwrap().value();
            let a_mirror = alpha_of_lambda(m.mirrored(), 1.0 - lambda).unwrap().value();
            prop_assert!((a + a_mirror - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn physical_lambda_yields_physical_alpha(m in arb_medium()) {
            let a = alpha_of_lambda(m, physical_lambda(m)).unwrap().value();
            prop_assert!((a - physical_alpha(m).value()).abs() <= 1e-12);
        }

        #[test]
        fn half_lambda_yields_mirror_of_physical(m in arb_medium()) {
            let a = alpha_of_lambda(m, 0.5).unwrap().value();
            prop_assert!((a - stroock_varadhan_alpha(m).value()).abs() <= 1e-12);
        }

        #[test]
        fn sigma_round_trip(m in arb_medium(), x in -50.0f64..50.0) {
            let y = sigma_map(m, x);
            let back = sigma_inverse(m, y);
            prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(1.0));
            prop_assert!(y * x >= 0.0);
        }
    }
}
