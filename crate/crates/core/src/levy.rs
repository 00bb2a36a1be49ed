//! Lévy densities, tempering functions and Radon–Nikodym derivatives.
//!
//! All functions reject `x = 0` (and arguments within `1e-300` of it): the
//! Lévy measure has no mass there and the stable part is singular.

use crate::error::{Error, Result};
use crate::params::{MeasurePair, ProcessSpec, Tail, Tempering};

/// Smallest |x| accepted by the density routines.
pub const MIN_ABS_X: f64 = 1e-300;

fn check_x(x: f64) -> Result<()> {
    if x.is_nan() || x.abs() < MIN_ABS_X || x.is_infinite() {
        return Err(Error::domain(format!("Lévy density evaluated at x = {x}")));
    }
    Ok(())
}

fn tail_at(spec: &ProcessSpec, x: f64) -> Tail {
    let (up, down) = spec.tails();
    if x > 0.0 {
        up
    } else {
        down
    }
}

/// Stable Lévy density `C₊/x^{a₊+1}` for `x > 0`, `C₋/|x|^{a₋+1}` for `x < 0`.
pub fn stable_levy_density(x: f64, c_plus: f64, c_minus: f64, a_plus: f64, a_minus: f64) -> Result<f64> {
    check_x(x)?;
    let (c, a) = if x > 0.0 { (c_plus, a_plus) } else { (c_minus, a_minus) };
    Ok(c / x.abs().powf(a + 1.0))
}

/// Exponent of the tempering function at distance `r = |x|` with decay `lambda`.
pub(crate) fn tempering_exponent(tempering: Tempering, lambda: f64, r: f64) -> f64 {
    match tempering {
        Tempering::Exponential => -lambda * r,
        Tempering::Gaussian => -lambda * r * r / 2.0,
    }
}

/// Tempering function `t(x)`: `e^{-λ|x|}` for GTS/CTS, `e^{-λx²/2}` for RDTS.
pub fn tempering(x: f64, spec: &ProcessSpec) -> Result<f64> {
    check_x(x)?;
    let tail = tail_at(spec, x);
    Ok(tempering_exponent(spec.tempering(), tail.lambda, x.abs()).exp())
}

/// Lévy density `λ(x) = t(x) · C/|x|^{a+1}`.
pub fn levy_density(x: f64, spec: &ProcessSpec) -> Result<f64> {
    let (up, down) = spec.tails();
    Ok(tempering(x, spec)? * stable_levy_density(x, up.c, down.c, up.a, down.a)?)
}

/// Logarithm of the Radon–Nikodym derivative `dν^P/dν^Q` at `x`.
pub fn log_radon_nikodym(x: f64, pair: &MeasurePair) -> Result<f64> {
    check_x(x)?;
    let lp = tail_at(pair.p(), x).lambda;
    let lq = tail_at(pair.q(), x).lambda;
    let r = x.abs();
    Ok(match pair.p().tempering() {
        Tempering::Exponential => -(lp - lq) * r,
        Tempering::Gaussian => -(lp - lq) * r * r / 2.0,
    })
}

/// Radon–Nikodym derivative `dν^P/dν^Q` at `x`, from the closed-form exponent.
pub fn radon_nikodym(x: f64, pair: &MeasurePair) -> Result<f64> {
    Ok(log_radon_nikodym(x, pair)?.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{make_equivalent, CtsParams, GtsParams, RdtsParams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn gts(lp: f64, lm: f64) -> ProcessSpec {
        ProcessSpec::gts(
            GtsParams { a_plus: 0.5, a_minus: 0.5, c_plus: 1.0, c_minus: 1.0, lambda_plus: lp, lambda_minus: lm, m: 0.0 },
            1.0,
        )
        .unwrap()
    }

    fn rdts(lp: f64, lm: f64) -> ProcessSpec {
        ProcessSpec::rdts(
            RdtsParams { a_plus: 0.5, a_minus: 1.5, c_plus: 1.0, c_minus: 2.0, lambda_plus: lp, lambda_minus: lm, m: 0.0 },
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn stable_density_values() {
        assert_eq!(stable_levy_density(1.0, 1.0, 1.0, 0.5, 0.5).unwrap(), 1.0);
        assert_relative_eq!(
            stable_levy_density(-2.0, 1.0, 3.0, 0.5, 0.5).unwrap(),
            1.060_660_171_779_821_3,
            max_relative = 1e-15
        );
        assert_relative_eq!(stable_levy_density(1e-3, 1.0, 1.0, 0.5, 0.5).unwrap(), 10f64.powf(4.5), max_relative = 1e-13);
        assert!(stable_levy_density(0.0, 1.0, 1.0, 0.5, 0.5).is_err());
        assert!(stable_levy_density(1e-301, 1.0, 1.0, 0.5, 0.5).is_err());
    }

    #[test]
    fn tempering_values() {
        let g = gts(2.0, 3.0);
        assert_relative_eq!(tempering(1.0, &g).unwrap(), (-2.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(tempering(1e-12, &g).unwrap(), 1.0, max_relative = 1e-11);
        assert_relative_eq!(tempering(1.0, &rdts(2.0, 3.0)).unwrap(), (-1.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(levy_density(1.0, &g).unwrap(), 0.135_335_283_236_612_7, max_relative = 1e-15);
        assert!(tempering(f64::NAN, &g).is_err());
    }

    #[test]
    fn radon_nikodym_values() {
        let pair = make_equivalent(&gts(2.0, 3.0), 1.5, 2.5).unwrap();
        assert_relative_eq!(radon_nikodym(2.0, &pair).unwrap(), (-1.0f64).exp(), max_relative = 1e-15);
        assert_eq!(log_radon_nikodym(-2.0, &pair).unwrap(), -1.0);
        let same = make_equivalent(&gts(2.0, 3.0), 2.0, 3.0).unwrap();
        assert_eq!(radon_nikodym(0.7, &same).unwrap(), 1.0);
        assert_eq!(log_radon_nikodym(-0.7, &same).unwrap(), 0.0);
    }

    #[test]
    fn tail_integral_matches_incomplete_gamma() {
        // ∫_{0.01}^∞ x^{-1.5} e^{-2x} dx = √2 Γ(-1/2, 0.02), 40-digit reference.
        let reference = 15.385_415_431_749_477_98;
        let spec = gts(2.0, 3.0);
        let f = |x: f64| levy_density(x, &spec).unwrap();
        let cfg = crate::quad::QuadratureConfig::default();
        let r = crate::quad::integrate_to_infinity(f, 0.01, 2.0, &cfg).unwrap();
        assert_relative_eq!(r.value, reference, max_relative = 1e-10);
    }

    proptest! {
        #[test]
        fn cts_view_agrees(x in prop_oneof![-20.0f64..-1e-6, 1e-6f64..20.0], a in 0.05f64..1.95, lp in 0.1f64..5.0, lm in 0.1f64..5.0) {
            prop_assume!((a - 1.0).abs() > 1e-3);
            let spec = ProcessSpec::cts(CtsParams { a, c: 1.3, lambda_plus: lp, lambda_minus: lm, m: 0.0 }, 1.0).unwrap();
            let view = spec.cts_as_gts().unwrap();
            prop_assert_eq!(levy_density(x, &spec).unwrap(), levy_density(x, &view).unwrap());
            prop_assert_eq!(tempering(x, &spec).unwrap(), tempering(x, &view).unwrap());
        }

        #[test]
        fn rn_identities(x in prop_oneof![-8.0f64..-1e-3, 1e-3f64..8.0], lp in 0.5f64..4.0, lm in 0.5f64..4.0,
                         np in 0.5f64..4.0, nm in 0.5f64..4.0, gaussian in any::<bool>()) {
            let base = if gaussian { rdts(lp, lm) } else { gts(lp, lm) };
            let pair = make_equivalent(&base, np, nm).unwrap();
            let rn = radon_nikodym(x, &pair).unwrap();
            let ratio = levy_density(x, pair.p()).unwrap() / levy_density(x, pair.q()).unwrap();
            prop_assert!(((rn - ratio) / ratio).abs() < 1e-13, "rn={rn} ratio={ratio}");
            let back = radon_nikodym(x, &pair.swapped()).unwrap();
            prop_assert!((rn * back - 1.0).abs() < 1e-14);
            prop_assert_eq!(log_radon_nikodym(x, &pair).unwrap().exp(), rn);
            prop_assert!(levy_density(x, &base).unwrap() >= 0.0);
        }

        #[test]
        fn log_rn_vanishes_at_origin(lp in 0.5f64..4.0, np in 0.5f64..4.0, gaussian in any::<bool>()) {
            let base = if gaussian { rdts(lp, 1.0) } else { gts(lp, 1.0) };
            let pair = make_equivalent(&base, np, 1.0).unwrap();
            prop_assert!(log_radon_nikodym(1e-12, &pair).unwrap().abs() < 1e-11);
        }
    }
}
