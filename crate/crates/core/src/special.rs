//! Scalar special functions: the real Gamma function (including negative
//! non-integer arguments) and Kummer's confluent hypergeometric function
//! `M(a, b; z)` at complex argument.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex number used throughout the characteristic-function code.
pub type ComplexValue = Complex64;

/// Truncation controls for the Kummer series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesConfig {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-14,
            max_terms: 500,
        }
    }
}

impl SeriesConfig {
    pub fn new(rel_tol: f64, max_terms: usize) -> Result<Self> {
        if !(rel_tol > 0.0) || max_terms == 0 {
            return Err(Error::domain(format!(
                "series config needs rel_tol > 0 and max_terms >= 1 (got {rel_tol}, {max_terms})"
            )));
        }
        Ok(Self { rel_tol, max_terms })
    }
}

/// Largest |z| accepted by [`kummer_m`].
pub const KUMMER_MAX_ABS_Z: f64 = 50.0;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Lanczos approximation, valid for x >= 1.
fn lanczos(x: f64) -> f64 {
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    let series = LANCZOS_COEFFS[1..]
        .iter()
        .enumerate()
        .fold(LANCZOS_COEFFS[0], |acc, (i, c)| acc + c / (z + (i + 1) as f64));
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * series
}

/// Real Gamma function.
///
/// Arguments below 1 are lifted into `[1, 2)` with the upward recurrence
/// `Γ(x) = Γ(x+n) / (x (x+1) ... (x+n-1))`, so no reflection through
/// `sin(πx)` is involved near the poles.
pub fn gamma_real(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("gamma_real needs a finite argument, got {x}")));
    }
    if x <= 0.0 && x == x.round() {
        return Err(Error::Pole(x));
    }
    if x >= 1.0 {
        return Ok(lanczos(x));
    }
    let mut shifted = x;
    let mut denom = 1.0;
    while shifted < 1.0 {
        denom *= shifted;
        shifted += 1.0;
    }
    Ok(lanczos(shifted) / denom)
}

/// Raw power series `Σ (a)_n/(b)_n zⁿ/n!` with the relative stopping rule.
///
/// No argument transformation is applied; see [`kummer_m`] for the
/// evaluation used by the rest of the crate.
pub fn kummer_series(a: f64, b: f64, z: ComplexValue, cfg: SeriesConfig) -> Result<ComplexValue> {
    if b <= 0.0 && b == b.round() {
        return Err(Error::domain(format!("kummer_m: b = {b} is a non-positive integer")));
    }
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for n in 0..cfg.max_terms {
        let nf = n as f64;
        term = term * z * ((a + nf) / ((b + nf) * (nf + 1.0)));
        sum += term;
        if term.norm() <= cfg.rel_tol * sum.norm() {
            return Ok(sum);
        }
    }
    Err(Error::convergence(format!(
        "kummer_m({a}, {b}, {z}) did not converge in {} terms",
        cfg.max_terms
    )))
}

/// Confluent hypergeometric function `M(a, b; z)`.
///
/// For `Re z < 0` the series is summed for `M(b-a, b; -z)` and multiplied
/// by `e^z` (Kummer's transformation), which avoids the alternating
/// cancellation of the direct series on the negative half-plane.
pub fn kummer_m(a: f64, b: f64, z: ComplexValue, cfg: SeriesConfig) -> Result<ComplexValue> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::domain(format!("kummer_m: non-finite argument {z}")));
    }
    if z.norm() > KUMMER_MAX_ABS_Z {
        return Err(Error::convergence(format!(
            "kummer_m: |z| = {} exceeds the supported range {KUMMER_MAX_ABS_Z}",
            z.norm()
        )));
    }
    if z.re < 0.0 {
        Ok(z.exp() * kummer_series(b - a, b, -z, cfg)?)
    } else {
        kummer_series(a, b, z, cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const SQRT_PI: f64 = 1.772_453_850_905_516;

    #[test]
    fn gamma_half_integers() {
        assert_relative_eq!(gamma_real(0.5).unwrap(), SQRT_PI, max_relative = 1e-14);
        assert_relative_eq!(gamma_real(-0.5).unwrap(), -2.0 * SQRT_PI, max_relative = 1e-14);
        assert_relative_eq!(gamma_real(-1.5).unwrap(), 4.0 * SQRT_PI / 3.0, max_relative = 1e-14);
        assert_relative_eq!(gamma_real(1.5).unwrap(), SQRT_PI / 2.0, max_relative = 1e-14);
        assert_relative_eq!(gamma_real(2.5).unwrap(), 0.75 * SQRT_PI, max_relative = 1e-14);
        assert_relative_eq!(gamma_real(6.0).unwrap(), 120.0, max_relative = 1e-14);
    }

    #[test]
    fn gamma_poles() {
        for x in [0.0, -1.0, -2.0, -7.0] {
            assert!(matches!(gamma_real(x), Err(Error::Pole(_))));
        }
        assert!(gamma_real(f64::NAN).is_err());
    }

    #[test]
    fn kummer_trivial_cases() {
        let cfg = SeriesConfig::default();
        let one = kummer_m(0.3, 1.7, Complex64::new(0.0, 0.0), cfg).unwrap();
        assert_eq!(one, Complex64::new(1.0, 0.0));
        let e = kummer_m(0.7, 0.7, Complex64::new(1.0, 0.0), cfg).unwrap();
        assert_relative_eq!(e.re, std::f64::consts::E, max_relative = 1e-14);
        assert_eq!(e.im, 0.0);
    }

    #[test]
    fn kummer_reference_value() {
        // M(-1/4, 1/2; 1), summed at 40 digits offline.
        let reference = 0.338_992_322_488_966_66;
        let tight = SeriesConfig::new(1e-16, 500).unwrap();
        let oracle = kummer_series(-0.25, 0.5, Complex64::new(1.0, 0.0), tight).unwrap();
        assert_relative_eq!(oracle.re, reference, max_relative = 1e-15);
        let v = kummer_m(-0.25, 0.5, Complex64::new(1.0, 0.0), SeriesConfig::default()).unwrap();
        assert_relative_eq!(v.re, oracle.re, max_relative = 1e-13);
    }

    #[test]
    fn kummer_negative_axis_uses_transform() {
        // M(-1/4, 1/2; -40) would lose every digit to cancellation in the raw series.
        let cfg = SeriesConfig::default();
        let v = kummer_m(-0.25, 0.5, Complex64::new(-40.0, 0.0), cfg).unwrap();
        // Large-|z| behaviour: M(a,b,-x) ~ Γ(b)/Γ(b-a) x^{-a}.
        let asym = gamma_real(0.5).unwrap() / gamma_real(0.75).unwrap() * 40f64.powf(0.25);
        assert_relative_eq!(v.re, asym, max_relative = 2e-2);
        assert!(kummer_m(0.1, 0.5, Complex64::new(51.0, 0.0), cfg).is_err());
    }

    #[test]
    fn kummer_rejects_bad_b() {
        let cfg = SeriesConfig::default();
        assert!(kummer_m(0.5, -2.0, Complex64::new(0.5, 0.0), cfg).is_err());
        assert!(SeriesConfig::new(0.0, 10).is_err());
    }

    #[test]
    fn kummer_iteration_cap() {
        let cfg = SeriesConfig::new(1e-14, 3).unwrap();
        assert!(matches!(
            kummer_m(0.5, 1.5, Complex64::new(5.0, 0.0), cfg),
            Err(Error::Convergence(_))
        ));
    }

    proptest! {
        #[test]
        fn gamma_recurrence(x in prop_oneof![-1.9f64..-0.1, 0.1f64..5.0]) {
            prop_assume!((x + 1.0).abs() > 1e-3);
            let lhs = gamma_real(x + 1.0).unwrap();
            let rhs = x * gamma_real(x).unwrap();
            prop_assert!(((lhs - rhs) / rhs).abs() < 1e-13, "x={x} lhs={lhs} rhs={rhs}");
        }

        #[test]
        fn gamma_reflection(x in 0.001f64..0.999) {
            let v = gamma_real(x).unwrap() * gamma_real(1.0 - x).unwrap()
                * (std::f64::consts::PI * x).sin() / std::f64::consts::PI;
            prop_assert!((v - 1.0).abs() < 1e-12, "x={x} v={v}");
        }

        #[test]
        fn kummer_conjugate_symmetry(a in -2.0f64..2.0, b in 0.1f64..3.0, re in -10.0f64..10.0, im in -10.0f64..10.0) {
            let cfg = SeriesConfig::default();
            let z = Complex64::new(re, im);
            let v = kummer_m(a, b, z, cfg).unwrap();
            let w = kummer_m(a, b, z.conj(), cfg).unwrap();
            prop_assert!((v.conj() - w).norm() <= 1e-13 * v.norm().max(1e-300));
        }

        #[test]
        fn kummer_m_transformation_identity(a in -2.0f64..2.0, b in 0.1f64..3.0, r in 0.0f64..10.0, th in 0.0f64..std::f64::consts::TAU) {
            let cfg = SeriesConfig::default();
            let z = Complex64::from_polar(r, th);
            let lhs = kummer_m(a, b, z, cfg).unwrap();
            let rhs = z.exp() * kummer_m(b - a, b, -z, cfg).unwrap();
            let scale = lhs.norm().max(rhs.norm()).max(1e-3);
            prop_assert!((lhs - rhs).norm() <= 1e-10 * scale, "lhs={lhs} rhs={rhs}");
        }

        #[test]
        fn kummer_series_transformation_identity(a in -2.0f64..2.0, b in 0.1f64..3.0, r in 0.0f64..3.0, th in 0.0f64..std::f64::consts::TAU) {
            let cfg = SeriesConfig::default();
            let z = Complex64::from_polar(r, th);
            let lhs = kummer_series(a, b, z, cfg).unwrap();
            let rhs = z.exp() * kummer_series(b - a, b, -z, cfg).unwrap();
            let scale = lhs.norm().max(rhs.norm()).max(1e-3);
            prop_assert!((lhs - rhs).norm() <= 1e-10 * scale, "lhs={lhs} rhs={rhs}");
        }
    }
}
