//! Adaptive Gauss–Kronrod quadrature for the numerical oracles.
//!
//! Integrals over `(0, ∞)` are handled in logarithmic coordinates: with
//! `x = e^s` the integrand becomes `f(e^s) e^s`, which is split into unit
//! panels in `s`. Panels are added until the tail is negligible, then the
//! whole collection is refined adaptively (largest error first) with a
//! 21-point Kronrod rule. The strip `(0, cut)` next to a power-law
//! singularity is handled by [`integrate_from_origin`].

use crate::error::{Error, Result};
use crate::params::Tempering;

/// Tolerances and budget for the quadrature oracles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Half-width of the excluded neighbourhood of `x = 0`.
    pub origin_cut: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_subdivisions: 2000,
            origin_cut: 1e-10,
        }
    }
}

impl QuadratureConfig {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize, origin_cut: f64) -> Result<Self> {
        if !(abs_tol > 0.0 && rel_tol > 0.0 && origin_cut > 0.0 && origin_cut < 1.0) || max_subdivisions == 0 {
            return Err(Error::domain(format!(
                "quadrature config needs positive tolerances, a budget and 0 < origin_cut < 1 \
                 (got {abs_tol}, {rel_tol}, {max_subdivisions}, {origin_cut})"
            )));
        }
        Ok(Self { abs_tol, rel_tol, max_subdivisions, origin_cut })
    }

    /// Default configuration with a different relative tolerance.
    pub fn with_rel_tol(rel_tol: f64) -> Result<Self> {
        let d = Self::default();
        Self::new(d.abs_tol, rel_tol, d.max_subdivisions, d.origin_cut)
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

/// Integral estimate with an error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

impl std::ops::Add for QuadResult {
    type Output = QuadResult;

    fn add(self, rhs: QuadResult) -> QuadResult {
        QuadResult { value: self.value + rhs.value, error: self.error + rhs.error }
    }
}

impl QuadResult {
    pub fn scale(self, k: f64) -> QuadResult {
        QuadResult { value: self.value * k, error: self.error * k.abs() }
    }
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Gauss weights for the odd-indexed Kronrod nodes `XGK[1], XGK[3], ...`.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// One application of the 21-point Kronrod rule with the QUADPACK error estimate.
fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Panel> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    let mut resabs = kronrod.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = kronrod * 0.5;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kronrod * half;
    resabs *= half.abs();
    resasc *= half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }
    if !value.is_finite() || !error.is_finite() {
        return Err(Error::convergence(format!("non-finite integrand on [{a}, {b}]")));
    }
    Ok(Panel { a, b, value, error })
}

fn totals(panels: &[Panel]) -> (f64, f64) {
    // Summation in interval order keeps the result independent of refinement history.
    let mut sorted: Vec<&Panel> = panels.iter().collect();
    sorted.sort_by(|x, y| x.a.total_cmp(&y.a));
    sorted.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error))
}

/// Refines the panel set until the error target is met.
fn refine<F: Fn(f64) -> f64>(f: &F, mut panels: Vec<Panel>, cfg: &QuadratureConfig) -> Result<QuadResult> {
    let mut evaluations = panels.len();
    loop {
        let (value, error) = totals(&panels);
        if error <= cfg.target(value) {
            return Ok(QuadResult { value, error });
        }
        if evaluations >= cfg.max_subdivisions {
            return Err(Error::convergence(format!(
                "quadrature budget of {} subdivisions exhausted (value {value:e}, error {error:e})",
                cfg.max_subdivisions
            )));
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("panel set is never empty");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            return Err(Error::convergence(format!("interval [{}, {}] cannot be bisected further", p.a, p.b)));
        }
        panels.push(gk21(f, p.a, mid)?);
        panels.push(gk21(f, mid, p.b)?);
        evaluations += 1;
    }
}

/// Adaptive integral of `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain(format!("integrate needs finite limits, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let panel = gk21(&f, lo, hi)?;
    Ok(refine(&f, vec![panel], cfg)?.scale(sign))
}

/// Largest `s = ln x` explored before declaring a tail non-negligible.
const MAX_LOG_X: f64 = 60.0;

/// Adaptive integral of `f` over `(lower, ∞)` for `lower > 0`.
///
/// `length` is the scale beyond which `f` is known to decay; panels are
/// added past `ln(length)` until three consecutive panels are negligible.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, lower: f64, length: f64, cfg: &QuadratureConfig) -> Result<QuadResult> {
    if !(lower > 0.0 && lower.is_finite() && length > 0.0 && length.is_finite()) {
        return Err(Error::domain(format!(
            "integrate_to_infinity needs 0 < lower and a positive length (got {lower}, {length})"
        )));
    }
    let g = |s: f64| {
        let x = s.exp();
        f(x) * x
    };
    let mut panels = Vec::new();
    let mut s = lower.ln();
    let past_peak = length.ln() + 1.0;
    let mut quiet = 0;
    loop {
        let p = gk21(&g, s, s + 1.0)?;
        let (total, _) = totals(&panels);
        let negligible = p.value.abs() + p.error <= 1e-3 * cfg.target(total + p.value);
        panels.push(p);
        s += 1.0;
        if s > past_peak {
            quiet = if negligible { quiet + 1 } else { 0 };
            if quiet >= 3 {
                break;
            }
        }
        if s > MAX_LOG_X {
            return Err(Error::convergence("integrand tail does not decay within the explored range"));
        }
    }
    refine(&g, panels, cfg)
}

/// Adaptive integral of `f` over `(0, ∞)` when `f(x) ~ K x^γ` as `x → 0⁺`
/// with known `γ > -1`.
///
/// The strip `(0, cfg.origin_cut)` contributes `f(cut)·cut/(γ+1)`; its
/// error bound comes from the mismatch between `γ` and the local exponent
/// observed between `cut` and `2·cut`.
pub fn integrate_from_origin<F: Fn(f64) -> f64>(f: F, gamma: f64, length: f64, cfg: &QuadratureConfig) -> Result<QuadResult> {
    if !(gamma > -1.0) {
        return Err(Error::domain(format!("origin exponent {gamma} is not integrable")));
    }
    let cut = cfg.origin_cut;
    let body = integrate_to_infinity(&f, cut, length, cfg)?;
    let f1 = f(cut);
    let f2 = f(2.0 * cut);
    let ball = f1 * cut / (gamma + 1.0);
    let mismatch = if f1 != 0.0 && f2 != 0.0 && f1.signum() == f2.signum() {
        ((f2 / f1).ln() / std::f64::consts::LN_2 - gamma).abs()
    } else {
        1.0
    };
    let ball_error = ball.abs() * (mismatch / (gamma + 1.0)).min(1.0);
    Ok(body + QuadResult { value: ball, error: ball_error })
}

/// Integral over `(0, ∞)` of an integrand living on one tail of a
/// tempered measure with decay `decay`.
///
/// The variable is changed to `t = λr` (exponential tempering) or
/// `t = λr²/2` (Gaussian tempering) so the tempering factor becomes `e^{-t}`.
/// `gamma` is the power of `r` in the integrand as `r → 0⁺`; the origin cut
/// of `cfg` is interpreted in the original variable `r`.
pub fn integrate_tempered_tail<F: Fn(f64) -> f64>(
    f: F,
    tempering: Tempering,
    decay: f64,
    gamma: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadResult> {
    if !(decay > 0.0 && decay.is_finite()) {
        return Err(Error::domain(format!("tail decay must be positive, got {decay}")));
    }
    let eps = cfg.origin_cut;
    match tempering {
        Tempering::Exponential => {
            let local = QuadratureConfig { origin_cut: decay * eps, ..*cfg };
            integrate_from_origin(|t: f64| f(t / decay) / decay, gamma, 1.0, &local)
        }
        Tempering::Gaussian => {
            let local = QuadratureConfig { origin_cut: decay * eps * eps / 2.0, ..*cfg };
            let g = |t: f64| {
                let r = (2.0 * t / decay).sqrt();
                f(r) / (decay * r)
            };
            integrate_from_origin(g, (gamma - 1.0) / 2.0, 1.0, &local)
        }
    }
}
