//! Characteristic functions, FFT density inversion and sampling.
//!
//! Characteristic functions are unit-time; the horizon enters through
//! `φ_T(u) = exp(T ψ(u))` where `ψ` is the log characteristic function.

use std::io::Write;

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{CtsParams, ModelParams, ProcessSpec, Tempering};
use crate::quad::{integrate_tempered_tail, QuadratureConfig};
use crate::special::{gamma_real, kummer_m, ComplexValue, SeriesConfig};

/// `ln(1 + z)` without cancellation for small `|z|`.
fn ln_1p(z: Complex64) -> Complex64 {
    let re = 0.5 * (2.0 * z.re + z.re * z.re + z.im * z.im).ln_1p();
    let im = z.im.atan2(1.0 + z.re);
    Complex64::new(re, im)
}

/// `e^w - 1` without cancellation for small `|w|`.
fn exp_m1(w: Complex64) -> Complex64 {
    let half = (w.im / 2.0).sin();
    let re = w.re.exp_m1() * w.im.cos() - 2.0 * half * half;
    let im = w.re.exp() * w.im.sin();
    Complex64::new(re, im)
}

/// Exponent of one exponentially tempered tail with index `a`, scale `c`,
/// decay `lambda`, at frequency `v` (`v = u` for the upper tail, `-u` for the lower):
/// `cΓ(-a)((λ - iv)^a - λ^a) - iv cΓ(1-a) λ^{a-1}`.
fn exponential_tail(c: f64, a: f64, lambda: f64, v: f64) -> Result<Complex64> {
    let ratio = Complex64::new(0.0, -v / lambda);
    let increment = exp_m1(ln_1p(ratio) * a) * lambda.powf(a);
    let drift = Complex64::new(0.0, -v * c * gamma_real(1.0 - a)? * lambda.powf(a - 1.0));
    Ok(increment * (c * gamma_real(-a)?) + drift)
}

fn cts_exponent(p: &CtsParams, u: f64) -> Result<Complex64> {
    Ok(Complex64::new(0.0, u * p.m) + exponential_tail(p.c, p.a, p.lambda_plus, u)? + exponential_tail(p.c, p.a, p.lambda_minus, -u)?)
}

/// Arguments of the auxiliary function `G(x; a, λ)` of the RDTS characteristic function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GFunctionArgs {
    pub x: ComplexValue,
    pub a: f64,
    pub lambda: f64,
}

/// `G(x; a, λ) = ∫_0^∞ (e^{xy} - 1 - xy) y^{-a-1} e^{-λy²/2} dy`, written with Kummer's M:
///
/// `2^{-1-a/2} λ^{a/2} Γ(-a/2) (M(-a/2, 1/2; x²/(2λ)) - 1)
///  + 2^{-1/2-a/2} x λ^{(a-1)/2} Γ((1-a)/2) (M((1-a)/2, 3/2; x²/(2λ)) - 1)`.
pub fn g_function(args: GFunctionArgs, cfg: SeriesConfig) -> Result<ComplexValue> {
    let GFunctionArgs { x, a, lambda } = args;
    if !(a > 0.0 && a < 2.0 && a != 1.0 && lambda > 0.0) {
        return Err(Error::domain(format!("G function needs a in (0,2) without 1 and λ > 0 (got {a}, {lambda})")));
    }
    let z = x * x / (2.0 * lambda);
    let one = Complex64::new(1.0, 0.0);
    let even = (kummer_m(-a / 2.0, 0.5, z, cfg)? - one)
        * (2f64.powf(-1.0 - a / 2.0) * lambda.powf(a / 2.0) * gamma_real(-a / 2.0)?);
    let odd = x
        * (kummer_m((1.0 - a) / 2.0, 1.5, z, cfg)? - one)
        * (2f64.powf(-0.5 - a / 2.0) * lambda.powf((a - 1.0) / 2.0) * gamma_real((1.0 - a) / 2.0)?);
    Ok(even + odd)
}

/// Log characteristic function `ψ(u)` at unit time.
pub fn log_characteristic_function(spec: &ProcessSpec, u: f64) -> Result<ComplexValue> {
    if !u.is_finite() {
        return Err(Error::domain(format!("frequency must be finite, got {u}")));
    }
    match spec.params() {
        ModelParams::Cts(p) => cts_exponent(p, u),
        ModelParams::Gts(p) => Ok(Complex64::new(0.0, u * p.m)
            + exponential_tail(p.c_plus, p.a_plus, p.lambda_plus, u)?
            + exponential_tail(p.c_minus, p.a_minus, p.lambda_minus, -u)?),
        ModelParams::Rdts(p) => {
            let cfg = SeriesConfig::default();
            let up = g_function(GFunctionArgs { x: Complex64::new(0.0, u), a: p.a_plus, lambda: p.lambda_plus }, cfg)?;
            let down = g_function(GFunctionArgs { x: Complex64::new(0.0, -u), a: p.a_minus, lambda: p.lambda_minus }, cfg)?;
            Ok(Complex64::new(0.0, u * p.m) + up * p.c_plus + down * p.c_minus)
        }
    }
}

/// Characteristic function `φ(u)` at unit time.
pub fn characteristic_function(spec: &ProcessSpec, u: f64) -> Result<ComplexValue> {
    Ok(log_characteristic_function(spec, u)?.exp())
}

/// Characteristic function of `X_T`, `exp(T ψ(u))`.
pub fn characteristic_function_at_horizon(spec: &ProcessSpec, u: f64) -> Result<ComplexValue> {
    Ok((log_characteristic_function(spec, u)? * spec.horizon_t()).exp())
}

/// `ψ(u)` by direct quadrature of `∫ (e^{iux} - 1 - iux) ν(dx)` plus `ium`.
pub fn levy_khintchine_exponent(spec: &ProcessSpec, u: f64, cfg: &QuadratureConfig) -> Result<ComplexValue> {
    let (up, down) = spec.tails();
    let tempering = spec.tempering();
    let mut total = Complex64::new(0.0, u * spec.m());
    for (tail, sign) in [(up, 1.0), (down, -1.0)] {
        let measure = |r: f64| {
            let damp = match tempering {
                Tempering::Exponential => (-tail.lambda * r).exp(),
                Tempering::Gaussian => (-tail.lambda * r * r / 2.0).exp(),
            };
            tail.c * damp / r.powf(tail.a + 1.0)
        };
        let v = sign * u;
        let re = |r: f64| {
            let s = (v * r / 2.0).sin();
            -2.0 * s * s * measure(r)
        };
        let im = |r: f64| {
            let w = v * r;
            let odd = if w.abs() < 1e-3 {
                let w3 = w * w * w;
                -w3 / 6.0 + w3 * w * w / 120.0
            } else {
                w.sin() - w
            };
            odd * measure(r)
        };
        let re_part = integrate_tempered_tail(re, tempering, tail.lambda, 1.0 - tail.a, cfg)?;
        let im_part = integrate_tempered_tail(im, tempering, tail.lambda, 2.0 - tail.a, cfg)?;
        total += Complex64::new(re_part.value, im_part.value);
    }
    Ok(total)
}

/// Normalization tolerance of [`density_grid`].
pub const MASS_TOL: f64 = 1e-6;

/// Threshold on `|φ_T(u_max)|` for the frequency cutoff.
pub const CF_CUTOFF: f64 = 1e-12;

/// Density values on an equispaced grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx()
    }

    /// Trapezoid mass.
    pub fn mass(&self) -> f64 {
        let inner: f64 = self.values.iter().sum();
        (inner - 0.5 * (self.values[0] + self.values[self.n - 1])) * self.dx()
    }

    /// Trapezoid mean.
    pub fn mean(&self) -> f64 {
        let dx = self.dx();
        let moment: f64 = self.values.iter().enumerate().map(|(j, v)| self.x(j) * v).sum();
        let ends = 0.5 * (self.x(0) * self.values[0] + self.x(self.n - 1) * self.values[self.n - 1]);
        (moment - ends) * dx / self.mass()
    }

    /// Linear interpolation, zero outside the grid.
    pub fn interpolate(&self, x: f64) -> f64 {
        if !(x >= self.x_min && x <= self.x_max) {
            return 0.0;
        }
        let pos = (x - self.x_min) / self.dx();
        let j = (pos.floor() as usize).min(self.n - 2);
        let frac = pos - j as f64;
        self.values[j] * (1.0 - frac) + self.values[j + 1] * frac
    }

    /// Cumulative trapezoid integral, normalized to end at 1.
    pub fn cdf(&self) -> Vec<f64> {
        let dx = self.dx();
        let mut out = Vec::with_capacity(self.n);
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.values.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * dx;
            out.push(acc);
        }
        let total = acc;
        out.iter_mut().for_each(|v| *v /= total);
        out
    }

    /// Writes `x,value` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,value")?;
        for (j, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", self.x(j), v)?;
        }
        Ok(())
    }
}

/// Smallest cutoff `2^k` with `|φ_T(u)| < CF_CUTOFF`.
pub fn frequency_cutoff(spec: &ProcessSpec) -> Result<f64> {
    let mut u = 1.0;
    loop {
        if characteristic_function_at_horizon(spec, u)?.norm() < CF_CUTOFF {
            return Ok(u);
        }
        u *= 2.0;
        if u > 1e7 {
            return Err(Error::convergence("characteristic function does not decay below the cutoff"));
        }
    }
}

/// Density of `X_T` by discrete Fourier inversion on `n` points.
///
/// With `u_max = None` the cutoff is found by [`frequency_cutoff`]. The
/// frequency grid is `u_k = -u_max + k·du`, `du = 2u_max/n`, and the
/// x-grid has spacing `π/u_max`, centered at `mT`.
pub fn density_grid(spec: &ProcessSpec, n: usize, u_max: Option<f64>) -> Result<DensityGrid> {
    if n < 256 || !n.is_power_of_two() {
        return Err(Error::domain(format!("grid size must be a power of two ≥ 256, got {n}")));
    }
    let u_max = match u_max {
        Some(u) => {
            if !(u > 0.0 && u.is_finite()) {
                return Err(Error::domain(format!("u_max must be positive, got {u}")));
            }
            let tail = characteristic_function_at_horizon(spec, u)?.norm();
            if !(tail < CF_CUTOFF) {
                return Err(Error::domain(format!("|φ(u_max)| = {tail:e} is not below {CF_CUTOFF:e}; raise u_max")));
            }
            u
        }
        None => frequency_cutoff(spec)?,
    };
    let du = 2.0 * u_max / n as f64;
    let dx = std::f64::consts::PI / u_max;
    let center = spec.m() * spec.horizon_t();
    let x0 = center - (n / 2) as f64 * dx;
    let mut buf = Vec::with_capacity(n);
    for k in 0..n {
        let u = -u_max + k as f64 * du;
        let weight = if k == 0 { 0.5 } else { 1.0 };
        let phi = characteristic_function_at_horizon(spec, u)?;
        buf.push(phi * Complex64::from_polar(weight, -(k as f64) * du * x0));
    }
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = du / (2.0 * std::f64::consts::PI);
    let values: Vec<f64> = buf
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let x = x0 + j as f64 * dx;
            let phase = Complex64::from_polar(1.0, u_max * x);
            ((v * phase).re * scale).max(0.0)
        })
        .collect();
    let grid = DensityGrid { x_min: x0, x_max: x0 + (n - 1) as f64 * dx, n, values };
    let mass = grid.mass();
    if !((mass - 1.0).abs() <= MASS_TOL) {
        return Err(Error::Mass(format!("density grid mass {mass} differs from 1 by more than {MASS_TOL:e}")));
    }
    Ok(grid)
}

/// Inverse-CDF draws from an existing grid.
pub fn sample_from_grid(grid: &DensityGrid, n_samples: usize, seed: u64) -> Vec<f64> {
    let cdf = grid.cdf();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_samples)
        .map(|_| {
            let p: f64 = rng.random();
            let j = cdf.partition_point(|&c| c <= p).clamp(1, grid.n - 1);
            let (lo, hi) = (cdf[j - 1], cdf[j]);
            let frac = if hi > lo { (p - lo) / (hi - lo) } else { 0.5 };
            grid.x(j - 1) + frac * grid.dx()
        })
        .collect()
}

/// Default grid size for sampling and likelihood evaluation.
pub const DEFAULT_GRID_SIZE: usize = 4096;

/// `n_samples` draws of `X_T`, deterministic for a fixed seed.
pub fn sample(spec: &ProcessSpec, n_samples: usize, seed: u64) -> Result<Vec<f64>> {
    let grid = density_grid(spec, DEFAULT_GRID_SIZE, None)?;
    Ok(sample_from_grid(&grid, n_samples, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{GtsParams, RdtsParams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn gts() -> ProcessSpec {
        ProcessSpec::gts(
            GtsParams { a_plus: 0.5, a_minus: 0.5, c_plus: 1.0, c_minus: 1.0, lambda_plus: 2.0, lambda_minus: 3.0, m: 0.0 },
            1.0,
        )
        .unwrap()
    }

    fn cts_pair_specs(t: f64) -> (ProcessSpec, ProcessSpec) {
        let p = CtsParams { a: 0.7, c: 0.8, lambda_plus: 1.5, lambda_minus: 2.5, m: 0.1 };
        (ProcessSpec::cts(p, t).unwrap(), ProcessSpec::gts(p.as_gts(), t).unwrap())
    }

    fn rdts_symmetric() -> ProcessSpec {
        ProcessSpec::rdts(
            RdtsParams { a_plus: 0.6, a_minus: 0.6, c_plus: 1.0, c_minus: 1.0, lambda_plus: 2.0, lambda_minus: 2.0, m: 0.0 },
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn unit_at_zero() {
        for spec in [gts(), cts_pair_specs(1.0).0, rdts_symmetric()] {
            assert_eq!(characteristic_function(&spec, 0.0).unwrap(), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn gts_reference_value() {
        // Lévy–Khintchine quadrature at relative tolerance 1e-13.
        let phi = characteristic_function(&gts(), 1.0).unwrap();
        assert_relative_eq!(phi.re, 0.795_702_710_726_269_4, max_relative = 1e-12);
        assert_relative_eq!(phi.im, -0.017_395_982_203_972_336, max_relative = 1e-10);
    }

    #[test]
    fn closed_form_matches_levy_khintchine() {
        let cfg = QuadratureConfig::new(1e-14, 1e-12, 4000, 1e-10).unwrap();
        let spec = ProcessSpec::gts(
            GtsParams { a_plus: 0.4, a_minus: 1.3, c_plus: 0.7, c_minus: 1.2, lambda_plus: 1.5, lambda_minus: 2.5, m: 0.3 },
            1.0,
        )
        .unwrap();
        for u in [-7.5, -1.0, 0.01, 0.5, 3.0, 12.0] {
            let closed = log_characteristic_function(&spec, u).unwrap();
            let quad = levy_khintchine_exponent(&spec, u, &cfg).unwrap();
            assert!((closed - quad).norm() <= 1e-9 * closed.norm().max(1.0), "u={u} {closed} {quad}");
        }
        let rdts = rdts_symmetric();
        for u in [0.5, 2.0, 6.0] {
            let closed = log_characteristic_function(&rdts, u).unwrap();
            let quad = levy_khintchine_exponent(&rdts, u, &cfg).unwrap();
            assert!((closed - quad).norm() <= 1e-9 * closed.norm().max(1.0), "u={u} {closed} {quad}");
        }
    }

    #[test]
    fn symmetric_rdts_is_real() {
        for u in [0.3, 1.0, 4.0, 9.0] {
            let phi = characteristic_function(&rdts_symmetric(), u).unwrap();
            assert!(phi.im.abs() <= 1e-15 * phi.re.abs().max(1.0), "u={u} {phi}");
            assert!(phi.norm() <= 1.0);
        }
    }

    #[test]
    fn rdts_beyond_kummer_cap_is_convergence_error() {
        let err = characteristic_function(&rdts_symmetric(), 20.0).unwrap_err();
        assert!(matches!(err, Error::Convergence(_)));
    }

    #[test]
    fn g_function_domain() {
        let cfg = SeriesConfig::default();
        let x = Complex64::new(0.0, 1.0);
        assert!(g_function(GFunctionArgs { x, a: 1.0, lambda: 1.0 }, cfg).is_err());
        assert!(g_function(GFunctionArgs { x, a: 0.5, lambda: 0.0 }, cfg).is_err());
        assert_eq!(g_function(GFunctionArgs { x: Complex64::new(0.0, 0.0), a: 0.5, lambda: 1.0 }, cfg).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn density_mass_and_mean() {
        let spec = gts().with_decays(2.0, 3.0, 0.2).unwrap().with_horizon(2.0).unwrap();
        let grid = density_grid(&spec, DEFAULT_GRID_SIZE, None).unwrap();
        assert!((grid.mass() - 1.0).abs() <= 1e-6);
        assert!(grid.values.iter().all(|v| *v >= 0.0));
        let h = 1e-5;
        let derivative = (characteristic_function_at_horizon(&spec, h).unwrap()
            - characteristic_function_at_horizon(&spec, -h).unwrap())
            / (2.0 * h);
        let cf_mean = derivative.im;
        assert!((grid.mean() - cf_mean).abs() <= 1e-4, "{} vs {cf_mean}", grid.mean());
        assert_relative_eq!(cf_mean, 0.4, max_relative = 1e-8);
    }

    #[test]
    fn cts_grid_matches_gts_view() {
        let (cts, gts) = cts_pair_specs(1.5);
        let a = density_grid(&cts, 1024, None).unwrap();
        let b = density_grid(&gts, 1024, None).unwrap();
        assert_eq!(a.x_min, b.x_min);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn grid_rejects_bad_inputs() {
        assert!(matches!(density_grid(&gts(), 1000, None), Err(Error::Domain(_))));
        assert!(matches!(density_grid(&gts(), 128, None), Err(Error::Domain(_))));
        assert!(matches!(density_grid(&gts(), 1024, Some(1.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn csv_has_header() {
        let grid = density_grid(&gts(), 256, None).unwrap();
        let mut out = Vec::new();
        grid.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("x,value\n"));
        assert_eq!(text.lines().count(), 257);
    }

    #[test]
    fn sampling_is_deterministic_and_consistent() {
        let spec = gts();
        let grid = density_grid(&spec, DEFAULT_GRID_SIZE, None).unwrap();
        let n = 100_000;
        let xs = sample_from_grid(&grid, n, 7);
        assert_eq!(xs, sample(&spec, n, 7).unwrap());
        assert_ne!(xs[..10], sample_from_grid(&grid, 10, 8)[..]);

        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - grid.mean()).abs() <= 3.0 * se, "{mean} vs {} (se {se})", grid.mean());

        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        let cdf = grid.cdf();
        let grid_cdf = |x: f64| {
            let pos = ((x - grid.x_min) / grid.dx()).clamp(0.0, (grid.n - 1) as f64);
            let j = (pos.floor() as usize).min(grid.n - 2);
            let frac = pos - j as f64;
            cdf[j] * (1.0 - frac) + cdf[j + 1] * frac
        };
        let ks = sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = grid_cdf(x);
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS distance {ks}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn conjugate_symmetry_and_bound(u in -30.0f64..30.0, a in 0.1f64..1.9, lp in 0.5f64..5.0, lm in 0.5f64..5.0, m in -1.0f64..1.0) {
            prop_assume!((a - 1.0).abs() > 1e-3);
            let spec = ProcessSpec::gts(
                GtsParams { a_plus: a, a_minus: 2.0 - a, c_plus: 1.0, c_minus: 0.5, lambda_plus: lp, lambda_minus: lm, m },
                1.0,
            ).unwrap();
            let phi = characteristic_function(&spec, u).unwrap();
            let conj = characteristic_function(&spec, -u).unwrap();
            prop_assert!((phi.conj() - conj).norm() <= 1e-14);
            prop_assert!(phi.norm() <= 1.0 + 1e-15);
        }

        #[test]
        fn cts_cf_matches_gts_view_bitwise(u in -20.0f64..20.0, a in 0.1f64..1.9, c in 0.1f64..3.0, lp in 0.5f64..5.0, lm in 0.5f64..5.0) {
            prop_assume!((a - 1.0).abs() > 1e-3);
            let p = CtsParams { a, c, lambda_plus: lp, lambda_minus: lm, m: 0.0 };
            let cts = ProcessSpec::cts(p, 1.0).unwrap();
            let gts = ProcessSpec::gts(p.as_gts(), 1.0).unwrap();
            prop_assert_eq!(characteristic_function(&cts, u).unwrap(), characteristic_function(&gts, u).unwrap());
        }
    }
}
