//! α-divergences between equivalent tempered stable processes.
//!
//! Closed forms are evaluated per tail and summed. Two quadrature oracles
//! integrate the f-divergence generator against the Lévy measure: the
//! λ-form builds the ratio `λ^P/λ^Q` from the two densities, the ψ-form
//! uses the closed-form log Radon–Nikodym derivative.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::levy::{levy_density, log_radon_nikodym};
use crate::params::{kl_finiteness_domain, mixture_weights, CtsParams, MeasurePair, ModelParams, Tail, Tempering};
use crate::quad::{integrate_tempered_tail, QuadResult, QuadratureConfig};
use crate::special::gamma_real;

/// The divergence order α.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct Alpha(f64);

/// Which formula an [`Alpha`] selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaBranch {
    /// α = -1: Kullback–Leibler.
    KullbackLeibler,
    /// α = +1: the dual of Kullback–Leibler.
    DualKullbackLeibler,
    Generic,
}

impl Alpha {
    pub const KL: Alpha = Alpha(-1.0);

    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::domain(format!("alpha must be finite, got {value}")));
        }
        Ok(Alpha(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn branch(self) -> AlphaBranch {
        if self.0 == -1.0 {
            AlphaBranch::KullbackLeibler
        } else if self.0 == 1.0 {
            AlphaBranch::DualKullbackLeibler
        } else {
            AlphaBranch::Generic
        }
    }

    pub fn negated(self) -> Alpha {
        Alpha(-self.0)
    }
}

/// `(w₁λ^a + w₂λ̃^a) - (w₁λ + w₂λ̃)^a`, evaluated as
/// `w₁(λ^a - m^a) + w₂(λ̃^a - m^a)` with `m = w₁λ + w₂λ̃` and each
/// difference taken through `expm1`/`ln_1p`, so that it stays accurate when
/// a weight is small.
fn mixed_bracket(w1: f64, w2: f64, lambda: f64, lambda_tilde: f64, a: f64) -> f64 {
    let m = w1 * lambda + w2 * lambda_tilde;
    let m_pow = m.powf(a);
    let gap = |weight: f64, offset: f64| weight * m_pow * (a * (offset / m).ln_1p()).exp_m1();
    gap(w1, w2 * (lambda - lambda_tilde)) + gap(w2, w1 * (lambda_tilde - lambda))
}

/// `(a-1)λ^a - aλ̃λ^{a-1} + λ̃^a`.
fn kl_bracket(lambda: f64, lambda_tilde: f64, a: f64) -> f64 {
    (a - 1.0) * lambda.powf(a) - a * lambda_tilde * lambda.powf(a - 1.0) + lambda_tilde.powf(a)
}

/// Bracket for one tail with index `a`, selected by the α branch.
fn bracket(alpha: Alpha, lambda: f64, lambda_tilde: f64, a: f64) -> f64 {
    match alpha.branch() {
        AlphaBranch::KullbackLeibler => kl_bracket(lambda, lambda_tilde, a),
        AlphaBranch::DualKullbackLeibler => kl_bracket(lambda_tilde, lambda, a),
        AlphaBranch::Generic => {
            let (w1, w2) = mixture_weights(alpha.0);
            mixed_bracket(w1, w2, lambda, lambda_tilde, a)
        }
    }
}

/// Prefactor `4/(1-α²)` of the generic branch, 1 at the endpoints.
fn prefactor(alpha: Alpha) -> f64 {
    match alpha.branch() {
        AlphaBranch::Generic => 4.0 / (1.0 - alpha.0 * alpha.0),
        _ => 1.0,
    }
}

/// Rounds a tail contribution that came out with the wrong sign to zero, so
/// that `prefactor · tail ≥ 0`.
fn clamp_to_sign(value: f64, alpha: Alpha) -> f64 {
    if prefactor(alpha) > 0.0 {
        value.max(0.0)
    } else {
        value.min(0.0)
    }
}

/// Contribution of one exponentially tempered tail.
fn gts_tail(t: f64, c: f64, a: f64, lambda: f64, lambda_tilde: f64, alpha: Alpha) -> Result<f64> {
    Ok(clamp_to_sign(t * c * gamma_real(-a)? * bracket(alpha, lambda, lambda_tilde, a), alpha))
}

/// Contribution of one Gaussian-tempered tail.
fn rdts_tail(t: f64, c: f64, a: f64, lambda: f64, lambda_tilde: f64, alpha: Alpha) -> Result<f64> {
    let half = a / 2.0;
    let scale = 2f64.powf(-1.0 - half);
    Ok(clamp_to_sign(scale * t * c * gamma_real(-half)? * bracket(alpha, lambda, lambda_tilde, half), alpha))
}

/// CTS tails with the shared `(a, C)` read directly from the CTS records.
fn cts_tails(p: &CtsParams, q: &CtsParams, t: f64, alpha: Alpha) -> Result<[f64; 2]> {
    Ok([
        gts_tail(t, p.c, p.a, p.lambda_plus, q.lambda_plus, alpha)?,
        gts_tail(t, p.c, p.a, p.lambda_minus, q.lambda_minus, alpha)?,
    ])
}

fn check_domain(pair: &MeasurePair, alpha: Alpha) -> Result<()> {
    if !kl_finiteness_domain(pair, alpha.0).finite {
        return Err(Error::domain(format!(
            "alpha = {} lies outside the finiteness domain of this pair (a mixed decay is not positive)",
            alpha.0
        )));
    }
    Ok(())
}

/// Closed-form contributions of the upper and lower tails, before the
/// `4/(1-α²)` prefactor.
pub fn divergence_by_tail(pair: &MeasurePair, alpha: Alpha) -> Result<[f64; 2]> {
    check_domain(pair, alpha)?;
    let t = pair.horizon_t();
    match (pair.p().params(), pair.q().params()) {
        (ModelParams::Cts(p), ModelParams::Cts(q)) => cts_tails(p, q, t, alpha),
        (ModelParams::Rdts(_), _) => {
            let ((pu, pd), (qu, qd)) = (pair.p().tails(), pair.q().tails());
            Ok([
                rdts_tail(t, pu.c, pu.a, pu.lambda, qu.lambda, alpha)?,
                rdts_tail(t, pd.c, pd.a, pd.lambda, qd.lambda, alpha)?,
            ])
        }
        _ => {
            let ((pu, pd), (qu, qd)) = (pair.p().tails(), pair.q().tails());
            Ok([
                gts_tail(t, pu.c, pu.a, pu.lambda, qu.lambda, alpha)?,
                gts_tail(t, pd.c, pd.a, pd.lambda, qd.lambda, alpha)?,
            ])
        }
    }
}

/// Closed-form α-divergence `D^{(α)}(P‖Q)`.
pub fn alpha_divergence(pair: &MeasurePair, alpha: Alpha) -> Result<f64> {
    let [up, down] = divergence_by_tail(pair, alpha)?;
    Ok(prefactor(alpha) * (up + down))
}

/// Kullback–Leibler divergence `KL(P‖Q)`, the α = -1 member.
pub fn kl_divergence(pair: &MeasurePair) -> Result<f64> {
    alpha_divergence(pair, Alpha::KL)
}

/// Per-tail terms of the Kim–Lee formula for the KL divergence of a CTS pair.
pub fn kim_lee_terms(pair: &MeasurePair) -> Result<[f64; 2]> {
    let (ModelParams::Cts(p), ModelParams::Cts(q)) = (pair.p().params(), pair.q().params()) else {
        return Err(Error::domain("the Kim–Lee formula applies to CTS pairs only"));
    };
    let (a, c, t) = (p.a, p.c, pair.horizon_t());
    let (lp, lm, qp, qm) = (p.lambda_plus, p.lambda_minus, q.lambda_plus, q.lambda_minus);
    let k = t * c * gamma_real(-a)?;
    Ok([
        k * ((a - 1.0) * lp.powf(a) - a * qp * lp.powf(a - 1.0) + qp.powf(a)),
        k * ((a - 1.0) * lm.powf(a) - a * qm * lm.powf(a - 1.0) + qm.powf(a)),
    ])
}

/// Kim–Lee closed form `TCΓ(-a)(... + ...)` for the KL divergence of a CTS pair.
pub fn kim_lee_kl(pair: &MeasurePair) -> Result<f64> {
    let (ModelParams::Cts(p), ModelParams::Cts(q)) = (pair.p().params(), pair.q().params()) else {
        return Err(Error::domain("the Kim–Lee formula applies to CTS pairs only"));
    };
    let (a, c, t) = (p.a, p.c, pair.horizon_t());
    let (lp, lm, qp, qm) = (p.lambda_plus, p.lambda_minus, q.lambda_plus, q.lambda_minus);
    Ok(t * c * gamma_real(-a)?
        * (((a - 1.0) * lp.powf(a) - a * qp * lp.powf(a - 1.0) + qp.powf(a))
            + ((a - 1.0) * lm.powf(a) - a * qm * lm.powf(a - 1.0) + qm.powf(a))))
}

/// Below this |ψ| the generator is summed as a power series.
const SERIES_SWITCH: f64 = 0.1;

/// The f-divergence generator evaluated at `t = e^ψ`.
///
/// Near `ψ = 0` every branch is summed from `Σ_{n≥2} c_n ψⁿ/n!` with
/// `c_n = Σ_{k=0}^{n-2} βᵏ`, `β = (1-α)/2`, which avoids the cancellation
/// in `w₁t + w₂ - t^{w₁}`.
pub fn generator_of_log(alpha: Alpha, psi: f64) -> f64 {
    if psi.abs() < SERIES_SWITCH {
        let beta = (1.0 - alpha.0) / 2.0;
        let mut coeff = 1.0;
        let mut bound = 1.0;
        let mut power_beta = 1.0;
        let mut term = psi * psi / 2.0;
        let mut sum = term;
        for n in 3..60 {
            power_beta *= beta;
            coeff += power_beta;
            bound += power_beta.abs();
            term *= psi / n as f64;
            sum += coeff * term;
            // Odd coefficients vanish at β = -1.
            if (bound * term).abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        return sum;
    }
    if psi == f64::NEG_INFINITY {
        return match alpha.branch() {
            AlphaBranch::KullbackLeibler => 1.0,
            AlphaBranch::DualKullbackLeibler => f64::INFINITY,
            AlphaBranch::Generic => {
                let (w1, w2) = mixture_weights(alpha.0);
                let limit = if w1 > 0.0 { w2 } else { f64::INFINITY };
                4.0 / (1.0 - alpha.0 * alpha.0) * limit
            }
        };
    }
    match alpha.branch() {
        AlphaBranch::KullbackLeibler => psi * psi.exp() - psi.exp() + 1.0,
        AlphaBranch::DualKullbackLeibler => -psi + psi.exp() - 1.0,
        AlphaBranch::Generic => {
            let (w1, w2) = mixture_weights(alpha.0);
            4.0 / (1.0 - alpha.0 * alpha.0) * (w1 * psi.exp() + w2 - (w1 * psi).exp())
        }
    }
}

/// Power of `|x|` with which the generator integrand vanishes at the origin.
fn origin_exponent(tempering: Tempering, a: f64) -> f64 {
    match tempering {
        Tempering::Exponential => 1.0 - a,
        Tempering::Gaussian => 3.0 - a,
    }
}

/// Sums the two half-line integrals of `integrand(x)` and scales by `T`.
///
/// `decay_of` picks the decay rate used for the change of variables on each tail.
fn integrate_both_tails<F>(pair: &MeasurePair, cfg: &QuadratureConfig, decay_of: impl Fn(Tail, Tail) -> f64, integrand: F) -> Result<QuadResult>
where
    F: Fn(f64) -> f64,
{
    let tempering = pair.p().tempering();
    let ((pu, pd), (qu, qd)) = (pair.p().tails(), pair.q().tails());
    let upper = integrate_tempered_tail(&integrand, tempering, decay_of(pu, qu), origin_exponent(tempering, pu.a), cfg)?;
    let lower = integrate_tempered_tail(|r| integrand(-r), tempering, decay_of(pd, qd), origin_exponent(tempering, pd.a), cfg)?;
    let total = (upper + lower).scale(pair.horizon_t());
    let target = cfg.abs_tol.max(cfg.rel_tol * total.value.abs());
    if !(total.error <= target) {
        return Err(Error::convergence(format!(
            "divergence quadrature error {:e} exceeds the target {target:e}",
            total.error
        )));
    }
    Ok(total)
}

fn log_density_ratio(x: f64, pair: &MeasurePair) -> f64 {
    let ratio = levy_density(x, pair.p()).unwrap_or(f64::NAN) / levy_density(x, pair.q()).unwrap_or(f64::NAN);
    if ratio > 0.5 {
        (ratio - 1.0).ln_1p()
    } else {
        ratio.ln()
    }
}

/// `f_α(ν^P/ν^Q) ν^Q` at `x`; zero once either density underflows.
fn weighted_generator(alpha: Alpha, x: f64, pair: &MeasurePair) -> f64 {
    let q = levy_density(x, pair.q()).unwrap_or(f64::NAN);
    if q == 0.0 || levy_density(x, pair.p()).unwrap_or(f64::NAN) == 0.0 {
        return 0.0;
    }
    generator_of_log(alpha, log_density_ratio(x, pair)) * q
}

/// Quadrature of the generator written through the two Lévy densities.
pub fn alpha_divergence_quadrature(pair: &MeasurePair, alpha: Alpha, cfg: &QuadratureConfig) -> Result<QuadResult> {
    check_domain(pair, alpha)?;
    match alpha.branch() {
        AlphaBranch::DualKullbackLeibler => {
            let dual = pair.swapped();
            integrate_both_tails(pair, cfg, |p, _| p.lambda, |x| {
                weighted_generator(Alpha::KL, x, &dual)
            })
        }
        _ => integrate_both_tails(pair, cfg, |_, q| q.lambda, |x| weighted_generator(alpha, x, pair)),
    }
}

/// Quadrature of the generator written through the log Radon–Nikodym derivative ψ.
pub fn alpha_divergence_psi_form(pair: &MeasurePair, alpha: Alpha, cfg: &QuadratureConfig) -> Result<QuadResult> {
    check_domain(pair, alpha)?;
    let psi = |x: f64| log_radon_nikodym(x, pair).unwrap_or(f64::NAN);
    integrate_both_tails(pair, cfg, |_, q| q.lambda, |x| {
        let q = levy_density(x, pair.q()).unwrap_or(f64::NAN);
        if q == 0.0 {
            return 0.0;
        }
        generator_of_log(alpha, psi(x)) * q
    })
}
