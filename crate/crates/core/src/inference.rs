//! Jeffreys prior, Firth-penalized likelihood fits and superharmonic
//! shrinkage-prior ansatzes.
//!
//! Likelihoods use the FFT density of `X_T` on a fixed frequency grid, so
//! the objective is smooth in the decay rates. Fits run a Nelder–Mead
//! search in `(ln λ₊, ln λ₋)` with the other parameters frozen.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charfn::{density_grid, frequency_cutoff, sample_from_grid, DensityGrid, DEFAULT_GRID_SIZE};
use crate::error::{Error, Result};
use crate::geometry::{fisher_metric, levi_civita};
use crate::params::ProcessSpec;

/// Jeffreys prior `√det g` with proportionality constant 1.
pub fn jeffreys_prior(spec: &ProcessSpec) -> Result<f64> {
    Ok(fisher_metric(spec)?.det().sqrt())
}

/// Firth-penalized log-likelihood `ℓ + ln √det g`.
pub fn penalized_loglik(loglik: f64, spec: &ProcessSpec) -> Result<f64> {
    Ok(loglik + jeffreys_prior(spec)?.ln())
}

/// The four shrinkage-prior ansatzes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnsatzKind {
    /// `λ₊^k`
    Phi1,
    /// `λ₋^l`
    Phi2,
    /// `c₁λ₊^k + c₂λ₋^l`
    Phi3,
    /// `λ₊^k λ₋^l`
    Phi4,
}

impl std::str::FromStr for AnsatzKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "phi1" => Ok(AnsatzKind::Phi1),
            "phi2" => Ok(AnsatzKind::Phi2),
            "phi3" => Ok(AnsatzKind::Phi3),
            "phi4" => Ok(AnsatzKind::Phi4),
            other => Err(Error::domain(format!("unknown ansatz {other:?}"))),
        }
    }
}

/// An ansatz with its exponents and weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub kind: AnsatzKind,
    pub k: f64,
    pub l: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Open interval `(min(0, a-1), max(0, a-1))` of admissible exponents.
pub fn exponent_interval(a: f64) -> (f64, f64) {
    (0f64.min(a - 1.0), 0f64.max(a - 1.0))
}

fn check_exponent(name: &str, value: f64, a: f64) -> Result<()> {
    let (lo, hi) = exponent_interval(a);
    if !(value > lo && value < hi) {
        return Err(Error::domain(format!("{name} = {value} outside the open interval ({lo}, {hi})")));
    }
    Ok(())
}

impl AnsatzSpec {
    /// Checks the exponent and weight conditions against the tail indices of `spec`.
    pub fn validate(&self, spec: &ProcessSpec) -> Result<()> {
        let (up, down) = spec.tails();
        let uses_k = matches!(self.kind, AnsatzKind::Phi1 | AnsatzKind::Phi3 | AnsatzKind::Phi4);
        let uses_l = matches!(self.kind, AnsatzKind::Phi2 | AnsatzKind::Phi3 | AnsatzKind::Phi4);
        if uses_k {
            check_exponent("k", self.k, up.a)?;
        }
        if uses_l {
            check_exponent("l", self.l, down.a)?;
        }
        if self.kind == AnsatzKind::Phi3 && !(self.c1 > 0.0 && self.c2 > 0.0) {
            return Err(Error::domain(format!("phi3 needs c1 > 0 and c2 > 0 (got {}, {})", self.c1, self.c2)));
        }
        Ok(())
    }

    /// Value at `(λ₊, λ₋)` without validation.
    pub fn value_at(&self, lambda_plus: f64, lambda_minus: f64) -> f64 {
        let phi1 = || lambda_plus.powf(self.k);
        let phi2 = || lambda_minus.powf(self.l);
        match self.kind {
            AnsatzKind::Phi1 => phi1(),
            AnsatzKind::Phi2 => phi2(),
            AnsatzKind::Phi3 => self.c1 * phi1() + self.c2 * phi2(),
            AnsatzKind::Phi4 => phi1() * phi2(),
        }
    }
}

/// Ansatz value at the decay rates of `spec`.
pub fn evaluate_ansatz(spec: &ProcessSpec, ansatz: &AnsatzSpec) -> Result<f64> {
    ansatz.validate(spec)?;
    let (lp, lm) = spec.lambdas();
    Ok(ansatz.value_at(lp, lm))
}

/// Laplace–Beltrami operator of an admissible ansatz at the decay rates of `spec`.
pub fn laplace_beltrami(spec: &ProcessSpec, ansatz: &AnsatzSpec, step: f64) -> Result<f64> {
    ansatz.validate(spec)?;
    laplace_beltrami_fn(spec, |p, m| ansatz.value_at(p, m), step)
}

/// Default relative step of [`laplace_beltrami`].
pub const DEFAULT_LB_STEP: f64 = 1e-2;

/// Relative agreement required between successive Richardson estimates.
const LB_RICHARDSON_TOL: f64 = 1e-6;

/// Laplace–Beltrami operator `Δφ = g^{ij}(∂_i∂_jφ - Γ^k_{ij}∂_kφ)` of any
/// function of `(λ₊, λ₋)`, with the closed-form metric and Levi-Civita
/// connection and central differences of `φ`.
///
/// `step` is relative to each coordinate. Estimates at `h`, `h/2`, `h/4`
/// are Richardson-extrapolated and must agree.
pub fn laplace_beltrami_fn<F>(spec: &ProcessSpec, phi: F, step: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    if !(step > 0.0 && step < 0.1) {
        return Err(Error::domain(format!("finite-difference step must lie in (0, 0.1), got {step}")));
    }
    let metric = fisher_metric(spec)?;
    let inv = metric.inverse()?;
    let christoffel = levi_civita(spec)?.raise(&metric)?;
    let (lp, lm) = spec.lambdas();
    let base = [lp, lm];
    let f = |d: [f64; 2]| phi(base[0] + d[0], base[1] + d[1]);

    // Returns Δφ and the sum of absolute values of its terms.
    let estimate = |h: f64| -> (f64, f64) {
        let hs = [h * base[0], h * base[1]];
        let centre = f([0.0, 0.0]);
        let mut grad = [0.0; 2];
        let mut hess = [[0.0; 2]; 2];
        for i in 0..2 {
            let mut e = [0.0; 2];
            e[i] = hs[i];
            let plus = f(e);
            let minus = f([-e[0], -e[1]]);
            grad[i] = (plus - minus) / (2.0 * hs[i]);
            hess[i][i] = (plus - 2.0 * centre + minus) / (hs[i] * hs[i]);
        }
        let mixed = (f([hs[0], hs[1]]) - f([hs[0], -hs[1]]) - f([-hs[0], hs[1]]) + f([-hs[0], -hs[1]])) / (4.0 * hs[0] * hs[1]);
        hess[0][1] = mixed;
        hess[1][0] = mixed;
        let mut value = 0.0;
        let mut size = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let second = inv.g[i][j] * hess[i][j];
                let first: f64 = (0..2).map(|k| inv.g[i][j] * christoffel[i][j][k] * grad[k]).sum();
                value += second - first;
                size += second.abs() + first.abs();
            }
        }
        (value, size)
    };
    let (d1, _) = estimate(step);
    let (d2, _) = estimate(step / 2.0);
    let (d4, size) = estimate(step / 4.0);
    let r1 = (4.0 * d2 - d1) / 3.0;
    let r2 = (4.0 * d4 - d2) / 3.0;
    if !((r1 - r2).abs() <= LB_RICHARDSON_TOL * size + 1e-13) {
        return Err(Error::convergence(format!(
            "Laplace–Beltrami estimates did not stabilize ({r1:e} vs {r2:e})"
        )));
    }
    Ok(r2)
}

/// Result of a decay-rate fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult {
    pub lambda_hat_plus: f64,
    pub lambda_hat_minus: f64,
    /// Log-likelihood at the estimate (without the penalty).
    pub loglik: f64,
    pub penalized: bool,
    pub iterations: usize,
}

/// Minimum sample size accepted by [`fit_mle`].
pub const MIN_FIT_SAMPLES: usize = 100;
/// Nelder–Mead iteration cap.
pub const MAX_FIT_ITERATIONS: usize = 500;
/// Search box half-width as a factor around the template decays.
const SEARCH_FACTOR: f64 = 20.0;
/// Density floor used inside the log-likelihood.
const DENSITY_FLOOR: f64 = 1e-300;

/// Log-likelihood of samples under a density grid, by linear interpolation.
pub fn grid_loglik(grid: &DensityGrid, samples: &[f64]) -> f64 {
    samples.iter().map(|&x| grid.interpolate(x).max(DENSITY_FLOOR).ln()).sum()
}

/// Frozen numerical setup shared by all likelihood evaluations of one fit.
#[derive(Debug, Clone, Copy)]
pub struct LikelihoodGrid {
    pub n: usize,
    pub u_max: f64,
}

impl LikelihoodGrid {
    /// Grid derived from the template: cutoff of the template, doubled resolution.
    pub fn for_template(template: &ProcessSpec) -> Result<Self> {
        Ok(LikelihoodGrid { n: 2 * DEFAULT_GRID_SIZE, u_max: frequency_cutoff(template)? })
    }
}

struct Objective<'a> {
    template: &'a ProcessSpec,
    samples: &'a [f64],
    penalized: bool,
    grid: LikelihoodGrid,
    bounds: [(f64, f64); 2],
}

impl Objective<'_> {
    fn spec_at(&self, z: [f64; 2]) -> Result<ProcessSpec> {
        self.template.with_decays(z[0].exp(), z[1].exp(), self.template.m())
    }

    fn loglik(&self, spec: &ProcessSpec) -> Result<f64> {
        let grid = density_grid(spec, self.grid.n, Some(self.grid.u_max))?;
        Ok(grid_loglik(&grid, self.samples))
    }

    /// Negative objective; candidates outside the box or with failed grids score +∞.
    fn cost(&self, z: [f64; 2]) -> f64 {
        if (0..2).any(|i| z[i] < self.bounds[i].0 || z[i] > self.bounds[i].1) {
            return f64::INFINITY;
        }
        let Ok(spec) = self.spec_at(z) else { return f64::INFINITY };
        let Ok(ll) = self.loglik(&spec) else { return f64::INFINITY };
        let value = if self.penalized { penalized_loglik(ll, &spec).unwrap_or(f64::NEG_INFINITY) } else { ll };
        if value.is_finite() {
            -value
        } else {
            f64::INFINITY
        }
    }
}

/// Nelder–Mead minimization in two dimensions. Returns the best point,
/// its cost and the number of iterations.
fn nelder_mead<F: Fn([f64; 2]) -> f64>(cost: F, start: [f64; 2], scale: f64, max_iter: usize) -> Result<([f64; 2], f64, usize)> {
    let mut simplex = [start, [start[0] + scale, start[1]], [start[0], start[1] + scale]];
    let mut values = simplex.map(&cost);
    for iter in 0..max_iter {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);
        let size = (1..3)
            .map(|i| (simplex[i][0] - simplex[0][0]).abs().max((simplex[i][1] - simplex[0][1]).abs()))
            .fold(0.0, f64::max);
        if size < 1e-7 && (values[2] - values[0]).abs() <= 1e-9 * (1.0 + values[0].abs()) {
            return Ok((simplex[0], values[0], iter));
        }
        let centroid = [(simplex[0][0] + simplex[1][0]) / 2.0, (simplex[0][1] + simplex[1][1]) / 2.0];
        let along = |t: f64| [centroid[0] + t * (simplex[2][0] - centroid[0]), centroid[1] + t * (simplex[2][1] - centroid[1])];
        let reflected = along(-1.0);
        let fr = cost(reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = cost(expanded);
            if fe < fr {
                simplex[2] = expanded;
                values[2] = fe;
            } else {
                simplex[2] = reflected;
                values[2] = fr;
            }
        } else if fr < values[1] {
            simplex[2] = reflected;
            values[2] = fr;
        } else {
            let (contracted, fc) = if fr < values[2] {
                let c = along(-0.5);
                (c, cost(c))
            } else {
                let c = along(0.5);
                (c, cost(c))
            };
            if fc < values[2].min(fr) {
                simplex[2] = contracted;
                values[2] = fc;
            } else {
                for i in 1..3 {
                    simplex[i] = [
                        simplex[0][0] + 0.5 * (simplex[i][0] - simplex[0][0]),
                        simplex[0][1] + 0.5 * (simplex[i][1] - simplex[0][1]),
                    ];
                    values[i] = cost(simplex[i]);
                }
            }
        }
    }
    Err(Error::convergence(format!("Nelder–Mead did not converge in {max_iter} iterations")))
}

/// Maximum-likelihood (optionally Firth-penalized) estimate of `(λ₊, λ₋)`
/// with the other parameters taken from `template`.
pub fn fit_mle(samples: &[f64], template: &ProcessSpec, penalized: bool) -> Result<FitResult> {
    let grid = LikelihoodGrid::for_template(template)?;
    fit_mle_on_grid(samples, template, penalized, grid)
}

/// [`fit_mle`] with an explicit likelihood grid.
pub fn fit_mle_on_grid(samples: &[f64], template: &ProcessSpec, penalized: bool, grid: LikelihoodGrid) -> Result<FitResult> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::domain(format!("fit needs at least {MIN_FIT_SAMPLES} samples, got {}", samples.len())));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("samples contain non-finite values"));
    }
    let (lp, lm) = template.lambdas();
    let start = [lp.ln(), lm.ln()];
    let width = SEARCH_FACTOR.ln();
    let objective = Objective {
        template,
        samples,
        penalized,
        grid,
        bounds: [(start[0] - width, start[0] + width), (start[1] - width, start[1] + width)],
    };
    if !objective.cost(start).is_finite() {
        return Err(Error::Mass("likelihood grid failed at the template decay rates".into()));
    }
    let (best, _, iterations) = nelder_mead(|z| objective.cost(z), start, 0.1, MAX_FIT_ITERATIONS)?;
    let spec = objective.spec_at(best)?;
    Ok(FitResult {
        lambda_hat_plus: best[0].exp(),
        lambda_hat_minus: best[1].exp(),
        loglik: objective.loglik(&spec)?,
        penalized,
        iterations,
    })
}

/// Aggregate of a Monte Carlo bias study for one estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub mean_lambda_plus: f64,
    pub mean_lambda_minus: f64,
    /// Mean estimate minus the true value.
    pub bias_lambda_plus: f64,
    pub bias_lambda_minus: f64,
    /// Mean absolute deviation from the true value.
    pub mean_abs_error_lambda_plus: f64,
    pub mean_abs_error_lambda_minus: f64,
}

/// Result of [`bias_study`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasStudy {
    pub n: usize,
    pub seeds: usize,
    pub seed0: u64,
    pub true_lambda_plus: f64,
    pub true_lambda_minus: f64,
    pub plain: EstimatorSummary,
    pub penalized: EstimatorSummary,
}

fn summarize(fits: &[FitResult], truth: (f64, f64)) -> EstimatorSummary {
    let count = fits.len() as f64;
    let mean = |f: &dyn Fn(&FitResult) -> f64| fits.iter().map(f).sum::<f64>() / count;
    let mean_lambda_plus = mean(&|r| r.lambda_hat_plus);
    let mean_lambda_minus = mean(&|r| r.lambda_hat_minus);
    EstimatorSummary {
        mean_lambda_plus,
        mean_lambda_minus,
        bias_lambda_plus: mean_lambda_plus - truth.0,
        bias_lambda_minus: mean_lambda_minus - truth.1,
        mean_abs_error_lambda_plus: mean(&|r| (r.lambda_hat_plus - truth.0).abs()),
        mean_abs_error_lambda_minus: mean(&|r| (r.lambda_hat_minus - truth.1).abs()),
    }
}

/// Fits plain and penalized estimators on `seeds` independent samples of
/// size `n` drawn from `spec` with seeds `seed0, seed0 + 1, ...`.
///
/// Seeds run in parallel; results are collected in seed order, so the
/// summary does not depend on scheduling.
pub fn bias_study(spec: &ProcessSpec, n: usize, seeds: usize, seed0: u64) -> Result<BiasStudy> {
    if seeds == 0 {
        return Err(Error::domain("bias study needs at least one seed"));
    }
    let sampling_grid = density_grid(spec, DEFAULT_GRID_SIZE, None)?;
    let likelihood_grid = LikelihoodGrid::for_template(spec)?;
    let fits: Vec<(FitResult, FitResult)> = (0..seeds as u64)
        .into_par_iter()
        .map(|i| {
            let samples = sample_from_grid(&sampling_grid, n, seed0.wrapping_add(i));
            let plain = fit_mle_on_grid(&samples, spec, false, likelihood_grid)?;
            let penalized = fit_mle_on_grid(&samples, spec, true, likelihood_grid)?;
            Ok((plain, penalized))
        })
        .collect::<Result<_>>()?;
    let truth = spec.lambdas();
    let plain: Vec<FitResult> = fits.iter().map(|f| f.0).collect();
    let penalized: Vec<FitResult> = fits.iter().map(|f| f.1).collect();
    Ok(BiasStudy {
        n,
        seeds,
        seed0,
        true_lambda_plus: truth.0,
        true_lambda_minus: truth.1,
        plain: summarize(&plain, truth),
        penalized: summarize(&penalized, truth),
    })
}
