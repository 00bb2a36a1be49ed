//! Fisher metric and α-connections in the decay-rate chart `(λ₊, λ₋)`.
//!
//! Closed forms are checked against two oracles: mixed finite differences
//! of the divergence, and quadrature of score products against the Lévy
//! measure. The quadrature oracle evaluates scores twice, once by
//! differentiating the Lévy density with a forward-mode jet and once from
//! the hand-written derivatives of the tempering function.

use std::ops::{Add, Mul, Sub};

use serde::Serialize;

use crate::divergence::{alpha_divergence, Alpha};
use crate::error::{Error, Result};
use crate::params::{make_equivalent, CtsParams, MeasurePair, ModelParams, ProcessSpec, Tail, Tempering};
use crate::quad::{integrate_tempered_tail, QuadResult, QuadratureConfig};
use crate::special::gamma_real;

/// Symmetric 2×2 metric in the coordinates `(λ₊, λ₋)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metric2 {
    pub g: [[f64; 2]; 2],
}

impl Metric2 {
    pub fn diagonal(plus: f64, minus: f64) -> Self {
        Metric2 { g: [[plus, 0.0], [0.0, minus]] }
    }

    pub fn det(&self) -> f64 {
        self.g[0][0] * self.g[1][1] - self.g[0][1] * self.g[1][0]
    }

    pub fn is_positive_definite(&self) -> bool {
        self.g[0][0] > 0.0 && self.det() > 0.0
    }

    pub fn inverse(&self) -> Result<Metric2> {
        let det = self.det();
        if !(det.is_finite() && det != 0.0) {
            return Err(Error::domain(format!("metric is singular (det = {det})")));
        }
        let g = self.g;
        Ok(Metric2 { g: [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]] })
    }
}

/// Connection coefficients with the last index lowered: `coeffs[i][j][k] = Γ_{ij,k}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Connection2 {
    pub coeffs: [[[f64; 2]; 2]; 2],
}

impl Connection2 {
    pub fn zero() -> Self {
        Connection2 { coeffs: [[[0.0; 2]; 2]; 2] }
    }

    /// Connection whose only non-zero components are `Γ_{++,+}` and `Γ_{--,-}`.
    pub fn diagonal(plus: f64, minus: f64) -> Self {
        let mut c = Self::zero();
        c.coeffs[0][0][0] = plus;
        c.coeffs[1][1][1] = minus;
        c
    }

    /// Christoffel symbols of the second kind `Γ^k_{ij} = g^{kl} Γ_{ij,l}`.
    pub fn raise(&self, metric: &Metric2) -> Result<[[[f64; 2]; 2]; 2]> {
        let inv = metric.inverse()?;
        let mut out = [[[0.0; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    out[i][j][k] = (0..2).map(|l| inv.g[k][l] * self.coeffs[i][j][l]).sum();
                }
            }
        }
        Ok(out)
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut c = *self;
        for row in c.coeffs.iter_mut() {
            for col in row.iter_mut() {
                for v in col.iter_mut() {
                    *v = f(*v);
                }
            }
        }
        c
    }
}

/// `T C Γ(n - a) / λ^{n-a}` for an exponentially tempered tail.
fn gts_moment(t: f64, c: f64, a: f64, lambda: f64, n: f64) -> Result<f64> {
    Ok(t * c * gamma_real(n - a)? / lambda.powf(n - a))
}

/// `2^{-1-a/2} T C Γ(n - a/2) / λ^{n-a/2}` for a Gaussian tempered tail.
fn rdts_moment(t: f64, c: f64, a: f64, lambda: f64, n: f64) -> Result<f64> {
    let half = a / 2.0;
    Ok(2f64.powf(-1.0 - half) * t * c * gamma_real(n - half)? / lambda.powf(n - half))
}

fn cts_moments(p: &CtsParams, t: f64, n: f64) -> Result<(f64, f64)> {
    Ok((gts_moment(t, p.c, p.a, p.lambda_plus, n)?, gts_moment(t, p.c, p.a, p.lambda_minus, n)?))
}

/// Score moments `T∫ (∂ log t)ⁿ`-type closed forms: `n = 2` gives the metric
/// diagonal, `n = 3` the connection scale.
fn moments(spec: &ProcessSpec, n: f64) -> Result<(f64, f64)> {
    let t = spec.horizon_t();
    match spec.params() {
        ModelParams::Cts(p) => cts_moments(p, t, n),
        ModelParams::Gts(_) => {
            let (up, down) = spec.tails();
            Ok((gts_moment(t, up.c, up.a, up.lambda, n)?, gts_moment(t, down.c, down.a, down.lambda, n)?))
        }
        ModelParams::Rdts(_) => {
            let (up, down) = spec.tails();
            Ok((rdts_moment(t, up.c, up.a, up.lambda, n)?, rdts_moment(t, down.c, down.a, down.lambda, n)?))
        }
    }
}

/// Closed-form Fisher metric; diagonal for all three families.
pub fn fisher_metric(spec: &ProcessSpec) -> Result<Metric2> {
    let (plus, minus) = moments(spec, 2.0)?;
    Ok(Metric2::diagonal(plus, minus))
}

/// Levi-Civita connection `Γ_{ii,i} = -½ X_i`.
pub fn levi_civita(spec: &ProcessSpec) -> Result<Connection2> {
    let (plus, minus) = moments(spec, 3.0)?;
    Ok(Connection2::diagonal(-0.5 * plus, -0.5 * minus))
}

/// α-connection `Γ^{(α)} = (1-α) Γ^{LC}`, i.e. `-((1-α)/2) X_i` on the diagonal.
pub fn alpha_connection(spec: &ProcessSpec, alpha: Alpha) -> Result<Connection2> {
    let a = alpha.value();
    let lc = levi_civita(spec)?;
    if a < 0.0 {
        return Ok(lc.map(|v| (1.0 - a) * v));
    }
    // Subtracting the dual coefficient from 2Γ^LC makes Γ^α + Γ^{-α} round
    // to exactly 2Γ^LC. Adding +0.0 turns -0.0 into +0.0.
    Ok(lc.map(|v| 2.0 * v - (1.0 + a) * v + 0.0))
}

/// Metric from mixed central differences of the closed-form divergence.
pub fn metric_from_divergence(spec: &ProcessSpec, alpha: Alpha, step: f64) -> Result<Metric2> {
    metric_from_divergence_with(spec, alpha, step, alpha_divergence)
}

/// Threshold on the disagreement of successive Richardson estimates,
/// relative to the largest metric entry.
const RICHARDSON_TOL: f64 = 1e-6;

/// Metric `g_ij = -∂_i ∂̃_j D(ξ, ξ̃)|_{ξ=ξ̃}` from any divergence on measure pairs.
///
/// `step` is relative: the increment in `λ_i` is `step · λ_i`. Estimates at
/// `h`, `h/2`, `h/4` are combined by Richardson extrapolation.
pub fn metric_from_divergence_with<D>(spec: &ProcessSpec, alpha: Alpha, step: f64, divergence: D) -> Result<Metric2>
where
    D: Fn(&MeasurePair, Alpha) -> Result<f64>,
{
    if !(step > 0.0 && step < 0.1) {
        return Err(Error::domain(format!("finite-difference step must lie in (0, 0.1), got {step}")));
    }
    let (lp, lm) = spec.lambdas();
    let base = [lp, lm];
    let eval = |h: f64| -> Result<Metric2> {
        let mut g = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let hi = h * base[i];
                let hj = h * base[j];
                let mut acc = 0.0;
                for (si, sj, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                    let mut xi = base;
                    xi[i] += si * hi;
                    let mut xt = base;
                    xt[j] += sj * hj;
                    let p = spec.with_decays(xi[0], xi[1], spec.m())?;
                    let pair = make_equivalent(&p, xt[0], xt[1])?;
                    acc += sign * divergence(&pair, alpha)?;
                }
                g[i][j] = -acc / (4.0 * hi * hj);
            }
        }
        Ok(Metric2 { g })
    };
    let richardson = |coarse: Metric2, fine: Metric2| {
        let mut g = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                g[i][j] = (4.0 * fine.g[i][j] - coarse.g[i][j]) / 3.0;
            }
        }
        Metric2 { g }
    };
    let m1 = eval(step)?;
    let m2 = eval(step / 2.0)?;
    let m4 = eval(step / 4.0)?;
    let r1 = richardson(m1, m2);
    let r2 = richardson(m2, m4);
    let scale = r2.g[0][0].abs().max(r2.g[1][1].abs());
    let gap = (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .map(|(i, j)| (r1.g[i][j] - r2.g[i][j]).abs())
        .fold(0.0, f64::max);
    if !(gap <= RICHARDSON_TOL * scale) {
        return Err(Error::convergence(format!(
            "Richardson estimates of the metric disagree by {gap:e} (scale {scale:e})"
        )));
    }
    Ok(r2)
}

/// Value, gradient and Hessian with respect to `(λ₊, λ₋)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub g: [f64; 2],
    pub h: [[f64; 2]; 2],
}

impl Jet2 {
    pub fn constant(v: f64) -> Self {
        Jet2 { v, g: [0.0; 2], h: [[0.0; 2]; 2] }
    }

    pub fn variable(v: f64, index: usize) -> Self {
        let mut j = Self::constant(v);
        j.g[index] = 1.0;
        j
    }

    pub fn scale(self, k: f64) -> Self {
        let mut out = self;
        out.v *= k;
        for i in 0..2 {
            out.g[i] *= k;
            for j in 0..2 {
                out.h[i][j] *= k;
            }
        }
        out
    }

    /// Chain rule for a scalar function with derivatives `(f, f', f'')` at `self.v`.
    fn compose(self, f0: f64, f1: f64, f2: f64) -> Self {
        let mut out = Self::constant(f0);
        for i in 0..2 {
            out.g[i] = f1 * self.g[i];
            for j in 0..2 {
                out.h[i][j] = f1 * self.h[i][j] + f2 * self.g[i] * self.g[j];
            }
        }
        out
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.compose(e, e, e)
    }

    pub fn ln(self) -> Self {
        self.compose(self.v.ln(), 1.0 / self.v, -1.0 / (self.v * self.v))
    }
}

impl Add for Jet2 {
    type Output = Jet2;

    fn add(self, rhs: Jet2) -> Jet2 {
        let mut out = self;
        out.v += rhs.v;
        for i in 0..2 {
            out.g[i] += rhs.g[i];
            for j in 0..2 {
                out.h[i][j] += rhs.h[i][j];
            }
        }
        out
    }
}

impl Sub for Jet2 {
    type Output = Jet2;

    fn sub(self, rhs: Jet2) -> Jet2 {
        self + rhs.scale(-1.0)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;

    fn mul(self, rhs: Jet2) -> Jet2 {
        let mut out = Self::constant(self.v * rhs.v);
        for i in 0..2 {
            out.g[i] = self.g[i] * rhs.v + self.v * rhs.g[i];
            for j in 0..2 {
                out.h[i][j] = self.h[i][j] * rhs.v
                    + self.g[i] * rhs.g[j]
                    + self.g[j] * rhs.g[i]
                    + self.v * rhs.h[i][j];
            }
        }
        out
    }
}

/// Log Lévy density at `x` as a jet in `(λ₊, λ₋)`.
fn log_density_jet(spec: &ProcessSpec, x: f64) -> Jet2 {
    let (up, down) = spec.tails();
    let (tail, index) = if x > 0.0 { (up, 0) } else { (down, 1) };
    let lambda = Jet2::variable(tail.lambda, index);
    let r = x.abs();
    let exponent = match spec.tempering() {
        Tempering::Exponential => lambda.scale(-r),
        Tempering::Gaussian => lambda.scale(-r * r / 2.0),
    };
    exponent + Jet2::constant(tail.c.ln() - (tail.a + 1.0) * r.ln())
}

/// Score, score Hessian and density at `x`, by forward differentiation of the log density.
fn lambda_form_scores(spec: &ProcessSpec, x: f64) -> Option<([f64; 2], [[f64; 2]; 2], f64)> {
    let l = log_density_jet(spec, x);
    let density = l.v.exp();
    if !(density > 0.0) {
        return None;
    }
    Some((l.g, l.h, density))
}

/// Scores from the hand-written derivatives of `log t(x; λ₊, λ₋)`.
fn tempering_scores(spec: &ProcessSpec, x: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let r = x.abs();
    let d = match spec.tempering() {
        Tempering::Exponential => -r,
        Tempering::Gaussian => -r * r / 2.0,
    };
    let g = if x > 0.0 { [d, 0.0] } else { [0.0, d] };
    (g, [[0.0; 2]; 2])
}

/// Which coefficient an integrand computes.
#[derive(Clone, Copy)]
enum Component {
    Metric(usize, usize),
    Connection(usize, usize, usize),
}

fn integrand_value(component: Component, w1: f64, g: [f64; 2], h: [[f64; 2]; 2]) -> f64 {
    match component {
        Component::Metric(i, j) => g[i] * g[j],
        Component::Connection(i, j, k) => (h[i][j] + w1 * g[i] * g[j]) * g[k],
    }
}

/// Power of `|x|` of a score product near the origin.
fn origin_power(tempering: Tempering, component: Component, a: f64) -> f64 {
    let per_score = match tempering {
        Tempering::Exponential => 1.0,
        Tempering::Gaussian => 2.0,
    };
    let order = match component {
        Component::Metric(..) => 2.0,
        Component::Connection(..) => 3.0,
    };
    per_score * order - a - 1.0
}

fn integrate_component<F>(spec: &ProcessSpec, component: Component, cfg: &QuadratureConfig, integrand: F) -> Result<QuadResult>
where
    F: Fn(f64) -> f64,
{
    let tempering = spec.tempering();
    let (up, down): (Tail, Tail) = spec.tails();
    let upper = integrate_tempered_tail(&integrand, tempering, up.lambda, origin_power(tempering, component, up.a), cfg)?;
    let lower = integrate_tempered_tail(|r| integrand(-r), tempering, down.lambda, origin_power(tempering, component, down.a), cfg)?;
    Ok((upper + lower).scale(spec.horizon_t()))
}

/// Relative disagreement tolerated between the λ-form and the t-form.
const FORM_AGREEMENT_TOL: f64 = 1e-10;

/// Metric and α-connection by quadrature of score products.
///
/// Both the λ-form (scores of the Lévy density) and the t-form (scores of
/// the tempering function against the Lévy measure) are computed; a
/// disagreement beyond `1e-10` relative plus the quadrature error bounds is
/// reported as a convergence failure. The λ-form values are returned.
pub fn geometry_quadrature(spec: &ProcessSpec, alpha: Alpha, cfg: &QuadratureConfig) -> Result<(Metric2, Connection2)> {
    let w1 = (1.0 - alpha.value()) / 2.0;
    let (up, down) = spec.tails();
    let lambda_form = |component: Component| {
        integrate_component(spec, component, cfg, |x| match lambda_form_scores(spec, x) {
            Some((g, h, density)) => integrand_value(component, w1, g, h) * density,
            None => 0.0,
        })
    };
    let t_form = |component: Component| {
        integrate_component(spec, component, cfg, |x| {
            let (g, h) = tempering_scores(spec, x);
            let tail = if x > 0.0 { up } else { down };
            let measure = tail.c / x.abs().powf(tail.a + 1.0) * crate::levy::tempering(x, spec).unwrap_or(0.0);
            integrand_value(component, w1, g, h) * measure
        })
    };
    let both = |component: Component| -> Result<f64> {
        let l = lambda_form(component)?;
        let t = t_form(component)?;
        let allowed = FORM_AGREEMENT_TOL * l.value.abs().max(t.value.abs()) + l.error + t.error + cfg.abs_tol;
        if !((l.value - t.value).abs() <= allowed) {
            return Err(Error::convergence(format!(
                "λ-form {} and t-form {} of a geometry integral disagree",
                l.value, t.value
            )));
        }
        Ok(l.value)
    };
    let mut g = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in i..2 {
            g[i][j] = both(Component::Metric(i, j))?;
            g[j][i] = g[i][j];
        }
    }
    let mut conn = Connection2::zero();
    for i in 0..2 {
        for j in i..2 {
            for k in 0..2 {
                let v = both(Component::Connection(i, j, k))?;
                conn.coeffs[i][j][k] = v;
                conn.coeffs[j][i][k] = v;
            }
        }
    }
    Ok((Metric2 { g }, conn))
}
