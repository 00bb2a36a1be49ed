//! Parameter records for the GTS, CTS and RDTS families, validation, and
//! construction of equivalent-measure pairs.
//!
//! A [`ProcessSpec`] carries one validated parameter record plus the horizon
//! `T`. A [`MeasurePair`] can only be obtained through [`make_equivalent`] or
//! [`check_equivalent`], so every divergence routine receives a pair whose
//! shared parameters and drift relation have already been verified.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::gamma_real;

/// Absolute tolerance on the drift relation between equivalent measures.
pub const DRIFT_TOL: f64 = 1e-12;

/// Model family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "GTS")]
    Gts,
    #[serde(rename = "CTS")]
    Cts,
    #[serde(rename = "RDTS")]
    Rdts,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gts => "GTS",
            ModelKind::Cts => "CTS",
            ModelKind::Rdts => "RDTS",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "GTS" => Ok(ModelKind::Gts),
            "CTS" => Ok(ModelKind::Cts),
            "RDTS" => Ok(ModelKind::Rdts),
            other => Err(Error::domain(format!("unknown model kind {other:?}"))),
        }
    }
}

/// Generalized tempered stable parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GtsParams {
    pub a_plus: f64,
    pub a_minus: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub m: f64,
}

/// Classical tempered stable parameters: shared tail index and scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CtsParams {
    pub a: f64,
    pub c: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub m: f64,
}

/// Rapidly decreasing tempered stable parameters (Gaussian tempering).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdtsParams {
    pub a_plus: f64,
    pub a_minus: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub m: f64,
}

impl CtsParams {
    /// The same law written as a GTS record with `a± = a`, `C± = C`.
    pub fn as_gts(&self) -> GtsParams {
        GtsParams {
            a_plus: self.a,
            a_minus: self.a,
            c_plus: self.c,
            c_minus: self.c,
            lambda_plus: self.lambda_plus,
            lambda_minus: self.lambda_minus,
            m: self.m,
        }
    }
}

impl GtsParams {
    /// Whether the record satisfies the CTS condition.
    pub fn is_cts(&self) -> bool {
        self.a_plus == self.a_minus && self.c_plus == self.c_minus
    }
}

/// One tail of a two-sided Lévy measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tail {
    pub a: f64,
    pub c: f64,
    pub lambda: f64,
}

/// Shape of the tempering function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tempering {
    /// `exp(-λ|x|)`
    Exponential,
    /// `exp(-λx²/2)`
    Gaussian,
}

/// Model-specific parameter record, tagged by family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ModelParams {
    #[serde(rename = "GTS")]
    Gts(GtsParams),
    #[serde(rename = "CTS")]
    Cts(CtsParams),
    #[serde(rename = "RDTS")]
    Rdts(RdtsParams),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Gts(_) => ModelKind::Gts,
            ModelParams::Cts(_) => ModelKind::Cts,
            ModelParams::Rdts(_) => ModelKind::Rdts,
        }
    }

    pub fn m(&self) -> f64 {
        match self {
            ModelParams::Gts(p) => p.m,
            ModelParams::Cts(p) => p.m,
            ModelParams::Rdts(p) => p.m,
        }
    }

    /// Upper and lower tails; CTS goes through [`CtsParams::as_gts`].
    pub fn tails(&self) -> (Tail, Tail) {
        let g = match self {
            ModelParams::Gts(p) => *p,
            ModelParams::Cts(p) => p.as_gts(),
            ModelParams::Rdts(p) => GtsParams {
                a_plus: p.a_plus,
                a_minus: p.a_minus,
                c_plus: p.c_plus,
                c_minus: p.c_minus,
                lambda_plus: p.lambda_plus,
                lambda_minus: p.lambda_minus,
                m: p.m,
            },
        };
        (
            Tail { a: g.a_plus, c: g.c_plus, lambda: g.lambda_plus },
            Tail { a: g.a_minus, c: g.c_minus, lambda: g.lambda_minus },
        )
    }

    pub fn tempering(&self) -> Tempering {
        match self {
            ModelParams::Rdts(_) => Tempering::Gaussian,
            _ => Tempering::Exponential,
        }
    }

    /// Copy with new decay rates and location.
    pub fn with_decays(&self, lambda_plus: f64, lambda_minus: f64, m: f64) -> Self {
        match *self {
            ModelParams::Gts(p) => ModelParams::Gts(GtsParams { lambda_plus, lambda_minus, m, ..p }),
            ModelParams::Cts(p) => ModelParams::Cts(CtsParams { lambda_plus, lambda_minus, m, ..p }),
            ModelParams::Rdts(p) => ModelParams::Rdts(RdtsParams { lambda_plus, lambda_minus, m, ..p }),
        }
    }
}

fn check_index(name: &str, a: f64) -> Result<()> {
    if !a.is_finite() || a <= 0.0 || a >= 2.0 {
        return Err(Error::domain(format!("{name} = {a} outside (0, 2)")));
    }
    if a == 1.0 {
        return Err(Error::domain(format!("{name} = 1 excluded")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::domain(format!("{name} = {v}: {name} ≤ 0")));
    }
    Ok(())
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::domain(format!("{name} = {v} is not finite")));
    }
    Ok(())
}

fn check_params(params: &ModelParams) -> Result<()> {
    match params {
        ModelParams::Gts(GtsParams { a_plus, a_minus, c_plus, c_minus, lambda_plus, lambda_minus, m })
        | ModelParams::Rdts(RdtsParams { a_plus, a_minus, c_plus, c_minus, lambda_plus, lambda_minus, m }) => {
            check_index("a_plus", *a_plus)?;
            check_index("a_minus", *a_minus)?;
            check_positive("c_plus", *c_plus)?;
            check_positive("c_minus", *c_minus)?;
            check_positive("lambda_plus", *lambda_plus)?;
            check_positive("lambda_minus", *lambda_minus)?;
            check_finite("m", *m)
        }
        ModelParams::Cts(CtsParams { a, c, lambda_plus, lambda_minus, m }) => {
            check_index("a", *a)?;
            check_positive("c", *c)?;
            check_positive("lambda_plus", *lambda_plus)?;
            check_positive("lambda_minus", *lambda_minus)?;
            check_finite("m", *m)
        }
    }
}

/// A validated model: family, parameters and horizon `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "UncheckedSpec")]
pub struct ProcessSpec {
    #[serde(flatten)]
    params: ModelParams,
    horizon_t: f64,
}

#[derive(Deserialize)]
struct UncheckedSpec {
    #[serde(flatten)]
    params: ModelParams,
    horizon_t: f64,
}

impl TryFrom<UncheckedSpec> for ProcessSpec {
    type Error = Error;

    fn try_from(raw: UncheckedSpec) -> Result<Self> {
        ProcessSpec::new(raw.params, raw.horizon_t)
    }
}

impl ProcessSpec {
    pub fn new(params: ModelParams, horizon_t: f64) -> Result<Self> {
        check_params(&params)?;
        check_positive("horizon_t", horizon_t)?;
        Ok(Self { params, horizon_t })
    }

    pub fn gts(p: GtsParams, horizon_t: f64) -> Result<Self> {
        Self::new(ModelParams::Gts(p), horizon_t)
    }

    pub fn cts(p: CtsParams, horizon_t: f64) -> Result<Self> {
        Self::new(ModelParams::Cts(p), horizon_t)
    }

    pub fn rdts(p: RdtsParams, horizon_t: f64) -> Result<Self> {
        Self::new(ModelParams::Rdts(p), horizon_t)
    }

    pub fn kind(&self) -> ModelKind {
        self.params.kind()
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn horizon_t(&self) -> f64 {
        self.horizon_t
    }

    pub fn m(&self) -> f64 {
        self.params.m()
    }

    pub fn tails(&self) -> (Tail, Tail) {
        self.params.tails()
    }

    pub fn tempering(&self) -> Tempering {
        self.params.tempering()
    }

    pub fn lambdas(&self) -> (f64, f64) {
        let (up, down) = self.tails();
        (up.lambda, down.lambda)
    }

    /// The CTS-condition view of a CTS spec as a GTS spec; `None` for other kinds.
    pub fn cts_as_gts(&self) -> Option<ProcessSpec> {
        match self.params {
            ModelParams::Cts(p) => Some(ProcessSpec { params: ModelParams::Gts(p.as_gts()), horizon_t: self.horizon_t }),
            _ => None,
        }
    }

    /// Copy with new decay rates and location, revalidated.
    pub fn with_decays(&self, lambda_plus: f64, lambda_minus: f64, m: f64) -> Result<Self> {
        Self::new(self.params.with_decays(lambda_plus, lambda_minus, m), self.horizon_t)
    }

    /// Copy with a different horizon.
    pub fn with_horizon(&self, horizon_t: f64) -> Result<Self> {
        Self::new(self.params, horizon_t)
    }
}

/// Parameter record with every field optional, as parsed from user input.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub a: Option<f64>,
    pub c: Option<f64>,
    pub a_plus: Option<f64>,
    pub a_minus: Option<f64>,
    pub c_plus: Option<f64>,
    pub c_minus: Option<f64>,
    pub lambda_plus: Option<f64>,
    pub lambda_minus: Option<f64>,
    pub m: Option<f64>,
    pub horizon_t: Option<f64>,
}

fn need(name: &str, v: Option<f64>) -> Result<f64> {
    v.ok_or_else(|| Error::domain(format!("missing parameter {name}")))
}

/// Builds a [`ProcessSpec`] of the given kind from a loose parameter record.
pub fn validate(kind: ModelKind, raw: &RawParams) -> Result<ProcessSpec> {
    let lambda_plus = need("lambda_plus", raw.lambda_plus)?;
    let lambda_minus = need("lambda_minus", raw.lambda_minus)?;
    let m = need("m", raw.m)?;
    let horizon_t = need("horizon_t", raw.horizon_t)?;
    let params = match kind {
        ModelKind::Cts => ModelParams::Cts(CtsParams {
            a: need("a", raw.a)?,
            c: need("c", raw.c)?,
            lambda_plus,
            lambda_minus,
            m,
        }),
        ModelKind::Gts | ModelKind::Rdts => {
            let g = GtsParams {
                a_plus: need("a_plus", raw.a_plus)?,
                a_minus: need("a_minus", raw.a_minus)?,
                c_plus: need("c_plus", raw.c_plus)?,
                c_minus: need("c_minus", raw.c_minus)?,
                lambda_plus,
                lambda_minus,
                m,
            };
            if kind == ModelKind::Gts {
                ModelParams::Gts(g)
            } else {
                ModelParams::Rdts(RdtsParams {
                    a_plus: g.a_plus,
                    a_minus: g.a_minus,
                    c_plus: g.c_plus,
                    c_minus: g.c_minus,
                    lambda_plus,
                    lambda_minus,
                    m,
                })
            }
        }
    };
    ProcessSpec::new(params, horizon_t)
}

/// Drift contribution of one tail: the mean of its compensated jumps
/// `∫ x ν(dx)` over the half-line, as a function of the decay rate.
fn tail_mean(tail: Tail, lambda: f64, tempering: Tempering) -> Result<f64> {
    let a = tail.a;
    match tempering {
        Tempering::Exponential => Ok(tail.c * gamma_real(1.0 - a)? * lambda.powf(a - 1.0)),
        Tempering::Gaussian => Ok(2f64.powf(-(1.0 + a) / 2.0)
            * tail.c
            * gamma_real((1.0 - a) / 2.0)?
            * lambda.powf((a - 1.0) / 2.0)),
    }
}

/// Location `m̃` of the measure with decays `(λ̃₊, λ̃₋)` that is equivalent to `base`.
fn equivalent_location(base: &ProcessSpec, new_plus: f64, new_minus: f64) -> Result<f64> {
    let (up, down) = base.tails();
    let temp = base.tempering();
    let shift_plus = tail_mean(up, up.lambda, temp)? - tail_mean(up, new_plus, temp)?;
    let shift_minus = tail_mean(down, down.lambda, temp)? - tail_mean(down, new_minus, temp)?;
    Ok(base.m() - shift_plus + shift_minus)
}

/// Two specs satisfying the equivalence conditions. `p` plays the role of
/// the measure whose density is the numerator of the Radon–Nikodym derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasurePair {
    p: ProcessSpec,
    q: ProcessSpec,
}

impl MeasurePair {
    pub fn p(&self) -> &ProcessSpec {
        &self.p
    }

    pub fn q(&self) -> &ProcessSpec {
        &self.q
    }

    /// The pair with the roles of `P` and `Q` exchanged.
    pub fn swapped(&self) -> MeasurePair {
        MeasurePair { p: self.q, q: self.p }
    }

    pub fn horizon_t(&self) -> f64 {
        self.p.horizon_t
    }

    pub fn kind(&self) -> ModelKind {
        self.p.kind()
    }
}

/// Builds `(P = base, Q)` where `Q` has the new decay rates and the
/// location fixed by the drift relation.
pub fn make_equivalent(base: &ProcessSpec, new_lambda_plus: f64, new_lambda_minus: f64) -> Result<MeasurePair> {
    check_positive("new lambda_plus", new_lambda_plus)?;
    check_positive("new lambda_minus", new_lambda_minus)?;
    let m_tilde = equivalent_location(base, new_lambda_plus, new_lambda_minus)?;
    let q = base.with_decays(new_lambda_plus, new_lambda_minus, m_tilde)?;
    Ok(MeasurePair { p: *base, q })
}

fn not_equivalent(msg: String) -> Error {
    Error::NotEquivalent(msg)
}

/// Verifies the equivalence conditions and returns the pair.
pub fn check_equivalent(p: &ProcessSpec, q: &ProcessSpec) -> Result<MeasurePair> {
    if p.kind() != q.kind() {
        return Err(not_equivalent(format!("kinds differ: {} vs {}", p.kind().as_str(), q.kind().as_str())));
    }
    if p.horizon_t != q.horizon_t {
        return Err(not_equivalent(format!("horizons differ: {} vs {}", p.horizon_t, q.horizon_t)));
    }
    let shared: Vec<(&str, f64, f64)> = match (p.params, q.params) {
        (ModelParams::Cts(x), ModelParams::Cts(y)) => vec![("c", x.c, y.c), ("a", x.a, y.a)],
        _ => {
            let ((xu, xd), (yu, yd)) = (p.tails(), q.tails());
            vec![
                ("c_plus", xu.c, yu.c),
                ("c_minus", xd.c, yd.c),
                ("a_plus", xu.a, yu.a),
                ("a_minus", xd.a, yd.a),
            ]
        }
    };
    for (name, x, y) in shared {
        if x != y {
            return Err(not_equivalent(format!("{name} differs: {x} vs {y}")));
        }
    }
    let (lp, lm) = q.lambdas();
    let expected = equivalent_location(p, lp, lm)?;
    let gap = (q.m() - expected).abs();
    if !(gap <= DRIFT_TOL) {
        return Err(not_equivalent(format!(
            "drift relation violated: m̃ = {} but the equivalent location is {expected} (gap {gap:e})",
            q.m()
        )));
    }
    Ok(MeasurePair { p: *p, q: *q })
}

/// Outcome of the finiteness check for an α-divergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Finiteness {
    /// Whether the closed form is well defined.
    pub finite: bool,
    /// At `α = -1`, the Kim–Lee flags `λ₊ < 2λ̃₊` and `λ₋ < 2λ̃₋`.
    pub kim_lee: Option<[bool; 2]>,
}

/// Mixture weights `((1-α)/2, (1+α)/2)` attached to `P` and `Q`.
pub fn mixture_weights(alpha: f64) -> (f64, f64) {
    ((1.0 - alpha) / 2.0, (1.0 + alpha) / 2.0)
}

/// Whether the α-divergence of the pair is finite.
///
/// Within `[-1, 1]` the mixed decay `w₁λ + w₂λ̃` is a convex combination
/// of positive numbers. Outside that range both mixed decays must be
/// strictly positive.
pub fn kl_finiteness_domain(pair: &MeasurePair, alpha: f64) -> Finiteness {
    let (lp, lm) = pair.p.lambdas();
    let (qp, qm) = pair.q.lambdas();
    let finite = if !alpha.is_finite() {
        false
    } else if (-1.0..=1.0).contains(&alpha) {
        true
    } else {
        let (w1, w2) = mixture_weights(alpha);
        w1 * lp + w2 * qp > 0.0 && w1 * lm + w2 * qm > 0.0
    };
    let kim_lee = (alpha == -1.0).then_some([lp < 2.0 * qp, lm < 2.0 * qm]);
    Finiteness { finite, kim_lee }
}
