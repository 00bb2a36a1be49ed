//! The `tsgeo` command-line front end.
//!
//! Every subcommand prints one JSON document `{"manifest": ..., "result": ...}`
//! on stdout, or a flat `key  value` table with `--pretty`. Grids go to CSV
//! sidecars. Failures print to stderr and exit with 2 (domain), 3
//! (convergence) or 4 (I/O).
//!
//! `TSGEO_QUAD_TOL` overrides the relative tolerance of every quadrature.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::charfn::{density_grid, sample, DEFAULT_GRID_SIZE};
use crate::divergence::{alpha_divergence, alpha_divergence_psi_form, alpha_divergence_quadrature, divergence_by_tail, Alpha};
use crate::error::{Error, Result};
use crate::geometry::{alpha_connection, fisher_metric, geometry_quadrature, levi_civita, metric_from_divergence, Connection2, Metric2};
use crate::inference::{
    bias_study, evaluate_ansatz, fit_mle, jeffreys_prior, laplace_beltrami, laplace_beltrami_fn, penalized_loglik, AnsatzKind,
    AnsatzSpec, DEFAULT_LB_STEP,
};
use crate::params::{make_equivalent, validate, ModelKind, ProcessSpec, RawParams};
use crate::quad::QuadratureConfig;

/// Environment variable overriding the quadrature relative tolerance.
pub const QUAD_TOL_ENV: &str = "TSGEO_QUAD_TOL";

#[derive(Debug, Parser)]
#[command(name = "tsgeo", version, about = "Information geometry of tempered stable processes")]
pub struct Cli {
    /// Print a flat key/value table instead of JSON.
    #[arg(long, global = true)]
    pub pretty: bool,
    /// Record wall time in the manifest (makes output run-dependent).
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// α-divergence between a process and its decay-shifted equivalent.
    Divergence(DivergenceArgs),
    /// Fisher metric, Levi-Civita and α-connection coefficients.
    Geometry(GeometryArgs),
    /// Jeffreys prior and optional penalized log-likelihood.
    Prior(PriorArgs),
    /// Laplace–Beltrami operator of a shrinkage ansatz over a λ-grid.
    AnsatzCheck(AnsatzArgs),
    /// Fit (λ₊, λ₋) by (penalized) maximum likelihood.
    Fit(FitArgs),
    /// Monte Carlo bias of plain and penalized estimators.
    BiasStudy(BiasArgs),
    /// FFT density of X_T.
    Density(DensityArgs),
}

/// Model parameters. `--a`/`--c` set both tails unless `--ap`/`--am`/`--cp`/`--cm` override.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Model family: gts, cts or rdts.
    #[arg(long)]
    pub model: ModelKind,
    /// Stability index of both tails.
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    /// Scale of both tails.
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
    /// Stability index of the upper tail.
    #[arg(long, allow_negative_numbers = true)]
    pub ap: Option<f64>,
    /// Stability index of the lower tail.
    #[arg(long, allow_negative_numbers = true)]
    pub am: Option<f64>,
    /// Scale of the upper tail.
    #[arg(long, allow_negative_numbers = true)]
    pub cp: Option<f64>,
    /// Scale of the lower tail.
    #[arg(long, allow_negative_numbers = true)]
    pub cm: Option<f64>,
    /// Decay λ₊ of the upper tail.
    #[arg(long, allow_negative_numbers = true)]
    pub lp: Option<f64>,
    /// Decay λ₋ of the lower tail.
    #[arg(long, allow_negative_numbers = true)]
    pub lm: Option<f64>,
    /// Location parameter.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub m: f64,
    /// Horizon T.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub t: f64,
}

impl ModelArgs {
    fn raw(&self) -> RawParams {
        RawParams {
            a: self.a,
            c: self.c,
            a_plus: self.ap.or(self.a),
            a_minus: self.am.or(self.a),
            c_plus: self.cp.or(self.c),
            c_minus: self.cm.or(self.c),
            lambda_plus: self.lp,
            lambda_minus: self.lm,
            m: Some(self.m),
            horizon_t: Some(self.t),
        }
    }

    fn spec(&self) -> Result<ProcessSpec> {
        if self.model == ModelKind::Cts && [self.ap, self.am, self.cp, self.cm].iter().any(Option::is_some) {
            return Err(Error::domain("cts takes --a and --c; per-tail flags belong to gts and rdts"));
        }
        validate(self.model, &self.raw())
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DivergenceArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Decay λ₊ of the second measure.
    #[arg(long, allow_negative_numbers = true)]
    pub new_lp: f64,
    /// Decay λ₋ of the second measure.
    #[arg(long, allow_negative_numbers = true)]
    pub new_lm: f64,
    /// α of the divergence.
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Also run the two quadrature oracles.
    #[arg(long)]
    pub oracle: bool,
    /// Relative tolerance of the oracle comparison.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GeometryArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// α of the connection and the divergence oracle.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Also run the finite-difference and quadrature oracles.
    #[arg(long)]
    pub oracle: bool,
    /// Relative tolerance of the oracle comparison.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    /// Relative step of the divergence finite differences.
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PriorArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Log-likelihood to penalize.
    #[arg(long, allow_negative_numbers = true)]
    pub loglik: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnsatzArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// phi1, phi2, phi3 or phi4.
    #[arg(long)]
    pub kind: AnsatzKind,
    /// Exponent of the upper-tail decay.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub k: f64,
    /// Exponent of the lower-tail decay.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub l: f64,
    /// Weight of the first term (phi3, phi4).
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub c1: f64,
    /// Weight of the second term (phi3, phi4).
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub c2: f64,
    /// Smallest decay on each grid axis.
    #[arg(long, default_value_t = 0.5)]
    pub grid_min: f64,
    /// Largest decay on each grid axis.
    #[arg(long, default_value_t = 4.0)]
    pub grid_max: f64,
    /// Points per axis.
    #[arg(long, default_value_t = 9)]
    pub grid_n: usize,
    /// Relative finite-difference step of the Laplace–Beltrami operator.
    #[arg(long, default_value_t = DEFAULT_LB_STEP)]
    pub step: f64,
    /// Pass threshold for the maximum of Δφ.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Evaluate exponents outside the admissible interval instead of rejecting them.
    #[arg(long)]
    pub allow_inadmissible: bool,
    /// CSV sidecar with `lambda_plus,lambda_minus,delta_phi` rows.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// Template fixing every parameter except the decays (which start the search).
    #[command(flatten)]
    pub model: ModelArgs,
    /// File with one sample per line; without it samples are drawn from the template.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Number of samples to draw when no input is given.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Seed of the sample generator.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Add the log Jeffreys prior to the objective.
    #[arg(long)]
    pub penalized: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BiasArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Sample size per replication.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Number of replications.
    #[arg(long, default_value_t = 200)]
    pub seeds: usize,
    /// Seed of the first replication; replication i uses seed0 + i.
    #[arg(long, default_value_t = 42)]
    pub seed0: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DensityArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Grid size, a power of two ≥ 256.
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    pub n: usize,
    /// Frequency cutoff; found adaptively when absent.
    #[arg(long)]
    pub u_max: Option<f64>,
    /// CSV sidecar with `x,value` rows.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Provenance block embedded in every output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub parameters: Value,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub wall_time_s: Option<f64>,
}

fn quadrature_config() -> Result<QuadratureConfig> {
    match std::env::var(QUAD_TOL_ENV) {
        Ok(text) => {
            let tol: f64 = text
                .trim()
                .parse()
                .map_err(|_| Error::domain(format!("{QUAD_TOL_ENV} must be a number, got {text:?}")))?;
            QuadratureConfig::with_rel_tol(tol)
        }
        Err(_) => Ok(QuadratureConfig::default()),
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn metric_json(g: &Metric2) -> Value {
    json!(g.g)
}

fn connection_json(c: &Connection2) -> Value {
    json!(c.coeffs)
}

fn max_metric_gap(a: &Metric2, b: &Metric2) -> f64 {
    [a.g[0][0], a.g[1][1]].iter().zip([b.g[0][0], b.g[1][1]]).map(|(x, y)| relative_gap(*x, y)).fold(0.0, f64::max)
}

fn divergence(args: &DivergenceArgs) -> Result<Value> {
    let base = args.model.spec()?;
    let pair = make_equivalent(&base, args.new_lp, args.new_lm)?;
    let alpha = Alpha::new(args.alpha)?;
    let value = alpha_divergence(&pair, alpha)?;
    let [upper, lower] = divergence_by_tail(&pair, alpha)?;
    let mut result = json!({
        "kind": pair.kind().as_str(),
        "alpha": args.alpha,
        "m_new": pair.q().m(),
        "value": value,
        "bracket_upper": upper,
        "bracket_lower": lower,
    });
    if args.oracle {
        let cfg = quadrature_config()?;
        let lambda_form = alpha_divergence_quadrature(&pair, alpha, &cfg)?;
        let psi_form = alpha_divergence_psi_form(&pair, alpha, &cfg)?;
        let gap = (value - lambda_form.value).abs();
        let rel = relative_gap(value, lambda_form.value);
        let psi_rel = relative_gap(lambda_form.value, psi_form.value);
        let pass = rel <= args.tol || gap <= cfg.abs_tol;
        result["oracle"] = json!({
            "lambda_form": lambda_form.value,
            "lambda_form_error": lambda_form.error,
            "psi_form": psi_form.value,
            "psi_form_error": psi_form.error,
            "abs_gap": gap,
            "rel_gap": rel,
            "psi_lambda_rel_gap": psi_rel,
            "tol": args.tol,
            "pass": pass,
        });
    }
    Ok(result)
}

fn geometry(args: &GeometryArgs) -> Result<Value> {
    let spec = args.model.spec()?;
    let alpha = Alpha::new(args.alpha)?;
    let metric = fisher_metric(&spec)?;
    let lc = levi_civita(&spec)?;
    let conn = alpha_connection(&spec, alpha)?;
    let mut result = json!({
        "kind": spec.kind().as_str(),
        "alpha": args.alpha,
        "metric": metric_json(&metric),
        "levi_civita": connection_json(&lc),
        "alpha_connection": connection_json(&conn),
    });
    if args.oracle {
        let cfg = quadrature_config()?;
        let fd = metric_from_divergence(&spec, alpha, args.step)?;
        let (qg, qc) = geometry_quadrature(&spec, alpha, &cfg)?;
        let fd_gap = max_metric_gap(&metric, &fd);
        let quad_gap = max_metric_gap(&metric, &qg);
        let mut conn_gap: f64 = 0.0;
        for i in 0..2 {
            let (a, b) = (conn.coeffs[i][i][i], qc.coeffs[i][i][i]);
            conn_gap = conn_gap.max(if a == 0.0 && b.abs() <= cfg.abs_tol { 0.0 } else { relative_gap(a, b) });
        }
        result["oracle"] = json!({
            "metric_from_divergence": metric_json(&fd),
            "metric_quadrature": metric_json(&qg),
            "connection_quadrature": connection_json(&qc),
            "metric_fd_rel_gap": fd_gap,
            "metric_quadrature_rel_gap": quad_gap,
            "connection_quadrature_rel_gap": conn_gap,
            "tol": args.tol,
            "pass": fd_gap <= args.tol && quad_gap <= args.tol && conn_gap <= args.tol,
        });
    }
    Ok(result)
}

fn prior(args: &PriorArgs) -> Result<Value> {
    let spec = args.model.spec()?;
    let j = jeffreys_prior(&spec)?;
    let penalized = args.loglik.map(|ll| penalized_loglik(ll, &spec)).transpose()?;
    Ok(json!({
        "kind": spec.kind().as_str(),
        "jeffreys": j,
        "log_jeffreys": j.ln(),
        "penalized_loglik": penalized,
    }))
}

fn ansatz_check(args: &AnsatzArgs) -> Result<Value> {
    if args.grid_n < 2 || !(args.grid_min > 0.0 && args.grid_max > args.grid_min) {
        return Err(Error::domain("ansatz grid needs grid_n ≥ 2 and 0 < grid_min < grid_max"));
    }
    let mut model = args.model.clone();
    model.lp = model.lp.or(Some(args.grid_min));
    model.lm = model.lm.or(Some(args.grid_min));
    let base = model.spec()?;
    let ansatz = AnsatzSpec { kind: args.kind, k: args.k, l: args.l, c1: args.c1, c2: args.c2 };
    let admissible = ansatz.validate(&base).is_ok();
    if !admissible && !args.allow_inadmissible {
        ansatz.validate(&base)?;
    }
    let spacing = (args.grid_max - args.grid_min) / (args.grid_n - 1) as f64;
    let axis: Vec<f64> = (0..args.grid_n).map(|i| args.grid_min + i as f64 * spacing).collect();
    let mut rows = Vec::with_capacity(args.grid_n * args.grid_n);
    for &lp in &axis {
        for &lm in &axis {
            let spec = base.with_decays(lp, lm, base.m())?;
            let delta = if admissible {
                laplace_beltrami(&spec, &ansatz, args.step)?
            } else {
                laplace_beltrami_fn(&spec, |p, m| ansatz.value_at(p, m), args.step)?
            };
            rows.push((lp, lm, delta));
        }
    }
    if let Some(path) = &args.csv {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "lambda_plus,lambda_minus,delta_phi")?;
        for (lp, lm, d) in &rows {
            writeln!(w, "{lp},{lm},{d}")?;
        }
        w.flush()?;
    }
    let (arg_lp, arg_lm, max) = rows.iter().copied().fold((f64::NAN, f64::NAN, f64::NEG_INFINITY), |best, r| if r.2 > best.2 { r } else { best });
    let value_at_base = if admissible { Some(evaluate_ansatz(&base, &ansatz)?) } else { None };
    Ok(json!({
        "kind": base.kind().as_str(),
        "ansatz": ansatz,
        "admissible": admissible,
        "grid_points": rows.len(),
        "max_delta_phi": max,
        "argmax_lambda_plus": arg_lp,
        "argmax_lambda_minus": arg_lm,
        "value_at_grid_min": value_at_base,
        "tol": args.tol,
        "pass": max <= args.tol,
        "csv": args.csv,
    }))
}

fn read_samples(path: &PathBuf) -> Result<Vec<f64>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        out.push(text.parse().map_err(|_| Error::domain(format!("line {}: not a number: {text:?}", i + 1)))?);
    }
    Ok(out)
}

fn fit(args: &FitArgs) -> Result<(Value, Option<u64>)> {
    let template = args.model.spec()?;
    let (samples, seed) = match &args.input {
        Some(path) => (read_samples(path)?, None),
        None => (sample(&template, args.n, args.seed)?, Some(args.seed)),
    };
    let result = fit_mle(&samples, &template, args.penalized)?;
    let mut value = serde_json::to_value(result).expect("fit result serializes");
    value["n_samples"] = json!(samples.len());
    Ok((value, seed))
}

fn bias(args: &BiasArgs) -> Result<Value> {
    let spec = args.model.spec()?;
    let study = bias_study(&spec, args.n, args.seeds, args.seed0)?;
    let mut value = serde_json::to_value(&study).expect("bias study serializes");
    value["penalized_not_worse"] = json!(study.penalized.bias_lambda_plus.abs() <= study.plain.bias_lambda_plus.abs());
    Ok(value)
}

fn density(args: &DensityArgs) -> Result<Value> {
    let spec = args.model.spec()?;
    let grid = density_grid(&spec, args.n, args.u_max)?;
    if let Some(path) = &args.csv {
        let mut w = BufWriter::new(File::create(path)?);
        grid.write_csv(&mut w)?;
        w.flush()?;
    }
    Ok(json!({
        "kind": spec.kind().as_str(),
        "n": grid.n,
        "x_min": grid.x_min,
        "x_max": grid.x_max,
        "dx": grid.dx(),
        "u_max": std::f64::consts::PI / grid.dx(),
        "mass": grid.mass(),
        "mean": grid.mean(),
        "csv": args.csv,
    }))
}

fn echo<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).expect("arguments serialize")
}

/// Runs a parsed command and returns the output document.
pub fn execute(cli: &Cli) -> Result<Value> {
    let start = Instant::now();
    let (command, parameters, seed, result) = match &cli.command {
        Command::Divergence(a) => ("divergence", echo(a), None, divergence(a)?),
        Command::Geometry(a) => ("geometry", echo(a), None, geometry(a)?),
        Command::Prior(a) => ("prior", echo(a), None, prior(a)?),
        Command::AnsatzCheck(a) => ("ansatz-check", echo(a), None, ansatz_check(a)?),
        Command::Fit(a) => {
            let (value, seed) = fit(a)?;
            ("fit", echo(a), seed, value)
        }
        Command::BiasStudy(a) => ("bias-study", echo(a), Some(a.seed0), bias(a)?),
        Command::Density(a) => ("density", echo(a), None, density(a)?),
    };
    let manifest = RunManifest {
        command,
        parameters,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        wall_time_s: cli.timing.then(|| start.elapsed().as_secs_f64()),
    };
    Ok(json!({ "manifest": manifest, "result": result }))
}

fn flatten(prefix: &str, value: &Value, rows: &mut Vec<(String, String)>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, rows);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), v, rows);
            }
        }
        other => rows.push((prefix.to_string(), other.to_string())),
    }
}

/// Flat `key  value` table of a JSON document.
pub fn render_table(value: &Value) -> String {
    let mut rows = Vec::new();
    flatten("", value, &mut rows);
    let width = rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    rows.iter().map(|(k, v)| format!("{k:width$}  {v}\n")).collect()
}

/// Parses arguments, runs the command and writes the output. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut impl Write, err: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let written = execute(&cli).map_err(|e| (e.exit_code(), e.to_string())).and_then(|doc| {
        let text = if cli.pretty { render_table(&doc) } else { format!("{doc}\n") };
        out.write_all(text.as_bytes()).map_err(|e| (4, format!("i/o error: {e}")))
    });
    match written {
        Ok(()) => 0,
        Err((code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}
