//! The point commands: flag resolution into a canonical input object, and
//! evaluation of that object.

use std::fmt;

use anyhow::{anyhow, Context};
use serde_json::{json, Map, Value};

use splitgap::ed::{splitting_ed, EigensolverConfig, Method};
use splitgap::instanton::{analytic_action, hessian_vd_check, minimize_reduced_action, predict_log_delta_chain};
use splitgap::numerics::QuadConfig;
use splitgap::rotor::{appendix_d_verify, log_delta_rotor, RotorParams};
use splitgap::toy::{
    asymptotic_log_delta_toy, dense_oracle_toy, solve_splitting_secular, time_domain_delta, MixedNorm, OperatorChoice,
    COMBINATORIAL_LIMIT, ORACLE_LIMIT,
};
use splitgap::{Beta, CouplingKind, ModelParams};

use crate::args::PointArgs;
use crate::cache::{Cache, Lookup};
use crate::record::{num, object, RunRecord};

pub const POINT_COMMANDS: [&str; 5] = ["ed", "toy", "rotor", "instanton", "hessian"];

/// Bad flags or flag combinations; maps to exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

/// A fully resolved point: command plus canonical inputs, every default
/// spelled out so the hash covers the solver configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSpec {
    pub command: String,
    pub inputs: Value,
    pub warnings: Vec<String>,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> anyhow::Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| usage(format!("cannot parse {key} = {value:?}")))
}

/// Sets one named field from text, as used by config files and sweep axes.
pub fn set_field(args: &mut PointArgs, key: &str, value: &str) -> anyhow::Result<()> {
    let v = value.trim().to_string();
    match key {
        "L" | "l" => args.l = Some(parse(key, &v)?),
        "lambda" => args.lambda = Some(parse(key, &v)?),
        "alpha" => args.alpha = Some(parse(key, &v)?),
        "coupling" => args.coupling = Some(v),
        "beta" => args.beta = Some(v),
        "g" => args.g = Some(parse(key, &v)?),
        "choice" => args.choice = Some(v),
        "gamma" => args.gamma = Some(v),
        "norm" => args.norm = Some(v),
        "route" => args.route = Some(v),
        "method" => args.method = Some(v),
        "tol" => args.tol = Some(parse(key, &v)?),
        "grid" => args.grid = Some(parse(key, &v)?),
        "nmax" => args.nmax = Some(parse(key, &v)?),
        "seed" => args.seed = Some(parse(key, &v)?),
        _ => return Err(usage(format!("unknown parameter {key:?}"))),
    }
    Ok(())
}

/// Fields set in `top` win over those in `base`.
fn overlay(base: PointArgs, top: &PointArgs) -> PointArgs {
    macro_rules! pick {
        ($($f:ident),*) => {
            PointArgs {
                $($f: top.$f.clone().or(base.$f),)*
                config: None,
            }
        };
    }
    pick!(l, lambda, alpha, coupling, beta, g, choice, gamma, norm, route, method, tol, grid, nmax, seed)
}

/// Applies `--config` underneath the explicit flags.
pub fn resolve_config(args: &PointArgs) -> anyhow::Result<PointArgs> {
    let Some(path) = &args.config else {
        return Ok(args.clone());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let (params, extras) = ModelParams::from_kv_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let mut base = PointArgs {
        l: Some(params.l),
        lambda: Some(params.lambda),
        alpha: Some(params.alpha),
        coupling: Some(params.coupling.to_string()),
        ..PointArgs::default()
    };
    if text.lines().any(|l| l.split('#').next().unwrap_or("").trim_start().starts_with("beta")) {
        base.beta = Some(params.beta.to_string());
    }
    for (k, v) in extras {
        set_field(&mut base, &k, &v)?;
    }
    Ok(overlay(base, args))
}

fn model_params(args: &PointArgs, default_coupling: &str) -> anyhow::Result<ModelParams> {
    let l = args.l.ok_or_else(|| usage("--L is required"))?;
    let lambda = args.lambda.ok_or_else(|| usage("--lambda is required"))?;
    let alpha = args.alpha.unwrap_or(0.5);
    let coupling: CouplingKind = args
        .coupling
        .as_deref()
        .unwrap_or(default_coupling)
        .parse()
        .map_err(|e| usage(format!("{e}")))?;
    ModelParams::new(l, lambda, alpha, coupling).map_err(|e| usage(e.to_string()))
}

fn finite_beta(args: &PointArgs, default: f64) -> anyhow::Result<f64> {
    match args.beta.as_deref() {
        None => Ok(default),
        Some(s) => match s.parse::<Beta>().map_err(|e| usage(e.to_string()))? {
            Beta::Finite(b) => Ok(b),
            Beta::Infinite => Err(usage("this command needs a finite --beta")),
        },
    }
}

fn toy_choice(args: &PointArgs) -> anyhow::Result<OperatorChoice> {
    let norm = match args.norm.as_deref() {
        None | Some("paper") => MixedNorm::Paper,
        Some("unit") | Some("unit-norm") => MixedNorm::UnitNorm,
        Some(other) => return Err(usage(format!("unknown --norm {other:?} (paper or unit)"))),
    };
    let text = match (&args.gamma, args.choice.as_deref()) {
        (Some(g), None | Some("mixed")) => format!("mixed:{g}"),
        (Some(_), Some(c)) => return Err(usage(format!("--gamma applies to the mixed operator, not {c}"))),
        (None, Some(c)) => c.to_string(),
        (None, None) => "sigma-x".to_string(),
    };
    let choice: OperatorChoice = text.parse().map_err(|e| usage(format!("{e}")))?;
    Ok(match choice {
        OperatorChoice::Mixed { p, q, norm: MixedNorm::Paper } if args.norm.is_some() => OperatorChoice::Mixed { p, q, norm },
        other => other,
    })
}

/// Resolves flags (and config) into the canonical inputs of `command`.
pub fn build_point(command: &str, args: &PointArgs) -> anyhow::Result<PointSpec> {
    let args = resolve_config(args)?;
    let mut warnings = Vec::new();
    let inputs = match command {
        "ed" => {
            let p = model_params(&args, "all-to-all")?;
            if p.l % 2 != 0 {
                return Err(usage(format!("ed needs even L, got {}", p.l)));
            }
            let method = args.method.clone().unwrap_or_else(|| "lanczos".into());
            if method != "lanczos" && method != "dense" {
                return Err(usage(format!("unknown --method {method:?} (lanczos or dense)")));
            }
            if p.coupling == CouplingKind::AllToAll && p.l % 4 != 0 {
                warnings.push(format!(
                    "L = {} is not a multiple of 4: the all-to-all splitting alternates in sign with L/2",
                    p.l
                ));
            }
            let d = EigensolverConfig::default();
            json!({
                "L": p.l,
                "lambda": p.lambda,
                "alpha": p.alpha,
                "coupling": p.coupling.to_string(),
                "method": method,
                "tol": args.tol.unwrap_or(d.tol),
                "seed": args.seed.unwrap_or(d.seed),
                "max_iterations": d.max_iterations,
            })
        }
        "toy" => {
            let p = model_params(&args, "all-to-all")?;
            let choice = toy_choice(&args)?;
            let route = args.route.clone().unwrap_or_else(|| "secular".into());
            if !["secular", "time-domain", "dense", "all"].contains(&route.as_str()) {
                return Err(usage(format!("unknown --route {route:?} (secular, time-domain, dense or all)")));
            }
            if route == "secular" && p.l > COMBINATORIAL_LIMIT {
                return Err(usage(format!(
                    "the secular route is limited to L <= {COMBINATORIAL_LIMIT}; use --route time-domain"
                )));
            }
            if route == "dense" && p.l > ORACLE_LIMIT {
                return Err(usage(format!("the dense route is limited to L <= {ORACLE_LIMIT}")));
            }
            json!({
                "L": p.l,
                "lambda": p.lambda,
                "alpha": p.alpha,
                "choice": choice.name(),
                "route": route,
                "tol": args.tol.unwrap_or(1e-12),
            })
        }
        "rotor" => {
            let p = model_params(&args, "power-law")?;
            let g = args.g.unwrap_or(0.05);
            if !(g > 0.0 && g.is_finite()) {
                return Err(usage(format!("--g must be positive, got {g}")));
            }
            if p.coupling == CouplingKind::AllToAll {
                return Err(usage("the rotor chain takes a power-law or custom coupling"));
            }
            let mut m = Map::new();
            m.insert("L".into(), json!(p.l));
            m.insert("lambda".into(), json!(p.lambda));
            m.insert("alpha".into(), json!(p.alpha));
            m.insert("coupling".into(), json!(p.coupling.to_string()));
            m.insert("g".into(), json!(g));
            if args.beta.is_some() {
                m.insert("beta".into(), json!(finite_beta(&args, 50.0)?));
                m.insert("nmax".into(), json!(args.nmax.unwrap_or(10_000)));
            }
            Value::Object(m)
        }
        "instanton" => {
            let p = model_params(&args, "all-to-all")?;
            if !(p.lambda > 0.0) {
                return Err(usage("the instanton needs lambda > 0"));
            }
            json!({
                "L": p.l,
                "lambda": p.lambda,
                "alpha": p.alpha,
                "coupling": p.coupling.to_string(),
                "beta": finite_beta(&args, 10.0)?,
                "grid": args.grid.unwrap_or(8192),
            })
        }
        "hessian" => {
            let p = model_params(&args, "all-to-all")?;
            json!({
                "L": p.l,
                "lambda": p.lambda,
                "alpha": p.alpha,
                "beta": finite_beta(&args, 4.0)?,
                "grid": args.grid.unwrap_or(1024),
            })
        }
        other => return Err(usage(format!("{other:?} is not a point command"))),
    };
    Ok(PointSpec {
        command: command.to_string(),
        inputs,
        warnings,
    })
}

fn get_f64(inputs: &Value, key: &str) -> anyhow::Result<f64> {
    inputs
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| anyhow!("input {key} missing or not a number"))
}

fn get_usize(inputs: &Value, key: &str) -> anyhow::Result<usize> {
    inputs
        .get(key)
        .and_then(Value::as_u64)
        .map(|v| v as usize)
        .ok_or_else(|| anyhow!("input {key} missing or not an integer"))
}

fn get_str<'a>(inputs: &'a Value, key: &str) -> anyhow::Result<&'a str> {
    inputs
        .get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| anyhow!("input {key} missing or not a string"))
}

fn params_from(inputs: &Value) -> anyhow::Result<ModelParams> {
    let coupling = match inputs.get("coupling") {
        Some(Value::String(s)) => s.parse()?,
        _ => CouplingKind::AllToAll,
    };
    Ok(ModelParams::new(
        get_usize(inputs, "L")?,
        get_f64(inputs, "lambda")?,
        get_f64(inputs, "alpha")?,
        coupling,
    )?)
}

fn log_abs(x: f64) -> Option<Value> {
    if x != 0.0 {
        num(x.abs().ln())
    } else {
        None
    }
}

/// Evaluates one resolved point.
pub fn compute(command: &str, inputs: &Value) -> anyhow::Result<Value> {
    let params = params_from(inputs)?;
    match command {
        "ed" => {
            let method = match get_str(inputs, "method")? {
                "dense" => Method::Dense,
                _ => Method::Lanczos,
            };
            let cfg = EigensolverConfig {
                method,
                max_iterations: get_usize(inputs, "max_iterations")?,
                tol: get_f64(inputs, "tol")?,
                seed: inputs.get("seed").and_then(Value::as_u64).unwrap_or(0),
            };
            let r = splitting_ed(&params, &cfg)?;
            let predicted = if params.coupling == CouplingKind::AllToAll && params.lambda > 0.0 {
                predict_log_delta_chain(&params).ok()
            } else {
                None
            };
            Ok(object(vec![
                ("E_plus", num(r.e_plus)),
                ("E_minus", num(r.e_minus)),
                ("delta", num(r.delta)),
                ("err_bound", num(r.err_bound)),
                ("residual_norms", Some(json!(r.residual_norms))),
                ("iterations", Some(json!(r.iterations))),
                ("log_delta", log_abs(r.delta)),
                ("log_delta_err", if r.delta != 0.0 { num(r.err_bound / r.delta.abs()) } else { None }),
                ("log_delta_asymptotic", predicted.and_then(num)),
            ]))
        }
        "toy" => {
            let choice: OperatorChoice = get_str(inputs, "choice")?.parse()?;
            let route = get_str(inputs, "route")?;
            let quad = QuadConfig {
                rel_tol: get_f64(inputs, "tol")?,
                ..QuadConfig::default()
            };
            let l = params.l;
            let all = route == "all";
            let secular = if route == "secular" || (all && l <= COMBINATORIAL_LIMIT) {
                Some(solve_splitting_secular(&choice, &params)?)
            } else {
                None
            };
            let timedomain = if route == "time-domain" || all {
                Some(time_domain_delta(&choice, &params, quad)?)
            } else {
                None
            };
            let dense = if route == "dense" || (all && l <= ORACLE_LIMIT) {
                Some(dense_oracle_toy(&choice, &params)?)
            } else {
                None
            };
            let (delta, delta_err) = match (&secular, timedomain, &dense) {
                (Some(s), _, _) => (s.delta, Some(s.delta_err)),
                (None, Some(t), _) => (t, None),
                (None, None, Some(d)) => (d.delta, Some(d.delta_err)),
                _ => unreachable!("route validated"),
            };
            let asymptotic = asymptotic_log_delta_toy(&choice, &params).ok();
            let log_delta = if delta != 0.0 { Some(delta.abs().ln()) } else { None };
            Ok(object(vec![
                ("delta", num(delta)),
                ("delta_err", delta_err.and_then(num)),
                ("delta_secular", secular.as_ref().and_then(|s| num(s.delta))),
                ("delta_linearized", secular.as_ref().and_then(|s| s.delta_linearized).and_then(num)),
                ("delta_timedomain", timedomain.and_then(num)),
                ("delta_dense", dense.as_ref().and_then(|d| num(d.delta))),
                ("eta_plus", secular.as_ref().or(dense.as_ref()).and_then(|s| num(s.eta_plus))),
                ("eta_minus", secular.as_ref().or(dense.as_ref()).and_then(|s| num(s.eta_minus))),
                ("kramers", Some(json!(choice.kramers_degenerate(l)))),
                ("log_delta", log_delta.and_then(num)),
                (
                    "log_delta_err",
                    match (delta_err, delta) {
                        (Some(e), d) if d != 0.0 => num(e / d.abs()),
                        _ => None,
                    },
                ),
                ("log_delta_asymptotic", asymptotic.and_then(num)),
                (
                    "asymptotic_ratio",
                    match (log_delta, asymptotic) {
                        (Some(a), Some(b)) => num(a / b),
                        _ => None,
                    },
                ),
            ]))
        }
        "rotor" => {
            let rp = RotorParams::new(params, get_f64(inputs, "g")?)?;
            let s = log_delta_rotor(&rp)?;
            let rel_diff = s
                .log_delta_asymptotic
                .map(|a| ((s.log_delta - a) / s.log_delta).abs());
            let appendix_d = match inputs.get("beta") {
                Some(b) => {
                    let beta = b.as_f64().ok_or_else(|| anyhow!("beta is not a number"))?;
                    let r = appendix_d_verify(&rp, beta, get_usize(inputs, "nmax")?)?;
                    Some(object(vec![
                        ("delta_numeric", num(r.delta_numeric)),
                        ("delta_closed", num(r.delta_closed)),
                        ("rel_error", num(r.rel_error)),
                        ("log_tail", num(r.log_tail)),
                    ]))
                }
                None => None,
            };
            Ok(object(vec![
                ("m0", num(s.m0)),
                ("action", num(s.action)),
                ("det_ratio", num(s.det_ratio)),
                ("log_delta", num(s.log_delta)),
                ("log_delta_asymptotic", s.log_delta_asymptotic.and_then(num)),
                ("asymptotic_rel_diff", rel_diff.and_then(num)),
                ("appendix_d", appendix_d),
            ]))
        }
        "instanton" => {
            let beta = get_f64(inputs, "beta")?;
            let m = minimize_reduced_action(&params, beta, get_usize(inputs, "grid")?)?;
            let exact = analytic_action(&params, beta);
            Ok(object(vec![
                ("action", num(m.action.total)),
                ("potential_term", num(m.action.potential_term)),
                ("kinetic_term", num(m.action.kinetic_term)),
                ("discretization_error", num(m.action.error_estimate)),
                ("action_analytic", num(exact)),
                ("rel_diff", num(((m.action.total - exact) / exact).abs())),
                ("iterations", Some(json!(m.iterations))),
                ("gradient_norm", num(m.gradient_norm)),
                ("log_sbeta", num(-m.action.total)),
                ("log_delta_asymptotic", predict_log_delta_chain(&params).ok().and_then(num)),
            ]))
        }
        "hessian" => {
            let t = hessian_vd_check(&params, get_f64(inputs, "beta")?, get_usize(inputs, "grid")?)?;
            Ok(serde_json::to_value(t)?)
        }
        other => Err(anyhow!("{other:?} is not a point command")),
    }
}

/// A record together with messages for stderr.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub record: RunRecord,
    pub notes: Vec<String>,
}

/// Looks the point up in the cache, computing and storing it on a miss.
pub fn execute(spec: &PointSpec, cache: Option<&Cache>) -> anyhow::Result<Outcome> {
    let mut notes: Vec<String> = spec.warnings.iter().map(|w| format!("warning: {w}")).collect();
    let probe = RunRecord::new(&spec.command, spec.inputs.clone(), Value::Null);
    if let Some(cache) = cache {
        match cache.lookup(&probe.hash) {
            Lookup::Hit(mut record) => {
                record.cached = true;
                return Ok(Outcome { record, notes });
            }
            Lookup::Corrupt(why) => notes.push(format!("warning: ignoring corrupt cache entry {}: {why}", probe.hash)),
            Lookup::Miss => {}
        }
    }
    let outputs = compute(&spec.command, &spec.inputs)?;
    let record = RunRecord { outputs, ..probe };
    if let Some(cache) = cache {
        if let Err(e) = cache.store(&record) {
            notes.push(format!("warning: could not write cache entry {}: {e}", record.hash));
        }
    }
    Ok(Outcome { record, notes })
}
