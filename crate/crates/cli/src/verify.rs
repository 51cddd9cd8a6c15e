//! Invariant and acceptance checks, grouped into suites.

use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use splitgap::ed::{dense_ground, lanczos_ground, splitting_ed, EigensolverConfig, ParitySector, SectorHamiltonian};
use splitgap::instanton::{analytic_action, hessian_vd_check, minimize_reduced_action};
use splitgap::rotor::{appendix_d_verify, log_delta_rotor, RotorParams};
use splitgap::scaling::{fit_stretched, FitModel, ScalingDataset};
use splitgap::toy::{asymptotic_log_delta_toy, dense_oracle_toy, solve_splitting_secular, OperatorChoice};
use splitgap::{CouplingKind, ModelParams};

use crate::cache::Cache;
use crate::fit::fit_records;
use crate::sweep::{preset, run_points};

pub const SUITES: [&str; 9] = [
    "ed",
    "chain-trend",
    "instanton",
    "appendix-d",
    "rotor",
    "toy",
    "kernel",
    "table",
    "all",
];

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub criterion: u8,
    pub name: &'static str,
    pub pass: bool,
    pub elapsed_s: f64,
    pub time_limit_s: f64,
    pub detail: Value,
}

/// Options for the checks that take parameters or do heavy work.
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub beta: f64,
    pub nmax: usize,
    pub cache: Option<Cache>,
    pub jobs: Option<usize>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            beta: 50.0,
            nmax: 10_000,
            cache: None,
            jobs: None,
        }
    }
}

pub fn suite_criteria(suite: &str) -> Option<Vec<u8>> {
    Some(match suite {
        "ed" => vec![1, 2],
        "chain-trend" => vec![3],
        "instanton" => vec![4],
        "appendix-d" => vec![5],
        "rotor" => vec![6],
        "toy" => vec![7, 8],
        "kernel" => vec![9],
        "table" => vec![10],
        "all" => (1..=10).collect(),
        _ => return None,
    })
}

type Check = anyhow::Result<(bool, Value)>;

/// Runs one numbered criterion. Computation errors count as failures.
pub fn criterion(n: u8, opts: &VerifyOptions) -> CheckOutcome {
    let (name, limit): (&'static str, f64) = match n {
        1 => ("unperturbed degeneracy", 1.0),
        2 => ("Lanczos matches dense diagonalization", 30.0),
        3 => ("stretched-exponential trend of the spin chain", 600.0),
        4 => ("instanton action minimization", 10.0),
        5 => ("finite-beta determinant assembly", 60.0),
        6 => ("rotor large-L asymptotics", 10.0),
        7 => ("toy-model route agreement", 30.0),
        8 => ("toy-model asymptotics", 60.0),
        9 => ("kernel spectrum convergence", 10.0),
        10 => ("scaling-class table", 900.0),
        _ => ("unknown criterion", 0.0),
    };
    let start = Instant::now();
    let result: Check = match n {
        1 => unperturbed_degeneracy(),
        2 => lanczos_vs_dense(),
        3 => chain_trend(),
        4 => instanton_action(),
        5 => determinant_assembly(opts.beta, opts.nmax),
        6 => rotor_asymptotics(),
        7 => toy_routes(),
        8 => toy_asymptotics(),
        9 => kernel_convergence(),
        10 => scaling_table(opts),
        _ => Err(anyhow::anyhow!("no criterion {n}")),
    };
    let elapsed_s = start.elapsed().as_secs_f64();
    let (ok, detail) = match result {
        Ok(r) => r,
        Err(e) => (false, json!({"error": format!("{e:#}")})),
    };
    CheckOutcome {
        criterion: n,
        name,
        pass: ok && elapsed_s < limit,
        elapsed_s,
        time_limit_s: limit,
        detail,
    }
}

fn chain(l: usize, lambda: f64, alpha: f64, coupling: CouplingKind) -> anyhow::Result<ModelParams> {
    Ok(ModelParams::new(l, lambda, alpha, coupling)?)
}

fn unperturbed_degeneracy() -> Check {
    let mut worst = 0.0f64;
    for coupling in [CouplingKind::AllToAll, CouplingKind::PeriodicPowerLaw] {
        for l in [4, 8, 12] {
            let r = splitting_ed(&chain(l, 0.0, 0.5, coupling.clone())?, &EigensolverConfig::default())?;
            worst = worst.max(r.delta.abs());
        }
    }
    Ok((worst < 1e-12, json!({"max_abs_delta": worst})))
}

fn lanczos_vs_dense() -> Check {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for coupling in [CouplingKind::AllToAll, CouplingKind::PeriodicPowerLaw] {
        for l in 2..=10 {
            for lambda in [0.0, 0.3, 1.0] {
                for alpha in [0.3, 0.7] {
                    let p = chain(l, lambda, alpha, coupling.clone())?;
                    for sector in ParitySector::BOTH {
                        let h = SectorHamiltonian::new(&p, sector)?;
                        let a = lanczos_ground(&h, &EigensolverConfig::default())?.energy;
                        let b = dense_ground(&h)?.energy;
                        worst = worst.max((a - b).abs());
                        cases += 1;
                    }
                }
            }
        }
    }
    Ok((worst <= 1e-10, json!({"max_abs_difference": worst, "sector_cases": cases})))
}

fn chain_trend() -> Check {
    let sizes = [8usize, 12, 16];
    let mut pairs = Vec::new();
    for &l in &sizes {
        let r = splitting_ed(&chain(l, 1.0, 0.5, CouplingKind::AllToAll)?, &EigensolverConfig::default())?;
        pairs.push((l, r.delta.abs().ln()));
    }
    let increasing = pairs.windows(2).all(|w| -w[1].1 > -w[0].1);
    let fit = fit_stretched(&ScalingDataset::from_pairs(&pairs, "chain")?, FitModel::Auto)?;
    let p_in_range = (0.6..=0.95).contains(&fit.p);
    let approaching = fit
        .local_slopes
        .windows(2)
        .all(|w| (w[1] - 0.75).abs() < (w[0] - 0.75).abs());
    Ok((
        increasing && p_in_range && approaching,
        json!({
            "log_delta": pairs.iter().map(|p| json!({"L": p.0, "log_delta": p.1})).collect::<Vec<_>>(),
            "minus_log_delta_increasing": increasing,
            "p": fit.p,
            "p_in_range": p_in_range,
            "local_slopes": fit.local_slopes,
            "slopes_approach_0.75": approaching,
        }),
    ))
}

fn instanton_action() -> Check {
    let p = chain(64, 1.0, 0.5, CouplingKind::AllToAll)?;
    let m = minimize_reduced_action(&p, 10.0, 8192)?;
    let exact = analytic_action(&p, 10.0);
    let rel = ((m.action.total - exact) / exact).abs();
    Ok((
        rel < 1e-3,
        json!({"action": m.action.total, "analytic": exact, "rel_diff": rel, "iterations": m.iterations}),
    ))
}

fn determinant_assembly(beta: f64, nmax: usize) -> Check {
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for l in [2usize, 4, 8] {
        for lambda in [0.0, 0.2] {
            let rp = RotorParams::new(chain(l, lambda, 0.5, CouplingKind::PeriodicPowerLaw)?, 0.05)?;
            let r = appendix_d_verify(&rp, beta, nmax)?;
            worst = worst.max(r.rel_error);
            rows.push(json!({"L": l, "lambda": lambda, "numeric": r.delta_numeric, "closed": r.delta_closed, "rel_error": r.rel_error}));
        }
    }
    Ok((worst < 5e-3, json!({"beta": beta, "nmax": nmax, "max_rel_error": worst, "cases": rows})))
}

/// Relative difference between the full semiclassical `log delta` and its
/// large-L form.
pub fn rotor_rel_diff(l: usize) -> anyhow::Result<f64> {
    let rp = RotorParams::new(chain(l, 0.2, 0.5, CouplingKind::PeriodicPowerLaw)?, 0.05)?;
    let s = log_delta_rotor(&rp)?;
    let a = s
        .log_delta_asymptotic
        .ok_or_else(|| anyhow::anyhow!("no asymptotic form"))?;
    Ok(((s.log_delta - a) / s.log_delta).abs())
}

fn rotor_asymptotics() -> Check {
    let sizes = [64usize, 256, 1024];
    let diffs = sizes.iter().map(|&l| rotor_rel_diff(l)).collect::<anyhow::Result<Vec<_>>>()?;
    let decreasing = diffs.windows(2).all(|w| w[1] < w[0]);
    let last = diffs[2];
    Ok((
        decreasing && last < 0.02,
        json!({"L": sizes, "rel_diff": diffs, "decreasing": decreasing, "below_2pct_at_1024": last < 0.02}),
    ))
}

fn toy_params(l: usize) -> anyhow::Result<ModelParams> {
    chain(l, 1.0, 0.5, CouplingKind::AllToAll)
}

fn toy_routes() -> Check {
    let mut worst = 0.0f64;
    for l in [4usize, 6, 8, 10] {
        let p = toy_params(l)?;
        let s = solve_splitting_secular(&OperatorChoice::SigmaX, &p)?.delta;
        let d = dense_oracle_toy(&OperatorChoice::SigmaX, &p)?.delta;
        worst = worst.max(((s - d) / d).abs());
    }
    let mut zeros = true;
    let mut nonzero = Vec::new();
    for choice in [OperatorChoice::SigmaX, OperatorChoice::SigmaXX] {
        for l in [3usize, 5, 7, 9] {
            let d = solve_splitting_secular(&choice, &toy_params(l)?)?.delta;
            if d != 0.0 {
                zeros = false;
                nonzero.push(json!({"choice": choice.name(), "L": l, "delta": d}));
            }
        }
    }
    for l in [6usize, 10, 14] {
        let d = solve_splitting_secular(&OperatorChoice::SigmaXX, &toy_params(l)?)?.delta;
        if d != 0.0 {
            zeros = false;
            nonzero.push(json!({"choice": "sigma-xx", "L": l, "delta": d}));
        }
    }
    Ok((
        worst <= 1e-8 && zeros,
        json!({"max_rel_difference": worst, "exact_zeros": zeros, "nonzero": nonzero}),
    ))
}

fn toy_asymptotics() -> Check {
    let mut ratios = Vec::new();
    for l in (8..=20).step_by(2) {
        let p = toy_params(l)?;
        let d = solve_splitting_secular(&OperatorChoice::SigmaX, &p)?.delta;
        let a = asymptotic_log_delta_toy(&OperatorChoice::SigmaX, &p)?;
        ratios.push(d.abs().ln() / a);
    }
    let trending = ratios.windows(2).all(|w| (1.0 - w[1]).abs() < (1.0 - w[0]).abs());
    let p = toy_params(20)?;
    let third = asymptotic_log_delta_toy(&OperatorChoice::mixed(1, 3, Default::default())?, &p)?;
    let fifth = asymptotic_log_delta_toy(&OperatorChoice::mixed(1, 5, Default::default())?, &p)?;
    let ratio = third / fifth;
    let exact = (ratio - 0.6).abs() <= 4.0 * f64::EPSILON;
    Ok((
        trending && exact,
        json!({"L": (8..=20).step_by(2).collect::<Vec<_>>(), "ratios": ratios, "trending_to_1": trending, "gamma_ratio": ratio}),
    ))
}

fn kernel_convergence() -> Check {
    let p = chain(8, 1.0, 0.5, CouplingKind::AllToAll)?;
    let grids = [128usize, 256, 512, 1024];
    let devs = grids
        .iter()
        .map(|&n| Ok(hessian_vd_check(&p, 4.0, n)?.low_mode_deviation))
        .collect::<anyhow::Result<Vec<f64>>>()?;
    let converging = devs.windows(2).all(|w| w[1] <= w[0]);
    let last = devs[3];
    Ok((
        converging && last <= 0.01,
        json!({"grid": grids, "low_mode_deviation": devs, "converging": converging}),
    ))
}

fn scaling_table(opts: &VerifyOptions) -> Check {
    let points = preset("table-i")?;
    let mut records = Vec::new();
    for out in run_points(&points, opts.cache.as_ref(), opts.jobs) {
        records.push(out?.record);
    }
    let (fits, _) = fit_records(&records, FitModel::Auto);
    let all_match = fits.len() == 4 && fits.iter().all(|f| f.matches == Some(true));
    let table: Vec<Value> = fits
        .iter()
        .map(|f| json!({"series": f.series, "p": f.fit.p, "class": f.class, "expected": f.expected_class}))
        .collect();
    Ok((all_match, json!({"table": table})))
}
