//! Saddle-point treatment of the all-to-all chain: the reduced action on
//! step-like paths, its kink solution and numerical minimization, the
//! resulting predictions for `log s_beta` and `log delta`, and the spectrum
//! of the quadratic kernel `V_d`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Beta, ModelParams};
use crate::numerics::symmetric_eigen;

/// A path `theta(tau)` sampled on a uniform grid over `[0, beta]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstantonProfile {
    pub tau_grid: Vec<f64>,
    pub theta: Vec<f64>,
    pub tau_star: f64,
    pub width: f64,
}

impl InstantonProfile {
    /// Piecewise-linear path: 0 until `tau_star - w/2`, then a ramp to `pi`.
    pub fn ramp(beta: f64, tau_star: f64, w: f64, grid_size: usize) -> Self {
        let tau_grid = uniform_grid(beta, grid_size);
        let theta = tau_grid
            .iter()
            .map(|&t| (PI * ((t - tau_star) / w + 0.5)).clamp(0.0, PI))
            .collect();
        InstantonProfile {
            tau_grid,
            theta,
            tau_star,
            width: w,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionBreakdown {
    pub potential_term: f64,
    pub kinetic_term: f64,
    pub total: f64,
    /// Richardson estimate of the discretization error in `total`.
    pub error_estimate: f64,
}

fn uniform_grid(beta: f64, grid_size: usize) -> Vec<f64> {
    let n = grid_size.max(2) - 1;
    (0..=n).map(|i| beta * i as f64 / n as f64).collect()
}

/// `tanh(beta)`, equal to one at infinite beta.
fn tanh_beta(beta: f64) -> f64 {
    if beta.is_infinite() {
        1.0
    } else {
        beta.tanh()
    }
}

/// Coefficients `(L tanh beta, L^alpha / (4 lambda))` of the reduced action.
fn action_coefficients(params: &ModelParams, beta: f64) -> Result<(f64, f64)> {
    if !(params.lambda > 0.0) {
        return Err(Error::InvalidParams("the reduced action needs lambda > 0".into()));
    }
    let l = params.l as f64;
    Ok((l * tanh_beta(beta), l.powf(params.alpha) / (4.0 * params.lambda)))
}

/// Trapezoid potential and forward-difference kinetic sums using every
/// `stride`-th grid point.
fn discrete_terms(tau: &[f64], theta: &[f64], a: f64, b: f64, stride: usize) -> (f64, f64) {
    let idx: Vec<usize> = (0..tau.len()).step_by(stride).collect();
    let mut pot = 0.0;
    let mut kin = 0.0;
    for w in idx.windows(2) {
        let (i, j) = (w[0], w[1]);
        let h = tau[j] - tau[i];
        let (si, sj) = (theta[i].sin(), theta[j].sin());
        pot += 0.5 * h * (si * si + sj * sj);
        let d = theta[j] - theta[i];
        kin += d * d / h;
    }
    (a * pot, b * kin)
}

/// The reduced action `L tanh(beta) int sin^2 theta + (L^alpha / 4 lambda) int theta'^2`.
/// With `tolerance` set, fails when the Richardson error estimate exceeds it.
pub fn reduced_action(
    profile: &InstantonProfile,
    params: &ModelParams,
    beta: f64,
    tolerance: Option<f64>,
) -> Result<ActionBreakdown> {
    let tau = &profile.tau_grid;
    let theta = &profile.theta;
    if tau.len() != theta.len() {
        return Err(Error::DimensionMismatch {
            expected: tau.len(),
            got: theta.len(),
        });
    }
    if tau.len() < 3 || tau.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParams("tau grid must be strictly increasing with >= 3 points".into()));
    }
    let span_err = (tau[0].abs() + (tau[tau.len() - 1] - beta).abs()) / beta;
    if span_err > 1e-12 {
        return Err(Error::InvalidParams(format!("tau grid must span [0, {beta}]")));
    }
    let (a, b) = action_coefficients(params, beta)?;
    let (pot, kin) = discrete_terms(tau, theta, a, b, 1);
    let total = pot + kin;
    // both sums are second order in the spacing
    let n = tau.len() - 1;
    let error_estimate = if n % 2 == 0 {
        let (p2, k2) = discrete_terms(tau, theta, a, b, 2);
        let coarse = p2 + k2;
        let e1 = (total - coarse).abs() / 3.0;
        if n % 4 == 0 {
            let (p4, k4) = discrete_terms(tau, theta, a, b, 4);
            let e2 = (coarse - (p4 + k4)).abs() / 3.0;
            // the finer estimate, guarded against accidental cancellation
            e1.max(e2 / 16.0)
        } else {
            e1
        }
    } else {
        f64::INFINITY
    };
    if let Some(tol) = tolerance {
        if error_estimate > tol {
            return Err(Error::GridTooCoarse {
                estimate: error_estimate,
                tolerance: tol,
            });
        }
    }
    Ok(ActionBreakdown {
        potential_term: pot,
        kinetic_term: kin,
        total,
        error_estimate,
    })
}

/// Kink rate `2 sqrt(lambda tanh beta) L^((1-alpha)/2)`.
pub fn kink_rate(params: &ModelParams, beta: f64) -> f64 {
    let l = params.l as f64;
    2.0 * (params.lambda * tanh_beta(beta)).sqrt() * l.powf(0.5 * (1.0 - params.alpha))
}

/// Closed-form instanton action `2 L^((1+alpha)/2) sqrt(tanh(beta) / lambda)`.
pub fn analytic_action(params: &ModelParams, beta: f64) -> f64 {
    let l = params.l as f64;
    2.0 * l.powf(0.5 * (1.0 + params.alpha)) * (tanh_beta(beta) / params.lambda).sqrt()
}

/// Samples `theta = 2 atan(exp(kappa (tau - tau_star)))`.
pub fn analytic_instanton(params: &ModelParams, beta: f64, tau_star: f64, grid_size: usize) -> Result<InstantonProfile> {
    if !(params.lambda > 0.0) {
        return Err(Error::InvalidParams("the instanton needs lambda > 0".into()));
    }
    if !(tau_star > 0.0 && tau_star < beta) {
        return Err(Error::InvalidParams(format!("tau* = {tau_star} must lie in (0, {beta})")));
    }
    let kappa = kink_rate(params, beta);
    let tau_grid = uniform_grid(beta, grid_size);
    let theta = tau_grid
        .iter()
        .map(|&t| 2.0 * (kappa * (t - tau_star)).exp().atan())
        .collect();
    let l = params.l as f64;
    Ok(InstantonProfile {
        tau_grid,
        theta,
        tau_star,
        width: l.powf(0.5 * (params.alpha - 1.0)) / params.lambda.sqrt(),
    })
}

/// Outcome of [`minimize_reduced_action`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimization {
    pub profile: InstantonProfile,
    pub action: ActionBreakdown,
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Discrete action with interior values `x` (endpoints pinned to 0 and pi).
struct DiscreteAction {
    h: f64,
    a: f64,
    b: f64,
}

impl DiscreteAction {
    fn full(&self, x: &[f64]) -> Vec<f64> {
        let mut t = Vec::with_capacity(x.len() + 2);
        t.push(0.0);
        t.extend_from_slice(x);
        t.push(PI);
        t
    }

    fn value(&self, x: &[f64]) -> f64 {
        let t = self.full(x);
        let mut pot = 0.0;
        let mut kin = 0.0;
        for w in t.windows(2) {
            let (s0, s1) = (w[0].sin(), w[1].sin());
            pot += 0.5 * (s0 * s0 + s1 * s1);
            kin += (w[1] - w[0]) * (w[1] - w[0]);
        }
        self.a * self.h * pot + self.b * kin / self.h
    }

    /// Gradient and the tridiagonal Hessian (diagonal, off-diagonal).
    fn derivatives(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let t = self.full(x);
        let n = x.len();
        let k = 2.0 * self.b / self.h;
        let mut g = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 0..n {
            let (prev, cur, next) = (t[i], t[i + 1], t[i + 2]);
            g[i] = k * (2.0 * cur - prev - next) + self.a * self.h * (2.0 * cur).sin();
            d[i] = 2.0 * k + 2.0 * self.a * self.h * (2.0 * cur).cos();
        }
        (g, d, -k)
    }
}

/// Solves the tridiagonal system with constant off-diagonal `off`; `None`
/// when a pivot is not positive.
fn solve_tridiagonal(diag: &[f64], off: f64, rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut pivot = diag[0];
    if !(pivot > 0.0) {
        return None;
    }
    c[0] = off / pivot;
    y[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - off * c[i - 1];
        if !(pivot > 0.0) {
            return None;
        }
        c[i] = off / pivot;
        y[i] = (rhs[i] - off * y[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        y[i] -= c[i] * y[i + 1];
    }
    Some(y)
}

/// Minimizes the discretized reduced action with `theta(0) = 0` and
/// `theta(beta) = pi` pinned, by damped Newton steps with backtracking.
/// Starts from `start` when given, otherwise from the linear ramp.
pub fn minimize_reduced_action_from(
    params: &ModelParams,
    beta: f64,
    grid_size: usize,
    start: Option<&InstantonProfile>,
    grad_tol: f64,
    max_iterations: usize,
) -> Result<Minimization> {
    if grid_size < 4 {
        return Err(Error::InvalidParams("grid needs at least 4 points".into()));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParams(format!("beta must be finite and positive, got {beta}")));
    }
    let (a, b) = action_coefficients(params, beta)?;
    let tau = uniform_grid(beta, grid_size);
    let h = tau[1] - tau[0];
    let act = DiscreteAction { h, a, b };
    let mut x: Vec<f64> = match start {
        Some(p) => {
            if p.theta.len() != grid_size {
                return Err(Error::DimensionMismatch {
                    expected: grid_size,
                    got: p.theta.len(),
                });
            }
            p.theta[1..grid_size - 1].to_vec()
        }
        None => tau[1..grid_size - 1].iter().map(|t| PI * t / beta).collect(),
    };
    let mut value = act.value(&x);
    let mut iterations = 0;
    let mut gnorm;
    loop {
        let (g, d, off) = act.derivatives(&x);
        gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < grad_tol {
            break;
        }
        if iterations >= max_iterations {
            return Err(Error::NotConverged {
                iterations,
                estimate: value,
                residual: gnorm,
            });
        }
        iterations += 1;
        // Levenberg shift until the Hessian factors
        let scale = 2.0 * off.abs();
        let mut mu = 1e-12 * scale;
        let step = loop {
            let shifted: Vec<f64> = d.iter().map(|v| v + mu).collect();
            if let Some(s) = solve_tridiagonal(&shifted, off, &g) {
                break s;
            }
            mu = (mu * 10.0).max(1e-8 * scale);
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(xi, si)| xi - t * si).collect();
            let v = act.value(&trial);
            if v <= value {
                accepted = v < value || t == 1.0;
                x = trial;
                value = v;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // no further decrease representable; the gradient is at its rounding floor
            let floor = 1e3 * f64::EPSILON * scale * PI * (x.len() as f64).sqrt();
            if gnorm <= grad_tol.max(floor) {
                break;
            }
            return Err(Error::NotConverged {
                iterations,
                estimate: value,
                residual: gnorm,
            });
        }
    }
    let theta = act.full(&x);
    // kink center from the crossing of pi/2
    let tau_star = theta
        .windows(2)
        .position(|w| w[0] <= PI / 2.0 && w[1] >= PI / 2.0)
        .map(|i| {
            let f = (PI / 2.0 - theta[i]) / (theta[i + 1] - theta[i]).max(f64::MIN_POSITIVE);
            tau[i] + f * h
        })
        .unwrap_or(beta / 2.0);
    let l = params.l as f64;
    let profile = InstantonProfile {
        tau_grid: tau,
        theta,
        tau_star,
        width: l.powf(0.5 * (params.alpha - 1.0)) / params.lambda.sqrt(),
    };
    let action = reduced_action(&profile, params, beta, None)?;
    Ok(Minimization {
        profile,
        action,
        iterations,
        gradient_norm: gnorm,
    })
}

pub fn minimize_reduced_action(params: &ModelParams, beta: f64, grid_size: usize) -> Result<Minimization> {
    minimize_reduced_action_from(params, beta, grid_size, None, 1e-10, 200)
}

/// Saddle-point `log(s_beta / beta) = -2 L^((1+alpha)/2) sqrt(tanh(beta) / lambda)`.
pub fn predict_log_sbeta(params: &ModelParams, beta: Beta) -> Result<f64> {
    if !(params.lambda > 0.0) {
        return Err(Error::InvalidParams("the saddle-point formula needs lambda > 0".into()));
    }
    Ok(-analytic_action(params, beta.value()))
}

/// Leading asymptotic `log delta = -(2 / sqrt(lambda)) L^((1+alpha)/2)`,
/// exact only as `L -> inf` (corrections of order `L^alpha`).
pub fn predict_log_delta_chain(params: &ModelParams) -> Result<f64> {
    predict_log_sbeta(params, Beta::Infinite)
}

/// `V_d(tau1, tau2) = (L/4) cosh^2(beta - 2|tau1 - tau2|) / cosh^2(beta)`,
/// written with `exp` to stay finite at large beta.
pub fn vd_kernel(l: usize, beta: f64, separation: f64) -> f64 {
    let x = beta - 2.0 * separation.abs();
    // cosh(x)/cosh(beta) = (e^{x-beta} + e^{-x-beta}) / (1 + e^{-2 beta})
    let r = ((x - beta).exp() + (-x - beta).exp()) / (1.0 + (-2.0 * beta).exp());
    0.25 * l as f64 * r * r
}

/// Closed-form eigenvalue `v_k = (L/cosh^2 beta)(sinh(2 beta)/(16 + w_k^2) + (beta/8) [k = 0])`.
pub fn vd_eigenvalue(l: usize, beta: f64, k: i64) -> f64 {
    let omega = 2.0 * PI * k as f64 / beta;
    // sinh(2b)/cosh^2(b) = 2 tanh(b)
    let mut v = 2.0 * beta.tanh() / (16.0 + omega * omega);
    if k == 0 {
        let sech = 2.0 / (beta.exp() + (-beta).exp());
        v += beta / 8.0 * sech * sech;
    }
    l as f64 * v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianModeTable {
    pub beta: f64,
    #[serde(rename = "L")]
    pub l: usize,
    pub grid_size: usize,
    /// Mode labels `0, 1, -1, 2, -2, ...` for the compared modes.
    pub k: Vec<i64>,
    pub omega_k: Vec<f64>,
    pub v_k: Vec<f64>,
    /// Kernel eigenvalues of the discretized operator, matched to `k`.
    pub v_k_numeric: Vec<f64>,
    /// `v_k + L^alpha / (2 lambda)`.
    pub h_k: Vec<f64>,
    pub max_rel_deviation: f64,
    /// Largest deviation over the lowest eight modes.
    pub low_mode_deviation: f64,
}

/// Diagonalizes the discretized `V_d` kernel on a uniform periodic grid and
/// compares its spectrum with the closed-form `v_k` for `|k| <= grid/4`.
pub fn hessian_vd_check(params: &ModelParams, beta: f64, grid_size: usize) -> Result<HessianModeTable> {
    if grid_size < 64 {
        return Err(Error::InvalidParams(format!("grid_size must be >= 64, got {grid_size}")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParams(format!("beta must be finite and positive, got {beta}")));
    }
    let n = grid_size;
    let l = params.l;
    let hstep = beta / n as f64;
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let d = (i as f64 - j as f64).abs() * hstep;
            m[i * n + j] = hstep * vd_kernel(l, beta, d.min(beta - d));
        }
    }
    let mut numeric = symmetric_eigen(n, &m, false)?.values;
    numeric.sort_by(|a, b| b.total_cmp(a));
    let kmax = (n / 4) as i64;
    let mut ks = vec![0i64];
    for k in 1..=kmax {
        ks.push(k);
        ks.push(-k);
    }
    let shift = if params.lambda > 0.0 {
        (l as f64).powf(params.alpha) / (2.0 * params.lambda)
    } else {
        f64::INFINITY
    };
    let v_k: Vec<f64> = ks.iter().map(|&k| vd_eigenvalue(l, beta, k)).collect();
    let v_num: Vec<f64> = numeric[..ks.len()].to_vec();
    let dev: Vec<f64> = v_k.iter().zip(&v_num).map(|(a, b)| ((a - b) / a).abs()).collect();
    Ok(HessianModeTable {
        beta,
        l,
        grid_size,
        omega_k: ks.iter().map(|&k| 2.0 * PI * k as f64 / beta).collect(),
        h_k: v_k.iter().map(|v| v + shift).collect(),
        max_rel_deviation: dev.iter().copied().fold(0.0, f64::max),
        low_mode_deviation: dev.iter().take(8).copied().fold(0.0, f64::max),
        k: ks,
        v_k,
        v_k_numeric: v_num,
    })
}
