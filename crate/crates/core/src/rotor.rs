//! Semiclassical splitting of the periodic rotor chain with long-range
//! number-number coupling: effective mass, instanton, fluctuation
//! determinant ratio, the full `log delta` and its large-L form, and a
//! finite-beta assembly of the determinant ratio from its Hessian spectra.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::model::{check_positive_definite, fourier_masses, inverse_masses, power_law_prefactor, CouplingKind, ModelParams};
use crate::numerics::{bisect, integrate, integrate_checked, integrate_to_infinity, QuadConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotorParams {
    pub base: ModelParams,
    /// Semiclassical parameter playing the role of hbar.
    pub g: f64,
}

impl RotorParams {
    pub fn new(base: ModelParams, g: f64) -> Result<Self> {
        let p = RotorParams { base, g };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if !(self.g > 0.0) || !self.g.is_finite() {
            return Err(Error::InvalidParams(format!("g must be positive, got {}", self.g)));
        }
        if self.base.coupling == CouplingKind::AllToAll {
            return Err(Error::InvalidParams(
                "the rotor chain takes a power-law or custom coupling".into(),
            ));
        }
        if !check_positive_definite(&self.base)? {
            let masses = inverse_masses(&self.base)?;
            let (k, inv) = masses
                .iter()
                .copied()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("L >= 2");
            return Err(Error::NonPositiveMass { k, inverse_mass: inv });
        }
        Ok(())
    }

    fn l(&self) -> f64 {
        self.base.l as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotorSemiclassics {
    pub m0: f64,
    pub m_k: Vec<f64>,
    pub action: f64,
    pub det_ratio: f64,
    pub log_delta: f64,
    /// Large-L form; present for power-law coupling with `0 < alpha < 1`, `lambda > 0`.
    pub log_delta_asymptotic: Option<f64>,
}

/// `m0 = 1 / (1 + 2 lambda sum_r f(r))`.
pub fn effective_mass(params: &RotorParams) -> Result<f64> {
    let inv = inverse_masses(&params.base)?[0];
    if inv <= 0.0 {
        return Err(Error::NonPositiveMass { k: 0, inverse_mass: inv });
    }
    Ok(1.0 / inv)
}

/// `U(theta) = (|theta| - pi/2)^2 / 2` on `[-pi, pi]`, extended periodically.
pub fn potential(theta: f64) -> f64 {
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    0.5 * (t.abs() - PI / 2.0).powi(2)
}

/// `(pi/2) sgn(tau - tau*) (1 - exp(-|tau - tau*| / sqrt(m0)))`.
pub fn instanton_profile_rotor(params: &RotorParams, tau: f64, tau_star: f64) -> Result<f64> {
    let m0 = effective_mass(params)?;
    Ok(profile_with_mass(m0, tau - tau_star))
}

fn profile_with_mass(m0: f64, s: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    0.5 * PI * s.signum() * -(-s.abs() / m0.sqrt()).exp_m1()
}

/// Instanton action `L pi^2 sqrt(m0) / 4`.
pub fn rotor_action(params: &RotorParams) -> Result<f64> {
    Ok(params.l() * PI * PI * effective_mass(params)?.sqrt() / 4.0)
}

/// `L int_{-pi/2}^{pi/2} sqrt(2 m0 U(theta)) dtheta` by quadrature.
pub fn rotor_action_quadrature(params: &RotorParams) -> Result<f64> {
    let m0 = effective_mass(params)?;
    let q = integrate(|t| (2.0 * m0 * potential(t)).sqrt(), -PI / 2.0, PI / 2.0, QuadConfig::default())?;
    Ok(params.l() * q.value)
}

/// Per-mode arguments `y_k = sqrt(m0/m_k) / sqrt(1 + 4 sin^2(pi k / L))`, `k >= 1`.
fn closed_factors(params: &RotorParams) -> Result<Vec<f64>> {
    let m = fourier_masses(&params.base)?;
    let l = params.base.l;
    (1..l)
        .map(|k| {
            let s = (PI * k as f64 / l as f64).sin();
            let y = (m[0] / m[k]).sqrt() / (1.0 + 4.0 * s * s).sqrt();
            if y > 0.0 && y < 1.0 {
                Ok(y)
            } else {
                Err(Error::FactorOutOfRange { k, value: y })
            }
        })
        .collect()
}

/// `log Delta = log 2 - sum_{k>=1} log(1 - y_k)`.
pub fn log_det_ratio_closed(params: &RotorParams) -> Result<f64> {
    let y = closed_factors(params)?;
    Ok(2f64.ln() - y.iter().map(|v| (-v).ln_1p()).sum::<f64>())
}

/// `Delta = 2 prod_{k>=1} (1 - y_k)^{-1}`.
pub fn det_ratio_closed(params: &RotorParams) -> Result<f64> {
    Ok(log_det_ratio_closed(params)?.exp())
}

/// The full semiclassical `log delta`.
pub fn log_delta_rotor(params: &RotorParams) -> Result<RotorSemiclassics> {
    params.validate()?;
    let m_k = fourier_masses(&params.base)?;
    let m0 = m_k[0];
    let l = params.l();
    let g = params.g;
    let action = rotor_action(params)?;
    let log_det = log_det_ratio_closed(params)?;
    let y = closed_factors(params)?;
    let log_delta = -l * PI * PI * m0.sqrt() / (4.0 * g) + 0.5 * (4.0 * l * PI / (g * m0.sqrt())).ln()
        - 0.5 * y.iter().map(|v| (-v).ln_1p()).sum::<f64>();
    let p = &params.base;
    let log_delta_asymptotic =
        if p.coupling == CouplingKind::PeriodicPowerLaw && p.lambda > 0.0 && p.alpha < 1.0 {
            Some(log_delta_asymptotic(params, &AsymptoticConfig::default())?)
        } else {
            None
        };
    Ok(RotorSemiclassics {
        m0,
        m_k,
        action,
        det_ratio: log_det.exp(),
        log_delta,
        log_delta_asymptotic,
    })
}

const BERNOULLI: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

/// Hurwitz zeta `zeta(s, a)` for real `s != 1`, `a > 0`, by Euler-Maclaurin
/// summation (valid for `s < 1` through analytic continuation).
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    const N: usize = 24;
    let mut sum: f64 = (0..N).map(|n| (n as f64 + a).powf(-s)).sum();
    let x = N as f64 + a;
    sum += x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // B_{2j}/(2j)! s(s+1)...(s+2j-2) x^{-s-2j+1}
    let mut rising = s;
    let mut fact = 2.0;
    let mut xpow = x.powf(-s - 1.0);
    for (j, b) in BERNOULLI.iter().enumerate() {
        sum += b / fact * rising * xpow;
        let m = 2.0 * (j + 1) as f64;
        rising *= (s + m - 1.0) * (s + m);
        fact *= (m + 1.0) * (m + 2.0);
        xpow /= x * x;
    }
    sum
}

/// How `sum_{r>=1} cos(2 pi r x) / r^alpha` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum CosineSeries {
    /// Closed form through the Hurwitz zeta function.
    Hurwitz,
    /// Partial sum to `r = truncation` plus a leading summation-by-parts tail.
    Truncated { truncation: usize },
}

/// `sum_{r>=1} cos(2 pi r x) / r^alpha` for `0 < x < 1`, `0 < alpha < 1`.
pub fn cosine_series(x: f64, alpha: f64, method: CosineSeries) -> f64 {
    match method {
        CosineSeries::Hurwitz => {
            let x = x.rem_euclid(1.0);
            let s = 1.0 - alpha;
            gamma(s) * (2.0 * PI).powf(-s) * (0.5 * PI * alpha).sin() * (hurwitz_zeta(s, x) + hurwitz_zeta(s, 1.0 - x))
        }
        CosineSeries::Truncated { truncation } => {
            let w = 2.0 * PI * x;
            let partial: f64 = (1..=truncation).map(|r| (w * r as f64).cos() / (r as f64).powf(alpha)).sum();
            // sum_{r>R} e^{iwr} r^-a ~ e^{iw(R+1)} (R+1)^-a / (1 - e^{iw})
            let r1 = (truncation + 1) as f64;
            let amp = r1.powf(-alpha);
            let (num_re, num_im) = ((w * r1).cos() * amp, (w * r1).sin() * amp);
            let (den_re, den_im) = (1.0 - w.cos(), -w.sin());
            let d2 = den_re * den_re + den_im * den_im;
            partial + (num_re * den_re + num_im * den_im) / d2
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticConfig {
    pub series: CosineSeries,
    pub quad: QuadConfig,
    /// Maximum relative difference tolerated between two quadrature refinements.
    pub cauchy_rel: f64,
}

impl Default for AsymptoticConfig {
    fn default() -> Self {
        AsymptoticConfig {
            series: CosineSeries::Hurwitz,
            quad: QuadConfig {
                abs_tol: 1e-300,
                rel_tol: 1e-10,
                max_intervals: 2000,
            },
            cauchy_rel: 1e-8,
        }
    }
}

/// `int_0^1 sqrt((1 + 4 lambda c_alpha S(x)) / (1 + 4 sin^2 pi x)) dx`.
pub fn asymptotic_integral(lambda: f64, alpha: f64, cfg: &AsymptoticConfig) -> Result<f64> {
    let c = power_law_prefactor(alpha);
    let p = 2.0 / (1.0 + alpha);
    let bad = std::cell::Cell::new(None);
    let integrand = |u: f64| {
        // x = u^p removes the x^{(alpha-1)/2} endpoint singularity
        let x = u.powf(p);
        let jac = p * u.powf(p - 1.0);
        let num = 1.0 + 4.0 * lambda * c * cosine_series(x, alpha, cfg.series);
        if num < 0.0 {
            bad.set(Some(x));
            return 0.0;
        }
        let s = (PI * x).sin();
        (num / (1.0 + 4.0 * s * s)).sqrt() * jac
    };
    // symmetric about x = 1/2
    let upper = 0.5f64.powf(1.0 / p);
    let q = integrate_checked(integrand, 0.0, upper, cfg.quad, cfg.cauchy_rel)?;
    if let Some(x) = bad.get() {
        return Err(Error::InvalidParams(format!(
            "mode mass turns negative at x = {x}; lambda = {lambda} is outside the admissible window"
        )));
    }
    Ok(2.0 * q.value)
}

/// The three-term large-L form of `log delta` for power-law coupling.
pub fn log_delta_asymptotic(params: &RotorParams, cfg: &AsymptoticConfig) -> Result<f64> {
    let p = &params.base;
    if !(p.lambda > 0.0) {
        return Err(Error::InvalidParams("the large-L form requires lambda > 0".into()));
    }
    if !(p.alpha < 1.0) {
        return Err(Error::InvalidParams("the large-L form requires alpha < 1".into()));
    }
    let l = params.l();
    let a = p.alpha;
    let s2l = (2.0 * p.lambda).sqrt();
    let lead = l.powf(0.5 * (1.0 + a));
    let integral = asymptotic_integral(p.lambda, a, cfg)?;
    Ok(-lead * PI * PI / (4.0 * params.g * s2l)
        + 0.5 * (4.0 * l.powf(0.5 * (3.0 - a)) * PI * s2l / params.g).ln()
        + lead / (2.0 * s2l) * integral)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppendixDReport {
    pub beta: f64,
    pub n_max: usize,
    /// Complex-root limits `sqrt(m0)/m_k` (the root is `i` times this).
    pub complex_roots: Vec<f64>,
    /// Real roots `Omega_n`, `n = 1..=n_max`, for each `k`.
    #[serde(skip)]
    pub omega_solutions: Vec<Vec<f64>>,
    /// Tail contribution to `log Delta` beyond `n_max`, from the large-n expansion.
    pub log_tail: f64,
    pub delta_numeric: f64,
    pub delta_closed: f64,
    pub rel_error: f64,
}

/// `tau_k(u) + 1` for real `u`.
fn tau_plus_one(m_k: f64, sin2: f64, u: f64) -> f64 {
    u * u * m_k + 4.0 * sin2 + 1.0
}

/// Real root of `tan(Omega beta / 2) = Omega m_k / sqrt(m0)` in
/// `[2 pi n / beta, 2 pi (n + 1/2) / beta]`.
pub fn solve_omega(m0: f64, m_k: f64, beta: f64, n: usize, k: usize) -> Result<f64> {
    let c = m_k / m0.sqrt();
    let width = 2.0 * PI / beta;
    let eps = 1e-9 * width;
    let lo = width * n as f64 + eps;
    let hi = width * (n as f64 + 0.5) - eps;
    // sin(y) - c Omega cos(y) with y = Omega beta / 2 has the same roots and no poles
    let f = |om: f64| {
        let y = 0.5 * om * beta;
        y.sin() - c * om * y.cos()
    };
    bisect(f, lo, hi, 1e-13).map_err(|(f_lo, f_hi)| Error::RootNotBracketed { k, n, f_lo, f_hi })
}

/// Assembles the determinant ratio at finite `beta` from the Hessian
/// eigenvalues, truncating the paired products at `n_max` and adding the
/// large-n tail. Requires `beta >= 20` and `n_max >= 1000`.
pub fn appendix_d_verify(params: &RotorParams, beta: f64, n_max: usize) -> Result<AppendixDReport> {
    if !(beta >= 20.0) || n_max < 1000 {
        return Err(Error::InvalidParams(format!(
            "the finite-beta check needs beta >= 20 and n_max >= 1000, got beta = {beta}, n_max = {n_max}"
        )));
    }
    assemble_det_ratio(params, beta, n_max)
}

/// [`appendix_d_verify`] without the range checks on `beta` and `n_max`.
pub fn assemble_det_ratio(params: &RotorParams, beta: f64, n_max: usize) -> Result<AppendixDReport> {
    params.validate()?;
    if !(beta.is_finite() && beta > 0.0) || n_max == 0 {
        return Err(Error::InvalidParams("beta must be finite and positive, n_max >= 1".into()));
    }
    let m = fourier_masses(&params.base)?;
    let m0 = m[0];
    let l = params.base.l;
    let sin2: Vec<f64> = (0..l).map(|k| (PI * k as f64 / l as f64).sin().powi(2)).collect();

    // per-k: (log of paired products up to n_max, tail, roots)
    let per_k: Vec<Result<(f64, f64, Vec<f64>)>> = (0..l)
        .into_par_iter()
        .map(|k| {
            let mut roots = Vec::with_capacity(n_max);
            let mut acc = 0.0;
            for n in 1..=n_max {
                let om = solve_omega(m0, m[k], beta, n, k)?;
                let x = 2.0 * PI * (n as f64 + 0.5) / beta;
                acc += (tau_plus_one(m[k], sin2[k], x) / tau_plus_one(m[k], sin2[k], om)).ln();
                roots.push(om);
            }
            // tail: (2/pi) int m_k x atan(a/x) / (tau_k(x) + 1) dx beyond the last midpoint
            let a = m0.sqrt() / m[k];
            let x_max = 2.0 * PI * (n_max as f64 + 1.0) / beta;
            let tail = integrate_to_infinity(
                |x| m[k] * x * (a / x).atan() / tau_plus_one(m[k], sin2[k], x),
                x_max,
                QuadConfig::default(),
            )?
            .value
                * 2.0
                / PI;
            Ok((acc, tail, roots))
        })
        .collect();

    let mut log_delta = tau_plus_one(m0, 0.0, PI / beta).ln();
    let mut complex_roots = Vec::with_capacity(l);
    for k in 0..l {
        complex_roots.push(m0.sqrt() / m[k]);
        if k >= 1 {
            // tau_k(i sqrt(m0)/m_k) + 1 = 1 + 4 sin^2 - m0/m_k
            let denom = 1.0 + 4.0 * sin2[k] - m0 / m[k];
            if !(denom > 0.0) {
                return Err(Error::FactorOutOfRange { k, value: denom });
            }
            log_delta += (tau_plus_one(m[k], sin2[k], PI / beta) / denom).ln();
        }
    }
    let mut omega_solutions = Vec::with_capacity(l);
    let mut log_tail = 0.0;
    for r in per_k {
        let (acc, tail, roots) = r?;
        log_delta += acc + tail;
        log_tail += tail;
        omega_solutions.push(roots);
    }
    let delta_numeric = log_delta.exp();
    let delta_closed = det_ratio_closed(params)?;
    Ok(AppendixDReport {
        beta,
        n_max,
        complex_roots,
        omega_solutions,
        log_tail,
        delta_numeric,
        delta_closed,
        rel_error: (delta_numeric - delta_closed).abs() / delta_closed,
    })
}

/// The infinite-beta determinant ratio written as
/// `prod_k (tau_k(0)+1)/(tau_k(i a_k)+1) * exp((2/pi) int ...)`, with the
/// integrals done numerically instead of by the closed identity.
pub fn det_ratio_integral_form(params: &RotorParams) -> Result<f64> {
    let m = fourier_masses(&params.base)?;
    let m0 = m[0];
    let l = params.base.l;
    let mut log_delta = 0.0;
    for k in 0..l {
        let s2 = (PI * k as f64 / l as f64).sin().powi(2);
        if k >= 1 {
            log_delta += ((1.0 + 4.0 * s2) / (1.0 + 4.0 * s2 - m0 / m[k])).ln();
        }
        let a = m0.sqrt() / m[k];
        let q = integrate_to_infinity(
            |x| m[k] * x * (a / x).atan() / tau_plus_one(m[k], s2, x),
            0.0,
            QuadConfig::default(),
        )?;
        log_delta += 2.0 / PI * q.value;
    }
    Ok(log_delta.exp())
}
