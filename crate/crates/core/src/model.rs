//! Model parameters and the coupling-function families shared by every model.
//!
//! A coupling table `f(0..L)` describes the long-range interaction
//! `sum_ij f(|i-j|) O_i O_j` on a periodic chain. Every table handed out by
//! this module satisfies `f(r) == f(L - r)` and `|f(r)| <= 1`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inverse temperature. `Infinite` selects the ground-state limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Beta {
    Finite(f64),
    Infinite,
}

impl Beta {
    pub fn value(self) -> f64 {
        match self {
            Beta::Finite(b) => b,
            Beta::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Beta::Finite(b) => write!(f, "{b}"),
            Beta::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Beta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinite" | "infinity" => Ok(Beta::Infinite),
            other => {
                let b: f64 = other
                    .parse()
                    .map_err(|_| Error::InvalidParams(format!("beta: cannot parse {other:?}")))?;
                if !(b > 0.0) {
                    return Err(Error::InvalidParams(format!("beta must be positive, got {b}")));
                }
                Ok(if b.is_infinite() { Beta::Infinite } else { Beta::Finite(b) })
            }
        }
    }
}

/// The coupling family `f(r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "table")]
pub enum CouplingKind {
    /// `f(r) = 1 / (4 L^alpha)` for every `r`, including `r = 0`.
    AllToAll,
    /// `f(0) = 0`, `f(r) = c_alpha / min(r, L - r)^alpha` with `c_alpha = (1 - alpha) / 2^alpha`.
    PeriodicPowerLaw,
    /// Explicit table `f(0..L)`, validated by [`CouplingKind::custom`].
    Custom(Vec<f64>),
}

impl CouplingKind {
    /// Validates an explicit table eagerly.
    pub fn custom(table: Vec<f64>) -> Result<Self> {
        validate_table(&table)?;
        Ok(CouplingKind::Custom(table))
    }

    pub fn name(&self) -> &'static str {
        match self {
            CouplingKind::AllToAll => "all-to-all",
            CouplingKind::PeriodicPowerLaw => "power-law",
            CouplingKind::Custom(_) => "custom",
        }
    }
}

impl FromStr for CouplingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "all-to-all" | "alltoall" | "all_to_all" => Ok(CouplingKind::AllToAll),
            "power-law" | "powerlaw" | "periodic-power-law" => Ok(CouplingKind::PeriodicPowerLaw),
            _ => {
                if let Some(list) = s.strip_prefix("custom:") {
                    let table = list
                        .split(',')
                        .map(|v| v.trim().parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| Error::InvalidCoupling(format!("custom table: {e}")))?;
                    CouplingKind::custom(table)
                } else {
                    Err(Error::InvalidCoupling(format!("unknown coupling {s:?}")))
                }
            }
        }
    }
}

impl fmt::Display for CouplingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CouplingKind::Custom(table) => {
                f.write_str("custom:")?;
                for (i, v) in table.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
            other => f.write_str(other.name()),
        }
    }
}

fn validate_table(table: &[f64]) -> Result<()> {
    let l = table.len();
    if l < 2 {
        return Err(Error::InvalidCoupling(format!("table needs at least 2 entries, got {l}")));
    }
    for (r, &v) in table.iter().enumerate() {
        if !v.is_finite() || v.abs() > 1.0 {
            return Err(Error::InvalidCoupling(format!("|f({r})| = {v} violates |f| <= 1")));
        }
        let mirror = table[(l - r) % l];
        if v != mirror {
            return Err(Error::InvalidCoupling(format!(
                "f({r}) = {v} differs from f({}) = {mirror}",
                (l - r) % l
            )));
        }
    }
    Ok(())
}

/// Parameters shared by all three models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "L")]
    pub l: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub coupling: CouplingKind,
    pub beta: Beta,
}

impl ModelParams {
    pub fn new(l: usize, lambda: f64, alpha: f64, coupling: CouplingKind) -> Result<Self> {
        let params = ModelParams {
            l,
            lambda,
            alpha,
            coupling,
            beta: Beta::Infinite,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_beta(mut self, beta: Beta) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let mut p = self.clone();
        p.lambda = lambda;
        p.validate()?;
        Ok(p)
    }

    pub fn with_size(&self, l: usize) -> Result<Self> {
        let mut p = self.clone();
        p.l = l;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 2 {
            return Err(Error::InvalidParams(format!("L must be >= 2, got {}", self.l)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParams(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParams(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if let Beta::Finite(b) = self.beta {
            if !(b > 0.0) || !b.is_finite() {
                return Err(Error::InvalidParams(format!("beta must be positive, got {b}")));
            }
        }
        if let CouplingKind::Custom(table) = &self.coupling {
            validate_table(table)?;
            if table.len() != self.l {
                return Err(Error::InvalidCoupling(format!(
                    "table length {} does not match L = {}",
                    table.len(),
                    self.l
                )));
            }
        }
        Ok(())
    }

    /// Reads a flat `key = value` configuration. Unknown keys are returned
    /// as per-model extras; `#` starts a comment.
    pub fn from_kv_str(text: &str) -> Result<(Self, Vec<(String, String)>)> {
        let mut l = None;
        let mut lambda = None;
        let mut alpha = None;
        let mut coupling = CouplingKind::AllToAll;
        let mut beta = Beta::Infinite;
        let mut extras = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidParams(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| Error::InvalidParams(format!("line {}: cannot parse {what} {value:?}", lineno + 1));
            match key {
                "L" => l = Some(value.parse::<usize>().map_err(|_| bad("L"))?),
                "lambda" => lambda = Some(value.parse::<f64>().map_err(|_| bad("lambda"))?),
                "alpha" => alpha = Some(value.parse::<f64>().map_err(|_| bad("alpha"))?),
                "coupling" => coupling = value.parse()?,
                "beta" => beta = value.parse()?,
                _ => extras.push((key.to_string(), value.to_string())),
            }
        }
        let missing = |k: &str| Error::InvalidParams(format!("missing key {k}"));
        let params = ModelParams::new(
            l.ok_or_else(|| missing("L"))?,
            lambda.ok_or_else(|| missing("lambda"))?,
            alpha.ok_or_else(|| missing("alpha"))?,
            coupling,
        )?
        .with_beta(beta);
        params.validate()?;
        Ok((params, extras))
    }

    pub fn to_kv_string(&self) -> String {
        format!(
            "L = {}\nlambda = {}\nalpha = {}\ncoupling = {}\nbeta = {}\n",
            self.l, self.lambda, self.alpha, self.coupling, self.beta
        )
    }

    /// Canonical JSON (sorted keys, shortest round-trip floats).
    pub fn to_canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("params serialize");
        value.to_string()
    }
}

/// `c_alpha = (1 - alpha) / 2^alpha`.
pub fn power_law_prefactor(alpha: f64) -> f64 {
    (1.0 - alpha) / 2f64.powf(alpha)
}

/// Periodic distance `min(r, L - r)`.
pub fn periodic_distance(r: usize, l: usize) -> usize {
    let r = r % l;
    r.min(l - r)
}

/// The table `f(0), ..., f(L-1)`.
pub fn coupling_table(params: &ModelParams) -> Result<Vec<f64>> {
    params.validate()?;
    let l = params.l;
    let table = match &params.coupling {
        CouplingKind::AllToAll => vec![1.0 / (4.0 * (l as f64).powf(params.alpha)); l],
        CouplingKind::PeriodicPowerLaw => {
            let c = power_law_prefactor(params.alpha);
            (0..l)
                .map(|r| match periodic_distance(r, l) {
                    0 => 0.0,
                    d => c / (d as f64).powf(params.alpha),
                })
                .collect()
        }
        CouplingKind::Custom(table) => table.clone(),
    };
    debug_assert!(validate_table(&table).is_ok());
    Ok(table)
}

/// `sum_{r=0}^{L-1} f(r)`.
pub fn coupling_sum(params: &ModelParams) -> Result<f64> {
    Ok(coupling_table(params)?.iter().sum())
}

/// `1/m_k = 1 + 2 lambda sum_r cos(2 pi k r / L) f(r)` for every `k`.
pub fn inverse_masses(params: &ModelParams) -> Result<Vec<f64>> {
    let table = coupling_table(params)?;
    let l = params.l;
    Ok((0..l)
        .map(|k| {
            let s: f64 = if k == 0 {
                table.iter().sum()
            } else {
                table
                    .iter()
                    .enumerate()
                    .map(|(r, f)| f * (2.0 * PI * ((k * r) % l) as f64 / l as f64).cos())
                    .sum()
            };
            1.0 + 2.0 * params.lambda * s
        })
        .collect())
}

/// Mode mass `m_k`.
pub fn fourier_mass(params: &ModelParams, k: usize) -> Result<f64> {
    if k >= params.l {
        return Err(Error::InvalidParams(format!("mode k = {k} out of range for L = {}", params.l)));
    }
    let inv = inverse_masses(params)?[k];
    if inv <= 0.0 {
        return Err(Error::NonPositiveMass { k, inverse_mass: inv });
    }
    Ok(1.0 / inv)
}

/// All mode masses, failing on the first non-positive one.
pub fn fourier_masses(params: &ModelParams) -> Result<Vec<f64>> {
    inverse_masses(params)?
        .into_iter()
        .enumerate()
        .map(|(k, inv)| {
            if inv <= 0.0 {
                Err(Error::NonPositiveMass { k, inverse_mass: inv })
            } else {
                Ok(1.0 / inv)
            }
        })
        .collect()
}

/// True iff every `1/m_k` is strictly positive.
pub fn check_positive_definite(params: &ModelParams) -> Result<bool> {
    Ok(inverse_masses(params)?.into_iter().all(|inv| inv > 0.0))
}

/// Largest `lambda_0` such that the mass matrix stays positive definite for
/// `0 <= lambda < lambda_0`; infinite when no Fourier component of `f` is negative.
pub fn positive_definite_window(params: &ModelParams) -> Result<f64> {
    let unit = params.with_lambda(0.5)?;
    // with lambda = 1/2, 1/m_k - 1 is exactly the Fourier component of f
    let min_component = inverse_masses(&unit)?
        .into_iter()
        .map(|inv| inv - 1.0)
        .fold(f64::INFINITY, f64::min);
    Ok(if min_component < 0.0 {
        -1.0 / (2.0 * min_component)
    } else {
        f64::INFINITY
    })
}
