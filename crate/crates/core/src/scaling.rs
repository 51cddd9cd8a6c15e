//! Stretched-exponential fits `-log delta = C L^p (+ b log L)` to
//! size-resolved splittings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    #[serde(rename = "L")]
    pub l: usize,
    pub log_delta: f64,
    /// Uncertainty of `log_delta`; zero means unknown.
    #[serde(default)]
    pub err: f64,
}

/// Points sorted by L, with a tag naming where they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingDataset {
    pub points: Vec<ScalingPoint>,
    pub source: String,
}

impl ScalingDataset {
    /// Sorts by L and rejects duplicates, non-finite values and negative
    /// errors.
    pub fn new(mut points: Vec<ScalingPoint>, source: impl Into<String>) -> Result<Self> {
        points.sort_by_key(|p| p.l);
        if points.windows(2).any(|w| w[0].l == w[1].l) {
            return Err(Error::InvalidParams("duplicate L in scaling dataset".into()));
        }
        for p in &points {
            if !p.log_delta.is_finite() {
                return Err(Error::InvalidParams(format!("log delta at L = {} is not finite", p.l)));
            }
            if !(p.err >= 0.0) {
                return Err(Error::InvalidParams(format!("negative error at L = {}", p.l)));
            }
        }
        Ok(ScalingDataset {
            points,
            source: source.into(),
        })
    }

    pub fn from_pairs(pairs: &[(usize, f64)], source: impl Into<String>) -> Result<Self> {
        let points = pairs
            .iter()
            .map(|&(l, log_delta)| ScalingPoint { l, log_delta, err: 0.0 })
            .collect();
        ScalingDataset::new(points, source)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn log_log(&self) -> Result<Vec<(f64, f64)>> {
        self.points
            .iter()
            .map(|p| {
                if p.log_delta < 0.0 {
                    Ok(((p.l as f64).ln(), (-p.log_delta).ln()))
                } else {
                    Err(Error::DegenerateFit(format!(
                        "log delta = {} at L = {} is not negative",
                        p.log_delta, p.l
                    )))
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    /// `-log delta = C L^p`
    PurePower,
    /// `-log delta = C L^p + b log L`
    PowerLog,
    /// Log correction with five or more points, pure power otherwise.
    #[default]
    Auto,
}

impl std::str::FromStr for FitModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pure-power" | "power" => Ok(FitModel::PurePower),
            "power-log" => Ok(FitModel::PowerLog),
            "auto" => Ok(FitModel::Auto),
            _ => Err(Error::InvalidParams(format!("unknown fit model '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub source: String,
    pub model: FitModel,
    #[serde(rename = "C")]
    pub c: f64,
    pub p: f64,
    /// Coefficient of `log L` when the log-corrected model was fitted.
    pub b: Option<f64>,
    /// Exponent and prefactor from the log-log regression alone.
    pub p_loglog: f64,
    pub c_loglog: f64,
    /// RMS of `-log delta` residuals.
    pub residual_rms: f64,
    pub local_slopes: Vec<f64>,
    pub n_points: usize,
    pub gauss_newton_iterations: usize,
}

impl FitReport {
    /// Model value of `-log delta` at size `l`.
    pub fn predict(&self, l: f64) -> f64 {
        self.c * l.powf(self.p) + self.b.unwrap_or(0.0) * l.ln()
    }
}

/// Slopes of `log(-log delta)` against `log L` between neighbouring sizes.
pub fn local_slopes(data: &ScalingDataset) -> Result<Vec<f64>> {
    if data.len() < 2 {
        return Err(Error::DegenerateFit(format!("{} points, need at least 2", data.len())));
    }
    let xy = data.log_log()?;
    Ok(xy.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect())
}

/// Ordinary least squares `y = a + s x`; returns `(a, s)`.
fn linear_regression(xy: &[(f64, f64)]) -> Result<(f64, f64)> {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 1e-300) {
        return Err(Error::DegenerateFit("all sizes coincide".into()));
    }
    let s = sxy / sxx;
    Ok((my - s * mx, s))
}

/// Solves the small symmetric system `a x = r` by Gaussian elimination with
/// partial pivoting.
fn solve_small(mut a: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (r[i] - s) / a[i][i];
    }
    Some(x)
}

const GN_MAX_ITER: usize = 200;

/// Weighted Gauss-Newton with Levenberg damping on `y = C L^p (+ b log L)`.
/// Returns the parameters and the iteration count.
fn gauss_newton(ls: &[f64], ys: &[f64], ws: &[f64], start: Vec<f64>) -> Result<(Vec<f64>, usize)> {
    let with_log = start.len() == 3;
    let model = |q: &[f64], l: f64| q[0] * l.powf(q[1]) + if with_log { q[2] * l.ln() } else { 0.0 };
    let cost = |q: &[f64]| -> f64 {
        ls.iter()
            .zip(ys)
            .zip(ws)
            .map(|((&l, &y), &w)| w * (y - model(q, l)).powi(2))
            .sum()
    };
    let n = start.len();
    let mut q = start;
    let mut current = cost(&q);
    let mut mu = 1e-6;
    for iter in 1..=GN_MAX_ITER {
        let mut jtj = vec![vec![0.0; n]; n];
        let mut jtr = vec![0.0; n];
        for ((&l, &y), &w) in ls.iter().zip(ys).zip(ws) {
            let lp = l.powf(q[1]);
            let mut row = vec![lp, q[0] * lp * l.ln()];
            if with_log {
                row.push(l.ln());
            }
            let r = y - model(&q, l);
            for i in 0..n {
                jtr[i] += w * row[i] * r;
                for j in 0..n {
                    jtj[i][j] += w * row[i] * row[j];
                }
            }
        }
        let trace: f64 = (0..n).map(|i| jtj[i][i]).sum();
        if !(trace > 0.0) {
            return Err(Error::DegenerateFit("vanishing Jacobian".into()));
        }
        let mut accepted = false;
        for _ in 0..40 {
            let mut damped = jtj.clone();
            for (i, row) in damped.iter_mut().enumerate() {
                row[i] += mu * jtj[i][i].max(1e-12 * trace);
            }
            let Some(step) = solve_small(damped, jtr.clone()) else {
                mu *= 10.0;
                continue;
            };
            let trial: Vec<f64> = q.iter().zip(&step).map(|(a, s)| a + s).collect();
            let c = cost(&trial);
            if c <= current {
                let small = step
                    .iter()
                    .zip(&trial)
                    .all(|(s, v)| s.abs() <= 1e-13 * v.abs().max(1e-300));
                q = trial;
                current = c;
                mu = (mu * 0.1).max(1e-12);
                accepted = true;
                if small {
                    return Ok((q, iter));
                }
                break;
            }
            mu *= 10.0;
        }
        if !accepted {
            // no descent direction left: at the minimum to rounding
            return Ok((q, iter));
        }
    }
    Ok((q, GN_MAX_ITER))
}

/// Fits `-log delta = C L^p (+ b log L)`.
///
/// Stage one regresses `log(-log delta)` on `log L`; stage two refines
/// `C, p` (and `b`) by Gauss-Newton on `-log delta` itself, weighted by
/// `1/err^2` when every point carries a positive error and uniformly
/// otherwise.
pub fn fit_stretched(data: &ScalingDataset, model: FitModel) -> Result<FitReport> {
    let n = data.len();
    if n < 3 {
        return Err(Error::DegenerateFit(format!("{n} points, need at least 3")));
    }
    let with_log = match model {
        FitModel::PurePower => false,
        FitModel::PowerLog => true,
        FitModel::Auto => n >= 5,
    };
    if with_log && n < 4 {
        return Err(Error::DegenerateFit("the log-corrected model needs at least 4 points".into()));
    }
    let xy = data.log_log()?;
    let (log_c, p_loglog) = linear_regression(&xy)?;
    let c_loglog = log_c.exp();
    let ls: Vec<f64> = data.points.iter().map(|p| p.l as f64).collect();
    let ys: Vec<f64> = data.points.iter().map(|p| -p.log_delta).collect();
    let weighted = data.points.iter().all(|p| p.err > 0.0);
    let ws: Vec<f64> = data
        .points
        .iter()
        .map(|p| if weighted { 1.0 / (p.err * p.err) } else { 1.0 })
        .collect();
    let mut start = vec![c_loglog, p_loglog];
    if with_log {
        start.push(0.0);
    }
    let (q, iterations) = gauss_newton(&ls, &ys, &ws, start)?;
    if !q.iter().all(|v| v.is_finite()) {
        return Err(Error::DegenerateFit("refinement diverged".into()));
    }
    let b = with_log.then(|| q[2]);
    let mut report = FitReport {
        source: data.source.clone(),
        model: if with_log { FitModel::PowerLog } else { FitModel::PurePower },
        c: q[0],
        p: q[1],
        b,
        p_loglog,
        c_loglog,
        residual_rms: 0.0,
        local_slopes: local_slopes(data)?,
        n_points: n,
        gauss_newton_iterations: iterations,
    };
    let ss: f64 = ls
        .iter()
        .zip(&ys)
        .map(|(&l, &y)| (y - report.predict(l)).powi(2))
        .sum();
    report.residual_rms = (ss / n as f64).sqrt();
    Ok(report)
}
