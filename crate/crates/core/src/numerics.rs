//! Small numerical kernels: adaptive Gauss-Kronrod quadrature, bisection,
//! and a thin wrapper over the dense symmetric eigensolver.

use std::collections::BinaryHeap;

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// 21-point Kronrod abscissae on [0, 1] (descending); odd entries are the
// 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_352,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_5,
    0.149_445_554_002_916_9,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            abs_tol: 1e-300,
            rel_tol: 1e-12,
            max_intervals: 20_000,
        }
    }
}

impl QuadConfig {
    pub fn tightened(self, factor: f64) -> Self {
        QuadConfig {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            max_intervals: self.max_intervals * 4,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    for (i, (&x, &w)) in XGK[..10].iter().zip(&WGK[..10]).enumerate() {
        let pair = f(center - half * x) + f(center + half * x);
        kronrod += w * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss-Kronrod (10/21) quadrature on a finite interval.
/// The integrand is never evaluated at the endpoints.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: QuadConfig) -> Result<QuadResult> {
    integrate_breakpoints(f, &[a, b], cfg)
}

/// As [`integrate`], starting from the partition given by the increasing
/// `points`. Useful when the integrand has a narrow feature the first
/// Kronrod rule could step over.
pub fn integrate_breakpoints<F: Fn(f64) -> f64>(f: F, points: &[f64], cfg: QuadConfig) -> Result<QuadResult> {
    assert!(points.len() >= 2, "need at least one interval");
    let (a, b) = (points[0], points[points.len() - 1]);
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in points.windows(2) {
        let (value, error) = gk21(&f, w[0], w[1]);
        total += value;
        total_err += error;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }
    let mut intervals = heap.len();
    loop {
        if !total.is_finite() {
            return Err(Error::QuadratureNotConverged(format!(
                "non-finite integrand on [{a}, {b}]"
            )));
        }
        if total_err <= cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
            break;
        }
        if intervals >= cfg.max_intervals.max(points.len()) {
            return Err(Error::QuadratureNotConverged(format!(
                "error estimate {total_err:e} after {intervals} intervals on [{a}, {b}]"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // interval cannot be split further; accept what we have
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk21(&f, worst.a, mid);
        let (v2, e2) = gk21(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        intervals += 1;
    }
    // re-sum to shed accumulated update rounding
    let value = heap.iter().map(|s| s.value).sum();
    let error = heap.iter().map(|s| s.error).sum();
    Ok(QuadResult {
        value,
        error,
        intervals,
    })
}

/// `int_a^inf f(x) dx` via `x = a + t / (1 - t)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, cfg: QuadConfig) -> Result<QuadResult> {
    integrate(
        |t| {
            let s = 1.0 - t;
            f(a + t / s) / (s * s)
        },
        0.0,
        1.0,
        cfg,
    )
}

/// Evaluates with `cfg` and with a 100x tighter configuration; fails if the
/// two differ by more than `cauchy_rel` relative.
pub fn integrate_checked<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    cfg: QuadConfig,
    cauchy_rel: f64,
) -> Result<QuadResult> {
    let coarse = integrate(&f, a, b, cfg)?;
    let fine = integrate(&f, a, b, cfg.tightened(1e-2))?;
    let diff = (fine.value - coarse.value).abs();
    if diff > cauchy_rel * fine.value.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::QuadratureNotConverged(format!(
            "refinements differ by {diff:e} (values {} and {})",
            coarse.value, fine.value
        )));
    }
    Ok(fine)
}

/// Bisection on a sign change. Runs until the bracket is narrower than `tol`
/// or can no longer be split in floating point. Returns `Err((f(lo), f(hi)))`
/// when the endpoints do not bracket a root.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> std::result::Result<f64, (f64, f64)> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err((f_lo, f_hi));
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
}

/// Eigen-decomposition of a dense real symmetric matrix given row-major
/// (only the lower triangle is read). Eigenvalues ascend.
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Column `j` is the eigenvector of `values[j]`.
    pub vectors: Option<Mat<f64>>,
}

pub fn symmetric_eigen(n: usize, entries: &[f64], vectors: bool) -> Result<SymmetricEigen> {
    assert_eq!(entries.len(), n * n);
    let m = Mat::from_fn(n, n, |i, j| entries[i * n + j]);
    let fail = |_| Error::NotConverged {
        iterations: 0,
        estimate: f64::NAN,
        residual: f64::NAN,
    };
    if vectors {
        let evd = m.self_adjoint_eigen(Side::Lower).map_err(fail)?;
        let s = evd.S().column_vector();
        let values = (0..n).map(|i| s[i]).collect();
        Ok(SymmetricEigen {
            values,
            vectors: Some(evd.U().to_owned()),
        })
    } else {
        let values = m.self_adjoint_eigenvalues(Side::Lower).map_err(fail)?;
        Ok(SymmetricEigen { values, vectors: None })
    }
}
