//! Exact diagonalization of the long-range Ising chain
//! `H = -sum_j sz_j sz_{j+1} + lambda sum_ij f(i-j) sx_i sx_j`
//! in the eigenbasis of `sx`, resolved by the parity `S = prod_j sx_j`.
//!
//! A basis state is a bitstring with bit `j` set when `x_j = -1`; the parity
//! sector fixes the number of set bits mod 2. Bit 0 is determined by the
//! others, so the index of a state is the bitstring shifted right by one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{coupling_table, ModelParams};
use crate::numerics::symmetric_eigen;

/// Largest L accepted by the dense sector solver.
pub const DENSE_LIMIT: usize = 14;
/// Largest L accepted by the full-spectrum thermal path.
pub const THERMAL_LIMIT: usize = 12;
/// Largest L accepted by the matrix-free solver (memory guard).
pub const LANCZOS_LIMIT: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParitySector {
    Plus,
    Minus,
}

impl ParitySector {
    pub const BOTH: [ParitySector; 2] = [ParitySector::Plus, ParitySector::Minus];

    pub fn sign(self) -> i8 {
        match self {
            ParitySector::Plus => 1,
            ParitySector::Minus => -1,
        }
    }

    /// Parity of the down-x count in this sector.
    fn odd(self) -> u64 {
        match self {
            ParitySector::Plus => 0,
            ParitySector::Minus => 1,
        }
    }
}

/// Bijection between sector states and `0..2^(L-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisIndexer {
    pub l: usize,
    pub sector: ParitySector,
}

impl BasisIndexer {
    pub fn new(l: usize, sector: ParitySector) -> Result<Self> {
        if !(2..=63).contains(&l) {
            return Err(Error::InvalidParams(format!("L = {l} outside the supported range 2..=63")));
        }
        Ok(BasisIndexer { l, sector })
    }

    pub fn dim(&self) -> usize {
        1usize << (self.l - 1)
    }

    pub fn state(&self, index: usize) -> u64 {
        let high = (index as u64) << 1;
        high | ((high.count_ones() as u64 & 1) ^ self.sector.odd())
    }

    pub fn index(&self, state: u64) -> usize {
        (state >> 1) as usize
    }

    pub fn contains(&self, state: u64) -> bool {
        state < (1u64 << self.l) && (state.count_ones() as u64 & 1) == self.sector.odd()
    }

    /// Masks flipping the pair `(j, j+1 mod L)` for each bond.
    fn bond_masks(&self) -> Vec<u64> {
        (0..self.l).map(|j| (1u64 << j) | (1u64 << ((j + 1) % self.l))).collect()
    }
}

/// `sum_ij f(i-j) x_i x_j` for one bitstring.
fn interaction_energy(state: u64, table: &[f64]) -> f64 {
    let l = table.len();
    let x: Vec<f64> = (0..l).map(|j| if state >> j & 1 == 1 { -1.0 } else { 1.0 }).collect();
    // sum_r f(r) sum_i x_i x_{i+r}
    table
        .iter()
        .enumerate()
        .map(|(r, f)| {
            if *f == 0.0 {
                return 0.0;
            }
            let c: f64 = (0..l).map(|i| x[i] * x[(i + r) % l]).sum();
            f * c
        })
        .sum()
}

/// Sector Hamiltonian in matrix-free form. Holds the diagonal `lambda V`.
#[derive(Debug, Clone)]
pub struct SectorHamiltonian {
    pub basis: BasisIndexer,
    diag: Vec<f64>,
    masks: Vec<u64>,
}

impl SectorHamiltonian {
    pub fn new(params: &ModelParams, sector: ParitySector) -> Result<Self> {
        let basis = BasisIndexer::new(params.l, sector)?;
        if params.l > LANCZOS_LIMIT {
            return Err(Error::TooLarge {
                l: params.l,
                limit: LANCZOS_LIMIT,
            });
        }
        let table = coupling_table(params)?;
        let lambda = params.lambda;
        let diag = (0..basis.dim())
            .into_par_iter()
            .map(|i| lambda * interaction_energy(basis.state(i), &table))
            .collect();
        Ok(SectorHamiltonian {
            masks: basis.bond_masks(),
            basis,
            diag,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Diagonal entries `lambda V(b)`.
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// `out = H v`. Each output entry is written by exactly one task, so the
    /// result does not depend on the thread count.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.dim();
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
        if out.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: out.len(),
            });
        }
        out.par_iter_mut().enumerate().with_min_len(1024).for_each(|(i, o)| {
            let b = self.basis.state(i);
            let mut acc = self.diag[i] * v[i];
            for &m in &self.masks {
                acc -= v[self.basis.index(b ^ m)];
            }
            *o = acc;
        });
        Ok(())
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(v, &mut out)?;
        Ok(out)
    }

    /// Row-major dense matrix of this sector.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            let b = self.basis.state(i);
            m[i * n + i] += self.diag[i];
            for &mask in &self.masks {
                m[i * n + self.basis.index(b ^ mask)] -= 1.0;
            }
        }
        m
    }
}

/// `H v` restricted to one parity sector.
pub fn apply_hamiltonian(params: &ModelParams, sector: ParitySector, v: &[f64]) -> Result<Vec<f64>> {
    SectorHamiltonian::new(params, sector)?.apply(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lanczos,
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigensolverConfig {
    pub method: Method,
    pub max_iterations: usize,
    /// Absolute tolerance on each sector ground energy.
    pub tol: f64,
    pub seed: u64,
}

impl Default for EigensolverConfig {
    fn default() -> Self {
        EigensolverConfig {
            method: Method::Lanczos,
            max_iterations: 1000,
            tol: 1e-12,
            seed: 0x5EED,
        }
    }
}

/// Lowest eigenvalue of one sector with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorGround {
    pub energy: f64,
    /// Explicit residual norm `|H y - E y|` of the returned Ritz vector.
    pub residual: f64,
    /// Bound on `|E - E_exact|`.
    pub err_bound: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    #[serde(rename = "E_plus")]
    pub e_plus: f64,
    #[serde(rename = "E_minus")]
    pub e_minus: f64,
    pub delta: f64,
    /// Sum of the two per-sector error bounds.
    pub err_bound: f64,
    pub residual_norms: [f64; 2],
    pub iterations: [usize; 2],
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    // two passes of classical Gram-Schmidt
    for _ in 0..2 {
        let coeffs: Vec<f64> = basis.par_iter().map(|q| dot(q, w)).collect();
        for (q, c) in basis.iter().zip(coeffs) {
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= c * qi;
            }
        }
    }
}

/// Eigenpairs of the symmetric tridiagonal matrix with diagonal `a` and
/// off-diagonal `b`.
fn tridiagonal_eigen(a: &[f64], b: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = a.len();
    let mut dense = vec![0.0; m * m];
    for i in 0..m {
        dense[i * m + i] = a[i];
        if i + 1 < m {
            dense[(i + 1) * m + i] = b[i];
            dense[i * m + i + 1] = b[i];
        }
    }
    let eig = symmetric_eigen(m, &dense, true)?;
    let v = eig.vectors.expect("requested vectors");
    let ground = (0..m).map(|i| v[(i, 0)]).collect();
    Ok((eig.values, ground))
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let s = 1.0 / norm(&v);
    v.iter_mut().for_each(|x| *x *= s);
    v
}

/// Krylov dimension reached before convergence is accepted, guarding
/// against a start vector that is nearly orthogonal to the ground state.
const MIN_KRYLOV: usize = 12;

/// Lowest eigenvalue by Lanczos with full reorthogonalization.
pub fn lanczos_ground(h: &SectorHamiltonian, config: &EigensolverConfig) -> Result<SectorGround> {
    let n = h.dim();
    if n <= 4 {
        return dense_ground(h);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let max_iter = config.max_iterations.min(n);
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(max_iter.min(512));
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut current = random_unit(n, &mut rng);
    let mut w = vec![0.0; n];
    let mut best = (f64::NAN, f64::INFINITY);

    for j in 0..max_iter {
        h.apply_into(&current, &mut w)?;
        let alpha = dot(&current, &w);
        alphas.push(alpha);
        q.push(current.clone());
        orthogonalize(&mut w, &q);
        let mut beta = norm(&w);
        let exhausted = q.len() == n;

        let check = j < 8 || j % 4 == 3 || beta < 1e-14 || exhausted || j + 1 == max_iter;
        if check {
            let (theta, s) = tridiagonal_eigen(&alphas, &betas)?;
            let r_est = beta * s.last().unwrap().abs();
            // a single Ritz value gives no gap information
            let gap = if theta.len() > 1 { theta[1] - theta[0] } else { 0.0 };
            let bound = if gap > 0.0 { r_est.min(r_est * r_est / gap) } else { r_est };
            best = (theta[0], bound);
            let warmed_up = q.len() >= MIN_KRYLOV.min(n);
            if (bound <= config.tol && warmed_up) || exhausted {
                // explicit Ritz vector and residual
                let mut y = vec![0.0; n];
                for (qi, si) in q.iter().zip(&s) {
                    for (yk, qk) in y.iter_mut().zip(qi) {
                        *yk += si * qk;
                    }
                }
                let yn = norm(&y);
                y.iter_mut().for_each(|x| *x /= yn);
                let hy = h.apply(&y)?;
                let energy = dot(&y, &hy);
                let res: Vec<f64> = hy.iter().zip(&y).map(|(a, b)| a - energy * b).collect();
                let residual = norm(&res);
                let err_bound = if gap > 0.0 {
                    residual.min(residual * residual / gap)
                } else {
                    residual
                };
                if err_bound <= config.tol.max(64.0 * f64::EPSILON * energy.abs().max(1.0)) || exhausted {
                    return Ok(SectorGround {
                        energy,
                        residual,
                        err_bound,
                        iterations: j + 1,
                    });
                }
            }
        }

        if beta < 1e-14 {
            // invariant subspace; restart with a fresh direction orthogonal to it
            let mut fresh = random_unit(n, &mut rng);
            orthogonalize(&mut fresh, &q);
            let fnorm = norm(&fresh);
            fresh.iter_mut().for_each(|x| *x /= fnorm);
            current = fresh;
            beta = 0.0;
        } else {
            current = w.iter().map(|x| x / beta).collect();
        }
        betas.push(beta);
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        estimate: best.0,
        residual: best.1,
    })
}

/// Lowest eigenvalue by dense diagonalization of the sector block.
pub fn dense_ground(h: &SectorHamiltonian) -> Result<SectorGround> {
    if h.basis.l > DENSE_LIMIT {
        return Err(Error::TooLarge {
            l: h.basis.l,
            limit: DENSE_LIMIT,
        });
    }
    let eig = symmetric_eigen(h.dim(), &h.to_dense(), false)?;
    Ok(SectorGround {
        energy: eig.values[0],
        residual: 0.0,
        err_bound: 64.0 * f64::EPSILON * eig.values[0].abs().max(1.0),
        iterations: 0,
    })
}

pub fn sector_ground(params: &ModelParams, sector: ParitySector, config: &EigensolverConfig) -> Result<SectorGround> {
    let h = SectorHamiltonian::new(params, sector)?;
    match config.method {
        Method::Lanczos => lanczos_ground(&h, config),
        Method::Dense => dense_ground(&h),
    }
}

/// Ground-state splitting `delta = E_minus - E_plus`. Requires even L.
pub fn splitting_ed(params: &ModelParams, config: &EigensolverConfig) -> Result<SpectralResult> {
    params.validate()?;
    if params.l % 2 != 0 {
        return Err(Error::InvalidParams(format!("chain splitting needs even L, got {}", params.l)));
    }
    if config.method == Method::Dense && params.l > DENSE_LIMIT {
        return Err(Error::TooLarge {
            l: params.l,
            limit: DENSE_LIMIT,
        });
    }
    let plus = sector_ground(params, ParitySector::Plus, config)?;
    let minus = sector_ground(params, ParitySector::Minus, config)?;
    Ok(SpectralResult {
        e_plus: plus.energy,
        e_minus: minus.energy,
        delta: minus.energy - plus.energy,
        err_bound: plus.err_bound + minus.err_bound,
        residual_norms: [plus.residual, minus.residual],
        iterations: [plus.iterations, minus.iterations],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalResult {
    pub beta: f64,
    pub s_beta: f64,
    #[serde(rename = "deltaF_beta")]
    pub delta_f_beta: f64,
    /// Thermal `<sz_j sz_{j+1}>`.
    pub zz_corr: f64,
}

/// Full spectra of both sectors with the diagonal of `H_0` in each eigenstate.
#[derive(Debug, Clone)]
pub struct FullSpectrum {
    pub l: usize,
    /// Per sector: eigenvalues and `<n|H_0|n>`.
    pub sectors: [(Vec<f64>, Vec<f64>); 2],
}

impl FullSpectrum {
    pub fn new(params: &ModelParams) -> Result<Self> {
        if params.l > THERMAL_LIMIT {
            return Err(Error::TooLarge {
                l: params.l,
                limit: THERMAL_LIMIT,
            });
        }
        let solve = |sector| -> Result<(Vec<f64>, Vec<f64>)> {
            let h = SectorHamiltonian::new(params, sector)?;
            let n = h.dim();
            let eig = symmetric_eigen(n, &h.to_dense(), true)?;
            let u = eig.vectors.expect("requested vectors");
            // <n|H_0|n> = E_n - <n|lambda V|n>
            let h0 = (0..n)
                .map(|k| eig.values[k] - (0..n).map(|b| u[(b, k)] * u[(b, k)] * h.diagonal()[b]).sum::<f64>())
                .collect();
            Ok((eig.values, h0))
        };
        Ok(FullSpectrum {
            l: params.l,
            sectors: [solve(ParitySector::Plus)?, solve(ParitySector::Minus)?],
        })
    }

    pub fn thermal(&self, beta: f64) -> Result<ThermalResult> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParams(format!("beta must be finite and positive, got {beta}")));
        }
        let e_min = self
            .sectors
            .iter()
            .flat_map(|(e, _)| e.iter().copied())
            .fold(f64::INFINITY, f64::min);
        // shifted partition sums and H_0 moments
        let sums: Vec<(f64, f64)> = self
            .sectors
            .iter()
            .map(|(e, h0)| {
                e.iter().zip(h0).fold((0.0, 0.0), |(z, m), (en, hn)| {
                    let w = (-beta * (en - e_min)).exp();
                    (z + w, m + w * hn)
                })
            })
            .collect();
        let (zp, mp) = sums[0];
        let (zm, mm) = sums[1];
        let d = zp.ln() - zm.ln();
        Ok(ThermalResult {
            beta,
            s_beta: (0.5 * d).tanh(),
            delta_f_beta: d / beta,
            zz_corr: -(mp + mm) / (zp + zm) / self.l as f64,
        })
    }
}

pub fn thermal_observables(params: &ModelParams, beta: f64) -> Result<ThermalResult> {
    FullSpectrum::new(params)?.thermal(beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CouplingKind;
    use proptest::prelude::*;

    fn params(l: usize, lambda: f64, alpha: f64, kind: CouplingKind) -> ModelParams {
        ModelParams::new(l, lambda, alpha, kind).unwrap()
    }

    /// Full 2^L Hamiltonian built independently in the sz basis.
    fn full_z_basis(p: &ModelParams) -> Vec<f64> {
        let l = p.l;
        let n = 1usize << l;
        let table = coupling_table(p).unwrap();
        let mut h = vec![0.0; n * n];
        for s in 0..n {
            let z = |j: usize| if s >> (j % l) & 1 == 1 { -1.0 } else { 1.0 };
            for j in 0..l {
                h[s * n + s] -= z(j) * z(j + 1);
            }
            for i in 0..l {
                for k in 0..l {
                    let r = (i + l - k) % l;
                    let t = s ^ (1 << i) ^ (1 << k);
                    h[t * n + s] += p.lambda * table[r];
                }
            }
        }
        h
    }

    #[test]
    fn index_round_trip_and_parity() {
        for l in 2..=10 {
            for sector in ParitySector::BOTH {
                let b = BasisIndexer::new(l, sector).unwrap();
                for i in 0..b.dim() {
                    let s = b.state(i);
                    assert!(b.contains(s));
                    assert_eq!(b.index(s), i);
                }
            }
        }
    }

    #[test]
    fn unperturbed_action_on_all_up_state() {
        let p = params(4, 0.0, 0.5, CouplingKind::AllToAll);
        let h = SectorHamiltonian::new(&p, ParitySector::Plus).unwrap();
        let b = h.basis;
        let mut v = vec![0.0; h.dim()];
        v[b.index(0)] = 1.0;
        let out = h.apply(&v).unwrap();
        assert_eq!(out[b.index(0)], 0.0);
        for mask in [0b0011u64, 0b0110, 0b1100, 0b1001] {
            assert_eq!(out[b.index(mask)], -1.0);
        }
        assert_eq!(out.iter().filter(|x| **x != 0.0).count(), 4);
    }

    #[test]
    fn all_to_all_diagonal() {
        let p = params(6, 0.7, 0.5, CouplingKind::AllToAll);
        let h = SectorHamiltonian::new(&p, ParitySector::Plus).unwrap();
        let pref = 0.7 / (4.0 * 6f64.sqrt());
        assert!((h.diagonal()[0] - pref * 36.0).abs() < 1e-13);
        for i in 0..h.dim() {
            let s = h.basis.state(i);
            let m = 6.0 - 2.0 * s.count_ones() as f64;
            assert!((h.diagonal()[i] - pref * m * m).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_full_z_basis_spectrum() {
        for (l, kind) in [(4, CouplingKind::AllToAll), (5, CouplingKind::PeriodicPowerLaw), (6, CouplingKind::AllToAll)] {
            let p = params(l, 0.5, 0.5, kind);
            let full = symmetric_eigen(1 << l, &full_z_basis(&p), false).unwrap().values;
            let mut sectors: Vec<f64> = ParitySector::BOTH
                .iter()
                .flat_map(|s| {
                    let h = SectorHamiltonian::new(&p, *s).unwrap();
                    symmetric_eigen(h.dim(), &h.to_dense(), false).unwrap().values
                })
                .collect();
            sectors.sort_by(f64::total_cmp);
            for (a, b) in full.iter().zip(&sectors) {
                assert!((a - b).abs() < 1e-11, "L={l}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn small_splitting_matches_dense_oracle() {
        let p = params(4, 0.5, 0.5, CouplingKind::AllToAll);
        let r = splitting_ed(&p, &EigensolverConfig::default()).unwrap();
        // oracle: ground states of the 16x16 sz-basis matrix, split by parity
        let full = symmetric_eigen(16, &full_z_basis(&p), true).unwrap();
        let u = full.vectors.unwrap();
        let parity_of = |k: usize| -> f64 {
            // <S> with S flipping every spin: sum_s u_s u_{s^1111}
            (0..16).map(|s| u[(s, k)] * u[(s ^ 0b1111, k)]).sum()
        };
        let mut e_plus = f64::NAN;
        let mut e_minus = f64::NAN;
        for k in 0..16 {
            let s = parity_of(k);
            if s > 0.5 && e_plus.is_nan() {
                e_plus = full.values[k];
            }
            if s < -0.5 && e_minus.is_nan() {
                e_minus = full.values[k];
            }
        }
        assert!((r.delta - (e_minus - e_plus)).abs() < 1e-12, "{} vs {}", r.delta, e_minus - e_plus);
        assert_eq!(r.delta, r.e_minus - r.e_plus);
    }

    #[test]
    fn unperturbed_splitting_vanishes() {
        for kind in [CouplingKind::AllToAll, CouplingKind::PeriodicPowerLaw] {
            let r = splitting_ed(&params(8, 0.0, 0.5, kind), &EigensolverConfig::default()).unwrap();
            assert!(r.delta.abs() < 1e-12);
            assert!((r.e_plus + 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        let dense = EigensolverConfig {
            method: Method::Dense,
            ..Default::default()
        };
        for l in [3, 6, 9] {
            for lambda in [0.0, 0.3, 1.0] {
                let p = params(l, lambda, 0.3, CouplingKind::PeriodicPowerLaw);
                for s in ParitySector::BOTH {
                    let a = sector_ground(&p, s, &EigensolverConfig::default()).unwrap();
                    let b = sector_ground(&p, s, &dense).unwrap();
                    assert!((a.energy - b.energy).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn seed_independence() {
        let p = params(12, 1.0, 0.5, CouplingKind::AllToAll);
        let a = splitting_ed(&p, &EigensolverConfig::default()).unwrap();
        let b = splitting_ed(
            &p,
            &EigensolverConfig {
                seed: 99,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((a.delta - b.delta).abs() <= a.err_bound + b.err_bound + 1e-13);
    }

    #[test]
    fn matvec_is_thread_count_independent() {
        let p = params(12, 0.8, 0.4, CouplingKind::PeriodicPowerLaw);
        let h = SectorHamiltonian::new(&p, ParitySector::Minus).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = random_unit(h.dim(), &mut rng);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let a = one.install(|| h.apply(&v).unwrap());
        let b = h.apply(&v).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = params(4, 0.1, 0.5, CouplingKind::AllToAll);
        assert!(matches!(
            apply_hamiltonian(&p, ParitySector::Plus, &[1.0; 3]),
            Err(Error::DimensionMismatch { expected: 8, got: 3 })
        ));
    }

    #[test]
    fn zz_matches_transfer_matrix_at_zero_coupling() {
        let beta: f64 = 2.0;
        let t = beta.tanh();
        let mut prev = f64::INFINITY;
        for l in [6, 8, 10, 12] {
            let r = thermal_observables(&params(l, 0.0, 0.5, CouplingKind::AllToAll), beta).unwrap();
            let exact = (t + t.powi(l as i32 - 1)) / (1.0 + t.powi(l as i32));
            assert!((r.zz_corr - exact).abs() < 1e-12, "L={l}: {} vs {exact}", r.zz_corr);
            let dev = (r.zz_corr - t).abs();
            assert!(dev < prev);
            prev = dev;
        }
    }

    #[test]
    fn thermal_identities() {
        let p = params(8, 0.5, 0.5, CouplingKind::AllToAll);
        let spec = FullSpectrum::new(&p).unwrap();
        for beta in [0.3, 1.0, 2.0] {
            let r = spec.thermal(beta).unwrap();
            assert!(r.s_beta.abs() <= 1.0);
            let from_s = ((1.0 + r.s_beta) / (1.0 - r.s_beta)).ln() / beta;
            assert!((r.delta_f_beta - from_s).abs() < 1e-12);
        }
        let zero = thermal_observables(&params(8, 0.0, 0.5, CouplingKind::AllToAll), 30.0).unwrap();
        assert!(zero.delta_f_beta.abs() < 1e-10);
    }

    #[test]
    fn free_energy_difference_approaches_splitting() {
        let p = params(8, 0.5, 0.5, CouplingKind::AllToAll);
        let delta = splitting_ed(&p, &EigensolverConfig::default()).unwrap().delta;
        let spec = FullSpectrum::new(&p).unwrap();
        let mut prev = f64::INFINITY;
        for beta in [4.0, 8.0, 16.0] {
            let diff = (spec.thermal(beta).unwrap().delta_f_beta - delta).abs();
            assert!(diff < prev);
            prev = diff;
        }
        assert!(prev < 1e-3 * delta.abs().max(1e-12) + 1e-6);
    }

    #[test]
    fn thermal_rejects_large_systems() {
        let p = params(14, 0.5, 0.5, CouplingKind::AllToAll);
        assert!(matches!(thermal_observables(&p, 1.0), Err(Error::TooLarge { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn hamiltonian_is_symmetric(l in 2usize..=9, lambda in 0.0f64..2.0, alpha in 0.05f64..1.0, seed in any::<u64>(), plus in any::<bool>()) {
            let p = params(l, lambda, alpha, CouplingKind::PeriodicPowerLaw);
            let sector = if plus { ParitySector::Plus } else { ParitySector::Minus };
            let h = SectorHamiltonian::new(&p, sector).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_unit(h.dim(), &mut rng);
            let v = random_unit(h.dim(), &mut rng);
            let lhs = dot(&u, &h.apply(&v).unwrap());
            let rhs = dot(&h.apply(&u).unwrap(), &v);
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
