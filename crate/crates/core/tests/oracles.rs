//! Cross-checks of the public API against independent constructions.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use splitgap::ed::{apply_hamiltonian, splitting_ed, thermal_observables, BasisIndexer, EigensolverConfig, ParitySector};
use splitgap::model::coupling_table;
use splitgap::numerics::symmetric_eigen;
use splitgap::rotor::{rotor_action, rotor_action_quadrature, RotorParams};
use splitgap::scaling::{fit_stretched, FitModel, ScalingDataset};
use splitgap::toy::{dense_oracle_toy, solve_splitting_secular, OperatorChoice};
use splitgap::{CouplingKind, ModelParams};

/// Full Hamiltonian in the `sz` basis, bit set meaning `z = -1`.
fn z_basis_hamiltonian(p: &ModelParams) -> Vec<f64> {
    let l = p.l;
    let n = 1usize << l;
    let table = coupling_table(p).unwrap();
    let mut h = vec![0.0; n * n];
    for s in 0..n {
        let z = |j: usize| if s >> (j % l) & 1 == 1 { -1.0 } else { 1.0 };
        h[s * n + s] -= (0..l).map(|j| z(j) * z(j + 1)).sum::<f64>();
        for (r, f) in table.iter().enumerate() {
            for i in 0..l {
                let t = s ^ (1 << i) ^ (1 << ((i + r) % l));
                h[t * n + s] += p.lambda * f;
            }
        }
    }
    h
}

/// Lowest energies with parity `+1` and `-1`, read off the full spectrum.
fn sector_grounds_by_parity(p: &ModelParams) -> (f64, f64) {
    let n = 1usize << p.l;
    let all = n - 1;
    let eig = symmetric_eigen(n, &z_basis_hamiltonian(p), true).unwrap();
    let u = eig.vectors.unwrap();
    let (mut plus, mut minus) = (None, None);
    for (j, e) in eig.values.iter().enumerate() {
        let parity: f64 = (0..n).map(|s| u[(s, j)] * u[(s ^ all, j)]).sum();
        if parity > 0.5 && plus.is_none() {
            plus = Some(*e);
        } else if parity < -0.5 && minus.is_none() {
            minus = Some(*e);
        }
    }
    (plus.unwrap(), minus.unwrap())
}

#[test]
fn sector_energies_match_the_z_basis_spectrum() {
    for l in [4, 6] {
        for coupling in [CouplingKind::AllToAll, CouplingKind::PeriodicPowerLaw] {
            let p = ModelParams::new(l, 0.4, 0.5, coupling.clone()).unwrap();
            let (e_plus, e_minus) = sector_grounds_by_parity(&p);
            let r = splitting_ed(&p, &EigensolverConfig::default()).unwrap();
            assert!((r.e_plus - e_plus).abs() < 1e-10, "L={l} {coupling}: {} vs {e_plus}", r.e_plus);
            assert!((r.e_minus - e_minus).abs() < 1e-10, "L={l} {coupling}: {} vs {e_minus}", r.e_minus);
            assert!((r.delta - (e_minus - e_plus)).abs() < 1e-10);
        }
    }
}

#[test]
fn unperturbed_correlator_matches_transfer_matrix() {
    let beta = 2.0;
    let t: f64 = (beta as f64).tanh();
    let mut previous = f64::INFINITY;
    for l in [6usize, 8, 10, 12] {
        let p = ModelParams::new(l, 0.0, 0.5, CouplingKind::AllToAll).unwrap();
        let th = thermal_observables(&p, beta).unwrap();
        let exact = (t + t.powi(l as i32 - 1)) / (1.0 + t.powi(l as i32));
        assert!((th.zz_corr - exact).abs() < 1e-12, "L={l}");
        let gap = (th.zz_corr - t).abs();
        assert!(gap < previous);
        previous = gap;
    }
}

#[test]
fn free_energy_difference_approaches_the_splitting() {
    let p = ModelParams::new(8, 0.5, 0.5, CouplingKind::AllToAll).unwrap();
    let delta = splitting_ed(&p, &EigensolverConfig::default()).unwrap().delta;
    let gaps: Vec<f64> = [4.0, 8.0, 16.0]
        .iter()
        .map(|&b| (thermal_observables(&p, b).unwrap().delta_f_beta - delta).abs())
        .collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
}

#[test]
fn toy_secular_route_matches_dense_oracle() {
    for choice in [OperatorChoice::SigmaX, OperatorChoice::SigmaXX] {
        for l in [4usize, 6, 8, 10] {
            let p = ModelParams::new(l, 1.0, 0.5, CouplingKind::AllToAll).unwrap();
            let s = solve_splitting_secular(&choice, &p).unwrap();
            let d = dense_oracle_toy(&choice, &p).unwrap();
            assert!((s.delta - d.delta).abs() <= 1e-8 * d.delta.abs().max(1e-300) + 1e-13, "{l}");
        }
    }
}

#[test]
fn rotor_action_closed_form_matches_quadrature() {
    for l in [64usize, 256] {
        let base = ModelParams::new(l, 0.2, 0.5, CouplingKind::PeriodicPowerLaw).unwrap();
        let rp = RotorParams::new(base, 0.05).unwrap();
        let a = rotor_action(&rp).unwrap();
        let q = rotor_action_quadrature(&rp).unwrap();
        assert!(((a - q) / a).abs() < 1e-8, "L={l}: {a} vs {q}");
    }
}

#[test]
fn fit_recovers_planted_exponents() {
    let pairs: Vec<(usize, f64)> = [16usize, 32, 64, 128, 256, 512]
        .iter()
        .map(|&l| (l, -(1.7 * (l as f64).powf(0.75) + 0.4 * (l as f64).ln())))
        .collect();
    let data = ScalingDataset::from_pairs(&pairs, "planted").unwrap();
    let r = fit_stretched(&data, FitModel::PowerLog).unwrap();
    assert!((r.p - 0.75).abs() < 1e-6, "p = {}", r.p);
    assert!((r.c - 1.7).abs() < 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hamiltonian_is_symmetric(half in 2usize..6, lambda in 0.0f64..2.0, alpha in 0.05f64..1.0, seed: u64, odd: bool) {
        let l = 2 * half;
        let sector = if odd { ParitySector::Minus } else { ParitySector::Plus };
        let p = ModelParams::new(l, lambda, alpha, CouplingKind::PeriodicPowerLaw).unwrap();
        let dim = BasisIndexer::new(l, sector).unwrap().dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let hu = apply_hamiltonian(&p, sector, &u).unwrap();
        let hv = apply_hamiltonian(&p, sector, &v).unwrap();
        let a: f64 = u.iter().zip(&hv).map(|(x, y)| x * y).sum();
        let b: f64 = hu.iter().zip(&v).map(|(x, y)| x * y).sum();
        prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn sectors_split_the_hilbert_space(l in 2usize..16) {
        let plus = BasisIndexer::new(l, ParitySector::Plus).unwrap();
        let minus = BasisIndexer::new(l, ParitySector::Minus).unwrap();
        prop_assert_eq!(plus.dim() + minus.dim(), 1usize << l);
        for i in (0..plus.dim()).step_by(7) {
            let s = plus.state(i);
            prop_assert_eq!(plus.index(s), i);
            prop_assert_eq!(s.count_ones() % 2, 0);
            prop_assert!(!minus.contains(s));
        }
    }
}
