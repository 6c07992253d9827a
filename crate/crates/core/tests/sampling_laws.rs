//! Distributional laws of geometric-horizon rollouts.

mod common;

use common::*;
use pdr_anpg::cmdp::{accumulate_utility, rollout, sample_geometric_horizon, Start, UtilityFn};
use pdr_anpg::oracle::{j_value, occupancy};
use pdr_anpg::rng::stream_rng;

#[test]
fn geometric_rollout_sums_are_unbiased_for_values() {
    for name in BUNDLED {
        let spec = bundled(name);
        let mut rng = stream_rng(31, 0);
        let policy = random_tabular(&spec, 1.0, &mut rng).table();
        for g in [UtilityFn::reward(&spec), UtilityFn::cost(&spec)] {
            let truth = j_value(&spec, &policy, g.table()).unwrap();
            let n = 100_000;
            let (mut m1, mut m2) = (0.0, 0.0);
            for _ in 0..n {
                let t = sample_geometric_horizon(spec.gamma(), &mut rng).unwrap();
                let x = accumulate_utility(&rollout(&spec, &policy, Start::Rho, t, &mut rng).unwrap(), &g);
                m1 += x;
                m2 += x * x;
            }
            let mean = m1 / n as f64;
            let se = ((m2 / n as f64 - mean * mean) / n as f64).sqrt();
            assert!((mean - truth).abs() <= 4.0 * se, "{name}: {mean} vs {truth} (se {se})");
        }
    }
}

#[test]
fn terminal_state_follows_the_occupancy() {
    let spec = bundled("three_state");
    let mut rng = stream_rng(32, 0);
    let policy = random_tabular(&spec, 1.0, &mut rng).table();
    let d = occupancy(&spec, &policy).unwrap();
    let n = 100_000;
    let mut counts = vec![0usize; spec.n_states()];
    for _ in 0..n {
        let t = sample_geometric_horizon(spec.gamma(), &mut rng).unwrap();
        counts[rollout(&spec, &policy, Start::Rho, t, &mut rng).unwrap().last_state()] += 1;
    }
    let tv: f64 = 0.5 * counts.iter().zip(&d).map(|(&c, &p)| (c as f64 / n as f64 - p).abs()).sum::<f64>();
    assert!(tv < 0.01, "total variation {tv}");
}

#[test]
fn same_seed_same_trajectory() {
    let spec = bundled("three_state");
    let policy = random_tabular(&spec, 1.0, &mut stream_rng(33, 0)).table();
    let a = rollout(&spec, &policy, Start::Rho, 50, &mut stream_rng(34, 1)).unwrap();
    let b = rollout(&spec, &policy, Start::Rho, 50, &mut stream_rng(34, 1)).unwrap();
    assert_eq!(a, b);
    let c = rollout(&spec, &policy, Start::Rho, 50, &mut stream_rng(34, 2)).unwrap();
    assert_ne!(a, c);
}
