//! Outer primal-dual loop on the bundled instances.

mod common;

use common::*;
use nalgebra::DVector;
use pdr_anpg::oracle::{exact_lagrangian_gradient, exact_npg, j_value, policy_evaluation, solve_constrained_optimum, solve_regularized_saddle};
use pdr_anpg::outer::{
    derive_schedule, dual_step, primal_step, run_pdr_anpg, DualState, Instrumentation, RunMode, RunOptions,
    ScheduleConfig, ScheduleOverrides,
};
use pdr_anpg::cmdp::UtilityFn;
use pdr_anpg::policy::PolicyParams;
use pdr_anpg::rng::stream_rng;
use pdr_anpg::Error;
use proptest::prelude::*;

fn schedule_for(epsilon: f64, k: u64, h: usize, gamma: f64) -> pdr_anpg::outer::Schedule {
    derive_schedule(
        &ScheduleConfig {
            epsilon,
            epsilon_bias: 0.0,
            c_slat: 1.0,
            g: 1.2,
            b: 0.5,
            mu_f: 0.05,
            c_bar: 4.0,
            c: 1.0,
            overrides: ScheduleOverrides {
                k: Some(k),
                h: Some(h),
                ..Default::default()
            },
        },
        gamma,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn dual_step_stays_in_box(lambda in 0.0f64..8.0, jc in -10.0f64..10.0, eta in 0.0f64..0.5, tau in 0.0f64..1.0) {
        let next = dual_step(DualState { lambda }, jc, eta, tau, 8.0);
        prop_assert!((0.0..=8.0).contains(&next.lambda));
    }
}

#[test]
fn zero_iterations_return_the_start() {
    let spec = bundled("three_state");
    let params = random_tabular(&spec, 1.0, &mut stream_rng(60, 0));
    let schedule = schedule_for(0.2, 0, 10, spec.gamma());
    let opts = RunOptions { lambda0: 0.3, ..RunOptions::default() };
    let out = run_pdr_anpg(&spec, &params, &schedule, RunMode::Exact, &opts).unwrap();
    assert_eq!(out.params, params);
    assert_eq!(out.dual.lambda, 0.3);
    assert!(out.records.is_empty());
}

#[test]
fn exact_traces_repeat_and_stochastic_traces_follow_the_seed() {
    let spec = bundled("three_state");
    let params = PolicyParams::tabular(3, 2);
    let schedule = schedule_for(0.2, 30, 40, spec.gamma());
    let opts = RunOptions { record_stride: 1, ..RunOptions::default() };
    let a = run_pdr_anpg(&spec, &params, &schedule, RunMode::Exact, &opts).unwrap();
    let b = run_pdr_anpg(&spec, &params, &schedule, RunMode::Exact, &opts).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.records.len(), b.records.len());
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!(x.omega_norm.to_bits(), y.omega_norm.to_bits());
        assert_eq!(x.lambda.to_bits(), y.lambda.to_bits());
    }
    let s1 = run_pdr_anpg(&spec, &params, &schedule, RunMode::Stochastic { seed: 9 }, &opts).unwrap();
    let s2 = run_pdr_anpg(&spec, &params, &schedule, RunMode::Stochastic { seed: 9 }, &opts).unwrap();
    let s3 = run_pdr_anpg(&spec, &params, &schedule, RunMode::Stochastic { seed: 10 }, &opts).unwrap();
    assert_eq!(s1.params, s2.params);
    assert_ne!(s1.params, s3.params);
    assert!(s1.samples_drawn > 0);
    assert!(s1.records.iter().all(|r| (0.0..=schedule.lambda_max).contains(&r.lambda)));
}

#[test]
fn exact_npg_step_improves_single_state_reward() {
    let spec = bundled("bandit");
    let params = PolicyParams::tabular(1, 3);
    let before = j_value(&spec, &params.table(), spec.reward_table()).unwrap();
    let omega = exact_npg(&spec, &params, 0.0, 0.0, 0.0).unwrap();
    let next = primal_step(&params, &omega, 0.1).unwrap();
    let after = j_value(&spec, &next.table(), spec.reward_table()).unwrap();
    assert!(after > before, "{before} -> {after}");
    assert_eq!(primal_step(&params, &omega, 0.0).unwrap(), params);
    let bad = DVector::from_vec(vec![f64::NAN, 0.0, 0.0]);
    assert!(matches!(primal_step(&params, &bad, 0.1), Err(Error::Diverged(_))));
}

#[test]
fn bounds_hold_along_an_instrumented_run() {
    let spec = bundled("three_state");
    let schedule = schedule_for(0.2, 200, 400, spec.gamma());
    let saddle = solve_regularized_saddle(&spec, schedule.tau, schedule.lambda_max).unwrap();
    let opt = solve_constrained_optimum(&spec).unwrap();
    let opts = RunOptions {
        record_stride: 20,
        instrumentation: Some(Instrumentation { j_r_star: opt.j_r_star, saddle }),
        keep_thetas: true,
        ..RunOptions::default()
    };
    let out = run_pdr_anpg(&spec, &PolicyParams::tabular(3, 2), &schedule, RunMode::Exact, &opts).unwrap();
    assert_eq!(out.thetas.len(), 201);
    let phis: Vec<f64> = out.records.iter().map(|r| r.phi_surrogate).collect();
    assert!(phis.last().unwrap() < &phis[0]);
    for (rec, params) in out.records.iter().zip(out.thetas.iter().step_by(20)) {
        let (lambda, tau) = (rec.lambda, schedule.tau);
        let pi = params.table();
        let rep = policy_evaluation(&spec, &pi, &UtilityFn::regularized(&spec, lambda, tau, &pi).unwrap()).unwrap();
        let bound = l_sq(spec.gamma(), 2, lambda, tau);
        for s in 0..3 {
            let avg: f64 = (0..2).map(|a| pi.prob(s, a) * rep.adv[s][a].powi(2)).sum();
            assert!(avg <= bound);
        }
        let grad = exact_lagrangian_gradient(&spec, params, lambda, tau).unwrap();
        assert!(grad.norm_squared() <= max_score_norm(params).powi(2) * bound / (1.0 - spec.gamma()).powi(2));
    }
}
