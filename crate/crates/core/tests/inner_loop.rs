//! Accelerated inner loop: determinism, rates, and the conditional-mean reduction.

mod common;

use common::*;
use nalgebra::DVector;
use pdr_anpg::asgd::{run_inner_loop, run_with_oracle, AsgdRates, GradientSource, QuadraticGradient, SampledGradient};
use pdr_anpg::oracle::{exact_fisher, exact_terms};
use pdr_anpg::rng::{stream_rng, StreamRng};
use pdr_anpg::sampler::SamplerContext;

#[test]
fn exact_source_is_bit_identical() {
    let spec = bundled("three_state");
    let params = random_tabular(&spec, 1.0, &mut stream_rng(50, 0));
    let rates = AsgdRates::from_constants(1.2, 0.05, 300).unwrap();
    let a = run_inner_loop::<StreamRng>(&spec, &params, 0.4, 0.2, &rates, GradientSource::ExactOracle).unwrap();
    let b = run_inner_loop::<StreamRng>(&spec, &params, 0.4, 0.2, &rates, GradientSource::ExactOracle).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.1, 0);
}

#[test]
fn rates_for_measured_constants() {
    let spec = bundled("three_state");
    let params = random_tabular(&spec, 1.0, &mut stream_rng(51, 0));
    let g = max_score_norm(&params);
    let mu_f = min_positive_eigenvalue(&exact_fisher(&spec, &params).unwrap()).max(1e-3);
    let r = AsgdRates::from_constants(g, mu_f, 101).unwrap();
    assert!(r.alpha > 0.0 && r.alpha < 1.0);
    assert!(r.beta > 0.0 && r.beta < 1.0);
    assert!((r.delta * g * g - 0.2).abs() < 1e-15);
    assert_eq!(r.h, 102);
}

#[test]
fn stochastic_mean_approaches_exact_iterate() {
    let spec = bundled("three_state");
    let params = random_tabular(&spec, 0.5, &mut stream_rng(52, 0));
    let (lambda, tau) = (0.5, 0.2);
    let rates = AsgdRates::from_constants(1.2, 0.05, 20).unwrap();
    let terms = exact_terms(&spec, &params, lambda, tau).unwrap();
    let (exact, _) = run_with_oracle(&mut QuadraticGradient::from_terms(&terms), &rates);
    let ctx = SamplerContext::new(&spec, &params, lambda, tau).unwrap();
    let d = params.dim();
    let n = 10_000;
    let mut sum = DVector::zeros(d);
    let mut sum_sq = DVector::zeros(d);
    let mut dist_small = 0.0;
    for i in 0..n {
        let mut rng = stream_rng(53, i);
        let (omega, _) = run_with_oracle(&mut SampledGradient::new(ctx.clone(), &mut rng, spec.n_actions()), &rates);
        sum += &omega;
        sum_sq += omega.component_mul(&omega);
        if i + 1 == 100 {
            dist_small = (&sum / 100.0 - &exact).norm();
        }
    }
    let nf = n as f64;
    let mean = &sum / nf;
    for j in 0..d {
        let var = (sum_sq[j] / nf - mean[j] * mean[j]).max(0.0);
        let se = (var / nf).sqrt();
        assert!((mean[j] - exact[j]).abs() <= 4.0 * se + 1e-12, "component {j}");
    }
    // 100x more runs: the error should shrink roughly tenfold.
    let dist_large = (mean - &exact).norm();
    assert!(dist_large < dist_small / 3.0, "{dist_small} -> {dist_large}");
}
