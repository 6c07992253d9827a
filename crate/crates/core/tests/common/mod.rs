#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use pdr_anpg::cmdp::{load_cmdp, CmdpSpec};
use pdr_anpg::policy::PolicyParams;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn data_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

pub fn bundled(name: &str) -> CmdpSpec {
    load_cmdp(&data_path(&format!("cmdps/{name}.json"))).unwrap().spec
}

pub const BUNDLED: [&str; 3] = ["two_state", "three_state", "bandit"];

pub fn random_tabular<R: Rng>(spec: &CmdpSpec, scale: f64, rng: &mut R) -> PolicyParams {
    let d = spec.n_states() * spec.n_actions();
    let theta = DVector::from_fn(d, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    PolicyParams::tabular(spec.n_states(), spec.n_actions()).with_theta(theta).unwrap()
}

/// `L^2 = 8(1+lambda)^2/(1-gamma)^2 + tau^2 [32A/e^2 + 12 (ln A)^2/(1-gamma)^2]`.
pub fn l_sq(gamma: f64, a: usize, lambda: f64, tau: f64) -> f64 {
    let h = 1.0 - gamma;
    let a = a as f64;
    let e2 = std::f64::consts::E.powi(2);
    8.0 * (1.0 + lambda).powi(2) / (h * h) + tau * tau * (32.0 * a / e2 + 12.0 * a.ln().powi(2) / (h * h))
}

/// `48 (1-gamma)^-4 [1 + lambda^2 + 4 A tau^2 / e^2] + 2 G^4 L^2 / (mu_F^2 (1-gamma)^2)`.
pub fn sigma_sq(gamma: f64, a: usize, lambda: f64, tau: f64, g: f64, mu_f: f64) -> f64 {
    let h = 1.0 - gamma;
    let e2 = std::f64::consts::E.powi(2);
    48.0 / h.powi(4) * (1.0 + lambda * lambda + 4.0 * a as f64 * tau * tau / e2)
        + 2.0 * g.powi(4) * l_sq(gamma, a, lambda, tau) / (mu_f * mu_f * h * h)
}

/// Largest score norm over every state-action pair at `params`.
pub fn max_score_norm(params: &PolicyParams) -> f64 {
    let mut g: f64 = 0.0;
    for s in 0..params.n_states() {
        for a in 0..params.n_actions() {
            g = g.max(params.score(s, a).norm());
        }
    }
    g
}

/// Smallest eigenvalue above `1e-10 * max|eig|`.
pub fn min_positive_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let top = eig.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    eig.iter().copied().filter(|&e| e > 1e-10 * top).fold(f64::INFINITY, f64::min)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

/// Slope of the least-squares line through `(x, y)`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Random CMDP with full-support transitions and uniform `rho`.
pub fn random_spec<R: Rng>(n_states: usize, n_actions: usize, gamma: f64, rng: &mut R) -> CmdpSpec {
    let reward = (0..n_states).map(|_| (0..n_actions).map(|_| rng.random::<f64>()).collect()).collect();
    let cost = (0..n_states)
        .map(|_| (0..n_actions).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect())
        .collect();
    let transition = (0..n_states)
        .map(|_| {
            (0..n_actions)
                .map(|_| {
                    let w: Vec<f64> = (0..n_states).map(|_| 0.05 + rng.random::<f64>()).collect();
                    let total: f64 = w.iter().sum();
                    w.into_iter().map(|x| x / total).collect()
                })
                .collect()
        })
        .collect();
    CmdpSpec::new(
        n_states,
        n_actions,
        gamma,
        vec![1.0 / n_states as f64; n_states],
        reward,
        cost,
        transition,
    )
    .unwrap()
}
