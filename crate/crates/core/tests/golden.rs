//! Bundled instances against frozen reports from an independent numpy/scipy oracle.

mod common;

use common::*;
use pdr_anpg::cmdp::UtilityFn;
use pdr_anpg::oracle::{policy_evaluation, solve_constrained_optimum, OracleReport};
use pdr_anpg::policy::PolicyTable;
use serde::Deserialize;

#[derive(Deserialize)]
struct Golden {
    uniform_reward: OracleReport,
    uniform_cost: OracleReport,
    j_r_star: f64,
    lambda_star: f64,
    max_jc: f64,
}

fn golden(name: &str) -> Golden {
    let text = std::fs::read_to_string(data_path(&format!("golden/{name}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn assert_report_close(got: &OracleReport, want: &OracleReport, tol: f64) {
    let flat = |r: &OracleReport| -> Vec<f64> {
        let mut v = r.v.clone();
        v.extend(r.q.iter().flatten());
        v.extend(r.adv.iter().flatten());
        v.extend(&r.occupancy_d);
        v.extend(r.occupancy_nu.iter().flatten());
        v.push(r.j_value);
        v
    };
    let (a, b) = (flat(got), flat(want));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= tol, "{x} vs {y}");
    }
}

#[test]
fn uniform_policy_reports_match_golden() {
    for name in BUNDLED {
        let spec = bundled(name);
        let g = golden(name);
        let pi = PolicyTable::uniform(spec.n_states(), spec.n_actions());
        let reward = policy_evaluation(&spec, &pi, &UtilityFn::reward(&spec)).unwrap();
        let cost = policy_evaluation(&spec, &pi, &UtilityFn::cost(&spec)).unwrap();
        assert_report_close(&reward, &g.uniform_reward, 1e-12);
        assert_report_close(&cost, &g.uniform_cost, 1e-12);
    }
}

#[test]
fn constrained_optimum_matches_golden() {
    for name in BUNDLED {
        let spec = bundled(name);
        let g = golden(name);
        let opt = solve_constrained_optimum(&spec).unwrap();
        assert!((opt.j_r_star - g.j_r_star).abs() < 1e-8, "{name}");
        assert!((opt.lambda_star - g.lambda_star).abs() < 1e-7, "{name}");
        assert!((opt.max_jc - g.max_jc).abs() < 1e-8, "{name}");
    }
}

#[test]
fn closed_form_optima() {
    // Bandit: at lambda = 0.5 every arm has r + lambda c = 0.6, so the optimum
    // is any mixture with J_c = 0 and J_r = 0.6 / (1 - gamma).
    let spec = bundled("bandit");
    let bandit = solve_constrained_optimum(&spec).unwrap();
    assert!((bandit.j_r_star - 1.2).abs() < 1e-12);
    let jc = pdr_anpg::oracle::j_value(&spec, &bandit.policy, spec.cost_table()).unwrap();
    assert!(jc > -1e-12);
    assert!((bandit.lambda_star - 0.5).abs() < 1e-12);

    let two = solve_constrained_optimum(&bundled("two_state")).unwrap();
    assert!((two.j_r_star - 1.0).abs() < 1e-12);
    assert!((two.lambda_star - 0.5).abs() < 1e-12);
    assert!((two.policy.prob(1, 0) - 1.0).abs() < 1e-9);
    assert!((two.policy.prob(0, 0) - 0.5).abs() < 1e-9);
}
