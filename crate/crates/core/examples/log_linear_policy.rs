//! Log-linear policy on the bandit: sampled run plus the compatible-error proxy
//! for epsilon_bias at the final iterate.

use std::path::Path;

use pdr_anpg::harness::{prepare, ExperimentConfig};
use pdr_anpg::outer::{epsilon_bias_proxy, run_pdr_anpg, RunMode, RunOptions};

fn main() -> pdr_anpg::Result<()> {
    let cfg = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/data/configs/bandit_log_linear.json"));
    let config = ExperimentConfig::load(cfg)?;
    let p = prepare(&config)?;
    println!("feature dim {}  K {}  H {}", p.base.dim(), p.k_effective, p.schedule.h);
    let mut schedule = p.schedule.clone();
    schedule.k = p.k_effective;
    let options = RunOptions {
        instrumentation: Some(p.instrumentation.clone()),
        ..RunOptions::default()
    };
    let out = run_pdr_anpg(&p.spec, &p.base, &schedule, RunMode::Stochastic { seed: 7 }, &options)?;
    let last = out.records.last().expect("K > 0");
    println!("final gap {:+.4} violation {:.4} lambda {:.4}", last.optimality_gap, last.violation, last.lambda);
    println!("policy {:?}", out.params.table().probs_at(0));
    let proxy = epsilon_bias_proxy(&p.spec, &out.params, out.dual.lambda, schedule.tau, &p.instrumentation.saddle.pi_star_tau)?;
    println!("epsilon_bias proxy {proxy:.4e}");
    Ok(())
}
