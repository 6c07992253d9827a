//! Sampled runs for a few seeds with a shortened horizon.

use std::path::Path;

use pdr_anpg::harness::{prepare, ExperimentConfig};
use pdr_anpg::outer::{run_pdr_anpg, RunMode, RunOptions};

fn main() -> pdr_anpg::Result<()> {
    let cfg = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/data/configs/three_state_stochastic.json"));
    let mut config = ExperimentConfig::load(cfg)?;
    config.schedule.overrides.k = Some(300);
    let p = prepare(&config)?;
    let options = RunOptions {
        record_stride: 100,
        instrumentation: Some(p.instrumentation.clone()),
        ..RunOptions::default()
    };
    for seed in &config.seeds[..3] {
        let out = run_pdr_anpg(&p.spec, &p.base, &p.schedule, RunMode::Stochastic { seed: *seed }, &options)?;
        for r in &out.records {
            println!(
                "seed {seed} k {:>4}  gap {:+.4}  violation {:.4}  lambda {:.4}  samples {}",
                r.k, r.optimality_gap, r.violation, r.lambda, r.samples_cumulative
            );
        }
    }
    Ok(())
}
