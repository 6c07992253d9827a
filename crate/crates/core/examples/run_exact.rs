//! Full exact-gradient run on the 3-state instance with oracle metrics and the
//! per-step potential recursion audit.

use std::path::Path;

use pdr_anpg::harness::{prepare, ExperimentConfig};
use pdr_anpg::outer::{potential_recursion_audit, run_pdr_anpg, RunMode, RunOptions};

fn main() -> pdr_anpg::Result<()> {
    let cfg = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/data/configs/three_state_exact.json"));
    let config = ExperimentConfig::load(cfg)?;
    let p = prepare(&config)?;
    let s = &p.schedule;
    println!("tau {} eta {} K {} H {} lambda_max {:.4}", s.tau, s.eta, s.k, s.h, s.lambda_max);
    let options = RunOptions {
        record_stride: 125,
        instrumentation: Some(p.instrumentation.clone()),
        audit: true,
        ..RunOptions::default()
    };
    let out = run_pdr_anpg(&p.spec, &p.base, s, RunMode::Exact, &options)?;
    for r in &out.records {
        println!(
            "k {:>5}  gap {:+.5}  violation {:.5}  phi {:.3e}  lambda {:.4}",
            r.k, r.optimality_gap, r.violation, r.phi_surrogate, r.lambda
        );
    }
    let audit = potential_recursion_audit(&out.audit, s, p.calibration.g, p.calibration.b, p.spec.gamma(), 0.0, 1e-8);
    println!(
        "recursion audit: {} steps, {} violations, worst margin {:.3e}",
        audit.checked, audit.violations, audit.worst_margin
    );
    Ok(())
}
