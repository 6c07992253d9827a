//! Constrained optimum and dual multiplier of every bundled instance via the occupancy LP.

use pdr_anpg::cmdp::load_cmdp;
use pdr_anpg::oracle::solve_constrained_optimum;

fn main() -> pdr_anpg::Result<()> {
    for name in ["two_state", "three_state", "bandit"] {
        let path = format!("{}/data/cmdps/{name}.json", env!("CARGO_MANIFEST_DIR"));
        let spec = load_cmdp(path.as_ref())?.spec;
        let opt = solve_constrained_optimum(&spec)?;
        let c_slat = opt.max_jc.min(1.0 / (1.0 - spec.gamma()));
        println!(
            "{name:<12} J_r* = {:.6}  lambda* = {:.6}  max J_c = {:.6}  dual bound = {:.6}",
            opt.j_r_star,
            opt.lambda_star,
            opt.max_jc,
            1.0 / ((1.0 - spec.gamma()) * c_slat)
        );
        for s in 0..spec.n_states() {
            println!("    pi*(.|{s}) = {:?}", opt.policy.probs_at(s));
        }
    }
    Ok(())
}
