//! Entropy-regularized saddle point for a range of temperatures.

use pdr_anpg::cmdp::load_cmdp;
use pdr_anpg::oracle::{j_value, solve_constrained_optimum, solve_regularized_saddle};

fn main() -> pdr_anpg::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/cmdps/three_state.json");
    let spec = load_cmdp(path.as_ref())?.spec;
    let opt = solve_constrained_optimum(&spec)?;
    let lambda_max = 4.0 / ((1.0 - spec.gamma()) * opt.max_jc.min(1.0 / (1.0 - spec.gamma())));
    println!("unregularized: J_r* = {:.6}, lambda* = {:.6}", opt.j_r_star, opt.lambda_star);
    for tau in [1.0, 0.4, 0.2, 0.1, 0.05, 0.01] {
        let sp = solve_regularized_saddle(&spec, tau, lambda_max)?;
        let jr = j_value(&spec, &sp.pi_star_tau, spec.reward_table())?;
        let jc = j_value(&spec, &sp.pi_star_tau, spec.cost_table())?;
        println!(
            "tau {tau:<5} lambda*_tau = {:.6}  J_r = {jr:.6}  J_c = {jc:+.6}  L = {:.6}",
            sp.lambda_star_tau, sp.lagrangian_value
        );
    }
    Ok(())
}
