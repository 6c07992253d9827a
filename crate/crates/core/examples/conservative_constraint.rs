//! Tightening the constraint by delta' so the regularized limit point stays feasible.

use pdr_anpg::cmdp::load_cmdp;
use pdr_anpg::oracle::{j_value, solve_regularized_saddle};
use pdr_anpg::outer::conservative_transform;

fn main() -> pdr_anpg::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/cmdps/three_state.json");
    let spec = load_cmdp(path.as_ref())?.spec;
    let tau = 0.2;
    for delta in [0.0, 0.05, 0.1, 0.2] {
        let shifted = conservative_transform(&spec, delta)?;
        let sp = solve_regularized_saddle(&shifted, tau, 10.0)?;
        println!(
            "delta' {delta:<5} J_c under original cost {:+.5}  J_r {:.5}  lambda*_tau {:.5}",
            j_value(&spec, &sp.pi_star_tau, spec.cost_table())?,
            j_value(&spec, &sp.pi_star_tau, spec.reward_table())?,
            sp.lambda_star_tau
        );
    }
    Ok(())
}
