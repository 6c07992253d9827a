//! Exact evaluation of a policy: values, advantages and occupancy measures.

use pdr_anpg::cmdp::{load_cmdp, UtilityFn};
use pdr_anpg::oracle::{entropy, policy_evaluation};
use pdr_anpg::policy::PolicyTable;

fn main() -> pdr_anpg::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/cmdps/two_state.json");
    let spec = load_cmdp(path.as_ref())?.spec;
    let pi = PolicyTable::from_probs(2, 2, vec![0.9, 0.1, 0.3, 0.7])?;
    for (name, g) in [("reward", UtilityFn::reward(&spec)), ("cost", UtilityFn::cost(&spec))] {
        let rep = policy_evaluation(&spec, &pi, &g)?;
        println!("{name}: J = {:.6}", rep.j_value);
        println!("  V   = {:?}", rep.v);
        println!("  A   = {:?}", rep.adv);
        println!("  d   = {:?}", rep.occupancy_d);
    }
    println!("entropy H(pi) = {:.6}", entropy(&spec, &pi)?);
    Ok(())
}
