//! Property suite on the 2-state instance with reduced Monte-Carlo budgets.

use pdr_anpg::cmdp::load_cmdp;
use pdr_anpg::policy::PolicyParams;
use pdr_anpg::verify::{run_suite, VerifySettings};

fn main() -> pdr_anpg::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/cmdps/two_state.json");
    let spec = load_cmdp(path.as_ref())?.spec;
    let mut settings = VerifySettings::for_spec(&spec, 3)?;
    settings.mc_samples = 20_000;
    for outcome in run_suite(&spec, &PolicyParams::tabular(2, 2), &settings)? {
        println!("{}", outcome.line());
    }
    Ok(())
}
