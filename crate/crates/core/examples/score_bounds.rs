//! Measured score bound G, smoothness B and Fisher floor over pilot parameters.

use pdr_anpg::cmdp::load_cmdp;
use pdr_anpg::oracle::solve_regularized_saddle;
use pdr_anpg::outer::{anchor_parameters, calibrate, pilot_parameters};
use pdr_anpg::policy::PolicyParams;
use pdr_anpg::rng::stream_rng;

fn main() -> pdr_anpg::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/cmdps/three_state.json");
    let spec = load_cmdp(path.as_ref())?.spec;
    let base = PolicyParams::tabular(3, 2);
    let mut rng = stream_rng(1, 0);
    for tau in [0.4, 0.2, 0.1] {
        let saddle = solve_regularized_saddle(&spec, tau, 6.75)?;
        let anchor = anchor_parameters(&base, &saddle);
        let points = pilot_parameters(&base, anchor.as_ref(), 8, 0.1, &mut rng)?;
        let cal = calibrate(&spec, &points, 1e-3, &mut rng)?;
        println!(
            "tau {tau}: {} points  G = {:.4}  B = {:.4}  mu_F = {:.4e} (clamped: {})",
            points.len(),
            cal.g,
            cal.b,
            cal.mu_f,
            cal.clamped
        );
    }
    Ok(())
}
