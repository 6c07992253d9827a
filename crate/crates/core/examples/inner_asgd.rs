//! Inner-loop bias and noise: exact-gradient bias decay in H and the
//! stochastic mean-squared error at a few lengths.

use pdr_anpg::asgd::{run_with_oracle, AsgdRates, QuadraticGradient, SampledGradient};
use pdr_anpg::cmdp::load_cmdp;
use pdr_anpg::linalg::min_range_eigenvalue;
use pdr_anpg::oracle::{exact_fisher, exact_terms};
use pdr_anpg::policy::PolicyParams;
use pdr_anpg::rng::stream_rng;
use pdr_anpg::sampler::SamplerContext;

fn main() -> pdr_anpg::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/cmdps/three_state.json");
    let spec = load_cmdp(path.as_ref())?.spec;
    let params = PolicyParams::tabular(3, 2);
    let (lambda, tau) = (1.0, 0.2);
    let terms = exact_terms(&spec, &params, lambda, tau)?;
    let star = terms.npg();
    let mu_f = min_range_eigenvalue(&exact_fisher(&spec, &params)?).unwrap_or(1e-3).max(1e-3);
    // tabular softmax score norm is at most sqrt(2)
    let g = 2f64.sqrt();
    println!("mu_F = {mu_f:.4}, G = {g:.4}");
    let ctx = SamplerContext::new(&spec, &params, lambda, tau)?;
    for h in [50, 100, 200, 400, 800, 1600] {
        let rates = AsgdRates::from_constants(g, mu_f, h)?;
        let (exact, _) = run_with_oracle(&mut QuadraticGradient::from_terms(&terms), &rates);
        let reps = 50;
        let mut mse = 0.0;
        for r in 0..reps {
            let mut rng = stream_rng(h as u64, r);
            let (w, _) = run_with_oracle(&mut SampledGradient::new(ctx.clone(), &mut rng, 2), &rates);
            mse += (w - &star).norm_squared() / reps as f64;
        }
        println!("H {h:>5}  exact bias {:.3e}  stochastic mse {mse:.3e}", (exact - &star).norm());
    }
    Ok(())
}
