//! Monte-Carlo gradient and J_c estimates against the exact oracle.

use nalgebra::DVector;
use pdr_anpg::cmdp::load_cmdp;
use pdr_anpg::oracle::{exact_terms, j_value};
use pdr_anpg::policy::PolicyParams;
use pdr_anpg::rng::stream_rng;
use pdr_anpg::sampler::SamplerContext;

fn main() -> pdr_anpg::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/cmdps/three_state.json");
    let spec = load_cmdp(path.as_ref())?.spec;
    let params = PolicyParams::tabular(3, 2).with_theta(DVector::from_vec(vec![0.5, -0.5, 1.0, 0.0, -0.3, 0.2]))?;
    let (lambda, tau) = (0.8, 0.2);
    let omega = DVector::from_element(6, 0.1);
    let exact = exact_terms(&spec, &params, lambda, tau)?.error_gradient(&omega);
    let ctx = SamplerContext::new(&spec, &params, lambda, tau)?;
    let mut rng = stream_rng(7, 0);
    let n = 200_000;
    let mut mean = DVector::zeros(6);
    let (mut jc, mut samples) = (0.0, 0u64);
    for _ in 0..n {
        let draw = ctx.estimate(&omega, &mut rng)?;
        mean += draw.grad_hat / n as f64;
        jc += draw.j_c_hat / n as f64;
        samples += draw.samples_used;
    }
    println!("J_c   oracle {:+.5}  estimate {jc:+.5}", j_value(&spec, &params.table(), spec.cost_table())?);
    for i in 0..6 {
        println!("grad[{i}] oracle {:+.5}  estimate {:+.5}", exact[i], mean[i]);
    }
    println!(
        "samples per call {:.3} (expected {:.3})",
        samples as f64 / n as f64,
        (spec.n_actions() as f64 + 2.0) / (1.0 - spec.gamma())
    );
    Ok(())
}
