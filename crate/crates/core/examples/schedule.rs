//! Hyperparameter schedule as a function of the target accuracy.

use pdr_anpg::outer::{derive_schedule, ScheduleConfig, ScheduleOverrides};

fn main() -> pdr_anpg::Result<()> {
    println!("{:>6} {:>8} {:>8} {:>10} {:>8} {:>8}", "eps", "tau", "eta", "K", "H", "lam_max");
    for (eps, eps_bias) in [(0.4, 0.0), (0.2, 0.0), (0.1, 0.0), (0.1, 1e-6), (0.01, 0.1)] {
        let s = derive_schedule(
            &ScheduleConfig {
                epsilon: eps,
                epsilon_bias: eps_bias,
                c_slat: 1.0,
                g: 1.2,
                b: 0.5,
                mu_f: 0.05,
                c_bar: 4.0,
                c: 1.0,
                overrides: ScheduleOverrides::default(),
            },
            0.8,
        )?;
        println!("{eps:>6} {:>8.4} {:>8.2e} {:>10} {:>8} {:>8.3}", s.tau, s.eta, s.k, s.h, s.lambda_max);
    }
    Ok(())
}
