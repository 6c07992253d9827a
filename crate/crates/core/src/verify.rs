//! Executable checks of the estimator and oracle properties on a given CMDP.
//! Every check is seeded and returns its worst measured margin.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::cmdp::{CmdpSpec, UtilityFn};
use crate::error::Result;
use crate::linalg::{min_eigenvalue, min_range_eigenvalue};
use crate::oracle::{
    advantage_bound_sq, average_squared_advantage, compatible_error, entropy, exact_fisher, exact_terms,
    gradient_norm_bound_sq, j_value, lagrangian, noise_variance_bound, optimal_values, policy_evaluation,
    saddle_sandwich_margins, solve_constrained_optimum, solve_regularized_saddle,
};
use crate::policy::{measure_score_bounds, PolicyParams, PolicyTable, ScoreProbe};
use crate::rng::{stream_rng, StreamRng};
use crate::sampler::SamplerContext;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// Smallest slack over probes; negative means a violation.
    pub margin: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, margin: f64, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed: margin >= 0.0,
            margin,
            detail,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {:<34} margin {:>12.4e}  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.margin,
            self.detail
        )
    }
}

#[derive(Debug, Clone)]
pub struct VerifySettings {
    pub seed: u64,
    /// Random probes for the bound and identity checks.
    pub probes: usize,
    /// Monte-Carlo draws per tuple for the estimator checks.
    pub mc_samples: usize,
    pub unbiased_tuples: usize,
    pub variance_tuples: usize,
    pub policy_pairs: usize,
    /// Temperature used by the saddle-point checks.
    pub saddle_tau: f64,
    pub lambda_max: f64,
    pub c_slat: f64,
}

impl VerifySettings {
    /// Defaults for `spec`: `c_slat = min(max J_c, 1/(1-gamma))`, `lambda_max = 4/((1-gamma) c_slat)`.
    pub fn for_spec(spec: &CmdpSpec, seed: u64) -> Result<Self> {
        let h = 1.0 - spec.gamma();
        let c_slat = crate::oracle::max_cost_value(spec)?.min(1.0 / h);
        Ok(Self {
            seed,
            probes: 100,
            mc_samples: 100_000,
            unbiased_tuples: 5,
            variance_tuples: 3,
            policy_pairs: 50,
            saddle_tau: 0.2,
            lambda_max: 4.0 / (h * c_slat.max(f64::MIN_POSITIVE)),
            c_slat,
        })
    }
}

/// Tabular parameters with i.i.d. `N(0, scale^2)` logits.
pub fn random_tabular<R: Rng + ?Sized>(spec: &CmdpSpec, scale: f64, rng: &mut R) -> PolicyParams {
    let d = spec.n_states() * spec.n_actions();
    let theta = DVector::from_fn(d, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    PolicyParams::tabular(spec.n_states(), spec.n_actions())
        .with_theta(theta)
        .expect("dimension matches")
}

fn random_like<R: Rng + ?Sized>(base: &PolicyParams, scale: f64, rng: &mut R) -> PolicyParams {
    let theta = DVector::from_fn(base.dim(), |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    base.with_theta(theta).expect("dimension matches")
}

/// Averaged-advantage bound and gradient-norm bound at random `(theta, lambda, tau, s)`.
pub fn check_advantage_and_gradient_bounds(
    spec: &CmdpSpec,
    base: &PolicyParams,
    settings: &VerifySettings,
    fixed: Option<(f64, f64)>,
) -> Result<(CheckOutcome, CheckOutcome)> {
    let mut rng = stream_rng(settings.seed, 21);
    let (mut adv_margin, mut grad_margin) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..settings.probes {
        let params = random_like(base, 2.0, &mut rng);
        let (lambda, tau) = fixed.unwrap_or_else(|| (rng.random::<f64>() * settings.lambda_max, rng.random::<f64>()));
        let s = rng.random_range(0..spec.n_states());
        let table = params.table();
        let g = UtilityFn::regularized(spec, lambda, tau, &table)?;
        let report = policy_evaluation(spec, &table, &g)?;
        let l_sq = advantage_bound_sq(spec.gamma(), spec.n_actions(), lambda, tau);
        let value = average_squared_advantage(&report, &table, s);
        adv_margin = adv_margin.min((l_sq - value) / l_sq + 1e-10);

        let grad = exact_terms(spec, &params, lambda, tau)?.lagrangian_gradient();
        let g_bound = measure_score_bounds(&[params.clone()], spec, ScoreProbe { perturbations: 0, radius: 0.1 }, &mut rng)?.g;
        let bound = gradient_norm_bound_sq(spec.gamma(), g_bound, l_sq);
        grad_margin = grad_margin.min((bound - grad.norm_squared()) / bound.max(f64::MIN_POSITIVE) + 1e-10);
    }
    let suffix = if fixed.is_some() { " (tau = 0, lambda = 0)" } else { "" };
    Ok((
        CheckOutcome::new(
            &format!("averaged-advantage bound{suffix}"),
            adv_margin,
            format!("{} probes, relative slack", settings.probes),
        ),
        CheckOutcome::new(
            &format!("gradient-norm bound{suffix}"),
            grad_margin,
            format!("{} probes, relative slack", settings.probes),
        ),
    ))
}

/// Policy-gradient identity: exact gradient versus central differences of the Lagrangian.
pub fn check_policy_gradient_identity(
    spec: &CmdpSpec,
    base: &PolicyParams,
    settings: &VerifySettings,
    tolerance: f64,
) -> Result<CheckOutcome> {
    let mut rng = stream_rng(settings.seed, 22);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut with_entropy = 0;
    for i in 0..settings.probes {
        let params = random_like(base, 1.5, &mut rng);
        let lambda = rng.random::<f64>() * settings.lambda_max;
        // Every other probe keeps the entropy term on.
        let tau = if i % 2 == 0 { 0.0 } else { 0.05 + 0.95 * rng.random::<f64>() };
        with_entropy += usize::from(tau > 0.0);
        let grad = exact_terms(spec, &params, lambda, tau)?.lagrangian_gradient();
        for j in 0..params.dim() {
            let mut up = params.theta().clone();
            up[j] += h;
            let mut down = params.theta().clone();
            down[j] -= h;
            let fd = (lagrangian(spec, &params.with_theta(up)?.table(), lambda, tau)?
                - lagrangian(spec, &params.with_theta(down)?.table(), lambda, tau)?)
                / (2.0 * h);
            worst = worst.max((fd - grad[j]).abs());
        }
    }
    Ok(CheckOutcome::new(
        "policy-gradient identity",
        tolerance - worst,
        format!("max |fd - exact| = {worst:.2e} over {} probes ({with_entropy} with tau > 0)", settings.probes),
    ))
}

/// Compatible-error gradient `F omega - H / (1 - gamma)` versus central differences in omega.
pub fn check_error_gradient_identity(
    spec: &CmdpSpec,
    base: &PolicyParams,
    settings: &VerifySettings,
    tolerance: f64,
) -> Result<CheckOutcome> {
    let mut rng = stream_rng(settings.seed, 23);
    let h = 1e-3;
    let mut worst: f64 = 0.0;
    for _ in 0..settings.probes {
        let params = random_like(base, 1.5, &mut rng);
        let lambda = rng.random::<f64>() * settings.lambda_max;
        let tau = rng.random::<f64>();
        let omega = DVector::from_fn(params.dim(), |_, _| 3.0 * rng.sample::<f64, _>(StandardNormal));
        let analytic = exact_terms(spec, &params, lambda, tau)?.error_gradient(&omega);
        for j in 0..params.dim() {
            let mut up = omega.clone();
            up[j] += h;
            let mut down = omega.clone();
            down[j] -= h;
            let fd = (compatible_error(spec, &params, lambda, tau, &up, None)?
                - compatible_error(spec, &params, lambda, tau, &down, None)?)
                / (2.0 * h);
            worst = worst.max((fd - analytic[j]).abs());
        }
    }
    Ok(CheckOutcome::new(
        "error-gradient identity",
        tolerance - worst,
        format!("max |fd - analytic| = {worst:.2e} over {} probes", settings.probes),
    ))
}

/// Running mean and second moment of a vector stream.
struct Moments {
    n: usize,
    sum: DVector<f64>,
    sum_sq: DVector<f64>,
}

impl Moments {
    fn new(dim: usize) -> Self {
        Self {
            n: 0,
            sum: DVector::zeros(dim),
            sum_sq: DVector::zeros(dim),
        }
    }

    fn push(&mut self, x: &DVector<f64>) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x.component_mul(x);
    }

    fn mean(&self) -> DVector<f64> {
        &self.sum / self.n as f64
    }

    fn standard_error(&self) -> DVector<f64> {
        let n = self.n as f64;
        let mean = self.mean();
        DVector::from_fn(self.sum.len(), |i, _| {
            let var = (self.sum_sq[i] / n - mean[i] * mean[i]).max(0.0) * n / (n - 1.0);
            (var / n).sqrt()
        })
    }
}

/// `|mean - truth|` in units of standard errors; exact agreement is required when the SE vanishes.
fn z_scores(moments: &Moments, truth: &DVector<f64>) -> Vec<f64> {
    let mean = moments.mean();
    let se = moments.standard_error();
    (0..truth.len())
        .map(|i| {
            let diff = (mean[i] - truth[i]).abs();
            if se[i] > 0.0 {
                diff / se[i]
            } else if diff <= 1e-12 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

/// Mean of `J_c` draws and gradient draws against the oracle, in standard errors.
pub fn check_unbiasedness(spec: &CmdpSpec, base: &PolicyParams, settings: &VerifySettings) -> Result<CheckOutcome> {
    let mut rng = stream_rng(settings.seed, 24);
    let mut worst: f64 = 0.0;
    for _ in 0..settings.unbiased_tuples {
        let params = random_like(base, 1.0, &mut rng);
        let lambda = rng.random::<f64>() * settings.lambda_max.min(5.0);
        let tau = rng.random::<f64>();
        let omega = DVector::from_fn(params.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let ctx = SamplerContext::new(spec, &params, lambda, tau)?;
        let truth_grad = exact_terms(spec, &params, lambda, tau)?.error_gradient(&omega);
        let truth_jc = j_value(spec, &params.table(), spec.cost_table())?;
        let mut draws: StreamRng = stream_rng(rng.random(), 0);
        let mut grad_m = Moments::new(params.dim());
        let mut jc_m = Moments::new(1);
        let mut grad = DVector::zeros(params.dim());
        let mut adv = vec![0.0; spec.n_actions()];
        for _ in 0..settings.mc_samples {
            let summary = ctx.estimate_into(&omega, &mut draws, &mut grad, &mut adv);
            grad_m.push(&grad);
            jc_m.push(&DVector::from_element(1, summary.j_c_hat));
        }
        for z in z_scores(&grad_m, &truth_grad)
            .into_iter()
            .chain(z_scores(&jc_m, &DVector::from_element(1, truth_jc)))
        {
            worst = worst.max(z);
        }
    }
    Ok(CheckOutcome::new(
        "estimator unbiasedness",
        4.0 - worst,
        format!(
            "worst |z| = {worst:.2} over {} tuples x {} draws",
            settings.unbiased_tuples, settings.mc_samples
        ),
    ))
}

/// Result of the second-moment dominance check at one tuple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceProbe {
    pub sigma_sq: f64,
    pub min_eigenvalue: f64,
    pub radius: f64,
}

/// `eigmin(sigma^2 F - M)` with `M` the empirical second moment of gradient draws at the
/// natural gradient, and the 4-standard-error Frobenius radius of `M`.
pub fn variance_probe(
    spec: &CmdpSpec,
    params: &PolicyParams,
    lambda: f64,
    tau: f64,
    samples: usize,
    mu_floor: f64,
    seed: u64,
) -> Result<VarianceProbe> {
    let terms = exact_terms(spec, params, lambda, tau)?;
    let omega_star = terms.npg();
    let fisher = exact_fisher(spec, params)?;
    let mu_f = min_range_eigenvalue(&fisher).unwrap_or(0.0).max(mu_floor);
    let mut rng = stream_rng(seed, 0);
    let g = measure_score_bounds(&[params.clone()], spec, ScoreProbe { perturbations: 0, radius: 0.1 }, &mut rng)?.g;
    let sigma_sq = noise_variance_bound(spec.gamma(), spec.n_actions(), lambda, tau, g, mu_f);

    let d = params.dim();
    let ctx = SamplerContext::new(spec, params, lambda, tau)?;
    let mut m: DMatrix<f64> = DMatrix::zeros(d, d);
    let mut m_sq: DMatrix<f64> = DMatrix::zeros(d, d);
    let mut grad = DVector::zeros(d);
    let mut adv = vec![0.0; spec.n_actions()];
    for _ in 0..samples {
        ctx.estimate_into(&omega_star, &mut rng, &mut grad, &mut adv);
        for i in 0..d {
            for j in 0..d {
                let v = grad[i] * grad[j];
                m[(i, j)] += v;
                m_sq[(i, j)] += v * v;
            }
        }
    }
    let n = samples as f64;
    m /= n;
    let mut se_sq: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let var = (m_sq[(i, j)] / n - m[(i, j)].powi(2)).max(0.0) * n / (n - 1.0);
            se_sq += var / n;
        }
    }
    Ok(VarianceProbe {
        sigma_sq,
        min_eigenvalue: min_eigenvalue(&(fisher * sigma_sq - m)),
        radius: 4.0 * se_sq.sqrt(),
    })
}

pub fn check_variance_dominance(spec: &CmdpSpec, base: &PolicyParams, settings: &VerifySettings) -> Result<CheckOutcome> {
    let mut rng = stream_rng(settings.seed, 25);
    let mut worst = f64::INFINITY;
    for _ in 0..settings.variance_tuples {
        let params = random_like(base, 1.0, &mut rng);
        let lambda = rng.random::<f64>() * settings.lambda_max.min(5.0);
        let tau = rng.random::<f64>();
        let probe = variance_probe(spec, &params, lambda, tau, settings.mc_samples, 1e-3, rng.random())?;
        worst = worst.min(probe.min_eigenvalue + probe.radius);
    }
    Ok(CheckOutcome::new(
        "gradient second-moment dominance",
        worst,
        format!("{} tuples x {} draws", settings.variance_tuples, settings.mc_samples),
    ))
}

/// Mean samples per estimator call against `(A + 2) / (1 - gamma)`.
pub fn check_sample_accounting(spec: &CmdpSpec, settings: &VerifySettings) -> Result<CheckOutcome> {
    let params = PolicyParams::tabular(spec.n_states(), spec.n_actions());
    let ctx = SamplerContext::new(spec, &params, 0.5, 0.1)?;
    let mut rng = stream_rng(settings.seed, 26);
    let omega = DVector::zeros(params.dim());
    let mut grad = DVector::zeros(params.dim());
    let mut adv = vec![0.0; spec.n_actions()];
    let mut total = 0u64;
    for _ in 0..settings.mc_samples {
        total += ctx.estimate_into(&omega, &mut rng, &mut grad, &mut adv).samples_used;
    }
    let mean = total as f64 / settings.mc_samples as f64;
    let expect = (spec.n_actions() as f64 + 2.0) / (1.0 - spec.gamma());
    let rel = (mean - expect).abs() / expect;
    Ok(CheckOutcome::new(
        "sampler cost accounting",
        0.02 - rel,
        format!("mean {mean:.3} vs {expect:.3} per call"),
    ))
}

/// Random full-support policy table.
pub fn random_policy<R: Rng + ?Sized>(spec: &CmdpSpec, rng: &mut R) -> PolicyTable {
    random_tabular(spec, 1.5, rng).table()
}

/// Performance difference: `J^1 - J^2 = (1/(1-gamma)) sum nu^1 A^2` for reward and cost.
pub fn check_performance_difference(spec: &CmdpSpec, settings: &VerifySettings) -> Result<CheckOutcome> {
    let mut rng = stream_rng(settings.seed, 27);
    let mut worst: f64 = 0.0;
    for _ in 0..settings.policy_pairs {
        let (p1, p2) = (random_policy(spec, &mut rng), random_policy(spec, &mut rng));
        for g in [UtilityFn::reward(spec), UtilityFn::cost(spec)] {
            let r1 = policy_evaluation(spec, &p1, &g)?;
            let r2 = policy_evaluation(spec, &p2, &g)?;
            let mut weighted = 0.0;
            for s in 0..spec.n_states() {
                for a in 0..spec.n_actions() {
                    weighted += r1.occupancy_nu[s][a] * r2.adv[s][a];
                }
            }
            let diff = r1.j_value - r2.j_value - weighted / (1.0 - spec.gamma());
            worst = worst.max(diff.abs());
        }
    }
    Ok(CheckOutcome::new(
        "performance-difference identity",
        1e-9 - worst,
        format!("max residual {worst:.2e} over {} pairs", settings.policy_pairs),
    ))
}

/// Two-sided saddle inequality at random `(pi, lambda)` probes.
pub fn check_saddle_sandwich(spec: &CmdpSpec, settings: &VerifySettings) -> Result<CheckOutcome> {
    let saddle = solve_regularized_saddle(spec, settings.saddle_tau, settings.lambda_max)?;
    let mut rng = stream_rng(settings.seed, 28);
    let mut worst = f64::INFINITY;
    for _ in 0..settings.probes {
        let pi = random_policy(spec, &mut rng);
        let lambda = rng.random::<f64>() * settings.lambda_max;
        let (left, right) = saddle_sandwich_margins(spec, &saddle, &pi, lambda)?;
        worst = worst.min(left).min(right);
    }
    Ok(CheckOutcome::new(
        "saddle sandwich",
        worst + 1e-8,
        format!(
            "tau = {}, lambda*_tau = {:.6}, {} probes",
            settings.saddle_tau, saddle.lambda_star_tau, settings.probes
        ),
    ))
}

/// LP optimum consistency: recovered policy value, strong duality and the dual bound.
pub fn check_constrained_optimum(spec: &CmdpSpec, settings: &VerifySettings) -> Result<Vec<CheckOutcome>> {
    let opt = solve_constrained_optimum(spec)?;
    let evaluated = j_value(spec, &opt.policy, spec.reward_table())?;
    let jc = j_value(spec, &opt.policy, spec.cost_table())?;
    let combined = UtilityFn::combined(spec, opt.lambda_star);
    let (v_star, _) = optimal_values(spec, combined.table())?;
    let dual_value: f64 = v_star.iter().zip(spec.rho()).map(|(v, r)| v * r).sum();
    let bound = 1.0 / ((1.0 - spec.gamma()) * settings.c_slat);
    Ok(vec![
        CheckOutcome::new(
            "LP value consistency",
            1e-8 - (evaluated - opt.j_r_star).abs().max((-jc).max(0.0)),
            format!("J_r* = {:.10}, J_c(pi*) = {jc:.3e}", opt.j_r_star),
        ),
        CheckOutcome::new(
            "LP strong duality",
            1e-8 - (dual_value - opt.j_r_star).abs(),
            format!("max_pi J_(r + lambda* c) = {dual_value:.10}, lambda* = {:.6}", opt.lambda_star),
        ),
        CheckOutcome::new(
            "unregularized dual bound",
            bound - opt.lambda_star,
            format!("lambda* = {:.6} <= {bound:.6}", opt.lambda_star),
        ),
    ])
}

/// Entropy never exceeds `log A / (1 - gamma)`.
pub fn check_entropy_ceiling(spec: &CmdpSpec, settings: &VerifySettings) -> Result<CheckOutcome> {
    let mut rng = stream_rng(settings.seed, 29);
    let ceiling = (spec.n_actions() as f64).ln() / (1.0 - spec.gamma());
    let mut worst = f64::INFINITY;
    for _ in 0..settings.probes {
        worst = worst.min(ceiling - entropy(spec, &random_policy(spec, &mut rng))?);
    }
    Ok(CheckOutcome::new("entropy ceiling", worst + 1e-12, format!("log A / (1 - gamma) = {ceiling:.6}")))
}

/// Runs every check in a fixed order.
pub fn run_suite(spec: &CmdpSpec, base: &PolicyParams, settings: &VerifySettings) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    let (adv, grad) = check_advantage_and_gradient_bounds(spec, base, settings, None)?;
    out.push(adv);
    out.push(grad);
    let (adv0, grad0) = check_advantage_and_gradient_bounds(spec, base, settings, Some((0.0, 0.0)))?;
    out.push(adv0);
    out.push(grad0);
    out.push(check_policy_gradient_identity(spec, base, settings, 1e-6)?);
    out.push(check_error_gradient_identity(spec, base, settings, 1e-8)?);
    out.push(check_unbiasedness(spec, base, settings)?);
    out.push(check_variance_dominance(spec, base, settings)?);
    out.push(check_sample_accounting(spec, settings)?);
    out.push(check_performance_difference(spec, settings)?);
    out.push(check_saddle_sandwich(spec, settings)?);
    out.extend(check_constrained_optimum(spec, settings)?);
    out.push(check_entropy_ceiling(spec, settings)?);
    Ok(out)
}
