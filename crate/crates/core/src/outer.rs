//! Outer primal-dual loop, hyperparameter schedule, constant calibration and
//! the conservative-constraint transform.

use nalgebra::DVector;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::asgd::{round_up_even, run_with_oracle, AsgdRates, QuadraticGradient, SampledGradient};
use crate::cmdp::{CmdpSpec, UtilityFn};
use crate::error::{Error, Result};
use crate::linalg::min_range_eigenvalue;
use crate::oracle::{
    compatible_error, exact_fisher, exact_terms, j_value, occupancy, SaddlePoint,
};
use crate::policy::{measure_score_bounds, Parameterization, PolicyParams, PolicyTable, ScoreBounds, ScoreProbe};
use crate::rng::stream_rng;
use crate::sampler::SamplerContext;

/// Explicit replacements for derived schedule values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleOverrides {
    pub tau: Option<f64>,
    pub eta: Option<f64>,
    pub k: Option<u64>,
    pub h: Option<usize>,
    pub lambda_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub epsilon: f64,
    pub epsilon_bias: f64,
    pub c_slat: f64,
    pub g: f64,
    pub b: f64,
    pub mu_f: f64,
    pub c_bar: f64,
    pub c: f64,
    pub overrides: ScheduleOverrides,
}

/// Concrete hyperparameters of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    pub tau: f64,
    pub eta: f64,
    pub k: u64,
    pub h: usize,
    pub lambda_max: f64,
    pub rates: AsgdRates,
    /// Names of fields taken from overrides.
    pub overridden: Vec<String>,
}

/// `ceil` that forgives round-off just above an integer (`2 / 1e-4` evaluates
/// to `19999.999999999996`-style values).
pub fn tolerant_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Derives `tau, K, eta, H, lambda_max` and the inner-loop rates.
pub fn derive_schedule(config: &ScheduleConfig, gamma: f64) -> Result<Schedule> {
    let ScheduleConfig {
        epsilon,
        epsilon_bias,
        c_slat,
        g,
        b,
        mu_f,
        c_bar,
        ..
    } = *config;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon = {epsilon} must lie in (0, 1)")));
    }
    if !(0.0..1.0).contains(&epsilon_bias) {
        return Err(Error::invalid(format!("epsilon_bias = {epsilon_bias} must lie in [0, 1)")));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma = {gamma} must lie in [0, 1)")));
    }
    if !(c_slat > 0.0 && c_slat <= 1.0 / (1.0 - gamma) + 1e-12) {
        return Err(Error::invalid(format!("c_slat = {c_slat} must lie in (0, 1/(1-gamma)]")));
    }
    if !(g > 0.0 && b > 0.0 && mu_f > 0.0 && c_bar > 0.0 && config.c > 0.0) {
        return Err(Error::invalid("G, B, mu_F, C_bar and C must be positive"));
    }
    let o = &config.overrides;
    let mut overridden = Vec::new();
    let mut pick = |name: &str, given: Option<f64>, derived: f64| match given {
        Some(v) => {
            overridden.push(name.to_string());
            v
        }
        None => derived,
    };

    let tau_derived = epsilon.max(epsilon_bias.powf(1.0 / 6.0));
    let tau = pick("tau", o.tau, tau_derived);
    if !(tau > 0.0) {
        return Err(Error::ScheduleInfeasible(format!("tau = {tau} must be positive")));
    }
    let k_derived = tolerant_ceil(2.0 / (epsilon * epsilon * tau * tau));
    let k = pick("k", o.k.map(|k| k as f64), k_derived) as u64;
    let eta = pick("eta", o.eta, epsilon * epsilon * tau);
    let h_derived = round_up_even(tolerant_ceil(40.0 * g * g / mu_f * (1.0 / (tau * epsilon * epsilon)).ln()).max(2.0) as usize);
    let h = pick("h", o.h.map(|h| h as f64), h_derived as f64) as usize;
    let lambda_max = pick("lambda_max", o.lambda_max, 4.0 / ((1.0 - gamma) * c_slat));
    if !(eta > 0.0) {
        return Err(Error::ScheduleInfeasible(format!("eta = {eta} must be positive")));
    }
    if eta * tau >= 1.0 {
        return Err(Error::ScheduleInfeasible(format!(
            "eta * tau = {} violates eta * tau < 1",
            eta * tau
        )));
    }
    if !(lambda_max >= 0.0) {
        return Err(Error::ScheduleInfeasible(format!("lambda_max = {lambda_max} must be nonnegative")));
    }
    if h < 2 || h % 2 != 0 {
        return Err(Error::ScheduleInfeasible(format!("H = {h} must be even and at least 2")));
    }
    let rates = AsgdRates::from_constants(g, mu_f, h)?;
    Ok(Schedule {
        tau,
        eta,
        k,
        h,
        lambda_max,
        rates,
        overridden,
    })
}

/// Inner-loop length threshold `max{1, C_bar (G^2/mu_F) log(sqrt(d) G^2/mu_F)}`.
pub fn inner_length_threshold(c_bar: f64, g: f64, mu_f: f64, dim: usize) -> f64 {
    let ratio = g * g / mu_f;
    (c_bar * ratio * ((dim as f64).sqrt() * ratio).ln()).max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualState {
    pub lambda: f64,
}

/// `lambda' = clip(lambda (1 - eta tau) - eta j_c_hat, 0, lambda_max)`.
pub fn dual_step(state: DualState, j_c_hat: f64, eta: f64, tau: f64, lambda_max: f64) -> DualState {
    let raw = state.lambda * (1.0 - eta * tau) - eta * j_c_hat;
    DualState {
        lambda: raw.clamp(0.0, lambda_max),
    }
}

/// `theta' = theta + eta omega`.
pub fn primal_step(params: &PolicyParams, omega: &DVector<f64>, eta: f64) -> Result<PolicyParams> {
    if omega.iter().any(|x| !x.is_finite()) {
        return Err(Error::Diverged("non-finite natural-gradient estimate".into()));
    }
    let theta = params.theta() + omega * eta;
    if theta.iter().any(|x| !x.is_finite()) {
        return Err(Error::Diverged("non-finite policy parameters".into()));
    }
    params.with_theta(theta)
}

/// Per-iteration metrics. Oracle columns are NaN without instrumentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub k: u64,
    pub optimality_gap: f64,
    pub violation: f64,
    pub phi_surrogate: f64,
    pub omega_norm: f64,
    pub lambda: f64,
    pub samples_cumulative: u64,
}

/// Oracle reference quantities for metrics.
#[derive(Debug, Clone)]
pub struct Instrumentation {
    pub j_r_star: f64,
    pub saddle: SaddlePoint,
}

/// Exact-mode per-iteration quantities for the potential recursion audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditPoint {
    pub k: u64,
    pub phi: f64,
    /// `||omega_k - omega*_k||`.
    pub bias: f64,
    pub omega_sq: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Exact,
    Stochastic { seed: u64 },
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Record every `stride` iterations; `0` picks `max(1, K / 200)`.
    pub record_stride: u64,
    pub instrumentation: Option<Instrumentation>,
    /// Collect [`AuditPoint`]s (exact mode with instrumentation only).
    pub audit: bool,
    /// Keep every `theta_k` for post-run constant measurement.
    pub keep_thetas: bool,
    pub lambda0: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            record_stride: 0,
            instrumentation: None,
            audit: false,
            keep_thetas: false,
            lambda0: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub params: PolicyParams,
    pub dual: DualState,
    pub records: Vec<RunRecord>,
    pub audit: Vec<AuditPoint>,
    pub thetas: Vec<PolicyParams>,
    /// Environment samples actually drawn (0 in exact mode).
    pub samples_drawn: u64,
}

/// Expected samples of one outer iteration: `H` gradient draws plus one `J_c` draw.
pub fn expected_samples_per_iteration(h: usize, n_actions: usize, gamma: f64) -> f64 {
    (h as f64 * (n_actions as f64 + 2.0) + 1.0) / (1.0 - gamma)
}

/// Largest `K' <= K` whose expected stochastic sample count stays within `cap`.
pub fn cap_iterations(k: u64, h: usize, n_actions: usize, gamma: f64, cap: u64) -> u64 {
    let per = expected_samples_per_iteration(h, n_actions, gamma);
    k.min((cap as f64 / per).floor() as u64)
}

struct Metrics<'a> {
    spec: &'a CmdpSpec,
    inst: &'a Instrumentation,
    star_d: Vec<f64>,
}

impl<'a> Metrics<'a> {
    fn new(spec: &'a CmdpSpec, inst: &'a Instrumentation) -> Result<Self> {
        Ok(Self {
            spec,
            inst,
            star_d: occupancy(spec, &inst.saddle.pi_star_tau)?,
        })
    }

    fn phi(&self, table: &PolicyTable, lambda: f64) -> f64 {
        let star = &self.inst.saddle.pi_star_tau;
        let mut kl = 0.0;
        for (s, ds) in self.star_d.iter().enumerate() {
            for a in 0..self.spec.n_actions() {
                let p = star.prob(s, a);
                if p > 0.0 {
                    kl += ds * p * (star.log_prob(s, a) - table.log_prob(s, a));
                }
            }
        }
        let dl = self.inst.saddle.lambda_star_tau - lambda;
        kl + 0.5 * dl * dl
    }

    fn gap_violation(&self, table: &PolicyTable) -> Result<(f64, f64)> {
        let jr = j_value(self.spec, table, self.spec.reward_table())?;
        let jc = j_value(self.spec, table, self.spec.cost_table())?;
        Ok((self.inst.j_r_star - jr, (-jc).max(0.0)))
    }
}

/// Runs `schedule.k` outer iterations from `params0`.
pub fn run_pdr_anpg(
    spec: &CmdpSpec,
    params0: &PolicyParams,
    schedule: &Schedule,
    mode: RunMode,
    options: &RunOptions,
) -> Result<RunOutput> {
    if params0.n_states() != spec.n_states() || params0.n_actions() != spec.n_actions() {
        return Err(Error::Dimension("initial parameters do not match the spec".into()));
    }
    let k_total = schedule.k;
    let stride = if options.record_stride == 0 {
        (k_total / 200).max(1)
    } else {
        options.record_stride
    };
    let metrics = match &options.instrumentation {
        Some(inst) => Some(Metrics::new(spec, inst)?),
        None => None,
    };
    let nominal = expected_samples_per_iteration(schedule.h, spec.n_actions(), spec.gamma());
    let mut rng = match mode {
        RunMode::Stochastic { seed } => Some(stream_rng(seed, 0)),
        RunMode::Exact => None,
    };

    let mut params = params0.clone();
    let mut dual = DualState {
        lambda: options.lambda0.clamp(0.0, schedule.lambda_max),
    };
    let mut records = Vec::new();
    let mut audit = Vec::new();
    let mut thetas = Vec::new();
    let mut samples_drawn = 0u64;
    let mut last_omega_norm = 0.0;

    let cumulative = |k: u64, drawn: u64| -> u64 {
        match mode {
            RunMode::Exact => (k as f64 * nominal).round() as u64,
            RunMode::Stochastic { .. } => drawn,
        }
    };
    let record = |k: u64, params: &PolicyParams, lambda: f64, omega_norm: f64, drawn: u64| -> Result<RunRecord> {
        let (gap, violation, phi) = match &metrics {
            Some(m) => {
                let table = params.table();
                let (gap, violation) = m.gap_violation(&table)?;
                (gap, violation, m.phi(&table, lambda))
            }
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        Ok(RunRecord {
            k,
            optimality_gap: gap,
            violation,
            phi_surrogate: phi,
            omega_norm,
            lambda,
            samples_cumulative: cumulative(k, drawn),
        })
    };

    if k_total == 0 {
        return Ok(RunOutput {
            params,
            dual,
            records,
            audit,
            thetas,
            samples_drawn,
        });
    }

    for k in 0..k_total {
        if k % stride == 0 {
            records.push(record(k, &params, dual.lambda, last_omega_norm, samples_drawn)?);
        }
        if options.keep_thetas {
            thetas.push(params.clone());
        }
        let (omega, j_c) = match rng.as_mut() {
            None => {
                let terms = exact_terms(spec, &params, dual.lambda, schedule.tau)?;
                let mut oracle = QuadraticGradient::from_terms(&terms);
                let (omega, _) = run_with_oracle(&mut oracle, &schedule.rates);
                if options.audit {
                    if let Some(m) = &metrics {
                        let omega_star = terms.npg();
                        audit.push(AuditPoint {
                            k,
                            phi: m.phi(&params.table(), dual.lambda),
                            bias: (&omega - &omega_star).norm(),
                            omega_sq: omega.norm_squared(),
                            lambda: dual.lambda,
                        });
                    }
                }
                let j_c = j_value(spec, &params.table(), spec.cost_table())?;
                (omega, j_c)
            }
            Some(rng) => {
                let ctx = SamplerContext::new(spec, &params, dual.lambda, schedule.tau)?;
                let (omega, used) = {
                    let mut oracle = SampledGradient::new(ctx.clone(), &mut *rng, spec.n_actions());
                    run_with_oracle(&mut oracle, &schedule.rates)
                };
                let (j_c, used_jc) = ctx.estimate_jc(rng);
                samples_drawn += used + used_jc;
                (omega, j_c)
            }
        };
        params = primal_step(&params, &omega, schedule.eta)?;
        dual = dual_step(dual, j_c, schedule.eta, schedule.tau, schedule.lambda_max);
        debug_assert!((0.0..=schedule.lambda_max).contains(&dual.lambda));
        last_omega_norm = omega.norm();
    }
    records.push(record(k_total, &params, dual.lambda, last_omega_norm, samples_drawn)?);
    if options.keep_thetas {
        thetas.push(params.clone());
    }
    if options.audit {
        if let Some(m) = &metrics {
            audit.push(AuditPoint {
                k: k_total,
                phi: m.phi(&params.table(), dual.lambda),
                bias: f64::NAN,
                omega_sq: f64::NAN,
                lambda: dual.lambda,
            });
        }
    }
    Ok(RunOutput {
        params,
        dual,
        records,
        audit,
        thetas,
        samples_drawn,
    })
}

/// Result of checking the potential recursion at every audited step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecursionAudit {
    pub checked: usize,
    pub violations: usize,
    /// Smallest `rhs - lhs` seen.
    pub worst_margin: f64,
    pub first_violation: Option<u64>,
}

/// Checks
/// `Phi_{k+1} <= (1 - eta tau) Phi_k + eta sqrt(eps_bias) + eta G bias_k
///  + (B eta^2 / 2) ||omega_k||^2 + eta^2 [2/(1-gamma)^2 + tau^2 lambda_max^2]`
/// for consecutive audit points.
pub fn potential_recursion_audit(
    points: &[AuditPoint],
    schedule: &Schedule,
    g: f64,
    b: f64,
    gamma: f64,
    epsilon_bias: f64,
    tolerance: f64,
) -> RecursionAudit {
    let (eta, tau) = (schedule.eta, schedule.tau);
    let constant = eta * epsilon_bias.sqrt()
        + eta * eta * (2.0 / (1.0 - gamma).powi(2) + tau * tau * schedule.lambda_max.powi(2));
    let mut audit = RecursionAudit {
        checked: 0,
        violations: 0,
        worst_margin: f64::INFINITY,
        first_violation: None,
    };
    for pair in points.windows(2) {
        let (now, next) = (pair[0], pair[1]);
        if next.k != now.k + 1 {
            continue;
        }
        let rhs = (1.0 - eta * tau) * now.phi + constant + eta * g * now.bias + 0.5 * b * eta * eta * now.omega_sq;
        let margin = rhs - next.phi;
        audit.checked += 1;
        audit.worst_margin = audit.worst_margin.min(margin);
        if margin < -tolerance {
            audit.violations += 1;
            audit.first_violation.get_or_insert(now.k);
        }
    }
    audit
}

/// `c' = c - (1 - gamma) delta'`, so that `J_{c'} = J_c - delta'`.
pub fn conservative_transform(spec: &CmdpSpec, delta_prime: f64) -> Result<CmdpSpec> {
    if !(delta_prime >= 0.0) || !delta_prime.is_finite() {
        return Err(Error::invalid(format!("delta' = {delta_prime} must be finite and nonnegative")));
    }
    let shift = (1.0 - spec.gamma()) * delta_prime;
    let a_n = spec.n_actions();
    let mut cost = Vec::with_capacity(spec.cost_table().len());
    for (i, &c) in spec.cost_table().iter().enumerate() {
        let shifted = c - shift;
        if shifted < -1.0 {
            return Err(Error::invalid(format!(
                "cost[{}][{}] = {c} shifted by {shift} leaves [-1, 1]",
                i / a_n,
                i % a_n
            )));
        }
        cost.push(shifted);
    }
    spec.with_cost(cost)
}

/// Empirical transferred compatible error `2 E_{nu^{pi*_tau}}` at the natural
/// gradient, the quantity `epsilon_bias` bounds.
pub fn epsilon_bias_proxy(
    spec: &CmdpSpec,
    params: &PolicyParams,
    lambda: f64,
    tau: f64,
    pi_star_tau: &PolicyTable,
) -> Result<f64> {
    let omega_star = exact_terms(spec, params, lambda, tau)?.npg();
    Ok(2.0 * compatible_error(spec, params, lambda, tau, &omega_star, Some(pi_star_tau))?)
}

/// Measured constants for the inner-loop rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub g: f64,
    pub b: f64,
    /// `max(measured, floor)`.
    pub mu_f: f64,
    /// Smallest Fisher eigenvalue on its range over the probe set.
    pub mu_f_measured: f64,
    pub mu_floor: f64,
    pub clamped: bool,
    pub score_bounds: ScoreBounds,
}

/// Pilot parameters: `base`, the optional `anchor`, interpolations between
/// them at `t = 0.25, 0.5, 0.75`, and `perturbations` Gaussian moves of
/// length `radius` around each.
pub fn pilot_parameters<R: Rng + ?Sized>(
    base: &PolicyParams,
    anchor: Option<&PolicyParams>,
    perturbations: usize,
    radius: f64,
    rng: &mut R,
) -> Result<Vec<PolicyParams>> {
    let mut points = vec![base.clone()];
    if let Some(anchor) = anchor {
        for t in [0.25, 0.5, 0.75] {
            points.push(base.with_theta(base.theta() * (1.0 - t) + anchor.theta() * t)?);
        }
        points.push(anchor.clone());
    }
    let centers = points.clone();
    for center in &centers {
        for _ in 0..perturbations {
            let dir = DVector::<f64>::from_fn(center.dim(), |_, _| rng.sample(StandardNormal));
            let norm = dir.norm();
            if norm > 0.0 {
                points.push(center.with_theta(center.theta() + dir * (radius / norm))?);
            }
        }
    }
    Ok(points)
}

/// Measures `G`, `B` and the Fisher floor over `points`.
pub fn calibrate<R: RngCore + ?Sized>(
    spec: &CmdpSpec,
    points: &[PolicyParams],
    mu_floor: f64,
    rng: &mut R,
) -> Result<Calibration> {
    let score_bounds = measure_score_bounds(points, spec, ScoreProbe::default(), rng)?;
    let mut measured = f64::INFINITY;
    for p in points {
        if let Some(e) = min_range_eigenvalue(&exact_fisher(spec, p)?) {
            measured = measured.min(e);
        }
    }
    if !measured.is_finite() {
        measured = 0.0;
    }
    let mu_f = measured.max(mu_floor);
    Ok(Calibration {
        g: score_bounds.g,
        b: score_bounds.b,
        mu_f,
        mu_f_measured: measured,
        mu_floor,
        clamped: measured < mu_floor,
        score_bounds,
    })
}

/// Tabular parameters reproducing the regularized optimum, when the class allows it.
pub fn anchor_parameters(base: &PolicyParams, saddle: &SaddlePoint) -> Option<PolicyParams> {
    match base.kind() {
        Parameterization::TabularSoftmax => PolicyParams::tabular_from_policy(&saddle.pi_star_tau).ok(),
        Parameterization::LogLinear(_) => None,
    }
}

/// Utility of the regularized Lagrangian at `(theta, lambda, tau)`; re-exported for examples.
pub fn regularized_utility(spec: &CmdpSpec, params: &PolicyParams, lambda: f64, tau: f64) -> Result<UtilityFn> {
    UtilityFn::regularized(spec, lambda, tau, &params.table())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn base_config() -> ScheduleConfig {
        ScheduleConfig {
            epsilon: 0.1,
            epsilon_bias: 0.0,
            c_slat: 1.0,
            g: 1.0,
            b: 1.0,
            mu_f: 0.5,
            c_bar: 4.0,
            c: 1.0,
            overrides: ScheduleOverrides::default(),
        }
    }

    #[test]
    fn complete_class_schedule() {
        let s = derive_schedule(&base_config(), 0.5).unwrap();
        assert_abs_diff_eq!(s.tau, 0.1, epsilon = 1e-15);
        assert_eq!(s.k, 20000);
        assert_abs_diff_eq!(s.eta, 0.001, epsilon = 1e-15);
        assert_abs_diff_eq!(s.lambda_max, 8.0, epsilon = 1e-12);
        assert_eq!(s.h % 2, 0);
        // 40 * 1 / 0.5 * ln(1000) = 552.62 -> 553 -> 554.
        assert_eq!(s.h, 554);
    }

    #[test]
    fn boundary_tie_and_bias_branch() {
        let mut c = base_config();
        c.epsilon_bias = 1e-6;
        assert_abs_diff_eq!(derive_schedule(&c, 0.5).unwrap().tau, 0.1, epsilon = 1e-12);
        c.epsilon = 0.01;
        c.epsilon_bias = 0.1;
        let s = derive_schedule(&c, 0.5).unwrap();
        assert_abs_diff_eq!(s.tau, 0.1f64.powf(1.0 / 6.0), epsilon = 1e-15);
        // 2e4 / tau^2 = 43088.69 (independently: 2e4 * 10^(1/3)).
        assert_eq!(s.k, 43089);
    }

    #[test]
    fn overrides_and_infeasible_product() {
        let mut c = base_config();
        c.overrides.k = Some(100);
        c.overrides.eta = Some(20.0);
        match derive_schedule(&c, 0.5) {
            Err(Error::ScheduleInfeasible(msg)) => assert!(msg.contains("eta * tau")),
            other => panic!("unexpected {other:?}"),
        }
        c.overrides.eta = Some(0.5);
        let s = derive_schedule(&c, 0.5).unwrap();
        assert_eq!(s.k, 100);
        assert_eq!(s.overridden, vec!["k".to_string(), "eta".to_string()]);
    }

    #[test]
    fn dual_step_cases() {
        let lm = 10.0;
        assert_eq!(dual_step(DualState { lambda: 0.0 }, 5.0, 0.1, 0.5, lm).lambda, 0.0);
        assert_abs_diff_eq!(dual_step(DualState { lambda: 1.0 }, -2.0, 0.1, 0.5, lm).lambda, 1.15, epsilon = 1e-15);
        // At lambda_max with worst violation: eta tau lambda_max >= eta / (1 - gamma).
        let gamma = 0.5;
        let next = dual_step(DualState { lambda: lm }, -1.0 / (1.0 - gamma), 0.1, 0.5, lm);
        assert!(next.lambda < lm);
        assert_eq!(dual_step(DualState { lambda: lm }, -100.0, 0.1, 0.5, lm).lambda, lm);
    }

    #[test]
    fn primal_step_cases() {
        let p = PolicyParams::tabular(1, 2).with_theta(DVector::from_vec(vec![0.2, -0.4])).unwrap();
        assert_eq!(primal_step(&p, &DVector::zeros(2), 0.3).unwrap(), p);
        assert_eq!(primal_step(&p, &DVector::from_vec(vec![1.0, 2.0]), 0.0).unwrap(), p);
        assert!(matches!(
            primal_step(&p, &DVector::from_vec(vec![f64::NAN, 0.0]), 0.1),
            Err(Error::Diverged(_))
        ));
    }

    #[test]
    fn ceil_tolerates_round_off() {
        assert_eq!(tolerant_ceil(19999.999999999993), 20000.0);
        assert_eq!(tolerant_ceil(20000.2), 20001.0);
        assert_eq!(tolerant_ceil(4.0), 4.0);
    }

    #[test]
    fn iteration_cap() {
        // 10 * (2 + 2) + 1 = 41 pairs / 0.5 = 82 per iteration.
        assert_eq!(cap_iterations(1000, 10, 2, 0.5, 820), 10);
        assert_eq!(cap_iterations(5, 10, 2, 0.5, 820), 5);
    }
}
