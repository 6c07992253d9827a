//! Exact dynamic-programming oracle: policy evaluation, occupancy measures,
//! regularized Lagrangian and its gradient, Fisher matrix, natural gradient,
//! constrained optimum (occupancy LP) and the regularized saddle point.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cmdp::{CmdpSpec, UtilityFn};
use crate::error::{Error, Result};
use crate::linalg::{pinv_solve_symmetric, solve_dense};
use crate::lp::{solve_standard_form, LpOutcome};
use crate::policy::{PolicyParams, PolicyTable};

/// Values, advantages and occupancy measures of one policy under one utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub v: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub adv: Vec<Vec<f64>>,
    pub occupancy_d: Vec<f64>,
    pub occupancy_nu: Vec<Vec<f64>>,
    pub j_value: f64,
}

/// Regularized saddle point `(pi*_tau, lambda*_tau)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddlePoint {
    pub pi_star_tau: PolicyTable,
    pub lambda_star_tau: f64,
    pub lagrangian_value: f64,
    pub tau: f64,
    pub lambda_max: f64,
}

/// Solution of the unregularized constrained problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedOptimum {
    pub policy: PolicyTable,
    pub j_r_star: f64,
    /// Lagrange multiplier of `J_c >= 0` read off the LP dual.
    pub lambda_star: f64,
    /// `max_pi J_c^pi` from the feasibility LP.
    pub max_jc: f64,
}

fn check_shape(spec: &CmdpSpec, policy: &PolicyTable) -> Result<()> {
    if policy.n_states() != spec.n_states() || policy.n_actions() != spec.n_actions() {
        return Err(Error::Dimension(format!(
            "policy is {}x{}, spec is {}x{}",
            policy.n_states(),
            policy.n_actions(),
            spec.n_states(),
            spec.n_actions()
        )));
    }
    Ok(())
}

/// `I - gamma P_pi` as a dense matrix.
fn bellman_matrix(spec: &CmdpSpec, policy: &PolicyTable) -> DMatrix<f64> {
    let (s_n, a_n) = (spec.n_states(), spec.n_actions());
    let gamma = spec.gamma();
    let mut m = DMatrix::identity(s_n, s_n);
    for s in 0..s_n {
        for a in 0..a_n {
            let p = policy.prob(s, a);
            if p == 0.0 {
                continue;
            }
            for (s2, &t) in spec.transition_row(s, a).iter().enumerate() {
                m[(s, s2)] -= gamma * p * t;
            }
        }
    }
    m
}

/// `V^pi_g` from the Bellman linear system.
pub fn state_values(spec: &CmdpSpec, policy: &PolicyTable, table: &[f64]) -> Result<Vec<f64>> {
    check_shape(spec, policy)?;
    let a_n = spec.n_actions();
    let g_pi = DVector::from_fn(spec.n_states(), |s, _| {
        (0..a_n).map(|a| policy.prob(s, a) * table[s * a_n + a]).sum()
    });
    Ok(solve_dense(bellman_matrix(spec, policy), &g_pi)?.as_slice().to_vec())
}

/// `J^pi_g = rho . V^pi_g` for a utility table.
pub fn j_value(spec: &CmdpSpec, policy: &PolicyTable, table: &[f64]) -> Result<f64> {
    let v = state_values(spec, policy, table)?;
    Ok(v.iter().zip(spec.rho()).map(|(v, r)| v * r).sum())
}

/// Normalized discounted state occupancy `d^pi`.
pub fn occupancy(spec: &CmdpSpec, policy: &PolicyTable) -> Result<Vec<f64>> {
    check_shape(spec, policy)?;
    let rhs = DVector::from_iterator(spec.n_states(), spec.rho().iter().map(|r| (1.0 - spec.gamma()) * r));
    let d = solve_dense(bellman_matrix(spec, policy).transpose(), &rhs)?;
    let total = d.sum();
    Ok(d.iter().map(|x| x / total).collect())
}

/// Exact evaluation of `policy` under utility `g`.
pub fn policy_evaluation(spec: &CmdpSpec, policy: &PolicyTable, g: &UtilityFn) -> Result<OracleReport> {
    let (s_n, a_n) = (spec.n_states(), spec.n_actions());
    if g.table().len() != s_n * a_n {
        return Err(Error::Dimension("utility does not match the spec".into()));
    }
    let v = state_values(spec, policy, g.table())?;
    let gamma = spec.gamma();
    let q: Vec<Vec<f64>> = (0..s_n)
        .map(|s| {
            (0..a_n)
                .map(|a| {
                    let next: f64 = spec.transition_row(s, a).iter().zip(&v).map(|(p, v)| p * v).sum();
                    g.value(s, a) + gamma * next
                })
                .collect()
        })
        .collect();
    let adv = q
        .iter()
        .zip(&v)
        .map(|(row, vs)| row.iter().map(|x| x - vs).collect())
        .collect();
    let occupancy_d = occupancy(spec, policy)?;
    let occupancy_nu = (0..s_n)
        .map(|s| (0..a_n).map(|a| occupancy_d[s] * policy.prob(s, a)).collect())
        .collect();
    let j_value = v.iter().zip(spec.rho()).map(|(v, r)| v * r).sum();
    Ok(OracleReport {
        v,
        q,
        adv,
        occupancy_d,
        occupancy_nu,
        j_value,
    })
}

/// Discounted-visitation entropy `H(pi) = -1/(1-gamma) sum d(s) pi log pi`.
pub fn entropy(spec: &CmdpSpec, policy: &PolicyTable) -> Result<f64> {
    let psi = UtilityFn::entropy(policy)?;
    let d = occupancy(spec, policy)?;
    let a_n = spec.n_actions();
    let total: f64 = d
        .iter()
        .enumerate()
        .map(|(s, ds)| ds * (0..a_n).map(|a| policy.prob(s, a) * psi.value(s, a)).sum::<f64>())
        .sum();
    Ok(total / (1.0 - spec.gamma()))
}

/// `L_tau(pi, lambda) = J_{r + lambda c} + tau (H(pi) + lambda^2 / 2)`.
pub fn lagrangian(spec: &CmdpSpec, policy: &PolicyTable, lambda: f64, tau: f64) -> Result<f64> {
    let base = j_value(spec, policy, UtilityFn::combined(spec, lambda).table())?;
    if tau == 0.0 {
        return Ok(base);
    }
    Ok(base + tau * (entropy(spec, policy)? + 0.5 * lambda * lambda))
}

/// Exact Fisher matrix and `H_tau` at `(theta, lambda)`, sharing one evaluation.
#[derive(Debug, Clone)]
pub struct ExactTerms {
    pub fisher: DMatrix<f64>,
    /// `H_tau = E_nu[A_{r + lambda c + tau psi} score]`.
    pub h: DVector<f64>,
    pub gamma: f64,
}

impl ExactTerms {
    /// `grad_theta L_tau = H_tau / (1 - gamma)`.
    pub fn lagrangian_gradient(&self) -> DVector<f64> {
        &self.h / (1.0 - self.gamma)
    }

    /// Gradient of the compatible error at `omega`: `F omega - H_tau / (1 - gamma)`.
    pub fn error_gradient(&self, omega: &DVector<f64>) -> DVector<f64> {
        &self.fisher * omega - self.lagrangian_gradient()
    }

    /// Minimum-norm natural gradient `F^+ grad L`.
    pub fn npg(&self) -> DVector<f64> {
        pinv_solve_symmetric(&self.fisher, &self.lagrangian_gradient())
    }
}

pub fn exact_terms(spec: &CmdpSpec, params: &PolicyParams, lambda: f64, tau: f64) -> Result<ExactTerms> {
    let table = params.table();
    let g = UtilityFn::regularized(spec, lambda, tau, &table)?;
    let report = policy_evaluation(spec, &table, &g)?;
    let d = params.dim();
    let mut fisher = DMatrix::zeros(d, d);
    let mut h = DVector::zeros(d);
    let mut score = DVector::zeros(d);
    for s in 0..spec.n_states() {
        let probs = table.probs_at(s);
        let ds = report.occupancy_d[s];
        for (a, &p) in probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            params.score_with(s, a, probs, &mut score);
            fisher.ger(ds * p, &score, &score, 1.0);
            h.axpy(ds * p * report.adv[s][a], &score, 1.0);
        }
    }
    Ok(ExactTerms {
        fisher,
        h,
        gamma: spec.gamma(),
    })
}

/// `grad_theta L_tau(theta, lambda)` via the advantage-weighted score identity.
pub fn exact_lagrangian_gradient(
    spec: &CmdpSpec,
    params: &PolicyParams,
    lambda: f64,
    tau: f64,
) -> Result<DVector<f64>> {
    Ok(exact_terms(spec, params, lambda, tau)?.lagrangian_gradient())
}

/// `F(theta) = sum_s d(s) fisher_at_state(s)`.
pub fn exact_fisher(spec: &CmdpSpec, params: &PolicyParams) -> Result<DMatrix<f64>> {
    let table = params.table();
    let d = occupancy(spec, &table)?;
    let mut fisher = DMatrix::zeros(params.dim(), params.dim());
    for (s, ds) in d.iter().enumerate() {
        fisher += params.fisher_with(s, table.probs_at(s)) * *ds;
    }
    Ok(fisher)
}

/// Natural gradient. `ridge > 0` solves `(F + ridge I) omega = grad L`; `ridge = 0`
/// returns the minimum-norm pseudoinverse solution.
pub fn exact_npg(
    spec: &CmdpSpec,
    params: &PolicyParams,
    lambda: f64,
    tau: f64,
    ridge: f64,
) -> Result<DVector<f64>> {
    if !(ridge >= 0.0) {
        return Err(Error::invalid(format!("ridge = {ridge} must be nonnegative")));
    }
    let terms = exact_terms(spec, params, lambda, tau)?;
    if ridge == 0.0 {
        return Ok(terms.npg());
    }
    let n = terms.fisher.nrows();
    let regularized = &terms.fisher + DMatrix::identity(n, n) * ridge;
    solve_dense(regularized, &terms.lagrangian_gradient())
}

/// Compatible function-approximation error
/// `1/2 E_{nu^measure}[(omega . score_theta - A^theta / (1 - gamma))^2]`.
/// `measure = None` uses `nu^{pi_theta}` itself.
pub fn compatible_error(
    spec: &CmdpSpec,
    params: &PolicyParams,
    lambda: f64,
    tau: f64,
    omega: &DVector<f64>,
    measure: Option<&PolicyTable>,
) -> Result<f64> {
    let table = params.table();
    let g = UtilityFn::regularized(spec, lambda, tau, &table)?;
    let report = policy_evaluation(spec, &table, &g)?;
    let (weights_d, weights_pi) = match measure {
        Some(mu) => (occupancy(spec, mu)?, mu.clone()),
        None => (report.occupancy_d.clone(), table.clone()),
    };
    let scale = 1.0 / (1.0 - spec.gamma());
    let mut total = 0.0;
    let mut score = DVector::zeros(params.dim());
    for s in 0..spec.n_states() {
        for a in 0..spec.n_actions() {
            let w = weights_d[s] * weights_pi.prob(s, a);
            if w == 0.0 {
                continue;
            }
            params.score_with(s, a, table.probs_at(s), &mut score);
            let resid = score.dot(omega) - scale * report.adv[s][a];
            total += w * resid * resid;
        }
    }
    Ok(0.5 * total)
}

/// Greedy optimal values `V*_g` by value iteration, with a greedy policy.
pub fn optimal_values(spec: &CmdpSpec, table: &[f64]) -> Result<(Vec<f64>, PolicyTable)> {
    let (s_n, a_n) = (spec.n_states(), spec.n_actions());
    let gamma = spec.gamma();
    let mut v = vec![0.0; s_n];
    let mut q = vec![0.0; s_n * a_n];
    for iteration in 0..1_000_000 {
        let mut change: f64 = 0.0;
        for s in 0..s_n {
            for a in 0..a_n {
                let next: f64 = spec.transition_row(s, a).iter().zip(&v).map(|(p, v)| p * v).sum();
                q[s * a_n + a] = table[s * a_n + a] + gamma * next;
            }
        }
        for (s, vs) in v.iter_mut().enumerate() {
            let best = q[s * a_n..(s + 1) * a_n].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            change = change.max((best - *vs).abs());
            *vs = best;
        }
        if change <= 1e-14 * (1.0 + v.iter().fold(0.0f64, |m, x| m.max(x.abs()))) {
            let mut probs = vec![0.0; s_n * a_n];
            for s in 0..s_n {
                let row = &q[s * a_n..(s + 1) * a_n];
                let arg = (0..a_n).fold(0, |b, a| if row[a] > row[b] { a } else { b });
                probs[s * a_n + arg] = 1.0;
            }
            return Ok((v, PolicyTable::from_probs(s_n, a_n, probs)?));
        }
        if iteration == 999_999 {
            return Err(Error::NonConvergence {
                context: "value iteration".into(),
                iterations: 1_000_000,
                residual: change,
            });
        }
    }
    unreachable!()
}

/// Flow constraints `sum_a nu(s', a) - gamma sum P(s'|s, a) nu(s, a) = (1 - gamma) rho(s')`.
fn flow_rows(spec: &CmdpSpec, extra_rows: usize, extra_cols: usize) -> (DMatrix<f64>, DVector<f64>) {
    let (s_n, a_n) = (spec.n_states(), spec.n_actions());
    let n = s_n * a_n;
    let mut a_mat = DMatrix::zeros(s_n + extra_rows, n + extra_cols);
    let mut b = DVector::zeros(s_n + extra_rows);
    for s in 0..s_n {
        for a in 0..a_n {
            let col = s * a_n + a;
            a_mat[(s, col)] += 1.0;
            for (s2, &p) in spec.transition_row(s, a).iter().enumerate() {
                a_mat[(s2, col)] -= spec.gamma() * p;
            }
        }
        b[s] = (1.0 - spec.gamma()) * spec.rho()[s];
    }
    (a_mat, b)
}

/// `max_pi J_c^pi` via the occupancy LP.
pub fn max_cost_value(spec: &CmdpSpec) -> Result<f64> {
    let (a_mat, b) = flow_rows(spec, 0, 0);
    let c = DVector::from_column_slice(spec.cost_table());
    match solve_standard_form(&a_mat, &b, &c)? {
        LpOutcome::Optimal(sol) => Ok(sol.objective / (1.0 - spec.gamma())),
        other => Err(Error::LinearProgram(format!("feasibility LP ended as {other:?}"))),
    }
}

/// Solves `max J_r s.t. J_c >= 0` over occupancy measures.
pub fn solve_constrained_optimum(spec: &CmdpSpec) -> Result<ConstrainedOptimum> {
    let max_jc = max_cost_value(spec)?;
    if max_jc <= 1e-12 {
        return Err(Error::Infeasible { max_jc });
    }
    let (s_n, a_n) = (spec.n_states(), spec.n_actions());
    let n = s_n * a_n;
    // Extra row: sum nu c - slack = 0; the slack column sits at index n.
    let (mut a_mat, b) = flow_rows(spec, 1, 1);
    for (j, &c) in spec.cost_table().iter().enumerate() {
        a_mat[(s_n, j)] = c;
    }
    a_mat[(s_n, n)] = -1.0;
    let mut obj = DVector::zeros(n + 1);
    obj.rows_mut(0, n).copy_from(&DVector::from_column_slice(spec.reward_table()));
    let sol = match solve_standard_form(&a_mat, &b, &obj)? {
        LpOutcome::Optimal(sol) => sol,
        other => return Err(Error::LinearProgram(format!("constrained LP ended as {other:?}"))),
    };
    let mut probs = vec![0.0; n];
    for s in 0..s_n {
        let row = &sol.x.as_slice()[s * a_n..(s + 1) * a_n];
        let mass: f64 = row.iter().sum();
        for a in 0..a_n {
            probs[s * a_n + a] = if mass > 1e-14 { row[a] / mass } else { 1.0 / a_n as f64 };
        }
    }
    let reward: f64 = sol
        .x
        .iter()
        .take(n)
        .zip(spec.reward_table())
        .map(|(x, r)| x * r)
        .sum();
    Ok(ConstrainedOptimum {
        policy: PolicyTable::from_probs(s_n, a_n, probs)?,
        j_r_star: reward / (1.0 - spec.gamma()),
        lambda_star: (-sol.duals[s_n]).max(0.0),
        max_jc,
    })
}

/// Entropy-regularized best response to `lambda`: soft value iteration
/// `V = tau log sum_a exp(Q / tau)`, `pi = softmax(Q / tau)`. Returns the
/// policy and the number of sweeps.
pub fn soft_best_response(spec: &CmdpSpec, lambda: f64, tau: f64) -> Result<(PolicyTable, usize)> {
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("tau = {tau} must be positive")));
    }
    let (s_n, a_n) = (spec.n_states(), spec.n_actions());
    let gamma = spec.gamma();
    let g = UtilityFn::combined(spec, lambda);
    let mut v = vec![0.0; s_n];
    let mut z = vec![0.0; s_n * a_n];
    let max_sweeps = 1_000_000;
    for sweep in 1..=max_sweeps {
        for s in 0..s_n {
            for a in 0..a_n {
                let next: f64 = spec.transition_row(s, a).iter().zip(&v).map(|(p, v)| p * v).sum();
                z[s * a_n + a] = (g.value(s, a) + gamma * next) / tau;
            }
        }
        let mut change: f64 = 0.0;
        for (s, vs) in v.iter_mut().enumerate() {
            let row = &z[s * a_n..(s + 1) * a_n];
            let new = tau * log_sum_exp(row);
            change = change.max((new - *vs).abs());
            *vs = new;
        }
        if change <= 1e-13 * (1.0 + v.iter().fold(0.0f64, |m, x| m.max(x.abs()))) {
            let mut log_probs = z;
            for row in log_probs.chunks_mut(a_n) {
                let lse = log_sum_exp(row);
                row.iter_mut().for_each(|x| *x -= lse);
            }
            return Ok((PolicyTable::from_log_probs(s_n, a_n, log_probs), sweep));
        }
    }
    Err(Error::NonConvergence {
        context: "soft value iteration".into(),
        iterations: max_sweeps,
        residual: f64::NAN,
    })
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Regularized saddle point over tabular policies and `Lambda = [0, lambda_max]`.
///
/// The dual function `min_lambda max_pi L_tau` has derivative
/// `J_c(pi_lambda) + tau lambda`, which is increasing; its root on `Lambda`
/// (clipped to the ends) is the fixed point of the projected dual update.
pub fn solve_regularized_saddle(spec: &CmdpSpec, tau: f64, lambda_max: f64) -> Result<SaddlePoint> {
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("tau = {tau} must be positive")));
    }
    if !(lambda_max >= 0.0) || !lambda_max.is_finite() {
        return Err(Error::invalid(format!("lambda_max = {lambda_max} must be finite and nonnegative")));
    }
    let mut sweeps = 0usize;
    let mut slope = |lambda: f64| -> Result<(f64, PolicyTable)> {
        let (pi, n) = soft_best_response(spec, lambda, tau)?;
        sweeps += n;
        let jc = j_value(spec, &pi, spec.cost_table())?;
        Ok((jc + tau * lambda, pi))
    };

    let (at_zero, pi_zero) = slope(0.0)?;
    let (lambda, pi) = if at_zero >= 0.0 {
        (0.0, pi_zero)
    } else {
        let (at_max, pi_max) = slope(lambda_max)?;
        if at_max <= 0.0 {
            (lambda_max, pi_max)
        } else {
            let (mut lo, mut hi) = (0.0, lambda_max);
            let mut iterations = 0;
            while hi - lo > 1e-14 * (1.0 + lambda_max) && iterations < 200 {
                let mid = 0.5 * (lo + hi);
                if slope(mid)?.0 < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                iterations += 1;
            }
            let mid = 0.5 * (lo + hi);
            (mid, slope(mid)?.1)
        }
    };
    if sweeps > 1_000_000 {
        return Err(Error::NonConvergence {
            context: "regularized saddle".into(),
            iterations: sweeps,
            residual: f64::NAN,
        });
    }

    let value = lagrangian(spec, &pi, lambda, tau)?;
    let saddle = SaddlePoint {
        pi_star_tau: pi,
        lambda_star_tau: lambda,
        lagrangian_value: value,
        tau,
        lambda_max,
    };
    // Self-check against the uniform policy and both ends of Lambda.
    let uniform = PolicyTable::uniform(spec.n_states(), spec.n_actions());
    for (probe, lam) in [(&uniform, 0.0), (&uniform, lambda_max)] {
        let (left, right) = saddle_sandwich_margins(spec, &saddle, probe, lam)?;
        if left < -1e-8 || right < -1e-8 {
            return Err(Error::NonConvergence {
                context: format!("saddle sandwich violated (margins {left:.3e}, {right:.3e})"),
                iterations: sweeps,
                residual: left.min(right),
            });
        }
    }
    Ok(saddle)
}

/// Margins of the two-sided saddle inequality
/// `J^pi_{r+l*c} - tau H(pi*) <= J^{pi*}_{r+l*c} <= J^{pi*}_{r+lc} + tau lambda^2 / 2`.
/// Both returned values are nonnegative when the inequality holds.
pub fn saddle_sandwich_margins(
    spec: &CmdpSpec,
    saddle: &SaddlePoint,
    policy: &PolicyTable,
    lambda: f64,
) -> Result<(f64, f64)> {
    let star = &saddle.pi_star_tau;
    let l_star = saddle.lambda_star_tau;
    let mid = j_value(spec, star, UtilityFn::combined(spec, l_star).table())?;
    let left = j_value(spec, policy, UtilityFn::combined(spec, l_star).table())?
        - saddle.tau * entropy(spec, star)?;
    let right = j_value(spec, star, UtilityFn::combined(spec, lambda).table())?
        + 0.5 * saddle.tau * lambda * lambda;
    Ok((mid - left, right - mid))
}

/// `sum_s d^{pi*}(s) KL(pi*(.|s) || pi(.|s))`.
pub fn weighted_kl(spec: &CmdpSpec, pi_star: &PolicyTable, pi: &PolicyTable) -> Result<f64> {
    check_shape(spec, pi)?;
    let d = occupancy(spec, pi_star)?;
    let mut total = 0.0;
    for (s, ds) in d.iter().enumerate() {
        for a in 0..spec.n_actions() {
            let p = pi_star.prob(s, a);
            if p > 0.0 {
                total += ds * p * (pi_star.log_prob(s, a) - pi.log_prob(s, a));
            }
        }
    }
    Ok(total)
}

/// `sum_a pi(a|s) A(s, a)^2` from a report.
pub fn average_squared_advantage(report: &OracleReport, policy: &PolicyTable, s: usize) -> f64 {
    report.adv[s]
        .iter()
        .enumerate()
        .map(|(a, adv)| policy.prob(s, a) * adv * adv)
        .sum()
}

/// Averaged-advantage bound
/// `L^2 = 8(1+lambda)^2/(1-gamma)^2 + tau^2 [32 A / e^2 + 12 (log A)^2 / (1-gamma)^2]`.
pub fn advantage_bound_sq(gamma: f64, n_actions: usize, lambda: f64, tau: f64) -> f64 {
    let a = n_actions as f64;
    let h = 1.0 - gamma;
    let e2 = std::f64::consts::E.powi(2);
    8.0 * (1.0 + lambda).powi(2) / (h * h) + tau * tau * (32.0 * a / e2 + 12.0 * a.ln().powi(2) / (h * h))
}

/// Gradient-norm bound `G^2 L^2 / (1 - gamma)^2`.
pub fn gradient_norm_bound_sq(gamma: f64, g: f64, l_sq: f64) -> f64 {
    g * g * l_sq / (1.0 - gamma).powi(2)
}

/// Scaled gradient-noise variance
/// `48/(1-gamma)^4 [1 + lambda^2 + 4 A tau^2 / e^2] + 2 G^4 L^2 / (mu_F^2 (1-gamma)^2)`.
pub fn noise_variance_bound(gamma: f64, n_actions: usize, lambda: f64, tau: f64, g: f64, mu_f: f64) -> f64 {
    let h = 1.0 - gamma;
    let e2 = std::f64::consts::E.powi(2);
    let l_sq = advantage_bound_sq(gamma, n_actions, lambda, tau);
    48.0 / h.powi(4) * (1.0 + lambda * lambda + 4.0 * n_actions as f64 * tau * tau / e2)
        + 2.0 * g.powi(4) * l_sq / (mu_f * mu_f * h * h)
}
