//! Monte-Carlo estimates of `J_c` and of the compatible-error gradient
//! `F omega - H_tau / (1 - gamma)` from geometric-horizon rollouts.
//!
//! Per call: one rollout from `rho` gives `J_c` and the terminal state `s_hat`;
//! one rollout from `s_hat` gives `V(s_hat)`; one rollout from `(s_hat, a)` for
//! every action gives `Q(s_hat, a)`. The action expectation at `s_hat` is an
//! exact finite sum.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};

use crate::cmdp::{sample_geometric_horizon, walk, CmdpSpec, Start, UtilityFn};
use crate::error::{Error, Result};
use crate::policy::{PolicyParams, PolicyTable};
use crate::rng::StreamSplitter;

const STREAM_JC: u64 = 0;
const STREAM_V: u64 = 1;
const STREAM_Q0: u64 = 2;

/// One draw of the estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct GradSample {
    pub j_c_hat: f64,
    pub grad_hat: DVector<f64>,
    pub s_hat: usize,
    /// `Q_hat(s_hat, a) - V_hat(s_hat)` for every action.
    pub adv_hat: Vec<f64>,
    /// State-action pairs visited across all rollouts of the call.
    pub samples_used: u64,
}

/// Per-`(theta, lambda, tau)` precomputation reused across inner iterations:
/// policy table, utility table, scores and per-state Fisher blocks.
#[derive(Debug, Clone)]
pub struct SamplerContext<'a> {
    spec: &'a CmdpSpec,
    table: PolicyTable,
    utility: UtilityFn,
    /// `scores[s * A + a]`.
    scores: Vec<DVector<f64>>,
    fishers: Vec<DMatrix<f64>>,
    dim: usize,
    lambda: f64,
    tau: f64,
}

/// Outcome of [`SamplerContext::estimate_into`]; the gradient is written in place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrawSummary {
    pub j_c_hat: f64,
    pub s_hat: usize,
    pub samples_used: u64,
}

impl<'a> SamplerContext<'a> {
    pub fn new(spec: &'a CmdpSpec, params: &PolicyParams, lambda: f64, tau: f64) -> Result<Self> {
        if params.n_states() != spec.n_states() || params.n_actions() != spec.n_actions() {
            return Err(Error::Dimension("parameters do not match the spec".into()));
        }
        if !(lambda >= 0.0) || !(tau >= 0.0) {
            return Err(Error::invalid(format!("lambda = {lambda}, tau = {tau} must be nonnegative")));
        }
        let table = params.table();
        let utility = UtilityFn::regularized(spec, lambda, tau, &table)?;
        let dim = params.dim();
        let mut scores = Vec::with_capacity(spec.n_states() * spec.n_actions());
        let mut fishers = Vec::with_capacity(spec.n_states());
        for s in 0..spec.n_states() {
            let probs = table.probs_at(s);
            for a in 0..spec.n_actions() {
                let mut v = DVector::zeros(dim);
                params.score_with(s, a, probs, &mut v);
                scores.push(v);
            }
            fishers.push(params.fisher_with(s, probs));
        }
        Ok(Self {
            spec,
            table,
            utility,
            scores,
            fishers,
            dim,
            lambda,
            tau,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn policy(&self) -> &PolicyTable {
        &self.table
    }

    fn geometric<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        // gamma was validated at spec construction.
        sample_geometric_horizon(self.spec.gamma(), rng).unwrap_or(0)
    }

    /// Cost sum and terminal state of one rollout from `rho`.
    fn cost_rollout<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, usize, u64) {
        let t = self.geometric(rng);
        let mut total = 0.0;
        let last = walk(self.spec, &self.table, Start::Rho, t, rng, |s, a| total += self.spec.cost(s, a));
        (total, last, t + 1)
    }

    fn utility_rollout<R: Rng + ?Sized>(&self, start: Start, rng: &mut R) -> (f64, u64) {
        let t = self.geometric(rng);
        let mut total = 0.0;
        walk(self.spec, &self.table, start, t, rng, |s, a| total += self.utility.value(s, a));
        (total, t + 1)
    }

    /// Allocation-free draw: writes `grad_hat` into `grad` and the advantages into `adv`.
    pub fn estimate_into<R: RngCore + ?Sized>(
        &self,
        omega: &DVector<f64>,
        rng: &mut R,
        grad: &mut DVector<f64>,
        adv: &mut [f64],
    ) -> DrawSummary {
        let split = StreamSplitter::new(rng);
        let (j_c_hat, s_hat, mut samples) = self.cost_rollout(&mut split.stream(STREAM_JC));
        let (v_hat, n) = self.utility_rollout(Start::State(s_hat), &mut split.stream(STREAM_V));
        samples += n;
        let a_n = self.spec.n_actions();
        for (a, slot) in adv.iter_mut().enumerate().take(a_n) {
            let (q_hat, n) =
                self.utility_rollout(Start::StateAction(s_hat, a), &mut split.stream(STREAM_Q0 + a as u64));
            samples += n;
            *slot = q_hat - v_hat;
        }

        grad.gemv(1.0, &self.fishers[s_hat], omega, 0.0);
        let scale = 1.0 / (1.0 - self.spec.gamma());
        let probs = self.table.probs_at(s_hat);
        for a in 0..a_n {
            grad.axpy(-scale * probs[a] * adv[a], &self.scores[s_hat * a_n + a], 1.0);
        }
        DrawSummary {
            j_c_hat,
            s_hat,
            samples_used: samples,
        }
    }

    pub fn estimate<R: RngCore + ?Sized>(&self, omega: &DVector<f64>, rng: &mut R) -> Result<GradSample> {
        if omega.len() != self.dim {
            return Err(Error::Dimension(format!(
                "omega has dimension {}, expected {}",
                omega.len(),
                self.dim
            )));
        }
        let mut grad = DVector::zeros(self.dim);
        let mut adv = vec![0.0; self.spec.n_actions()];
        let summary = self.estimate_into(omega, rng, &mut grad, &mut adv);
        Ok(GradSample {
            j_c_hat: summary.j_c_hat,
            grad_hat: grad,
            s_hat: summary.s_hat,
            adv_hat: adv,
            samples_used: summary.samples_used,
        })
    }

    /// Only the `J_c` rollout.
    pub fn estimate_jc<R: RngCore + ?Sized>(&self, rng: &mut R) -> (f64, u64) {
        let split = StreamSplitter::new(rng);
        let (jc, _, n) = self.cost_rollout(&mut split.stream(STREAM_JC));
        (jc, n)
    }
}

/// One full draw of the estimator at `(theta, lambda, tau, omega)`.
pub fn estimate<R: RngCore + ?Sized>(
    spec: &CmdpSpec,
    params: &PolicyParams,
    omega: &DVector<f64>,
    lambda: f64,
    tau: f64,
    rng: &mut R,
) -> Result<GradSample> {
    SamplerContext::new(spec, params, lambda, tau)?.estimate(omega, rng)
}

/// Unbiased `J_c(theta)` draw with its sample count.
pub fn estimate_jc_only<R: RngCore + ?Sized>(
    spec: &CmdpSpec,
    params: &PolicyParams,
    rng: &mut R,
) -> Result<(f64, u64)> {
    Ok(SamplerContext::new(spec, params, 0.0, 0.0)?.estimate_jc(rng))
}
