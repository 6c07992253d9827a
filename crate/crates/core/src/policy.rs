//! Softmax policy parameterizations: log-probabilities, score functions,
//! per-state Fisher contributions and empirical score bounds.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::cmdp::{cumulative, sample_cdf, CmdpSpec};
use crate::error::{Error, Result};

/// A stochastic policy materialized as an `S x A` table.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
    log_probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl PolicyTable {
    /// Rows must be probability vectors (within `1e-9`). Zero entries are allowed.
    pub fn from_probs(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(Error::Dimension(format!(
                "policy table has {} entries, expected {}",
                probs.len(),
                n_states * n_actions
            )));
        }
        for (s, row) in probs.chunks(n_actions).enumerate() {
            let total: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::validation(
                    format!("policy[{s}]"),
                    format!("row {row:?} is not a probability vector"),
                ));
            }
        }
        let log_probs = probs.iter().map(|p| p.ln()).collect();
        Ok(Self::assemble(n_states, n_actions, probs, log_probs))
    }

    /// Builds the table from exact log-probabilities (each row must log-sum-exp to 0).
    pub fn from_log_probs(n_states: usize, n_actions: usize, log_probs: Vec<f64>) -> Self {
        let probs = log_probs.iter().map(|lp| lp.exp()).collect();
        Self::assemble(n_states, n_actions, probs, log_probs)
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = 1.0 / n_actions as f64;
        Self::assemble(
            n_states,
            n_actions,
            vec![p; n_states * n_actions],
            vec![p.ln(); n_states * n_actions],
        )
    }

    fn assemble(n_states: usize, n_actions: usize, probs: Vec<f64>, log_probs: Vec<f64>) -> Self {
        let cdf = probs.chunks(n_actions).flat_map(cumulative).collect();
        Self {
            n_states,
            n_actions,
            probs,
            log_probs,
            cdf,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    #[inline]
    pub fn log_prob(&self, s: usize, a: usize) -> f64 {
        self.log_probs[s * self.n_actions + a]
    }

    pub fn probs_at(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    /// Action for a uniform draw `u in [0, 1)`.
    #[inline]
    pub fn sample_action(&self, s: usize, u: f64) -> usize {
        sample_cdf(&self.cdf[s * self.n_actions..(s + 1) * self.n_actions], u)
    }

    /// Total-variation distance `max_s 1/2 sum_a |pi(a|s) - other(a|s)|`.
    pub fn max_total_variation(&self, other: &PolicyTable) -> f64 {
        self.probs
            .chunks(self.n_actions)
            .zip(other.probs.chunks(other.n_actions))
            .map(|(p, q)| 0.5 * p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Log-linear features `phi(s, a) in R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    n_states: usize,
    n_actions: usize,
    dim: usize,
    data: Vec<f64>,
    norm_bound: f64,
}

impl FeatureTable {
    pub fn new(n_states: usize, n_actions: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() != n_states * n_actions * dim {
            return Err(Error::Dimension(format!(
                "feature table has {} entries, expected {} x {} x {}",
                data.len(),
                n_states,
                n_actions,
                dim
            )));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            let (sa, k) = (i / dim, i % dim);
            return Err(Error::validation(
                format!("features[{}][{}][{k}]", sa / n_actions, sa % n_actions),
                "not finite",
            ));
        }
        let norm_bound = data
            .chunks(dim)
            .map(|phi| phi.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        Ok(Self {
            n_states,
            n_actions,
            dim,
            data,
            norm_bound,
        })
    }

    /// Parses the `S x A x d` nested layout of the JSON `"features"` key.
    pub fn from_nested(raw: &[Vec<Vec<f64>>], n_states: usize, n_actions: usize) -> Result<Self> {
        if raw.len() != n_states {
            return Err(Error::validation(
                "features",
                format!("expected {n_states} rows, found {}", raw.len()),
            ));
        }
        let dim = raw
            .first()
            .and_then(|row| row.first())
            .map(Vec::len)
            .unwrap_or(0);
        let mut data = Vec::with_capacity(n_states * n_actions * dim);
        for (s, per_action) in raw.iter().enumerate() {
            if per_action.len() != n_actions {
                return Err(Error::validation(
                    format!("features[{s}]"),
                    format!("expected {n_actions} entries, found {}", per_action.len()),
                ));
            }
            for (a, phi) in per_action.iter().enumerate() {
                if phi.len() != dim {
                    return Err(Error::validation(
                        format!("features[{s}][{a}]"),
                        format!("expected dimension {dim}, found {}", phi.len()),
                    ));
                }
                data.extend_from_slice(phi);
            }
        }
        Self::new(n_states, n_actions, dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    #[inline]
    pub fn feature(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.dim;
        &self.data[start..start + self.dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Parameterization {
    /// One logit per `(s, a)`; `d = S * A`. A complete policy class.
    TabularSoftmax,
    /// `pi(a|s) ~ exp(theta . phi(s, a))`.
    LogLinear(Arc<FeatureTable>),
}

/// Parameter vector `theta` with its parameterization.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    theta: DVector<f64>,
    n_states: usize,
    n_actions: usize,
    kind: Parameterization,
}

impl PolicyParams {
    /// Tabular softmax at `theta = 0` (the uniform policy).
    pub fn tabular(n_states: usize, n_actions: usize) -> Self {
        Self {
            theta: DVector::zeros(n_states * n_actions),
            n_states,
            n_actions,
            kind: Parameterization::TabularSoftmax,
        }
    }

    /// Log-linear policy at `theta = 0`.
    pub fn log_linear(features: Arc<FeatureTable>) -> Self {
        Self {
            theta: DVector::zeros(features.dim()),
            n_states: features.n_states,
            n_actions: features.n_actions,
            kind: Parameterization::LogLinear(features),
        }
    }

    /// Tabular parameters whose softmax reproduces a strictly positive `policy`.
    pub fn tabular_from_policy(policy: &PolicyTable) -> Result<Self> {
        if let Some(i) = policy.log_probs().iter().position(|lp| !lp.is_finite()) {
            return Err(Error::Domain(format!(
                "pi({}|{}) = 0 has no finite logit",
                i % policy.n_actions(),
                i / policy.n_actions()
            )));
        }
        let mut params = Self::tabular(policy.n_states(), policy.n_actions());
        params.theta = DVector::from_column_slice(policy.log_probs());
        Ok(params)
    }

    pub fn with_theta(&self, theta: DVector<f64>) -> Result<Self> {
        if theta.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "theta has dimension {}, expected {}",
                theta.len(),
                self.dim()
            )));
        }
        Ok(Self {
            theta,
            ..self.clone()
        })
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn kind(&self) -> &Parameterization {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn logits_into(&self, s: usize, out: &mut [f64]) {
        match &self.kind {
            Parameterization::TabularSoftmax => {
                out.copy_from_slice(&self.theta.as_slice()[s * self.n_actions..(s + 1) * self.n_actions]);
            }
            Parameterization::LogLinear(features) => {
                for (a, z) in out.iter_mut().enumerate() {
                    *z = features
                        .feature(s, a)
                        .iter()
                        .zip(self.theta.iter())
                        .map(|(f, t)| f * t)
                        .sum();
                }
            }
        }
    }

    fn log_probs_into(&self, s: usize, out: &mut [f64]) {
        self.logits_into(s, out);
        let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + out.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        out.iter_mut().for_each(|z| *z -= lse);
    }

    /// `log pi_theta(. | s)` by max-shifted log-sum-exp.
    pub fn action_log_probs(&self, s: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_actions];
        self.log_probs_into(s, &mut out);
        out
    }

    pub fn table(&self) -> PolicyTable {
        let mut log_probs = vec![0.0; self.n_states * self.n_actions];
        for (s, row) in log_probs.chunks_mut(self.n_actions).enumerate() {
            self.log_probs_into(s, row);
        }
        PolicyTable::from_log_probs(self.n_states, self.n_actions, log_probs)
    }

    /// `grad_theta log pi_theta(a|s)` given `probs = pi_theta(. | s)`.
    pub(crate) fn score_with(&self, s: usize, a: usize, probs: &[f64], out: &mut DVector<f64>) {
        out.fill(0.0);
        match &self.kind {
            Parameterization::TabularSoftmax => {
                let base = s * self.n_actions;
                for (b, p) in probs.iter().enumerate() {
                    out[base + b] = -p;
                }
                out[base + a] += 1.0;
            }
            Parameterization::LogLinear(features) => {
                for (b, p) in probs.iter().enumerate() {
                    let weight = if b == a { 1.0 - p } else { -p };
                    for (o, f) in out.iter_mut().zip(features.feature(s, b)) {
                        *o += weight * f;
                    }
                }
            }
        }
    }

    /// Score function `grad_theta log pi_theta(a|s)` as a dense d-vector.
    pub fn score(&self, s: usize, a: usize) -> DVector<f64> {
        let probs: Vec<f64> = self.action_log_probs(s).iter().map(|lp| lp.exp()).collect();
        let mut out = DVector::zeros(self.dim());
        self.score_with(s, a, &probs, &mut out);
        out
    }

    /// `sum_a pi(a|s) score(s, a) score(s, a)^T`.
    pub fn fisher_at_state(&self, s: usize) -> DMatrix<f64> {
        let probs: Vec<f64> = self.action_log_probs(s).iter().map(|lp| lp.exp()).collect();
        self.fisher_with(s, &probs)
    }

    pub(crate) fn fisher_with(&self, s: usize, probs: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let mut fisher = DMatrix::zeros(d, d);
        let mut score = DVector::zeros(d);
        for (a, &p) in probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            self.score_with(s, a, probs, &mut score);
            fisher.ger(p, &score, &score, 1.0);
        }
        fisher
    }
}

/// Where a score-bound maximum was attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreWitness {
    /// Index into the evaluated parameter list (samples first, then perturbations).
    pub point: usize,
    pub state: usize,
    pub action: usize,
}

/// Empirical score norm bound `G` and score Lipschitz bound `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreBounds {
    pub g: f64,
    pub b: f64,
    pub g_witness: ScoreWitness,
    pub b_witness: ScoreWitness,
}

/// Settings for [`measure_score_bounds`].
#[derive(Debug, Clone, Copy)]
pub struct ScoreProbe {
    /// Gaussian-direction perturbations per sample.
    pub perturbations: usize,
    /// Euclidean length of each perturbation.
    pub radius: f64,
}

impl Default for ScoreProbe {
    fn default() -> Self {
        Self {
            perturbations: 8,
            radius: 0.1,
        }
    }
}

/// Estimates `G = max ||score||` and `B = max ||score_1 - score_2|| / ||theta_1 - theta_2||`
/// over the samples, their perturbations, and all sample pairs.
pub fn measure_score_bounds<R: Rng + ?Sized>(
    samples: &[PolicyParams],
    spec: &CmdpSpec,
    probe: ScoreProbe,
    rng: &mut R,
) -> Result<ScoreBounds> {
    let first = samples
        .first()
        .ok_or_else(|| Error::invalid("measure_score_bounds needs at least one parameter sample"))?;
    if samples
        .iter()
        .any(|p| p.n_states != spec.n_states() || p.n_actions != spec.n_actions() || p.dim() != first.dim())
    {
        return Err(Error::Dimension("parameter samples disagree with the spec".into()));
    }

    // Points: samples, then perturbations grouped by their origin.
    let mut points: Vec<PolicyParams> = samples.to_vec();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..samples.len() {
        for j in (i + 1)..samples.len() {
            pairs.push((i, j));
        }
    }
    for (i, base) in samples.iter().enumerate() {
        for _ in 0..probe.perturbations {
            let mut dir = DVector::<f64>::from_fn(base.dim(), |_, _| rng.sample(StandardNormal));
            let norm = dir.norm();
            if norm == 0.0 {
                continue;
            }
            dir *= probe.radius / norm;
            points.push(base.with_theta(&base.theta + dir)?);
            pairs.push((i, points.len() - 1));
        }
    }

    let scores: Vec<Vec<DVector<f64>>> = points
        .iter()
        .map(|p| {
            (0..spec.n_states())
                .flat_map(|s| (0..spec.n_actions()).map(move |a| (s, a)))
                .map(|(s, a)| p.score(s, a))
                .collect()
        })
        .collect();

    let n_actions = spec.n_actions();
    let witness = |point: usize, sa: usize| ScoreWitness {
        point,
        state: sa / n_actions,
        action: sa % n_actions,
    };

    let mut g = 0.0;
    let mut g_witness = witness(0, 0);
    for (i, per_point) in scores.iter().enumerate() {
        for (sa, v) in per_point.iter().enumerate() {
            let n = v.norm();
            if n > g {
                g = n;
                g_witness = witness(i, sa);
            }
        }
    }

    let mut b = 0.0;
    let mut b_witness = witness(0, 0);
    for &(i, j) in &pairs {
        let dist = (points[i].theta() - points[j].theta()).norm();
        if dist == 0.0 {
            continue;
        }
        for (sa, (u, v)) in scores[i].iter().zip(&scores[j]).enumerate() {
            let ratio = (u - v).norm() / dist;
            if ratio > b {
                b = ratio;
                b_witness = witness(j, sa);
            }
        }
    }

    Ok(ScoreBounds {
        g,
        b,
        g_witness,
        b_witness,
    })
}
