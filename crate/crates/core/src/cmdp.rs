//! Finite constrained MDPs, utility functions and geometric-horizon rollouts.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{FeatureTable, PolicyTable};

const SUM_TOL: f64 = 1e-12;

/// A finite CMDP `(S, A, r, c, P, gamma, rho)`.
///
/// Tables are stored flat: `reward[s * A + a]`, `transition[(s * A + a) * S + s']`.
/// Cumulative rows are kept alongside for inverse-CDF sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct CmdpSpec {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    rho: Vec<f64>,
    reward: Vec<f64>,
    cost: Vec<f64>,
    transition: Vec<f64>,
    rho_cdf: Vec<f64>,
    transition_cdf: Vec<f64>,
}

/// On-disk JSON layout of a CMDP, optionally carrying log-linear features.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CmdpDocument {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub rho: Vec<f64>,
    pub reward: Vec<Vec<f64>>,
    pub cost: Vec<Vec<f64>>,
    pub transition: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<Vec<Vec<f64>>>>,
}

impl CmdpSpec {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        rho: Vec<f64>,
        reward: Vec<Vec<f64>>,
        cost: Vec<Vec<f64>>,
        transition: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::validation("n_states", "must be positive"));
        }
        if n_actions == 0 {
            return Err(Error::validation("n_actions", "must be positive"));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::validation("gamma", format!("{gamma} is outside [0, 1)")));
        }
        check_distribution("rho", &rho, n_states)?;

        let reward = flatten_table("reward", reward, n_states, n_actions, 0.0, 1.0)?;
        let cost = flatten_table("cost", cost, n_states, n_actions, -1.0, 1.0)?;

        if transition.len() != n_states {
            return Err(Error::validation(
                "transition",
                format!("expected {n_states} rows, found {}", transition.len()),
            ));
        }
        let mut flat = Vec::with_capacity(n_states * n_actions * n_states);
        for (s, per_action) in transition.iter().enumerate() {
            if per_action.len() != n_actions {
                return Err(Error::validation(
                    format!("transition[{s}]"),
                    format!("expected {n_actions} entries, found {}", per_action.len()),
                ));
            }
            for (a, row) in per_action.iter().enumerate() {
                check_distribution(&format!("transition[{s}][{a}]"), row, n_states)?;
                flat.extend_from_slice(row);
            }
        }

        let rho_cdf = cumulative(&rho);
        let transition_cdf = flat.chunks(n_states).flat_map(cumulative).collect();
        Ok(Self {
            n_states,
            n_actions,
            gamma,
            rho,
            reward,
            cost,
            transition: flat,
            rho_cdf,
            transition_cdf,
        })
    }

    pub fn from_document(doc: &CmdpDocument) -> Result<Self> {
        Self::new(
            doc.n_states,
            doc.n_actions,
            doc.gamma,
            doc.rho.clone(),
            doc.reward.clone(),
            doc.cost.clone(),
            doc.transition.clone(),
        )
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: CmdpDocument = serde_json::from_str(text).map_err(|e| Error::Json {
            path: "<string>".into(),
            source: e,
        })?;
        Self::from_document(&doc)
    }

    pub fn to_document(&self) -> CmdpDocument {
        let (s_n, a_n) = (self.n_states, self.n_actions);
        let table = |flat: &[f64]| -> Vec<Vec<f64>> {
            flat.chunks(a_n).map(|row| row.to_vec()).collect()
        };
        CmdpDocument {
            n_states: s_n,
            n_actions: a_n,
            gamma: self.gamma,
            rho: self.rho.clone(),
            reward: table(&self.reward),
            cost: table(&self.cost),
            transition: (0..s_n)
                .map(|s| (0..a_n).map(|a| self.transition_row(s, a).to_vec()).collect())
                .collect(),
            features: None,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    pub fn cost(&self, s: usize, a: usize) -> f64 {
        self.cost[s * self.n_actions + a]
    }

    pub fn reward_table(&self) -> &[f64] {
        &self.reward
    }

    pub fn cost_table(&self) -> &[f64] {
        &self.cost
    }

    /// `P(. | s, a)`.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    /// Returns a copy with the cost table replaced. The new table must stay in `[-1, 1]`.
    pub fn with_cost(&self, cost: Vec<f64>) -> Result<Self> {
        if cost.len() != self.cost.len() {
            return Err(Error::Dimension(format!(
                "cost table has {} entries, expected {}",
                cost.len(),
                self.cost.len()
            )));
        }
        for (i, &c) in cost.iter().enumerate() {
            if !(-1.0..=1.0).contains(&c) || !c.is_finite() {
                let (s, a) = (i / self.n_actions, i % self.n_actions);
                return Err(Error::validation(
                    format!("cost[{s}][{a}]"),
                    format!("{c} is outside [-1, 1]"),
                ));
            }
        }
        Ok(Self { cost, ..self.clone() })
    }

    #[inline]
    pub(crate) fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_cdf(&self.rho_cdf, rng.random())
    }

    #[inline]
    pub(crate) fn sample_next<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        let start = (s * self.n_actions + a) * self.n_states;
        sample_cdf(&self.transition_cdf[start..start + self.n_states], rng.random())
    }

    pub(crate) fn check_state(&self, s: usize) -> Result<()> {
        if s >= self.n_states {
            return Err(Error::Dimension(format!(
                "state {s} out of range for {} states",
                self.n_states
            )));
        }
        Ok(())
    }

    pub(crate) fn check_action(&self, a: usize) -> Result<()> {
        if a >= self.n_actions {
            return Err(Error::Dimension(format!(
                "action {a} out of range for {} actions",
                self.n_actions
            )));
        }
        Ok(())
    }
}

/// A CMDP file together with its optional log-linear feature table.
#[derive(Debug, Clone)]
pub struct CmdpFile {
    pub spec: CmdpSpec,
    pub features: Option<FeatureTable>,
}

/// Loads and validates a CMDP JSON document.
pub fn load_cmdp(path: &Path) -> Result<CmdpFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let doc: CmdpDocument = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    let spec = CmdpSpec::from_document(&doc)?;
    let features = match &doc.features {
        Some(raw) => Some(FeatureTable::from_nested(raw, spec.n_states(), spec.n_actions())?),
        None => None,
    };
    Ok(CmdpFile { spec, features })
}

fn check_distribution(path: &str, p: &[f64], n: usize) -> Result<()> {
    if p.len() != n {
        return Err(Error::validation(
            path,
            format!("expected {n} entries, found {}", p.len()),
        ));
    }
    for (i, &x) in p.iter().enumerate() {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::validation(
                format!("{path}[{i}]"),
                format!("probability {x} is negative or not finite"),
            ));
        }
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::validation(
            path,
            format!("probabilities sum to {total}, expected 1"),
        ));
    }
    Ok(())
}

fn flatten_table(
    name: &str,
    rows: Vec<Vec<f64>>,
    n_states: usize,
    n_actions: usize,
    lo: f64,
    hi: f64,
) -> Result<Vec<f64>> {
    if rows.len() != n_states {
        return Err(Error::validation(
            name,
            format!("expected {n_states} rows, found {}", rows.len()),
        ));
    }
    let mut flat = Vec::with_capacity(n_states * n_actions);
    for (s, row) in rows.into_iter().enumerate() {
        if row.len() != n_actions {
            return Err(Error::validation(
                format!("{name}[{s}]"),
                format!("expected {n_actions} entries, found {}", row.len()),
            ));
        }
        for (a, &x) in row.iter().enumerate() {
            if !x.is_finite() || x < lo || x > hi {
                return Err(Error::validation(
                    format!("{name}[{s}][{a}]"),
                    format!("{x} is outside [{lo}, {hi}]"),
                ));
            }
        }
        flat.extend(row);
    }
    Ok(flat)
}

pub(crate) fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = p
        .iter()
        .map(|&x| {
            acc += x;
            acc
        })
        .collect();
    // Round-off must never leave a draw beyond the last cell with mass.
    if let Some(last) = p.iter().rposition(|&x| x > 0.0) {
        out[last..].iter_mut().for_each(|c| *c = f64::INFINITY);
    }
    out
}

/// Smallest index whose cumulative mass exceeds `u`; zero-mass cells are never chosen.
#[inline]
pub(crate) fn sample_cdf(cdf: &[f64], u: f64) -> usize {
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

/// Inverse-CDF map from `u in [0, 1)` to the horizon `T` with
/// `P(T = j) = (1 - gamma) gamma^j`: the smallest `j` with `1 - gamma^(j+1) >= u`.
pub fn geometric_from_uniform(gamma: f64, u: f64) -> u64 {
    if gamma == 0.0 || u <= 0.0 {
        return 0;
    }
    let ratio = (-u).ln_1p() / gamma.ln();
    let j = ratio.ceil() - 1.0;
    if j <= 0.0 {
        0
    } else {
        j as u64
    }
}

/// Draws `T ~ Geo(1 - gamma)` on `{0, 1, 2, ...}`. Exact, never truncated.
pub fn sample_geometric_horizon<R: Rng + ?Sized>(gamma: f64, rng: &mut R) -> Result<u64> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma = {gamma} must lie in [0, 1)")));
    }
    Ok(geometric_from_uniform(gamma, rng.random()))
}

/// Where a rollout begins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    /// `s_0 ~ rho`, `a_0 ~ pi(s_0)`.
    Rho,
    /// `s_0 = s`, `a_0 ~ pi(s)`.
    State(usize),
    /// `(s_0, a_0) = (s, a)`.
    StateAction(usize, usize),
}

/// State-action pairs `(s_0, a_0), ..., (s_T, a_T)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub steps: Vec<(usize, usize)>,
    pub horizon: u64,
}

impl Trajectory {
    pub fn last_state(&self) -> usize {
        self.steps.last().map(|&(s, _)| s).unwrap_or(0)
    }
}

/// Walks `horizon` transitions under `policy` from `start`, calling `visit`
/// on each of the `horizon + 1` pairs. Returns the final state.
#[inline]
pub(crate) fn walk<R, F>(
    spec: &CmdpSpec,
    policy: &PolicyTable,
    start: Start,
    horizon: u64,
    rng: &mut R,
    mut visit: F,
) -> usize
where
    R: Rng + ?Sized,
    F: FnMut(usize, usize),
{
    let (mut s, mut a) = match start {
        Start::Rho => {
            let s = spec.sample_initial(rng);
            (s, policy.sample_action(s, rng.random()))
        }
        Start::State(s) => (s, policy.sample_action(s, rng.random())),
        Start::StateAction(s, a) => (s, a),
    };
    visit(s, a);
    for _ in 0..horizon {
        s = spec.sample_next(s, a, rng);
        a = policy.sample_action(s, rng.random());
        visit(s, a);
    }
    s
}

/// Rolls out exactly `horizon` transitions, recording all `horizon + 1` pairs.
pub fn rollout<R: Rng + ?Sized>(
    spec: &CmdpSpec,
    policy: &PolicyTable,
    start: Start,
    horizon: u64,
    rng: &mut R,
) -> Result<Trajectory> {
    if policy.n_states() != spec.n_states() || policy.n_actions() != spec.n_actions() {
        return Err(Error::Dimension(format!(
            "policy is {}x{}, spec is {}x{}",
            policy.n_states(),
            policy.n_actions(),
            spec.n_states(),
            spec.n_actions()
        )));
    }
    match start {
        Start::Rho => {}
        Start::State(s) => spec.check_state(s)?,
        Start::StateAction(s, a) => {
            spec.check_state(s)?;
            spec.check_action(a)?;
        }
    }
    let mut steps = Vec::with_capacity(horizon as usize + 1);
    walk(spec, policy, start, horizon, rng, |s, a| steps.push((s, a)));
    Ok(Trajectory { steps, horizon })
}

/// Undiscounted `sum_{j=0}^{T} g(s_j, a_j)`; the geometric horizon supplies
/// the discounting in expectation.
pub fn accumulate_utility(traj: &Trajectory, g: &UtilityFn) -> f64 {
    traj.steps.iter().map(|&(s, a)| g.value(s, a)).sum()
}

/// Which utility a [`UtilityFn`] realizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UtilityKind {
    Reward,
    Cost,
    /// `r + lambda c`.
    Combined { lambda: f64 },
    /// `r + lambda c + tau psi_theta` with `psi_theta(s, a) = -log pi_theta(a|s)`.
    Regularized { lambda: f64, tau: f64 },
    /// `psi_theta` alone.
    Entropy,
    Custom,
}

/// A utility `g(s, a)` materialized as an `S x A` table.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityFn {
    kind: UtilityKind,
    n_actions: usize,
    table: Vec<f64>,
}

impl UtilityFn {
    pub fn reward(spec: &CmdpSpec) -> Self {
        Self {
            kind: UtilityKind::Reward,
            n_actions: spec.n_actions(),
            table: spec.reward_table().to_vec(),
        }
    }

    pub fn cost(spec: &CmdpSpec) -> Self {
        Self {
            kind: UtilityKind::Cost,
            n_actions: spec.n_actions(),
            table: spec.cost_table().to_vec(),
        }
    }

    pub fn combined(spec: &CmdpSpec, lambda: f64) -> Self {
        let table = spec
            .reward_table()
            .iter()
            .zip(spec.cost_table())
            .map(|(r, c)| r + lambda * c)
            .collect();
        Self {
            kind: UtilityKind::Combined { lambda },
            n_actions: spec.n_actions(),
            table,
        }
    }

    /// Errors if `tau > 0` and some action has zero probability under `policy`.
    pub fn regularized(spec: &CmdpSpec, lambda: f64, tau: f64, policy: &PolicyTable) -> Result<Self> {
        check_policy_shape(spec, policy)?;
        let mut table = Self::combined(spec, lambda).table;
        if tau != 0.0 {
            let psi = negative_log_probs(policy)?;
            for (g, p) in table.iter_mut().zip(psi) {
                *g += tau * p;
            }
        }
        Ok(Self {
            kind: UtilityKind::Regularized { lambda, tau },
            n_actions: spec.n_actions(),
            table,
        })
    }

    /// `psi(s, a) = -log pi(a|s)`.
    pub fn entropy(policy: &PolicyTable) -> Result<Self> {
        Ok(Self {
            kind: UtilityKind::Entropy,
            n_actions: policy.n_actions(),
            table: negative_log_probs(policy)?,
        })
    }

    pub fn custom(n_states: usize, n_actions: usize, table: Vec<f64>) -> Result<Self> {
        if table.len() != n_states * n_actions {
            return Err(Error::Dimension(format!(
                "utility table has {} entries, expected {}",
                table.len(),
                n_states * n_actions
            )));
        }
        Ok(Self {
            kind: UtilityKind::Custom,
            n_actions,
            table,
        })
    }

    pub fn kind(&self) -> UtilityKind {
        self.kind
    }

    #[inline]
    pub fn value(&self, s: usize, a: usize) -> f64 {
        self.table[s * self.n_actions + a]
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }
}

fn check_policy_shape(spec: &CmdpSpec, policy: &PolicyTable) -> Result<()> {
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

fn negative_log_probs(policy: &PolicyTable) -> Result<Vec<f64>> {
    let n_actions = policy.n_actions();
    policy
        .log_probs()
        .iter()
        .enumerate()
        .map(|(i, &lp)| {
            if lp.is_finite() {
                Ok(-lp)
            } else {
                Err(Error::Domain(format!(
                    "pi({}|{}) = 0, so -log pi is undefined",
                    i % n_actions,
                    i / n_actions
                )))
            }
        })
        .collect()
}
