//! Tail-averaged accelerated stochastic gradient descent for the inner
//! least-squares problem whose minimizer is the natural gradient.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use crate::cmdp::CmdpSpec;
use crate::error::{Error, Result};
use crate::oracle::{exact_terms, ExactTerms};
use crate::policy::PolicyParams;
use crate::sampler::SamplerContext;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AsgdRates {
    pub alpha: f64,
    pub beta: f64,
    pub xi: f64,
    pub delta: f64,
    /// Inner iterations; even, at least 2.
    pub h: usize,
}

impl AsgdRates {
    pub fn new(alpha: f64, beta: f64, xi: f64, delta: f64, h: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) {
            return Err(Error::invalid(format!("alpha = {alpha}, beta = {beta} must lie in [0, 1]")));
        }
        if !(xi > 0.0) || !(delta > 0.0) || !xi.is_finite() || !delta.is_finite() {
            return Err(Error::invalid(format!("xi = {xi}, delta = {delta} must be positive")));
        }
        if h < 2 || h % 2 != 0 {
            return Err(Error::invalid(format!("H = {h} must be even and at least 2")));
        }
        Ok(Self {
            alpha,
            beta,
            xi,
            delta,
            h,
        })
    }

    /// Rates from the score bound `G` and Fisher floor `mu_F`; `h` is rounded up to even.
    pub fn from_constants(g: f64, mu_f: f64, h: usize) -> Result<Self> {
        if !(g > 0.0) || !(mu_f > 0.0) {
            return Err(Error::invalid(format!("G = {g}, mu_F = {mu_f} must be positive")));
        }
        let g2 = g * g;
        let s5 = 3.0 * 5f64.sqrt() * g2;
        Self::new(
            s5 / (mu_f + s5),
            mu_f / (9.0 * g2),
            1.0 / s5,
            1.0 / (5.0 * g2),
            round_up_even(h),
        )
    }
}

pub fn round_up_even(h: usize) -> usize {
    let h = h.max(2);
    h + h % 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsgdState {
    pub x: DVector<f64>,
    pub v: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    pub h: usize,
}

impl AsgdState {
    pub fn zeros(dim: usize) -> Self {
        Self {
            x: DVector::zeros(dim),
            v: DVector::zeros(dim),
            y: DVector::zeros(dim),
            z: DVector::zeros(dim),
            h: 0,
        }
    }

    /// Sets and returns `y = alpha x + (1 - alpha) v`, where the gradient is queried.
    pub fn prepare(&mut self, rates: &AsgdRates) -> &DVector<f64> {
        self.y.copy_from(&self.v);
        self.y.axpy(rates.alpha, &self.x, 1.0 - rates.alpha);
        &self.y
    }

    /// Completes the step from the prepared `y` with the gradient taken there.
    pub fn advance(&mut self, rates: &AsgdRates, grad: &DVector<f64>) {
        self.x.copy_from(&self.y);
        self.x.axpy(-rates.delta, grad, 1.0);
        self.z.copy_from(&self.v);
        self.z.axpy(rates.beta, &self.y, 1.0 - rates.beta);
        self.v.copy_from(&self.z);
        self.v.axpy(-rates.xi, grad, 1.0);
        self.h += 1;
    }
}

/// One accelerated step; `grad` must be evaluated at `alpha x + (1 - alpha) v`.
pub fn asgd_step(state: &AsgdState, rates: &AsgdRates, grad: &DVector<f64>) -> AsgdState {
    let mut next = state.clone();
    next.prepare(rates);
    next.advance(rates, grad);
    next
}

/// Supplies gradients of the inner objective.
pub trait GradientOracle {
    fn dim(&self) -> usize;
    /// Writes the gradient at `at` into `out`; returns environment samples consumed.
    fn gradient(&mut self, at: &DVector<f64>, out: &mut DVector<f64>) -> u64;
}

/// `F omega - b` for a fixed symmetric `F`, with `b = H_tau / (1 - gamma)` in the
/// compatible-error case.
#[derive(Debug, Clone)]
pub struct QuadraticGradient {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl QuadraticGradient {
    pub fn from_terms(terms: &ExactTerms) -> Self {
        Self {
            matrix: terms.fisher.clone(),
            rhs: terms.lagrangian_gradient(),
        }
    }
}

impl GradientOracle for QuadraticGradient {
    fn dim(&self) -> usize {
        self.rhs.len()
    }

    fn gradient(&mut self, at: &DVector<f64>, out: &mut DVector<f64>) -> u64 {
        out.copy_from(&self.rhs);
        out.gemv(1.0, &self.matrix, at, -1.0);
        0
    }
}

/// Monte-Carlo gradients from the sampler.
pub struct SampledGradient<'a, 'r, R: RngCore + ?Sized> {
    ctx: SamplerContext<'a>,
    rng: &'r mut R,
    adv: Vec<f64>,
}

impl<'a, 'r, R: RngCore + ?Sized> SampledGradient<'a, 'r, R> {
    pub fn new(ctx: SamplerContext<'a>, rng: &'r mut R, n_actions: usize) -> Self {
        Self {
            ctx,
            rng,
            adv: vec![0.0; n_actions],
        }
    }
}

impl<R: RngCore + ?Sized> GradientOracle for SampledGradient<'_, '_, R> {
    fn dim(&self) -> usize {
        self.ctx.dim()
    }

    fn gradient(&mut self, at: &DVector<f64>, out: &mut DVector<f64>) -> u64 {
        self.ctx.estimate_into(at, self.rng, out, &mut self.adv).samples_used
    }
}

/// Runs `H` accelerated steps from zero and returns the tail average
/// `(2 / H) sum_{H/2 < h <= H} x_h` with the samples consumed.
pub fn run_with_oracle<O: GradientOracle + ?Sized>(oracle: &mut O, rates: &AsgdRates) -> (DVector<f64>, u64) {
    let dim = oracle.dim();
    let mut state = AsgdState::zeros(dim);
    let mut grad = DVector::zeros(dim);
    let mut tail = DVector::zeros(dim);
    let mut samples = 0;
    let half = rates.h / 2;
    for h in 0..rates.h {
        state.prepare(rates);
        samples += oracle.gradient(&state.y, &mut grad);
        state.advance(rates, &grad);
        if h + 1 > half {
            tail += &state.x;
        }
    }
    tail *= 2.0 / rates.h as f64;
    (tail, samples)
}

/// Where inner-loop gradients come from.
pub enum GradientSource<'r, R: RngCore + ?Sized> {
    Stochastic(&'r mut R),
    ExactOracle,
}

/// Inner loop at `(theta, lambda, tau)`.
pub fn run_inner_loop<R: RngCore + ?Sized>(
    spec: &CmdpSpec,
    params: &PolicyParams,
    lambda: f64,
    tau: f64,
    rates: &AsgdRates,
    source: GradientSource<'_, R>,
) -> Result<(DVector<f64>, u64)> {
    match source {
        GradientSource::ExactOracle => {
            let mut oracle = QuadraticGradient::from_terms(&exact_terms(spec, params, lambda, tau)?);
            Ok(run_with_oracle(&mut oracle, rates))
        }
        GradientSource::Stochastic(rng) => {
            let ctx = SamplerContext::new(spec, params, lambda, tau)?;
            let mut oracle = SampledGradient::new(ctx, rng, spec.n_actions());
            Ok(run_with_oracle(&mut oracle, rates))
        }
    }
}
