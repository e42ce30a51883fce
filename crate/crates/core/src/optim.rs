//! Training: ADAM and a stochastic trust-region Newton-CG (Steihaug) method.
//!
//! Both trainers count gradient and Hessian-vector evaluations so runs can be
//! compared at equal oracle cost. Loss-only evaluations (the trust-region
//! acceptance test) are not counted.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{sample_minibatch, TrajectorySet};
use crate::error::{Error, Result};
use crate::net::{self, Batch, FdNetParams, NetConfig};

const MINIBATCH_STREAM: u64 = 7;

/// A twice-differentiable objective seen through its oracles.
pub trait Objective {
    fn dim(&self) -> usize;
    fn loss(&self, theta: &[f64]) -> f64;
    fn loss_and_grad(&self, theta: &[f64]) -> (f64, Vec<f64>);
    fn hvp(&self, theta: &[f64], v: &[f64]) -> Vec<f64>;
}

/// Mini-batch MSE of an FD-Net.
pub struct NetObjective<'a> {
    cfg: NetConfig,
    batch: &'a Batch,
}

impl<'a> NetObjective<'a> {
    pub fn new(cfg: NetConfig, batch: &'a Batch) -> Self {
        Self { cfg, batch }
    }

    fn params(&self, theta: &[f64]) -> FdNetParams {
        FdNetParams::from_vec(self.cfg, theta.to_vec()).expect("parameter length fixed by config")
    }
}

impl Objective for NetObjective<'_> {
    fn dim(&self) -> usize {
        self.cfg.param_count()
    }

    fn loss(&self, theta: &[f64]) -> f64 {
        net::loss(&self.params(theta), self.batch, self.cfg.n_blocks)
    }

    fn loss_and_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        net::loss_and_grad(&self.params(theta), self.batch, self.cfg.n_blocks)
    }

    fn hvp(&self, theta: &[f64], v: &[f64]) -> Vec<f64> {
        net::hvp(&self.params(theta), v, self.batch, self.cfg.n_blocks)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_iters: usize,
}

impl AdamConfig {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_iters: 12_000,
        }
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid ADAM settings {self:?}")))
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }
}

/// Bias-corrected ADAM update applied in place.
pub fn adam_step(theta: &mut [f64], grad: &[f64], state: &mut AdamState, cfg: &AdamConfig) {
    assert_eq!(theta.len(), grad.len());
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..theta.len() {
        let g = grad[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        theta[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// Residual tolerance for the inner CG solve, as a function of `||g||`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CgTolerance {
    /// `min(0.5, sqrt(||g||)) * ||g||`.
    InexactNewton,
    /// `rel * ||g||`.
    Relative(f64),
}

impl CgTolerance {
    pub fn threshold(&self, grad_norm: f64) -> f64 {
        match *self {
            CgTolerance::InexactNewton => grad_norm.sqrt().min(0.5) * grad_norm,
            CgTolerance::Relative(rel) => rel * grad_norm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustRegionConfig {
    pub initial_radius: f64,
    pub radius_max: f64,
    /// Minimum ratio of actual to predicted decrease for acceptance.
    pub eta: f64,
    /// Below this ratio the radius is multiplied by it.
    pub shrink_threshold: f64,
    /// Above this ratio (with a boundary step) the radius doubles.
    pub expand_threshold: f64,
    pub cg_tolerance: CgTolerance,
    /// `None` means one CG iteration per parameter.
    pub cg_max_iters: Option<usize>,
    pub max_iters: usize,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        Self {
            initial_radius: 1.0,
            radius_max: 100.0,
            eta: 1e-4,
            shrink_threshold: 0.25,
            expand_threshold: 0.75,
            cg_tolerance: CgTolerance::InexactNewton,
            cg_max_iters: None,
            max_iters: 100,
        }
    }
}

impl TrustRegionConfig {
    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.initial_radius > 0.0
            && self.initial_radius <= self.radius_max
            && self.eta > 0.0
            && self.eta <= self.shrink_threshold
            && self.shrink_threshold < self.expand_threshold
            && self.expand_threshold < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid trust-region settings {self:?}"
            )))
        }
    }
}

/// Radius and oracle counters carried across trust-region iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustRegionState {
    pub config: TrustRegionConfig,
    pub radius: f64,
    pub iteration: usize,
    pub grad_calls: u64,
    pub hvp_calls: u64,
}

impl TrustRegionState {
    pub fn new(config: TrustRegionConfig) -> Self {
        Self {
            radius: config.initial_radius,
            config,
            iteration: 0,
            grad_calls: 0,
            hvp_calls: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CgTermination {
    Converged,
    NegativeCurvature,
    Boundary,
    MaxIterations,
}

/// Approximate minimizer of `g^T s + s^T H s / 2` over `||s|| <= radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct CgStep {
    pub step: Vec<f64>,
    /// `H * step`, accumulated from the CG products (no extra oracle call).
    pub hessian_step: Vec<f64>,
    pub iterations: usize,
    pub termination: CgTermination,
}

impl CgStep {
    pub fn boundary_hit(&self) -> bool {
        matches!(
            self.termination,
            CgTermination::Boundary | CgTermination::NegativeCurvature
        )
    }

    /// `m(0) - m(s)` for the gradient `g` the step was computed from.
    pub fn model_decrease(&self, g: &[f64]) -> f64 {
        -(dot(g, &self.step) + 0.5 * dot(&self.step, &self.hessian_step))
    }
}

/// A Hessian-vector oracle returned a non-finite value after `hvp_calls` products.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CgBreakdown {
    pub hvp_calls: usize,
}

/// Positive root of `||z + tau d|| = radius`.
fn to_boundary(z: &[f64], d: &[f64], radius: f64) -> f64 {
    let dd = dot(d, d);
    let zd = dot(z, d);
    let zz = dot(z, z);
    let disc = (zd * zd + dd * (radius * radius - zz)).max(0.0);
    (-zd + disc.sqrt()) / dd
}

/// Steihaug's truncated conjugate gradient method.
pub fn steihaug_cg<H>(
    g: &[f64],
    mut hvp: H,
    radius: f64,
    tolerance: f64,
    max_iters: usize,
) -> std::result::Result<CgStep, CgBreakdown>
where
    H: FnMut(&[f64]) -> Vec<f64>,
{
    let n = g.len();
    let mut z = vec![0.0; n];
    let mut hz = vec![0.0; n];
    let mut r = g.to_vec();
    let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut rr = dot(&r, &r);

    let finish = |step, hessian_step, iterations, termination| CgStep {
        step,
        hessian_step,
        iterations,
        termination,
    };

    if rr.sqrt() <= tolerance {
        return Ok(finish(z, hz, 0, CgTermination::Converged));
    }

    for iter in 1..=max_iters.max(1) {
        let hd = hvp(&d);
        if hd.iter().any(|v| !v.is_finite()) {
            return Err(CgBreakdown { hvp_calls: iter });
        }
        let curvature = dot(&d, &hd);
        if curvature <= 0.0 {
            let tau = to_boundary(&z, &d, radius);
            axpy(tau, &d, &mut z);
            axpy(tau, &hd, &mut hz);
            return Ok(finish(z, hz, iter, CgTermination::NegativeCurvature));
        }
        let alpha = rr / curvature;
        let z_next: Vec<f64> = z.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
        if norm(&z_next) >= radius {
            let tau = to_boundary(&z, &d, radius);
            axpy(tau, &d, &mut z);
            axpy(tau, &hd, &mut hz);
            return Ok(finish(z, hz, iter, CgTermination::Boundary));
        }
        z = z_next;
        axpy(alpha, &hd, &mut hz);
        axpy(alpha, &hd, &mut r);
        let rr_next = dot(&r, &r);
        if rr_next.sqrt() <= tolerance {
            return Ok(finish(z, hz, iter, CgTermination::Converged));
        }
        let beta = rr_next / rr;
        rr = rr_next;
        for (di, ri) in d.iter_mut().zip(&r) {
            *di = -ri + beta * *di;
        }
        if iter == max_iters {
            return Ok(finish(z, hz, iter, CgTermination::MaxIterations));
        }
    }
    Ok(finish(z, hz, max_iters, CgTermination::MaxIterations))
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// One row of the training trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// 1-based iteration number.
    pub iteration: usize,
    /// Loss on this iteration's mini-batch at the parameters leaving the iteration.
    pub minibatch_mse: f64,
    /// Actual over predicted decrease (trust region only).
    pub rho: Option<f64>,
    /// Radius after the update (trust region only).
    pub radius: Option<f64>,
    pub cg_iters: usize,
    pub accepted: bool,
    pub grad_calls: u64,
    pub hvp_calls: u64,
}

impl StepReport {
    pub fn oracle_calls(&self) -> u64 {
        self.grad_calls + self.hvp_calls
    }
}

/// One trust-region iteration on a fixed objective (one mini-batch).
///
/// The ratio test uses the same objective as the gradient and the model.
pub fn tr_iteration<O: Objective>(
    theta: &mut Vec<f64>,
    state: &mut TrustRegionState,
    objective: &O,
) -> Result<StepReport> {
    state.iteration += 1;
    let cfg = state.config;
    let (f0, g) = objective.loss_and_grad(theta);
    state.grad_calls += 1;
    if !f0.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            iteration: state.iteration,
            what: format!("mini-batch loss {f0} or its gradient"),
        });
    }

    let mut report = StepReport {
        iteration: state.iteration,
        minibatch_mse: f0,
        rho: None,
        radius: Some(state.radius),
        cg_iters: 0,
        accepted: false,
        grad_calls: state.grad_calls,
        hvp_calls: state.hvp_calls,
    };

    let g_norm = norm(&g);
    if g_norm == 0.0 {
        return Ok(report);
    }

    let max_cg = cfg.cg_max_iters.unwrap_or_else(|| objective.dim());
    let tolerance = cfg.cg_tolerance.threshold(g_norm);
    let current: &[f64] = theta;
    let cg = steihaug_cg(
        &g,
        |v| objective.hvp(current, v),
        state.radius,
        tolerance,
        max_cg,
    );

    let (rho, boundary_hit, candidate) = match cg {
        Err(breakdown) => {
            state.hvp_calls += breakdown.hvp_calls as u64;
            report.cg_iters = breakdown.hvp_calls;
            (f64::NEG_INFINITY, false, None)
        }
        Ok(step) => {
            state.hvp_calls += step.iterations as u64;
            report.cg_iters = step.iterations;
            let predicted = step.model_decrease(&g);
            let trial: Vec<f64> = theta.iter().zip(&step.step).map(|(a, b)| a + b).collect();
            if predicted > 0.0 {
                let f1 = objective.loss(&trial);
                let rho = if f1.is_finite() {
                    (f0 - f1) / predicted
                } else {
                    f64::NEG_INFINITY
                };
                (rho, step.boundary_hit(), Some((trial, f1)))
            } else {
                (f64::NEG_INFINITY, step.boundary_hit(), None)
            }
        }
    };

    if rho >= cfg.eta {
        if let Some((trial, f1)) = candidate {
            *theta = trial;
            report.accepted = true;
            report.minibatch_mse = f1;
        }
    }
    if rho < cfg.shrink_threshold {
        state.radius *= cfg.shrink_threshold;
    } else if rho > cfg.expand_threshold && boundary_hit {
        state.radius = (2.0 * state.radius).min(cfg.radius_max);
    }

    report.rho = rho.is_finite().then_some(rho);
    report.radius = Some(state.radius);
    report.hvp_calls = state.hvp_calls;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    TrustRegion(TrustRegionConfig),
    Adam(AdamConfig),
}

impl Method {
    pub fn max_iters(&self) -> usize {
        match self {
            Method::TrustRegion(c) => c.max_iters,
            Method::Adam(c) => c.max_iters,
        }
    }

    /// Short label: `tr`, `adam@0.001`, ...
    pub fn label(&self) -> String {
        match self {
            Method::TrustRegion(_) => "tr".to_owned(),
            Method::Adam(c) => format!("adam@{:e}", c.lr),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Method::TrustRegion(c) => c.validate(),
            Method::Adam(c) => c.validate(),
        }
    }
}

/// Settings shared by both trainers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub batch_size: usize,
    pub seed: u64,
    /// Evaluate every this many iterations (plus before the first and after the last).
    pub eval_every: usize,
}

/// Parameters with the lowest evaluation score seen.
#[derive(Debug, Clone, PartialEq)]
pub struct BestParams {
    pub iteration: usize,
    pub score: f64,
    pub params: FdNetParams,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub trace: Vec<StepReport>,
    pub final_params: FdNetParams,
    pub best: Option<BestParams>,
    /// Set when a non-finite loss stopped the run early.
    pub abort: Option<Error>,
}

/// Trains `theta0` on the training split of `data`.
///
/// `on_step` sees every report; `evaluate` is called at iteration 0, every
/// `eval_every` iterations and after the last iteration, and returns the
/// score used to pick the best parameters (lower is better).
pub fn run_optimizer<S, E>(
    method: &Method,
    theta0: FdNetParams,
    data: &TrajectorySet,
    options: &TrainOptions,
    mut on_step: S,
    mut evaluate: E,
) -> RunOutcome
where
    S: FnMut(&StepReport),
    E: FnMut(usize, &FdNetParams) -> f64,
{
    let cfg = *theta0.config();
    let budget = method.max_iters();
    let mut outcome = RunOutcome {
        trace: Vec::with_capacity(budget),
        final_params: theta0.clone(),
        best: None,
        abort: None,
    };
    if budget == 0 {
        return outcome;
    }

    let mut consider = |iteration: usize, params: &FdNetParams, best: &mut Option<BestParams>| {
        let score = evaluate(iteration, params);
        let better = match best {
            Some(b) => score < b.score,
            None => !score.is_nan(),
        };
        if better {
            *best = Some(BestParams {
                iteration,
                score,
                params: params.clone(),
            });
        }
    };

    consider(0, &theta0, &mut outcome.best);

    let tuples = data.train_tuples();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    rng.set_stream(MINIBATCH_STREAM);
    let mut theta = theta0.into_vec();
    let mut tr_state = match method {
        Method::TrustRegion(c) => Some(TrustRegionState::new(*c)),
        Method::Adam(_) => None,
    };
    let mut adam_state = AdamState::new(theta.len());
    let mut grad_calls = 0u64;

    for iteration in 1..=budget {
        let indices = match sample_minibatch(tuples.len(), options.batch_size, &mut rng) {
            Ok(i) => i,
            Err(e) => {
                outcome.abort = Some(e);
                break;
            }
        };
        let batch = data.batch(&tuples, &indices);
        let objective = NetObjective::new(cfg, &batch);

        let step = match (method, tr_state.as_mut()) {
            (Method::TrustRegion(_), Some(state)) => tr_iteration(&mut theta, state, &objective),
            (Method::Adam(adam), _) => {
                let (f0, g) = objective.loss_and_grad(&theta);
                grad_calls += 1;
                if !f0.is_finite() || g.iter().any(|v| !v.is_finite()) {
                    Err(Error::NonFinite {
                        iteration,
                        what: format!("mini-batch loss {f0} or its gradient"),
                    })
                } else {
                    adam_step(&mut theta, &g, &mut adam_state, adam);
                    Ok(StepReport {
                        iteration,
                        minibatch_mse: objective.loss(&theta),
                        rho: None,
                        radius: None,
                        cg_iters: 0,
                        accepted: true,
                        grad_calls,
                        hvp_calls: 0,
                    })
                }
            }
            _ => unreachable!("trust-region state exists for trust-region runs"),
        };

        let report = match step {
            Ok(r) if r.minibatch_mse.is_finite() => r,
            Ok(r) => {
                outcome.abort = Some(Error::NonFinite {
                    iteration,
                    what: format!("mini-batch loss {} after the update", r.minibatch_mse),
                });
                on_step(&r);
                outcome.trace.push(r);
                break;
            }
            Err(e) => {
                outcome.abort = Some(e);
                break;
            }
        };
        on_step(&report);
        outcome.trace.push(report);

        if iteration % options.eval_every.max(1) == 0 || iteration == budget {
            let params = FdNetParams::from_vec(cfg, theta.clone()).expect("length unchanged");
            consider(iteration, &params, &mut outcome.best);
        }
    }

    outcome.final_params = FdNetParams::from_vec(cfg, theta).expect("length unchanged");
    outcome
}
