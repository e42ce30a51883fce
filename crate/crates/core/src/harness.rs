//! Experiment orchestration: sequential prediction, test errors, the Euler
//! baseline and complete training runs with their metrics files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{Case, TrajectorySet};
use crate::error::{Error, Result};
use crate::heat::{self, EulerConfig};
use crate::net::{BlockOperator, Checkpoint, FdNetParams, NetConfig};
use crate::optim::{self, Method, StepReport, TrainOptions};

/// Rollouts stop once the sup norm exceeds this.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Default evaluation cadence for ADAM runs (trust-region runs evaluate every iteration).
pub const ADAM_EVAL_EVERY: usize = 100;

fn diverged(u: &[f64]) -> bool {
    u.iter().any(|v| !v.is_finite()) || heat::sup_norm(u) > DIVERGENCE_LIMIT
}

/// An FD-Net viewed as a one-data-step map (`n_blocks` block applications).
#[derive(Debug, Clone)]
pub struct Predictor {
    op: BlockOperator,
    n_blocks: usize,
}

impl Predictor {
    pub fn new(params: &FdNetParams) -> Self {
        Self {
            op: params.operator(),
            n_blocks: params.config().n_blocks,
        }
    }

    fn advance(&self, state: &mut Vec<f64>, scratch: &mut Vec<f64>) {
        for _ in 0..self.n_blocks {
            self.op.apply(state, scratch);
            std::mem::swap(state, scratch);
        }
    }

    /// One data step.
    pub fn step(&self, u: &[f64]) -> Vec<f64> {
        let mut state = u.to_vec();
        let mut scratch = vec![0.0; u.len()];
        self.advance(&mut state, &mut scratch);
        state
    }

    /// Feeds each prediction back in `n_steps` times and returns the last state.
    pub fn rollout(&self, u0: &[f64], n_steps: usize) -> Result<Vec<f64>> {
        let mut state = u0.to_vec();
        let mut scratch = vec![0.0; u0.len()];
        for step in 1..=n_steps {
            self.advance(&mut state, &mut scratch);
            if diverged(&state) {
                return Err(Error::Diverged { step });
            }
        }
        Ok(state)
    }

    /// Like [`Predictor::rollout`] but keeps every intermediate prediction.
    pub fn trajectory(&self, u0: &[f64], n_steps: usize) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(n_steps);
        let mut state = u0.to_vec();
        let mut scratch = vec![0.0; u0.len()];
        for step in 1..=n_steps {
            self.advance(&mut state, &mut scratch);
            if diverged(&state) {
                return Err(Error::Diverged { step });
            }
            out.push(state.clone());
        }
        Ok(out)
    }
}

/// Final state after `n_steps` sequential network predictions from `u0`.
pub fn predict_rollout(params: &FdNetParams, u0: &[f64], n_steps: usize) -> Result<Vec<f64>> {
    if n_steps == 0 {
        return Err(Error::Config("a rollout needs at least one step".into()));
    }
    Predictor::new(params).rollout(u0, n_steps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub tau_prime: usize,
    /// `inf` when a rollout diverged.
    pub mse: f64,
    pub iteration: usize,
}

/// The three horizons evaluated for a data set: one step, the case's
/// multi-step horizon, and the full horizon `T / dt`.
pub fn eval_horizons(ts: &TrajectorySet) -> [usize; 3] {
    let full = ts.spec().step_count();
    [1, ts.case().multi_step().min(full), full]
}

fn rollout_error<F>(ts: &TrajectorySet, tau_prime: usize, mut rollout: F) -> Result<EvalResult>
where
    F: FnMut(&[f64], usize) -> Option<Vec<f64>>,
{
    let steps = ts.spec().step_count();
    if tau_prime == 0 || tau_prime > steps {
        return Err(Error::Config(format!(
            "tau' = {tau_prime} must lie in 1..={steps}"
        )));
    }
    let m = ts.point_count();
    let starts = steps - tau_prime + 1;
    let mut total = 0.0;
    for &ic in ts.test_ics() {
        for t in 0..starts {
            let Some(pred) = rollout(ts.state(ic, t), tau_prime) else {
                return Ok(EvalResult {
                    tau_prime,
                    mse: f64::INFINITY,
                    iteration: 0,
                });
            };
            total += pred
                .iter()
                .zip(ts.state(ic, t + tau_prime))
                .map(|(p, y)| (p - y) * (p - y))
                .sum::<f64>();
        }
    }
    let count = ts.test_ics().len() * starts * m;
    Ok(EvalResult {
        tau_prime,
        mse: total / count as f64,
        iteration: 0,
    })
}

/// Mean squared `tau'`-step prediction error over the test ICs and every
/// admissible start time. With `tau' = T / dt` only `t = 0` qualifies, which
/// is the full-horizon error.
pub fn test_error(
    params: &FdNetParams,
    ts: &TrajectorySet,
    tau_prime: usize,
) -> Result<EvalResult> {
    check_compatible(params.config(), ts)?;
    let predictor = Predictor::new(params);
    rollout_error(ts, tau_prime, |u0, n| predictor.rollout(u0, n).ok())
}

/// Same metric with forward Euler rollouts in place of the network.
pub fn euler_baseline_error(
    ts: &TrajectorySet,
    config: &EulerConfig,
    tau_prime: usize,
) -> Result<EvalResult> {
    rollout_error(ts, tau_prime, |u0, n| {
        let mut state = u0.to_vec();
        let mut next = vec![0.0; u0.len()];
        for _ in 0..n {
            heat::euler_step_into(&state, config.delta, &mut next);
            std::mem::swap(&mut state, &mut next);
            if diverged(&state) {
                return None;
            }
        }
        Some(state)
    })
}

fn check_compatible(cfg: &NetConfig, ts: &TrajectorySet) -> Result<()> {
    if cfg.grid_points != ts.point_count() {
        return Err(Error::Config(format!(
            "network expects {} grid points, data set has {}",
            cfg.grid_points,
            ts.point_count()
        )));
    }
    Ok(())
}

/// One training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub net: NetConfig,
    pub method: Method,
    pub batch_size: usize,
    pub seed: u64,
    pub eval_every: usize,
    pub out_dir: PathBuf,
}

impl RunConfig {
    /// Network sized for `ts`, forcing path enabled iff the data has a source term.
    pub fn for_dataset(
        ts: &TrajectorySet,
        n_filters: usize,
        n_blocks: usize,
        method: Method,
        seed: u64,
        out_dir: impl Into<PathBuf>,
    ) -> Self {
        let net = NetConfig::new(n_filters, n_blocks, ts.point_count())
            .forcing(ts.case() == Case::Forcing);
        let eval_every = match method {
            Method::TrustRegion(_) => 1,
            Method::Adam(_) => ADAM_EVAL_EVERY,
        };
        Self {
            net,
            method,
            batch_size: crate::dataset::DEFAULT_BATCH_SIZE,
            seed,
            eval_every,
            out_dir: out_dir.into(),
        }
    }

    pub fn validate(&self, ts: &TrajectorySet) -> Result<()> {
        self.net.validate()?;
        self.method.validate()?;
        check_compatible(&self.net, ts)?;
        let forcing_data = ts.case() == Case::Forcing;
        if self.net.with_forcing != forcing_data {
            return Err(Error::Config(format!(
                "forcing path {} but the data set is the {} case",
                if self.net.with_forcing {
                    "enabled"
                } else {
                    "disabled"
                },
                ts.case()
            )));
        }
        let tuples = ts.train_ics().len() * (ts.time_count() - 1);
        if self.batch_size == 0 || self.batch_size > tuples {
            return Err(Error::Config(format!(
                "batch size {} exceeds the {tuples} training tuples",
                self.batch_size
            )));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("evaluation cadence must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonSummary {
    pub tau_prime: usize,
    pub min_mse: f64,
    pub min_iteration: usize,
    pub final_mse: f64,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub case: Case,
    pub dataset_fingerprint: String,
    pub config: RunConfig,
    pub param_count: usize,
    pub iterations: usize,
    pub grad_calls: u64,
    pub hvp_calls: u64,
    pub final_minibatch_mse: Option<f64>,
    pub one_step: HorizonSummary,
    pub multi_step: HorizonSummary,
    pub full_horizon: HorizonSummary,
    /// Iteration whose parameters gave the lowest full-horizon error.
    pub best_iteration: usize,
    pub wall_clock_seconds: f64,
    /// Diagnostic when a non-finite loss stopped the run.
    pub abort: Option<String>,
    pub loss_normalization: String,
    pub trust_region_ratio: String,
}

impl RunSummary {
    pub fn is_aborted(&self) -> bool {
        self.abort.is_some()
    }
}

/// Evaluations at one checkpoint, in [`eval_horizons`] order.
type EvalRow = (usize, [f64; 3]);

pub const METRICS_HEADER: &str =
    "iteration,grad_calls,hvp_calls,minibatch_mse,radius,accepted,test_mse_1,test_mse_multi,test_mse_full";

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Renders the training trace and evaluations as `metrics.csv` text.
pub fn metrics_csv(trace: &[StepReport], evals: &[EvalRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    let eval_at = |iteration: usize| evals.iter().find(|(i, _)| *i == iteration).map(|(_, e)| e);
    let test_cols = |iteration: usize| match eval_at(iteration) {
        Some(e) => format!("{},{},{}", e[0], e[1], e[2]),
        None => ",,".to_owned(),
    };
    if eval_at(0).is_some() {
        let _ = writeln!(out, "0,0,0,,,,{}", test_cols(0));
    }
    for r in trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.iteration,
            r.grad_calls,
            r.hvp_calls,
            r.minibatch_mse,
            opt_f64(r.radius),
            r.accepted,
            test_cols(r.iteration)
        );
    }
    out
}

pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn summarize(tau_prime: usize, evals: &[EvalRow], slot: usize) -> HorizonSummary {
    let mut min = (f64::INFINITY, 0);
    for (it, e) in evals {
        if e[slot] < min.0 {
            min = (e[slot], *it);
        }
    }
    HorizonSummary {
        tau_prime,
        min_mse: min.0,
        min_iteration: min.1,
        final_mse: evals.last().map_or(f64::NAN, |(_, e)| e[slot]),
    }
}

/// Trains one network and writes `metrics.csv`, `summary.json` and the
/// `final/` and `best/` checkpoints into `cfg.out_dir`.
///
/// A non-finite loss ends training early; everything recorded so far is still
/// written and the summary carries the diagnostic.
pub fn run_experiment(cfg: &RunConfig, ts: &TrajectorySet) -> Result<RunSummary> {
    cfg.validate(ts)?;
    let started = Instant::now();
    let horizons = eval_horizons(ts);
    let theta0 = FdNetParams::init(cfg.net, cfg.seed);

    let mut evals: Vec<EvalRow> = Vec::new();
    let options = TrainOptions {
        batch_size: cfg.batch_size,
        seed: cfg.seed,
        eval_every: cfg.eval_every,
    };
    let outcome = optim::run_optimizer(
        &cfg.method,
        theta0,
        ts,
        &options,
        |_| {},
        |iteration, params| {
            let mut row = [f64::INFINITY; 3];
            for (slot, &tau) in horizons.iter().enumerate() {
                row[slot] = test_error(params, ts, tau)
                    .map(|e| e.mse)
                    .unwrap_or(f64::INFINITY);
            }
            evals.push((iteration, row));
            row[2]
        },
    );

    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    write_atomic(
        &cfg.out_dir.join("metrics.csv"),
        metrics_csv(&outcome.trace, &evals).as_bytes(),
    )?;

    let fingerprint = ts.fingerprint();
    let last = outcome.trace.last();
    let iterations = last.map_or(0, |r| r.iteration);
    Checkpoint::new(
        outcome.final_params.clone(),
        cfg.seed,
        iterations,
        &fingerprint,
    )
    .save(&cfg.out_dir.join("final"))?;
    let best_iteration = outcome.best.as_ref().map_or(0, |b| b.iteration);
    if let Some(best) = &outcome.best {
        Checkpoint::new(best.params.clone(), cfg.seed, best.iteration, &fingerprint)
            .save(&cfg.out_dir.join("best"))?;
    }

    let summary = RunSummary {
        case: ts.case(),
        dataset_fingerprint: fingerprint,
        config: cfg.clone(),
        param_count: cfg.net.param_count(),
        iterations,
        grad_calls: last.map_or(0, |r| r.grad_calls),
        hvp_calls: last.map_or(0, |r| r.hvp_calls),
        final_minibatch_mse: last.map(|r| r.minibatch_mse),
        one_step: summarize(horizons[0], &evals, 0),
        multi_step: summarize(horizons[1], &evals, 1),
        full_horizon: summarize(horizons[2], &evals, 2),
        best_iteration,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        abort: outcome.abort.as_ref().map(|e| e.to_string()),
        loss_normalization: "mean over batch_size * grid_points squared residuals".into(),
        trust_region_ratio: "ratio and model evaluated on the iteration's mini-batch".into(),
    };
    let path = cfg.out_dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::json(&path, e))?;
    write_atomic(&path, text.as_bytes())?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate, CaseSpec};
    use crate::heat::euler_rollout;

    fn stable_small() -> TrajectorySet {
        generate(
            &CaseSpec::new(Case::Stable, 2)
                .with_ics(8, 5)
                .with_horizon(50.0),
        )
        .unwrap()
    }

    #[test]
    fn rollout_of_identity_net() {
        let cfg = NetConfig::new(2, 3, 6);
        let p = FdNetParams::zeros(cfg);
        let u = [0.1, 0.2, -0.3, 0.0, 5.0, 1.0];
        assert_eq!(predict_rollout(&p, &u, 17).unwrap(), u.to_vec());
        assert!(predict_rollout(&p, &u, 0).is_err());
    }

    #[test]
    fn single_step_rollout_is_net_forward() {
        let cfg = NetConfig::new(3, 2, 7);
        let p = FdNetParams::init(cfg, 3);
        let u: Vec<f64> = (0..7).map(|i| (i as f64).sin()).collect();
        let direct = crate::net::net_forward(&u, &p, 2);
        let rolled = predict_rollout(&p, &u, 1).unwrap();
        for (a, b) in direct.iter().zip(&rolled) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn euler_embedded_rollout_matches_euler() {
        let cfg = NetConfig::new(16, 1, 32);
        let p = FdNetParams::euler_embedding(cfg, 0.02);
        let u0: Vec<f64> = (0..32)
            .map(|i| (i as f64 * 0.1).sin() + 0.3 * (i as f64 * 0.3).sin())
            .collect();
        let net = predict_rollout(&p, &u0, 1000).unwrap();
        let euler = euler_rollout(
            &u0,
            &EulerConfig {
                delta: 0.02,
                dt: 1.0,
            },
            1000,
        );
        for (a, b) in net.iter().zip(euler.last().unwrap()) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = NetConfig::new(1, 1, 5);
        let mut p = FdNetParams::zeros(cfg);
        p.mix_mut()[0] = 1.0;
        // W = 8I, so each step multiplies by 9; 9^13 is the first power above 1e12.
        p.group1_kernel_mut(0)
            .copy_from_slice(&[0.0, 8.0, 0.0, 8.0, 0.0, 0.0, 8.0]);
        let err = predict_rollout(&p, &[1.0; 5], 100).unwrap_err();
        assert!(matches!(err, Error::Diverged { step: 13 }), "{err:?}");
    }

    #[test]
    fn identity_net_full_horizon_error() {
        let ts = stable_small();
        let p = FdNetParams::zeros(NetConfig::new(2, 1, 32));
        let full = ts.spec().step_count();
        let got = test_error(&p, &ts, full).unwrap();
        let mut total = 0.0;
        for &ic in ts.test_ics() {
            for (a, b) in ts.state(ic, full).iter().zip(ts.state(ic, 0)) {
                total += (a - b).powi(2);
            }
        }
        let expected = total / (ts.test_ics().len() * 32) as f64;
        assert!((got.mse - expected).abs() <= 1e-15 * expected.max(1.0));
        assert!(test_error(&p, &ts, full + 1).is_err());
    }

    #[test]
    fn perfect_predictor_scores_zero() {
        let cfg = NetConfig::new(2, 2, 32);
        let p = FdNetParams::init(cfg, 5);
        let spec = CaseSpec::new(Case::Stable, 0)
            .with_ics(3, 2)
            .with_horizon(12.0);
        let base = generate(&spec).unwrap();
        let predictor = Predictor::new(&p);
        let mut values = Vec::new();
        for ic in 0..3 {
            let u0: Vec<f64> = (0..32)
                .map(|i| ((ic * 5 + i) as f64 * 0.37).sin())
                .collect();
            values.extend_from_slice(&u0);
            let mut u = u0;
            for _ in 0..12 {
                u = predictor.step(&u);
                values.extend_from_slice(&u);
            }
        }
        let ts = TrajectorySet::from_parts(
            spec,
            values,
            base.ic_coeffs().to_vec(),
            None,
            base.train_ics().to_vec(),
            base.test_ics().to_vec(),
        )
        .unwrap();
        for tau in [1, 5, 12] {
            assert!(test_error(&p, &ts, tau).unwrap().mse < 1e-20);
        }
    }

    #[test]
    fn euler_baseline_zero_for_zero_data() {
        let spec = CaseSpec::new(Case::Stable, 0)
            .with_ics(3, 2)
            .with_horizon(10.0);
        let base = generate(&spec).unwrap();
        let ts = TrajectorySet::from_parts(
            spec,
            vec![0.0; 3 * 11 * 32],
            base.ic_coeffs().to_vec(),
            None,
            base.train_ics().to_vec(),
            base.test_ics().to_vec(),
        )
        .unwrap();
        let cfg = EulerConfig {
            delta: 0.02,
            dt: 1.0,
        };
        assert_eq!(euler_baseline_error(&ts, &cfg, 10).unwrap().mse, 0.0);
    }

    #[test]
    fn metrics_rows_and_empty_columns() {
        let trace = vec![StepReport {
            iteration: 1,
            minibatch_mse: 0.5,
            rho: Some(0.9),
            radius: Some(2.0),
            cg_iters: 3,
            accepted: true,
            grad_calls: 1,
            hvp_calls: 3,
        }];
        let csv = metrics_csv(&trace, &[(0, [1.0, 2.0, f64::INFINITY])]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], METRICS_HEADER);
        assert_eq!(lines[1], "0,0,0,,,,1,2,inf");
        assert_eq!(lines[2], "1,1,3,0.5,2,true,,,");
    }

    #[test]
    fn mismatched_forcing_is_rejected() {
        let ts = stable_small();
        let mut cfg = RunConfig::for_dataset(
            &ts,
            2,
            1,
            Method::TrustRegion(Default::default()),
            0,
            "unused",
        );
        cfg.net.with_forcing = true;
        assert!(matches!(cfg.validate(&ts), Err(Error::Config(_))));
    }
}
