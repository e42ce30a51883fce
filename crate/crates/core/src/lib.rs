//! FD-Net: residual networks built from finite-difference filters that learn
//! the dynamics of the 1-D heat equation `u_t = beta * u_xx` from trajectory
//! data.
//!
//! The crate covers the whole pipeline:
//!
//! * [`heat`]: exact solutions, noise, forward Euler.
//! * [`dataset`]: synthetic trajectory sets for the stable, unstable, noisy and
//!   forced cases, with a directory format on disk.
//! * [`net`]: the network, its loss, exact gradients and Hessian-vector
//!   products, and checkpoints.
//! * [`optim`]: ADAM and a trust-region Newton-CG method with oracle counting.
//! * [`harness`]: rollouts, test errors, the Euler baseline and complete runs
//!   writing `metrics.csv` / `summary.json`.
//! * [`cli`]: the `fdnet` command-line front end.
//!
//! The `examples/` directory has one runnable program per capability; start
//! with `cargo run --release --example heat_exact`.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod heat;
pub mod net;
pub mod optim;

pub use dataset::{generate, Case, CaseSpec, TrajectorySet};
pub use error::{Error, Result};
pub use harness::{predict_rollout, run_experiment, test_error, EvalResult, RunConfig, RunSummary};
pub use heat::{euler_rollout, exact_solution, EulerConfig, Grid, HeatProblem};
pub use net::{Batch, FdNetParams, NetConfig};
pub use optim::{AdamConfig, Method, TrustRegionConfig};
