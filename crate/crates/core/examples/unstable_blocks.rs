//! Stacking blocks: on the unstable case (delta = 4) one data step spans
//! k artificial steps, and more blocks make the step learnable.

use fdnet::dataset::{generate, Case, CaseSpec};
use fdnet::harness::{euler_baseline_error, test_error};
use fdnet::net::{FdNetParams, NetConfig};
use fdnet::optim::{run_optimizer, Method, TrainOptions, TrustRegionConfig};

pub fn run_example() -> fdnet::Result<()> {
    let ts = generate(&CaseSpec::new(Case::Unstable, 0).with_ics(25, 20))?;
    let full = ts.spec().step_count();
    let euler = euler_baseline_error(&ts, &ts.spec().euler_config()?, full)?;
    println!("Euler (delta = 4), {full}-step test MSE: {:.2e}", euler.mse);

    let options = TrainOptions {
        batch_size: 64,
        seed: 0,
        eval_every: usize::MAX,
    };
    let method = Method::TrustRegion(TrustRegionConfig::default().with_max_iters(300));
    for k in [1, 2, 4, 10] {
        let cfg = NetConfig::new(16, k, ts.point_count());
        let out = run_optimizer(
            &method,
            FdNetParams::init(cfg, 0),
            &ts,
            &options,
            |_| {},
            |_, _| 0.0,
        );
        let err = test_error(&out.final_params, &ts, full)?;
        println!("k = {k:>2}: {full}-step test MSE {:.2e}", err.mse);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> fdnet::Result<()> {
    run_example()
}
