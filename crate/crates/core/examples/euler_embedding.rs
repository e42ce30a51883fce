//! An FD-Net whose weights encode one forward Euler step exactly.

use fdnet::harness::predict_rollout;
use fdnet::heat::{euler_rollout, euler_step, EulerConfig};
use fdnet::net::{net_forward, FdNetParams, NetConfig};

pub fn run_example() -> fdnet::Result<()> {
    let euler = EulerConfig::new(2e-4, 1.0, 0.1)?;
    let params = FdNetParams::euler_embedding(NetConfig::new(16, 1, 32), euler.delta);
    let u0: Vec<f64> = (0..32).map(|m| ((m * m) as f64 * 0.37).sin()).collect();

    let diff = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    println!(
        "one step:    max |net - euler| = {:.1e}",
        diff(&net_forward(&u0, &params, 1), &euler_step(&u0, &euler))
    );

    let net = predict_rollout(&params, &u0, 1000)?;
    let reference = euler_rollout(&u0, &euler, 1000);
    println!(
        "1000 steps:  max |net - euler| = {:.1e}",
        diff(&net, reference.last().unwrap())
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> fdnet::Result<()> {
    run_example()
}
