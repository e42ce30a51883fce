//! Forward Euler below and above the stability bound delta <= 1/2.

use fdnet::heat::{euler_rollout, EulerConfig};

pub fn run_example() -> fdnet::Result<()> {
    let u0: Vec<f64> = (0..32)
        .map(|m| (m as f64 * 0.1).sin() + 0.2 * (7.0 * m as f64 * 0.1).sin())
        .collect();
    let sup = |u: &[f64]| u.iter().fold(0.0f64, |a, x| a.max(x.abs()));

    for (label, beta, dt) in [("stable", 2e-4, 1.0), ("unstable", 2e-4, 200.0)] {
        let cfg = EulerConfig::new(beta, dt, 0.1)?;
        let steps = if cfg.is_stable() { 1000 } else { 10 };
        let states = euler_rollout(&u0, &cfg, steps);
        println!(
            "{label}: delta = {:.2}, stable = {}",
            cfg.delta,
            cfg.is_stable()
        );
        for (n, s) in states
            .iter()
            .enumerate()
            .filter(|(n, _)| (n + 1) % (steps / 5) == 0)
        {
            println!("  step {:>4}: sup |u| = {:.3e}", n + 1, sup(s));
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> fdnet::Result<()> {
    run_example()
}
