//! Learning a source term: the forcing path adds a trained spatial vector
//! after every block.

use fdnet::dataset::{generate, Case, CaseSpec};
use fdnet::harness::{euler_baseline_error, eval_horizons, test_error, RunConfig};
use fdnet::optim::{Method, TrustRegionConfig};

pub fn run_example() -> fdnet::Result<()> {
    let ts = generate(
        &CaseSpec::new(Case::Forcing, 0)
            .with_ics(25, 20)
            .with_horizon(200.0),
    )?;
    let out = std::env::temp_dir().join("fdnet-example-forcing");
    let cfg = RunConfig::for_dataset(
        &ts,
        8,
        1,
        Method::TrustRegion(TrustRegionConfig::default()),
        0,
        &out,
    );
    println!(
        "net with forcing: {}, {} parameters",
        cfg.net.with_forcing,
        cfg.net.param_count()
    );
    // Unscaled source coefficients push the state towards D_i / rate_i, so
    // errors are best read against the size of the data.
    let rms = (ts.values().iter().map(|v| v * v).sum::<f64>() / ts.values().len() as f64).sqrt();
    println!("data RMS {rms:.1}");

    let summary = fdnet::run_experiment(&cfg, &ts)?;
    let best = fdnet::net::Checkpoint::load(&out.join("best"))?.params;
    let euler = ts.spec().euler_config()?;
    for tau in eval_horizons(&ts) {
        println!(
            "tau' = {tau:>3}: net {:.2e}, Euler without source {:.2e}",
            test_error(&best, &ts, tau)?.mse,
            euler_baseline_error(&ts, &euler, tau)?.mse
        );
    }
    let f = best.forcing_vector().unwrap_or_default();
    let head: Vec<String> = f.iter().take(6).map(|v| format!("{v:.2e}")).collect();
    println!(
        "learned forcing vector, first entries: [{}]",
        head.join(", ")
    );
    println!(
        "best iteration {}, metrics in {}",
        summary.best_iteration,
        out.display()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> fdnet::Result<()> {
    run_example()
}
