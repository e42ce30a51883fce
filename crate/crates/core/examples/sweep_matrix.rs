//! A small sweep over blocks, filters and optimizers, then the long-format
//! plot table.
//!
//!     cargo run --release --example sweep_matrix -- [out_dir]

use fdnet::cli::{plotdata, run_matrix, MatrixConfig};

const CONFIG: &str = r#"
cases = ["stable"]
n_ics = 16
n_train = 12
horizon = 50.0
blocks = [1, 2]
filters = [2, 4]
optimizers = ["tr", "adam@1e-3"]
seeds = [0, 1]
tr_budget = 20
adam_iters = 400
"#;

pub fn run_in(out: &std::path::Path) -> fdnet::Result<()> {
    let cfg: MatrixConfig = CONFIG.parse()?;
    let rows = run_matrix(&cfg, out, 2)?;
    for r in &rows {
        println!(
            "{:>9} k={} F={} seed={} {}",
            r.optimizer, r.n_blocks, r.n_filters, r.seed, r.status
        );
    }
    let missing = plotdata(&out.join("index.csv"), &out.join("plots"))?;
    println!(
        "{} runs, {} missing, plot table at {}",
        rows.len(),
        missing.len(),
        out.join("plots/plotdata.csv").display()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> fdnet::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("fdnet-example-sweep"));
    run_in(&out)
}
