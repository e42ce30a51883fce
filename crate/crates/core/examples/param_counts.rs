//! Parameter counts for the filter widths used in the experiments.

use fdnet::net::NetConfig;

pub fn run_example() -> fdnet::Result<()> {
    println!("{:>4} {:>8} {:>14}", "F", "plain", "with forcing");
    for f in [2, 4, 8, 16, 32, 64] {
        let cfg = NetConfig::new(f, 1, 32);
        println!(
            "{f:>4} {:>8} {:>14}",
            cfg.param_count(),
            cfg.forcing(true).param_count()
        );
    }
    let layout = NetConfig::new(16, 1, 32).forcing(true).layout();
    println!("F = 16 layout: {layout:?}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> fdnet::Result<()> {
    run_example()
}
