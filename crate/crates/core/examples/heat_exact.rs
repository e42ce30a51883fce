//! Exact solutions of the heat equation, with and without a source term.

use fdnet::heat::{exact_solution, Grid, HeatProblem};

pub fn run_example() -> fdnet::Result<()> {
    let grid = Grid::new(std::f64::consts::PI, 0.1)?;
    let free = HeatProblem::new(2e-4, grid.length(), vec![1.0, -0.5, 0.25])?;
    let forced = free.clone().with_forcing(vec![1e-4, 0.0, -2e-4])?;

    println!(
        "grid: {} points, last at x = {:.1}",
        grid.point_count(),
        grid.points()[grid.point_count() - 1]
    );
    println!("{:>6} {:>12} {:>12}", "t", "u(1.5,t)", "forced");
    for t in [0.0, 100.0, 1000.0, 10_000.0, 1e6] {
        println!(
            "{t:>6} {:>12.6} {:>12.6}",
            exact_solution(&free, 1.5, t),
            exact_solution(&forced, 1.5, t)
        );
    }

    // Mode i decays at beta (i pi / L)^2.
    for i in 1..=3 {
        println!(
            "mode {i}: rate {:.1e}, half-life {:.0}",
            free.mode_rate(i),
            2f64.ln() / free.mode_rate(i)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> fdnet::Result<()> {
    run_example()
}
