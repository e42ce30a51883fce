//! Generate, save and reload a trajectory data set.
//!
//!     cargo run --release --example generate_dataset -- [out_dir]

use fdnet::dataset::{generate, Case, CaseSpec, TrajectorySet};

pub fn run_in(out: &std::path::Path) -> fdnet::Result<()> {
    for case in Case::ALL {
        let ts = generate(&CaseSpec::new(case, 0).with_ics(40, 30))?;
        let dir = out.join(case.as_str());
        ts.save(&dir)?;
        let back = TrajectorySet::load(&dir)?;
        assert_eq!(back.fingerprint(), ts.fingerprint());
        println!(
            "{case:>8}: {} ICs x {} times x {} points, {} training tuples -> {}",
            ts.ic_count(),
            ts.time_count(),
            ts.point_count(),
            ts.train_tuples().len(),
            dir.display()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> fdnet::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("fdnet-example-data"));
    run_in(&out)
}
