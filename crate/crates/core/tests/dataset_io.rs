use std::fs;

use fdnet::dataset::{generate, Case, CaseSpec, TrajectorySet};
use fdnet::heat::{exact_solution, HeatProblem};
use fdnet::Error;

fn small(case: Case, seed: u64) -> TrajectorySet {
    generate(&CaseSpec::new(case, seed).with_ics(10, 7).with_horizon(20.0)).unwrap()
}

#[test]
fn round_trip_preserves_everything() {
    let dir = tempfile::tempdir().unwrap();
    for case in Case::ALL {
        let spec = CaseSpec::new(case, 9).with_ics(10, 7);
        let spec = if case == Case::Unstable {
            spec
        } else {
            spec.with_horizon(20.0)
        };
        let ts = generate(&spec).unwrap();
        let path = dir.path().join(case.as_str());
        ts.save(&path).unwrap();
        let back = TrajectorySet::load(&path).unwrap();
        assert_eq!(back, ts, "{case}");
        assert_eq!(back.fingerprint(), ts.fingerprint());
    }
}

#[test]
fn files_have_documented_layout() {
    let dir = tempfile::tempdir().unwrap();
    let ts = small(Case::Stable, 1);
    ts.save(dir.path()).unwrap();
    let data = fs::read(dir.path().join("data.bin")).unwrap();
    assert_eq!(data.len(), 10 * 21 * 32 * 8);
    // IC-major, then time, then space.
    let at = |ic: usize, j: usize, x: usize| {
        let off = ((ic * 21 + j) * 32 + x) * 8;
        f64::from_le_bytes(data[off..off + 8].try_into().unwrap())
    };
    assert_eq!(at(3, 7, 11), ts.state(3, 7)[11]);

    let split = fs::read_to_string(dir.path().join("split.csv")).unwrap();
    let mut lines = split.lines();
    assert_eq!(lines.next(), Some("ic_index,role"));
    assert_eq!(lines.filter(|l| l.ends_with(",train")).count(), 7);

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["case"], "stable");
    assert_eq!(meta["point_count"], 32);
    assert_eq!(meta["seed"], 1);
}

#[test]
fn wrong_grid_size_is_a_shape_error() {
    let dir = tempfile::tempdir().unwrap();
    small(Case::Stable, 2).save(dir.path()).unwrap();
    let meta_path = dir.path().join("meta.json");
    let text = fs::read_to_string(&meta_path).unwrap();
    fs::write(
        &meta_path,
        text.replace("\"point_count\": 32", "\"point_count\": 31"),
    )
    .unwrap();
    assert!(matches!(
        TrajectorySet::load(dir.path()),
        Err(Error::Shape(_))
    ));
}

#[test]
fn truncated_data_is_a_shape_error() {
    let dir = tempfile::tempdir().unwrap();
    small(Case::Stable, 2).save(dir.path()).unwrap();
    let path = dir.path().join("data.bin");
    let mut bytes = fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 32 * 8);
    fs::write(&path, bytes).unwrap();
    assert!(matches!(
        TrajectorySet::load(dir.path()),
        Err(Error::Shape(_))
    ));
}

#[test]
fn edited_split_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    small(Case::Stable, 2).save(dir.path()).unwrap();
    let path = dir.path().join("split.csv");
    let text = fs::read_to_string(&path).unwrap();
    let flipped = text.replacen(",test", ",train", 1);
    fs::write(&path, flipped).unwrap();
    assert!(TrajectorySet::load(dir.path()).is_err());
}

#[test]
fn regeneration_writes_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    small(Case::Noisy, 4).save(a.path()).unwrap();
    small(Case::Noisy, 4).save(b.path()).unwrap();
    for file in ["meta.json", "data.bin", "split.csv"] {
        assert_eq!(
            fs::read(a.path().join(file)).unwrap(),
            fs::read(b.path().join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn full_size_stable_dataset() {
    let ts = generate(&CaseSpec::new(Case::Stable, 7)).unwrap();
    assert_eq!(ts.ic_count(), 200);
    assert_eq!((ts.train_ics().len(), ts.test_ics().len()), (150, 50));
    assert_eq!(ts.point_count(), 32);
    assert_eq!(ts.time_count(), 1001);
    assert_eq!(ts.train_tuples().len(), 150 * 1000);
}

#[test]
fn forced_data_follows_closed_form() {
    let ts = small(Case::Forcing, 3);
    let d = ts.forcing_coeffs().unwrap().to_vec();
    let spec = ts.spec();
    let problem = HeatProblem::new(spec.beta, spec.length, ts.ic_coeffs()[4].clone())
        .unwrap()
        .with_forcing(d)
        .unwrap();
    for (j, &t) in ts.times().iter().enumerate() {
        for (m, &x) in ts.grid().points().iter().enumerate() {
            let want = exact_solution(&problem, x, t);
            assert!((ts.state(4, j)[m] - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }
}

#[test]
fn noise_levels_scale_the_perturbation() {
    let base = small(Case::Stable, 6);
    let mut rel = Vec::new();
    for gamma in fdnet::dataset::NOISE_LEVELS {
        let noisy = generate(
            &CaseSpec::new(Case::Noisy, 6)
                .with_noise(gamma)
                .with_ics(10, 7)
                .with_horizon(20.0),
        )
        .unwrap();
        let ratio: f64 = noisy
            .values()
            .iter()
            .zip(base.values())
            .filter(|(_, b)| b.abs() > 1e-3)
            .map(|(n, b)| ((n - b) / b).abs())
            .fold(0.0, f64::max);
        rel.push(ratio / gamma);
    }
    // |u(1 + gamma eps) - u| / |u| / gamma = |eps|: same normal draws at every level.
    assert!((rel[0] - rel[1]).abs() < 1e-6 * rel[1]);
    assert!((rel[1] - rel[2]).abs() < 1e-9 * rel[2]);
}
