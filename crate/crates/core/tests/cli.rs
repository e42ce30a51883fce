use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fdnet(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdnet"))
        .args(args)
        .env("FDNET_OUTPUT_ROOT", root)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn gen_small(root: &Path, case: &str, out: &Path) {
    let o = fdnet(
        &[
            "gen",
            "--case",
            case,
            "--seed",
            "1",
            "--ics",
            "12",
            "--train",
            "9",
            "--horizon",
            "40",
            "--out",
            out.to_str().unwrap(),
        ],
        root,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn params_prints_counts() {
    let root = tempfile::tempdir().unwrap();
    for (args, want) in [
        (vec!["params", "--filters", "16"], "1936"),
        (vec!["params", "--filters", "16", "--forcing"], "2256"),
        (vec!["params", "--filters", "1"], "16"),
    ] {
        let o = fdnet(&args, root.path());
        assert!(o.status.success());
        assert_eq!(stdout(&o).trim(), want);
    }
}

#[test]
fn gen_refuses_to_overwrite_without_force() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("d");
    gen_small(root.path(), "noisy", &out);
    let first = fs::read(out.join("data.bin")).unwrap();
    let args = [
        "gen",
        "--case",
        "noisy",
        "--seed",
        "1",
        "--ics",
        "12",
        "--train",
        "9",
        "--horizon",
        "40",
        "--out",
        out.to_str().unwrap(),
    ];
    let o = fdnet(&args, root.path());
    assert_eq!(o.status.code(), Some(2));
    let mut forced = args.to_vec();
    forced.push("--force");
    assert!(fdnet(&forced, root.path()).status.success());
    assert_eq!(fs::read(out.join("data.bin")).unwrap(), first);
}

#[test]
fn gen_defaults_to_full_size_under_output_root() {
    let root = tempfile::tempdir().unwrap();
    let o = fdnet(&["gen", "--case", "stable", "--seed", "7"], root.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("ics=200"));
    assert!(root.path().join("data/stable-s7/meta.json").exists());
}

#[test]
fn bad_flags_exit_with_config_code() {
    let root = tempfile::tempdir().unwrap();
    assert_eq!(
        fdnet(&["gen", "--case", "sideways"], root.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(fdnet(&["train"], root.path()).status.code(), Some(2));
    assert_eq!(
        fdnet(&["train", "--data", "/nonexistent"], root.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn train_then_forcing_mismatch() {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("stable");
    gen_small(root.path(), "stable", &data);
    let out = root.path().join("run");
    let o = fdnet(
        &[
            "train",
            "--data",
            data.to_str().unwrap(),
            "--filters",
            "4",
            "--budget",
            "5",
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
        ],
        root.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(out.join("metrics.csv"))
            .unwrap()
            .lines()
            .count(),
        7
    );
    assert!(out.join("final/params.bin").exists());

    let o = fdnet(
        &[
            "train",
            "--data",
            data.to_str().unwrap(),
            "--forcing",
            "--budget",
            "1",
        ],
        root.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn one_cell_matrix_matches_train_and_feeds_plotdata() {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("stable");
    gen_small(root.path(), "stable", &data);

    let single = root.path().join("single");
    let o = fdnet(
        &[
            "train",
            "--data",
            data.to_str().unwrap(),
            "--filters",
            "2",
            "--blocks",
            "2",
            "--opt",
            "adam",
            "--lr",
            "1e-3",
            "--budget",
            "150",
            "--seed",
            "4",
            "--out",
            single.to_str().unwrap(),
        ],
        root.path(),
    );
    assert!(o.status.success());

    let sweep = root.path().join("sweep");
    let config = root.path().join("m.toml");
    fs::write(
        &config,
        format!(
            "cases = [\"stable\"]\ndata = [\"{}\"]\nblocks = [2]\nfilters = [2]\noptimizers = [\"adam@1e-3\"]\nseeds = [4]\nadam_iters = 150\nout = \"{}\"\n",
            data.display(),
            sweep.display()
        ),
    )
    .unwrap();
    let o = fdnet(
        &[
            "matrix",
            "--config",
            config.to_str().unwrap(),
            "--jobs",
            "2",
        ],
        root.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let index = fs::read_to_string(sweep.join("index.csv")).unwrap();
    let mut lines = index.lines();
    assert_eq!(
        lines.next(),
        Some("run_dir,case,optimizer,n_blocks,n_filters,seed,status")
    );
    let row = lines.next().unwrap();
    assert!(row.ends_with(",stable,adam@1e-3,2,2,4,ok"), "{row}");
    let run_dir = row.split(',').next().unwrap();
    assert_eq!(
        fs::read(Path::new(run_dir).join("metrics.csv")).unwrap(),
        fs::read(single.join("metrics.csv")).unwrap()
    );

    // Append a run that never happened.
    fs::write(
        sweep.join("index.csv"),
        format!("{index}{}/ghost,stable,tr,1,2,0,ok\n", sweep.display()),
    )
    .unwrap();
    let plots = root.path().join("plots");
    let o = fdnet(
        &[
            "plotdata",
            "--runs",
            sweep.join("index.csv").to_str().unwrap(),
            "--out",
            plots.to_str().unwrap(),
        ],
        root.path(),
    );
    assert!(o.status.success());
    let csv = fs::read_to_string(plots.join("plotdata.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.contains("oracle_calls"));
    assert_eq!(lines.count(), 151);
    assert!(fs::read_to_string(plots.join("missing.csv"))
        .unwrap()
        .contains("ghost"));
}

#[test]
fn plotdata_over_no_runs_is_header_only() {
    let root = tempfile::tempdir().unwrap();
    let index = root.path().join("index.csv");
    fs::write(
        &index,
        "run_dir,case,optimizer,n_blocks,n_filters,seed,status\n",
    )
    .unwrap();
    let out = root.path().join("p");
    let o = fdnet(
        &[
            "plotdata",
            "--runs",
            index.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        root.path(),
    );
    assert!(o.status.success());
    let csv = fs::read_to_string(out.join("plotdata.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn matrix_records_failed_runs() {
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("m.toml");
    let sweep = root.path().join("sweep");
    fs::write(
        &config,
        format!(
            "cases = [\"stable\"]\ndata = [\"{}\"]\nblocks = [1]\nfilters = [2]\noptimizers = [\"tr\"]\nseeds = [0, 1]\nout = \"{}\"\n",
            root.path().join("missing").display(),
            sweep.display()
        ),
    )
    .unwrap();
    let o = fdnet(
        &["matrix", "--config", config.to_str().unwrap()],
        root.path(),
    );
    assert!(o.status.success());
    let index = fs::read_to_string(sweep.join("index.csv")).unwrap();
    assert_eq!(index.lines().filter(|l| l.contains("failed")).count(), 2);
}

#[test]
fn euler_marks_the_unstable_case_divergent() {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("u");
    let o = fdnet(
        &[
            "gen",
            "--case",
            "unstable",
            "--ics",
            "8",
            "--train",
            "6",
            "--out",
            data.to_str().unwrap(),
        ],
        root.path(),
    );
    assert!(o.status.success());
    let out = root.path().join("e");
    let o = fdnet(
        &[
            "euler",
            "--data",
            data.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        root.path(),
    );
    assert!(o.status.success());
    let csv = fs::read_to_string(out.join("euler.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    let f: Vec<&str> = last.split(',').collect();
    assert_eq!((f[0], f[2], f[4]), ("unstable", "5", "true"), "{last}");
    assert!((f[1].parse::<f64>().unwrap() - 4.0).abs() < 1e-12);
    assert!(f[3].parse::<f64>().unwrap() > 1e3);
}
