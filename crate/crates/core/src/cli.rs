//! The `fdnet` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numerical abort.
//! Outputs default to subdirectories of `$FDNET_OUTPUT_ROOT` (or `runs/`).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dataset::{generate, Case, CaseSpec, TrajectorySet, DEFAULT_BATCH_SIZE};
use crate::error::{Error, Result};
use crate::harness::{self, RunConfig, RunSummary};
use crate::net::NetConfig;
use crate::optim::{AdamConfig, Method, TrustRegionConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

/// Filter counts swept by default.
pub const DEFAULT_FILTERS: [usize; 4] = [2, 4, 8, 16];
/// Optimizers swept by default.
pub const DEFAULT_OPTIMIZERS: [&str; 3] = ["tr", "adam@1e-3", "adam@1e-4"];
pub const DEFAULT_SEED_COUNT: u64 = 10;

#[derive(Debug, Parser)]
#[command(
    name = "fdnet",
    version,
    about = "Learn heat-equation dynamics with FD-Nets"
)]
pub struct Cli {
    /// Root for default output locations.
    #[arg(long, env = "FDNET_OUTPUT_ROOT", default_value = "runs", global = true)]
    pub output_root: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a trajectory data set.
    Gen(GenArgs),
    /// Train one network and write its metrics.
    Train(TrainArgs),
    /// Run a sweep described by a TOML file.
    Matrix(MatrixArgs),
    /// Print the parameter count of a network.
    Params(ParamsArgs),
    /// Score forward Euler on a data set.
    Euler(EulerArgs),
    /// Collect run metrics into one long-format CSV.
    Plotdata(PlotArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub case: Case,
    #[arg(long)]
    pub noise_gamma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    pub force: bool,
    /// Number of initial conditions (reduced runs).
    #[arg(long)]
    pub ics: Option<usize>,
    /// Training ICs out of `--ics`.
    #[arg(long)]
    pub train: Option<usize>,
    /// Time horizon T.
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OptKind {
    Tr,
    Adam,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub blocks: usize,
    #[arg(long, default_value_t = 16)]
    pub filters: usize,
    /// Learn a forcing term (implied by forcing data).
    #[arg(long)]
    pub forcing: bool,
    #[arg(long, value_enum, default_value_t = OptKind::Tr)]
    pub opt: OptKind,
    /// ADAM learning rate.
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Iterations; defaults to the case's trust-region budget or 12000 for ADAM.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    pub batch_size: usize,
    /// Evaluate every N iterations; defaults to 1 for TR and 100 for ADAM.
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads; overrides `jobs` in the file.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    #[arg(long)]
    pub filters: usize,
    #[arg(long)]
    pub forcing: bool,
    #[arg(long, default_value_t = 32)]
    pub grid_points: usize,
}

#[derive(Debug, Args)]
pub struct EulerArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// `index.csv` written by `matrix`.
    #[arg(long)]
    pub runs: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_CONFIG
            })
        }
    }
}

pub fn main_from_env() -> ExitCode {
    main_with_args(std::env::args_os())
}

/// Runs a parsed command and returns its exit code.
pub fn run(cli: &Cli) -> Result<u8> {
    let root = &cli.output_root;
    match &cli.command {
        Command::Gen(a) => cmd_gen(a, root),
        Command::Train(a) => cmd_train(a, root),
        Command::Matrix(a) => cmd_matrix(a, root),
        Command::Params(a) => cmd_params(a),
        Command::Euler(a) => cmd_euler(a, root),
        Command::Plotdata(a) => cmd_plotdata(a, root),
    }
}

fn dir_is_nonempty(dir: &Path) -> bool {
    fs::read_dir(dir)
        .map(|mut d| d.next().is_some())
        .unwrap_or(false)
}

fn cmd_gen(a: &GenArgs, root: &Path) -> Result<u8> {
    let mut spec = CaseSpec::new(a.case, a.seed);
    if let Some(g) = a.noise_gamma {
        spec = spec.with_noise(g);
    }
    if let Some(n) = a.ics {
        let train = a.train.unwrap_or(n * 3 / 4);
        spec = spec.with_ics(n, train);
    } else if let Some(t) = a.train {
        spec.n_train = t;
    }
    if let Some(h) = a.horizon {
        spec = spec.with_horizon(h);
    }
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| root.join("data").join(format!("{}-s{}", a.case, a.seed)));
    if dir_is_nonempty(&out) && !a.force {
        return Err(Error::Config(format!(
            "{} is not empty; pass --force to overwrite",
            out.display()
        )));
    }
    let ts = generate(&spec)?;
    ts.save(&out)?;
    println!(
        "{}: case={} ics={} (train {}, test {}) points={} times={} dt={} fingerprint={}",
        out.display(),
        ts.case(),
        ts.ic_count(),
        ts.train_ics().len(),
        ts.test_ics().len(),
        ts.point_count(),
        ts.time_count(),
        spec.dt,
        ts.fingerprint()
    );
    Ok(EXIT_OK)
}

fn build_method(opt: OptKind, lr: f64, budget: Option<usize>, case: Case) -> Method {
    match opt {
        OptKind::Tr => Method::TrustRegion(
            TrustRegionConfig::default().with_max_iters(budget.unwrap_or(case.tr_budget())),
        ),
        OptKind::Adam => {
            let cfg = AdamConfig::new(lr);
            let iters = budget.unwrap_or(cfg.max_iters);
            Method::Adam(cfg.with_max_iters(iters))
        }
    }
}

fn cmd_train(a: &TrainArgs, root: &Path) -> Result<u8> {
    let ts = TrajectorySet::load(&a.data)?;
    if a.forcing && ts.case() != Case::Forcing {
        return Err(Error::Config(format!(
            "--forcing needs forcing data, {} holds the {} case",
            a.data.display(),
            ts.case()
        )));
    }
    let method = build_method(a.opt, a.lr, a.budget, ts.case());
    let out = a.out.clone().unwrap_or_else(|| {
        root.join(ts.case().as_str())
            .join(run_name(a.blocks, a.filters, &method))
            .join(format!("seed{}", a.seed))
    });
    let mut cfg = RunConfig::for_dataset(&ts, a.filters, a.blocks, method, a.seed, out);
    cfg.batch_size = a.batch_size;
    if let Some(e) = a.eval_every {
        cfg.eval_every = e;
    }
    let summary = harness::run_experiment(&cfg, &ts)?;
    print_summary(&cfg, &summary);
    Ok(if summary.is_aborted() {
        EXIT_NUMERICAL
    } else {
        EXIT_OK
    })
}

fn print_summary(cfg: &RunConfig, s: &RunSummary) {
    println!(
        "{}: {} iterations, {} grad + {} hvp calls; full-horizon MSE min {:e} (iteration {}), final {:e}",
        cfg.out_dir.display(),
        s.iterations,
        s.grad_calls,
        s.hvp_calls,
        s.full_horizon.min_mse,
        s.full_horizon.min_iteration,
        s.full_horizon.final_mse
    );
    if let Some(abort) = &s.abort {
        eprintln!("aborted: {abort}");
    }
}

fn run_name(blocks: usize, filters: usize, method: &Method) -> String {
    format!("k{blocks}_f{filters}_{}", method.label())
}

fn cmd_params(a: &ParamsArgs) -> Result<u8> {
    let cfg = NetConfig::new(a.filters, 1, a.grid_points).forcing(a.forcing);
    cfg.validate()?;
    println!("{}", cfg.param_count());
    Ok(EXIT_OK)
}

/// One row of `euler.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EulerRow {
    pub case: Case,
    pub delta: f64,
    pub tau_prime: usize,
    /// Empty in the CSV when the rollout overflowed.
    pub mse: f64,
    /// The scheme violates `delta <= 1/2` or the rollout overflowed.
    pub divergent: bool,
}

/// Euler baseline errors at the one-step, multi-step and full horizons.
pub fn euler_rows(ts: &TrajectorySet) -> Result<Vec<EulerRow>> {
    let cfg = ts.spec().euler_config()?;
    harness::eval_horizons(ts)
        .into_iter()
        .map(|tau| {
            let r = harness::euler_baseline_error(ts, &cfg, tau)?;
            Ok(EulerRow {
                case: ts.case(),
                delta: cfg.delta,
                tau_prime: tau,
                mse: r.mse,
                divergent: !cfg.is_stable() || !r.mse.is_finite(),
            })
        })
        .collect()
}

fn cmd_euler(a: &EulerArgs, root: &Path) -> Result<u8> {
    let ts = TrajectorySet::load(&a.data)?;
    let rows = euler_rows(&ts)?;
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| root.join("euler").join(ts.case().as_str()));
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let path = out.join("euler.csv");
    let mut text = String::from("case,delta,tau_prime,mse,divergent\n");
    for r in &rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            r.case, r.delta, r.tau_prime, r.mse, r.divergent
        ));
        println!(
            "tau'={:<5} mse={:e}{}",
            r.tau_prime,
            r.mse,
            if r.divergent { "  (divergent)" } else { "" }
        );
    }
    harness::write_atomic(&path, text.as_bytes())?;
    Ok(EXIT_OK)
}

fn default_filters() -> Vec<usize> {
    DEFAULT_FILTERS.to_vec()
}

fn default_optimizers() -> Vec<String> {
    DEFAULT_OPTIMIZERS.iter().map(|s| s.to_string()).collect()
}

fn default_seeds() -> Vec<u64> {
    (0..DEFAULT_SEED_COUNT).collect()
}

fn default_batch() -> usize {
    DEFAULT_BATCH_SIZE
}

/// Sweep description read by `fdnet matrix`.
///
/// ```toml
/// cases = ["stable", "unstable"]
/// data = ["d/stable", "d/unstable"]  # optional, one per case
/// filters = [2, 4, 8, 16]
/// optimizers = ["tr", "adam@1e-3", "adam@1e-4"]
/// seeds = [0, 1, 2]
/// jobs = 4
/// ```
///
/// Without `data`, each case's data set is generated under `<out>/data/`
/// from `data_seed`. `blocks` defaults to the case's standard sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixConfig {
    pub cases: Vec<Case>,
    #[serde(default)]
    pub data: Vec<PathBuf>,
    #[serde(default)]
    pub data_seed: u64,
    pub noise_gamma: Option<f64>,
    pub n_ics: Option<usize>,
    pub n_train: Option<usize>,
    pub horizon: Option<f64>,
    pub blocks: Option<Vec<usize>>,
    #[serde(default = "default_filters")]
    pub filters: Vec<usize>,
    #[serde(default = "default_optimizers")]
    pub optimizers: Vec<String>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub tr_budget: Option<usize>,
    pub adam_iters: Option<usize>,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl FromStr for MatrixConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let cfg: MatrixConfig =
            toml::from_str(s).map_err(|e| Error::Config(format!("matrix file: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `tr`, `adam` or `adam@<lr>`.
pub fn parse_optimizer(s: &str) -> Result<(OptKind, f64)> {
    match s.split_once('@') {
        None if s == "tr" => Ok((OptKind::Tr, 0.0)),
        None if s == "adam" => Ok((OptKind::Adam, 1e-3)),
        Some(("adam", lr)) => lr
            .parse::<f64>()
            .map(|lr| (OptKind::Adam, lr))
            .map_err(|_| Error::Config(format!("bad learning rate in `{s}`"))),
        _ => Err(Error::Config(format!("unknown optimizer `{s}`"))),
    }
}

/// One run of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixCell {
    pub case: Case,
    pub n_blocks: usize,
    pub n_filters: usize,
    pub method: Method,
    pub seed: u64,
}

impl MatrixConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cases.is_empty() {
            return Err(Error::Config("matrix lists no cases".into()));
        }
        if !self.data.is_empty() && self.data.len() != self.cases.len() {
            return Err(Error::Config(format!(
                "{} data directories for {} cases",
                self.data.len(),
                self.cases.len()
            )));
        }
        for opt in &self.optimizers {
            parse_optimizer(opt)?;
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn blocks_for(&self, case: Case) -> Vec<usize> {
        self.blocks
            .clone()
            .unwrap_or_else(|| case.block_sweep().to_vec())
    }

    /// All runs, ordered case, blocks, filters, optimizer, seed.
    pub fn cells(&self) -> Result<Vec<MatrixCell>> {
        let mut out = Vec::new();
        for &case in &self.cases {
            for n_blocks in self.blocks_for(case) {
                for &n_filters in &self.filters {
                    for opt in &self.optimizers {
                        let (kind, lr) = parse_optimizer(opt)?;
                        let budget = match kind {
                            OptKind::Tr => self.tr_budget,
                            OptKind::Adam => self.adam_iters,
                        };
                        let method = build_method(kind, lr, budget, case);
                        for &seed in &self.seeds {
                            out.push(MatrixCell {
                                case,
                                n_blocks,
                                n_filters,
                                method,
                                seed,
                            });
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn case_spec(&self, case: Case) -> CaseSpec {
        let mut spec = CaseSpec::new(case, self.data_seed);
        if case == Case::Noisy {
            if let Some(g) = self.noise_gamma {
                spec = spec.with_noise(g);
            }
        }
        if let Some(n) = self.n_ics {
            spec = spec.with_ics(n, self.n_train.unwrap_or(n * 3 / 4));
        }
        if let Some(h) = self.horizon {
            spec = spec.with_horizon(h);
        }
        spec
    }
}

/// One row of `index.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRow {
    pub run_dir: PathBuf,
    pub case: Case,
    pub optimizer: String,
    pub n_blocks: usize,
    pub n_filters: usize,
    pub seed: u64,
    /// `ok`, `aborted` or `failed: <reason>`.
    pub status: String,
}

fn load_or_generate(cfg: &MatrixConfig, out: &Path, i: usize, case: Case) -> Result<TrajectorySet> {
    if let Some(dir) = cfg.data.get(i) {
        return TrajectorySet::load(dir);
    }
    let dir = out.join("data").join(case.as_str());
    if dir.join("meta.json").exists() {
        let ts = TrajectorySet::load(&dir)?;
        if ts.spec() == &cfg.case_spec(case) {
            return Ok(ts);
        }
    }
    let ts = generate(&cfg.case_spec(case))?;
    ts.save(&dir)?;
    Ok(ts)
}

/// Runs every cell of `cfg`, writing run directories and `index.csv` under
/// `out`. Individual failures are recorded in the index, not returned.
pub fn run_matrix(cfg: &MatrixConfig, out: &Path, jobs: usize) -> Result<Vec<IndexRow>> {
    use rayon::prelude::*;

    cfg.validate()?;
    let mut datasets = Vec::new();
    for (i, &case) in cfg.cases.iter().enumerate() {
        datasets.push((case, load_or_generate(cfg, out, i, case)));
    }
    let cells = cfg.cells()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let rows: Vec<IndexRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let run_dir = out
                    .join(cell.case.as_str())
                    .join(run_name(cell.n_blocks, cell.n_filters, &cell.method))
                    .join(format!("seed{}", cell.seed));
                let status = match datasets.iter().find(|(c, _)| *c == cell.case) {
                    Some((_, Ok(ts))) => {
                        let mut rc = RunConfig::for_dataset(
                            ts,
                            cell.n_filters,
                            cell.n_blocks,
                            cell.method,
                            cell.seed,
                            &run_dir,
                        );
                        rc.batch_size = cfg.batch_size;
                        match harness::run_experiment(&rc, ts) {
                            Ok(s) if s.is_aborted() => "aborted".to_owned(),
                            Ok(_) => "ok".to_owned(),
                            Err(e) => format!("failed: {e}"),
                        }
                    }
                    Some((_, Err(e))) => format!("failed: data set unavailable: {e}"),
                    None => "failed: no data set".to_owned(),
                };
                IndexRow {
                    run_dir,
                    case: cell.case,
                    optimizer: cell.method.label(),
                    n_blocks: cell.n_blocks,
                    n_filters: cell.n_filters,
                    seed: cell.seed,
                    status,
                }
            })
            .collect()
    });

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join("index.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| Error::csv(&path, e))?;
    }
    if rows.is_empty() {
        w.write_record([
            "run_dir",
            "case",
            "optimizer",
            "n_blocks",
            "n_filters",
            "seed",
            "status",
        ])
        .map_err(|e| Error::csv(&path, e))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Config(format!("index buffer: {e}")))?;
    harness::write_atomic(&path, &bytes)?;
    Ok(rows)
}

fn cmd_matrix(a: &MatrixArgs, root: &Path) -> Result<u8> {
    let text = fs::read_to_string(&a.config).map_err(|e| Error::io(&a.config, e))?;
    let cfg: MatrixConfig = text.parse()?;
    let out = cfg.out.clone().unwrap_or_else(|| root.join("matrix"));
    let jobs = a.jobs.or(cfg.jobs).unwrap_or(1);
    let rows = run_matrix(&cfg, &out, jobs)?;
    let ok = rows.iter().filter(|r| r.status == "ok").count();
    println!(
        "{} runs: {ok} ok, {} not ok; index at {}",
        rows.len(),
        rows.len() - ok,
        out.join("index.csv").display()
    );
    for r in rows.iter().filter(|r| r.status != "ok") {
        eprintln!("{}: {}", r.run_dir.display(), r.status);
    }
    Ok(EXIT_OK)
}

pub const PLOT_HEADER: [&str; 13] = [
    "case",
    "optimizer",
    "n_blocks",
    "n_filters",
    "seed",
    "iteration",
    "grad_calls",
    "hvp_calls",
    "oracle_calls",
    "minibatch_mse",
    "test_mse_1",
    "test_mse_multi",
    "test_mse_full",
];

/// Joins the metrics of every run in `index` into `<out>/plotdata.csv`.
/// Runs whose metrics cannot be read are listed in `<out>/missing.csv` and
/// returned.
pub fn plotdata(index: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let mut reader = csv::Reader::from_path(index).map_err(|e| Error::csv(index, e))?;
    let rows: Vec<IndexRow> = reader
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::csv(index, e))?;
    let base = index.parent().unwrap_or(Path::new("."));

    let out_path = out.join("plotdata.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PLOT_HEADER)
        .map_err(|e| Error::csv(&out_path, e))?;
    let mut missing = Vec::new();
    for row in &rows {
        let dir = if row.run_dir.is_absolute() || row.run_dir.exists() {
            row.run_dir.clone()
        } else {
            base.join(&row.run_dir)
        };
        let metrics = dir.join("metrics.csv");
        let Ok(mut mr) = csv::Reader::from_path(&metrics) else {
            missing.push(row.run_dir.clone());
            continue;
        };
        let records: std::result::Result<Vec<csv::StringRecord>, _> = mr.records().collect();
        let Ok(records) = records else {
            missing.push(row.run_dir.clone());
            continue;
        };
        for rec in records {
            let grad: u64 = rec.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
            let hvp: u64 = rec.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
            let field = |i: usize| rec.get(i).unwrap_or("").to_owned();
            w.write_record([
                row.case.to_string(),
                row.optimizer.clone(),
                row.n_blocks.to_string(),
                row.n_filters.to_string(),
                row.seed.to_string(),
                field(0),
                grad.to_string(),
                hvp.to_string(),
                (grad + hvp).to_string(),
                field(3),
                field(6),
                field(7),
                field(8),
            ])
            .map_err(|e| Error::csv(&out_path, e))?;
        }
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Config(format!("plot buffer: {e}")))?;
    harness::write_atomic(&out_path, &bytes)?;

    let mut text = String::from("run_dir\n");
    for m in &missing {
        text.push_str(&format!("{}\n", m.display()));
    }
    harness::write_atomic(&out.join("missing.csv"), text.as_bytes())?;
    Ok(missing)
}

fn cmd_plotdata(a: &PlotArgs, root: &Path) -> Result<u8> {
    let out = a.out.clone().unwrap_or_else(|| root.join("plotdata"));
    let missing = plotdata(&a.runs, &out)?;
    for m in &missing {
        eprintln!("missing metrics: {}", m.display());
    }
    println!("wrote {}", out.join("plotdata.csv").display());
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optimizer_labels_parse() {
        assert_eq!(parse_optimizer("tr").unwrap().0, OptKind::Tr);
        assert_eq!(parse_optimizer("adam@1e-4").unwrap(), (OptKind::Adam, 1e-4));
        assert_eq!(parse_optimizer("adam").unwrap(), (OptKind::Adam, 1e-3));
        assert!(parse_optimizer("sgd").is_err());
        assert!(parse_optimizer("adam@x").is_err());
    }

    #[test]
    fn table_two_sweep_sizes() {
        let cfg: MatrixConfig =
            "cases = [\"unstable\", \"stable\"]\noptimizers = [\"tr\"]\nseeds = [0]"
                .parse()
                .unwrap();
        let cells = cfg.cells().unwrap();
        let unstable = cells.iter().filter(|c| c.case == Case::Unstable).count();
        let stable = cells.iter().filter(|c| c.case == Case::Stable).count();
        assert_eq!((unstable, stable), (7 * 4, 4 * 4));
    }

    #[test]
    fn matrix_defaults() {
        let cfg: MatrixConfig = "cases = [\"noisy\"]".parse().unwrap();
        assert_eq!(cfg.seeds.len(), 10);
        assert_eq!(cfg.filters, vec![2, 4, 8, 16]);
        assert_eq!(cfg.cells().unwrap().len(), 4 * 4 * 3 * 10);
        let tr = cfg.cells().unwrap()[0].method;
        assert_eq!(tr.max_iters(), 100);
    }

    #[test]
    fn matrix_rejects_unknown_keys() {
        assert!("cases = [\"stable\"]\nbogus = 1"
            .parse::<MatrixConfig>()
            .is_err());
        assert!("cases = []".parse::<MatrixConfig>().is_err());
    }

    #[test]
    fn default_budgets_follow_case() {
        assert_eq!(
            build_method(OptKind::Tr, 0.0, None, Case::Unstable).max_iters(),
            300
        );
        assert_eq!(
            build_method(OptKind::Tr, 0.0, None, Case::Stable).max_iters(),
            100
        );
        assert_eq!(
            build_method(OptKind::Adam, 1e-3, None, Case::Stable).max_iters(),
            12000
        );
    }
}
