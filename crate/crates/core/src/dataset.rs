//! Synthetic trajectory data for the four heat-equation cases.
//!
//! A data set holds `n_ics` trajectories sampled on a [`Grid`] at the times
//! `0, dt, ..., T`, split once (per seed) into training and testing ICs.
//! Randomness flows from one master seed through four independent ChaCha
//! streams: IC coefficients, forcing coefficients, noise, split shuffle. The
//! noisy and unstable cases therefore share their base trajectories with the
//! stable case generated from the same seed.
//!
//! On disk a data set is a directory with `meta.json`, `data.bin`
//! (little-endian `f64`, IC-major, then time, then space) and `split.csv`.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::heat::{self, Grid};
use crate::net::Batch;

pub const DEFAULT_BETA: f64 = 2e-4;
pub const DEFAULT_LENGTH: f64 = std::f64::consts::PI;
pub const DEFAULT_DX: f64 = 0.1;
pub const DEFAULT_HORIZON: f64 = 1000.0;
pub const DEFAULT_MODES: usize = 10;
pub const DEFAULT_ICS: usize = 200;
pub const DEFAULT_TRAIN: usize = 150;
pub const DEFAULT_BATCH_SIZE: usize = 64;

/// Named noise levels: low, medium, high.
pub const NOISE_LEVELS: [f64; 3] = [1e-8, 1e-4, 1e-2];

const STREAM_IC: u64 = 1;
const STREAM_FORCING: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_SPLIT: u64 = 4;

const META_FILE: &str = "meta.json";
const DATA_FILE: &str = "data.bin";
const SPLIT_FILE: &str = "split.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    Stable,
    Unstable,
    Noisy,
    Forcing,
}

impl Case {
    pub const ALL: [Case; 4] = [Case::Stable, Case::Unstable, Case::Noisy, Case::Forcing];

    pub fn default_dt(self) -> f64 {
        match self {
            Case::Unstable => 200.0,
            _ => 1.0,
        }
    }

    /// Multi-step horizon used for the supplementary test error.
    pub fn multi_step(self) -> usize {
        match self {
            Case::Unstable => 3,
            _ => 10,
        }
    }

    /// Trust-region iteration budget.
    pub fn tr_budget(self) -> usize {
        match self {
            Case::Unstable => 300,
            _ => 100,
        }
    }

    /// Block counts swept for this case.
    pub fn block_sweep(self) -> &'static [usize] {
        match self {
            Case::Unstable => &[1, 2, 3, 4, 6, 8, 10],
            _ => &[1, 2, 3, 4],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Case::Stable => "stable",
            Case::Unstable => "unstable",
            Case::Noisy => "noisy",
            Case::Forcing => "forcing",
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "stable" => Ok(Case::Stable),
            "unstable" => Ok(Case::Unstable),
            "noisy" => Ok(Case::Noisy),
            "forcing" | "forced" => Ok(Case::Forcing),
            other => Err(Error::Config(format!("unknown case `{other}`"))),
        }
    }
}

/// Everything needed to regenerate a data set bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub case: Case,
    pub beta: f64,
    pub length: f64,
    pub dx: f64,
    pub dt: f64,
    pub horizon: f64,
    pub n_modes: usize,
    pub noise_gamma: Option<f64>,
    pub n_ics: usize,
    pub n_train: usize,
    pub seed: u64,
}

impl CaseSpec {
    /// Full-size defaults. The noisy case starts at the medium noise level.
    pub fn new(case: Case, seed: u64) -> Self {
        Self {
            case,
            beta: DEFAULT_BETA,
            length: DEFAULT_LENGTH,
            dx: DEFAULT_DX,
            dt: case.default_dt(),
            horizon: DEFAULT_HORIZON,
            n_modes: DEFAULT_MODES,
            noise_gamma: (case == Case::Noisy).then_some(NOISE_LEVELS[1]),
            n_ics: DEFAULT_ICS,
            n_train: DEFAULT_TRAIN,
            seed,
        }
    }

    pub fn with_noise(mut self, gamma: f64) -> Self {
        self.noise_gamma = Some(gamma);
        self
    }

    pub fn with_ics(mut self, n_ics: usize, n_train: usize) -> Self {
        self.n_ics = n_ics;
        self.n_train = n_train;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.dt > 0.0 && self.horizon > 0.0) {
            return fail(format!(
                "dt = {} and T = {} must be positive",
                self.dt, self.horizon
            ));
        }
        let steps = (self.horizon / self.dt).round();
        if steps < 1.0 || ((steps * self.dt - self.horizon) / self.horizon).abs() > 1e-9 {
            return fail(format!(
                "dt = {} does not divide T = {}",
                self.dt, self.horizon
            ));
        }
        if self.n_modes == 0 {
            return fail("at least one sine mode is required".into());
        }
        if self.n_train == 0 || self.n_train >= self.n_ics {
            return fail(format!(
                "need 0 < n_train < n_ics, got {} of {}",
                self.n_train, self.n_ics
            ));
        }
        match (self.case, self.noise_gamma) {
            (Case::Noisy, Some(g)) if g > 0.0 && g.is_finite() => {}
            (Case::Noisy, _) => return fail("the noisy case needs a positive noise level".into()),
            (_, Some(_)) => return fail(format!("noise level given for the {} case", self.case)),
            _ => {}
        }
        if self.beta.is_nan() || self.beta <= 0.0 {
            return fail(format!("beta must be positive, got {}", self.beta));
        }
        Grid::new(self.length, self.dx).map(|_| ())
    }

    pub fn step_count(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn time_count(&self) -> usize {
        self.step_count() + 1
    }

    pub fn euler_config(&self) -> Result<heat::EulerConfig> {
        heat::EulerConfig::new(self.beta, self.dt, self.dx)
    }

    fn stream(&self, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id);
        rng
    }
}

/// Stored trajectories plus the metadata that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    spec: CaseSpec,
    grid: Grid,
    times: Vec<f64>,
    values: Vec<f64>,
    ic_coeffs: Vec<Vec<f64>>,
    forcing_coeffs: Option<Vec<f64>>,
    train: Vec<usize>,
    test: Vec<usize>,
}

/// A `(ic, time index)` pair naming the training sample
/// `(u_s(., t_j), u_s(., t_{j+1}))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainTuple {
    pub ic: usize,
    pub time_index: usize,
}

/// Generate the data set described by `spec`. Deterministic in `spec.seed`.
#[allow(clippy::needless_range_loop)]
pub fn generate(spec: &CaseSpec) -> Result<TrajectorySet> {
    spec.validate()?;
    let grid = Grid::new(spec.length, spec.dx)?;
    let m = grid.point_count();
    let times: Vec<f64> = (0..spec.time_count()).map(|j| j as f64 * spec.dt).collect();

    let mut ic_rng = spec.stream(STREAM_IC);
    let ic_coeffs: Vec<Vec<f64>> = (0..spec.n_ics)
        .map(|_| {
            (0..spec.n_modes)
                .map(|_| ic_rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();

    let forcing_coeffs = (spec.case == Case::Forcing).then(|| {
        let mut rng = spec.stream(STREAM_FORCING);
        (0..spec.n_modes)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect::<Vec<f64>>()
    });

    // Mode tables: same expressions as heat::exact_solution, so every stored
    // value equals a direct call bit-for-bit.
    let rates: Vec<f64> = (1..=spec.n_modes)
        .map(|i| heat::mode_rate(spec.beta, spec.length, i))
        .collect();
    let shapes: Vec<Vec<f64>> = (1..=spec.n_modes)
        .map(|i| {
            grid.points()
                .iter()
                .map(|&x| heat::mode_shape(spec.length, i, x))
                .collect()
        })
        .collect();
    let decays: Vec<Vec<f64>> = rates
        .iter()
        .map(|&r| times.iter().map(|&t| (-r * t).exp()).collect())
        .collect();
    let steadies: Vec<Option<f64>> = (0..spec.n_modes)
        .map(|i| forcing_coeffs.as_ref().map(|d| d[i] / rates[i]))
        .collect();

    let mut values = Vec::with_capacity(spec.n_ics * times.len() * m);
    let mut noise_rng = spec.stream(STREAM_NOISE);
    for coeffs in &ic_coeffs {
        for j in 0..times.len() {
            for p in 0..m {
                let mut u = 0.0;
                for i in 0..spec.n_modes {
                    u += heat::mode_term(coeffs[i], steadies[i], shapes[i][p], decays[i][j]);
                }
                if let Some(gamma) = spec.noise_gamma {
                    let eps: f64 = noise_rng.sample(StandardNormal);
                    u = heat::apply_noise(u, gamma, eps);
                }
                values.push(u);
            }
        }
    }

    let mut order: Vec<usize> = (0..spec.n_ics).collect();
    order.shuffle(&mut spec.stream(STREAM_SPLIT));
    let mut train = order[..spec.n_train].to_vec();
    let mut test = order[spec.n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();

    Ok(TrajectorySet {
        spec: spec.clone(),
        grid,
        times,
        values,
        ic_coeffs,
        forcing_coeffs,
        train,
        test,
    })
}

impl TrajectorySet {
    /// Assemble a set from raw parts, validating every shape and the split.
    pub fn from_parts(
        spec: CaseSpec,
        values: Vec<f64>,
        ic_coeffs: Vec<Vec<f64>>,
        forcing_coeffs: Option<Vec<f64>>,
        train: Vec<usize>,
        test: Vec<usize>,
    ) -> Result<Self> {
        spec.validate()?;
        let grid = Grid::new(spec.length, spec.dx)?;
        let times: Vec<f64> = (0..spec.time_count()).map(|j| j as f64 * spec.dt).collect();
        let expected = spec.n_ics * times.len() * grid.point_count();
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "{} values stored, expected {} ICs x {} times x {} points = {expected}",
                values.len(),
                spec.n_ics,
                times.len(),
                grid.point_count()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Shape(format!(
                "non-finite stored value at flat index {bad}"
            )));
        }
        if ic_coeffs.len() != spec.n_ics || ic_coeffs.iter().any(|c| c.len() != spec.n_modes) {
            return Err(Error::Shape(
                "IC coefficient table does not match n_ics x n_modes".into(),
            ));
        }
        match (&forcing_coeffs, spec.case) {
            (Some(d), Case::Forcing) if d.len() == spec.n_modes => {}
            (None, Case::Forcing) | (Some(_), Case::Forcing) => {
                return Err(Error::Shape(
                    "forcing case needs n_modes forcing coefficients".into(),
                ))
            }
            (Some(_), _) => {
                return Err(Error::Shape(format!(
                    "forcing coefficients stored for the {} case",
                    spec.case
                )))
            }
            (None, _) => {}
        }
        check_split(&train, &test, &spec)?;
        Ok(Self {
            spec,
            grid,
            times,
            values,
            ic_coeffs,
            forcing_coeffs,
            train,
            test,
        })
    }

    pub fn spec(&self) -> &CaseSpec {
        &self.spec
    }

    pub fn case(&self) -> Case {
        self.spec.case
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn point_count(&self) -> usize {
        self.grid.point_count()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time_count(&self) -> usize {
        self.times.len()
    }

    pub fn ic_count(&self) -> usize {
        self.spec.n_ics
    }

    pub fn ic_coeffs(&self) -> &[Vec<f64>] {
        &self.ic_coeffs
    }

    pub fn forcing_coeffs(&self) -> Option<&[f64]> {
        self.forcing_coeffs.as_deref()
    }

    pub fn train_ics(&self) -> &[usize] {
        &self.train
    }

    pub fn test_ics(&self) -> &[usize] {
        &self.test
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `u_s(., t_j)` for IC `ic` and time index `j`.
    pub fn state(&self, ic: usize, time_index: usize) -> &[f64] {
        let m = self.point_count();
        let start = (ic * self.time_count() + time_index) * m;
        &self.values[start..start + m]
    }

    /// All one-step-ahead training samples, IC-major.
    pub fn train_tuples(&self) -> Vec<TrainTuple> {
        let steps = self.time_count() - 1;
        self.train
            .iter()
            .flat_map(|&ic| (0..steps).map(move |time_index| TrainTuple { ic, time_index }))
            .collect()
    }

    pub fn tuple_input(&self, tuple: TrainTuple) -> &[f64] {
        self.state(tuple.ic, tuple.time_index)
    }

    pub fn tuple_target(&self, tuple: TrainTuple) -> &[f64] {
        self.state(tuple.ic, tuple.time_index + 1)
    }

    /// Gather the selected tuples into a dense [`Batch`].
    pub fn batch(&self, tuples: &[TrainTuple], indices: &[usize]) -> Batch {
        let m = self.point_count();
        let mut inputs = Vec::with_capacity(indices.len() * m);
        let mut targets = Vec::with_capacity(indices.len() * m);
        for &i in indices {
            inputs.extend_from_slice(self.tuple_input(tuples[i]));
            targets.extend_from_slice(self.tuple_target(tuples[i]));
        }
        Batch::new(inputs, targets, m).expect("stored states have grid length")
    }

    /// Every training tuple as one batch (full training loss).
    pub fn full_training_batch(&self) -> Batch {
        let tuples = self.train_tuples();
        let all: Vec<usize> = (0..tuples.len()).collect();
        self.batch(&tuples, &all)
    }

    /// SHA-256 over the stored values, hex-encoded (first 16 bytes).
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for v in &self.values {
            hasher.update(v.to_le_bytes());
        }
        hasher.finalize()[..16]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

        let meta = Meta {
            spec: self.spec.clone(),
            point_count: self.point_count(),
            time_count: self.time_count(),
            ic_coeffs: self.ic_coeffs.clone(),
            forcing_coeffs: self.forcing_coeffs.clone(),
            train: self.train.clone(),
            test: self.test.clone(),
            fingerprint: self.fingerprint(),
        };
        let meta_path = dir.join(META_FILE);
        let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::json(&meta_path, e))?;
        fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;

        let data_path = dir.join(DATA_FILE);
        let file = fs::File::create(&data_path).map_err(|e| Error::io(&data_path, e))?;
        let mut out = BufWriter::new(file);
        for v in &self.values {
            out.write_all(&v.to_le_bytes())
                .map_err(|e| Error::io(&data_path, e))?;
        }
        out.flush().map_err(|e| Error::io(&data_path, e))?;

        let split_path = dir.join(SPLIT_FILE);
        let mut writer =
            csv::Writer::from_path(&split_path).map_err(|e| Error::csv(&split_path, e))?;
        writer
            .write_record(["ic_index", "role"])
            .map_err(|e| Error::csv(&split_path, e))?;
        for ic in 0..self.ic_count() {
            let role = if self.train.binary_search(&ic).is_ok() {
                "train"
            } else {
                "test"
            };
            writer
                .write_record([ic.to_string().as_str(), role])
                .map_err(|e| Error::csv(&split_path, e))?;
        }
        writer.flush().map_err(|e| Error::io(&split_path, e))?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta_path = dir.join(META_FILE);
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: Meta = serde_json::from_str(&text).map_err(|e| Error::json(&meta_path, e))?;

        let grid = Grid::new(meta.spec.length, meta.spec.dx)?;
        if grid.point_count() != meta.point_count {
            return Err(Error::Shape(format!(
                "meta.json records {} grid points but L = {} and dx = {} give {}",
                meta.point_count,
                meta.spec.length,
                meta.spec.dx,
                grid.point_count()
            )));
        }
        if meta.time_count != meta.spec.time_count() {
            return Err(Error::Shape(format!(
                "meta.json records {} times but T / dt + 1 = {}",
                meta.time_count,
                meta.spec.time_count()
            )));
        }

        let data_path = dir.join(DATA_FILE);
        let mut bytes = Vec::new();
        fs::File::open(&data_path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(&data_path, e))?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Shape(format!(
                "{} is {} bytes, not a whole number of f64 values",
                data_path.display(),
                bytes.len()
            )));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();

        let split_path = dir.join(SPLIT_FILE);
        let (train, test) = read_split(&split_path)?;
        if train != meta.train || test != meta.test {
            return Err(Error::Shape(format!(
                "{} disagrees with the split recorded in meta.json",
                split_path.display()
            )));
        }

        Self::from_parts(
            meta.spec,
            values,
            meta.ic_coeffs,
            meta.forcing_coeffs,
            train,
            test,
        )
    }
}

#[derive(Serialize, Deserialize)]
struct Meta {
    #[serde(flatten)]
    spec: CaseSpec,
    point_count: usize,
    time_count: usize,
    ic_coeffs: Vec<Vec<f64>>,
    forcing_coeffs: Option<Vec<f64>>,
    train: Vec<usize>,
    test: Vec<usize>,
    fingerprint: String,
}

fn read_split(path: &Path) -> Result<(Vec<usize>, Vec<usize>)> {
    #[derive(Deserialize)]
    struct Row {
        ic_index: usize,
        role: String,
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        match row.role.as_str() {
            "train" => train.push(row.ic_index),
            "test" => test.push(row.ic_index),
            other => {
                return Err(Error::Shape(format!(
                    "{}: unknown role `{other}` for IC {}",
                    path.display(),
                    row.ic_index
                )))
            }
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

fn check_split(train: &[usize], test: &[usize], spec: &CaseSpec) -> Result<()> {
    let mut seen = vec![false; spec.n_ics];
    for &ic in train.iter().chain(test) {
        if ic >= spec.n_ics || std::mem::replace(&mut seen[ic], true) {
            return Err(Error::Shape(format!(
                "split index {ic} out of range or repeated"
            )));
        }
    }
    if train.len() != spec.n_train || train.len() + test.len() != spec.n_ics {
        return Err(Error::Shape(format!(
            "split has {} train / {} test ICs, expected {} / {}",
            train.len(),
            test.len(),
            spec.n_train,
            spec.n_ics - spec.n_train
        )));
    }
    Ok(())
}

/// Draw `batch_size` distinct indices from `0..count`.
pub fn sample_minibatch<R: Rng + ?Sized>(
    count: usize,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if batch_size == 0 || batch_size > count {
        return Err(Error::Config(format!(
            "batch size {batch_size} is not within 1..={count} available tuples"
        )));
    }
    Ok(rand::seq::index::sample(rng, count, batch_size).into_vec())
}
