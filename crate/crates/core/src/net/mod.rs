//! FD-Net: stacked residual blocks of learnable finite-difference stencils.
//!
//! One block maps a state `u` (one value per grid point) to
//!
//! ```text
//! g1 = conv(u, group1)          F channels
//! g2 = conv(g1, group2)         F channels
//! u' = u + sum_c mix_c * [g1; g2]_c + f_hat
//! ```
//!
//! where every convolution uses a 3-tap kernel at interior points and 2-tap
//! kernels at the two boundary points, there are no biases or activations,
//! and `f_hat` (forcing nets only) is the column sum of a learnable
//! `n_basis x M` matrix. A network applies the same block `k` times.
//!
//! Parameters live in one flat vector laid out as
//! `group1 | group2 | mix | forcing_w`; each kernel occupies seven slots
//! `(a-, a0, a+, b0, b+, c-, c0)` (interior, left boundary, right boundary).

mod checkpoint;
mod dual;
mod operator;

use std::ops::Range;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use checkpoint::{Checkpoint, CheckpointMeta};
pub use operator::{grad, hvp, loss, loss_and_grad, BlockOperator};

/// Slots per kernel: 3 interior taps, 2 left-boundary taps, 2 right-boundary taps.
pub const KERNEL_LEN: usize = 7;

/// Forcing basis size used throughout (ten sine modes).
pub const DEFAULT_BASIS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub n_filters: usize,
    pub n_blocks: usize,
    pub with_forcing: bool,
    pub grid_points: usize,
    pub n_basis: usize,
}

impl NetConfig {
    pub fn new(n_filters: usize, n_blocks: usize, grid_points: usize) -> Self {
        Self {
            n_filters,
            n_blocks,
            with_forcing: false,
            grid_points,
            n_basis: DEFAULT_BASIS,
        }
    }

    pub fn forcing(mut self, with_forcing: bool) -> Self {
        self.with_forcing = with_forcing;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_filters == 0 || self.n_blocks == 0 {
            return Err(Error::Config(format!(
                "need at least one filter and one block, got F = {}, k = {}",
                self.n_filters, self.n_blocks
            )));
        }
        if self.grid_points < 2 {
            return Err(Error::Config(format!(
                "need at least two grid points, got {}",
                self.grid_points
            )));
        }
        if self.with_forcing && self.n_basis == 0 {
            return Err(Error::Config("forcing nets need n_basis >= 1".into()));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }

    pub fn layout(&self) -> ParamLayout {
        let f = self.n_filters;
        let g1 = KERNEL_LEN * f;
        let g2 = KERNEL_LEN * f * f;
        let mix = 2 * f;
        let forcing = if self.with_forcing {
            self.n_basis * self.grid_points
        } else {
            0
        };
        ParamLayout {
            group1: 0..g1,
            group2: g1..g1 + g2,
            mix: g1 + g2..g1 + g2 + mix,
            forcing: g1 + g2 + mix..g1 + g2 + mix + forcing,
            total: g1 + g2 + mix + forcing,
        }
    }
}

/// Number of trainable parameters: `7F^2 + 9F`, plus `n_basis * M` with forcing.
pub fn param_count(cfg: &NetConfig) -> usize {
    cfg.param_count()
}

/// Offsets of each structured view inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub group1: Range<usize>,
    pub group2: Range<usize>,
    pub mix: Range<usize>,
    pub forcing: Range<usize>,
    pub total: usize,
}

/// Flat parameter vector with structured views.
#[derive(Debug, Clone, PartialEq)]
pub struct FdNetParams {
    cfg: NetConfig,
    values: Vec<f64>,
}

impl FdNetParams {
    pub fn zeros(cfg: NetConfig) -> Self {
        Self {
            values: vec![0.0; cfg.param_count()],
            cfg,
        }
    }

    pub fn from_vec(cfg: NetConfig, values: Vec<f64>) -> Result<Self> {
        cfg.validate()?;
        if values.len() != cfg.param_count() {
            return Err(Error::Shape(format!(
                "{} parameters supplied, configuration needs {}",
                values.len(),
                cfg.param_count()
            )));
        }
        Ok(Self { cfg, values })
    }

    /// Uniform initialization on `[-s, s]`, `s = fan_in^{-1/2}`: `fan_in = 3 * C`
    /// for kernels reading `C` channels, `2F` for the mixing weights and
    /// `n_basis` for the forcing matrix.
    pub fn init(cfg: NetConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = cfg.layout();
        let f = cfg.n_filters as f64;
        let mut values = vec![0.0; layout.total];
        let mut fill = |range: Range<usize>, fan_in: f64| {
            let s = fan_in.powf(-0.5);
            let dist = Uniform::new_inclusive(-s, s).expect("finite bound");
            for v in &mut values[range] {
                *v = dist.sample(&mut rng);
            }
        };
        fill(layout.group1, 3.0);
        fill(layout.group2, 3.0 * f);
        fill(layout.mix, 2.0 * f);
        fill(layout.forcing, cfg.n_basis as f64);
        Self { cfg, values }
    }

    /// Parameters under which one block reproduces the forward Euler step
    /// with ratio `delta` (boundaries held fixed): the first group-1 filter
    /// is `delta * (1, -2, 1)` with zero boundary taps and only its mixing
    /// weight is nonzero.
    pub fn euler_embedding(cfg: NetConfig, delta: f64) -> Self {
        let mut params = Self::zeros(cfg);
        let k = params.group1_kernel_mut(0);
        k[..3].copy_from_slice(&[delta, -2.0 * delta, delta]);
        params.mix_mut()[0] = 1.0;
        params
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same parameters interpreted with a different block count.
    pub fn with_blocks(mut self, n_blocks: usize) -> Self {
        self.cfg.n_blocks = n_blocks;
        self
    }

    pub fn group1_kernel(&self, filter: usize) -> &[f64] {
        let start = self.cfg.layout().group1.start + filter * KERNEL_LEN;
        &self.values[start..start + KERNEL_LEN]
    }

    pub fn group1_kernel_mut(&mut self, filter: usize) -> &mut [f64] {
        let start = self.cfg.layout().group1.start + filter * KERNEL_LEN;
        &mut self.values[start..start + KERNEL_LEN]
    }

    pub fn group1(&self) -> &[f64] {
        &self.values[self.cfg.layout().group1]
    }

    /// Group-2 kernels indexed `(output filter, input filter)`, row-major.
    pub fn group2(&self) -> &[f64] {
        &self.values[self.cfg.layout().group2]
    }

    pub fn group2_kernel_mut(&mut self, out: usize, input: usize) -> &mut [f64] {
        let start =
            self.cfg.layout().group2.start + (out * self.cfg.n_filters + input) * KERNEL_LEN;
        &mut self.values[start..start + KERNEL_LEN]
    }

    pub fn mix(&self) -> &[f64] {
        &self.values[self.cfg.layout().mix]
    }

    pub fn mix_mut(&mut self) -> &mut [f64] {
        let range = self.cfg.layout().mix;
        &mut self.values[range]
    }

    /// `n_basis x M` forcing matrix, row-major (row = basis element).
    pub fn forcing_weights(&self) -> Option<&[f64]> {
        self.cfg
            .with_forcing
            .then(|| &self.values[self.cfg.layout().forcing])
    }

    pub fn forcing_weights_mut(&mut self) -> Option<&mut [f64]> {
        let range = self.cfg.layout().forcing;
        self.cfg.with_forcing.then(move || &mut self.values[range])
    }

    /// Effective forcing vector `f_hat[m] = sum_i W[i][m]`.
    pub fn forcing_vector(&self) -> Option<Vec<f64>> {
        self.forcing_weights()
            .map(|w| column_sums(w, self.cfg.grid_points))
    }

    /// Assemble the block as `u -> u + W u + f_hat` with `W` pentadiagonal.
    pub fn operator(&self) -> BlockOperator {
        BlockOperator::assemble(self)
    }
}

pub(crate) fn column_sums(rows: &[f64], width: usize) -> Vec<f64> {
    let mut sums = vec![0.0; width];
    for row in rows.chunks_exact(width) {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    sums
}

/// Applies one 7-slot kernel to a single channel and accumulates into `out`.
fn stencil_accumulate(kernel: &[f64], input: &[f64], out: &mut [f64]) {
    let m = input.len();
    out[0] += kernel[3] * input[0] + kernel[4] * input[1];
    for i in 1..m - 1 {
        out[i] += kernel[0] * input[i - 1] + kernel[1] * input[i] + kernel[2] * input[i + 1];
    }
    out[m - 1] += kernel[5] * input[m - 2] + kernel[6] * input[m - 1];
}

/// One group of FD-Filters: `channels x M` input to `f_out x M` output.
///
/// `kernels` holds `f_out * channels` kernels ordered `(out, in)`.
pub fn conv_group(input: &[f64], channels: usize, kernels: &[f64], f_out: usize) -> Vec<f64> {
    assert!(channels > 0 && input.len().is_multiple_of(channels));
    assert_eq!(kernels.len(), f_out * channels * KERNEL_LEN, "kernel count");
    let m = input.len() / channels;
    assert!(m >= 2, "at least two grid points");
    let mut out = vec![0.0; f_out * m];
    for (o, row) in out.chunks_exact_mut(m).enumerate() {
        for (c, channel) in input.chunks_exact(m).enumerate() {
            let k = &kernels[(o * channels + c) * KERNEL_LEN..][..KERNEL_LEN];
            stencil_accumulate(k, channel, row);
        }
    }
    out
}

/// One FD-Block evaluated channel by channel.
pub fn block_forward(u: &[f64], params: &FdNetParams) -> Vec<f64> {
    let cfg = params.config();
    let (f, m) = (cfg.n_filters, cfg.grid_points);
    assert_eq!(u.len(), m, "state length");
    let g1 = conv_group(u, 1, params.group1(), f);
    let g2 = conv_group(&g1, f, params.group2(), f);
    let mut out = u.to_vec();
    for (w, channel) in params
        .mix()
        .iter()
        .zip(g1.chunks_exact(m).chain(g2.chunks_exact(m)))
    {
        for (o, v) in out.iter_mut().zip(channel) {
            *o += w * v;
        }
    }
    if let Some(f_hat) = params.forcing_vector() {
        for (o, v) in out.iter_mut().zip(&f_hat) {
            *o += v;
        }
    }
    out
}

/// `n_blocks`-fold composition of [`block_forward`] with shared parameters.
pub fn net_forward(u: &[f64], params: &FdNetParams, n_blocks: usize) -> Vec<f64> {
    assert!(n_blocks >= 1);
    let mut state = u.to_vec();
    for _ in 0..n_blocks {
        state = block_forward(&state, params);
    }
    state
}

/// `B` input/target pairs of `M` values each, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    inputs: Vec<f64>,
    targets: Vec<f64>,
    points: usize,
}

impl Batch {
    pub fn new(inputs: Vec<f64>, targets: Vec<f64>, points: usize) -> Result<Self> {
        if points == 0 || inputs.is_empty() || !inputs.len().is_multiple_of(points) {
            return Err(Error::Shape(format!(
                "{} inputs do not form rows of {points}",
                inputs.len()
            )));
        }
        if inputs.len() != targets.len() {
            return Err(Error::Shape(format!(
                "{} inputs vs {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        Ok(Self {
            inputs,
            targets,
            points,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.points
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.points..(i + 1) * self.points]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.points..(i + 1) * self.points]
    }
}
