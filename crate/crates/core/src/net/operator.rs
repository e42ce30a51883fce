//! Loss, gradient and Hessian-vector product of the mini-batch MSE.
//!
//! A block is linear in its input, so it is assembled once per parameter
//! vector into `u -> u + W u + f_hat`:
//!
//! ```text
//! W = sum_i A_i T1_i,    A_i = mix_i I + sum_o mix_{F+o} T2_{o,i}
//! ```
//!
//! with `T1_i`, `T2_{o,i}` the tridiagonal matrices of the kernels, making `W`
//! pentadiagonal. The gradient is backpropagated first through the `k`
//! applications of the block (giving `dL/dW`, `dL/df_hat`) and then through
//! the assembly. Running the same code on dual numbers seeded with a
//! direction `v` differentiates the gradient along `v`, which is exactly the
//! Hessian-vector product.

use super::dual::{Dual, Scalar};
use super::{Batch, FdNetParams, NetConfig, KERNEL_LEN};

type Tri<S> = Vec<[S; 3]>;
type Band<S> = Vec<[S; 5]>;

fn kernel_to_tri<S: Scalar>(k: &[S], m: usize) -> Tri<S> {
    let z = S::zero();
    let mut t = vec![[k[0], k[1], k[2]]; m];
    t[0] = [z, k[3], k[4]];
    t[m - 1] = [k[5], k[6], z];
    t
}

/// Accumulates `scale * t` (entry-wise over the kernel's slots) into `out`.
fn tri_to_kernel<S: Scalar>(t: &[[S; 3]], scale: S, out: &mut [S]) {
    let m = t.len();
    out[3] += scale * t[0][1];
    out[4] += scale * t[0][2];
    for row in &t[1..m - 1] {
        out[0] += scale * row[0];
        out[1] += scale * row[1];
        out[2] += scale * row[2];
    }
    out[5] += scale * t[m - 1][0];
    out[6] += scale * t[m - 1][1];
}

/// `w += a * b` for tridiagonal `a`, `b`.
fn add_product<S: Scalar>(a: &[[S; 3]], b: &[[S; 3]], w: &mut [[S; 5]]) {
    let m = a.len() as isize;
    for r in 0..m {
        for da in -1..=1isize {
            let j = r + da;
            if j < 0 || j >= m {
                continue;
            }
            let arj = a[r as usize][(da + 1) as usize];
            for db in -1..=1isize {
                let c = j + db;
                if c < 0 || c >= m {
                    continue;
                }
                w[r as usize][(c - r + 2) as usize] += arj * b[j as usize][(db + 1) as usize];
            }
        }
    }
}

/// Tridiagonal part of `a^T g`.
fn tri_of_at_g<S: Scalar>(a: &[[S; 3]], g: &[[S; 5]]) -> Tri<S> {
    let m = a.len() as isize;
    let mut out = vec![[S::zero(); 3]; m as usize];
    for r in 0..m {
        for dc in -1..=1isize {
            let c = r + dc;
            if c < 0 || c >= m {
                continue;
            }
            let mut acc = S::zero();
            for dj in -1..=1isize {
                let j = r + dj;
                if j < 0 || j >= m {
                    continue;
                }
                // a[j][r] sits at offset r - j in row j
                acc += a[j as usize][(r - j + 1) as usize] * g[j as usize][(c - j + 2) as usize];
            }
            out[r as usize][(dc + 1) as usize] = acc;
        }
    }
    out
}

/// Tridiagonal part of `g t^T`.
fn tri_of_g_tt<S: Scalar>(g: &[[S; 5]], t: &[[S; 3]]) -> Tri<S> {
    let m = t.len() as isize;
    let mut out = vec![[S::zero(); 3]; m as usize];
    for r in 0..m {
        for dc in -1..=1isize {
            let c = r + dc;
            if c < 0 || c >= m {
                continue;
            }
            let mut acc = S::zero();
            for dj in -1..=1isize {
                let j = c + dj;
                if j < 0 || j >= m {
                    continue;
                }
                acc += g[r as usize][(j - r + 2) as usize] * t[c as usize][(dj + 1) as usize];
            }
            out[r as usize][(dc + 1) as usize] = acc;
        }
    }
    out
}

fn tri_dot<S: Scalar>(a: &[[S; 3]], b: &[[S; 3]]) -> S {
    let mut acc = S::zero();
    for (ra, rb) in a.iter().zip(b) {
        for k in 0..3 {
            acc += ra[k] * rb[k];
        }
    }
    acc
}

fn band_apply_add<S: Scalar>(w: &[[S; 5]], z: &[S], out: &mut [S]) {
    let m = z.len() as isize;
    for r in 0..m {
        let mut acc = S::zero();
        for d in -2..=2isize {
            let c = r + d;
            if c >= 0 && c < m {
                acc += w[r as usize][(d + 2) as usize] * z[c as usize];
            }
        }
        out[r as usize] += acc;
    }
}

fn band_transpose_apply_add<S: Scalar>(w: &[[S; 5]], lambda: &[S], out: &mut [S]) {
    let m = lambda.len() as isize;
    for r in 0..m {
        for d in -2..=2isize {
            let c = r + d;
            if c >= 0 && c < m {
                out[c as usize] += w[r as usize][(d + 2) as usize] * lambda[r as usize];
            }
        }
    }
}

fn band_add_outer<S: Scalar>(g: &mut [[S; 5]], lambda: &[S], z: &[S]) {
    let m = z.len() as isize;
    for r in 0..m {
        for d in -2..=2isize {
            let c = r + d;
            if c >= 0 && c < m {
                g[r as usize][(d + 2) as usize] += lambda[r as usize] * z[c as usize];
            }
        }
    }
}

struct Assembled<S> {
    t1: Vec<Tri<S>>,
    t2: Vec<Tri<S>>,
    a: Vec<Tri<S>>,
    w: Band<S>,
    forcing: Option<Vec<S>>,
}

fn assemble<S: Scalar>(cfg: &NetConfig, theta: &[S]) -> Assembled<S> {
    let (f, m) = (cfg.n_filters, cfg.grid_points);
    let layout = cfg.layout();
    let g1 = &theta[layout.group1.clone()];
    let g2 = &theta[layout.group2.clone()];
    let mix = &theta[layout.mix.clone()];

    let t1: Vec<Tri<S>> = g1
        .chunks_exact(KERNEL_LEN)
        .map(|k| kernel_to_tri(k, m))
        .collect();
    let t2: Vec<Tri<S>> = g2
        .chunks_exact(KERNEL_LEN)
        .map(|k| kernel_to_tri(k, m))
        .collect();

    let mut a = Vec::with_capacity(f);
    for i in 0..f {
        let mut ai = vec![[S::zero(); 3]; m];
        for row in ai.iter_mut() {
            row[1] = mix[i];
        }
        for o in 0..f {
            let weight = mix[f + o];
            for (dst, src) in ai.iter_mut().zip(&t2[o * f + i]) {
                for k in 0..3 {
                    dst[k] += weight * src[k];
                }
            }
        }
        a.push(ai);
    }

    let mut w = vec![[S::zero(); 5]; m];
    for (ai, ti) in a.iter().zip(&t1) {
        add_product(ai, ti, &mut w);
    }

    let forcing = cfg.with_forcing.then(|| {
        let mut sums = vec![S::zero(); m];
        for row in theta[layout.forcing.clone()].chunks_exact(m) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += *v;
            }
        }
        sums
    });

    Assembled {
        t1,
        t2,
        a,
        w,
        forcing,
    }
}

/// Gradient of `<gw, W(theta)> + <gf, f_hat(theta)>` with respect to `theta`.
fn backprop_assembly<S: Scalar>(
    cfg: &NetConfig,
    theta: &[S],
    asm: &Assembled<S>,
    gw: &[[S; 5]],
    gf: Option<&[S]>,
) -> Vec<S> {
    let f = cfg.n_filters;
    let layout = cfg.layout();
    let mix = &theta[layout.mix.clone()];
    let mut grad = vec![S::zero(); layout.total];

    for i in 0..f {
        let gt1 = tri_of_at_g(&asm.a[i], gw);
        let k1 = layout.group1.start + i * KERNEL_LEN;
        tri_to_kernel(&gt1, S::from_f64(1.0), &mut grad[k1..k1 + KERNEL_LEN]);

        let q = tri_of_g_tt(gw, &asm.t1[i]);
        let mut trace = S::zero();
        for row in &q {
            trace += row[1];
        }
        grad[layout.mix.start + i] += trace;

        for o in 0..f {
            let k2 = layout.group2.start + (o * f + i) * KERNEL_LEN;
            tri_to_kernel(&q, mix[f + o], &mut grad[k2..k2 + KERNEL_LEN]);
            grad[layout.mix.start + f + o] += tri_dot(&q, &asm.t2[o * f + i]);
        }
    }

    if let Some(gf) = gf {
        let m = cfg.grid_points;
        for row in grad[layout.forcing.clone()].chunks_exact_mut(m) {
            row.copy_from_slice(gf);
        }
    }
    grad
}

/// Loss and `(dL/dW, dL/df_hat)` for `k` applications of `u -> u + W u + f`.
fn propagate<S: Scalar>(
    w: &[[S; 5]],
    forcing: Option<&[S]>,
    batch: &Batch,
    n_blocks: usize,
) -> (S, Band<S>, Option<Vec<S>>) {
    let m = batch.points();
    let scale = 1.0 / (batch.len() * m) as f64;
    let mut loss = S::zero();
    let mut gw = vec![[S::zero(); 5]; m];
    let mut gf = forcing.map(|_| vec![S::zero(); m]);
    let mut states: Vec<Vec<S>> = vec![vec![S::zero(); m]; n_blocks + 1];
    let mut lambda = vec![S::zero(); m];
    let mut next = vec![S::zero(); m];

    for b in 0..batch.len() {
        for (s, &v) in states[0].iter_mut().zip(batch.input(b)) {
            *s = S::from_f64(v);
        }
        for j in 0..n_blocks {
            let (head, tail) = states.split_at_mut(j + 1);
            let (z, z_next) = (&head[j], &mut tail[0]);
            z_next.copy_from_slice(z);
            band_apply_add(w, z, z_next);
            if let Some(f) = forcing {
                for (dst, &v) in z_next.iter_mut().zip(f) {
                    *dst += v;
                }
            }
        }

        for ((l, &p), &y) in lambda
            .iter_mut()
            .zip(&states[n_blocks])
            .zip(batch.target(b))
        {
            let r = p - S::from_f64(y);
            loss += r * r;
            *l = S::from_f64(2.0 * scale) * r;
        }

        for j in (0..n_blocks).rev() {
            band_add_outer(&mut gw, &lambda, &states[j]);
            if let Some(gf) = gf.as_mut() {
                for (g, &l) in gf.iter_mut().zip(&lambda) {
                    *g += l;
                }
            }
            next.copy_from_slice(&lambda);
            band_transpose_apply_add(w, &lambda, &mut next);
            std::mem::swap(&mut lambda, &mut next);
        }
    }
    (loss * S::from_f64(scale), gw, gf)
}

fn loss_and_grad_generic<S: Scalar>(
    cfg: &NetConfig,
    theta: &[S],
    batch: &Batch,
    n_blocks: usize,
) -> (S, Vec<S>) {
    let asm = assemble(cfg, theta);
    let (loss, gw, gf) = propagate(&asm.w, asm.forcing.as_deref(), batch, n_blocks);
    let grad = backprop_assembly(cfg, theta, &asm, &gw, gf.as_deref());
    (loss, grad)
}

fn check_shapes(params: &FdNetParams, batch: &Batch, n_blocks: usize) {
    assert_eq!(
        batch.points(),
        params.config().grid_points,
        "batch rows must have one value per grid point"
    );
    assert!(n_blocks >= 1, "at least one block");
}

/// Mean squared error over all `B * M` entries of the batch.
pub fn loss(params: &FdNetParams, batch: &Batch, n_blocks: usize) -> f64 {
    check_shapes(params, batch, n_blocks);
    let op = params.operator();
    let m = batch.points();
    let mut state = vec![0.0; m];
    let mut scratch = vec![0.0; m];
    let mut total = 0.0;
    for b in 0..batch.len() {
        state.copy_from_slice(batch.input(b));
        for _ in 0..n_blocks {
            op.apply(&state, &mut scratch);
            std::mem::swap(&mut state, &mut scratch);
        }
        total += state
            .iter()
            .zip(batch.target(b))
            .map(|(p, y)| (p - y) * (p - y))
            .sum::<f64>();
    }
    total / (batch.len() * m) as f64
}

pub fn loss_and_grad(params: &FdNetParams, batch: &Batch, n_blocks: usize) -> (f64, Vec<f64>) {
    check_shapes(params, batch, n_blocks);
    loss_and_grad_generic(params.config(), params.as_slice(), batch, n_blocks)
}

/// Exact gradient of [`loss`].
pub fn grad(params: &FdNetParams, batch: &Batch, n_blocks: usize) -> Vec<f64> {
    loss_and_grad(params, batch, n_blocks).1
}

/// Exact Hessian-vector product `H(theta) v` of [`loss`].
pub fn hvp(params: &FdNetParams, v: &[f64], batch: &Batch, n_blocks: usize) -> Vec<f64> {
    check_shapes(params, batch, n_blocks);
    assert_eq!(v.len(), params.len(), "direction length");
    let theta: Vec<Dual> = params
        .as_slice()
        .iter()
        .zip(v)
        .map(|(&p, &d)| Dual::new(p, d))
        .collect();
    let (_, grad) = loss_and_grad_generic(params.config(), &theta, batch, n_blocks);
    grad.into_iter().map(|g| g.tangent).collect()
}

/// One block assembled as `u -> u + W u + f_hat` with pentadiagonal `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOperator {
    band: Vec<[f64; 5]>,
    forcing: Option<Vec<f64>>,
}

impl BlockOperator {
    pub(super) fn assemble(params: &FdNetParams) -> Self {
        let asm = assemble(params.config(), params.as_slice());
        Self {
            band: asm.w,
            forcing: asm.forcing,
        }
    }

    pub fn points(&self) -> usize {
        self.band.len()
    }

    /// Row `r` of `W`, entries for columns `r - 2 ..= r + 2`.
    pub fn band_row(&self, r: usize) -> [f64; 5] {
        self.band[r]
    }

    pub fn forcing(&self) -> Option<&[f64]> {
        self.forcing.as_deref()
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        out.copy_from_slice(u);
        band_apply_add(&self.band, u, out);
        if let Some(f) = &self.forcing {
            for (o, v) in out.iter_mut().zip(f) {
                *o += v;
            }
        }
    }

    pub fn step(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.apply(u, &mut out);
        out
    }
}
