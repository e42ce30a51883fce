//! Compare the exact gradient and Hessian-vector product with finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fdnet::net::{self, Batch, FdNetParams, NetConfig};

pub fn run_example() -> fdnet::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = NetConfig::new(4, 3, 8).forcing(true);
    let p = FdNetParams::init(cfg, 1);
    let m = cfg.grid_points;
    let batch = Batch::new(
        (0..4 * m).map(|_| rng.random_range(-1.0..1.0)).collect(),
        (0..4 * m).map(|_| rng.random_range(-1.0..1.0)).collect(),
        m,
    )?;
    let v: Vec<f64> = (0..p.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let at = |s: f64| {
        let theta = p
            .as_slice()
            .iter()
            .zip(&v)
            .map(|(a, d)| a + s * d)
            .collect();
        FdNetParams::from_vec(cfg, theta).unwrap()
    };

    // Directional derivative of the loss and of the gradient along v.
    let g = net::grad(&p, &batch, cfg.n_blocks);
    let dir: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
    let h = 1e-6;
    let fd = (net::loss(&at(h), &batch, 3) - net::loss(&at(-h), &batch, 3)) / (2.0 * h);
    println!("{} parameters", p.len());
    println!("g.v = {dir:.10e}, finite difference {fd:.10e}");

    let hv = net::hvp(&p, &v, &batch, 3);
    let (gp, gm) = (
        net::grad(&at(1e-5), &batch, 3),
        net::grad(&at(-1e-5), &batch, 3),
    );
    let err = hv
        .iter()
        .zip(gp.iter().zip(&gm))
        .map(|(a, (p, m))| (a - (p - m) / 2e-5).abs())
        .fold(0.0, f64::max);
    println!("max |Hv - finite difference| = {err:.1e}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> fdnet::Result<()> {
    run_example()
}
