//! The trust-region method on a small indefinite quadratic.

use fdnet::optim::{
    steihaug_cg, tr_iteration, CgTolerance, Objective, TrustRegionConfig, TrustRegionState,
};

/// f(x) = 1/2 x'Ax - b'x with a diagonal A.
struct Quadratic {
    diag: Vec<f64>,
    b: Vec<f64>,
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn loss(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.diag)
            .zip(&self.b)
            .map(|((x, a), b)| 0.5 * a * x * x - b * x)
            .sum()
    }

    fn loss_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let g = x
            .iter()
            .zip(&self.diag)
            .zip(&self.b)
            .map(|((x, a), b)| a * x - b)
            .collect();
        (self.loss(x), g)
    }

    fn hvp(&self, _x: &[f64], v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.diag).map(|(v, a)| a * v).collect()
    }
}

pub fn run_example() -> fdnet::Result<()> {
    let q = Quadratic {
        diag: vec![4.0, 1.0, 0.25],
        b: vec![1.0, 1.0, 1.0],
    };
    let mut x = vec![0.0; 3];
    let mut state = TrustRegionState::new(TrustRegionConfig::default().with_max_iters(20));
    for _ in 0..3 {
        let r = tr_iteration(&mut x, &mut state, &q)?;
        println!(
            "it {}: f = {:.6}, rho = {:?}, radius = {:?}, cg = {}, accepted = {}",
            r.iteration, r.minibatch_mse, r.rho, r.radius, r.cg_iters, r.accepted
        );
    }
    println!("x = {x:?} (minimizer [0.25, 1, 4])");

    // Negative curvature sends CG to the boundary.
    let indefinite = [1.0, -1.0];
    let g = [1.0, 1.0];
    let tol = CgTolerance::InexactNewton.threshold(2f64.sqrt());
    let step = steihaug_cg(
        &g,
        |v| vec![indefinite[0] * v[0], indefinite[1] * v[1]],
        2.0,
        tol,
        10,
    )
    .expect("no breakdown");
    println!(
        "indefinite model: {:?} after {} CG iterations, |s| = {:.3}",
        step.termination,
        step.iterations,
        step.step.iter().map(|s| s * s).sum::<f64>().sqrt()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> fdnet::Result<()> {
    run_example()
}
