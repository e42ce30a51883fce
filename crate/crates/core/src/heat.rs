//! The 1-D heat equation on `[0, L]` with homogeneous Dirichlet conditions.
//!
//! Closed-form solutions (with or without a sinusoidal source term), the
//! multiplicative noise model used for the noisy data sets, and the explicit
//! forward Euler scheme that serves as the numerical baseline.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Uniform spatial grid `x_m = m * dx`, `m = 0..M`, with the last point the
/// largest multiple of `dx` not exceeding `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    length: f64,
    spacing: f64,
    points: Vec<f64>,
}

impl Grid {
    pub fn new(length: f64, spacing: f64) -> Result<Self> {
        if !(length > 0.0 && spacing > 0.0 && length.is_finite() && spacing.is_finite()) {
            return Err(Error::Config(format!(
                "grid needs positive finite length and spacing, got L = {length}, dx = {spacing}"
            )));
        }
        // A relative slack keeps exact multiples such as L = 1, dx = 0.1 on the grid.
        let intervals = (length / spacing * (1.0 + 1e-12)).floor() as usize;
        let points = (0..=intervals).map(|m| m as f64 * spacing).collect();
        Ok(Self {
            length,
            spacing,
            points,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

/// One heat-equation instance: diffusion rate, bar length, sine-series initial
/// condition, optional sine-series source term and optional noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatProblem {
    pub beta: f64,
    pub length: f64,
    pub ic_coeffs: Vec<f64>,
    pub forcing_coeffs: Option<Vec<f64>>,
    pub noise_gamma: Option<f64>,
}

impl HeatProblem {
    pub fn new(beta: f64, length: f64, ic_coeffs: Vec<f64>) -> Result<Self> {
        if ic_coeffs.is_empty() {
            return Err(Error::Config(
                "at least one initial-condition mode is required".into(),
            ));
        }
        if beta.is_nan() || beta <= 0.0 {
            return Err(Error::Config(format!("beta must be positive, got {beta}")));
        }
        if length.is_nan() || length <= 0.0 {
            return Err(Error::Config(format!(
                "length must be positive, got {length}"
            )));
        }
        Ok(Self {
            beta,
            length,
            ic_coeffs,
            forcing_coeffs: None,
            noise_gamma: None,
        })
    }

    pub fn with_forcing(mut self, forcing_coeffs: Vec<f64>) -> Result<Self> {
        if forcing_coeffs.len() != self.ic_coeffs.len() {
            return Err(Error::Shape(format!(
                "{} forcing coefficients for {} modes",
                forcing_coeffs.len(),
                self.ic_coeffs.len()
            )));
        }
        self.forcing_coeffs = Some(forcing_coeffs);
        Ok(self)
    }

    pub fn with_noise(mut self, gamma: f64) -> Result<Self> {
        if gamma.is_nan() || gamma < 0.0 {
            return Err(Error::Config(format!(
                "noise level must be nonnegative, got {gamma}"
            )));
        }
        self.noise_gamma = Some(gamma);
        Ok(self)
    }

    pub fn mode_count(&self) -> usize {
        self.ic_coeffs.len()
    }

    /// Decay rate `beta * (i pi / L)^2` of mode `i` (1-based).
    pub fn mode_rate(&self, mode: usize) -> f64 {
        mode_rate(self.beta, self.length, mode)
    }
}

pub(crate) fn mode_rate(beta: f64, length: f64, mode: usize) -> f64 {
    let wavenumber = mode as f64 * PI / length;
    beta * wavenumber * wavenumber
}

pub(crate) fn mode_shape(length: f64, mode: usize, x: f64) -> f64 {
    (mode as f64 * PI * x / length).sin()
}

/// Contribution of a single mode given its shape value and temporal decay.
/// `steady` is `D_i / rate_i` for forced problems.
#[inline]
pub(crate) fn mode_term(ic: f64, steady: Option<f64>, shape: f64, decay: f64) -> f64 {
    match steady {
        None => ic * shape * decay,
        Some(a) => (ic - a) * shape * decay + a * shape,
    }
}

/// Exact solution `u(x, t)`, summed over modes in increasing order.
///
/// Noise is never applied here; see [`apply_noise`].
pub fn exact_solution(problem: &HeatProblem, x: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    let mut sum = 0.0;
    for (idx, &ic) in problem.ic_coeffs.iter().enumerate() {
        let mode = idx + 1;
        let rate = problem.mode_rate(mode);
        let steady = problem.forcing_coeffs.as_ref().map(|d| d[idx] / rate);
        let shape = mode_shape(problem.length, mode, x);
        let decay = (-rate * t).exp();
        sum += mode_term(ic, steady, shape, decay);
    }
    sum
}

/// Multiplicative noise `u * (1 + gamma * eps)` for a standard-normal `eps`.
#[inline]
pub fn apply_noise(u: f64, gamma: f64, eps: f64) -> f64 {
    u * (1.0 + gamma * eps)
}

/// Parameters of the explicit scheme `u_m += delta (u_{m+1} - 2 u_m + u_{m-1})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerConfig {
    pub delta: f64,
    pub dt: f64,
}

impl EulerConfig {
    pub fn new(beta: f64, dt: f64, dx: f64) -> Result<Self> {
        let delta = beta * dt / (dx * dx);
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!(
                "Euler ratio must be positive, got beta = {beta}, dt = {dt}, dx = {dx}"
            )));
        }
        Ok(Self { delta, dt })
    }

    /// Whether `delta <= 1/2`, the classical stability bound.
    pub fn is_stable(&self) -> bool {
        self.delta <= 0.5
    }
}

/// One forward Euler step. Both boundary points keep their input values.
///
/// # Panics
/// If `out` and `u` differ in length.
pub fn euler_step_into(u: &[f64], delta: f64, out: &mut [f64]) {
    assert_eq!(u.len(), out.len(), "euler_step: buffer length mismatch");
    let m = u.len();
    out.copy_from_slice(u);
    for i in 1..m.saturating_sub(1) {
        out[i] = u[i] + delta * (u[i + 1] - 2.0 * u[i] + u[i - 1]);
    }
}

pub fn euler_step(u: &[f64], config: &EulerConfig) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    euler_step_into(u, config.delta, &mut out);
    out
}

/// States after each of `steps` Euler steps (the initial state is not included).
pub fn euler_rollout(u0: &[f64], config: &EulerConfig, steps: usize) -> Vec<Vec<f64>> {
    let mut states = Vec::with_capacity(steps);
    let mut current = u0.to_vec();
    for _ in 0..steps {
        let next = euler_step(&current, config);
        states.push(next.clone());
        current = next;
    }
    states
}

pub(crate) fn sup_norm(u: &[f64]) -> f64 {
    u.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_mode_problem() -> HeatProblem {
        let mut c = vec![0.0; 10];
        c[0] = 1.0;
        HeatProblem::new(2e-4, PI, c).unwrap()
    }

    fn sin_grid() -> (Grid, Vec<f64>) {
        let grid = Grid::new(PI, 0.1).unwrap();
        let u = grid.points().iter().map(|x| x.sin()).collect();
        (grid, u)
    }

    #[test]
    fn grid_truncates_below_length() {
        let grid = Grid::new(PI, 0.1).unwrap();
        assert_eq!(grid.point_count(), 32);
        let last = *grid.points().last().unwrap();
        assert!((last - 3.1).abs() < 1e-12);
        let m = grid.point_count() as f64;
        assert!((m - 1.0) * 0.1 <= PI && PI < m * 0.1);
        assert!(grid.points().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn grid_keeps_exact_multiple_endpoint() {
        let grid = Grid::new(1.0, 0.1).unwrap();
        assert_eq!(grid.point_count(), 11);
        assert!(Grid::new(0.0, 0.1).is_err());
    }

    #[test]
    fn exact_solution_single_mode() {
        let p = unit_mode_problem();
        assert_eq!(exact_solution(&p, PI / 2.0, 0.0), 1.0);
        let u = exact_solution(&p, PI / 2.0, 1000.0);
        assert!((u - (-0.2_f64).exp()).abs() < 1e-15);
        // direct summation oracle
        let direct: f64 = (1..=10)
            .map(|i| {
                let c = if i == 1 { 1.0 } else { 0.0 };
                c * (i as f64 * PI / 2.0).sin() * (-2e-4 * (i * i) as f64 * 1000.0).exp()
            })
            .sum();
        assert!((u - direct).abs() < 1e-15);
    }

    #[test]
    fn forced_steady_state() {
        let mut d = vec![0.0; 10];
        d[0] = 1.0;
        let p = HeatProblem::new(2e-4, PI, vec![0.0; 10])
            .unwrap()
            .with_forcing(d)
            .unwrap();
        for &x in &[0.3, 1.0, PI / 2.0, 2.9] {
            let u = exact_solution(&p, x, 1e6);
            let expected = x.sin() / 2e-4;
            assert!(
                ((u - expected) / expected).abs() < 1e-12,
                "{u} vs {expected}"
            );
        }
    }

    #[test]
    fn boundary_and_initial_condition() {
        let p = HeatProblem::new(2e-4, PI, vec![0.3, -1.2, 0.5, 2.0]).unwrap();
        for &t in &[0.0, 1.0, 500.0, 1e4] {
            assert_eq!(exact_solution(&p, 0.0, t), 0.0);
        }
        for &x in &[0.2, 1.3, 2.7] {
            let ic: f64 = p
                .ic_coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c * ((i + 1) as f64 * x).sin())
                .sum();
            assert!((exact_solution(&p, x, 0.0) - ic).abs() <= 1e-12);
        }
    }

    #[test]
    fn noise_formula() {
        assert_eq!(apply_noise(2.0, 0.0, 3.7), 2.0);
        assert!((apply_noise(1.0, 1e-2, 1.0) - 1.01).abs() < 1e-15);
        assert_eq!(apply_noise(0.0, 0.5, -2.0), 0.0);
    }

    #[test]
    fn euler_ratio_values() {
        assert!((EulerConfig::new(2e-4, 1.0, 0.1).unwrap().delta - 0.02).abs() < 1e-15);
        assert!((EulerConfig::new(2e-4, 200.0, 0.1).unwrap().delta - 4.0).abs() < 1e-12);
    }

    #[test]
    fn euler_step_on_sine_matches_closed_form() {
        let (_, u) = sin_grid();
        let cfg = EulerConfig {
            delta: 0.02,
            dt: 1.0,
        };
        let out = euler_step(&u, &cfg);
        let factor = 1.0 + 0.02 * (2.0 * 0.1_f64.cos() - 2.0);
        assert!((factor - 0.9998).abs() < 1e-6);
        for m in 1..u.len() - 1 {
            assert!((out[m] - factor * u[m]).abs() < 1e-14);
        }
        assert_eq!(out[0], u[0]);
        assert_eq!(out[31], u[31]);
    }

    #[test]
    fn euler_zero_fixed_point() {
        let cfg = EulerConfig {
            delta: 4.0,
            dt: 1.0,
        };
        assert_eq!(euler_step(&[0.0; 8], &cfg), vec![0.0; 8]);
    }

    #[test]
    fn euler_rollout_single_step() {
        let (_, u) = sin_grid();
        let cfg = EulerConfig {
            delta: 0.02,
            dt: 1.0,
        };
        let states = euler_rollout(&u, &cfg, 1);
        assert_eq!(states, vec![euler_step(&u, &cfg)]);
    }

    #[test]
    fn euler_stability_contrast() {
        let (_, u) = sin_grid();
        let norm0 = sup_norm(&u);
        let stable = euler_rollout(
            &u,
            &EulerConfig {
                delta: 0.02,
                dt: 1.0,
            },
            1000,
        );
        assert!(stable.iter().all(|s| sup_norm(s) <= norm0));

        // Mode 10 on the interior is amplified by 1 - 16 sin^2(0.5) per step.
        let high: Vec<f64> = (0..32).map(|i| (10.0 * i as f64 * 0.1).sin()).collect();
        let unstable = euler_rollout(
            &high,
            &EulerConfig {
                delta: 4.0,
                dt: 200.0,
            },
            5,
        );
        let factor = (1.0 - 16.0 * 0.5f64.sin().powi(2)).abs().powi(5);
        assert!(factor > 100.0);
        assert!(sup_norm(unstable.last().unwrap()) > 0.5 * factor * sup_norm(&high));
    }

    #[test]
    fn euler_step_is_linear() {
        let cfg = EulerConfig {
            delta: 0.37,
            dt: 1.0,
        };
        let u: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).cos()).collect();
        let v: Vec<f64> = (0..12).map(|i| (i as f64 * 1.3).sin() - 0.2).collect();
        let (a, b) = (1.7, -0.4);
        let combo: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let lhs = euler_step(&combo, &cfg);
        let (su, sv) = (euler_step(&u, &cfg), euler_step(&v, &cfg));
        for i in 0..12 {
            assert!((lhs[i] - (a * su[i] + b * sv[i])).abs() < 1e-14);
        }
    }
}
