use proptest::prelude::*;

use fdnet::heat::{
    apply_noise, euler_rollout, euler_step, exact_solution, EulerConfig, HeatProblem,
};

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 1..=10)
}

proptest! {
    #[test]
    fn boundary_and_initial_condition(c in coeffs(), t in 0.0f64..5000.0, x in 0.0f64..3.1) {
        let p = HeatProblem::new(2e-4, std::f64::consts::PI, c.clone()).unwrap();
        prop_assert_eq!(exact_solution(&p, 0.0, t), 0.0);
        let series: f64 = c.iter().enumerate().map(|(i, a)| a * ((i + 1) as f64 * x).sin()).sum();
        prop_assert!((exact_solution(&p, x, 0.0) - series).abs() <= 1e-12);
    }

    #[test]
    fn unforced_modes_decay_independently(c in coeffs(), t in 0.0f64..5000.0, x in 0.1f64..3.0) {
        // Superposition: the sum of single-mode solutions.
        let p = HeatProblem::new(2e-4, std::f64::consts::PI, c.clone()).unwrap();
        let mut total = 0.0;
        for (i, &a) in c.iter().enumerate() {
            let mut single = vec![0.0; c.len()];
            single[i] = a;
            total += exact_solution(&HeatProblem::new(2e-4, std::f64::consts::PI, single).unwrap(), x, t);
        }
        prop_assert!((exact_solution(&p, x, t) - total).abs() <= 1e-12);
    }

    #[test]
    fn noise_keeps_sign_below_unit_amplitude(u in -10.0f64..10.0, gamma in 0.0f64..0.5, eps in -1.99f64..1.99) {
        let v = apply_noise(u, gamma, eps);
        prop_assert!(v == 0.0 && u == 0.0 || v.signum() == u.signum());
    }

    #[test]
    fn euler_step_is_linear(
        u in prop::collection::vec(-5.0f64..5.0, 12),
        v in prop::collection::vec(-5.0f64..5.0, 12),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        delta in 0.0f64..5.0,
    ) {
        let cfg = EulerConfig { delta, dt: 1.0 };
        let combo: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let lhs = euler_step(&combo, &cfg);
        let (su, sv) = (euler_step(&u, &cfg), euler_step(&v, &cfg));
        for i in 0..12 {
            let rhs = a * su[i] + b * sv[i];
            prop_assert!((lhs[i] - rhs).abs() <= 1e-11 * (1.0 + rhs.abs()));
        }
        prop_assert_eq!((lhs[0], lhs[11]), (combo[0], combo[11]));
    }

    #[test]
    fn stable_scheme_obeys_maximum_principle(u in prop::collection::vec(-5.0f64..5.0, 3..40), delta in 0.0f64..=0.5) {
        let bound = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for s in euler_rollout(&u, &EulerConfig { delta, dt: 1.0 }, 50) {
            prop_assert!(s.iter().all(|x| x.abs() <= bound * (1.0 + 1e-12)));
        }
    }
}

#[test]
fn sine_mode_on_the_grid_scales_by_the_symbol() {
    let u: Vec<f64> = (0..32).map(|m| (m as f64 * 0.1).sin()).collect();
    let next = euler_step(
        &u,
        &EulerConfig {
            delta: 0.02,
            dt: 1.0,
        },
    );
    let factor = 1.0 + 0.02 * (2.0 * 0.1f64.cos() - 2.0);
    assert!((factor - 0.9998).abs() < 1e-6);
    for m in 1..31 {
        assert!((next[m] - factor * u[m]).abs() <= 1e-15);
    }
}

#[test]
fn violated_stability_bound_amplifies_the_sin_grid() {
    // The held boundary value at x = 3.1 excites the grid's highest mode,
    // which grows by |1 - 4 delta| = 15 per step: slow at first, then fast.
    let u: Vec<f64> = (0..32).map(|m| (m as f64 * 0.1).sin()).collect();
    let states = euler_rollout(
        &u,
        &EulerConfig {
            delta: 4.0,
            dt: 200.0,
        },
        10,
    );
    let sup = |s: &[f64]| s.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let growth: Vec<f64> = states.iter().map(|s| sup(s)).collect();
    assert!(growth[4] > sup(&u));
    assert!(growth[9] > 1e3 * sup(&u));
    assert!(growth.windows(2).skip(5).all(|w| w[1] > 10.0 * w[0]));
}

#[test]
fn forced_solution_reaches_steady_state() {
    let d = vec![0.3, -0.1, 0.05, 0.2];
    let p = HeatProblem::new(2e-4, std::f64::consts::PI, vec![1.0, 0.0, -1.0, 0.5])
        .unwrap()
        .with_forcing(d.clone())
        .unwrap();
    for m in 1..31 {
        let x = m as f64 * 0.1;
        let steady: f64 = d
            .iter()
            .enumerate()
            .map(|(i, di)| {
                let k = (i + 1) as f64;
                di / (2e-4 * k * k) * (k * x).sin()
            })
            .sum();
        let got = exact_solution(&p, x, 1e6);
        assert!((got - steady).abs() <= 1e-8 * steady.abs());
    }
}
