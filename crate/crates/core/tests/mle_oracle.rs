//! Largest Lyapunov exponent against linear systems with known spectra, and
//! invariances on the economic system.

use econ_attractors::fode::FOConfig;
use econ_attractors::lyapunov::{mle_field, mle_fo_field, mle_io, MleConfig, MleMode};
use econ_attractors::system::{Linearized, VectorField};
use econ_attractors::{mirror, IntegratorConfig, State3, SystemParams};

/// `x' = A x`.
struct Linear([[f64; 3]; 3]);

impl VectorField<3> for Linear {
    fn eval(&self, x: &[f64; 3]) -> [f64; 3] {
        let a = &self.0;
        std::array::from_fn(|i| (0..3).map(|j| a[i][j] * x[j]).sum())
    }
}

impl Linearized<3> for Linear {
    fn jacobian(&self, _: &[f64; 3]) -> [[f64; 3]; 3] {
        self.0
    }
}

fn short(t_total: f64) -> MleConfig {
    MleConfig {
        t_total,
        t_transient: 50.0,
        ..MleConfig::default()
    }
}

#[test]
fn diagonal_spectrum() {
    for (diag, expect) in [([0.1, -0.2, -0.5], 0.1), ([-0.3, -0.05, -1.0], -0.05), ([0.02, 0.3, 0.0], 0.3)] {
        let a = [[diag[0], 0.0, 0.0], [0.0, diag[1], 0.0], [0.0, 0.0, diag[2]]];
        let r = mle_field(&Linear(a), [0.0; 3], &short(400.0)).unwrap();
        assert!((r.mle - expect).abs() < 1e-3, "{diag:?}: {}", r.mle);
    }
}

#[test]
fn rotating_spectrum() {
    // eigenvalues 0.05 +- 0.7i and -0.4
    let a = [[0.05, -0.7, 0.0], [0.7, 0.05, 0.0], [0.0, 0.0, -0.4]];
    let r = mle_field(&Linear(a), [0.0; 3], &short(600.0)).unwrap();
    assert!((r.mle - 0.05).abs() < 1e-3, "{}", r.mle);
    // non-normal coupling leaves the exponent at the top eigenvalue
    let b = [[-0.1, 5.0, 0.0], [0.0, -0.2, 0.0], [1.0, 0.0, 0.08]];
    let r = mle_field(&Linear(b), [0.0; 3], &short(800.0)).unwrap();
    assert!((r.mle - 0.08).abs() < 1e-3, "{}", r.mle);
}

#[test]
fn two_trajectory_mode_agrees_on_stable_linear_flow() {
    let a = [[-0.1, 0.0, 0.0], [0.0, -0.2, 0.0], [0.0, 0.0, -0.5]];
    let cfg = MleConfig {
        mode: MleMode::TwoTrajectory,
        ..short(400.0)
    };
    let r = mle_field(&Linear(a), [0.0; 3], &cfg).unwrap();
    assert!((r.mle + 0.1).abs() < 1e-3, "{}", r.mle);
}

#[test]
fn fractional_linear_growth_rate() {
    // D^q x = l x grows like E_q(l t^q) ~ exp(l^(1/q) t) / q
    let (q, l) = (0.9, 0.1);
    let a = [[l, 0.0, 0.0], [0.0, -0.3, 0.0], [0.0, 0.0, -0.6]];
    let fo = FOConfig {
        q,
        h: 0.02,
        ..FOConfig::default()
    };
    let r = mle_fo_field(&Linear(a), [0.0; 3], &short(400.0), &fo).unwrap();
    let expect = l.powf(1.0 / q);
    assert!((r.mle - expect).abs() < 1e-3, "{} vs {expect}", r.mle);
}

fn cycle_cfg(tau: f64) -> MleConfig {
    MleConfig {
        t_total: 4000.0,
        renorm_interval: tau,
        integrator: IntegratorConfig::precise(),
        ..MleConfig::default()
    }
}

#[test]
fn renormalization_interval_barely_matters_on_a_cycle() {
    let p = SystemParams::preset(0.05);
    let x0 = State3::new(0.15, 0.0, 0.0);
    let a = mle_io(&p, x0, &cycle_cfg(1.0)).unwrap();
    let b = mle_io(&p, x0, &cycle_cfg(0.5)).unwrap();
    assert!((a.mle - b.mle).abs() < 1e-3, "{} vs {}", a.mle, b.mle);
    assert!(a.mle.abs() < 1e-4 && b.mle.abs() < 1e-4);
}

#[test]
fn mirrored_start_gives_the_same_exponent() {
    let p = SystemParams::preset(0.052);
    let x0 = State3::new(1.0, 1.0, -1.0);
    let cfg = MleConfig {
        t_total: 1500.0,
        ..MleConfig::default()
    };
    let a = mle_io(&p, x0, &cfg).unwrap();
    let b = mle_io(&p, mirror(x0), &cfg).unwrap();
    assert_eq!(a.mle, b.mle);
    assert!(a.mle > 1e-3);
}
