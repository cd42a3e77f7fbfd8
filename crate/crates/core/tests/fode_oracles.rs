//! Fractional solver against closed forms and the integer-order reference.

use econ_attractors::fode::{integrate_fo, integrate_fo_field, FOConfig};
use econ_attractors::system::VectorField;
use econ_attractors::{integrate, IntegratorConfig, State3, SystemParams};
use statrs::function::gamma::{gamma, ln_gamma};

struct Forcing;

impl VectorField<1> for Forcing {
    fn eval(&self, _: &[f64; 1]) -> [f64; 1] {
        [1.0]
    }
}

struct Decay(f64);

impl VectorField<1> for Decay {
    fn eval(&self, x: &[f64; 1]) -> [f64; 1] {
        [-self.0 * x[0]]
    }
}

/// `E_q(z)` by its power series, summed in log space. Fine for `|z| <= 10`.
fn mittag_leffler(q: f64, z: f64) -> f64 {
    if z == 0.0 {
        return 1.0;
    }
    let lz = z.abs().ln();
    let mut s = 1.0;
    for k in 1..400 {
        let t = (k as f64 * lz - ln_gamma(q * k as f64 + 1.0)).exp();
        s += if z < 0.0 && k % 2 == 1 { -t } else { t };
        if t < 1e-18 && k > 10 {
            break;
        }
    }
    s
}

fn cfg(q: f64, h: f64, t_max: f64) -> FOConfig {
    FOConfig {
        q,
        h,
        t_max,
        output_every: 1,
        ..FOConfig::default()
    }
}

#[test]
fn series_sanity() {
    assert!((mittag_leffler(1.0, -2.0) - (-2.0f64).exp()).abs() < 1e-12);
    // E_{1/2}(-x) = exp(x^2) erfc(x); at x = 1 that is 0.4275835761558070
    assert!((mittag_leffler(0.5, -1.0) - 0.427_583_576_155_807).abs() < 1e-12);
}

#[test]
fn constant_forcing_gives_power_law() {
    for q in [0.6, 0.8, 0.9, 0.9995, 1.0] {
        let tr = integrate_fo_field(&Forcing, [0.0], &cfg(q, 0.01, 5.0)).unwrap();
        let g = gamma(q + 1.0);
        let err = tr
            .times
            .iter()
            .zip(&tr.states)
            .map(|(t, x)| (x[0] - t.powf(q) / g).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "q={q} err={err}");
    }
}

#[test]
fn linear_decay_gives_mittag_leffler() {
    for (q, lambda) in [(0.7, 1.0), (0.9, 0.5), (0.9995, 1.0), (1.0, 1.0)] {
        let tr = integrate_fo_field(&Decay(lambda), [1.0], &cfg(q, 0.005, 4.0)).unwrap();
        let err = tr
            .times
            .iter()
            .zip(&tr.states)
            .map(|(t, x)| (x[0] - mittag_leffler(q, -lambda * t.powf(q))).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "q={q} err={err}");
    }
}

fn abm_vs_rk_error(h: f64) -> f64 {
    let p = SystemParams::preset(0.05);
    let x0 = State3::new(1.0, 1.0, 1.0);
    let rk_cfg = IntegratorConfig {
        rel_tol: 1e-11,
        abs_tol: 1e-12,
        dense_dt: 0.5,
        ..IntegratorConfig::default()
    }
    .with_t_max(200.0);
    let rk = integrate(&p, x0, &rk_cfg).unwrap();
    let every = (0.5 / h).round() as usize;
    let fo = FOConfig {
        q: 1.0,
        h,
        t_max: 200.0,
        output_every: every,
        ..FOConfig::default()
    };
    let abm = integrate_fo(&p, x0, &fo).unwrap();
    assert_eq!(abm.times.len(), rk.times.len());
    rk.states
        .iter()
        .zip(&abm.states)
        .map(|(a, b)| (0..3).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

#[test]
fn integer_order_abm_tracks_rk() {
    let err = abm_vs_rk_error(0.01);
    assert!(err < 1e-3, "max deviation {err}");
}

#[test]
fn integer_order_abm_converges_with_order_at_least_one() {
    let coarse = abm_vs_rk_error(0.05);
    let fine = abm_vs_rk_error(0.025);
    let order = (coarse / fine).log2();
    assert!(order >= 1.0, "observed order {order} ({coarse} -> {fine})");
}
