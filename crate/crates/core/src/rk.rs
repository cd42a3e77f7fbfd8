//! Embedded Dormand–Prince 5(4) integrator with a fifth-order continuous
//! extension, in the spirit of MATLAB's `ode45`.
//!
//! The error test uses the max-norm with per-component scale
//! `max(abs_tol, rel_tol * max(|y|, |y_new|))`; a step is accepted when the
//! scaled estimate is at most one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{mirror, State3, SystemParams, VectorField};

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// continuous extension (Hairer, Nørsett & Wanner)
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepControl {
    Adaptive,
    Fixed { h: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub t_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub escape_radius: f64,
    pub dense_dt: f64,
    pub control: StepControl,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            t_max: 5000.0,
            rel_tol: 1e-3,
            abs_tol: 1e-6,
            h_init: 1e-2,
            h_min: 1e-10,
            h_max: 5.0,
            escape_radius: 1e3,
            dense_dt: 0.1,
            control: StepControl::Adaptive,
        }
    }
}

impl IntegratorConfig {
    /// Tight tolerances used for the near-bifurcation cases.
    pub fn precise() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            ..Self::default()
        }
    }

    pub fn with_t_max(self, t_max: f64) -> Self {
        Self { t_max, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad("t_max must be positive");
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.h_min > 0.0 && self.h_min <= self.h_init && self.h_init <= self.h_max) {
            return bad("step bounds must satisfy 0 < h_min <= h_init <= h_max");
        }
        if !(self.escape_radius > 0.0) {
            return bad("escape_radius must be positive");
        }
        if !(self.dense_dt > 0.0 && self.dense_dt.is_finite()) {
            return bad("dense_dt must be positive");
        }
        if let StepControl::Fixed { h } = self.control {
            if !(h > 0.0 && h.is_finite()) {
                return bad("fixed step must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Escaped { t: f64 },
    StepFailure { t: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Largest scaled error estimate among accepted steps.
    pub max_accepted_error: f64,
}

/// States sampled on the uniform grid `k * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const N: usize = 3> {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    pub status: Termination,
    pub stats: StepStats,
}

impl<const N: usize> Trajectory<N> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> Option<&[f64; N]> {
        self.states.last()
    }

    pub fn component(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(move |s| s[i])
    }

    pub fn is_completed(&self) -> bool {
        self.status == Termination::Completed
    }

    pub fn end_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

impl Trajectory<3> {
    pub fn mirrored(&self) -> Self {
        Self {
            states: self.states.iter().map(|s| mirror(State3(*s)).0).collect(),
            ..self.clone()
        }
    }
}

/// One accepted step together with its interpolant.
#[derive(Debug, Clone, Copy)]
pub struct DenseSegment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    coeffs: [[f64; N]; 5],
}

impl<const N: usize> DenseSegment<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.coeffs;
        std::array::from_fn(|i| {
            r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i])))
        })
    }
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        y[i] + h * acc
    })
}

/// Stateful Dormand–Prince stepper over an arbitrary vector field.
pub struct DormandPrince<'a, F, const N: usize> {
    field: &'a F,
    t: f64,
    y: [f64; N],
    k1: [f64; N],
    h: f64,
    rel_tol: f64,
    abs_tol: f64,
    h_min: f64,
    h_max: f64,
    fixed: Option<f64>,
    error_dims: usize,
    stats: StepStats,
}

impl<'a, F: VectorField<N>, const N: usize> DormandPrince<'a, F, N> {
    pub fn new(field: &'a F, t0: f64, y0: [f64; N], cfg: &IntegratorConfig) -> Self {
        let fixed = match cfg.control {
            StepControl::Fixed { h } => Some(h),
            StepControl::Adaptive => None,
        };
        Self {
            field,
            t: t0,
            y: y0,
            k1: field.eval(&y0),
            h: fixed.unwrap_or(cfg.h_init),
            rel_tol: cfg.rel_tol,
            abs_tol: cfg.abs_tol,
            h_min: cfg.h_min,
            h_max: cfg.h_max,
            fixed,
            error_dims: N,
            stats: StepStats::default(),
        }
    }

    /// Restrict the error test to the leading `dims` components. The
    /// remaining ones ride along on the step sequence chosen for the leading
    /// block.
    pub fn with_error_dims(mut self, dims: usize) -> Self {
        self.error_dims = dims.clamp(1, N);
        self
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64; N] {
        &self.y
    }

    /// Replace the current state; the cached first stage is recomputed.
    pub fn set_state(&mut self, y: [f64; N]) {
        self.y = y;
        self.k1 = self.field.eval(&y);
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    /// Take one accepted step that does not pass `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<DenseSegment<N>> {
        let remaining = t_limit - self.t;
        loop {
            let mut h = self.h.min(remaining);
            // avoid leaving a sliver smaller than the minimum step
            if h < remaining && remaining - h < self.h_min.max(remaining * 1e-12) {
                h = remaining;
            }
            let (y_new, k7, err, dense) = self.attempt(h);

            if let Some(hf) = self.fixed {
                self.accept(h, y_new, k7, err);
                self.h = hf;
                return Ok(dense);
            }

            if err <= 1.0 {
                self.accept(h, y_new, k7, err);
                let fac = if err == 0.0 {
                    FAC_MAX
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
                };
                // a step clipped to hit t_limit says nothing about the natural size
                let base = if h == remaining { self.h.max(h) } else { h };
                self.h = (base * fac).min(self.h_max).max(self.h_min);
                return Ok(dense);
            }

            self.stats.rejected += 1;
            let fac = if err.is_finite() {
                (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0)
            } else {
                FAC_MIN
            };
            let h_next = h * fac;
            if h_next < self.h_min {
                return Err(Error::StepFailure { t: self.t, h: h_next });
            }
            self.h = h_next;
        }
    }

    fn accept(&mut self, h: f64, y_new: [f64; N], k7: [f64; N], err: f64) {
        self.t += h;
        self.y = y_new;
        self.k1 = k7;
        self.stats.accepted += 1;
        if err > self.stats.max_accepted_error {
            self.stats.max_accepted_error = err;
        }
    }

    fn attempt(&self, h: f64) -> ([f64; N], [f64; N], f64, DenseSegment<N>) {
        let f = self.field;
        let y = &self.y;
        let k1 = &self.k1;
        let k2 = f.eval(&axpy(y, h, &[(A21, k1)]));
        let k3 = f.eval(&axpy(y, h, &[(A31, k1), (A32, &k2)]));
        let k4 = f.eval(&axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
        let k5 = f.eval(&axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f.eval(&axpy(
            y,
            h,
            &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        ));
        let y_new = axpy(
            y,
            h,
            &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let k7 = f.eval(&y_new);

        let mut err = 0.0f64;
        for i in 0..self.error_dims {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = self.abs_tol.max(self.rel_tol * y[i].abs().max(y_new[i].abs()));
            err = err.max((e / sc).abs());
        }
        if err.is_nan() || y_new.iter().any(|v| !v.is_finite()) {
            err = f64::INFINITY;
        }

        let mut coeffs = [[0.0; N]; 5];
        for i in 0..N {
            let ydiff = y_new[i] - y[i];
            let bspl = h * k1[i] - ydiff;
            coeffs[0][i] = y[i];
            coeffs[1][i] = ydiff;
            coeffs[2][i] = bspl;
            coeffs[3][i] = ydiff - h * k7[i] - bspl;
            coeffs[4][i] = h
                * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        let dense = DenseSegment { t0: self.t, h, coeffs };
        (y_new, k7, err, dense)
    }

    /// Step until exactly `t_end`, handing every accepted segment to `visit`.
    pub fn advance_to(
        &mut self,
        t_end: f64,
        mut visit: impl FnMut(&DenseSegment<N>),
    ) -> Result<()> {
        while self.t < t_end {
            let seg = self.step(t_end)?;
            visit(&seg);
        }
        Ok(())
    }
}

fn max_abs<const N: usize>(y: &[f64; N]) -> f64 {
    y.iter().fold(0.0f64, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v.abs()) })
}

/// Integrate any autonomous field from `x0` over `[0, cfg.t_max]`, sampling on
/// the `dense_dt` grid.
pub fn integrate_field<F: VectorField<N>, const N: usize>(
    field: &F,
    x0: [f64; N],
    cfg: &IntegratorConfig,
) -> Result<Trajectory<N>> {
    integrate_observed::<F, N, N>(field, x0, cfg, N, |_| {})
}

/// Like [`integrate_field`], but only the leading `M` components are sampled,
/// escape-checked and (with `error_dims = M`) error-controlled. `after_step`
/// runs after each accepted step has been sampled and may modify the trailing
/// components through [`DormandPrince::set_state`].
pub fn integrate_observed<F: VectorField<N>, const N: usize, const M: usize>(
    field: &F,
    x0: [f64; N],
    cfg: &IntegratorConfig,
    error_dims: usize,
    mut after_step: impl FnMut(&mut DormandPrince<'_, F, N>),
) -> Result<Trajectory<M>> {
    assert!(M <= N);
    cfg.validate()?;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidState(format!("non-finite initial state {x0:?}")));
    }
    let head = |y: &[f64; N]| -> [f64; M] { std::array::from_fn(|i| y[i]) };
    let n_samples = (cfg.t_max / cfg.dense_dt + 1e-9).floor() as usize + 1;
    let mut times = Vec::with_capacity(n_samples);
    let mut states = Vec::with_capacity(n_samples);
    times.push(0.0);
    states.push(head(&x0));

    let mut status = Termination::Completed;
    if max_abs(&head(&x0)) > cfg.escape_radius {
        status = Termination::Escaped { t: 0.0 };
    }
    let mut stepper = DormandPrince::new(field, 0.0, x0, cfg).with_error_dims(error_dims);
    let mut next = 1usize;
    while status == Termination::Completed && stepper.t() < cfg.t_max {
        let seg = match stepper.step(cfg.t_max) {
            Ok(seg) => seg,
            Err(Error::StepFailure { t, .. }) => {
                status = Termination::StepFailure { t };
                break;
            }
            Err(e) => return Err(e),
        };
        if max_abs(&head(stepper.state())) > cfg.escape_radius {
            status = Termination::Escaped { t: stepper.t() };
            break;
        }
        while next < n_samples {
            let ts = next as f64 * cfg.dense_dt;
            if ts > seg.t1() {
                break;
            }
            let s = if ts == seg.t1() { *stepper.state() } else { seg.eval(ts) };
            times.push(ts);
            states.push(head(&s));
            next += 1;
        }
        after_step(&mut stepper);
    }
    Ok(Trajectory {
        dt: cfg.dense_dt,
        times,
        states,
        status,
        stats: stepper.stats(),
    })
}

/// Integrate the economic system from `x0`.
pub fn integrate(p: &SystemParams, x0: State3, cfg: &IntegratorConfig) -> Result<Trajectory> {
    p.validate()?;
    integrate_field(p, x0.0, cfg)
}

/// Integrate `x0` and its mirror image.
pub fn integrate_pair(
    p: &SystemParams,
    x0: State3,
    cfg: &IntegratorConfig,
) -> Result<(Trajectory, Trajectory)> {
    Ok((integrate(p, x0, cfg)?, integrate(p, mirror(x0), cfg)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;
    impl VectorField<1> for Decay {
        fn eval(&self, x: &[f64; 1]) -> [f64; 1] {
            [-x[0]]
        }
    }

    struct Oscillator;
    impl VectorField<2> for Oscillator {
        fn eval(&self, x: &[f64; 2]) -> [f64; 2] {
            [x[1], -x[0]]
        }
    }

    struct Blowup;
    impl VectorField<1> for Blowup {
        fn eval(&self, x: &[f64; 1]) -> [f64; 1] {
            [x[0] * x[0]]
        }
    }

    fn cfg(t_max: f64) -> IntegratorConfig {
        IntegratorConfig {
            t_max,
            ..IntegratorConfig::precise()
        }
    }

    #[test]
    fn exponential_decay_endpoint() {
        let traj = integrate_field(&Decay, [1.0], &cfg(10.0)).unwrap();
        let end = traj.last_state().unwrap()[0];
        assert!(traj.is_completed());
        assert!((traj.end_time() - 10.0).abs() < 1e-12);
        assert!((end - (-10.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn dense_output_tracks_the_sine() {
        let traj = integrate_field(&Oscillator, [0.0, 1.0], &cfg(20.0)).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            assert!((s[0] - t.sin()).abs() < 1e-7, "t = {t}");
        }
        assert_eq!(traj.len(), 201);
    }

    #[test]
    fn accepted_steps_respect_tolerance() {
        let traj = integrate_field(&Oscillator, [0.0, 1.0], &IntegratorConfig::default().with_t_max(50.0)).unwrap();
        assert!(traj.stats.max_accepted_error <= 1.0);
        assert!(traj.stats.accepted > 0);
    }

    #[test]
    fn fixed_step_order_is_at_least_four() {
        let err = |h: f64| {
            let c = IntegratorConfig {
                t_max: 10.0,
                control: StepControl::Fixed { h },
                h_init: h,
                h_min: 1e-12,
                ..IntegratorConfig::default()
            };
            let traj = integrate_field(&Decay, [1.0], &c).unwrap();
            (traj.last_state().unwrap()[0] - (-10.0f64).exp()).abs()
        };
        let (e1, e2) = (err(0.2), err(0.1));
        let order = (e1 / e2).log2();
        assert!(order >= 4.0, "observed order {order}");
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let err = |tol: f64| {
            let c = IntegratorConfig {
                rel_tol: tol,
                abs_tol: tol * 1e-3,
                ..cfg(10.0)
            };
            let traj = integrate_field(&Decay, [1.0], &c).unwrap();
            (traj.last_state().unwrap()[0] - (-10.0f64).exp()).abs()
        };
        assert!(err(1e-8) < err(1e-4));
    }

    #[test]
    fn escape_is_reported() {
        let c = IntegratorConfig {
            t_max: 10.0,
            escape_radius: 100.0,
            ..IntegratorConfig::default()
        };
        let traj = integrate_field(&Blowup, [1.0], &c).unwrap();
        match traj.status {
            Termination::Escaped { t } => assert!(t < 1.0),
            other => panic!("unexpected {other:?}"),
        }
        assert!(traj.states.iter().all(|s| s[0].is_finite()));
    }

    #[test]
    fn step_underflow_is_reported() {
        let c = IntegratorConfig {
            t_max: 10.0,
            escape_radius: 1e300,
            h_min: 1e-3,
            h_init: 1e-3,
            ..IntegratorConfig::precise()
        };
        let traj = integrate_field(&Blowup, [1.0], &c).unwrap();
        assert!(matches!(traj.status, Termination::StepFailure { .. }));
    }

    #[test]
    fn origin_stays_put() {
        let p = SystemParams::preset(0.05);
        let traj = integrate(&p, State3::ORIGIN, &cfg(100.0)).unwrap();
        assert!(traj.states.iter().all(|s| *s == [0.0; 3]));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut c = IntegratorConfig::default();
        c.h_min = 1.0;
        c.h_init = 0.1;
        assert!(integrate(&SystemParams::default(), State3::ORIGIN, &c).is_err());
        let c = IntegratorConfig { t_max: -1.0, ..IntegratorConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn pair_is_mirror_exact() {
        let p = SystemParams::preset(0.052);
        let (fwd, back) = integrate_pair(&p, State3::new(1.0, 1.0, 1.0), &cfg(300.0)).unwrap();
        assert_eq!(fwd.times, back.times);
        assert_eq!(fwd.mirrored().states, back.states);
        let (z1, z2) = integrate_pair(&p, State3::ORIGIN, &cfg(50.0)).unwrap();
        assert!(z1.states.iter().chain(&z2.states).all(|s| *s == [0.0; 3]));
    }

    #[test]
    fn deterministic_rerun() {
        let p = SystemParams::preset(0.0509);
        let a = integrate(&p, State3::new(0.15, 0.0, 0.0), &cfg(200.0)).unwrap();
        let b = integrate(&p, State3::new(0.15, 0.0, 0.0), &cfg(200.0)).unwrap();
        assert_eq!(a, b);
    }
}
