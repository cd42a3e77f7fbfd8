//! Adams–Bashforth–Moulton predictor–corrector for commensurate Caputo
//! systems `D^q x = f(x)`, `0 < q <= 1`, following Diethelm, Ford & Freed.
//!
//! The whole history enters every step, so a run of `N` steps costs
//! `O(N^2)` right-hand-side weight products.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::rk::{StepStats, Termination, Trajectory};
use crate::system::{mirror, State3, SystemParams, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Memory {
    Full,
    /// Only the last `steps` history terms are summed. Benchmarking aid, not
    /// the Caputo operator.
    Window { steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FOConfig {
    pub q: f64,
    pub h: f64,
    pub t_max: f64,
    pub escape_radius: f64,
    pub corrector_iterations: usize,
    pub memory: Memory,
    /// Keep every `output_every`-th step in the returned trajectory.
    pub output_every: usize,
    pub max_steps: usize,
}

impl Default for FOConfig {
    fn default() -> Self {
        Self {
            q: 0.9995,
            h: 0.05,
            t_max: 3000.0,
            escape_radius: 1e3,
            corrector_iterations: 1,
            memory: Memory::Full,
            output_every: 2,
            max_steps: 2_000_000,
        }
    }
}

impl FOConfig {
    pub fn steps(&self) -> usize {
        (self.t_max / self.h - 1e-9).ceil() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.q > 0.0 && self.q <= 1.0) {
            return bad(format!("fractional order {} outside (0, 1]", self.q));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad("step h must be positive".into());
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad("t_max must be positive".into());
        }
        if !(self.escape_radius > 0.0) {
            return bad("escape_radius must be positive".into());
        }
        if self.corrector_iterations == 0 || self.output_every == 0 {
            return bad("corrector_iterations and output_every must be at least 1".into());
        }
        if let Memory::Window { steps } = self.memory {
            if steps == 0 {
                return bad("memory window must hold at least one step".into());
            }
        }
        Ok(())
    }
}

/// Quadrature weights for the step `n -> n + 1`, indexed by `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct AbmWeights {
    /// `b_{j,n+1}`, `j = 0..=n`.
    pub predictor: Vec<f64>,
    /// `a_{j,n+1}`, `j = 0..=n+1`.
    pub corrector: Vec<f64>,
    /// `h^q / Gamma(q + 1)`
    pub predictor_norm: f64,
    /// `h^q / Gamma(q + 2)`
    pub corrector_norm: f64,
}

/// Weights of the fractional rectangle (predictor) and trapezoid
/// (corrector) rules, before the common `1 / Gamma(q)` factor.
pub fn abm_weights(q: f64, h: f64, n: usize) -> AbmWeights {
    let hq = h.powf(q);
    let bp = hq / q;
    let ac = hq / (q * (q + 1.0));
    let nf = n as f64;
    let predictor = (0..=n)
        .map(|j| {
            let k = (n - j) as f64;
            bp * ((k + 1.0).powf(q) - k.powf(q))
        })
        .collect();
    let corrector = (0..=n + 1)
        .map(|j| {
            if j == 0 {
                ac * (nf.powf(q + 1.0) - (nf - q) * (nf + 1.0).powf(q))
            } else if j == n + 1 {
                ac
            } else {
                let k = (n - j) as f64;
                ac * ((k + 2.0).powf(q + 1.0) + k.powf(q + 1.0) - 2.0 * (k + 1.0).powf(q + 1.0))
            }
        })
        .collect();
    AbmWeights {
        predictor,
        corrector,
        predictor_norm: hq / gamma(q + 1.0),
        corrector_norm: hq / gamma(q + 2.0),
    }
}

/// Weight tables indexed by the lag `k = n - j`, already divided by
/// `Gamma(q)`.
#[derive(Debug, Clone)]
struct Kernel {
    q: f64,
    /// `b` at lag k
    pred: Vec<f64>,
    /// interior `a` at lag k
    corr: Vec<f64>,
    /// `a_{0,n+1}` scale
    corr_scale: f64,
}

impl Kernel {
    fn new(q: f64, h: f64, len: usize) -> Self {
        let g = gamma(q);
        let hq = h.powf(q);
        let bp = hq / q / g;
        let ac = hq / (q * (q + 1.0)) / g;
        let pred = (0..len)
            .map(|k| {
                let k = k as f64;
                bp * ((k + 1.0).powf(q) - k.powf(q))
            })
            .collect();
        let corr = (0..len)
            .map(|k| {
                let k = k as f64;
                ac * ((k + 2.0).powf(q + 1.0) + k.powf(q + 1.0) - 2.0 * (k + 1.0).powf(q + 1.0))
            })
            .collect();
        Self {
            q,
            pred,
            corr,
            corr_scale: ac,
        }
    }

    fn corr_first(&self, n: usize) -> f64 {
        let nf = n as f64;
        let q = self.q;
        self.corr_scale * (nf.powf(q + 1.0) - (nf - q) * (nf + 1.0).powf(q))
    }

    fn corr_last(&self) -> f64 {
        self.corr_scale
    }

    fn ensure(&mut self, h: f64, len: usize) {
        if self.pred.len() < len {
            *self = Kernel::new(self.q, h, len.next_power_of_two());
        }
    }
}

/// Predictor–corrector state: initial value plus the history of
/// right-hand-side values.
pub struct AbmSolver<'a, F, const N: usize> {
    field: &'a F,
    h: f64,
    y0: [f64; N],
    y: [f64; N],
    history: Vec<[f64; N]>,
    kernel: Kernel,
    corrector_iterations: usize,
    window: Option<usize>,
}

impl<'a, F: VectorField<N>, const N: usize> AbmSolver<'a, F, N> {
    pub fn new(field: &'a F, y0: [f64; N], cfg: &FOConfig) -> Self {
        let expected = cfg.steps().min(cfg.max_steps) + 1;
        let mut history = Vec::with_capacity(expected);
        history.push(field.eval(&y0));
        Self {
            field,
            h: cfg.h,
            y0,
            y: y0,
            history,
            kernel: Kernel::new(cfg.q, cfg.h, expected.max(16)),
            corrector_iterations: cfg.corrector_iterations,
            window: match cfg.memory {
                Memory::Full => None,
                Memory::Window { steps } => Some(steps),
            },
        }
    }

    /// Steps taken so far.
    pub fn n(&self) -> usize {
        self.history.len() - 1
    }

    pub fn t(&self) -> f64 {
        self.n() as f64 * self.h
    }

    pub fn state(&self) -> &[f64; N] {
        &self.y
    }

    /// Multiply components `range` of the initial value, the current state
    /// and every stored right-hand side by `s`. For a component block whose
    /// dynamics are linear in that block this rescales the solution exactly.
    pub fn scale_components(&mut self, range: std::ops::Range<usize>, s: f64) {
        for i in range.clone() {
            self.y0[i] *= s;
            self.y[i] *= s;
        }
        for f in &mut self.history {
            for i in range.clone() {
                f[i] *= s;
            }
        }
    }

    /// Advance one step of size `h`.
    pub fn step(&mut self) {
        let n = self.n();
        self.kernel.ensure(self.h, n + 2);
        let k = &self.kernel;
        let lo = match self.window {
            Some(w) if n + 1 > w => n + 1 - w,
            _ => 0,
        };

        let mut pred_sum = [0.0; N];
        let mut corr_sum = [0.0; N];
        if lo == 0 {
            let f0 = &self.history[0];
            let (b0, a0) = (k.pred[n], k.corr_first(n));
            for i in 0..N {
                pred_sum[i] += b0 * f0[i];
                corr_sum[i] += a0 * f0[i];
            }
        }
        for j in lo.max(1)..=n {
            let lag = n - j;
            let (b, a) = (k.pred[lag], k.corr[lag]);
            let fj = &self.history[j];
            for i in 0..N {
                pred_sum[i] += b * fj[i];
                corr_sum[i] += a * fj[i];
            }
        }

        let predicted: [f64; N] = std::array::from_fn(|i| self.y0[i] + pred_sum[i]);
        let last = k.corr_last();
        let mut current = predicted;
        for _ in 0..self.corrector_iterations {
            let f = self.field.eval(&current);
            current = std::array::from_fn(|i| self.y0[i] + corr_sum[i] + last * f[i]);
        }
        self.y = current;
        self.history.push(self.field.eval(&current));
    }
}

fn max_abs<const N: usize>(y: &[f64; N]) -> f64 {
    y.iter().fold(0.0f64, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v.abs()) })
}

/// Solve `D^q x = f(x)`, `x(0) = x0`, on `[0, t_max]`.
pub fn integrate_fo_field<F: VectorField<N>, const N: usize>(
    field: &F,
    x0: [f64; N],
    cfg: &FOConfig,
) -> Result<Trajectory<N>> {
    cfg.validate()?;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidState(format!("non-finite initial state {x0:?}")));
    }
    let steps = cfg.steps();
    if steps > cfg.max_steps {
        return Err(Error::MemoryLimit {
            requested: steps,
            cap: cfg.max_steps,
        });
    }
    let mut solver = AbmSolver::new(field, x0, cfg);
    let mut times = vec![0.0];
    let mut states = vec![x0];
    let mut status = Termination::Completed;
    for n in 1..=steps {
        solver.step();
        let y = *solver.state();
        if max_abs(&y) > cfg.escape_radius {
            status = Termination::Escaped { t: n as f64 * cfg.h };
            break;
        }
        if n % cfg.output_every == 0 {
            times.push(n as f64 * cfg.h);
            states.push(y);
        }
    }
    Ok(Trajectory {
        dt: cfg.h * cfg.output_every as f64,
        times,
        states,
        status,
        stats: StepStats {
            accepted: solver.n(),
            ..StepStats::default()
        },
    })
}

pub fn integrate_fo(p: &SystemParams, x0: State3, cfg: &FOConfig) -> Result<Trajectory> {
    p.validate()?;
    integrate_fo_field(p, x0.0, cfg)
}

pub fn integrate_fo_pair(
    p: &SystemParams,
    x0: State3,
    cfg: &FOConfig,
) -> Result<(Trajectory, Trajectory)> {
    Ok((integrate_fo(p, x0, cfg)?, integrate_fo(p, mirror(x0), cfg)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant;
    impl VectorField<1> for Constant {
        fn eval(&self, _: &[f64; 1]) -> [f64; 1] {
            [1.0]
        }
    }

    struct Linear(f64);
    impl VectorField<1> for Linear {
        fn eval(&self, x: &[f64; 1]) -> [f64; 1] {
            [self.0 * x[0]]
        }
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
    fn q_one_predictor_weights_are_h() {
        let w = abm_weights(1.0, 0.1, 7);
        assert_eq!(w.predictor.len(), 8);
        for b in &w.predictor {
            assert!((b - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn q_one_corrector_is_trapezoid() {
        let h = 0.1;
        let w = abm_weights(1.0, h, 7);
        assert_eq!(w.corrector.len(), 9);
        assert!((w.corrector[0] - h / 2.0).abs() < 1e-15);
        assert!((w.corrector[8] - h / 2.0).abs() < 1e-15);
        for a in &w.corrector[1..8] {
            assert!((a - h).abs() < 1e-14);
        }
        assert!((w.predictor_norm - h).abs() < 1e-15);
        assert!((w.corrector_norm - h / 2.0).abs() < 1e-15);
    }

    #[test]
    fn near_one_weights_positive_and_monotone() {
        let w = abm_weights(0.9995, 0.05, 10);
        assert!(w.predictor.iter().chain(&w.corrector).all(|v| v.is_finite() && *v > 0.0));
        // older samples weigh less
        assert!(w.predictor.windows(2).all(|p| p[0] <= p[1]));
        assert!(w.corrector[1..=10].windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn constant_forcing_matches_power_law() {
        for q in [0.5, 0.8, 0.9995] {
            let traj = integrate_fo_field(&Constant, [0.0], &cfg(q, 1e-3, 2.0)).unwrap();
            let g = gamma(q + 1.0);
            for (t, x) in traj.times.iter().zip(&traj.states).step_by(97) {
                assert!((x[0] - t.powf(q) / g).abs() < 1e-4, "q={q} t={t}");
            }
        }
    }

    #[test]
    fn q_one_reduces_to_trapezoid_pece() {
        // for x' = -x the PECE trapezoid step is a rational function of h
        let h = 0.1;
        let traj = integrate_fo_field(&Linear(-1.0), [1.0], &cfg(1.0, h, 1.0)).unwrap();
        let mut y = 1.0f64;
        for x in traj.states.iter().skip(1) {
            let pred = y - h * y;
            y = y + h / 2.0 * (-y - pred);
            assert!((x[0] - y).abs() < 1e-14);
        }
    }

    #[test]
    fn incremental_equals_direct_resummation() {
        let p = SystemParams::preset(0.05);
        let c = FOConfig { q: 0.97, t_max: 10.0, output_every: 1, ..FOConfig::default() };
        let traj = integrate_fo(&p, State3::new(1.0, 1.0, -1.0), &c).unwrap();
        let w = Kernel::new(c.q, c.h, 512);
        let f: Vec<[f64; 3]> = traj.states.iter().map(|s| p.eval(s)).collect();
        let y0 = traj.states[0];
        for n in [0usize, 1, 17, 150, 199] {
            let mut ps = [0.0; 3];
            let mut cs = [0.0; 3];
            for i in 0..3 {
                ps[i] += w.pred[n] * f[0][i];
                cs[i] += w.corr_first(n) * f[0][i];
            }
            for j in 1..=n {
                for i in 0..3 {
                    ps[i] += w.pred[n - j] * f[j][i];
                    cs[i] += w.corr[n - j] * f[j][i];
                }
            }
            let pred: [f64; 3] = std::array::from_fn(|i| y0[i] + ps[i]);
            let fp = p.eval(&pred);
            let next: [f64; 3] = std::array::from_fn(|i| y0[i] + cs[i] + w.corr_last() * fp[i]);
            assert_eq!(next, traj.states[n + 1], "step {n}");
        }
    }

    #[test]
    fn mirror_symmetry_is_exact() {
        let p = SystemParams::preset(0.05);
        let c = FOConfig { t_max: 50.0, ..FOConfig::default() };
        let (a, b) = integrate_fo_pair(&p, State3::new(1.0, 1.0, 1.0), &c).unwrap();
        assert_eq!(a.mirrored().states, b.states);
    }

    #[test]
    fn window_memory_differs_from_full() {
        let p = SystemParams::preset(0.05);
        let full = FOConfig { q: 0.9, t_max: 20.0, ..FOConfig::default() };
        let short = FOConfig { memory: Memory::Window { steps: 50 }, ..full };
        let a = integrate_fo(&p, State3::new(1.0, 1.0, 1.0), &full).unwrap();
        let b = integrate_fo(&p, State3::new(1.0, 1.0, 1.0), &short).unwrap();
        assert_eq!(a.states[..25], b.states[..25]);
        assert_ne!(a.last_state(), b.last_state());
    }

    #[test]
    fn step_cap_is_enforced() {
        let c = FOConfig { t_max: 100.0, h: 0.01, max_steps: 1000, ..FOConfig::default() };
        assert_eq!(
            integrate_fo(&SystemParams::default(), State3::ORIGIN, &c),
            Err(Error::MemoryLimit { requested: 10_000, cap: 1000 })
        );
    }

    #[test]
    fn invalid_order_rejected() {
        let c = FOConfig { q: 1.2, ..FOConfig::default() };
        assert!(c.validate().is_err());
        let c = FOConfig { q: 0.0, ..FOConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn origin_is_fixed() {
        let c = FOConfig { t_max: 10.0, ..FOConfig::default() };
        let traj = integrate_fo(&SystemParams::default(), State3::ORIGIN, &c).unwrap();
        assert!(traj.states.iter().all(|s| *s == [0.0; 3]));
        assert_eq!(traj.len(), 101);
        assert!((traj.dt - 0.1).abs() < 1e-15);
    }
}
