//! Largest Lyapunov exponent by Benettin-style renormalization.
//!
//! Integer order: the state is integrated jointly with a tangent vector (or a
//! nearby companion trajectory) and the separation is renormalized every `tau`
//! time units. Fractional order: the same extended system is driven through
//! the ABM solver; because the tangent equation is linear, renormalizing the
//! tangent block of the whole stored history keeps the memory exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fode::{AbmSolver, FOConfig, Memory};
use crate::rk::{integrate_observed, DormandPrince, IntegratorConfig, StepStats, Termination, Trajectory};
use crate::system::{Linearized, State3, SystemParams, VectorField};

/// Values of this order and below count as a zero exponent.
pub const DEFAULT_ZERO_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MleMode {
    TangentLinear,
    TwoTrajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularity {
    Regular,
    Chaotic,
}

impl Regularity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regularity::Regular => "regular",
            Regularity::Chaotic => "chaotic",
        }
    }
}

/// How the exponent is read off the accumulated log growth `S(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MleEstimator {
    /// `S(T) / T`, the classical running average.
    Mean,
    /// Least-squares slope of `S(t)` over all renormalization times. Bounded
    /// oscillations of `S` on slow cycles bias this far less than the mean.
    Fit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MleConfig {
    pub t_total: f64,
    pub t_transient: f64,
    pub renorm_interval: f64,
    /// Separation for the two-trajectory mode; tangent runs start from a unit
    /// vector and this scale only enters the reported log ratios.
    pub delta0: f64,
    pub mode: MleMode,
    pub estimator: MleEstimator,
    pub threshold: f64,
    pub integrator: IntegratorConfig,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            t_total: 8000.0,
            t_transient: 1000.0,
            renorm_interval: 1.0,
            delta0: 1e-8,
            mode: MleMode::TangentLinear,
            estimator: MleEstimator::Fit,
            threshold: DEFAULT_ZERO_THRESHOLD,
            integrator: IntegratorConfig::precise(),
        }
    }
}

impl MleConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.renorm_interval > 0.0) {
            return bad("renorm_interval must be positive");
        }
        if !(self.delta0 > 0.0) {
            return bad("delta0 must be positive");
        }
        if !(self.t_transient >= 0.0 && self.t_transient < self.t_total) {
            return bad("need 0 <= t_transient < t_total");
        }
        self.integrator.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleResult {
    /// The estimate selected by the configured estimator.
    pub mle: f64,
    pub mean: f64,
    pub slope: f64,
    /// `(time, running mean)` after each renormalization past the transient.
    pub series: Vec<(f64, f64)>,
    pub verdict: Regularity,
    pub threshold: f64,
    /// Time covered by the estimate.
    pub elapsed: f64,
}

pub fn classify_mle(mle: f64, threshold: f64) -> Regularity {
    if mle > threshold {
        Regularity::Chaotic
    } else {
        Regularity::Regular
    }
}

struct Accumulator {
    t_transient: f64,
    estimator: MleEstimator,
    origin: Option<f64>,
    sum: f64,
    series: Vec<(f64, f64)>,
    // sums for the least-squares fit, times relative to the origin
    fit_n: f64,
    fit_t: f64,
    fit_s: f64,
    fit_tt: f64,
    fit_ts: f64,
}

impl Accumulator {
    fn new(cfg: &MleConfig) -> Self {
        Self {
            t_transient: cfg.t_transient,
            estimator: cfg.estimator,
            origin: None,
            sum: 0.0,
            series: Vec::new(),
            fit_n: 1.0,
            fit_t: 0.0,
            fit_s: 0.0,
            fit_tt: 0.0,
            fit_ts: 0.0,
        }
    }

    /// Log growth over `[t_start, t_end]`; intervals starting inside the
    /// transient are discarded.
    fn record(&mut self, t_start: f64, t_end: f64, log_growth: f64) {
        if t_start < self.t_transient - 1e-9 {
            return;
        }
        let origin = *self.origin.get_or_insert(t_start);
        self.sum += log_growth;
        let t = t_end - origin;
        self.series.push((t_end, self.sum / t));
        self.fit_n += 1.0;
        self.fit_t += t;
        self.fit_s += self.sum;
        self.fit_tt += t * t;
        self.fit_ts += t * self.sum;
    }

    fn slope(&self) -> f64 {
        let var = self.fit_tt - self.fit_t * self.fit_t / self.fit_n;
        if !(var > 0.0) {
            return 0.0;
        }
        (self.fit_ts - self.fit_t * self.fit_s / self.fit_n) / var
    }

    fn mean(&self) -> f64 {
        self.series.last().map(|s| s.1).unwrap_or(0.0)
    }

    /// Estimate and accumulated time at the last renormalization.
    fn partial(&self) -> (f64, f64) {
        match (self.origin, self.series.last()) {
            (Some(origin), Some(&(t, _))) => {
                let est = match self.estimator {
                    MleEstimator::Mean => self.mean(),
                    MleEstimator::Fit => self.slope(),
                };
                (est, t - origin)
            }
            _ => (0.0, 0.0),
        }
    }

    fn finish(self, threshold: f64) -> MleResult {
        let (mle, elapsed) = self.partial();
        MleResult {
            elapsed,
            mean: self.mean(),
            slope: self.slope(),
            mle,
            series: self.series,
            verdict: classify_mle(mle, threshold),
            threshold,
        }
    }
}

/// State plus tangent vector under the linearized flow.
pub struct TangentSystem<'a, F>(pub &'a F);

impl<F: Linearized<3>> VectorField<6> for TangentSystem<'_, F> {
    #[inline]
    fn eval(&self, y: &[f64; 6]) -> [f64; 6] {
        let x = [y[0], y[1], y[2]];
        let f = self.0.eval(&x);
        let j = self.0.jacobian(&x);
        let v = [y[3], y[4], y[5]];
        let mut out = [f[0], f[1], f[2], 0.0, 0.0, 0.0];
        for r in 0..3 {
            out[3 + r] = j[r][0] * v[0] + j[r][1] * v[1] + j[r][2] * v[2];
        }
        out
    }
}

/// Two copies of the same field, integrated with shared steps.
struct PairSystem<'a, F>(&'a F);

impl<F: VectorField<3>> VectorField<6> for PairSystem<'_, F> {
    #[inline]
    fn eval(&self, y: &[f64; 6]) -> [f64; 6] {
        let a = self.0.eval(&[y[0], y[1], y[2]]);
        let b = self.0.eval(&[y[3], y[4], y[5]]);
        [a[0], a[1], a[2], b[0], b[1], b[2]]
    }
}

fn norm3(v: &[f64]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn initial_direction() -> [f64; 3] {
    let s = 1.0 / 3f64.sqrt();
    [s, s, s]
}

fn escaped(y: &[f64], radius: f64) -> bool {
    y.iter().any(|v| !v.is_finite() || v.abs() > radius)
}

/// Integrate the state together with a tangent vector and return both the
/// sampled state trajectory and the exponent estimate.
///
/// Both blocks take part in the step-size control; with the state alone the
/// steps near a fixed point grow far past what the tangent can tolerate.
/// The tangent is renormalized at the first step
/// end at least `renorm_interval` after the previous renormalization. On
/// escape the estimate covers the time before the escape.
pub fn integrate_with_mle<F: Linearized<3>>(
    field: &F,
    x0: [f64; 3],
    integ: &IntegratorConfig,
    cfg: &MleConfig,
) -> Result<(Trajectory, MleResult)> {
    if !(cfg.renorm_interval > 0.0) {
        return Err(Error::InvalidConfig("renorm_interval must be positive".into()));
    }
    let sys = TangentSystem(field);
    let v = initial_direction();
    let y0 = [x0[0], x0[1], x0[2], v[0], v[1], v[2]];
    let mut acc = Accumulator::new(cfg);
    let mut last = 0.0;
    let traj = integrate_observed::<_, 6, 3>(&sys, y0, integ, 6, |stepper| {
        let t = stepper.t();
        if t - last < cfg.renorm_interval && t < integ.t_max {
            return;
        }
        let mut y = *stepper.state();
        let n = norm3(&y[3..]);
        acc.record(last, t, n.ln());
        last = t;
        if n > 0.0 && n.is_finite() {
            for v in &mut y[3..] {
                *v /= n;
            }
            stepper.set_state(y);
        }
    })?;
    Ok((traj, acc.finish(cfg.threshold)))
}

/// Largest exponent of any linearizable 3-D field, integer order.
pub fn mle_field<F: Linearized<3>>(field: &F, x0: [f64; 3], cfg: &MleConfig) -> Result<MleResult> {
    cfg.validate()?;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidState(format!("non-finite initial state {x0:?}")));
    }
    let tau = cfg.renorm_interval;
    let n_intervals = (cfg.t_total / tau - 1e-9).ceil() as usize;
    let mut acc = Accumulator::new(cfg);
    let radius = cfg.integrator.escape_radius;

    let escape_error = |acc: &Accumulator, t: f64| {
        let (partial_mle, elapsed) = acc.partial();
        Error::MleEscaped { t, partial_mle, elapsed }
    };

    match cfg.mode {
        MleMode::TangentLinear => {
            let integ = IntegratorConfig {
                t_max: cfg.t_total,
                ..cfg.integrator
            };
            let (traj, result) = integrate_with_mle(field, x0, &integ, cfg)?;
            return match traj.status {
                Termination::Completed => Ok(result),
                Termination::Escaped { t } => Err(Error::MleEscaped {
                    t,
                    partial_mle: result.mle,
                    elapsed: result.elapsed,
                }),
                Termination::StepFailure { t } => Err(Error::StepFailure { t, h: cfg.integrator.h_min }),
            };
        }
        MleMode::TwoTrajectory => {
            let sys = PairSystem(field);
            let d = initial_direction();
            let d0 = cfg.delta0;
            let y0 = [
                x0[0],
                x0[1],
                x0[2],
                x0[0] + d0 * d[0],
                x0[1] + d0 * d[1],
                x0[2] + d0 * d[2],
            ];
            let mut stepper = DormandPrince::new(&sys, 0.0, y0, &cfg.integrator);
            for k in 1..=n_intervals {
                let t_end = (k as f64 * tau).min(cfg.t_total);
                stepper.advance_to(t_end, |_| {})?;
                let mut y = *stepper.state();
                if escaped(&y, radius) {
                    return Err(escape_error(&acc, t_end));
                }
                let sep = [y[3] - y[0], y[4] - y[1], y[5] - y[2]];
                let n = norm3(&sep);
                acc.record(t_end - tau, t_end, (n / d0).ln());
                if n > 0.0 {
                    for i in 0..3 {
                        y[3 + i] = y[i] + sep[i] * d0 / n;
                    }
                    stepper.set_state(y);
                }
            }
        }
    }
    Ok(acc.finish(cfg.threshold))
}

/// Largest exponent of the integer-order economic system.
pub fn mle_io(p: &SystemParams, x0: State3, cfg: &MleConfig) -> Result<MleResult> {
    p.validate()?;
    mle_field(p, x0.0, cfg)
}

/// Largest exponent of the commensurate fractional system of order `fo.q`.
/// `cfg.integrator` is unused; `fo.h` sets the step and `fo.escape_radius`
/// the divergence bound.
/// Fractional-order counterpart of [`integrate_with_mle`]: one full-memory
/// ABM run of state and tangent, sampled every `output_every` steps, with
/// the tangent renormalized every `round(renorm_interval / h)` steps.
pub fn integrate_fo_with_mle<F: Linearized<3>>(
    field: &F,
    x0: [f64; 3],
    cfg: &MleConfig,
    fo: &FOConfig,
) -> Result<(Trajectory, MleResult)> {
    cfg.validate()?;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidState(format!("non-finite initial state {x0:?}")));
    }
    let fo = FOConfig {
        t_max: cfg.t_total,
        memory: Memory::Full,
        ..*fo
    };
    fo.validate()?;
    let steps = fo.steps();
    if steps > fo.max_steps {
        return Err(Error::MemoryLimit {
            requested: steps,
            cap: fo.max_steps,
        });
    }
    let renorm_every = ((cfg.renorm_interval / fo.h).round() as usize).max(1);
    let sys = TangentSystem(field);
    let v = initial_direction();
    let y0 = [x0[0], x0[1], x0[2], v[0], v[1], v[2]];
    let mut solver = AbmSolver::new(&sys, y0, &fo);
    let mut acc = Accumulator::new(cfg);
    let mut last_renorm = 0.0;
    let mut times = vec![0.0];
    let mut states = vec![x0];
    let mut status = Termination::Completed;
    for n in 1..=steps {
        solver.step();
        let t = n as f64 * fo.h;
        let y = *solver.state();
        let x = [y[0], y[1], y[2]];
        if escaped(&x, fo.escape_radius) {
            status = Termination::Escaped { t };
            break;
        }
        if n % fo.output_every == 0 {
            times.push(t);
            states.push(x);
        }
        if n % renorm_every != 0 && n != steps {
            continue;
        }
        let norm = norm3(&y[3..]);
        acc.record(last_renorm, t, norm.ln());
        last_renorm = t;
        if norm > 0.0 {
            solver.scale_components(3..6, 1.0 / norm);
        }
    }
    let traj = Trajectory {
        dt: fo.h * fo.output_every as f64,
        times,
        states,
        status,
        stats: StepStats {
            accepted: solver.n(),
            ..StepStats::default()
        },
    };
    Ok((traj, acc.finish(cfg.threshold)))
}

pub fn mle_fo_field<F: Linearized<3>>(
    field: &F,
    x0: [f64; 3],
    cfg: &MleConfig,
    fo: &FOConfig,
) -> Result<MleResult> {
    let (traj, result) = integrate_fo_with_mle(field, x0, cfg, fo)?;
    match traj.status {
        Termination::Escaped { t } => Err(Error::MleEscaped {
            t,
            partial_mle: result.mle,
            elapsed: result.elapsed,
        }),
        _ => Ok(result),
    }
}

pub fn mle_fo(
    p: &SystemParams,
    q: f64,
    x0: State3,
    cfg: &MleConfig,
    fo: &FOConfig,
) -> Result<MleResult> {
    p.validate()?;
    let fo = FOConfig { q, ..*fo };
    mle_fo_field(p, x0.0, cfg, &fo)
}
