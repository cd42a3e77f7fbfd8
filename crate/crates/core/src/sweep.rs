//! Bifurcation diagrams over the rate `a` (integer order) or the order `q`
//! (Caputo, ABM), overlaid for several initial conditions, and detection of
//! the intervals where those initial conditions settle on different
//! attractors.

use std::fmt::Write as _;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attractor::{AttractorSignature, MatchTolerances};
use crate::lyapunov::Regularity;
use crate::basin::{run_signature, run_signature_fo, PointConfig};
use crate::error::{Error, Result};
use crate::fode::FOConfig;
use crate::rk::{IntegratorConfig, Trajectory};
use crate::system::{mirror, State3, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    ParamA,
    OrderQ,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::ParamA => "a",
            SweepAxis::OrderQ => "q",
        }
    }
}

/// The four default initial conditions, as two mirror pairs.
pub fn default_ics() -> Vec<State3> {
    vec![
        State3::new(1.0, 1.0, 1.0),
        State3::new(-1.0, -1.0, -1.0),
        State3::new(1.0, 1.0, -1.0),
        State3::new(-1.0, -1.0, 1.0),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub range: [f64; 2],
    pub steps: usize,
    /// Include the upper end of the range. Off for `q`, whose range stops
    /// short of the integer order.
    pub closed: bool,
    /// `a` for order sweeps; ignored for `a` sweeps, which run at `q = 1`.
    pub fixed: f64,
    /// Coefficients other than `a`.
    pub base: SystemParams,
    pub ics: Vec<State3>,
    pub point: PointConfig,
    /// Order, step and memory for `q` sweeps; `q` itself is overwritten.
    pub fo: FOConfig,
    pub tolerances: MatchTolerances,
    /// Start each cell from the previous cell's endpoint for the same
    /// initial condition. Follows branches and hides coexistence.
    pub warm_start: bool,
    /// Derive a cell whose initial condition is the exact mirror of an
    /// earlier one from that cell instead of integrating it.
    pub reuse_mirrors: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self::param_a()
    }
}

impl SweepSpec {
    /// 400 values of `a` over `[0, 0.2]`. Runs are long because some cycles
    /// in the coexistence window settle only after a chaotic transient of
    /// several thousand time units.
    pub fn param_a() -> Self {
        Self {
            axis: SweepAxis::ParamA,
            range: [0.0, 0.2],
            steps: 400,
            closed: true,
            fixed: 1.0,
            base: SystemParams::default(),
            ics: default_ics(),
            point: PointConfig {
                integrator: IntegratorConfig::precise().with_t_max(20000.0),
                ..PointConfig::default()
            },
            fo: FOConfig::default(),
            tolerances: MatchTolerances::default(),
            warm_start: false,
            reuse_mirrors: true,
        }
    }

    /// First zoom of the `a` diagram.
    pub fn param_a_zoom() -> Self {
        Self {
            range: [0.0485, 0.0524],
            steps: 40,
            ..Self::param_a()
        }
    }

    /// Second zoom, inside the first.
    pub fn param_a_zoom_d() -> Self {
        Self {
            range: [0.0503, 0.0515],
            steps: 25,
            ..Self::param_a()
        }
    }

    /// `q` over `[0.98, 1)` at `a = 0.05`.
    pub fn order_q() -> Self {
        let fo = FOConfig {
            h: 0.05,
            t_max: 3000.0,
            ..FOConfig::default()
        };
        Self {
            axis: SweepAxis::OrderQ,
            range: [0.98, 1.0],
            steps: 40,
            closed: false,
            fixed: 0.05,
            point: PointConfig {
                integrator: IntegratorConfig::precise().with_t_max(fo.t_max),
                ..PointConfig::default()
            },
            fo,
            ..Self::param_a()
        }
    }

    /// A second fractional window is reported "at about a=0.985", outside
    /// the studied range of `a`; this preset reads it as an order and scans
    /// `q` around 0.985 at `a = 0.05`.
    pub fn order_q_near_0985() -> Self {
        Self {
            range: [0.98, 0.99],
            steps: 20,
            ..Self::order_q()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.range[0].is_finite() && self.range[1].is_finite() && self.range[0] < self.range[1]) {
            return bad("sweep range is empty");
        }
        if self.steps == 0 || (self.closed && self.steps < 2 && self.range[0] != self.range[1]) {
            return bad("sweep needs at least two steps");
        }
        if self.ics.is_empty() {
            return bad("sweep needs at least one initial condition");
        }
        if self.ics.iter().any(|x| !x.is_finite()) {
            return bad("non-finite initial condition");
        }
        if self.axis == SweepAxis::OrderQ && !(self.range[0] > 0.0 && self.range[1] <= 1.0) {
            return bad("order range must lie in (0, 1]");
        }
        self.params_at(self.range[0]).validate()?;
        self.point.validate()?;
        if self.axis == SweepAxis::OrderQ {
            self.fo.validate()?;
        }
        Ok(())
    }

    /// Axis values, evenly spaced.
    pub fn values(&self) -> Vec<f64> {
        let [lo, hi] = self.range;
        let n = self.steps;
        let div = if self.closed { (n - 1).max(1) } else { n } as f64;
        (0..n)
            .map(|k| if self.closed && k + 1 == n && n > 1 { hi } else { lo + (hi - lo) * k as f64 / div })
            .collect()
    }

    pub fn spacing(&self) -> f64 {
        let div = if self.closed { (self.steps - 1).max(1) } else { self.steps };
        (self.range[1] - self.range[0]) / div as f64
    }

    pub fn params_at(&self, v: f64) -> SystemParams {
        match self.axis {
            SweepAxis::ParamA => self.base.with_a(v),
            SweepAxis::OrderQ => self.base.with_a(self.fixed),
        }
    }

    fn fo_at(&self, v: f64) -> FOConfig {
        FOConfig { q: v, ..self.fo }
    }

    /// For each initial condition, the index of an earlier one it mirrors.
    fn mirror_sources(&self) -> Vec<Option<usize>> {
        self.ics
            .iter()
            .enumerate()
            .map(|(j, x)| {
                if !self.reuse_mirrors || self.warm_start {
                    return None;
                }
                self.ics[..j].iter().position(|y| mirror(*y) == *x)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellStatus {
    Settled { signature: AttractorSignature },
    Escaped { t: f64 },
    Failed { message: String },
}

/// One (axis value, initial condition) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramCell {
    pub value: f64,
    pub ic_index: usize,
    pub x0: State3,
    /// Post-transient maxima of `x1`; the final `x1` for a run with no
    /// maxima.
    pub peaks: Vec<f64>,
    /// Last state of the run.
    pub end: Option<State3>,
    pub status: CellStatus,
}

impl DiagramCell {
    pub fn signature(&self) -> Option<&AttractorSignature> {
        match &self.status {
            CellStatus::Settled { signature } => Some(signature),
            _ => None,
        }
    }

    fn mirrored(&self, ic_index: usize, x0: State3) -> Self {
        let (status, peaks) = match &self.status {
            CellStatus::Settled { signature } => {
                let s = signature.mirrored();
                let end = self.end.map(mirror);
                let peaks = if s.peak_set.is_empty() {
                    end.map(|x| vec![x.x1()]).unwrap_or_default()
                } else {
                    s.peak_set.clone()
                };
                (CellStatus::Settled { signature: s }, peaks)
            }
            other => (other.clone(), Vec::new()),
        };
        Self {
            value: self.value,
            ic_index,
            x0,
            peaks,
            end: self.end.map(mirror),
            status,
        }
    }
}

/// An axis interval and how many grid values it spans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationDiagram {
    pub axis: SweepAxis,
    pub fixed: f64,
    pub values: Vec<f64>,
    /// The diagram shows what these initial conditions reach, not every
    /// attractor present.
    pub ics: Vec<State3>,
    pub tolerances: MatchTolerances,
    /// Indexed `[value][ic]`.
    pub cells: Vec<Vec<DiagramCell>>,
    pub windows: Vec<Window>,
}

/// Largest spacing, in grid values, between regularity switches that still
/// belong to one mixed zone.
pub const DEFAULT_MIXED_GAP: usize = 5;

pub const IC_CONDITIONED_NOTE: &str =
    "branches are conditioned on the listed initial conditions; other attractors may exist";

fn settle(traj: &Trajectory, sig: AttractorSignature) -> (Vec<f64>, CellStatus) {
    let peaks = if sig.peak_set.is_empty() {
        traj.states.last().map(|x| vec![x[0]]).unwrap_or_default()
    } else {
        sig.peak_set.clone()
    };
    (peaks, CellStatus::Settled { signature: sig })
}

/// Integrate one cell from `x0`. Also returns the final state for warm
/// starts.
fn run_cell(spec: &SweepSpec, value: f64, ic_index: usize, x0: State3) -> (DiagramCell, Option<State3>) {
    let p = spec.params_at(value);
    let out = match spec.axis {
        SweepAxis::ParamA => run_signature(&p, x0, &spec.point),
        SweepAxis::OrderQ => run_signature_fo(&p, x0, &spec.fo_at(value), &spec.point),
    };
    let (peaks, status, end) = match out {
        Ok((traj, sig)) => {
            let end = traj.states.last().map(|x| State3(*x));
            let (peaks, status) = settle(&traj, sig);
            (peaks, status, end)
        }
        Err(Error::Escaped { t, .. }) => (Vec::new(), CellStatus::Escaped { t }, None),
        Err(e) => (Vec::new(), CellStatus::Failed { message: e.to_string() }, None),
    };
    let peaks = peaks.into_iter().filter(|v| v.is_finite()).collect();
    (
        DiagramCell {
            value,
            ic_index,
            x0,
            peaks,
            end,
            status,
        },
        end,
    )
}

/// Recompute a single cell from scratch. Matches the stored cell bitwise
/// for sweeps without warm start.
pub fn reproduce_cell(spec: &SweepSpec, value_index: usize, ic_index: usize) -> Result<DiagramCell> {
    spec.validate()?;
    let v = *spec
        .values()
        .get(value_index)
        .ok_or_else(|| Error::InvalidConfig(format!("no axis value {value_index}")))?;
    let x0 = *spec
        .ics
        .get(ic_index)
        .ok_or_else(|| Error::InvalidConfig(format!("no initial condition {ic_index}")))?;
    Ok(run_cell(spec, v, ic_index, x0).0)
}

/// Compute every cell and the coexistence windows.
pub fn sweep(spec: &SweepSpec) -> Result<BifurcationDiagram> {
    spec.validate()?;
    let values = spec.values();
    let cells = if spec.warm_start {
        let columns: Vec<Vec<DiagramCell>> = (0..spec.ics.len())
            .into_par_iter()
            .map(|j| {
                let mut x0 = spec.ics[j];
                values
                    .iter()
                    .map(|&v| {
                        let (cell, end) = run_cell(spec, v, j, x0);
                        x0 = end.unwrap_or(spec.ics[j]);
                        cell
                    })
                    .collect()
            })
            .collect();
        (0..values.len()).map(|i| columns.iter().map(|c| c[i].clone()).collect()).collect()
    } else {
        let sources = spec.mirror_sources();
        let jobs: Vec<(usize, usize)> = (0..values.len())
            .flat_map(|i| (0..spec.ics.len()).filter(|&j| sources[j].is_none()).map(move |j| (i, j)))
            .collect();
        let computed: Vec<DiagramCell> =
            jobs.par_iter().map(|&(i, j)| run_cell(spec, values[i], j, spec.ics[j]).0).collect();
        let mut rows: Vec<Vec<Option<DiagramCell>>> = vec![vec![None; spec.ics.len()]; values.len()];
        for ((i, j), c) in jobs.into_iter().zip(computed) {
            rows[i][j] = Some(c);
        }
        for row in rows.iter_mut() {
            for j in 0..spec.ics.len() {
                if let Some(s) = sources[j] {
                    let m = row[s].as_ref().map(|c| c.mirrored(j, spec.ics[j]));
                    row[j] = m;
                }
            }
        }
        rows.into_iter().map(|r| r.into_iter().map(|c| c.expect("every cell filled")).collect()).collect()
    };
    let mut d = BifurcationDiagram {
        axis: spec.axis,
        fixed: match spec.axis {
            SweepAxis::ParamA => 1.0,
            SweepAxis::OrderQ => spec.fixed,
        },
        values,
        ics: spec.ics.clone(),
        tolerances: spec.tolerances,
        cells,
        windows: Vec::new(),
    };
    d.windows = detect_coexistence(&d);
    Ok(d)
}

/// Sweep over `a` at integer order.
pub fn sweep_param(spec: &SweepSpec) -> Result<BifurcationDiagram> {
    if spec.axis != SweepAxis::ParamA {
        return Err(Error::InvalidConfig("sweep_param needs the a axis".into()));
    }
    sweep(spec)
}

/// Sweep over the fractional order with `a` fixed.
pub fn sweep_order(spec: &SweepSpec) -> Result<BifurcationDiagram> {
    if spec.axis != SweepAxis::OrderQ {
        return Err(Error::InvalidConfig("sweep_order needs the q axis".into()));
    }
    sweep(spec)
}

/// Merge flagged grid indices into intervals of consecutive values.
fn merge_runs(values: &[f64], flags: &[bool]) -> Vec<Window> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &f) in flags.iter().chain(std::iter::once(&false)).enumerate() {
        match (f, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(Window {
                    lo: values[s],
                    hi: values[i - 1],
                    points: i - s,
                });
                start = None;
            }
            _ => {}
        }
    }
    out
}

impl BifurcationDiagram {
    fn settled_at(&self, i: usize) -> Vec<&AttractorSignature> {
        self.cells[i].iter().filter_map(|c| c.signature()).collect()
    }

    /// Two initial conditions reach attractors that are not the same up to
    /// the mirror symmetry.
    pub fn coexists_at(&self, i: usize) -> bool {
        let sigs: Vec<AttractorSignature> = self.settled_at(i).into_iter().map(|s| s.canonical()).collect();
        sigs.iter()
            .enumerate()
            .any(|(k, a)| sigs[k + 1..].iter().any(|b| !self.tolerances.matches(a, b)))
    }

    pub fn regularities_at(&self, i: usize) -> (usize, usize) {
        let s = self.settled_at(i);
        let reg = s.iter().filter(|s| s.regularity == Regularity::Regular).count();
        (reg, s.len() - reg)
    }

    /// Indices `i` at which some initial condition's branch changes
    /// regularity between values `i` and `i + 1`.
    pub fn regularity_switches(&self) -> Vec<usize> {
        let n = self.values.len();
        (0..n.saturating_sub(1))
            .filter(|&i| {
                (0..self.ics.len()).any(|j| {
                    match (self.cells[i][j].signature(), self.cells[i + 1][j].signature()) {
                        (Some(a), Some(b)) => a.regularity != b.regularity,
                        _ => false,
                    }
                })
            })
            .collect()
    }

    /// Intervals where thin periodic and chaotic bands interleave: runs of
    /// regularity switches, each within `max_gap` grid values of the next,
    /// with at least two switches. The interval covers the values strictly
    /// between the first and last switch.
    pub fn mixed_zones(&self, max_gap: usize) -> Vec<Window> {
        let sw = self.regularity_switches();
        let mut out = Vec::new();
        let mut k = 0;
        while k < sw.len() {
            let mut m = k;
            while m + 1 < sw.len() && sw[m + 1] - sw[m] <= max_gap {
                m += 1;
            }
            if m > k {
                let (lo, hi) = (sw[k] + 1, sw[m]);
                out.push(Window {
                    lo: self.values[lo],
                    hi: self.values[hi],
                    points: hi + 1 - lo,
                });
            }
            k = m + 1;
        }
        out
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.signature().is_none()).count()
    }

    /// Rows `axis_value,ic_index,peak_value,regularity,mle`, one per peak.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "axis_value,ic_index,peak_value,regularity,mle")?;
        for c in self.cells.iter().flatten() {
            let (reg, mle) = match &c.status {
                CellStatus::Settled { signature } => (signature.regularity.as_str(), signature.mle),
                CellStatus::Escaped { .. } => ("escaped", f64::NAN),
                CellStatus::Failed { .. } => ("failed", f64::NAN),
            };
            for p in &c.peaks {
                writeln!(w, "{:.16e},{},{:.16e},{},{:.16e}", c.value, c.ic_index, p, reg, mle)?;
            }
        }
        Ok(())
    }

    pub fn report(&self) -> String {
        let name = self.axis.as_str();
        let mut s = String::new();
        match self.axis {
            SweepAxis::ParamA => writeln!(s, "sweep over a, q = 1").unwrap(),
            SweepAxis::OrderQ => writeln!(s, "sweep over q, a = {}", self.fixed).unwrap(),
        }
        if let (Some(lo), Some(hi)) = (self.values.first(), self.values.last()) {
            writeln!(s, "{} values in [{lo}, {hi}]", self.values.len()).unwrap();
        }
        writeln!(s, "initial conditions:").unwrap();
        for (k, x) in self.ics.iter().enumerate() {
            writeln!(s, "  {k}: ({}, {}, {})", x.x1(), x.x2(), x.x3()).unwrap();
        }
        writeln!(s, "note: {IC_CONDITIONED_NOTE}").unwrap();
        writeln!(s, "failed or escaped cells: {}", self.failures()).unwrap();
        writeln!(s, "coexistence windows:").unwrap();
        if self.windows.is_empty() {
            writeln!(s, "  none").unwrap();
        }
        for w in &self.windows {
            writeln!(s, "  {name} in [{:.6}, {:.6}] ({} values)", w.lo, w.hi, w.points).unwrap();
        }
        writeln!(s, "mixed periodic/chaotic zones:").unwrap();
        let zones = self.mixed_zones(DEFAULT_MIXED_GAP);
        if zones.is_empty() {
            writeln!(s, "  none").unwrap();
        }
        for w in &zones {
            writeln!(s, "  {name} in [{:.6}, {:.6}] ({} values)", w.lo, w.hi, w.points).unwrap();
        }
        s
    }
}

/// Intervals of consecutive axis values at which the initial conditions
/// reach at least two attractors that differ beyond mirror symmetry.
pub fn detect_coexistence(d: &BifurcationDiagram) -> Vec<Window> {
    if d.ics.len() < 2 {
        return Vec::new();
    }
    let flags: Vec<bool> = (0..d.values.len()).map(|i| d.coexists_at(i)).collect();
    merge_runs(&d.values, &flags)
}
