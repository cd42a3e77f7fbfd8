//! Basins of attraction on planar lattices and in small balls around
//! equilibria, and the numerical hidden/self-excited verdict.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attractor::{
    signature_with, strip_transient, AttractorLabel, AttractorRegistry, AttractorSignature, MatchOutcome,
    Transient, DEFAULT_SYMMETRY_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::fode::FOConfig;
use crate::lyapunov::{integrate_fo_with_mle, integrate_with_mle, MleConfig, DEFAULT_ZERO_THRESHOLD};
use crate::rk::{IntegratorConfig, Termination, Trajectory};
use crate::system::{State3, SystemParams};

/// How each seed is integrated and identified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PointConfig {
    pub integrator: IntegratorConfig,
    pub transient: Transient,
    pub renorm_interval: f64,
    pub mle_threshold: f64,
    pub symmetry_threshold: f64,
}

impl Default for PointConfig {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::precise().with_t_max(2000.0),
            transient: Transient::default(),
            renorm_interval: 1.0,
            mle_threshold: DEFAULT_ZERO_THRESHOLD,
            symmetry_threshold: DEFAULT_SYMMETRY_THRESHOLD,
        }
    }
}

impl PointConfig {
    pub fn validate(&self) -> Result<()> {
        self.integrator.validate()?;
        let cut = self.transient.cutoff(self.integrator.t_max);
        if !(cut >= 0.0 && cut < self.integrator.t_max) {
            return Err(Error::InvalidConfig("transient must end before t_max".into()));
        }
        if !(self.renorm_interval > 0.0) {
            return Err(Error::InvalidConfig("renorm_interval must be positive".into()));
        }
        Ok(())
    }

    fn mle_config(&self) -> MleConfig {
        MleConfig {
            t_total: self.integrator.t_max,
            t_transient: self.transient.cutoff(self.integrator.t_max),
            renorm_interval: self.renorm_interval,
            threshold: self.mle_threshold,
            integrator: self.integrator,
            ..MleConfig::default()
        }
    }
}

/// Integrate one seed and build the signature of its post-transient part.
/// Returns the full trajectory alongside, for settle-time estimates.
pub fn run_signature(p: &SystemParams, x0: State3, cfg: &PointConfig) -> Result<(Trajectory, AttractorSignature)> {
    let mle_cfg = cfg.mle_config();
    let (traj, mle) = integrate_with_mle(p, x0.0, &cfg.integrator, &mle_cfg)?;
    if let Termination::Escaped { t } = traj.status {
        return Err(Error::Escaped { t, radius: cfg.integrator.escape_radius });
    }
    let tail = strip_transient(&traj, cfg.transient)?;
    let sig = signature_with(&tail, mle.mle, cfg.mle_threshold, cfg.symmetry_threshold)?;
    Ok((traj, sig))
}

/// Fractional-order counterpart of [`run_signature`]. Run length, transient
/// and thresholds come from `cfg`; order, step and memory from `fo`.
pub fn run_signature_fo(p: &SystemParams, x0: State3, fo: &FOConfig, cfg: &PointConfig) -> Result<(Trajectory, AttractorSignature)> {
    p.validate()?;
    let mle_cfg = MleConfig {
        t_total: fo.t_max,
        t_transient: cfg.transient.cutoff(fo.t_max),
        ..cfg.mle_config()
    };
    let (traj, mle) = integrate_fo_with_mle(p, x0.0, &mle_cfg, fo)?;
    if let Termination::Escaped { t } = traj.status {
        return Err(Error::Escaped { t, radius: fo.escape_radius });
    }
    let tail = strip_transient(&traj, cfg.transient)?;
    let sig = signature_with(&tail, mle.mle, cfg.mle_threshold, cfg.symmetry_threshold)?;
    Ok((traj, sig))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "label", rename_all = "snake_case")]
pub enum PointLabel {
    Attractor(AttractorLabel),
    Escaped,
    Unresolved,
}

impl fmt::Display for PointLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PointLabel::Attractor(l) => write!(f, "{l}"),
            PointLabel::Escaped => f.write_str("escaped"),
            PointLabel::Unresolved => f.write_str("unresolved"),
        }
    }
}

impl PointLabel {
    pub fn attractor(&self) -> Option<AttractorLabel> {
        match self {
            PointLabel::Attractor(l) => Some(*l),
            _ => None,
        }
    }

    pub fn partner(self) -> Self {
        match self {
            PointLabel::Attractor(l) => PointLabel::Attractor(l.partner()),
            other => other,
        }
    }
}

/// Outcome for a single seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub x0: State3,
    pub label: PointLabel,
    pub mle: f64,
    /// Time after which the orbit stays in the matched reference's bounding
    /// box; NaN when unmatched.
    pub settle_time: f64,
}

fn settle_time(traj: &Trajectory, registry: &AttractorRegistry, label: AttractorLabel) -> f64 {
    let boxes: Vec<_> = registry.entries.iter().filter(|e| e.label == label).map(|e| e.signature.bbox).collect();
    let inside = |x: &[f64; 3]| {
        boxes.iter().any(|b| {
            (0..3).all(|i| {
                let pad = 0.05 * (b.max[i] - b.min[i]) + 1e-9;
                b.min[i] - pad <= x[i] && x[i] <= b.max[i] + pad
            })
        })
    };
    match traj.states.iter().rposition(|x| !inside(x)) {
        None => 0.0,
        Some(k) if k + 1 < traj.times.len() => traj.times[k + 1],
        Some(_) => f64::NAN,
    }
}

/// Integrate, strip, sign and match one seed. Failures of any kind become
/// `Escaped` or `Unresolved`; nothing here aborts a scan.
pub fn classify_point(p: &SystemParams, x0: State3, registry: &AttractorRegistry, cfg: &PointConfig) -> PointResult {
    let unresolved = |mle| PointResult {
        x0,
        label: PointLabel::Unresolved,
        mle,
        settle_time: f64::NAN,
    };
    let (traj, sig) = match run_signature(p, x0, cfg) {
        Ok(v) => v,
        Err(Error::Escaped { .. }) => {
            return PointResult {
                label: PointLabel::Escaped,
                ..unresolved(f64::NAN)
            }
        }
        Err(_) => return unresolved(f64::NAN),
    };
    if sig.is_stationary() {
        return unresolved(sig.mle);
    }
    match registry.match_signature(&sig) {
        Ok(MatchOutcome::Known(label)) => PointResult {
            x0,
            label: PointLabel::Attractor(label),
            mle: sig.mle,
            settle_time: settle_time(&traj, registry, label),
        },
        _ => unresolved(sig.mle),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x1: [f64; 2],
    pub x2: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatticeSpec {
    /// The lattice lies in the plane `x3 = x3`.
    pub x3: f64,
    pub x1: [f64; 2],
    pub x2: [f64; 2],
    pub n: usize,
    pub zooms: Vec<Rect>,
}

impl Default for LatticeSpec {
    fn default() -> Self {
        Self {
            x3: 0.0,
            x1: [-5.0, 5.0],
            x2: [-5.0, 5.0],
            n: 400,
            zooms: Vec::new(),
        }
    }
}

/// Coordinate `k` of `n` on `[lo, hi]`, written so that symmetric ranges
/// give exactly antisymmetric coordinates.
fn lattice_coord(lo: f64, hi: f64, k: usize, n: usize) -> f64 {
    let m = (n - 1) as f64;
    let u = (2.0 * k as f64 - m) / m;
    0.5 * (lo + hi) + 0.5 * (hi - lo) * u
}

impl LatticeSpec {
    pub fn plane(x3: f64, n: usize) -> Self {
        Self {
            x3,
            n,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n < 2 {
            return bad("lattice needs n >= 2");
        }
        for r in [self.x1, self.x2] {
            if !(r[0] < r[1]) || !r[0].is_finite() || !r[1].is_finite() {
                return bad("lattice ranges must be nonempty and finite");
            }
        }
        if !self.x3.is_finite() {
            return bad("lattice plane must be finite");
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Seed at image row `row` (top row is the largest `x2`) and column
    /// `col`.
    pub fn point(&self, row: usize, col: usize) -> State3 {
        let x1 = lattice_coord(self.x1[0], self.x1[1], col, self.n);
        let x2 = lattice_coord(self.x2[0], self.x2[1], self.n - 1 - row, self.n);
        State3::new(x1, x2, self.x3)
    }

    /// Points in row-major image order.
    pub fn points(&self) -> Vec<State3> {
        (0..self.n).flat_map(|r| (0..self.n).map(move |c| (r, c))).map(|(r, c)| self.point(r, c)).collect()
    }

    /// The lattice restricted to zoom rectangle `i`, same resolution.
    pub fn zoomed(&self, i: usize) -> Option<Self> {
        let z = self.zooms.get(i)?;
        Some(Self {
            x1: z.x1,
            x2: z.x2,
            zooms: Vec::new(),
            ..self.clone()
        })
    }

    pub fn spacing(&self) -> (f64, f64) {
        let m = (self.n - 1) as f64;
        ((self.x1[1] - self.x1[0]) / m, (self.x2[1] - self.x2[0]) / m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinGrid {
    pub spec: LatticeSpec,
    pub params: SystemParams,
    pub config: PointConfig,
    pub registry_labels: Vec<AttractorLabel>,
    /// Row-major, top row first.
    pub points: Vec<PointResult>,
}

impl BasinGrid {
    pub fn label(&self, row: usize, col: usize) -> PointLabel {
        self.points[row * self.spec.n + col].label
    }

    pub fn counts(&self) -> BTreeMap<PointLabel, usize> {
        count_labels(self.points.iter().map(|p| p.label))
    }

    /// Fraction of points that escaped or stayed unresolved.
    pub fn failure_fraction(&self) -> f64 {
        let bad = self.points.iter().filter(|p| p.label.attractor().is_none()).count();
        bad as f64 / self.points.len().max(1) as f64
    }

    /// Labels of lattice points within `radius` of `(x1, x2)`; when the disc
    /// holds no lattice point, the nearest point stands in.
    pub fn disc(&self, x1: f64, x2: f64, radius: f64) -> Vec<PointLabel> {
        let d = |p: &PointResult| (p.x0.x1() - x1).hypot(p.x0.x2() - x2);
        let inside: Vec<_> = self.points.iter().filter(|p| d(p) <= radius).map(|p| p.label).collect();
        if !inside.is_empty() {
            return inside;
        }
        self.points
            .iter()
            .min_by(|a, b| d(a).total_cmp(&d(b)))
            .map(|p| vec![p.label])
            .unwrap_or_default()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        write_points_csv(&self.points, out)
    }

    /// Plain-text pixmap, one pixel per lattice point.
    pub fn write_ppm<W: Write>(&self, mut out: W) -> io::Result<()> {
        let n = self.spec.n;
        writeln!(out, "P3")?;
        writeln!(out, "{n} {n}")?;
        writeln!(out, "255")?;
        for row in 0..n {
            let line: Vec<String> = (0..n)
                .map(|col| {
                    let [r, g, b] = palette(self.label(row, col));
                    format!("{r} {g} {b}")
                })
                .collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Most frequent label, ties broken by label order.
pub fn dominant(labels: &[PointLabel]) -> Option<PointLabel> {
    let counts = count_labels(labels.iter().copied());
    let best = counts.values().copied().max()?;
    counts.into_iter().find(|&(_, c)| c == best).map(|(l, _)| l)
}

pub fn count_labels(labels: impl Iterator<Item = PointLabel>) -> BTreeMap<PointLabel, usize> {
    let mut m = BTreeMap::new();
    for l in labels {
        *m.entry(l).or_insert(0) += 1;
    }
    m
}

pub fn palette(label: PointLabel) -> [u8; 3] {
    use crate::attractor::AttractorKind as K;
    match label {
        PointLabel::Escaped => [255, 255, 255],
        PointLabel::Unresolved => [128, 128, 128],
        PointLabel::Attractor(l) => match (l.kind, l.index) {
            (K::H, 1) => [220, 30, 30],
            (K::H, _) => [10, 10, 10],
            (K::SECH, 1) => [30, 60, 220],
            (K::SECH, _) => [205, 155, 100],
            (K::SEC, 1) => [40, 160, 70],
            (K::SEC, _) => [240, 200, 40],
            (K::HC, 1) => [150, 60, 190],
            (K::HC, _) => [40, 190, 200],
            (K::Unknown, _) => [90, 90, 90],
        },
    }
}

pub fn write_points_csv<W: Write>(points: &[PointResult], mut out: W) -> io::Result<()> {
    writeln!(out, "x1,x2,x3,label,mle,settle_time")?;
    for p in points {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e}",
            p.x0.x1(),
            p.x0.x2(),
            p.x0.x3(),
            p.label,
            p.mle,
            p.settle_time
        )?;
    }
    Ok(())
}

fn check_registry(registry: &AttractorRegistry) -> Result<()> {
    if registry.is_empty() {
        return Err(Error::InvalidConfig("basin scans need a nonempty registry".into()));
    }
    Ok(())
}

/// Classify every lattice point. Work is spread over the current rayon
/// pool; results land by index, so the grid does not depend on scheduling.
pub fn scan_lattice(
    p: &SystemParams,
    spec: &LatticeSpec,
    registry: &AttractorRegistry,
    cfg: &PointConfig,
) -> Result<BasinGrid> {
    p.validate()?;
    spec.validate()?;
    cfg.validate()?;
    check_registry(registry)?;
    let points = spec.points().into_par_iter().map(|x0| classify_point(p, x0, registry, cfg)).collect();
    Ok(BasinGrid {
        spec: spec.clone(),
        params: *p,
        config: *cfg,
        registry_labels: registry.labels(),
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereSpec {
    pub center: State3,
    pub radius: f64,
    pub count: usize,
    pub seed: u64,
}

impl SphereSpec {
    pub const DEFAULT_RADIUS: f64 = 0.1;
    pub const DEFAULT_COUNT: usize = 50;

    pub fn around(center: State3, seed: u64) -> Self {
        Self {
            center,
            radius: Self::DEFAULT_RADIUS,
            count: Self::DEFAULT_COUNT,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius >= 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidConfig("sphere radius must be nonnegative".into()));
        }
        if self.count == 0 {
            return Err(Error::InvalidConfig("sphere needs at least one sample".into()));
        }
        Ok(())
    }

    /// Sample `i`: uniform in the ball, by rejection from the enclosing
    /// cube. Each index draws from its own ChaCha stream, so a sample does
    /// not depend on how many others are drawn or in what order.
    pub fn sample(&self, i: usize) -> State3 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(i as u64);
        let u = loop {
            let u: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..=1.0));
            if u.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                break u;
            }
        };
        State3(std::array::from_fn(|k| self.center.0[k] + self.radius * u[k]))
    }

    pub fn samples(&self) -> Vec<State3> {
        (0..self.count).map(|i| self.sample(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereScan {
    pub spec: SphereSpec,
    pub points: Vec<PointResult>,
}

impl SphereScan {
    pub fn counts(&self) -> BTreeMap<PointLabel, usize> {
        count_labels(self.points.iter().map(|p| p.label))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        write_points_csv(&self.points, out)
    }
}

pub fn scan_sphere(
    p: &SystemParams,
    spec: &SphereSpec,
    registry: &AttractorRegistry,
    cfg: &PointConfig,
) -> Result<SphereScan> {
    p.validate()?;
    spec.validate()?;
    cfg.validate()?;
    check_registry(registry)?;
    let points = spec.samples().into_par_iter().map(|x0| classify_point(p, x0, registry, cfg)).collect();
    Ok(SphereScan { spec: *spec, points })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodEvidence {
    pub equilibrium: String,
    pub center: State3,
    pub radius: f64,
    pub samples: usize,
    /// Label text to count.
    pub counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Excitation {
    SelfExcited,
    Hidden,
}

impl Excitation {
    pub fn as_str(self) -> &'static str {
        match self {
            Excitation::SelfExcited => "self-excited",
            Excitation::Hidden => "hidden",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorVerdict {
    pub label: AttractorLabel,
    pub verdict: Excitation,
    /// Neighborhood samples reaching this attractor, per equilibrium.
    pub hits: BTreeMap<String, usize>,
}

/// Numerical evidence only: "hidden" means no sampled neighborhood point
/// reached the attractor, not that none could.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddennessVerdict {
    pub attractors: Vec<AttractorVerdict>,
    pub neighborhoods: Vec<NeighborhoodEvidence>,
}

impl HiddennessVerdict {
    pub const NOTE: &'static str = "numerical evidence from finite samples, not a proof";

    pub fn verdict(&self, label: AttractorLabel) -> Option<Excitation> {
        self.attractors.iter().find(|a| a.label == label).map(|a| a.verdict)
    }

    pub fn report(&self) -> String {
        let mut s = format!("# hidden/self-excited verdict ({})\n", Self::NOTE);
        for n in &self.neighborhoods {
            let counts: Vec<String> = n.counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
            s.push_str(&format!(
                "neighborhood {} center=({:.6}, {:.6}, {:.6}) radius={} samples={}: {}\n",
                n.equilibrium,
                n.center.x1(),
                n.center.x2(),
                n.center.x3(),
                n.radius,
                n.samples,
                counts.join(" ")
            ));
        }
        for a in &self.attractors {
            let hits: Vec<String> = a.hits.iter().map(|(k, v)| format!("{k}={v}")).collect();
            s.push_str(&format!(
                "{} {} hits: {}\n",
                a.label,
                a.verdict.as_str(),
                if hits.is_empty() { "none".to_string() } else { hits.join(" ") }
            ));
        }
        s
    }
}

/// Combine sphere scans into per-attractor verdicts. Every named
/// equilibrium needs a scan centered on it.
pub fn hiddenness(
    registry: &AttractorRegistry,
    equilibria: &[(String, State3)],
    scans: &[SphereScan],
) -> Result<HiddennessVerdict> {
    let mut neighborhoods = Vec::new();
    for (name, eq) in equilibria {
        let scan = scans
            .iter()
            .find(|s| s.spec.center.distance(eq) <= 1e-12 * (1.0 + eq.norm()))
            .ok_or_else(|| Error::MissingScan(name.clone()))?;
        neighborhoods.push(NeighborhoodEvidence {
            equilibrium: name.clone(),
            center: *eq,
            radius: scan.spec.radius,
            samples: scan.points.len(),
            counts: scan.counts().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        });
    }
    let attractors = registry
        .labels()
        .into_iter()
        .map(|label| {
            let key = label.to_string();
            let hits: BTreeMap<String, usize> = neighborhoods
                .iter()
                .filter_map(|n| n.counts.get(&key).map(|&c| (n.equilibrium.clone(), c)))
                .filter(|&(_, c)| c > 0)
                .collect();
            let verdict = if hits.is_empty() { Excitation::Hidden } else { Excitation::SelfExcited };
            AttractorVerdict { label, verdict, hits }
        })
        .collect();
    Ok(HiddennessVerdict {
        attractors,
        neighborhoods,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attractor::{AttractorKind, BoundingBox};
    use crate::lyapunov::Regularity;

    fn toy_registry() -> AttractorRegistry {
        let sig = AttractorSignature {
            label: AttractorLabel::new(AttractorKind::Unknown, 1),
            regularity: Regularity::Regular,
            mle: 0.0,
            mean_x1: 1.0,
            symmetry_sign: 1,
            bbox: BoundingBox { min: [0.0; 3], max: [1.0; 3] },
            peak_set: vec![1.0],
            trough_set: vec![0.0],
            period_estimate: None,
        };
        let mut r = AttractorRegistry::default();
        r.insert_pair(AttractorLabel::new(AttractorKind::SEC, 1), sig).unwrap();
        r
    }

    #[test]
    fn lattice_geometry() {
        let s = LatticeSpec::plane(0.5, 5);
        assert_eq!(s.point(0, 0), State3::new(-5.0, 5.0, 0.5));
        assert_eq!(s.point(4, 4), State3::new(5.0, -5.0, 0.5));
        assert_eq!(s.point(2, 2), State3::new(0.0, 0.0, 0.5));
        let pts = s.points();
        assert_eq!(pts.len(), 25);
        let big = LatticeSpec::plane(0.0, 100);
        for r in 0..100 {
            for c in 0..100 {
                let a = big.point(r, c);
                let b = big.point(99 - r, 99 - c);
                assert_eq!(a.x1(), -b.x1());
                assert_eq!(a.x2(), -b.x2());
            }
        }
        assert!(LatticeSpec::plane(0.0, 1).validate().is_err());
        let z = LatticeSpec {
            zooms: vec![Rect { x1: [0.0, 1.0], x2: [2.0, 3.0] }],
            ..LatticeSpec::plane(0.0, 3)
        };
        assert_eq!(z.zoomed(0).unwrap().point(0, 0), State3::new(0.0, 3.0, 0.0));
        assert!(z.zoomed(1).is_none());
    }

    #[test]
    fn sphere_samples_in_ball_and_reproducible() {
        let s = SphereSpec::around(State3::new(1.0, 2.0, 3.0), 7);
        let a = s.samples();
        assert_eq!(a.len(), 50);
        for x in &a {
            assert!(x.distance(&s.center) <= 0.1 + 1e-15);
        }
        assert_eq!(a, s.samples());
        let more = SphereSpec { count: 80, ..s };
        assert_eq!(&more.samples()[..50], &a[..]);
        let other = SphereSpec { seed: 8, ..s };
        assert_ne!(other.samples(), a);
        let zero = SphereSpec { radius: 0.0, ..s };
        assert!(zero.samples().iter().all(|x| *x == s.center));
    }

    #[test]
    fn degenerate_lattice_gives_valid_grid() {
        let p = SystemParams::preset(0.052);
        let spec = LatticeSpec::plane(0.0, 2);
        let cfg = PointConfig {
            integrator: IntegratorConfig::default().with_t_max(50.0),
            ..PointConfig::default()
        };
        let g = scan_lattice(&p, &spec, &toy_registry(), &cfg).unwrap();
        assert_eq!(g.points.len(), 4);
        for pt in &g.points {
            match pt.label {
                PointLabel::Attractor(l) => assert!(g.registry_labels.contains(&l)),
                PointLabel::Escaped | PointLabel::Unresolved => {}
            }
        }
        let mut ppm = Vec::new();
        g.write_ppm(&mut ppm).unwrap();
        let text = String::from_utf8(ppm).unwrap();
        assert!(text.starts_with("P3\n2 2\n255\n"));
        assert_eq!(text.lines().count(), 5);
        let mut csv = Vec::new();
        g.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 5);
    }

    #[test]
    fn equilibrium_seed_is_unresolved() {
        let p = SystemParams::preset(0.052);
        let spec = SphereSpec { radius: 0.0, count: 3, ..SphereSpec::around(State3::ORIGIN, 1) };
        let cfg = PointConfig {
            integrator: IntegratorConfig::default().with_t_max(50.0),
            ..PointConfig::default()
        };
        let s = scan_sphere(&p, &spec, &toy_registry(), &cfg).unwrap();
        assert!(s.points.iter().all(|pt| pt.label == PointLabel::Unresolved));
    }

    #[test]
    fn empty_registry_rejected() {
        let p = SystemParams::preset(0.052);
        let spec = LatticeSpec::plane(0.0, 2);
        assert!(scan_lattice(&p, &spec, &AttractorRegistry::default(), &PointConfig::default()).is_err());
    }

    #[test]
    fn hiddenness_counts_and_missing_scan() {
        let r = toy_registry();
        let sec1 = PointLabel::Attractor(AttractorLabel::new(AttractorKind::SEC, 1));
        let pt = |label| PointResult {
            x0: State3::ORIGIN,
            label,
            mle: 0.0,
            settle_time: 0.0,
        };
        let scan = SphereScan {
            spec: SphereSpec::around(State3::ORIGIN, 0),
            points: vec![pt(sec1), pt(sec1), pt(PointLabel::Unresolved)],
        };
        let eqs = vec![("X0".to_string(), State3::ORIGIN)];
        let v = hiddenness(&r, &eqs, &[scan.clone()]).unwrap();
        assert_eq!(v.verdict(AttractorLabel::new(AttractorKind::SEC, 1)), Some(Excitation::SelfExcited));
        assert_eq!(v.verdict(AttractorLabel::new(AttractorKind::SEC, 2)), Some(Excitation::Hidden));
        assert_eq!(v.attractors[0].hits["X0"], 2);
        assert!(v.report().contains("numerical evidence"));
        let eqs2 = vec![eqs[0].clone(), ("X1".to_string(), State3::new(1.0, 1.0, -1.0))];
        assert!(matches!(hiddenness(&r, &eqs2, &[scan]), Err(Error::MissingScan(n)) if n == "X1"));
    }

    #[test]
    fn dominant_label() {
        let a = PointLabel::Attractor(AttractorLabel::new(AttractorKind::SEC, 1));
        assert_eq!(dominant(&[a, PointLabel::Unresolved, a]), Some(a));
        assert_eq!(dominant(&[]), None);
    }
}
