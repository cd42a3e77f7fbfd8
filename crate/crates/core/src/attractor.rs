//! Attractor identification: transient stripping, peak extraction,
//! signatures and a registry of reference attractors.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lyapunov::{classify_mle, MleResult, Regularity};
use crate::rk::{Termination, Trajectory};

pub const DEFAULT_TRANSIENT_FRACTION: f64 = 0.4;
pub const DEFAULT_SYMMETRY_THRESHOLD: f64 = 1e-3;
const MAX_ACF_SAMPLES: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttractorKind {
    SEC,
    SECH,
    H,
    HC,
    Unknown,
}

impl AttractorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttractorKind::SEC => "SEC",
            AttractorKind::SECH => "SECH",
            AttractorKind::H => "H",
            AttractorKind::HC => "HC",
            AttractorKind::Unknown => "Unknown",
        }
    }

    pub fn is_hidden(self) -> Option<bool> {
        match self {
            AttractorKind::H | AttractorKind::HC => Some(true),
            AttractorKind::SEC | AttractorKind::SECH => Some(false),
            AttractorKind::Unknown => None,
        }
    }

    pub fn regularity(self) -> Option<Regularity> {
        match self {
            AttractorKind::SEC | AttractorKind::HC => Some(Regularity::Regular),
            AttractorKind::SECH | AttractorKind::H => Some(Regularity::Chaotic),
            AttractorKind::Unknown => None,
        }
    }
}

/// Kind plus index. Index 1 is the member of a symmetric pair with positive
/// mean `x1`, index 2 its mirror image, 0 when the sign is undetermined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AttractorLabel {
    pub kind: AttractorKind,
    pub index: u8,
}

impl AttractorLabel {
    pub const fn new(kind: AttractorKind, index: u8) -> Self {
        Self { kind, index }
    }

    pub fn for_sign(kind: AttractorKind, symmetry_sign: i8) -> Self {
        let index = match symmetry_sign {
            1 => 1,
            -1 => 2,
            _ => 0,
        };
        Self { kind, index }
    }

    /// The mirror-image partner.
    pub fn partner(self) -> Self {
        let index = match self.index {
            1 => 2,
            2 => 1,
            i => i,
        };
        Self { index, ..self }
    }
}

impl fmt::Display for AttractorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.index == 0 {
            write!(f, "{}", self.kind.as_str())
        } else {
            write!(f, "{}{}", self.kind.as_str(), self.index)
        }
    }
}

impl std::str::FromStr for AttractorLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let split = s.find(|c: char| c.is_ascii_digit()).unwrap_or(s.len());
        let (name, digits) = s.split_at(split);
        let kind = match name {
            "SEC" => AttractorKind::SEC,
            "SECH" => AttractorKind::SECH,
            "H" => AttractorKind::H,
            "HC" => AttractorKind::HC,
            "Unknown" => AttractorKind::Unknown,
            _ => return Err(Error::Parse(format!("unknown attractor label {s:?}"))),
        };
        let index = if digits.is_empty() {
            0
        } else {
            digits.parse().map_err(|_| Error::Parse(format!("bad label index in {s:?}")))?
        };
        Ok(Self { kind, index })
    }
}

/// How much of the start of a trajectory is transient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Transient {
    /// Fraction of the final time.
    Fraction(f64),
    /// Absolute time.
    Time(f64),
}

impl Default for Transient {
    fn default() -> Self {
        Transient::Fraction(DEFAULT_TRANSIENT_FRACTION)
    }
}

impl Transient {
    /// Cut-off time for a run ending at `t_end`.
    pub fn cutoff(self, t_end: f64) -> f64 {
        match self {
            Transient::Fraction(f) => f * t_end,
            Transient::Time(t) => t,
        }
    }
}

/// Drop samples before the transient cut-off. The cut-off is an absolute
/// time, so stripping twice is the same as stripping once.
pub fn strip_transient<const N: usize>(traj: &Trajectory<N>, transient: Transient) -> Result<Trajectory<N>> {
    match traj.status {
        Termination::Completed => {}
        Termination::Escaped { t } => {
            return Err(Error::Escaped { t, radius: f64::NAN });
        }
        Termination::StepFailure { t } => return Err(Error::StepFailure { t, h: f64::NAN }),
    }
    let cut = transient.cutoff(traj.end_time());
    let start = traj.times.partition_point(|&t| t < cut - 1e-9 * cut.abs().max(1.0));
    Ok(Trajectory {
        dt: traj.dt,
        times: traj.times[start..].to_vec(),
        states: traj.states[start..].to_vec(),
        status: traj.status,
        stats: traj.stats,
    })
}

/// Vertex of the parabola through three equally spaced samples around a
/// strict local maximum or minimum.
fn refine(y0: f64, y1: f64, y2: f64) -> f64 {
    let curv = y0 - 2.0 * y1 + y2;
    if curv == 0.0 {
        return y1;
    }
    let d = y2 - y0;
    y1 - d * d / (8.0 * curv)
}

/// Strict local maxima of a sampled signal, refined by quadratic
/// interpolation and sorted ascending.
pub fn peaks_of(values: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = values
        .windows(3)
        .filter(|w| w[1] > w[0] && w[1] > w[2])
        .map(|w| refine(w[0], w[1], w[2]))
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Strict local minima, refined and sorted ascending.
pub fn troughs_of(values: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = values
        .windows(3)
        .filter(|w| w[1] < w[0] && w[1] < w[2])
        .map(|w| refine(w[0], w[1], w[2]))
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

pub fn extract_peaks<const N: usize>(traj: &Trajectory<N>, component: usize) -> Vec<f64> {
    let v: Vec<f64> = traj.component(component).collect();
    peaks_of(&v)
}

/// Symmetric Hausdorff distance between two sorted point sets on the line.
/// Two empty sets are at distance zero; empty against nonempty is infinite.
pub fn hausdorff(a: &[f64], b: &[f64]) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return f64::INFINITY,
        _ => {}
    }
    directed(a, b).max(directed(b, a))
}

fn directed(a: &[f64], sorted_b: &[f64]) -> f64 {
    a.iter()
        .map(|&x| {
            let i = sorted_b.partition_point(|&y| y < x);
            let mut d = f64::INFINITY;
            if i < sorted_b.len() {
                d = d.min(sorted_b[i] - x);
            }
            if i > 0 {
                d = d.min(x - sorted_b[i - 1]);
            }
            d
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl BoundingBox {
    pub fn of(states: &[[f64; 3]]) -> Option<Self> {
        let first = states.first()?;
        let mut b = Self { min: *first, max: *first };
        for s in states {
            for i in 0..3 {
                b.min[i] = b.min[i].min(s[i]);
                b.max[i] = b.max[i].max(s[i]);
            }
        }
        Some(b)
    }

    pub fn contains(&self, x: &[f64; 3]) -> bool {
        (0..3).all(|i| self.min[i] <= x[i] && x[i] <= self.max[i])
    }

    pub fn mirrored(&self) -> Self {
        Self {
            min: self.max.map(|v| -v),
            max: self.min.map(|v| -v),
        }
    }

    /// Smallest per-axis intersection-over-union. Axes of zero extent in
    /// both boxes count as fully overlapping when they coincide.
    pub fn overlap_ratio(&self, other: &Self) -> f64 {
        (0..3)
            .map(|i| {
                let lo = self.min[i].max(other.min[i]);
                let hi = self.max[i].min(other.max[i]);
                let union = self.max[i].max(other.max[i]) - self.min[i].min(other.min[i]);
                if union <= 0.0 {
                    return if lo <= hi { 1.0 } else { 0.0 };
                }
                ((hi - lo).max(0.0)) / union
            })
            .fold(1.0, f64::min)
    }
}

pub fn symmetry_sign(mean_x1: f64, threshold: f64) -> i8 {
    if mean_x1.abs() < threshold || mean_x1.is_nan() {
        0
    } else if mean_x1 > 0.0 {
        1
    } else {
        -1
    }
}

/// Dominant recurrence time from the autocorrelation of a sampled signal:
/// the first autocorrelation maximum after the first zero crossing that
/// comes within 10% of the highest one, searched up to half the record.
/// `None` for flat signals or when the correlation never recovers above one
/// half.
pub fn autocorrelation_period(values: &[f64], dt: f64) -> Option<f64> {
    // the correlation costs O(n^2); long records are decimated first
    let stride = values.len().div_ceil(MAX_ACF_SAMPLES).max(1);
    if stride > 1 {
        let thinned: Vec<f64> = values.iter().step_by(stride).copied().collect();
        return autocorrelation_period(&thinned, dt * stride as f64);
    }
    let n = values.len();
    if n < 8 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let var: f64 = centered.iter().map(|v| v * v).sum();
    if !(var > 1e-20 * n as f64) {
        return None;
    }
    let acf = |lag: usize| -> f64 {
        let s: f64 = centered[..n - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum();
        s / var * n as f64 / (n - lag) as f64
    };
    let max_lag = n / 2;
    let mut lag = 1;
    while lag < max_lag && acf(lag) > 0.0 {
        lag += 1;
    }
    let mut maxima = Vec::new();
    let (mut prev, mut cur) = (acf(lag.saturating_sub(1).max(1)), acf(lag));
    for l in lag + 1..max_lag {
        let next = acf(l);
        if cur > prev && cur >= next {
            maxima.push((l - 1, cur));
        }
        prev = cur;
        cur = next;
    }
    let top = maxima.iter().map(|m| m.1).fold(f64::NEG_INFINITY, f64::max);
    if top < 0.5 {
        return None;
    }
    // harmonics of the true period score about as high; take the first
    let (l, _) = *maxima.iter().find(|m| m.1 >= 0.9 * top)?;
    Some(l as f64 * dt)
}

/// Stable descriptors of the attractor a trajectory settled on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorSignature {
    pub label: AttractorLabel,
    pub regularity: Regularity,
    pub mle: f64,
    pub mean_x1: f64,
    pub symmetry_sign: i8,
    pub bbox: BoundingBox,
    /// Sorted local maxima of `x1`.
    pub peak_set: Vec<f64>,
    /// Sorted local minima of `x1`; the peaks of the mirror image.
    pub trough_set: Vec<f64>,
    pub period_estimate: Option<f64>,
}

impl AttractorSignature {
    /// Signature of the mirror-image trajectory.
    pub fn mirrored(&self) -> Self {
        let flip = |v: &[f64]| -> Vec<f64> { v.iter().rev().map(|x| -x).collect() };
        Self {
            label: self.label.partner(),
            regularity: self.regularity,
            mle: self.mle,
            mean_x1: -self.mean_x1,
            symmetry_sign: -self.symmetry_sign,
            bbox: self.bbox.mirrored(),
            peak_set: flip(&self.trough_set),
            trough_set: flip(&self.peak_set),
            period_estimate: self.period_estimate,
        }
    }

    /// The member of the mirror pair with nonnegative symmetry sign.
    pub fn canonical(&self) -> Self {
        if self.symmetry_sign < 0 {
            self.mirrored()
        } else {
            self.clone()
        }
    }

    /// Spread of the peak set; near zero on a settled period-one cycle.
    pub fn peak_spread(&self) -> f64 {
        match (self.peak_set.first(), self.peak_set.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Constant trajectory, e.g. a run started on an equilibrium.
    pub fn is_stationary(&self) -> bool {
        (0..3).all(|i| self.bbox.max[i] - self.bbox.min[i] < 1e-9)
    }
}

/// Build the signature of a stripped trajectory. The label kind is
/// `Unknown` until matched against a registry; the index follows the sign.
pub fn signature(traj: &Trajectory, mle: &MleResult) -> Result<AttractorSignature> {
    signature_with(traj, mle.mle, mle.threshold, DEFAULT_SYMMETRY_THRESHOLD)
}

pub fn signature_with(
    traj: &Trajectory,
    mle: f64,
    mle_threshold: f64,
    sign_threshold: f64,
) -> Result<AttractorSignature> {
    let bbox = BoundingBox::of(&traj.states)
        .ok_or_else(|| Error::InvalidState("empty trajectory has no signature".into()))?;
    let x1: Vec<f64> = traj.component(0).collect();
    let mean_x1 = x1.iter().sum::<f64>() / x1.len() as f64;
    let sign = symmetry_sign(mean_x1, sign_threshold);
    let regularity = classify_mle(mle, mle_threshold);
    let period_estimate = match regularity {
        Regularity::Regular => autocorrelation_period(&x1, traj.dt),
        Regularity::Chaotic => None,
    };
    Ok(AttractorSignature {
        label: AttractorLabel::for_sign(AttractorKind::Unknown, sign),
        regularity,
        mle,
        mean_x1,
        symmetry_sign: sign,
        bbox,
        peak_set: peaks_of(&x1),
        trough_set: troughs_of(&x1),
        period_estimate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchTolerances {
    pub bbox_overlap: f64,
    pub hausdorff: f64,
}

impl Default for MatchTolerances {
    fn default() -> Self {
        Self {
            bbox_overlap: 0.5,
            hausdorff: 0.2,
        }
    }
}

impl MatchTolerances {
    /// Both signatures are compared in their nonnegative-mean orientation,
    /// so a signature and its mirror image match mirrored references alike.
    pub fn matches(&self, a: &AttractorSignature, b: &AttractorSignature) -> bool {
        if a.regularity != b.regularity || a.symmetry_sign != b.symmetry_sign {
            return false;
        }
        let (a, b) = (a.canonical(), b.canonical());
        a.bbox.overlap_ratio(&b.bbox) > self.bbox_overlap && hausdorff(&a.peak_set, &b.peak_set) < self.hausdorff
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchOutcome {
    Known(AttractorLabel),
    NewAttractor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub label: AttractorLabel,
    pub signature: AttractorSignature,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttractorRegistry {
    #[serde(default)]
    pub tolerances: MatchTolerances,
    #[serde(default)]
    pub entries: Vec<RegistryEntry>,
}

impl AttractorRegistry {
    pub fn new(tolerances: MatchTolerances) -> Self {
        Self {
            tolerances,
            entries: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Distinct labels, sorted.
    pub fn labels(&self) -> Vec<AttractorLabel> {
        let mut v: Vec<_> = self.entries.iter().map(|e| e.label).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Add a reference. Several references may share a label; a reference
    /// that matches one carrying a different label is rejected.
    pub fn insert(&mut self, label: AttractorLabel, mut signature: AttractorSignature) -> Result<()> {
        let clash: Vec<String> = self
            .entries
            .iter()
            .filter(|e| e.label != label && self.tolerances.matches(&e.signature, &signature))
            .map(|e| e.label.to_string())
            .collect();
        if !clash.is_empty() {
            let mut all = clash;
            all.push(label.to_string());
            all.sort();
            all.dedup();
            return Err(Error::AmbiguousMatch(all));
        }
        signature.label = label;
        self.entries.push(RegistryEntry { label, signature });
        Ok(())
    }

    /// Add a reference and its mirror image under the partner label.
    pub fn insert_pair(&mut self, label: AttractorLabel, signature: AttractorSignature) -> Result<()> {
        let mirrored = signature.mirrored();
        self.insert(label, signature)?;
        if label.partner() != label {
            self.insert(label.partner(), mirrored)?;
        }
        Ok(())
    }

    /// Identify a signature. Two or more distinct matching labels is an
    /// error listing them in sorted order, so the outcome does not depend on
    /// insertion order.
    pub fn match_signature(&self, sig: &AttractorSignature) -> Result<MatchOutcome> {
        let mut hits: Vec<AttractorLabel> = self
            .entries
            .iter()
            .filter(|e| self.tolerances.matches(&e.signature, sig))
            .map(|e| e.label)
            .collect();
        hits.sort();
        hits.dedup();
        match hits.len() {
            0 => Ok(MatchOutcome::NewAttractor),
            1 => Ok(MatchOutcome::Known(hits[0])),
            _ => Err(Error::AmbiguousMatch(hits.iter().map(|l| l.to_string()).collect())),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rk::StepStats;
    use proptest::prelude::*;

    fn traj(dt: f64, states: Vec<[f64; 3]>) -> Trajectory {
        Trajectory {
            dt,
            times: (0..states.len()).map(|k| k as f64 * dt).collect(),
            states,
            status: Termination::Completed,
            stats: StepStats::default(),
        }
    }

    fn sine(n: usize, dt: f64) -> Trajectory {
        traj(dt, (0..n).map(|k| [(k as f64 * dt).sin(), 0.5, 0.0]).collect())
    }

    fn sig(peaks: Vec<f64>, sign: i8, bbox: BoundingBox) -> AttractorSignature {
        AttractorSignature {
            label: AttractorLabel::for_sign(AttractorKind::Unknown, sign),
            regularity: Regularity::Chaotic,
            mle: 0.005,
            mean_x1: sign as f64,
            symmetry_sign: sign,
            bbox,
            trough_set: peaks.iter().map(|p| p - 3.0).collect(),
            peak_set: peaks,
            period_estimate: None,
        }
    }

    fn unit_box(shift: f64) -> BoundingBox {
        BoundingBox {
            min: [shift, -1.0, -1.0],
            max: [shift + 2.0, 1.0, 1.0],
        }
    }

    #[test]
    fn sine_peaks_refined() {
        let t = sine(2000, 0.1);
        let peaks = extract_peaks(&t, 0);
        assert!(peaks.len() >= 30);
        for p in &peaks {
            assert!((p - 1.0).abs() < 1e-3, "{p}");
        }
        let raw: Vec<f64> = t
            .states
            .windows(3)
            .filter(|w| w[1][0] > w[0][0] && w[1][0] > w[2][0])
            .map(|w| w[1][0])
            .collect();
        let err = |v: &[f64]| v.iter().map(|p| (p - 1.0).abs()).sum::<f64>();
        assert!(err(&peaks) < err(&raw));
    }

    #[test]
    fn constant_trajectory() {
        let t = traj(0.1, vec![[0.0; 3]; 100]);
        assert!(extract_peaks(&t, 0).is_empty());
        let s = strip_transient(&t, Transient::default()).unwrap();
        assert!(s.states.iter().all(|x| *x == [0.0; 3]));
        assert_eq!(s.times[0], 4.0);
        let sig = signature_with(&s, 0.0, 1e-4, 1e-3).unwrap();
        assert_eq!(sig.regularity, Regularity::Regular);
        assert_eq!(sig.symmetry_sign, 0);
        assert_eq!(sig.bbox.min, sig.bbox.max);
        assert!(sig.is_stationary());
        assert_eq!(sig.period_estimate, None);
    }

    #[test]
    fn strip_is_idempotent_and_rejects_escape() {
        let t = sine(1001, 0.1);
        let once = strip_transient(&t, Transient::default()).unwrap();
        let twice = strip_transient(&once, Transient::default()).unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.times[0], 40.0);
        let by_time = strip_transient(&t, Transient::Time(40.0)).unwrap();
        assert_eq!(by_time, once);
        let esc = Trajectory { status: Termination::Escaped { t: 3.0 }, ..t };
        assert!(strip_transient(&esc, Transient::default()).is_err());
    }

    #[test]
    fn period_of_sine() {
        let t = sine(3000, 0.05);
        let x1: Vec<f64> = t.component(0).collect();
        let p = autocorrelation_period(&x1, t.dt).unwrap();
        assert!((p - std::f64::consts::TAU).abs() < 0.06, "{p}");
        assert_eq!(autocorrelation_period(&[1.0; 100], 0.1), None);
    }

    #[test]
    fn hausdorff_examples() {
        assert_eq!(hausdorff(&[], &[]), 0.0);
        assert_eq!(hausdorff(&[1.0], &[]), f64::INFINITY);
        assert!((hausdorff(&[1.0, 2.0], &[1.1]) - 0.9).abs() < 1e-12);
        assert!((hausdorff(&[1.0, 2.0, 3.0], &[1.0, 3.05]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overlap_ratio_examples() {
        let a = unit_box(0.0);
        assert_eq!(a.overlap_ratio(&a), 1.0);
        assert!((a.overlap_ratio(&unit_box(1.0)) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(a.overlap_ratio(&unit_box(5.0)), 0.0);
        let p = BoundingBox { min: [0.0; 3], max: [0.0; 3] };
        assert_eq!(p.overlap_ratio(&p), 1.0);
    }

    #[test]
    fn label_text_round_trip() {
        for l in [
            AttractorLabel::new(AttractorKind::SECH, 2),
            AttractorLabel::new(AttractorKind::H, 1),
            AttractorLabel::new(AttractorKind::Unknown, 0),
        ] {
            assert_eq!(l.to_string().parse::<AttractorLabel>().unwrap(), l);
        }
        assert!("XYZ1".parse::<AttractorLabel>().is_err());
    }

    fn sample_registry() -> AttractorRegistry {
        let mut r = AttractorRegistry::default();
        r.insert_pair(AttractorLabel::new(AttractorKind::H, 1), sig(vec![1.8, 2.5, 3.4], 1, unit_box(0.2)))
            .unwrap();
        r.insert_pair(AttractorLabel::new(AttractorKind::SECH, 1), sig(vec![1.5, 2.5, 3.4], 1, unit_box(0.5)))
            .unwrap();
        r
    }

    #[test]
    fn registry_matching() {
        let r = sample_registry();
        let h = sig(vec![1.85, 2.6, 3.35], 1, unit_box(0.25));
        assert_eq!(r.match_signature(&h).unwrap(), MatchOutcome::Known(AttractorLabel::new(AttractorKind::H, 1)));
        assert_eq!(
            r.match_signature(&h.mirrored()).unwrap(),
            MatchOutcome::Known(AttractorLabel::new(AttractorKind::H, 2))
        );
        let far = sig(vec![2.0, 2.5, 3.4], 1, unit_box(9.0));
        assert_eq!(r.match_signature(&far).unwrap(), MatchOutcome::NewAttractor);
        let cycle = AttractorSignature { regularity: Regularity::Regular, ..h.clone() };
        assert_eq!(r.match_signature(&cycle).unwrap(), MatchOutcome::NewAttractor);
        let between = sig(vec![1.65, 2.5, 3.4], 1, unit_box(0.3));
        match r.match_signature(&between) {
            Err(Error::AmbiguousMatch(v)) => assert_eq!(v, vec!["SECH1".to_string(), "H1".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn clashing_reference_rejected() {
        let mut r = sample_registry();
        let clash = sig(vec![1.8, 2.5, 3.4], 1, unit_box(0.2));
        assert!(r.insert(AttractorLabel::new(AttractorKind::SEC, 1), clash.clone()).is_err());
        assert!(r.insert(AttractorLabel::new(AttractorKind::H, 1), clash).is_ok());
    }

    #[test]
    fn registry_toml_round_trip() {
        let mut r = sample_registry();
        r.entries[0].signature.period_estimate = Some(61.5);
        let text = r.to_toml().unwrap();
        assert_eq!(AttractorRegistry::from_toml(&text).unwrap(), r);
    }

    proptest! {
        #[test]
        fn mirror_signature_is_mirrored(
            xs in prop::collection::vec(-3.0f64..3.0, 10..200),
            ys in prop::collection::vec(-3.0f64..3.0, 10..200),
        ) {
            let n = xs.len().min(ys.len());
            let t = traj(0.1, (0..n).map(|k| [xs[k], ys[k], xs[k] * ys[k]]).collect());
            let s = signature_with(&t, 1e-5, 1e-4, 1e-3).unwrap();
            let m = signature_with(&t.mirrored(), 1e-5, 1e-4, 1e-3).unwrap();
            prop_assert_eq!(m.symmetry_sign, -s.symmetry_sign);
            prop_assert_eq!(&m.peak_set, &s.mirrored().peak_set);
            prop_assert_eq!(&m.trough_set, &s.mirrored().trough_set);
            prop_assert_eq!(m.bbox, s.bbox.mirrored());
            prop_assert_eq!(m.mirrored().canonical(), s.canonical());
            for x in &t.states {
                prop_assert!(s.bbox.contains(x));
            }
        }

        #[test]
        fn matching_independent_of_insertion_order(
            perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
            shift in -0.3f64..0.3,
            low in 1.4f64..2.2,
        ) {
            let base = sample_registry();
            let mut shuffled = AttractorRegistry::default();
            for &i in &perm {
                let e = &base.entries[i];
                shuffled.insert(e.label, e.signature.clone()).unwrap();
            }
            let probe = sig(vec![low, 2.5, 3.4], 1, unit_box(0.3 + shift));
            let a = base.match_signature(&probe);
            let b = shuffled.match_signature(&probe);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn mirror_coherent_matching(low in 1.4f64..2.2, shift in -0.3f64..0.3) {
            let r = sample_registry();
            let probe = sig(vec![low, 2.5, 3.4], 1, unit_box(0.3 + shift));
            match (r.match_signature(&probe), r.match_signature(&probe.mirrored())) {
                (Ok(MatchOutcome::Known(a)), Ok(MatchOutcome::Known(b))) => prop_assert_eq!(a.partner(), b),
                (Ok(MatchOutcome::NewAttractor), Ok(MatchOutcome::NewAttractor)) => {}
                (Err(_), Err(_)) => {}
                other => prop_assert!(false, "{:?}", other),
            }
        }
    }
}
