//! Equilibria, characteristic polynomials and their roots, the saddle
//! classification of the integer-order system, and the instability measure
//! `iota = q - 2 alpha_min / pi` of the commensurate fractional system.

use std::f64::consts::PI;

use nalgebra::{Complex, Matrix3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::system::{eval_jacobian, Jacobian3, State3, SystemParams};

/// Below this relative discriminant the closed form hands over to the
/// companion matrix.
const DISCRIMINANT_FLOOR: f64 = 1e-14;
const HYPERBOLIC_TOL: f64 = 1e-9;
const CRITICAL_TOL: f64 = 1e-12;
const RANK_TOL: f64 = 1e-9;

/// Monic cubic `l^3 + c2 l^2 + c1 l + c0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicPolynomial {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl CubicPolynomial {
    pub fn new(c2: f64, c1: f64, c0: f64) -> Self {
        Self { c2, c1, c0 }
    }

    /// Coefficients from the leading one down: `[1, c2, c1, c0]`.
    pub fn coefficients(&self) -> [f64; 4] {
        [1.0, self.c2, self.c1, self.c0]
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        ((z + self.c2) * z + self.c1) * z + self.c0
    }

    fn derivative(&self, z: Complex64) -> Complex64 {
        (z * 3.0 + 2.0 * self.c2) * z + self.c1
    }

    /// Number of sign changes in the coefficient sequence (zeros skipped).
    pub fn sign_changes(&self) -> usize {
        let signs: Vec<f64> = self
            .coefficients()
            .into_iter()
            .filter(|c| *c != 0.0)
            .map(f64::signum)
            .collect();
        signs.windows(2).filter(|w| w[0] != w[1]).count()
    }

    pub fn sign_pattern(&self) -> [i8; 4] {
        self.coefficients().map(|c| if c > 0.0 { 1 } else if c < 0.0 { -1 } else { 0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumSet {
    pub origin: State3,
    /// `X1` (positive `x1`) and its mirror `X2`; absent when the radicand is
    /// negative.
    pub outer: Option<(State3, State3)>,
}

impl EquilibriumSet {
    pub fn all(&self) -> Vec<State3> {
        let mut v = vec![self.origin];
        if let Some((x1, x2)) = self.outer {
            v.push(x1);
            v.push(x2);
        }
        v
    }

    pub fn has_outer(&self) -> bool {
        self.outer.is_some()
    }
}

/// Closed-form equilibria. Besides the origin, `x2^2 = c + a e / (b f)`,
/// `x1 = f x2 / e` and `x3 = -x1`.
pub fn equilibria(p: &SystemParams) -> Result<EquilibriumSet> {
    p.validate()?;
    let radicand = p.c + p.a * p.e / (p.b * p.f);
    let outer = (radicand >= 0.0).then(|| {
        let x2 = radicand.sqrt();
        let x1 = p.f * x2 / p.e;
        let plus = State3::new(x1, x2, -x1);
        (plus, -plus)
    });
    Ok(EquilibriumSet {
        origin: State3::ORIGIN,
        outer,
    })
}

/// `det(l I - J)` from the trace, principal minors and determinant of `J`.
pub fn char_poly_of(j: &Jacobian3) -> CubicPolynomial {
    CubicPolynomial::new(-j.trace(), j.principal_minor_sum(), -j.determinant())
}

pub fn char_poly(p: &SystemParams, eq: State3) -> Result<CubicPolynomial> {
    Ok(char_poly_of(&eval_jacobian(p, eq)?))
}

/// Expanded symbolic coefficients at the origin.
pub fn char_poly_origin_symbolic(p: &SystemParams) -> CubicPolynomial {
    let SystemParams { a, b, c, d, e, f } = *p;
    CubicPolynomial::new(-b * c, d * f - a * d, -(b * c * d * f + a * d * e))
}

/// Expanded symbolic coefficients at `X1` / `X2` (identical by symmetry).
pub fn char_poly_outer_symbolic(p: &SystemParams) -> CubicPolynomial {
    let SystemParams { a, b, c, d, e, f } = *p;
    CubicPolynomial::new(
        a * e / f,
        a * d + 2.0 * b * c * d * f / e + d * f,
        2.0 * a * d * e + 2.0 * b * c * d * f,
    )
}

fn polish(poly: &CubicPolynomial, mut z: Complex64) -> Complex64 {
    for _ in 0..3 {
        let d = poly.derivative(z);
        if d.norm() == 0.0 {
            break;
        }
        let next = z - poly.eval(z) / d;
        if !(next.re.is_finite() && next.im.is_finite()) {
            break;
        }
        if poly.eval(next).norm() >= poly.eval(z).norm() {
            break;
        }
        z = next;
    }
    z
}

fn companion_roots(poly: &CubicPolynomial) -> [Complex64; 3] {
    let m = Matrix3::new(
        -poly.c2, -poly.c1, -poly.c0, //
        1.0, 0.0, 0.0, //
        0.0, 1.0, 0.0,
    );
    let ev = m.complex_eigenvalues();
    [ev[0], ev[1], ev[2]].map(|c: Complex<f64>| Complex64::new(c.re, c.im))
}

fn sort_roots(mut roots: [Complex64; 3]) -> [Complex64; 3] {
    roots.sort_by(|x, y| {
        let xr = x.im == 0.0;
        let yr = y.im == 0.0;
        yr.cmp(&xr)
            .then(if xr && yr {
                x.re.total_cmp(&y.re)
            } else {
                x.im.total_cmp(&y.im)
            })
    });
    roots
}

/// Roots of a monic cubic. Real roots come first in ascending order, then the
/// conjugate pair with negative imaginary part first.
pub fn cubic_roots(poly: &CubicPolynomial) -> [Complex64; 3] {
    let CubicPolynomial { c2, c1, c0 } = *poly;
    let shift = c2 / 3.0;
    let p = c1 - c2 * c2 / 3.0;
    let q = 2.0 * c2 * c2 * c2 / 27.0 - c2 * c1 / 3.0 + c0;
    let disc = -(4.0 * p * p * p + 27.0 * q * q);
    let scale = 4.0 * (p * p * p).abs() + 27.0 * q * q;

    let raw: [Complex64; 3] = if scale == 0.0 {
        // triple root
        [Complex64::new(-shift, 0.0); 3]
    } else if disc.abs() <= DISCRIMINANT_FLOOR * scale {
        let mut r = companion_roots(poly);
        // near-repeated roots: a tiny imaginary part is noise
        for z in &mut r {
            if z.im.abs() <= 1e-7 * (1.0 + z.re.abs()) {
                z.im = 0.0;
            }
        }
        r
    } else if disc > 0.0 {
        // three distinct real roots, trigonometric form
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        [0.0, 1.0, 2.0].map(|k| Complex64::new(m * (theta - 2.0 * PI * k / 3.0).cos() - shift, 0.0))
    } else {
        // one real root, Cardano
        let s = (q * q / 4.0 + p * p * p / 27.0).sqrt();
        let u = (-q / 2.0 + s).cbrt();
        let v = (-q / 2.0 - s).cbrt();
        let real = u + v - shift;
        let re = -(u + v) / 2.0 - shift;
        let im = (u - v).abs() * 3f64.sqrt() / 2.0;
        [
            Complex64::new(real, 0.0),
            Complex64::new(re, -im),
            Complex64::new(re, im),
        ]
    };

    let mut roots = raw;
    for z in &mut roots {
        let polished = polish(poly, *z);
        *z = if z.im == 0.0 {
            Complex64::new(polished.re, 0.0)
        } else {
            polished
        };
    }
    // keep conjugate pairs exact
    let complex: Vec<usize> = (0..3).filter(|&i| roots[i].im != 0.0).collect();
    if complex.len() == 2 {
        let (i, j) = (complex[0], complex[1]);
        let (lo, hi) = if roots[i].im < 0.0 { (i, j) } else { (j, i) };
        let z = roots[hi];
        roots[lo] = z.conj();
    }
    sort_roots(roots)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SaddleClass {
    /// One real positive eigenvalue, complex pair with negative real part
    /// (spiral saddle of index 1).
    AttractingFocusSaddle,
    /// One real negative eigenvalue, complex pair with positive real part
    /// (spiral saddle of index 2).
    RepellingFocusSaddle,
    Other,
}

impl SaddleClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            SaddleClass::AttractingFocusSaddle => "attracting_focus_saddle",
            SaddleClass::RepellingFocusSaddle => "repelling_focus_saddle",
            SaddleClass::Other => "other",
        }
    }
}

pub fn classify_io(eigenvalues: &[Complex64; 3]) -> (SaddleClass, bool) {
    let hyperbolic = eigenvalues.iter().all(|z| z.re.abs() > HYPERBOLIC_TOL);
    let reals: Vec<&Complex64> = eigenvalues.iter().filter(|z| z.im == 0.0).collect();
    let pair: Vec<&Complex64> = eigenvalues.iter().filter(|z| z.im != 0.0).collect();
    let class = if reals.len() == 1 && pair.len() == 2 {
        let r = reals[0].re;
        let pr = pair[0].re;
        if r > 0.0 && pr < 0.0 {
            SaddleClass::AttractingFocusSaddle
        } else if r < 0.0 && pr > 0.0 {
            SaddleClass::RepellingFocusSaddle
        } else {
            SaddleClass::Other
        }
    } else {
        SaddleClass::Other
    };
    (class, hyperbolic)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoStability {
    Unstable,
    AsymptoticallyStable,
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstabilityMeasure {
    pub iota: f64,
    pub alpha_min: f64,
    pub verdict: FoStability,
}

pub fn instability_measure(eigenvalues: &[Complex64], q: f64) -> Result<InstabilityMeasure> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParams(format!("fractional order {q} outside (0, 1]")));
    }
    if eigenvalues.iter().any(|z| z.norm() == 0.0) {
        return Err(Error::ZeroEigenvalue);
    }
    let alpha_min = eigenvalues
        .iter()
        .map(|z| z.arg().abs())
        .fold(f64::INFINITY, f64::min);
    let iota = q - 2.0 * alpha_min / PI;
    let verdict = if iota.abs() < CRITICAL_TOL {
        FoStability::Critical
    } else if iota > 0.0 {
        FoStability::Unstable
    } else {
        FoStability::AsymptoticallyStable
    };
    Ok(InstabilityMeasure {
        iota,
        alpha_min,
        verdict,
    })
}

/// Dimension of the eigenspace of `lambda`, from the numerical rank of
/// `J - lambda I`.
pub fn geometric_multiplicity(j: &Jacobian3, lambda: Complex64) -> usize {
    let m = Matrix3::from_fn(|r, c| {
        let v = Complex::new(j.0[r][c], 0.0);
        if r == c {
            v - Complex::new(lambda.re, lambda.im)
        } else {
            v
        }
    });
    let sv = m.singular_values();
    let top = sv.max().max(1.0);
    sv.iter().filter(|s| **s <= RANK_TOL * top).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub equilibrium: State3,
    pub char_poly: CubicPolynomial,
    pub eigenvalues: [Complex64; 3],
    pub saddle_class: SaddleClass,
    pub hyperbolic: bool,
    /// Smallest `|arg|` over the eigenvalues.
    pub alpha_min: f64,
    pub fractional: Option<FractionalStability>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalStability {
    pub q: f64,
    pub iota: f64,
    pub verdict: FoStability,
    /// For critical equilibria: whether every critical eigenvalue has
    /// geometric multiplicity one.
    pub critical_simple: Option<bool>,
}

impl StabilityReport {
    pub fn iota(&self) -> Option<f64> {
        self.fractional.map(|f| f.iota)
    }

    pub fn is_unstable_io(&self) -> bool {
        self.eigenvalues.iter().any(|z| z.re > 0.0)
    }
}

pub fn stability_report(p: &SystemParams, eq: State3, q: Option<f64>) -> Result<StabilityReport> {
    let j = eval_jacobian(p, eq)?;
    let poly = char_poly_of(&j);
    let eigenvalues = cubic_roots(&poly);
    let (saddle_class, hyperbolic) = classify_io(&eigenvalues);
    let alpha_min = eigenvalues
        .iter()
        .map(|z| z.arg().abs())
        .fold(f64::INFINITY, f64::min);
    let fractional = match q {
        None => None,
        Some(q) => {
            let m = instability_measure(&eigenvalues, q)?;
            let critical_simple = (m.verdict == FoStability::Critical).then(|| {
                eigenvalues
                    .iter()
                    .filter(|z| (q - 2.0 * z.arg().abs() / PI).abs() < CRITICAL_TOL)
                    .all(|z| geometric_multiplicity(&j, *z) == 1)
            });
            Some(FractionalStability {
                q,
                iota: m.iota,
                verdict: m.verdict,
                critical_simple,
            })
        }
    };
    Ok(StabilityReport {
        equilibrium: eq,
        char_poly: poly,
        eigenvalues,
        saddle_class,
        hyperbolic,
        alpha_min,
        fractional,
    })
}

/// Reports for `X0`, and `X1`, `X2` when they exist, in that order.
pub fn analyze_equilibria(p: &SystemParams, q: Option<f64>) -> Result<Vec<StabilityReport>> {
    equilibria(p)?
        .all()
        .into_iter()
        .map(|eq| stability_report(p, eq, q))
        .collect()
}
