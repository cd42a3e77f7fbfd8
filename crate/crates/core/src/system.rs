//! The three-variable economic model with foreign financing:
//!
//! ```text
//! x1' = a x2 + b x1 (c - x2^2)
//! x2' = d (x1 + x3)
//! x3' = e x1 - f x2
//! ```
//!
//! `x1` is household savings, `x2` the GDP and `x3` the foreign capital
//! inflow. The right-hand side is odd, so `x -> -x` maps solutions onto
//! solutions.

use std::ops::{Index, Neg};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An autonomous vector field on `R^N`.
pub trait VectorField<const N: usize>: Sync {
    fn eval(&self, x: &[f64; N]) -> [f64; N];
}

/// A vector field that also knows its Jacobian.
pub trait Linearized<const N: usize>: VectorField<N> {
    fn jacobian(&self, x: &[f64; N]) -> [[f64; N]; N];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl SystemParams {
    pub const B: f64 = 0.01;
    pub const C: f64 = 1.0;
    /// Inverse capital/output ratio. Rounding this to fewer digits changes
    /// the attractor structure, keep all six decimals.
    pub const D: f64 = 0.031847;
    pub const E: f64 = 0.19;
    pub const F: f64 = 0.25;

    /// The reference coefficient set with `a` left free.
    pub fn preset(a: f64) -> Self {
        Self {
            a,
            b: Self::B,
            c: Self::C,
            d: Self::D,
            e: Self::E,
            f: Self::F,
        }
    }

    pub fn with_a(self, a: f64) -> Self {
        Self { a, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.a, self.b, self.c, self.d, self.e, self.f];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("non-finite coefficient in {self:?}")));
        }
        if self.b <= 0.0 || self.e <= 0.0 || self.f <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "b, e and f must be positive (b={}, e={}, f={})",
                self.b, self.e, self.f
            )));
        }
        Ok(())
    }
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::preset(0.05)
    }
}

/// A point `(x1, x2, x3)` in phase space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State3(pub [f64; 3]);

impl State3 {
    pub const ORIGIN: State3 = State3([0.0; 3]);

    pub fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Self([x1, x2, x3])
    }

    pub fn x1(&self) -> f64 {
        self.0[0]
    }

    pub fn x2(&self) -> f64 {
        self.0[1]
    }

    pub fn x3(&self) -> f64 {
        self.0[2]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &State3) -> f64 {
        (0..3)
            .map(|i| (self.0[i] - other.0[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn check_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidState(format!("non-finite state {:?}", self.0)))
        }
    }
}

impl From<[f64; 3]> for State3 {
    fn from(v: [f64; 3]) -> Self {
        Self(v)
    }
}

impl From<State3> for [f64; 3] {
    fn from(s: State3) -> Self {
        s.0
    }
}

impl Index<usize> for State3 {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Neg for State3 {
    type Output = State3;

    fn neg(self) -> State3 {
        mirror(self)
    }
}

/// Row-major 3x3 Jacobian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian3(pub [[f64; 3]; 3]);

impl Jacobian3 {
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.0[row][col]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// Sum of the three principal 2x2 minors.
    pub fn principal_minor_sum(&self) -> f64 {
        let m = &self.0;
        (m[0][0] * m[1][1] - m[0][1] * m[1][0])
            + (m[0][0] * m[2][2] - m[0][2] * m[2][0])
            + (m[1][1] * m[2][2] - m[1][2] * m[2][1])
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
}

#[inline]
fn rhs(p: &SystemParams, x: &[f64; 3]) -> [f64; 3] {
    let [x1, x2, x3] = *x;
    [
        p.a * x2 + p.b * x1 * (p.c - x2 * x2),
        p.d * (x1 + x3),
        p.e * x1 - p.f * x2,
    ]
}

#[inline]
fn jacobian(p: &SystemParams, x: &[f64; 3]) -> [[f64; 3]; 3] {
    let [x1, x2, _] = *x;
    [
        [p.b * (p.c - x2 * x2), p.a - 2.0 * p.b * x1 * x2, 0.0],
        [p.d, 0.0, p.d],
        [p.e, -p.f, 0.0],
    ]
}

impl VectorField<3> for SystemParams {
    #[inline]
    fn eval(&self, x: &[f64; 3]) -> [f64; 3] {
        rhs(self, x)
    }
}

impl Linearized<3> for SystemParams {
    #[inline]
    fn jacobian(&self, x: &[f64; 3]) -> [[f64; 3]; 3] {
        jacobian(self, x)
    }
}

/// Time derivative of the state.
pub fn eval_rhs(p: &SystemParams, x: State3) -> Result<State3> {
    x.check_finite()?;
    Ok(State3(rhs(p, &x.0)))
}

pub fn eval_jacobian(p: &SystemParams, x: State3) -> Result<Jacobian3> {
    x.check_finite()?;
    Ok(Jacobian3(jacobian(p, &x.0)))
}

/// The odd symmetry `x -> -x`.
pub fn mirror(x: State3) -> State3 {
    State3([-x.0[0], -x.0[1], -x.0[2]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn origin_is_fixed() {
        let p = SystemParams::preset(0.05);
        assert_eq!(eval_rhs(&p, State3::ORIGIN).unwrap(), State3::ORIGIN);
    }

    #[test]
    fn hand_substitution_at_ones() {
        let p = SystemParams::preset(0.05);
        let v = eval_rhs(&p, State3::new(1.0, 1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(v.x1(), 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(v.x2(), 0.063694, epsilon = 1e-15);
        assert_abs_diff_eq!(v.x3(), -0.06, epsilon = 1e-15);
    }

    #[test]
    fn non_finite_state_is_rejected() {
        let p = SystemParams::preset(0.05);
        assert!(matches!(
            eval_rhs(&p, State3::new(f64::NAN, 0.0, 0.0)),
            Err(Error::InvalidState(_))
        ));
        assert!(eval_jacobian(&p, State3::new(0.0, f64::INFINITY, 0.0)).is_err());
    }

    #[test]
    fn jacobian_at_origin() {
        let a = 0.052;
        let j = eval_jacobian(&SystemParams::preset(a), State3::ORIGIN).unwrap();
        assert_eq!(j.0[0], [0.01, a, 0.0]);
        assert_eq!(j.0[1], [0.031847, 0.0, 0.031847]);
        assert_eq!(j.0[2], [0.19, -0.25, 0.0]);
    }

    fn central_difference(p: &SystemParams, x: [f64; 3], h: f64) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for col in 0..3 {
            let mut plus = x;
            let mut minus = x;
            plus[col] += h;
            minus[col] -= h;
            let fp = rhs(p, &plus);
            let fm = rhs(p, &minus);
            for row in 0..3 {
                out[row][col] = (fp[row] - fm[row]) / (2.0 * h);
            }
        }
        out
    }

    #[test]
    fn jacobian_matches_central_difference() {
        let p = SystemParams::preset(0.05);
        let x = [1.0, 2.0, -1.0];
        let fd = central_difference(&p, x, 1e-5);
        let j = p.jacobian(&x);
        for r in 0..3 {
            for c in 0..3 {
                assert!((j[r][c] - fd[r][c]).abs() < 1e-6, "({r},{c})");
            }
        }
    }

    #[test]
    fn planar_reduction_is_van_der_pol_like() {
        // With x3 pinned to zero the first two rows are the planar system
        // x1' = a x2 + b x1 (c - x2^2), x2' = d x1.
        let p = SystemParams::preset(0.07);
        let (x1, x2) = (0.3, -1.7);
        let v = rhs(&p, &[x1, x2, 0.0]);
        assert_eq!(v[0], p.a * x2 + p.b * x1 * (p.c - x2 * x2));
        assert_eq!(v[1], p.d * x1);
    }

    #[test]
    fn mirror_examples() {
        let x = State3::new(1.0, 2.0, 3.0);
        assert_eq!(mirror(x), State3::new(-1.0, -2.0, -3.0));
        assert_eq!(mirror(mirror(x)), x);
    }

    #[test]
    fn validate_rejects_nonpositive_b() {
        let mut p = SystemParams::preset(0.05);
        p.b = 0.0;
        assert!(p.validate().is_err());
        assert!(SystemParams::preset(0.05).validate().is_ok());
    }

    proptest! {
        #[test]
        fn rhs_is_odd_bitwise(
            a in 0.0f64..0.2,
            x1 in -5.0f64..5.0, x2 in -5.0f64..5.0, x3 in -5.0f64..5.0,
        ) {
            let p = SystemParams::preset(a);
            let x = State3::new(x1, x2, x3);
            let lhs = eval_rhs(&p, mirror(x)).unwrap();
            let rhs = mirror(eval_rhs(&p, x).unwrap());
            prop_assert_eq!(lhs.0.map(f64::to_bits), rhs.0.map(f64::to_bits));
        }

        #[test]
        fn jacobian_is_even(
            x1 in -5.0f64..5.0, x2 in -5.0f64..5.0, x3 in -5.0f64..5.0,
        ) {
            let p = SystemParams::preset(0.05);
            let x = State3::new(x1, x2, x3);
            prop_assert_eq!(
                eval_jacobian(&p, x).unwrap(),
                eval_jacobian(&p, mirror(x)).unwrap()
            );
        }

        #[test]
        fn jacobian_consistent_with_finite_differences(
            x1 in -5.0f64..5.0, x2 in -5.0f64..5.0, x3 in -5.0f64..5.0,
        ) {
            let p = SystemParams::preset(0.052);
            let x = [x1, x2, x3];
            let fd = central_difference(&p, x, 1e-5);
            let j = p.jacobian(&x);
            let worst = (0..9).map(|k| (j[k / 3][k % 3] - fd[k / 3][k % 3]).abs()).fold(0.0, f64::max);
            prop_assert!(worst < 1e-5);
        }
    }
}
