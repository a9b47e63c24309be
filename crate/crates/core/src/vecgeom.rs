//! Exact 3-vector geometry.
//!
//! Everything here is a pure function on `Copy` values: unit vectors, the
//! perpendicular projection `P_y`, the reflection `I - 3 e_y e_yᵀ`, and the two
//! bilinear forms that carry the convective nonlinearity through the cascade.
//! Only the direction `e_y` of the first argument ever enters, so every
//! operator is invariant under `y -> c y` for `c > 0`.

use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// Vectors shorter than this are treated as the zero vector.
pub const ZERO_NORM: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("direction of a zero-length vector is undefined (|y| = {norm:e})")]
pub struct ZeroVectorError {
    pub norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const E1: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const E2: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const E3: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Vec3 { x1, x2, x3 }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x1, self.x2, self.x3]
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x1 * other.x1 + self.x2 * other.x2 + self.x3 * other.x3
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.x2 * other.x3 - self.x3 * other.x2,
            self.x3 * other.x1 - self.x1 * other.x3,
            self.x1 * other.x2 - self.x2 * other.x1,
        )
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        // hypot-style scaling keeps tiny and huge vectors finite
        let m = self.x1.abs().max(self.x2.abs()).max(self.x3.abs());
        if m == 0.0 || !m.is_finite() {
            return m;
        }
        let (a, b, c) = (self.x1 / m, self.x2 / m, self.x3 / m);
        m * (a * a + b * b + c * c).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.x3.is_finite()
    }

    pub fn max_abs(self) -> f64 {
        self.x1.abs().max(self.x2.abs()).max(self.x3.abs())
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Vec3 {
        Vec3::new(f(self.x1), f(self.x2), f(self.x3))
    }

    pub fn zip_map(self, other: Vec3, f: impl Fn(f64, f64) -> f64) -> Vec3 {
        Vec3::new(f(self.x1, other.x1), f(self.x2, other.x2), f(self.x3, other.x3))
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x1,
            1 => &self.x2,
            2 => &self.x3,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x1 + o.x1, self.x2 + o.x2, self.x3 + o.x3)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x1 - o.x1, self.x2 - o.x2, self.x3 - o.x3)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x1, -self.x2, -self.x3)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x1 * s, self.x2 * s, self.x3 * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x1 / s, self.x2 / s, self.x3 / s)
    }
}

impl std::iter::Sum for Vec3 {
    fn sum<I: Iterator<Item = Vec3>>(iter: I) -> Vec3 {
        iter.fold(Vec3::ZERO, |a, b| a + b)
    }
}

/// `y / |y|`.
pub fn unit(y: Vec3) -> Result<Vec3, ZeroVectorError> {
    let n = y.norm();
    if !(n >= ZERO_NORM) {
        return Err(ZeroVectorError { norm: n });
    }
    Ok(y / n)
}

/// `P_y u = u - (u·e_y) e_y`.
pub fn proj_perp(y: Vec3, u: Vec3) -> Result<Vec3, ZeroVectorError> {
    let e = unit(y)?;
    Ok(proj_perp_unit(e, u))
}

/// `(I - 3 e_y e_yᵀ) u`.
pub fn reflect(y: Vec3, u: Vec3) -> Result<Vec3, ZeroVectorError> {
    let e = unit(y)?;
    Ok(reflect_unit(e, u))
}

/// `b₁(y; u, v) = (u·e_y) P_y v + (v·e_y) P_y u`.
pub fn b1(y: Vec3, u: Vec3, v: Vec3) -> Result<Vec3, ZeroVectorError> {
    let e = unit(y)?;
    Ok(b1_unit(e, u, v))
}

/// `b₂(y; u, v) = b₁(y; u, v) + (u·(I - 3 e_y e_yᵀ) v) e_y`.
pub fn b2(y: Vec3, u: Vec3, v: Vec3) -> Result<Vec3, ZeroVectorError> {
    let e = unit(y)?;
    Ok(b2_unit(e, u, v))
}

// Variants taking an already-normalized direction; the hot loops in the
// cascade and the oracle normalize once and apply several operators.

#[inline]
pub fn proj_perp_unit(e: Vec3, u: Vec3) -> Vec3 {
    u - e * u.dot(e)
}

#[inline]
pub fn reflect_unit(e: Vec3, u: Vec3) -> Vec3 {
    u - e * (3.0 * u.dot(e))
}

#[inline]
pub fn b1_unit(e: Vec3, u: Vec3, v: Vec3) -> Vec3 {
    proj_perp_unit(e, v) * u.dot(e) + proj_perp_unit(e, u) * v.dot(e)
}

#[inline]
pub fn b2_unit(e: Vec3, u: Vec3, v: Vec3) -> Vec3 {
    b1_unit(e, u, v) + e * u.dot(reflect_unit(e, v))
}
