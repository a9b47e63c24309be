//! Heat kernel, Gaussian ball mass, and the Oseen-type tensor Γ.

use std::f64::consts::PI;
use std::ops::{Add, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::QuadValue;
use crate::vecgeom::{Vec3, ZERO_NORM};

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Error function, accurate to about 1e-15 relative.
pub fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 2.5 {
        erf_series(x)
    } else {
        1.0 - erfc_cf(x)
    }
}

/// Complementary error function `1 - erf(x)` without cancellation for large x.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.5 {
        1.0 - erf_series(x)
    } else {
        erfc_cf(x)
    }
}

// erf(x) = 2/√π e^{-x²} Σ_{n≥0} 2ⁿ x^{2n+1} / (2n+1)!!   (all terms positive)
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

// erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))), modified Lentz.
fn erfc_cf(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..2000 {
        let a = 0.5 * k as f64;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (f * PI.sqrt())
}

/// Brownian transition density `(2πt)^{-3/2} exp(-|y|²/(2t))`.
pub fn heat_kernel(y: Vec3, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("heat kernel needs t > 0, got {t}")));
    }
    Ok(heat_kernel_r2(y.norm_sq(), t))
}

/// Heat kernel from the squared radius; `t > 0` is the caller's contract.
#[inline]
pub fn heat_kernel_r2(r2: f64, t: f64) -> f64 {
    (2.0 * PI * t).powf(-1.5) * (-r2 / (2.0 * t)).exp()
}

/// Mass of the ball of radius `r` under `K(·, 2νs)`, with `nu_s = ν·s`:
/// `erf(a) - (2/√π) a e^{-a²}`, `a = r / (2√(νs))`.
pub fn ball_mass(r: f64, nu_s: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::domain(format!("ball mass needs r >= 0, got {r}")));
    }
    if !(nu_s > 0.0) {
        return Err(Error::domain(format!("ball mass needs nu*s > 0, got {nu_s}")));
    }
    Ok(ball_mass_scaled(r / (2.0 * nu_s.sqrt())))
}

/// Ball mass as a function of `a = r/(2√(νs))`.
pub fn ball_mass_scaled(a: f64) -> f64 {
    if a == f64::INFINITY {
        return 1.0;
    }
    if a < 3.0 {
        // drop the n = 0 term of the erf series: it cancels a e^{-a²} exactly
        let a2 = a * a;
        let mut term = a;
        let mut sum = 0.0;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= 2.0 * a2 / (2.0 * n + 1.0);
            sum += term;
            if term <= sum * 1e-17 {
                break;
            }
        }
        (FRAC_2_SQRT_PI * (-a2).exp() * sum).min(1.0)
    } else {
        (erf(a) - FRAC_2_SQRT_PI * a * (-a * a).exp()).clamp(0.0, 1.0)
    }
}

/// Row-major 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn from_rows(r0: Vec3, r1: Vec3, r2: Vec3) -> Self {
        Mat3([r0.to_array(), r1.to_array(), r2.to_array()])
    }

    pub fn from_cols(c0: Vec3, c1: Vec3, c2: Vec3) -> Self {
        Mat3::from_rows(c0, c1, c2).transpose()
    }

    pub fn outer(a: Vec3, b: Vec3) -> Self {
        let a = a.to_array();
        let b = b.to_array();
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i] * b[j];
            }
        }
        Mat3(m)
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3::from_array(self.0[i])
    }

    pub fn col(&self, j: usize) -> Vec3 {
        Vec3::new(self.0[0][j], self.0[1][j], self.0[2][j])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Mat3([[m[0][0], m[1][0], m[2][0]], [m[0][1], m[1][1], m[2][1]], [m[0][2], m[1][2], m[2][2]]])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        Vec3::new(self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v))
    }

    pub fn matmul(&self, o: &Mat3) -> Mat3 {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Mat3(m)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn asymmetry(&self) -> f64 {
        (*self - self.transpose()).max_abs()
    }

    pub fn determinant(&self) -> f64 {
        self.row(0).dot(self.row(1).cross(self.row(2)))
    }

    /// Rotation by `angle` about `axis` (Rodrigues).
    pub fn rotation(axis: Vec3, angle: f64) -> Self {
        let n = axis.norm();
        let k = if n > 0.0 { axis / n } else { Vec3::E3 };
        let kx = Mat3([[0.0, -k.x3, k.x2], [k.x3, 0.0, -k.x1], [-k.x2, k.x1, 0.0]]);
        Mat3::IDENTITY + kx * angle.sin() + kx.matmul(&kx) * (1.0 - angle.cos())
    }
}

impl Index<(usize, usize)> for Mat3 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, o: Mat3) -> Mat3 {
        let mut m = self.0;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += o.0[i][j];
            }
        }
        Mat3(m)
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, o: Mat3) -> Mat3 {
        self + (-o)
    }
}

impl Neg for Mat3 {
    type Output = Mat3;
    fn neg(self) -> Mat3 {
        self * -1.0
    }
}

impl Mul<f64> for Mat3 {
    type Output = Mat3;
    fn mul(self, s: f64) -> Mat3 {
        let mut m = self.0;
        for row in m.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        Mat3(m)
    }
}

impl QuadValue for Mat3 {
    fn zero() -> Self {
        Mat3::ZERO
    }
    fn magnitude(&self) -> f64 {
        self.max_abs()
    }
}

/// `P_e = I - e eᵗ` for a unit vector `e`.
pub fn proj_matrix(e: Vec3) -> Mat3 {
    Mat3::IDENTITY - Mat3::outer(e, e)
}

/// `I - 3 e eᵗ` for a unit vector `e`.
pub fn reflect_matrix(e: Vec3) -> Mat3 {
    Mat3::IDENTITY - Mat3::outer(e, e) * 3.0
}

/// Scalar pieces of Γ: `Γ(x,s) = a·P_x + b·(I - 3 e_x e_xᵗ)`.
pub fn gamma_coefficients(r: f64, s: f64, nu: f64) -> (f64, f64) {
    let a = heat_kernel_r2(r * r, 2.0 * nu * s);
    let b = -ball_mass_scaled(r / (2.0 * (nu * s).sqrt())) / (4.0 * PI * r * r * r);
    (a, b)
}

/// `Γ(x,s) = K(x,2νs) P_x - (4π)^{-1} |x|^{-3} (I - 3 e eᵗ) ∫_{|y|≤|x|} K(y,2νs) dy`.
pub fn gamma_kernel(x: Vec3, s: f64, nu: f64) -> Result<Mat3> {
    if !(s > 0.0) || !(nu > 0.0) {
        return Err(Error::domain(format!("gamma kernel needs s > 0 and nu > 0, got s={s}, nu={nu}")));
    }
    let r = x.norm();
    if r < ZERO_NORM {
        return Err(Error::domain("gamma kernel is singular at x = 0"));
    }
    let e = x / r;
    let (a, b) = gamma_coefficients(r, s, nu);
    Ok(proj_matrix(e) * a + reflect_matrix(e) * b)
}

/// Weights of `b₁` and `b₂` in the integral equation at `|z| = r`:
/// `w₁ = |z| K(z,2νs) / (4νs)`, `w₂ = K(z,2νs)/|z| - 3 (4π)^{-1} |z|^{-4} ∫_{|y|≤|z|} K(y,2νs) dy`.
pub fn bilinear_weights(r: f64, s: f64, nu: f64) -> (f64, f64) {
    let k = heat_kernel_r2(r * r, 2.0 * nu * s);
    let w1 = r * k / (4.0 * nu * s);
    (w1, bilinear_w2(r, s, nu))
}

/// `w₂` alone; for `a = r/(2√(νs)) < 1` the cancelling leading terms are removed analytically:
/// `w₂ = (4πνs)^{-3/2} r^{-1} Σ_{n≥1} (−1)ⁿ 2n a^{2n} / (n!(2n+3))`.
pub fn bilinear_w2(r: f64, s: f64, nu: f64) -> f64 {
    let a = r / (2.0 * (nu * s).sqrt());
    if a >= 1.0 {
        let k = heat_kernel_r2(r * r, 2.0 * nu * s);
        return k / r - 3.0 * ball_mass_scaled(a) / (4.0 * PI * r.powi(4));
    }
    let a2 = a * a;
    let mut pow = 1.0;
    let mut sum = 0.0;
    for n in 1..40 {
        let nf = n as f64;
        pow *= -a2 / nf;
        let term = pow * 2.0 * nf / (2.0 * nf + 3.0);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (r * (4.0 * PI * nu * s).powf(1.5))
}
