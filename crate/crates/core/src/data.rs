//! Initial velocities `u₀` and forcings `g` with known heat convolutions.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::heat::heat_kernel_r2;
use crate::quad::{integrate_r3, Center, QuadOptions, R3Options};
use crate::vecgeom::Vec3;

type VecFn = Arc<dyn Fn(Vec3) -> Vec3 + Send + Sync>;
type VecFnT = Arc<dyn Fn(Vec3, f64) -> Vec3 + Send + Sync>;

/// A user-supplied divergence-free field.
#[derive(Clone)]
pub struct CustomField {
    pub name: String,
    pub f: VecFn,
    /// Where the field concentrates, with its length scale (quadrature hint).
    pub center: Center,
    pub axisymmetric: bool,
}

impl fmt::Debug for CustomField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomField({})", self.name)
    }
}

/// Initial velocity `u₀`.
#[derive(Debug, Clone)]
pub enum InitialField {
    Zero,
    /// `δ (−x₂, x₁, 0) e^{−|x|²/2L²}`
    GaussianSwirl { delta: f64, length: f64 },
    Custom(CustomField),
}

impl InitialField {
    pub fn gaussian_swirl(delta: f64, length: f64) -> Result<Self> {
        if !(length > 0.0 && length.is_finite() && delta.is_finite()) {
            return Err(Error::config(format!("gaussian swirl needs L > 0 and finite δ; got δ = {delta}, L = {length}")));
        }
        Ok(InitialField::GaussianSwirl { delta, length })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, InitialField::Zero) || matches!(self, InitialField::GaussianSwirl { delta, .. } if *delta == 0.0)
    }

    /// Invariant under rotations about the `x₃` axis.
    pub fn is_axisymmetric(&self) -> bool {
        match self {
            InitialField::Zero | InitialField::GaussianSwirl { .. } => true,
            InitialField::Custom(c) => c.axisymmetric,
        }
    }

    pub fn eval(&self, x: Vec3) -> Vec3 {
        match self {
            InitialField::Zero => Vec3::ZERO,
            InitialField::GaussianSwirl { delta, length } => {
                swirl(x) * (delta * (-x.norm_sq() / (2.0 * length * length)).exp())
            }
            InitialField::Custom(c) => (c.f)(x),
        }
    }

    /// `∫ u₀(x−y) K(y, var) dy`.
    pub fn heat_convolution(&self, x: Vec3, var: f64) -> Result<Vec3> {
        if !(var >= 0.0) {
            return Err(Error::domain(format!("heat convolution needs variance ≥ 0, got {var}")));
        }
        if var == 0.0 {
            return Ok(self.eval(x));
        }
        match self {
            InitialField::Zero => Ok(Vec3::ZERO),
            InitialField::GaussianSwirl { delta, length } => {
                let l2 = length * length;
                let s = l2 + var;
                Ok(swirl(x) * (delta * (l2 / s).powf(2.5) * (-x.norm_sq() / (2.0 * s)).exp()))
            }
            InitialField::Custom(c) => heat_convolution_quadrature(&*c.f, c.center, x, var),
        }
    }

    /// Closed-form `sup_{x,t} |x| |u₀ ∗ K|`, when known.
    pub fn sup_radius_weighted_heat(&self) -> Option<f64> {
        match self {
            InitialField::Zero => Some(0.0),
            // |x| |x_⊥| δ (L²/S)^{5/2} e^{−|x|²/2S} peaks at |x|² = 2S, t = 0
            InitialField::GaussianSwirl { delta, length } => Some(2.0 * delta.abs() * length * length / std::f64::consts::E),
            InitialField::Custom(_) => None,
        }
    }

    /// The same field multiplied by `c`.
    pub fn scaled(&self, c: f64) -> InitialField {
        match self {
            InitialField::Zero => InitialField::Zero,
            InitialField::GaussianSwirl { delta, length } => InitialField::GaussianSwirl { delta: delta * c, length: *length },
            InitialField::Custom(cf) => {
                let f = cf.f.clone();
                InitialField::Custom(CustomField { f: Arc::new(move |x| f(x) * c), ..cf.clone() })
            }
        }
    }
}

fn swirl(x: Vec3) -> Vec3 {
    Vec3::new(-x.x2, x.x1, 0.0)
}

fn heat_convolution_quadrature(f: &(dyn Fn(Vec3) -> Vec3 + Send + Sync), center: Center, x: Vec3, var: f64) -> Result<Vec3> {
    let opts = R3Options { radial: QuadOptions { abs_tol: 1e-10, rel_tol: 1e-9, max_intervals: 400 }, ..Default::default() };
    let centers = [Center::new(x, var.sqrt()), center];
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        let r = integrate_r3(|y| f(y)[i] * heat_kernel_r2((x - y).norm_sq(), var), &centers, opts);
        if !r.converged {
            return Err(Error::numeric(format!(
                "heat convolution of u₀ component {} did not converge (error estimate {:.2e})",
                i + 1,
                r.abs_err
            )));
        }
        *o = r.value;
    }
    Ok(Vec3::from_array(out))
}

/// A user-supplied forcing.
#[derive(Clone)]
pub struct CustomForcing {
    pub name: String,
    pub f: VecFnT,
    pub axisymmetric: bool,
}

impl fmt::Debug for CustomForcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomForcing({})", self.name)
    }
}

/// External force `g(x, t)`.
#[derive(Debug, Clone)]
pub enum Forcing {
    Zero,
    /// `A (−x₂, x₁, 0) (1 − |x|²/R²)²₊`, constant in time.
    SwirlBump { amplitude: f64, radius: f64 },
    Custom(CustomForcing),
}

impl Forcing {
    pub fn swirl_bump(amplitude: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite() && amplitude.is_finite()) {
            return Err(Error::config(format!("swirl bump needs R > 0 and finite A; got A = {amplitude}, R = {radius}")));
        }
        Ok(Forcing::SwirlBump { amplitude, radius })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero) || matches!(self, Forcing::SwirlBump { amplitude, .. } if *amplitude == 0.0)
    }

    pub fn is_axisymmetric(&self) -> bool {
        match self {
            Forcing::Zero | Forcing::SwirlBump { .. } => true,
            Forcing::Custom(c) => c.axisymmetric,
        }
    }

    pub fn eval(&self, x: Vec3, t: f64) -> Vec3 {
        match self {
            Forcing::Zero => Vec3::ZERO,
            Forcing::SwirlBump { amplitude, radius } => {
                let s = 1.0 - x.norm_sq() / (radius * radius);
                if s <= 0.0 {
                    Vec3::ZERO
                } else {
                    swirl(x) * (amplitude * s * s)
                }
            }
            Forcing::Custom(c) => (c.f)(x, t),
        }
    }

    /// Radius outside of which `g` vanishes, if bounded.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            Forcing::Zero => Some(0.0),
            Forcing::SwirlBump { radius, .. } => Some(*radius),
            Forcing::Custom(_) => None,
        }
    }

    /// `sup_x |g(x)| / f(|x|)` for a radial profile `f`, using `|x_⊥| ≤ |x|`
    /// (attained on the equatorial plane). Only for [`Forcing::SwirlBump`].
    pub fn sup_ratio_radial(&self, profile: &dyn Fn(f64) -> f64) -> Option<f64> {
        match self {
            Forcing::Zero => Some(0.0),
            Forcing::SwirlBump { amplitude, radius } => {
                let g = |r: f64| {
                    let s = 1.0 - r * r / (radius * radius);
                    let d = profile(r);
                    if s <= 0.0 || d == f64::INFINITY {
                        0.0
                    } else {
                        amplitude.abs() * r * s * s / d
                    }
                };
                Some(maximize_1d(g, 0.0, *radius))
            }
            Forcing::Custom(_) => None,
        }
    }

    pub fn scaled(&self, c: f64) -> Forcing {
        match self {
            Forcing::Zero => Forcing::Zero,
            Forcing::SwirlBump { amplitude, radius } => Forcing::SwirlBump { amplitude: amplitude * c, radius: *radius },
            Forcing::Custom(cf) => {
                let f = cf.f.clone();
                Forcing::Custom(CustomForcing { f: Arc::new(move |x, t| f(x, t) * c), ..cf.clone() })
            }
        }
    }
}

/// Maximum of a continuous function on `[a, b]`: dense scan, then golden-section refinement.
pub fn maximize_1d(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let n = 2000;
    let h = (b - a) / n as f64;
    let (mut best_i, mut best) = (0, f(a));
    for i in 1..=n {
        let v = f(a + h * i as f64);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let (mut lo, mut hi) = (a + h * (best_i.max(1) - 1) as f64, (a + h * (best_i + 1) as f64).min(b));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = hi - g * (hi - lo);
        let d = lo + g * (hi - lo);
        if f(c) > f(d) {
            hi = d;
        } else {
            lo = c;
        }
    }
    best.max(f(0.5 * (lo + hi)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_swirl_heat_closed_form_matches_quadrature() {
        let u0 = InitialField::gaussian_swirl(0.7, 0.8).unwrap();
        let custom = InitialField::Custom(CustomField {
            name: "swirl".into(),
            f: {
                let u = u0.clone();
                Arc::new(move |x| u.eval(x))
            },
            center: Center::new(Vec3::ZERO, 0.8),
            axisymmetric: true,
        });
        for (x, var) in [(Vec3::new(0.3, -0.5, 0.2), 0.5), (Vec3::new(1.5, 0.0, -1.0), 2.0), (Vec3::new(0.0, 0.1, 0.0), 0.01)] {
            let a = u0.heat_convolution(x, var).unwrap();
            let b = custom.heat_convolution(x, var).unwrap();
            assert!((a - b).max_abs() < 1e-6, "{x:?} {var}: {a:?} vs {b:?}");
        }
    }

    #[test]
    fn small_time_limit() {
        let u0 = InitialField::gaussian_swirl(1.0, 1.0).unwrap();
        let x = Vec3::new(0.4, 0.9, -0.3);
        assert!((u0.heat_convolution(x, 1e-10).unwrap() - u0.eval(x)).max_abs() < 1e-9);
    }

    #[test]
    fn sup_weighted_heat() {
        let u0 = InitialField::gaussian_swirl(0.3, 1.2).unwrap();
        let s = u0.sup_radius_weighted_heat().unwrap();
        let mut seen: f64 = 0.0;
        for i in 0..200 {
            let r = 0.02 * i as f64;
            for var in [0.0, 0.1, 1.0] {
                let x = Vec3::new(r, 0.0, 0.0);
                seen = seen.max(r * u0.heat_convolution(x, var).unwrap().norm());
            }
        }
        assert!(seen <= s * (1.0 + 1e-12));
        assert!(seen > 0.999 * s);
    }

    #[test]
    fn bump_sup_ratio() {
        let g = Forcing::swirl_bump(2.0, 1.0).unwrap();
        // |g| / r^{-2} at the equator = 2 r³ (1−r²)², max at r² = 3/7
        let s = g.sup_ratio_radial(&|r: f64| 1.0 / (r * r)).unwrap();
        let r2: f64 = 3.0 / 7.0;
        let want = 2.0 * r2.powf(1.5) * (1.0 - r2).powi(2);
        assert!((s - want).abs() < 1e-12);
        assert_eq!(g.eval(Vec3::new(1.1, 0.0, 0.0), 0.0), Vec3::ZERO);
    }
}
