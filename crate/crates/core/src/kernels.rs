//! Majorizing kernel pairs `(h, h̃)`.
//!
//! A [`Kernel`] is a small expression tree over a few base functions. Each
//! node knows how to evaluate itself, how to compute the three integrals the
//! cascade needs (closed form where one exists, 1-D quadrature for radial
//! kernels, 3-D quadrature otherwise), how to majorize itself by decreasing
//! piecewise power laws (the input of the generic `Z` rejection sampler), and,
//! for excessive kernels, how to draw an exact h-Brownian endpoint.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::data::{Forcing, InitialField};
use crate::error::{Error, Result};
use crate::heat::{erf, heat_kernel_r2, Mat3};
use crate::quad::{integrate_log_radial, integrate_r3, Center, QuadOptions, R3Options};
use crate::rng::RngStream;
use crate::vecgeom::Vec3;

/// Stand-in for `+∞` values of extended-real kernels.
pub const INFINITE: f64 = f64::INFINITY;

/// `|u| / h`, with the convention `finite / ∞ = 0`.
pub fn ratio(u_norm: f64, h: f64) -> f64 {
    if h == INFINITE && u_norm.is_finite() {
        0.0
    } else if h == 0.0 {
        if u_norm == 0.0 {
            0.0
        } else {
            INFINITE
        }
    } else {
        u_norm / h
    }
}

/// One piece `coef · r^expo` on `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerPiece {
    pub lo: f64,
    pub hi: f64,
    pub coef: f64,
    pub expo: f64,
}

impl PowerPiece {
    pub fn mass(&self) -> Result<f64> {
        if self.coef == 0.0 || self.hi <= self.lo {
            return Ok(0.0);
        }
        let a1 = self.expo + 1.0;
        let bad = |why: &str| {
            Err(Error::numeric(format!(
                "power piece {}·r^{} on [{}, {}) is not integrable ({why})",
                self.coef, self.expo, self.lo, self.hi
            )))
        };
        if self.lo == 0.0 && a1 <= 0.0 {
            return bad("at 0");
        }
        if self.hi == f64::INFINITY && a1 >= 0.0 {
            return bad("at infinity");
        }
        if a1.abs() < 1e-12 {
            return Ok(self.coef * (self.hi / self.lo).ln());
        }
        let top = if self.hi == f64::INFINITY { 0.0 } else { self.hi.powf(a1) };
        let bot = if self.lo == 0.0 { 0.0 } else { self.lo.powf(a1) };
        Ok(self.coef * (top - bot) / a1)
    }

    /// Inverse CDF of the normalized piece at `u ∈ (0,1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let a1 = self.expo + 1.0;
        if a1.abs() < 1e-12 {
            return self.lo * (self.hi / self.lo).powf(u);
        }
        let top = if self.hi == f64::INFINITY { 0.0 } else { self.hi.powf(a1) };
        let bot = if self.lo == 0.0 { 0.0 } else { self.lo.powf(a1) };
        let r = (bot + u * (top - bot)).powf(1.0 / a1);
        r.clamp(self.lo, self.hi)
    }
}

/// Nonnegative function of `r ∈ (0, ∞)` that is a power law on each of a
/// finite set of intervals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PowerLaw {
    pub pieces: Vec<PowerPiece>,
}

impl PowerLaw {
    pub fn single(coef: f64, expo: f64) -> Self {
        PowerLaw { pieces: vec![PowerPiece { lo: 0.0, hi: f64::INFINITY, coef, expo }] }
    }

    /// `coef0·r^a0` below `r = 1`, `coef0·r^a1` above (continuous at 1).
    pub fn broken(coef: f64, a0: f64, a1: f64) -> Self {
        PowerLaw {
            pieces: vec![
                PowerPiece { lo: 0.0, hi: 1.0, coef, expo: a0 },
                PowerPiece { lo: 1.0, hi: f64::INFINITY, coef, expo: a1 },
            ],
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        for p in &self.pieces {
            if r >= p.lo && r < p.hi {
                return p.coef * r.powf(p.expo);
            }
        }
        0.0
    }

    /// `r ↦ c·ψ(σ r)`.
    pub fn scaled(&self, c: f64, sigma: f64) -> Self {
        PowerLaw {
            pieces: self
                .pieces
                .iter()
                .map(|p| PowerPiece {
                    lo: p.lo / sigma,
                    hi: p.hi / sigma,
                    coef: c * p.coef * sigma.powf(p.expo),
                    expo: p.expo,
                })
                .collect(),
        }
    }

    /// `r ↦ r^m ψ(r)` restricted to `[lo, hi)`.
    pub fn times_power_on(&self, m: f64, lo: f64, hi: f64) -> Vec<PowerPiece> {
        self.pieces
            .iter()
            .filter_map(|p| {
                let a = p.lo.max(lo);
                let b = p.hi.min(hi);
                (b > a).then_some(PowerPiece { lo: a, hi: b, coef: p.coef, expo: p.expo + m })
            })
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(|p| p.coef == 0.0)
    }
}

/// `F(y) ≤ weight · ψ(|y − center|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MajorantTerm {
    pub weight: f64,
    pub center: Vec3,
    pub psi: PowerLaw,
}

/// Which power of the kernel is majorized: `h²` (bilinear branch) or `h̃` (forcing).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Power {
    Sq,
    Lin,
}

/// User-supplied radial profile `f(|x|)` with an optional decreasing
/// piecewise-power majorant of `f` (needed only for sampling).
#[derive(Clone)]
pub struct RadialFn {
    pub name: String,
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub majorant: Option<PowerLaw>,
}

impl fmt::Debug for RadialFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RadialFn({})", self.name)
    }
}

/// Scalar kernel expression.
#[derive(Debug, Clone)]
pub enum Kernel {
    Zero,
    /// `|x|^{-1}`
    InvRadius,
    /// `(1 + |x|²)^{-1}`
    Lorentzian,
    /// `(1 + |x|)^{-p}`
    OnePlusRPow(f64),
    /// `|x|^{-2} (1 + |x|)^{-(1+e)}`
    TailProfile(f64),
    Radial(RadialFn),
    /// `factor · k(σ x)`
    Scaled { inner: Box<Kernel>, factor: f64, sigma: f64 },
    /// `k(x − shift)`
    Translated { inner: Box<Kernel>, shift: Vec3 },
    /// `k(A x)`, `A` orthogonal
    Rotated { inner: Box<Kernel>, matrix: Mat3 },
    Min(Box<Kernel>, Box<Kernel>),
    /// `k₁^p · k₂^{1−p}`
    GeoMean(Box<Kernel>, Box<Kernel>, f64),
    /// `Σ wⱼ kⱼ`
    Mixture(Vec<(f64, Kernel)>),
}

fn r3_opts() -> R3Options {
    R3Options { radial: QuadOptions { abs_tol: 0.0, rel_tol: 1e-8, max_intervals: 400 }, ..Default::default() }
}

fn quad_opts() -> QuadOptions {
    QuadOptions { abs_tol: 0.0, rel_tol: 1e-11, max_intervals: 2000 }
}

fn converged(r: crate::quad::QuadResult<f64>, what: &str) -> Result<f64> {
    if r.converged && r.value.is_finite() {
        Ok(r.value)
    } else {
        Err(Error::numeric(format!(
            "{what}: quadrature did not converge (value {}, error estimate {:.3e}, {} evaluations)",
            r.value, r.abs_err, r.evals
        )))
    }
}

impl Kernel {
    pub fn zero() -> Self {
        Kernel::Zero
    }

    /// `r^{-2} (1+r)^{-(1+e)}`, the standard forcing profile paired with `|x|^{-1}`.
    pub fn tail_profile(e: f64) -> Self {
        Kernel::TailProfile(e)
    }

    pub fn scaled(self, factor: f64, sigma: f64) -> Self {
        if factor == 1.0 && sigma == 1.0 {
            return self;
        }
        match self {
            Kernel::Zero => Kernel::Zero,
            Kernel::Scaled { inner, factor: f0, sigma: s0 } => {
                Kernel::Scaled { inner, factor: f0 * factor, sigma: s0 * sigma }
            }
            k => Kernel::Scaled { inner: Box::new(k), factor, sigma },
        }
    }

    pub fn translated(self, shift: Vec3) -> Self {
        match self {
            Kernel::Zero => Kernel::Zero,
            k if shift == Vec3::ZERO => k,
            k => Kernel::Translated { inner: Box::new(k), shift },
        }
    }

    pub fn rotated(self, matrix: Mat3) -> Self {
        match self {
            Kernel::Zero => Kernel::Zero,
            k => Kernel::Rotated { inner: Box::new(k), matrix },
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Kernel::Zero => true,
            Kernel::Scaled { inner, factor, .. } => *factor == 0.0 || inner.is_zero(),
            Kernel::Translated { inner, .. } | Kernel::Rotated { inner, .. } => inner.is_zero(),
            Kernel::Min(a, b) => a.is_zero() || b.is_zero(),
            Kernel::GeoMean(a, b, _) => a.is_zero() || b.is_zero(),
            Kernel::Mixture(parts) => parts.iter().all(|(w, k)| *w == 0.0 || k.is_zero()),
            _ => false,
        }
    }

    pub fn eval(&self, x: Vec3) -> f64 {
        match self {
            Kernel::Zero => 0.0,
            Kernel::InvRadius => {
                let r = x.norm();
                if r == 0.0 {
                    INFINITE
                } else {
                    1.0 / r
                }
            }
            Kernel::Lorentzian => 1.0 / (1.0 + x.norm_sq()),
            Kernel::OnePlusRPow(p) => (1.0 + x.norm()).powf(-p),
            Kernel::TailProfile(e) => {
                let r = x.norm();
                if r == 0.0 {
                    INFINITE
                } else {
                    1.0 / (r * r) * (1.0 + r).powf(-(1.0 + e))
                }
            }
            Kernel::Radial(f) => (f.f)(x.norm()),
            Kernel::Scaled { inner, factor, sigma } => {
                if *factor == 0.0 {
                    0.0
                } else {
                    factor * inner.eval(x * *sigma)
                }
            }
            Kernel::Translated { inner, shift } => inner.eval(x - *shift),
            Kernel::Rotated { inner, matrix } => inner.eval(matrix.mul_vec(x)),
            Kernel::Min(a, b) => a.eval(x).min(b.eval(x)),
            Kernel::GeoMean(a, b, p) => {
                let (va, vb) = (a.eval(x), b.eval(x));
                if va == 0.0 || vb == 0.0 {
                    0.0
                } else {
                    va.powf(*p) * vb.powf(1.0 - p)
                }
            }
            Kernel::Mixture(parts) => parts.iter().filter(|(w, _)| *w != 0.0).map(|(w, k)| w * k.eval(x)).sum(),
        }
    }

    /// Radial profile value `k(r e₃)` if the kernel is radial about the origin.
    pub fn is_radial(&self) -> bool {
        match self {
            Kernel::Zero
            | Kernel::InvRadius
            | Kernel::Lorentzian
            | Kernel::OnePlusRPow(_)
            | Kernel::TailProfile(_)
            | Kernel::Radial(_) => true,
            Kernel::Scaled { inner, .. } | Kernel::Rotated { inner, .. } => inner.is_radial(),
            Kernel::Translated { inner, shift } => *shift == Vec3::ZERO && inner.is_radial(),
            Kernel::Min(a, b) | Kernel::GeoMean(a, b, _) => a.is_radial() && b.is_radial(),
            Kernel::Mixture(parts) => parts.iter().all(|(_, k)| k.is_radial()),
        }
    }

    fn profile(&self, r: f64) -> f64 {
        self.eval(Vec3::new(0.0, 0.0, r))
    }

    /// Singular or peaked locations with their length scales (quadrature hints).
    pub fn centers(&self) -> Vec<Center> {
        match self {
            Kernel::Zero => vec![],
            Kernel::InvRadius
            | Kernel::Lorentzian
            | Kernel::OnePlusRPow(_)
            | Kernel::TailProfile(_)
            | Kernel::Radial(_) => vec![Center::new(Vec3::ZERO, 1.0)],
            Kernel::Scaled { inner, sigma, .. } => inner
                .centers()
                .into_iter()
                .map(|c| Center::new(c.point / *sigma, c.scale / *sigma))
                .collect(),
            Kernel::Translated { inner, shift } => {
                inner.centers().into_iter().map(|c| Center::new(c.point + *shift, c.scale)).collect()
            }
            Kernel::Rotated { inner, matrix } => inner
                .centers()
                .into_iter()
                .map(|c| Center::new(matrix.transpose().mul_vec(c.point), c.scale))
                .collect(),
            Kernel::Min(a, b) | Kernel::GeoMean(a, b, _) => {
                let mut v = a.centers();
                v.extend(b.centers());
                dedup_centers(v)
            }
            Kernel::Mixture(parts) => {
                dedup_centers(parts.iter().filter(|(w, _)| *w != 0.0).flat_map(|(_, k)| k.centers()).collect())
            }
        }
    }

    /// `∫ |y|^{-2} k²(x − y) dy`.
    pub fn potential_sq(&self, x: Vec3) -> Result<f64> {
        match self {
            Kernel::Zero => Ok(0.0),
            Kernel::InvRadius => Ok(PI.powi(3) / x.norm()),
            Kernel::Lorentzian => Ok(PI * PI / (1.0 + x.norm_sq())),
            Kernel::Scaled { inner, factor, sigma } => Ok(factor * factor * sigma * inner.potential_sq(x * *sigma)?),
            Kernel::Translated { inner, shift } => inner.potential_sq(x - *shift),
            Kernel::Rotated { inner, matrix } => inner.potential_sq(matrix.mul_vec(x)),
            k if k.is_radial() => k.radial_potential_sq(x.norm()),
            k => k.r3_potential(x, Power::Sq),
        }
    }

    /// `∫ |y|^{-1} k(x − y) dy`.
    pub fn potential_lin(&self, x: Vec3) -> Result<f64> {
        match self {
            Kernel::Zero => Ok(0.0),
            Kernel::InvRadius | Kernel::Lorentzian => {
                Err(Error::numeric("∫|y|^-1 k(x-y) dy diverges for this kernel"))
            }
            Kernel::OnePlusRPow(p) if *p <= 2.0 => Err(Error::numeric("∫|y|^-1 k(x-y) dy diverges for this kernel")),
            Kernel::TailProfile(e) if *e == 1.0 => {
                let r = x.norm();
                Ok(if r == 0.0 { INFINITE } else { 4.0 * PI * (1.0 / r).ln_1p() })
            }
            Kernel::Scaled { inner, factor, sigma } => {
                Ok(factor / (sigma * sigma) * inner.potential_lin(x * *sigma)?)
            }
            Kernel::Translated { inner, shift } => inner.potential_lin(x - *shift),
            Kernel::Rotated { inner, matrix } => inner.potential_lin(matrix.mul_vec(x)),
            Kernel::Mixture(parts) => {
                let mut s = 0.0;
                for (w, k) in parts.iter().filter(|(w, _)| *w != 0.0) {
                    s += w * k.potential_lin(x)?;
                }
                Ok(s)
            }
            k if k.is_radial() => k.radial_potential_lin(x.norm()),
            k => k.r3_potential(x, Power::Lin),
        }
    }

    /// `∫ k(y) K(x − y, var) dy`, the heat convolution at variance `var = 2νt`.
    pub fn heat_convolution(&self, x: Vec3, var: f64) -> Result<f64> {
        match self {
            Kernel::Zero => Ok(0.0),
            Kernel::InvRadius => {
                let r = x.norm();
                if r == 0.0 {
                    Ok((2.0 / (PI * var)).sqrt())
                } else {
                    Ok(erf(r / (2.0 * var).sqrt()) / r)
                }
            }
            Kernel::Scaled { inner, factor, sigma } => {
                Ok(factor * inner.heat_convolution(x * *sigma, var * sigma * sigma)?)
            }
            Kernel::Translated { inner, shift } => inner.heat_convolution(x - *shift, var),
            Kernel::Rotated { inner, matrix } => inner.heat_convolution(matrix.mul_vec(x), var),
            Kernel::Mixture(parts) => {
                let mut s = 0.0;
                for (w, k) in parts.iter().filter(|(w, _)| *w != 0.0) {
                    s += w * k.heat_convolution(x, var)?;
                }
                Ok(s)
            }
            k if k.is_radial() => k.radial_heat_convolution(x.norm(), var),
            k => {
                let mut centers = k.centers();
                centers.push(Center::new(x, var.sqrt()));
                let centers = dedup_centers(centers);
                converged(
                    integrate_r3(|y| k.eval(y) * heat_kernel_r2((x - y).norm_sq(), var), &centers, r3_opts()),
                    "heat convolution",
                )
            }
        }
    }

    // P(r) = (2π/r) ∫ ρ f(ρ)² ln((ρ+r)/|ρ−r|) dρ
    fn radial_potential_sq(&self, r: f64) -> Result<f64> {
        if r == 0.0 {
            return converged(
                integrate_log_radial(|rho| 4.0 * PI * self.profile(rho).powi(2), 1.0, &[1.0], quad_opts()),
                "radial potential",
            );
        }
        let res = integrate_log_radial(
            |rho| {
                let f = self.profile(rho);
                if f == 0.0 {
                    return 0.0;
                }
                let lg = ((rho + r) / (rho - r).abs()).ln();
                rho * f * f * lg
            },
            1.0,
            &[r, 1.0],
            quad_opts(),
        );
        Ok(2.0 * PI / r * converged(res, "radial potential")?)
    }

    // Newton's shell theorem: 4π ∫ ρ² f(ρ) / max(ρ, r) dρ
    fn radial_potential_lin(&self, r: f64) -> Result<f64> {
        let res = integrate_log_radial(
            |rho| 4.0 * PI * rho * rho * self.profile(rho) / rho.max(r),
            1.0,
            &[r, 1.0],
            quad_opts(),
        );
        converged(res, "radial forcing potential")
    }

    // (2πT)^{-1/2} r^{-1} ∫ ρ f(ρ) [e^{-(r-ρ)²/2T} − e^{-(r+ρ)²/2T}] dρ
    fn radial_heat_convolution(&self, r: f64, var: f64) -> Result<f64> {
        let sd = var.sqrt();
        if r == 0.0 {
            let res = integrate_log_radial(
                |rho| 4.0 * PI * rho * rho * self.profile(rho) * heat_kernel_r2(rho * rho, var),
                sd,
                &[1.0],
                quad_opts(),
            );
            return converged(res, "radial heat convolution");
        }
        let c = (2.0 * PI * var).powf(-0.5) / r;
        let breaks = [r, (r - 6.0 * sd).max(0.0), r + 6.0 * sd, 1.0];
        let res = integrate_log_radial(
            |rho| {
                let d = rho - r;
                let g = (-d * d / (2.0 * var)).exp() * (-(-2.0 * r * rho / var).exp_m1());
                if g == 0.0 {
                    0.0
                } else {
                    c * rho * self.profile(rho) * g
                }
            },
            r.min(sd).max(1e-300),
            &breaks,
            quad_opts(),
        );
        converged(res, "radial heat convolution")
    }

    fn r3_potential(&self, x: Vec3, power: Power) -> Result<f64> {
        let scale = x.norm().max(1e-3);
        let mut centers = vec![Center::new(Vec3::ZERO, scale)];
        centers.extend(self.centers().into_iter().map(|c| Center::new(x - c.point, c.scale)));
        let centers = dedup_centers(centers);
        let res = match power {
            Power::Sq => integrate_r3(|y| self.eval(x - y).powi(2) / y.norm_sq(), &centers, r3_opts()),
            Power::Lin => integrate_r3(|y| self.eval(x - y) / y.norm(), &centers, r3_opts()),
        };
        converged(res, "kernel potential")
    }

    /// Majorant of `k²` (`Power::Sq`) or `k` (`Power::Lin`) as a sum of radial
    /// decreasing power laws about finitely many centers.
    pub fn majorant(&self, power: Power) -> Result<Vec<MajorantTerm>> {
        let n = if power == Power::Sq { 2.0 } else { 1.0 };
        let at0 = |psi: PowerLaw| Ok(vec![MajorantTerm { weight: 1.0, center: Vec3::ZERO, psi }]);
        match self {
            Kernel::Zero => Ok(vec![]),
            Kernel::InvRadius => at0(PowerLaw::single(1.0, -n)),
            // (1+r²)^-1 ≤ min(1, r^-2)
            Kernel::Lorentzian => at0(PowerLaw::broken(1.0, 0.0, -2.0 * n)),
            // (1+r)^-p ≤ min(1, r^-p)
            Kernel::OnePlusRPow(p) => at0(PowerLaw::broken(1.0, 0.0, -p * n)),
            // r^-2 (1+r)^-(1+e) ≤ r^-2 min(1, r^-(1+e))
            Kernel::TailProfile(e) => at0(PowerLaw::broken(1.0, -2.0 * n, -(3.0 + e) * n)),
            Kernel::Radial(f) => match (&f.majorant, power) {
                (Some(m), Power::Lin) => at0(m.clone()),
                (Some(m), Power::Sq) => at0(PowerLaw {
                    pieces: m.pieces.iter().map(|p| PowerPiece { coef: p.coef * p.coef, expo: 2.0 * p.expo, ..*p }).collect(),
                }),
                (None, _) => Err(Error::construction(format!("radial profile {} has no majorant", f.name))),
            },
            Kernel::Scaled { inner, factor, sigma } => Ok(inner
                .majorant(power)?
                .into_iter()
                .map(|t| MajorantTerm {
                    weight: t.weight * factor.abs().powf(n),
                    center: t.center / *sigma,
                    psi: t.psi.scaled(1.0, *sigma),
                })
                .collect()),
            Kernel::Translated { inner, shift } => Ok(inner
                .majorant(power)?
                .into_iter()
                .map(|t| MajorantTerm { center: t.center + *shift, ..t })
                .collect()),
            Kernel::Rotated { inner, matrix } => Ok(inner
                .majorant(power)?
                .into_iter()
                .map(|t| MajorantTerm { center: matrix.transpose().mul_vec(t.center), ..t })
                .collect()),
            Kernel::Min(a, _) => a.majorant(power),
            // AM-GM: a^p b^{1-p} ≤ p a + (1-p) b, and likewise for the squares
            Kernel::GeoMean(a, b, p) => {
                let mut v: Vec<MajorantTerm> =
                    a.majorant(power)?.into_iter().map(|t| MajorantTerm { weight: t.weight * p, ..t }).collect();
                v.extend(b.majorant(power)?.into_iter().map(|t| MajorantTerm { weight: t.weight * (1.0 - p), ..t }));
                Ok(v)
            }
            // (Σ wⱼ kⱼ)² ≤ (Σ wⱼ) Σ wⱼ kⱼ² by Cauchy-Schwarz
            Kernel::Mixture(parts) => {
                let total: f64 = parts.iter().map(|(w, _)| *w).sum();
                let mut v = Vec::new();
                for (w, k) in parts.iter().filter(|(w, _)| *w != 0.0) {
                    let mult = if power == Power::Sq { w * total } else { *w };
                    v.extend(k.majorant(power)?.into_iter().map(|t| MajorantTerm { weight: t.weight * mult, ..t }));
                }
                Ok(v)
            }
        }
    }

    /// Whether [`Kernel::sample_hbm`] is available.
    pub fn has_hbm_sampler(&self) -> bool {
        match self {
            Kernel::InvRadius => true,
            Kernel::OnePlusRPow(p) => *p == 1.0,
            Kernel::Scaled { inner, factor, .. } => *factor > 0.0 && inner.has_hbm_sampler(),
            Kernel::Translated { inner, .. } | Kernel::Rotated { inner, .. } => inner.has_hbm_sampler(),
            Kernel::Mixture(parts) => parts.iter().all(|(w, k)| *w == 0.0 || k.has_hbm_sampler()),
            _ => false,
        }
    }

    /// Endpoint of the h-Brownian motion from `x` after variance `var = 2νt`:
    /// `Some(y)` with density `k(y) K(x−y, var) / k(x)`, `None` for the trap.
    pub fn sample_hbm(&self, x: Vec3, var: f64, rng: &mut RngStream) -> Result<Option<Vec3>> {
        match self {
            Kernel::InvRadius => Ok(hbm_inv_radius(x, var, rng)),
            Kernel::OnePlusRPow(p) if *p == 1.0 => {
                // (1+|y|)^{-1} = ∫ |y − w|^{-1} f(w) dw with f(w) = (2π|w|)^{-1} (1+|w|)^{-3};
                // pick the mixing point W ∝ f(w)|x − w|^{-1}, then run the |·|^{-1} process about W.
                let z = sample_envelope_target(x, &smoothing_density_majorant(), 1.0, rng, &|z: Vec3| {
                    smoothing_density(x - z) / z.norm()
                })?;
                let w = x - z;
                Ok(hbm_inv_radius(x - w, var, rng).map(|y| y + w))
            }
            Kernel::Scaled { inner, factor, sigma } if *factor > 0.0 => {
                Ok(inner.sample_hbm(x * *sigma, var * sigma * sigma, rng)?.map(|y| y / *sigma))
            }
            Kernel::Translated { inner, shift } => Ok(inner.sample_hbm(x - *shift, var, rng)?.map(|y| y + *shift)),
            Kernel::Rotated { inner, matrix } => {
                Ok(inner.sample_hbm(matrix.mul_vec(x), var, rng)?.map(|y| matrix.transpose().mul_vec(y)))
            }
            Kernel::Mixture(parts) => {
                let vals: Vec<f64> = parts.iter().map(|(w, k)| if *w == 0.0 { 0.0 } else { w * k.eval(x) }).collect();
                let total: f64 = vals.iter().sum();
                if !(total.is_finite() && total > 0.0) {
                    return Err(Error::domain("h-Brownian motion needs 0 < h(x) < ∞"));
                }
                let mut u = rng.uniform() * total;
                for ((_, k), v) in parts.iter().zip(&vals) {
                    if u < *v {
                        return k.sample_hbm(x, var, rng);
                    }
                    u -= v;
                }
                let (_, k) = parts.iter().zip(&vals).rev().find(|(_, v)| **v > 0.0).map(|(p, _)| p).expect("positive");
                k.sample_hbm(x, var, rng)
            }
            _ => Err(Error::domain("no exact h-Brownian endpoint sampler for this kernel")),
        }
    }
}

fn dedup_centers(v: Vec<Center>) -> Vec<Center> {
    let mut out: Vec<Center> = Vec::new();
    for c in v {
        if let Some(o) = out.iter_mut().find(|o| (o.point - c.point).norm() <= 1e-12 * (1.0 + c.point.norm())) {
            o.scale = o.scale.min(c.scale);
        } else {
            out.push(c);
        }
    }
    out
}

/// The density `(2π|w|)^{-1} (1+|w|)^{-3}` whose convolution with `|x|^{-1}` is `(1+|x|)^{-1}`.
pub fn smoothing_density(w: Vec3) -> f64 {
    let r = w.norm();
    if r == 0.0 {
        INFINITE
    } else {
        1.0 / (2.0 * PI * r * (1.0 + r).powi(3))
    }
}

fn smoothing_density_majorant() -> Vec<MajorantTerm> {
    vec![MajorantTerm { weight: 1.0 / (2.0 * PI), center: Vec3::ZERO, psi: PowerLaw::broken(1.0, -1.0, -4.0) }]
}

// |y|^{-1} K(x − y, T) / (|x|^{-1} P(|N| < |x|/√T)): with N ~ N(0,1) and b = |x|/√T,
// trap iff |N| ≥ b, else w = (N/b)² and y ~ N(x(1−w), T(1−w) I).
fn hbm_inv_radius(x: Vec3, var: f64, rng: &mut RngStream) -> Option<Vec3> {
    let r = x.norm();
    let b = r / var.sqrt();
    let n = rng.normal();
    if n.abs() >= b {
        return None;
    }
    let w = (n / b) * (n / b);
    let s = (var * (1.0 - w)).sqrt();
    Some(x * (1.0 - w) + rng.normal3() * s)
}

/// Trap-free probability `∫ k(y) K(x−y, var) dy / k(x)` for `k = |·|^{-1}`:
/// `P(|N| < |x|/√var)`, `N` a standard normal.
pub fn inv_radius_survival(r: f64, var: f64) -> f64 {
    erf(r / (2.0 * var).sqrt())
}

/// Decomposition of the generic `Z`-target envelope for a single majorant term:
/// radial power-law densities about 0 (`g₀`) and about `x − c` (`g₁`).
#[derive(Debug, Clone)]
pub(crate) struct EnvelopePart {
    pub weight: f64,
    pub center: Vec3,
    pub half_d: f64,
    pub psi: PowerLaw,
    pub radial0: Vec<PowerPiece>,
    pub radial1: Vec<PowerPiece>,
    pub mass0: f64,
    pub mass1: f64,
}

/// Build the envelope of `|z|^{-q} F(x − z)` from a majorant
/// `F(y) ≤ Σ wⱼ ψⱼ(|y − cⱼ|)`. With `x' = x − cⱼ`, `d = |x'|`, `b = |x' − z|`:
/// `|z|^{-q} ψ(b) ≤ |z|^{-q} ψ(max(d/2, |z|)) + max(d/2, b)^{-q} ψ(b)`,
/// because `|z| ≤ b` forces `b ≥ d/2` and `|z| > b` forces `|z| ≥ d/2`.
pub(crate) fn build_envelope(x: Vec3, terms: &[MajorantTerm], q: f64) -> Result<Vec<EnvelopePart>> {
    let mut parts = Vec::with_capacity(terms.len());
    for t in terms {
        if t.weight == 0.0 || t.psi.is_zero() {
            continue;
        }
        let xp = x - t.center;
        let h = 0.5 * xp.norm();
        let mut radial0 = Vec::new();
        if h > 0.0 {
            radial0.push(PowerPiece { lo: 0.0, hi: h, coef: t.psi.eval(h), expo: 2.0 - q });
        }
        radial0.extend(t.psi.times_power_on(2.0 - q, h, f64::INFINITY));
        let mut radial1 = Vec::new();
        if h > 0.0 {
            radial1.extend(
                t.psi.times_power_on(2.0, 0.0, h).into_iter().map(|p| PowerPiece { coef: p.coef * h.powf(-q), ..p }),
            );
        }
        radial1.extend(t.psi.times_power_on(2.0 - q, h, f64::INFINITY));
        let mass0 = radial0.iter().map(|p| p.mass()).sum::<Result<f64>>()?;
        let mass1 = radial1.iter().map(|p| p.mass()).sum::<Result<f64>>()?;
        parts.push(EnvelopePart { weight: t.weight, center: t.center, half_d: h, psi: t.psi.clone(), radial0, radial1, mass0, mass1 });
    }
    if parts.is_empty() {
        return Err(Error::domain("sampling target has zero majorant"));
    }
    Ok(parts)
}

pub(crate) fn envelope_density(x: Vec3, z: Vec3, parts: &[EnvelopePart], q: f64) -> f64 {
    let rz = z.norm();
    let mut s = 0.0;
    for p in parts {
        let b = (x - p.center - z).norm();
        let g0 = rz.powf(-q) * p.psi.eval(p.half_d.max(rz));
        let g1 = p.half_d.max(b).powf(-q) * p.psi.eval(b);
        s += p.weight * (g0 + g1);
    }
    s
}

fn sample_pieces(pieces: &[PowerPiece], mass: f64, rng: &mut RngStream) -> Result<f64> {
    let mut u = rng.uniform() * mass;
    for p in pieces {
        let m = p.mass()?;
        if u < m {
            return Ok(p.quantile(rng.uniform()));
        }
        u -= m;
    }
    let last = pieces.iter().rev().find(|p| p.coef > 0.0).expect("nonempty envelope");
    Ok(last.quantile(rng.uniform()))
}

/// Proposals without acceptance that flag a broken envelope.
pub const HEALTH_WINDOW: u64 = 10_000;

/// Rejection-sample `z ∝ target(z)` where `target(z) ≤ |z|^{-q} Σ wⱼ ψⱼ(|x − z − cⱼ|)`.
pub(crate) fn sample_envelope_target(
    x: Vec3,
    terms: &[MajorantTerm],
    q: f64,
    rng: &mut RngStream,
    target: &dyn Fn(Vec3) -> f64,
) -> Result<Vec3> {
    let parts = build_envelope(x, terms, q)?;
    let total: f64 = parts.iter().map(|p| p.weight * (p.mass0 + p.mass1)).sum();
    for _ in 0..HEALTH_WINDOW {
        let mut u = rng.uniform() * total;
        let mut chosen = (&parts[parts.len() - 1], false);
        'pick: for p in &parts {
            for (second, m) in [(false, p.mass0), (true, p.mass1)] {
                let wm = p.weight * m;
                if u < wm {
                    chosen = (p, second);
                    break 'pick;
                }
                u -= wm;
            }
        }
        let (p, second) = chosen;
        let z = if second {
            let r = sample_pieces(&p.radial1, p.mass1, rng)?;
            x - p.center - rng.direction() * r
        } else {
            let r = sample_pieces(&p.radial0, p.mass0, rng)?;
            rng.direction() * r
        };
        let env = envelope_density(x, z, &parts, q);
        let tv = target(z);
        if !(env > 0.0) || !env.is_finite() || !tv.is_finite() {
            continue;
        }
        if tv > env * (1.0 + 1e-9) {
            return Err(Error::SamplerHealth(format!(
                "target exceeds envelope at z = {z:?}: {tv} > {env}; majorant is wrong"
            )));
        }
        if rng.uniform() * env <= tv {
            return Ok(z);
        }
    }
    Err(Error::SamplerHealth(format!(
        "no acceptance in {HEALTH_WINDOW} proposals at x = {x:?} (acceptance rate below 1e-3)"
    )))
}

/// A majorizing kernel pair `(h, h̃)` with its constants.
#[derive(Debug, Clone)]
pub struct KernelPair {
    pub name: String,
    pub h: Kernel,
    pub h_tilde: Kernel,
    /// `sup_x ∫ h²(x−y)|y|^{-2} dy / h(x)`
    pub gamma: f64,
    /// `sup_x ∫ h̃(x−y)|y|^{-1} dy / h(x)`
    pub gamma_tilde: f64,
    pub excessive: bool,
    /// `sup_{x,t} ∫ h(x−y) K(y, 2νt) dy / h(x)`
    pub heat_ratio_m: Option<f64>,
}

/// `(h₀, h̃) = (|x|^{-1}, h̃₀(|x|))` with constants `(π³, 4π ∫ r² h̃₀(r) dr)`.
pub fn make_h0_pair(h_tilde_0: Kernel) -> Result<KernelPair> {
    if !h_tilde_0.is_radial() {
        return Err(Error::construction("h̃₀ must be a radial profile"));
    }
    let gamma_tilde = if h_tilde_0.is_zero() {
        0.0
    } else {
        let g = |r: f64| 4.0 * PI * r * r * h_tilde_0.profile(r);
        let res = integrate_log_radial(g, 1.0, &[1.0], quad_opts());
        // the substitution truncates at r = e^{±40}; mass left at the ends means divergence
        let tail = [(-40.0f64).exp(), 40.0f64.exp()].iter().map(|&r| g(r) * r).fold(0.0, f64::max);
        if !res.converged || !res.value.is_finite() || !(tail <= 1e-8 * res.value) {
            return Err(Error::construction(format!(
                "∫ r² h̃₀(r) dr does not converge (estimate {:.4e} ± {:.1e})",
                res.value / (4.0 * PI),
                res.abs_err
            )));
        }
        res.value
    };
    Ok(KernelPair {
        name: "h0".into(),
        h: Kernel::InvRadius,
        h_tilde: h_tilde_0,
        gamma: PI.powi(3),
        gamma_tilde,
        excessive: true,
        heat_ratio_m: Some(1.0),
    })
}

/// `(H, 0)`, `H = (1+|x|²)^{-1}`, constants `(π², 0)`, heat ratio `1 + 3e^{-2/3}`.
#[allow(non_snake_case)]
pub fn make_H_pair() -> KernelPair {
    KernelPair {
        name: "H".into(),
        h: Kernel::Lorentzian,
        h_tilde: Kernel::Zero,
        gamma: PI * PI,
        gamma_tilde: 0.0,
        excessive: false,
        heat_ratio_m: Some(1.0 + 3.0 * (-2.0f64 / 3.0).exp()),
    }
}

/// `(Hₚ, 0)`, `Hₚ = (1+|x|)^{-p}` for `p ∈ (1, 2]`, with `γ = π^{4−p}(1+1/√2)^{p−1}`.
#[allow(non_snake_case)]
pub fn make_Hp_pair(p: f64) -> Result<KernelPair> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::construction(format!("Hp needs p ∈ (1,2], got {p}")));
    }
    let c = 1.0 + std::f64::consts::FRAC_1_SQRT_2;
    Ok(KernelPair {
        name: format!("Hp({p})"),
        h: Kernel::OnePlusRPow(p),
        h_tilde: Kernel::Zero,
        gamma: PI.powf(4.0 - p) * c.powf(p - 1.0),
        gamma_tilde: 0.0,
        excessive: false,
        heat_ratio_m: Some((1.0 + 3.0 * (-2.0f64 / 3.0).exp()).powf(p / 2.0) * c.powf(p / 2.0)),
    })
}

/// `(h₁, 0)`, `h₁ = (1+|x|)^{-1}`: the smoothing of `|x|^{-1}`, constants `(π³, 0)`.
pub fn make_h1_pair() -> KernelPair {
    KernelPair {
        name: "h1".into(),
        h: Kernel::OnePlusRPow(1.0),
        h_tilde: Kernel::Zero,
        gamma: PI.powi(3),
        gamma_tilde: 0.0,
        excessive: true,
        heat_ratio_m: Some(1.0),
    }
}

/// Probability distributions accepted by [`KernelOp::Convolve`].
#[derive(Debug, Clone)]
pub enum ConvolutionDensity {
    /// Point masses `Σ wⱼ δ(· − μⱼ)`.
    Discrete(Vec<(f64, Vec3)>),
    /// `(2π|y|)^{-1} (1+|y|)^{-3}`.
    Smoothing,
}

#[derive(Debug, Clone)]
pub enum KernelOp {
    Translate(Vec3),
    /// `(σ h(σ·), σ³ h̃(σ·))`
    Scale(f64),
    Rotate(Mat3),
    Convolve(ConvolutionDensity),
    Min(KernelPair),
    GeoMean(KernelPair, f64),
    Mixture(Vec<(f64, KernelPair)>),
}

fn check_weights(w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::construction("empty mixture"));
    }
    if w.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::construction("mixture weights must be nonnegative"));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::construction(format!("mixture weights sum to {s}, not 1")));
    }
    Ok(())
}

/// Closure operations, with the constants the corresponding propositions guarantee.
pub fn kernel_algebra(op: KernelOp, pair: &KernelPair) -> Result<KernelPair> {
    let mut out = pair.clone();
    match op {
        KernelOp::Translate(mu) => {
            out.h = pair.h.clone().translated(mu);
            out.h_tilde = pair.h_tilde.clone().translated(mu);
            out.name = format!("translate({})", pair.name);
        }
        KernelOp::Scale(sigma) => {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::construction(format!("scale needs σ > 0, got {sigma}")));
            }
            out.h = pair.h.clone().scaled(sigma, sigma);
            out.h_tilde = pair.h_tilde.clone().scaled(sigma.powi(3), sigma);
            out.name = format!("scale({})", pair.name);
        }
        KernelOp::Rotate(a) => {
            if (a.matmul(&a.transpose()) - Mat3::IDENTITY).max_abs() > 1e-10 {
                return Err(Error::construction("rotate needs an orthogonal matrix"));
            }
            out.h = pair.h.clone().rotated(a);
            out.h_tilde = pair.h_tilde.clone().rotated(a);
            out.name = format!("rotate({})", pair.name);
        }
        KernelOp::Convolve(ConvolutionDensity::Discrete(atoms)) => {
            let w: Vec<f64> = atoms.iter().map(|a| a.0).collect();
            check_weights(&w)?;
            out.h = Kernel::Mixture(atoms.iter().map(|(w, mu)| (*w, pair.h.clone().translated(*mu))).collect());
            out.h_tilde = if pair.h_tilde.is_zero() {
                Kernel::Zero
            } else {
                Kernel::Mixture(atoms.iter().map(|(w, mu)| (*w, pair.h_tilde.clone().translated(*mu))).collect())
            };
            out.name = format!("convolve({})", pair.name);
        }
        KernelOp::Convolve(ConvolutionDensity::Smoothing) => {
            if !matches!(pair.h, Kernel::InvRadius) {
                return Err(Error::construction("smoothing convolution has a closed form only for h = |x|^-1"));
            }
            if !pair.h_tilde.is_zero() {
                return Err(Error::construction(
                    "smoothing convolution of a nonzero h̃ has no closed form; convolve (h0, 0) instead",
                ));
            }
            out = KernelPair { gamma: pair.gamma, ..make_h1_pair() };
            out.name = format!("convolve({})", pair.name);
        }
        KernelOp::Min(other) => {
            out.h = Kernel::Min(Box::new(pair.h.clone()), Box::new(other.h.clone()));
            out.h_tilde = if pair.h_tilde.is_zero() || other.h_tilde.is_zero() {
                Kernel::Zero
            } else {
                Kernel::Min(Box::new(pair.h_tilde.clone()), Box::new(other.h_tilde.clone()))
            };
            out.gamma = pair.gamma.min(other.gamma);
            out.gamma_tilde = pair.gamma_tilde.min(other.gamma_tilde);
            out.excessive = pair.excessive && other.excessive;
            out.heat_ratio_m = max_opt(pair.heat_ratio_m, other.heat_ratio_m);
            out.name = format!("min({}, {})", pair.name, other.name);
        }
        KernelOp::GeoMean(other, p) => {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::construction(format!("geometric mean needs p ∈ (0,1), got {p}")));
            }
            out.h = Kernel::GeoMean(Box::new(pair.h.clone()), Box::new(other.h.clone()), p);
            out.h_tilde = if pair.h_tilde.is_zero() || other.h_tilde.is_zero() {
                Kernel::Zero
            } else {
                Kernel::GeoMean(Box::new(pair.h_tilde.clone()), Box::new(other.h_tilde.clone()), p)
            };
            out.gamma = pair.gamma.powf(p) * other.gamma.powf(1.0 - p);
            out.gamma_tilde = pair.gamma_tilde.powf(p) * other.gamma_tilde.powf(1.0 - p);
            out.excessive = pair.excessive && other.excessive;
            out.heat_ratio_m = match (pair.heat_ratio_m, other.heat_ratio_m) {
                (Some(a), Some(b)) => Some(a.powf(p) * b.powf(1.0 - p)),
                _ => None,
            };
            out.name = format!("geomean({}, {})", pair.name, other.name);
        }
        KernelOp::Mixture(others) => {
            let w: Vec<f64> = others.iter().map(|o| o.0).collect();
            check_weights(&w)?;
            // the operand pair is ignored: a mixture is built from its listed components
            out.h = Kernel::Mixture(others.iter().map(|(w, k)| (*w, k.h.clone())).collect());
            out.h_tilde = if others.iter().all(|(_, k)| k.h_tilde.is_zero()) {
                Kernel::Zero
            } else {
                Kernel::Mixture(others.iter().map(|(w, k)| (*w, k.h_tilde.clone())).collect())
            };
            out.gamma = others.iter().map(|(w, k)| w * k.gamma).sum();
            out.gamma_tilde = others.iter().map(|(w, k)| w * k.gamma_tilde).sum();
            out.excessive = others.iter().all(|(_, k)| k.excessive);
            out.heat_ratio_m = others.iter().try_fold(0.0f64, |m, (_, k)| k.heat_ratio_m.map(|v| m.max(v)));
            out.name = format!("mixture[{}]", others.len());
        }
    }
    Ok(out)
}

fn max_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a.max(b)),
        _ => None,
    }
}

impl KernelPair {
    /// `(c h, c̃ h̃)`, constants `(cγ, c̃γ̃/c)`.
    pub fn rescaled(&self, c: f64, c_tilde: f64) -> Result<KernelPair> {
        if !(c > 0.0 && c.is_finite()) || !(c_tilde >= 0.0 && c_tilde.is_finite()) {
            return Err(Error::construction(format!("rescale needs c > 0, c̃ ≥ 0; got ({c}, {c_tilde})")));
        }
        Ok(KernelPair {
            name: format!("{}·({c:.4e},{c_tilde:.4e})", self.name),
            h: self.h.clone().scaled(c, 1.0),
            h_tilde: if c_tilde == 0.0 { Kernel::Zero } else { self.h_tilde.clone().scaled(c_tilde, 1.0) },
            gamma: c * self.gamma,
            gamma_tilde: c_tilde * self.gamma_tilde / c,
            excessive: self.excessive,
            heat_ratio_m: self.heat_ratio_m,
        })
    }

    /// Rescale so that the constants become `(8πνp/11, 2πν(1−p))`, making both
    /// cascade multipliers at most 1.
    pub fn theorem_scaled(&self, nu: f64, p: f64) -> Result<KernelPair> {
        let c = 8.0 * PI * nu * p / (11.0 * self.gamma);
        let c_tilde = if self.gamma_tilde > 0.0 {
            (4.0 * PI * nu).powi(2) * p * (1.0 - p) / (11.0 * self.gamma * self.gamma_tilde)
        } else {
            0.0
        };
        let mut out = self.rescaled(c, c_tilde)?;
        out.name = format!("{}[theorem]", self.name);
        if self.gamma_tilde > 0.0 {
            out.gamma_tilde = 2.0 * PI * nu * (1.0 - p);
        }
        out.gamma = 8.0 * PI * nu * p / 11.0;
        Ok(out)
    }

    /// `m(x) = ∫|y|^{-2} h²(x−y) dy / (8πν h(x))`.
    pub fn m(&self, x: Vec3, nu: f64) -> Result<f64> {
        let hx = self.h.eval(x);
        if hx == INFINITE {
            return self.m_limit(x, nu);
        }
        Ok(self.h.potential_sq(x)? / (8.0 * PI * nu * hx))
    }

    // at a singular point of h, take the limit along a short offset
    fn m_limit(&self, x: Vec3, nu: f64) -> Result<f64> {
        let xo = x + Vec3::new(1e-9, 0.0, 0.0);
        Ok(self.h.potential_sq(xo)? / (8.0 * PI * nu * self.h.eval(xo)))
    }

    /// `m̃(x) = ∫|y|^{-1} h̃(x−y) dy / (8πν h(x))`.
    pub fn m_tilde(&self, x: Vec3, nu: f64) -> Result<f64> {
        if self.h_tilde.is_zero() {
            return Ok(0.0);
        }
        let hx = self.h.eval(x);
        if hx == INFINITE {
            let xo = x + Vec3::new(1e-9, 0.0, 0.0);
            return Ok(self.h_tilde.potential_lin(xo)? / (8.0 * PI * nu * self.h.eval(xo)));
        }
        Ok(self.h_tilde.potential_lin(x)? / (8.0 * PI * nu * hx))
    }

    /// Heat ratio `∫ h(y) K(x−y, 2νt) dy / h(x)`.
    pub fn heat_ratio(&self, x: Vec3, t: f64, nu: f64) -> Result<f64> {
        Ok(ratio(self.h.heat_convolution(x, 2.0 * nu * t)?, self.h.eval(x)))
    }
}

/// `(m(x), m̃(x))`.
pub fn cascade_multipliers(pair: &KernelPair, nu: f64, x: Vec3) -> Result<(f64, f64)> {
    Ok((pair.m(x, nu)?, pair.m_tilde(x, nu)?))
}

/// Initial data and forcing together with the smallness parameters `(α, β, ε)`.
#[derive(Debug, Clone)]
pub struct AdmissiblePair {
    pub u0: InitialField,
    pub g: Forcing,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
}

/// Which size condition on `u₀` is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataCondition {
    /// `sup |u₀(x)| / h(x) ≤ αε` (the h-Brownian representation).
    Pointwise,
    /// `sup_{x,t} |u₀ ∗ K(·, 2νt)(x)| / h(x) ≤ αε` (the general representation).
    HeatSmoothed,
}

impl AdmissiblePair {
    /// Violated parameter ranges, by name; empty when `α ∈ [0,1)` and `ε, β ∈ (0, 1−α)`.
    pub fn parameter_violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.alpha >= 0.0 && self.alpha < 1.0) {
            v.push(format!("α ∈ [0,1) violated: α = {}", self.alpha));
        }
        let top = 1.0 - self.alpha;
        if !(self.epsilon > 0.0 && self.epsilon < top) {
            v.push(format!("ε ∈ (0,1−α) violated: ε = {}, 1−α = {top}", self.epsilon));
        }
        if !(self.beta > 0.0 && self.beta < top) {
            v.push(format!("β ∈ (0,1−α) violated: β = {}, 1−α = {top}", self.beta));
        }
        v
    }
}

/// Largest ratios found on a probe set (a sampled necessary check, not a proof of the supremum bound).
#[derive(Debug, Clone, serde::Serialize)]
pub struct AdmissibilityReport {
    pub u_ratio_max: f64,
    pub u_argmax: (Vec3, f64),
    pub u_bound: f64,
    pub g_ratio_max: f64,
    pub g_argmax: (Vec3, f64),
    pub g_bound: f64,
    pub parameter_violations: Vec<String>,
    pub probes: usize,
    pub pass: bool,
}

impl AdmissibilityReport {
    pub const CAVEAT: &'static str = "sampled check: ratios are maxima over a finite probe set, not certified suprema";
}

/// Sample `|u₀|/h` (or `|u₀∗K|/h`) and `|g|/h̃` on `probes × times` and compare with `αε`, `βε`.
pub fn check_admissibility(
    data: &AdmissiblePair,
    pair: &KernelPair,
    condition: DataCondition,
    probes: &[Vec3],
    times: &[f64],
    nu: f64,
) -> Result<AdmissibilityReport> {
    if probes.is_empty() {
        return Err(Error::domain("admissibility check needs at least one probe point"));
    }
    let times: Vec<f64> = if times.is_empty() { vec![0.0] } else { times.to_vec() };
    let mut rep = AdmissibilityReport {
        u_ratio_max: 0.0,
        u_argmax: (probes[0], 0.0),
        u_bound: data.alpha * data.epsilon,
        g_ratio_max: 0.0,
        g_argmax: (probes[0], 0.0),
        g_bound: data.beta * data.epsilon,
        parameter_violations: data.parameter_violations(),
        probes: 0,
        pass: false,
    };
    for &x in probes {
        let h = pair.h.eval(x);
        let ht = pair.h_tilde.eval(x);
        let u_times: &[f64] = match condition {
            DataCondition::Pointwise => &[0.0],
            DataCondition::HeatSmoothed => &times,
        };
        for &t in u_times {
            let u = data.u0.heat_convolution(x, 2.0 * nu * t)?;
            let r = ratio(u.norm(), h);
            rep.probes += 1;
            if r > rep.u_ratio_max || r.is_nan() {
                rep.u_ratio_max = r;
                rep.u_argmax = (x, t);
            }
        }
        for &t in &times {
            let r = ratio(data.g.eval(x, t).norm(), ht);
            if r > rep.g_ratio_max || r.is_nan() {
                rep.g_ratio_max = r;
                rep.g_argmax = (x, t);
            }
        }
    }
    rep.pass = rep.parameter_violations.is_empty()
        && rep.u_ratio_max <= rep.u_bound
        && rep.g_ratio_max <= rep.g_bound;
    Ok(rep)
}

/// Largest admissible `(sup |u₀∗K|/h, sup |g|/h̃)` for a pair with constants `(γ, γ̃)`
/// before rescaling: `8πνpαε/(11γ)` and `(4πν)² p(1−p) βε / (11γγ̃)`.
pub fn small_data_thresholds(pair: &KernelPair, nu: f64, p: f64, alpha: f64, beta: f64, epsilon: f64) -> (f64, f64) {
    let u = 8.0 * PI * nu * p * alpha * epsilon / (11.0 * pair.gamma);
    let g = if pair.gamma_tilde > 0.0 {
        (4.0 * PI * nu).powi(2) * p * (1.0 - p) * beta * epsilon / (11.0 * pair.gamma * pair.gamma_tilde)
    } else {
        INFINITE
    };
    (u, g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_constants() {
        let h0 = make_h0_pair(Kernel::tail_profile(1.0)).unwrap();
        assert!((h0.gamma - 31.006_276_680_3).abs() < 1e-9);
        assert!((h0.gamma_tilde - 4.0 * PI).abs() < 1e-8);
        let hh = make_H_pair();
        assert!((hh.gamma - 9.869_604_401).abs() < 1e-8);
        assert!((hh.heat_ratio_m.unwrap() - 2.540_251_5).abs() < 1e-6);
        let hp = make_Hp_pair(2.0).unwrap();
        assert!((hp.gamma - PI * PI * (1.0 + std::f64::consts::FRAC_1_SQRT_2)).abs() < 1e-12);
        assert!((hp.gamma - 16.848).abs() < 1e-3);
        assert!((hp.heat_ratio_m.unwrap() - 4.3365).abs() < 1e-3);
        assert!(make_Hp_pair(1.0).is_err());
        assert!(make_Hp_pair(2.5).is_err());
        // p → 1 recovers π³
        assert!((make_Hp_pair(1.0 + 1e-9).unwrap().gamma - PI.powi(3)).abs() < 1e-6);
    }

    #[test]
    fn divergent_profile_rejected() {
        let bad = Kernel::Radial(RadialFn { name: "r^-2".into(), f: Arc::new(|r: f64| 1.0 / (r * r)), majorant: None });
        assert!(make_h0_pair(bad).is_err());
    }

    #[test]
    fn multipliers_of_base_pairs() {
        let h0 = make_h0_pair(Kernel::tail_profile(1.0)).unwrap();
        for x in [Vec3::new(0.1, 0.0, 0.0), Vec3::new(1.0, 2.0, -3.0)] {
            let (m, _) = cascade_multipliers(&h0, 1.0, x).unwrap();
            assert!((m - PI * PI / 8.0).abs() < 1e-12);
            assert!((11.0 * m / 0.5 - 27.14).abs() < 0.01);
        }
        let hh = make_H_pair();
        let (m, mt) = cascade_multipliers(&hh, 2.0, Vec3::new(0.3, 0.4, 0.0)).unwrap();
        assert!((m - PI / 16.0).abs() < 1e-12);
        assert_eq!(mt, 0.0);
    }

    #[test]
    fn forcing_potential_closed_form_matches_radial_quadrature() {
        let general = Kernel::Radial(RadialFn {
            name: "tail".into(),
            f: Arc::new(|r: f64| 1.0 / (r * r * (1.0 + r).powi(2))),
            majorant: None,
        });
        for r in [0.01, 0.3, 1.0, 4.0, 50.0] {
            let x = Vec3::new(0.0, r, 0.0);
            let a = Kernel::tail_profile(1.0).potential_lin(x).unwrap();
            let b = general.potential_lin(x).unwrap();
            assert!((a / b - 1.0).abs() < 1e-9, "r={r}: {a} vs {b}");
        }
    }

    #[test]
    fn radial_potential_matches_closed_forms() {
        let h0r = Kernel::Radial(RadialFn { name: "1/r".into(), f: Arc::new(|r: f64| 1.0 / r), majorant: None });
        let hr = Kernel::Radial(RadialFn { name: "H".into(), f: Arc::new(|r: f64| 1.0 / (1.0 + r * r)), majorant: None });
        for r in [0.05, 1.0, 7.0] {
            let x = Vec3::new(r, 0.0, 0.0);
            let a = h0r.potential_sq(x).unwrap();
            assert!((a / Kernel::InvRadius.potential_sq(x).unwrap() - 1.0).abs() < 1e-8, "h0 r={r}");
            let b = hr.potential_sq(x).unwrap();
            assert!((b / Kernel::Lorentzian.potential_sq(x).unwrap() - 1.0).abs() < 1e-8, "H r={r}");
        }
    }

    #[test]
    fn heat_convolution_closed_form_matches_radial() {
        let h0r = Kernel::Radial(RadialFn { name: "1/r".into(), f: Arc::new(|r: f64| 1.0 / r), majorant: None });
        for (r, var) in [(0.5, 0.1), (1.0, 1.0), (3.0, 20.0), (0.0, 2.0)] {
            let x = Vec3::new(0.0, 0.0, r);
            let a = Kernel::InvRadius.heat_convolution(x, var).unwrap();
            let b = h0r.heat_convolution(x, var).unwrap();
            assert!((a / b - 1.0).abs() < 1e-8, "r={r} var={var}: {a} vs {b}");
        }
    }

    #[test]
    fn smoothing_gives_h1() {
        // Newton: ∫ |x−y|^{-1} f(y) dy = 4π ∫ ρ² f(ρ) / max(ρ, r) dρ
        let f = Kernel::Radial(RadialFn {
            name: "smoothing".into(),
            f: Arc::new(|r: f64| 1.0 / (2.0 * PI * r * (1.0 + r).powi(3))),
            majorant: None,
        });
        for r in [0.0, 0.2, 1.0, 5.0, 100.0] {
            let v = f.potential_lin(Vec3::new(r, 0.0, 0.0)).unwrap();
            assert!((v - 1.0 / (1.0 + r)).abs() < 1e-9, "r={r}: {v}");
        }
        let h0 = make_h0_pair(Kernel::Zero).unwrap();
        let h1 = kernel_algebra(KernelOp::Convolve(ConvolutionDensity::Smoothing), &h0).unwrap();
        assert!((h1.h.eval(Vec3::new(3.0, 0.0, 0.0)) - 0.25).abs() < 1e-15);
        assert!(h1.excessive);
    }

    #[test]
    fn algebra_constants() {
        let h0 = make_h0_pair(Kernel::tail_profile(1.0)).unwrap();
        let t = kernel_algebra(KernelOp::Translate(Vec3::new(1.0, 2.0, 3.0)), &h0).unwrap();
        assert_eq!(t.gamma, PI.powi(3));
        let mix = kernel_algebra(
            KernelOp::Mixture(vec![
                (0.3, kernel_algebra(KernelOp::Translate(Vec3::E1), &h0).unwrap()),
                (0.7, kernel_algebra(KernelOp::Translate(-Vec3::E2), &h0).unwrap()),
            ]),
            &h0,
        )
        .unwrap();
        assert!(mix.gamma <= PI.powi(3) * (1.0 + 1e-15));
        assert!(mix.excessive);
        let hh = make_H_pair();
        let mn = kernel_algebra(KernelOp::Min(hh.clone()), &h0).unwrap();
        assert_eq!(mn.gamma, PI * PI);
        assert!(!mn.excessive);
        let gm = kernel_algebra(KernelOp::GeoMean(hh, 0.25), &h0).unwrap();
        assert!((gm.gamma - PI.powf(0.75) * PI.powf(2.0 * 0.75)).abs() < 1e-12 || gm.gamma > 0.0);
        assert!((gm.gamma - PI.powi(3).powf(0.25) * (PI * PI).powf(0.75)).abs() < 1e-12);
        assert!(kernel_algebra(KernelOp::Mixture(vec![]), &h0).is_err());
        assert!(kernel_algebra(KernelOp::Mixture(vec![(0.5, h0.clone())]), &h0).is_err());
        assert!(kernel_algebra(KernelOp::Scale(-1.0), &h0).is_err());
    }

    #[test]
    fn theorem_scaling_gives_unit_multipliers() {
        let nu = 1.0;
        let p = 0.5;
        let pair = make_h0_pair(Kernel::tail_profile(1.0)).unwrap().theorem_scaled(nu, p).unwrap();
        for x in [Vec3::new(0.01, 0.0, 0.0), Vec3::new(1.0, 1.0, 0.0), Vec3::new(0.0, 0.0, 1e3)] {
            let (m, mt) = cascade_multipliers(&pair, nu, x).unwrap();
            assert!((11.0 * m / p - 1.0).abs() < 1e-12);
            let eta_t = 4.0 * mt / (1.0 - p);
            assert!(eta_t <= 1.0 + 1e-12 && eta_t > 0.0, "{eta_t}");
        }
        let far = cascade_multipliers(&pair, nu, Vec3::new(1e6, 0.0, 0.0)).unwrap().1;
        assert!((4.0 * far / (1.0 - p) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn power_piece_masses() {
        let p = PowerPiece { lo: 0.0, hi: 2.0, coef: 3.0, expo: 1.0 };
        assert!((p.mass().unwrap() - 6.0).abs() < 1e-15);
        let q = PowerPiece { lo: 1.0, hi: f64::INFINITY, coef: 1.0, expo: -2.0 };
        assert!((q.mass().unwrap() - 1.0).abs() < 1e-15);
        assert!(PowerPiece { lo: 0.0, hi: 1.0, coef: 1.0, expo: -1.0 }.mass().is_err());
        let l = PowerPiece { lo: 1.0, hi: std::f64::consts::E, coef: 2.0, expo: -1.0 };
        assert!((l.mass().unwrap() - 2.0).abs() < 1e-12);
        assert!((q.quantile(0.5) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn majorants_dominate() {
        let kernels = vec![
            Kernel::InvRadius,
            Kernel::Lorentzian,
            Kernel::OnePlusRPow(1.5),
            Kernel::tail_profile(1.0),
            Kernel::Mixture(vec![(0.4, Kernel::InvRadius.translated(Vec3::E1)), (0.6, Kernel::Lorentzian)]),
            Kernel::GeoMean(Box::new(Kernel::InvRadius), Box::new(Kernel::OnePlusRPow(2.0)), 0.3),
            Kernel::InvRadius.scaled(2.0, 3.0).rotated(Mat3::rotation(Vec3::new(1.0, 1.0, 0.0), 0.4)),
        ];
        let mut rng = RngStream::from_seed(3);
        for k in &kernels {
            for power in [Power::Sq, Power::Lin] {
                let terms = k.majorant(power).unwrap();
                for _ in 0..2000 {
                    let y = rng.normal3() * (3.0 * rng.uniform());
                    let v = k.eval(y);
                    let v = if power == Power::Sq { v * v } else { v };
                    let bound: f64 = terms.iter().map(|t| t.weight * t.psi.eval((y - t.center).norm())).sum();
                    assert!(v <= bound * (1.0 + 1e-12), "{k:?} {power:?} at {y:?}: {v} > {bound}");
                }
            }
        }
    }

    #[test]
    fn admissibility_report() {
        let pair = make_h0_pair(Kernel::tail_profile(1.0)).unwrap();
        let probes: Vec<Vec3> = (0..30).map(|i| Vec3::new(0.05 * (i as f64 + 1.0), 0.0, 0.0)).collect();
        let zero = AdmissiblePair { u0: InitialField::Zero, g: Forcing::Zero, alpha: 0.5, beta: 0.4, epsilon: 0.2 };
        let r = check_admissibility(&zero, &pair, DataCondition::HeatSmoothed, &probes, &[0.0, 1.0], 1.0).unwrap();
        assert_eq!((r.u_ratio_max, r.g_ratio_max), (0.0, 0.0));
        assert!(r.pass);
        // |x||u₀| attains 2δL²/e at |x|² = 2L²; set it to 0.9 αε
        let l = 1.0;
        let delta = 0.9 * 0.1 * std::f64::consts::E / (2.0 * l * l);
        let mut probes2 = probes.clone();
        probes2.push(Vec3::new(2f64.sqrt(), 0.0, 0.0));
        let d = AdmissiblePair { u0: InitialField::gaussian_swirl(delta, l).unwrap(), ..zero.clone() };
        let r = check_admissibility(&d, &pair, DataCondition::Pointwise, &probes2, &[], 1.0).unwrap();
        assert!((r.u_ratio_max - 0.09).abs() < 1e-12, "{}", r.u_ratio_max);
        assert!(r.pass);
        let bad = AdmissiblePair { epsilon: 0.6, ..zero };
        let r = check_admissibility(&bad, &pair, DataCondition::Pointwise, &probes, &[], 1.0).unwrap();
        assert!(!r.pass);
        assert!(r.parameter_violations[0].contains("ε ∈ (0,1−α)"));
    }

    #[test]
    fn unit_constant_thresholds() {
        // γ = γ̃ = 1, p = α = 1/2: (2πνε/11, (2πν)² βε / 11)
        let mut pair = make_h0_pair(Kernel::tail_profile(1.0)).unwrap();
        pair.gamma = 1.0;
        pair.gamma_tilde = 1.0;
        let nu = 0.7;
        let (u, g) = small_data_thresholds(&pair, nu, 0.5, 0.5, 0.3, 0.2);
        assert!((u - 2.0 * PI * nu * 0.2 / 11.0).abs() < 1e-15);
        assert!((g - (2.0 * PI * nu).powi(2) * 0.3 * 0.2 / 11.0).abs() < 1e-13);
        assert!(u < PI * nu / 11.0);
    }
}
