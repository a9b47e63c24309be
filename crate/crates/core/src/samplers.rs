//! Exact samplers for the cascade's transition densities.
//!
//! * `κ`: categorical with probabilities `(p/11, 4p/11, 6p/11, (1−p)/2, (1−p)/2)`.
//! * `τ₁(a)`: the hitting time of level `a` by a 1-D Brownian motion with
//!   diffusivity `2ν`, drawn as `a²/(4νW)`, `W ~ Gamma(1/2)`.
//! * `τ₀(a)`: `a²/(4νG)`, `G ~ Gamma(3/2)`, the harmonic combination of three
//!   independent copies of `τ₁(a)`.
//! * `Y | Z`: density `|y|^{-1} 1[|y| < |z|] / (2π|z|²)`.
//! * `Z`: marginal `∝ |z|^{-2} h²(x−z)` (bilinear) or `∝ |z|^{-1} h̃(x−z)` (forcing),
//!   by rejection from the kernel's power-law envelope.
//! * h-Brownian endpoint with trap, for excessive kernels.

use crate::error::{Error, Result};
use crate::kernels::{sample_envelope_target, KernelPair, MajorantTerm, Power, INFINITE};
use crate::rng::RngStream;
use crate::vecgeom::{Vec3, ZERO_NORM};

/// Branch type `κ ∈ {1,…,5}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Kappa(pub u8);

impl Kappa {
    pub fn is_bilinear(self) -> bool {
        self.0 <= 3
    }
}

pub fn kappa_probabilities(p: f64) -> Result<[f64; 5]> {
    check_p(p)?;
    let q = 0.5 * (1.0 - p);
    Ok([p / 11.0, 4.0 * p / 11.0, 6.0 * p / 11.0, q, q])
}

pub fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p <= 0.5 {
        Ok(())
    } else {
        Err(Error::domain(format!("branch probability must satisfy p ∈ (0,1/2], got {p}")))
    }
}

pub fn sample_kappa(p: f64, rng: &mut RngStream) -> Result<Kappa> {
    let probs = kappa_probabilities(p)?;
    let u = rng.uniform();
    // branch event first so that {κ ≤ 3} is exactly {u < p}
    if u < p {
        let v = u / p * 11.0;
        return Ok(Kappa(if v < 1.0 {
            1
        } else if v < 5.0 {
            2
        } else {
            3
        }));
    }
    Ok(Kappa(if u < p + probs[3] { 4 } else { 5 }))
}

fn check_level(a: f64, nu: f64) -> Result<()> {
    if a > 0.0 && a.is_finite() && nu > 0.0 && nu.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("waiting time needs a > 0, ν > 0; got a = {a}, ν = {nu}")))
    }
}

/// Draw from `f₁(s|a) = (4πν)^{-1/2} s^{-3/2} a e^{-a²/4νs}`.
pub fn sample_tau1(a: f64, nu: f64, rng: &mut RngStream) -> Result<f64> {
    check_level(a, nu)?;
    let n = rng.normal();
    let w = 0.5 * n * n;
    Ok(a * a / (4.0 * nu * w))
}

/// Draw from `f₀(s|a) = (2π)^{-1/2} (2ν)^{-3/2} s^{-5/2} a³ e^{-a²/4νs}`.
pub fn sample_tau0(a: f64, nu: f64, rng: &mut RngStream) -> Result<f64> {
    check_level(a, nu)?;
    let n = rng.normal();
    let g = 0.5 * n * n + rng.exp1();
    Ok(a * a / (4.0 * nu * g))
}

/// `P(τ₁(a) ≤ s) = erfc(a / √(4νs))`.
pub fn tau1_cdf(s: f64, a: f64, nu: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        crate::heat::erfc(a / (4.0 * nu * s).sqrt())
    }
}

/// `P(τ₀(a) ≤ s) = P(G ≥ a²/4νs)` for `G ~ Gamma(3/2)`: `erfc(√w) + 2√(w/π) e^{-w}`.
pub fn tau0_cdf(s: f64, a: f64, nu: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let w = a * a / (4.0 * nu * s);
    crate::heat::erfc(w.sqrt()) + 2.0 * (w / std::f64::consts::PI).sqrt() * (-w).exp()
}

pub fn sample_y_given_z(z: Vec3, rng: &mut RngStream) -> Result<Vec3> {
    let r = z.norm();
    if !(r >= ZERO_NORM) {
        return Err(Error::domain("Y | Z needs Z ≠ 0"));
    }
    let rho = r * rng.uniform().sqrt();
    Ok(rng.direction() * rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Bilinear,
    Forcing,
}

/// Precomputed majorants of `h²` and `h̃` feeding the `Z` rejection sampler.
#[derive(Debug, Clone)]
pub struct ZSampler {
    sq: Vec<MajorantTerm>,
    lin: Option<Vec<MajorantTerm>>,
}

impl ZSampler {
    pub fn new(pair: &KernelPair) -> Result<Self> {
        let sq = pair.h.majorant(Power::Sq)?;
        let lin = if pair.h_tilde.is_zero() { None } else { Some(pair.h_tilde.majorant(Power::Lin)?) };
        Ok(ZSampler { sq, lin })
    }

    pub fn sample(&self, x: Vec3, pair: &KernelPair, branch: Branch, rng: &mut RngStream) -> Result<Vec3> {
        match branch {
            Branch::Bilinear => sample_envelope_target(x, &self.sq, 2.0, rng, &|z: Vec3| {
                let h = pair.h.eval(x - z);
                h * h / z.norm_sq()
            }),
            Branch::Forcing => {
                let lin = self
                    .lin
                    .as_ref()
                    .ok_or_else(|| Error::domain("forcing-branch Z requested with h̃ ≡ 0"))?;
                sample_envelope_target(x, lin, 1.0, rng, &|z: Vec3| pair.h_tilde.eval(x - z) / z.norm())
            }
        }
    }
}

/// One-shot `Z` draw; cascades reuse a [`ZSampler`] instead.
pub fn sample_z(x: Vec3, pair: &KernelPair, branch: Branch, rng: &mut RngStream) -> Result<Vec3> {
    ZSampler::new(pair)?.sample(x, pair, branch, rng)
}

/// h-Brownian endpoint after time `t`: `Some(y)` with density
/// `h(y) K(x−y, 2νt) / h(x)`, or `None` for the trap state.
pub fn sample_hbm_endpoint(x: Vec3, t: f64, pair: &KernelPair, nu: f64, rng: &mut RngStream) -> Result<Option<Vec3>> {
    if !pair.excessive {
        return Err(Error::domain(format!("h-Brownian motion needs an excessive kernel; {} is not", pair.name)));
    }
    if !(t > 0.0) {
        return Err(Error::domain(format!("h-Brownian endpoint needs t > 0, got {t}")));
    }
    let hx = pair.h.eval(x);
    if !(hx < INFINITE && hx > 0.0) {
        return Err(Error::domain(format!("h-Brownian motion needs 0 < h(x) < ∞ at x = {x:?}")));
    }
    pair.h.sample_hbm(x, 2.0 * nu * t, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{make_H_pair, make_h0_pair, Kernel};

    #[test]
    fn kappa_split() {
        let pr = kappa_probabilities(0.5).unwrap();
        let want = [1.0 / 22.0, 2.0 / 11.0, 3.0 / 11.0, 0.25, 0.25];
        for (a, b) in pr.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((kappa_probabilities(0.17).unwrap().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(sample_kappa(0.6, &mut RngStream::from_seed(0)).is_err());
        assert!(sample_kappa(0.0, &mut RngStream::from_seed(0)).is_err());
    }

    #[test]
    fn kappa_frequencies() {
        let mut rng = RngStream::from_seed(5);
        let p = 0.3;
        let n = 200_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            counts[(sample_kappa(p, &mut rng).unwrap().0 - 1) as usize] += 1;
        }
        for (c, q) in counts.iter().zip(kappa_probabilities(p).unwrap()) {
            let sd = (q * (1.0 - q) / n as f64).sqrt();
            assert!((*c as f64 / n as f64 - q).abs() < 4.0 * sd);
        }
    }

    #[test]
    fn tau_cdf_median() {
        // erfc(1/√(4·1.0990)) ≈ 0.5
        assert!((tau1_cdf(1.0990, 1.0, 1.0) - 0.5).abs() < 1e-4);
        assert!(tau0_cdf(1e-9, 1.0, 1.0) < 1e-12);
        assert!((tau0_cdf(1e12, 1.0, 1.0) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn tau_bad_args() {
        let mut rng = RngStream::from_seed(0);
        assert!(sample_tau1(0.0, 1.0, &mut rng).is_err());
        assert!(sample_tau0(1.0, -1.0, &mut rng).is_err());
    }

    #[test]
    fn y_support() {
        let mut rng = RngStream::from_seed(9);
        let z = Vec3::new(0.3, -1.0, 2.0);
        let n = 100_000;
        let mut s = 0.0;
        for _ in 0..n {
            let y = sample_y_given_z(z, &mut rng).unwrap();
            assert!(y.norm() < z.norm());
            s += y.norm() / z.norm();
        }
        let mean = s / n as f64;
        // Var(√U) = 1/2 − 4/9
        assert!((mean - 2.0 / 3.0).abs() < 4.0 * (1.0 / 18.0f64 / n as f64).sqrt());
        assert!(sample_y_given_z(Vec3::ZERO, &mut rng).is_err());
    }

    #[test]
    fn hbm_requires_excessive() {
        let mut rng = RngStream::from_seed(0);
        assert!(sample_hbm_endpoint(Vec3::E1, 1.0, &make_H_pair(), 1.0, &mut rng).is_err());
        let h0 = make_h0_pair(Kernel::Zero).unwrap();
        assert!(sample_hbm_endpoint(Vec3::ZERO, 1.0, &h0, 1.0, &mut rng).is_err());
        assert!(sample_hbm_endpoint(Vec3::E1, 0.0, &h0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn hbm_small_time_stays_put() {
        let h0 = make_h0_pair(Kernel::Zero).unwrap();
        let mut rng = RngStream::from_seed(1);
        let x = Vec3::new(0.5, 0.2, -0.1);
        for _ in 0..1000 {
            let y = sample_hbm_endpoint(x, 1e-8, &h0, 1.0, &mut rng).unwrap().expect("no trap at tiny t");
            assert!((y - x).norm() < 1e-3);
        }
    }

    #[test]
    fn forcing_z_without_forcing_kernel_errors() {
        let h0 = make_h0_pair(Kernel::Zero).unwrap();
        let mut rng = RngStream::from_seed(2);
        assert!(sample_z(Vec3::E1, &h0, Branch::Forcing, &mut rng).is_err());
        assert!(sample_z(Vec3::E1, &h0, Branch::Bilinear, &mut rng).is_ok());
    }
}
