//! Invariant and statistical check suites.
//!
//! Every check returns the observed statistic next to the requirement it is
//! compared with. Statistical checks use fixed seeds, so a suite gives the same
//! verdict on every run.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::cascade::{eval_cascade, within_bound, EvalOptions, Mode, ProblemSpec};
use crate::config::reference_config;
use crate::data::{Forcing, InitialField};
use crate::error::{Error, Result};
use crate::heat::{ball_mass, erf, gamma_kernel, heat_kernel, heat_kernel_r2};
use crate::kernels::{make_H_pair, make_h0_pair, AdmissiblePair, Kernel, KernelPair, Power, RadialFn, INFINITE};
use crate::oracle::{gamma_fourier, heat_term_quadrature, picard_solve, FieldGrid, PicardOptions};
use crate::quad::{integrate, integrate_log_radial, integrate_with_breaks, QuadOptions};
use crate::rng::{CascadeKey, RngStream};
use crate::samplers::{
    kappa_probabilities, sample_hbm_endpoint, sample_tau0, sample_tau1, tau0_cdf, tau1_cdf, Branch, ZSampler,
};
use crate::vecgeom::{b1, b2, reflect, Vec3};

pub const SUITES: [&str; 6] = ["geometry", "heat", "kernels", "samplers", "cascade", "oracle"];

/// Printed with every verification summary.
pub const SAMPLED_CAVEAT: &str =
    "sampled check: suprema and bounds are tested on finite probe sets and samples, not certified";

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub observed: String,
    pub required: String,
    pub pass: bool,
}

impl Check {
    fn new(suite: &str, name: impl Into<String>, observed: impl Into<String>, required: impl Into<String>, pass: bool) -> Self {
        Check { suite: suite.into(), name: name.into(), observed: observed.into(), required: required.into(), pass }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {}/{}: observed {}; required {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.observed,
            self.required
        )
    }
}

/// Run one suite by name, or every suite for `"all"`.
pub fn run_suite(name: &str, seed: u64) -> Result<Vec<Check>> {
    match name {
        "geometry" => geometry_suite(seed),
        "heat" => heat_suite(),
        "kernels" => kernels_suite(),
        "samplers" => samplers_suite(seed),
        "cascade" => cascade_suite(seed),
        "oracle" => oracle_suite(),
        "all" => {
            let mut out = Vec::new();
            for s in SUITES {
                out.extend(run_suite(s, seed)?);
            }
            Ok(out)
        }
        other => Err(Error::config(format!("unknown suite {other}; expected one of {SUITES:?} or all"))),
    }
}

// ---------------------------------------------------------------- statistics

/// Kolmogorov distance between a sample and a CDF.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Asymptotic p-value of the Kolmogorov statistic with Stephens' small-sample correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lam = (sn + 0.12 + 0.11 / sn) * d;
    if lam < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = 2.0 * (-1f64).powi(k + 1) * (-2.0 * kf * kf * lam * lam).exp();
        s += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

/// Pearson statistic and p-value for observed counts against probabilities.
pub fn chi_square(counts: &[u64], probs: &[f64]) -> Result<(f64, f64)> {
    let n: u64 = counts.iter().sum();
    let mut stat = 0.0;
    for (&c, &p) in counts.iter().zip(probs) {
        let e = p * n as f64;
        if !(e > 0.0) {
            if c > 0 {
                return Ok((INFINITE, 0.0));
            }
            continue;
        }
        stat += (c as f64 - e).powi(2) / e;
    }
    let df = (probs.iter().filter(|&&p| p > 0.0).count() - 1) as f64;
    let dist = ChiSquared::new(df).map_err(|e| Error::numeric(format!("chi-square distribution: {e}")))?;
    Ok((stat, 1.0 - dist.cdf(stat)))
}

fn bin_index(edges: &[f64], v: f64) -> Option<usize> {
    if v < edges[0] || v > edges[edges.len() - 1] {
        return None;
    }
    Some(edges.partition_point(|&e| e <= v).clamp(1, edges.len() - 1) - 1)
}

fn qopts() -> QuadOptions {
    QuadOptions { abs_tol: 1e-15, rel_tol: 1e-10, max_intervals: 2000 }
}

fn converged(r: crate::quad::QuadResult<f64>, what: &str) -> Result<f64> {
    if r.converged {
        Ok(r.value)
    } else {
        Err(Error::numeric(format!("{what} quadrature did not converge ({:.2e})", r.abs_err)))
    }
}

// ---------------------------------------------------------------- geometry

/// Bilinear-form bounds `|b₁| ≤ |u||v|`, `|b₂| ≤ 2|u||v|`, `|reflect(u)| ≤ 2|u|` on `n` random triples.
pub fn bilinear_bound_sweep(n: u64, seed: u64) -> Result<(u64, f64)> {
    let mut rng = RngStream::from_seed(seed);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    let slack = 1.0 + 1e-12;
    for _ in 0..n {
        let draw = |rng: &mut RngStream| rng.normal3() * 10f64.powf(6.0 * rng.uniform() - 3.0);
        let (y, u, v) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let uv = u.norm() * v.norm();
        let r1 = b1(y, u, v)?.norm() / uv;
        let r2 = b2(y, u, v)?.norm() / (2.0 * uv);
        let r3 = reflect(y, u)?.norm() / (2.0 * u.norm());
        for r in [r1, r2, r3] {
            worst = worst.max(r);
            if r > slack {
                violations += 1;
            }
        }
    }
    Ok((violations, worst))
}

fn geometry_suite(seed: u64) -> Result<Vec<Check>> {
    let (v, worst) = bilinear_bound_sweep(1_000_000, seed)?;
    Ok(vec![Check::new(
        "geometry",
        "bilinear bounds (10⁶ triples)",
        format!("{v} violations, max normalized ratio {worst:.15}"),
        "0 violations at 1e-12 relative slack",
        v == 0,
    )])
}

// ---------------------------------------------------------------- heat

/// `max |tr Γ(x,s) − 2K(x,2νs)|` relative to `max(2K, max|Γᵢⱼ|)`, and `max |Γ − Γᵗ|`, over probes.
///
/// Far from the origin `K` underflows long before the dipole part of `Γ` does, so the
/// trace cancellation is measured against the size of the entries.
pub fn gamma_trace_check(probes: &[(Vec3, f64)], nu: f64) -> Result<(f64, f64)> {
    let mut tr: f64 = 0.0;
    let mut asym: f64 = 0.0;
    for &(x, s) in probes {
        let g = gamma_kernel(x, s, nu)?;
        let k = heat_kernel(x, 2.0 * nu * s)?;
        let scale = (2.0 * k).max(g.max_abs()).max(f64::MIN_POSITIVE);
        tr = tr.max((g.trace() - 2.0 * k).abs() / scale);
        asym = asym.max(g.asymmetry() / scale);
    }
    Ok((tr, asym))
}

/// Largest relative deviation of the closed-form `Γ` from its Fourier quadrature.
pub fn gamma_fourier_check(probes: &[(Vec3, f64)], nu: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &(x, s) in probes {
        let a = gamma_kernel(x, s, nu)?;
        let b = gamma_fourier(x, s, nu);
        worst = worst.max((a - b).max_abs() / a.max_abs());
    }
    Ok(worst)
}

pub fn gamma_probes() -> Vec<(Vec3, f64)> {
    vec![
        (Vec3::new(0.5, 0.0, 0.0), 0.3),
        (Vec3::new(0.3, -0.4, 0.8), 1.0),
        (Vec3::new(1.0, 1.0, 0.5), 0.8),
        (Vec3::new(0.0, 0.2, 0.1), 0.05),
        (Vec3::new(-0.7, 0.4, -0.2), 0.5),
    ]
}

/// Heat ratio of `h₀ = |x|⁻¹` by radial quadrature, compared with `erf(|x|/(2√(νt)))`.
///
/// The ratio equals `P(|N| < |x|/√(2νt))` for a single standard normal coordinate `N`.
pub fn h0_excessivity(probes: &[(f64, f64)], nu: f64) -> Result<Vec<(f64, f64, f64)>> {
    let h0 = quadrature_only(Arc::new(|r: f64| 1.0 / r), "inv-radius");
    let mut out = Vec::new();
    for &(r, t) in probes {
        let q = h0.heat_convolution(Vec3::new(r, 0.0, 0.0), 2.0 * nu * t)? * r;
        let closed = erf(r / (2.0 * (nu * t).sqrt()));
        out.push((q, closed, (q - closed).abs()));
    }
    Ok(out)
}

pub fn excessivity_probes() -> Vec<(f64, f64)> {
    let mut v = Vec::new();
    for r in [0.05, 0.3, 1.0, 2.5, 7.0] {
        for t in [0.01, 0.2, 1.0, 5.0] {
            v.push((r, t));
        }
    }
    v
}

// a radial kernel with no closed forms, so every integral goes through quadrature
fn quadrature_only(f: Arc<dyn Fn(f64) -> f64 + Send + Sync>, name: &str) -> Kernel {
    Kernel::Radial(RadialFn { name: name.into(), f, majorant: None })
}

fn heat_suite() -> Result<Vec<Check>> {
    let s = "heat";
    let mut out = Vec::new();
    let mass = converged(
        integrate_log_radial(|r| 4.0 * PI * r * r * heat_kernel_r2(r * r, 0.7), 1.0, &[0.84], qopts()),
        "heat kernel mass",
    )?;
    out.push(Check::new(s, "∫K(y,T)dy = 1", format!("{mass:.12}"), "|·−1| ≤ 1e-9", (mass - 1.0).abs() <= 1e-9));
    let mut worst: f64 = 0.0;
    for (r, ns) in [(0.1, 0.5), (1.0, 0.25), (3.0, 1.0), (0.01, 2.0)] {
        let q = converged(
            integrate(|y| 4.0 * PI * y * y * heat_kernel_r2(y * y, 2.0 * ns), 0.0, r, qopts()),
            "ball mass",
        )?;
        worst = worst.max((q - ball_mass(r, ns)?).abs());
    }
    out.push(Check::new(s, "ball mass vs quadrature", format!("max abs error {worst:.2e}"), "≤ 1e-10", worst <= 1e-10));
    let (tr, asym) = gamma_trace_check(&gamma_probes(), 1.0)?;
    out.push(Check::new(s, "tr Γ = 2K", format!("max relative deviation {tr:.2e}, asymmetry {asym:.1e}"), "≤ 1e-12", tr <= 1e-12 && asym <= 1e-12));
    let fw = gamma_fourier_check(&gamma_probes(), 1.0)?;
    out.push(Check::new(s, "Γ vs Fourier quadrature (5 points)", format!("max relative deviation {fw:.2e}"), "≤ 2%", fw <= 0.02));
    let ex = h0_excessivity(&excessivity_probes(), 1.0)?;
    let max_dev = ex.iter().map(|e| e.2).fold(0.0, f64::max);
    let max_ratio = ex.iter().map(|e| e.0).fold(0.0, f64::max);
    out.push(Check::new(
        s,
        "h₀ excessivity: quadrature vs erf(|x|/(2√(νt)))",
        format!("max |Δ| {max_dev:.2e}, max ratio {max_ratio:.9}"),
        "|Δ| ≤ 1e-6 and ratio ≤ 1",
        max_dev <= 1e-6 && max_ratio <= 1.0 + 1e-12,
    ));
    Ok(out)
}

// ---------------------------------------------------------------- kernels

/// `∫ h²(x−y)|y|⁻² dy / h(x)` by quadrature at `n` radii in `[10⁻², 10²]`.
pub fn gamma_quadrature(profile: Arc<dyn Fn(f64) -> f64 + Send + Sync>, n: usize) -> Result<Vec<f64>> {
    let k = quadrature_only(profile.clone(), "probe");
    let mut out = Vec::new();
    for i in 0..n {
        let r = 10f64.powf(-2.0 + 4.0 * i as f64 / (n - 1) as f64);
        let x = Vec3::new(r * 0.6, -r * 0.8, 0.0);
        out.push(k.potential_sq(x)? / profile(r));
    }
    Ok(out)
}

fn kernels_suite() -> Result<Vec<Check>> {
    let s = "kernels";
    let mut out = Vec::new();
    for (name, f, want) in [
        ("h₀", Arc::new(|r: f64| 1.0 / r) as Arc<dyn Fn(f64) -> f64 + Send + Sync>, PI.powi(3)),
        ("H", Arc::new(|r: f64| 1.0 / (1.0 + r * r)), PI * PI),
    ] {
        let q = gamma_quadrature(f, 20)?;
        let dev = q.iter().map(|v| (v / want - 1.0).abs()).fold(0.0, f64::max);
        let top = q.iter().cloned().fold(0.0, f64::max);
        out.push(Check::new(
            s,
            format!("γ quadrature for {name} (20 probes)"),
            format!("max {top:.5}, max relative deviation from {want:.5}: {dev:.2e}"),
            "≤ 0.5%",
            dev <= 0.005,
        ));
    }
    let nu = 1.0;
    let p = 0.5;
    let pair = make_h0_pair(Kernel::tail_profile(1.0))?.theorem_scaled(nu, p)?;
    let mut mmax: f64 = 0.0;
    let mut mtmax: f64 = 0.0;
    for r in [0.01, 0.1, 0.5, 1.0, 3.0, 10.0, 100.0] {
        let x = Vec3::new(0.0, r, 0.0);
        mmax = mmax.max(11.0 * pair.m(x, nu)? / p);
        mtmax = mtmax.max(2.0 * pair.m_tilde(x, nu)? / (1.0 - p));
    }
    out.push(Check::new(
        s,
        "theorem scaling: 11m/p and 2m̃/(1−p)",
        format!("max {mmax:.12}, {mtmax:.12}"),
        "≤ 1",
        mmax <= 1.0 + 1e-9 && mtmax <= 1.0 + 1e-9,
    ));
    let mut worst: f64 = 0.0;
    for pair in [pair.clone(), make_H_pair()] {
        for (k, pw) in [(&pair.h, Power::Sq), (&pair.h_tilde, Power::Lin)] {
            if k.is_zero() {
                continue;
            }
            let terms = k.majorant(pw)?;
            for i in 0..400 {
                let r = 10f64.powf(-3.0 + 6.0 * i as f64 / 399.0);
                let y = Vec3::new(r * 0.36, r * 0.48, -r * 0.8);
                let v = k.eval(y);
                let v = if pw == Power::Sq { v * v } else { v };
                let env: f64 = terms.iter().map(|t| t.weight * t.psi.eval((y - t.center).norm())).sum();
                if v > 0.0 {
                    worst = worst.max(v / env);
                }
            }
        }
    }
    out.push(Check::new(s, "power-law envelopes dominate", format!("max target/envelope {worst:.6}"), "≤ 1", worst <= 1.0 + 1e-12));
    Ok(out)
}

// ---------------------------------------------------------------- samplers

/// KS statistics and p-values for `τ₁(a)` and `τ₀(a)`, `n` draws each.
pub fn tau_ks(n: usize, a: f64, nu: f64, seed: u64) -> Result<[(f64, f64); 2]> {
    let mut rng = RngStream::from_seed(seed);
    let mut s1: Vec<f64> = (0..n).map(|_| sample_tau1(a, nu, &mut rng)).collect::<Result<_>>()?;
    let mut s0: Vec<f64> = (0..n).map(|_| sample_tau0(a, nu, &mut rng)).collect::<Result<_>>()?;
    let d1 = ks_statistic(&mut s1, |s| tau1_cdf(s, a, nu));
    let d0 = ks_statistic(&mut s0, |s| tau0_cdf(s, a, nu));
    Ok([(d1, ks_p_value(d1, n)), (d0, ks_p_value(d0, n))])
}

/// Largest gap between the closed-form waiting-time CDFs and the quadrature of their densities.
pub fn tau_cdf_quadrature_gap(a: f64, nu: f64) -> Result<f64> {
    let f1 = |s: f64| if s <= 0.0 { 0.0 } else { a / (4.0 * PI * nu).sqrt() * s.powf(-1.5) * (-a * a / (4.0 * nu * s)).exp() };
    let f0 = |s: f64| {
        if s <= 0.0 {
            0.0
        } else {
            (2.0 * PI).powf(-0.5) * (2.0 * nu).powf(-1.5) * s.powf(-2.5) * a.powi(3) * (-a * a / (4.0 * nu * s)).exp()
        }
    };
    let mut worst: f64 = 0.0;
    let peak = a * a / (6.0 * nu);
    for i in 0..40 {
        let s = peak * 10f64.powf(-1.5 + 4.0 * i as f64 / 39.0);
        let q1 = converged(integrate_with_breaks(f1, 0.0, s, &[peak], qopts()), "f₁ CDF")?;
        let q0 = converged(integrate_with_breaks(f0, 0.0, s, &[peak], qopts()), "f₀ CDF")?;
        worst = worst.max((q1 - tau1_cdf(s, a, nu)).abs()).max((q0 - tau0_cdf(s, a, nu)).abs());
    }
    Ok(worst)
}

/// Mass of `{ρ₁ ≤ |z| < ρ₂, μ₁ ≤ cos∠(z, x) < μ₂}` under `|z|^{w−2} F(|x−z|) dz` for radial `F`.
fn z_bin_mass(f: &dyn Fn(f64) -> f64, w: i32, big_r: f64, rho: (f64, f64), mu: (f64, f64), total: f64) -> Result<f64> {
    // bin masses to 1e-8 of the total, far below the resolution of any feasible sample
    let opts = QuadOptions { abs_tol: 1e-8 * total, rel_tol: 1e-8, max_intervals: 4000 };
    let inner = |rh: f64| -> f64 {
        let d2 = |m: f64| (big_r * big_r + rh * rh - 2.0 * big_r * rh * m).max(0.0);
        let lo = d2(mu.1).sqrt().max(1e-14 * big_r);
        let hi = d2(mu.0).sqrt();
        if hi <= lo {
            return 0.0;
        }
        let r = integrate(|u: f64| { let d = u.exp(); f(d) * d * d }, lo.ln(), hi.ln(), qopts());
        rh.powi(w) * r.value / (big_r * rh)
    };
    converged(integrate_with_breaks(inner, rho.0, rho.1, &[big_r], opts), "Z bin").map(|v| 2.0 * PI * v)
}

/// Chi-square test of the `Z` sampler for `pair` at `x` (`n` draws).
pub fn z_chi_square(pair: &KernelPair, x: Vec3, branch: Branch, n: usize, seed: u64) -> Result<(f64, f64, usize)> {
    let big_r = x.norm();
    let (k, w, total) = match branch {
        Branch::Bilinear => (&pair.h, 0, pair.h.potential_sq(x)?),
        Branch::Forcing => (&pair.h_tilde, 1, pair.h_tilde.potential_lin(x)?),
    };
    let f: Box<dyn Fn(f64) -> f64> = match branch {
        Branch::Bilinear => Box::new(|d: f64| k.eval(Vec3::new(d, 0.0, 0.0)).powi(2)),
        Branch::Forcing => Box::new(|d: f64| k.eval(Vec3::new(d, 0.0, 0.0))),
    };
    let rho_edges: Vec<f64> = [0.0, 0.3, 0.6, 0.9, 1.1, 1.5, 2.5, 5.0].iter().map(|e| e * big_r).collect();
    let mu_edges = [-1.0, -0.5, 0.0, 0.5, 0.9, 1.0];
    let mut probs = Vec::new();
    for rw in rho_edges.windows(2) {
        for mw in mu_edges.windows(2) {
            probs.push(z_bin_mass(&*f, w, big_r, (rw[0], rw[1]), (mw[0], mw[1]), total)? / total);
        }
    }
    let tail = 1.0 - probs.iter().sum::<f64>();
    probs.push(tail);
    let sampler = ZSampler::new(pair)?;
    let mut rng = RngStream::from_seed(seed);
    let mut counts = vec![0u64; probs.len()];
    let nmu = mu_edges.len() - 1;
    for _ in 0..n {
        let z = sampler.sample(x, pair, branch, &mut rng)?;
        let r = z.norm();
        let m = (z.dot(x) / (r * big_r)).clamp(-1.0, 1.0);
        let i = match bin_index(&rho_edges, r) {
            Some(i) if r < rho_edges[rho_edges.len() - 1] => i * nmu + bin_index(&mu_edges, m).expect("μ in [−1,1]"),
            _ => probs.len() - 1,
        };
        counts[i] += 1;
    }
    let (stat, p) = chi_square(&counts, &probs)?;
    Ok((stat, p, probs.len()))
}

/// Chi-square test of the h-Brownian endpoint (bins in `|y−x|`, angle, and the trap) for `h = c|x|⁻¹`.
pub fn hbm_chi_square(pair: &KernelPair, x: Vec3, t: f64, nu: f64, n: usize, seed: u64) -> Result<(f64, f64, f64, u64)> {
    let var = 2.0 * nu * t;
    let sd = var.sqrt();
    let big_r = x.norm();
    let hx = pair.h.eval(x);
    let rho_edges: Vec<f64> = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 14.0].iter().map(|e| e * sd).collect();
    let mu_edges = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let h = &pair.h;
    let mut probs = Vec::new();
    for rw in rho_edges.windows(2) {
        for mw in mu_edges.windows(2) {
            let inner = |rh: f64| -> f64 {
                if rh == 0.0 {
                    return 0.0;
                }
                let d = |m: f64| (big_r * big_r + rh * rh + 2.0 * big_r * rh * m).max(0.0).sqrt();
                let (lo, hi) = (d(mw[0]).max(1e-14 * big_r), d(mw[1]));
                let r = integrate(|u: f64| { let dd = u.exp(); h.eval(Vec3::new(dd, 0.0, 0.0)) * dd * dd }, lo.ln(), hi.ln(), qopts());
                rh * rh * heat_kernel_r2(rh * rh, var) * r.value / (big_r * rh)
            };
            let opts = QuadOptions { abs_tol: 1e-9 * hx, rel_tol: 1e-8, max_intervals: 2000 };
            let m = converged(integrate_with_breaks(inner, rw[0], rw[1], &[big_r], opts), "endpoint bin")?;
            probs.push(2.0 * PI * m / hx);
        }
    }
    let trap = 1.0 - probs.iter().sum::<f64>();
    probs.push(trap);
    let mut rng = RngStream::from_seed(seed);
    let mut counts = vec![0u64; probs.len()];
    let nmu = mu_edges.len() - 1;
    let mut trapped = 0;
    for _ in 0..n {
        match sample_hbm_endpoint(x, t, pair, nu, &mut rng)? {
            None => {
                trapped += 1;
                counts[probs.len() - 1] += 1;
            }
            Some(y) => {
                let w = y - x;
                let r = w.norm();
                let m = (w.dot(x) / (r * big_r)).clamp(-1.0, 1.0);
                let i = bin_index(&rho_edges, r).unwrap_or(rho_edges.len() - 2);
                counts[i * nmu + bin_index(&mu_edges, m).expect("μ in [−1,1]")] += 1;
            }
        }
    }
    let (stat, p) = chi_square(&counts, &probs)?;
    Ok((stat, p, trap, trapped))
}

/// Trap count for `n` endpoints at `|x| = √(2νt)`, with the trap probability `1 − erf(1/√2)`.
pub fn trap_frequency(pair: &KernelPair, nu: f64, t: f64, n: u64, seed: u64) -> Result<(u64, f64)> {
    let x = Vec3::new(0.6, 0.0, 0.8) * (2.0 * nu * t).sqrt();
    let mut rng = RngStream::from_seed(seed);
    let mut trapped = 0;
    for _ in 0..n {
        if sample_hbm_endpoint(x, t, pair, nu, &mut rng)?.is_none() {
            trapped += 1;
        }
    }
    Ok((trapped, 1.0 - erf(std::f64::consts::FRAC_1_SQRT_2)))
}

fn samplers_suite(seed: u64) -> Result<Vec<Check>> {
    let s = "samplers";
    let mut out = Vec::new();
    let gap = tau_cdf_quadrature_gap(0.8, 1.0)?;
    out.push(Check::new(s, "waiting-time CDFs vs density quadrature", format!("max gap {gap:.2e}"), "≤ 1e-9", gap <= 1e-9));
    let [(d1, p1), (d0, p0)] = tau_ks(100_000, 0.8, 1.0, seed)?;
    out.push(Check::new(s, "τ₁ KS (N=10⁵)", format!("D = {d1:.5}, p = {p1:.4}"), "p ≥ 0.01", p1 >= 0.01));
    out.push(Check::new(s, "τ₀ KS (N=10⁵)", format!("D = {d0:.5}, p = {p0:.4}"), "p ≥ 0.01", p0 >= 0.01));
    let pair = make_h0_pair(Kernel::tail_profile(1.0))?.theorem_scaled(1.0, 0.5)?;
    let x = Vec3::new(0.7, 0.3, -0.4);
    for (b, name) in [(Branch::Bilinear, "bilinear"), (Branch::Forcing, "forcing")] {
        let (stat, p, bins) = z_chi_square(&pair, x, b, 100_000, seed + 1)?;
        out.push(Check::new(s, format!("Z chi-square, {name} branch"), format!("χ² = {stat:.2} on {bins} bins, p = {p:.4}"), "p ≥ 0.01", p >= 0.01));
    }
    let (stat, p, trap, _) = hbm_chi_square(&pair, x, 0.3, 1.0, 100_000, seed + 2)?;
    out.push(Check::new(
        s,
        "h-Brownian endpoint chi-square",
        format!("χ² = {stat:.2}, p = {p:.4} (trap mass {trap:.6})"),
        "p ≥ 0.01",
        p >= 0.01,
    ));
    let n = 100_000;
    let (trapped, q) = trap_frequency(&pair, 1.0, 0.5, n, seed + 3)?;
    let f = trapped as f64 / n as f64;
    let sd = (q * (1.0 - q) / n as f64).sqrt();
    out.push(Check::new(
        s,
        "trap frequency at |x| = √(2νt)",
        format!("{f:.5} (±{sd:.5})"),
        format!("within 3σ of 1 − erf(1/√2) = {q:.5}"),
        (f - q).abs() <= 3.0 * sd,
    ));
    Ok(out)
}

// ---------------------------------------------------------------- cascade

/// Largest `|Ξ|` and the count above `ε` over `n` cascades spread across `points`.
pub fn as_bound_sweep(spec: &ProblemSpec, points: &[(Vec3, f64)], n: u64, seed: u64) -> Result<(u64, f64, u64)> {
    let eps = spec.data.epsilon;
    let mut over = 0;
    let mut worst: f64 = 0.0;
    let mut truncated = 0;
    for i in 0..n {
        let (x, t) = points[(i % points.len() as u64) as usize];
        let o = eval_cascade(x, t, spec, RngStream::root(CascadeKey::new(seed, i, 0)), EvalOptions::default())?;
        worst = worst.max(o.value.norm());
        if !within_bound(&o, eps) {
            over += 1;
        }
        truncated += o.truncated as u64;
    }
    Ok((over, worst, truncated))
}

pub fn as_bound_points() -> Vec<(Vec3, f64)> {
    vec![
        (Vec3::new(1.0, 0.0, 0.0), 0.5),
        (Vec3::new(0.3, 0.2, -0.1), 0.1),
        (Vec3::new(2.0, -1.0, 0.5), 2.0),
        (Vec3::new(0.0, 0.4, 0.5), 1.0),
    ]
}

/// Reference (theorem-regime) problem in the given mode.
pub fn reference_problem(mode: Mode) -> Result<ProblemSpec> {
    let mut c = reference_config();
    c.mode = mode;
    c.problem()
}

/// Galton-Watson statistics at `t = ∞` with zero data.
#[derive(Debug, Clone, Copy)]
pub struct GwStats {
    pub mean_nodes: f64,
    pub mean_nodes_se: f64,
    /// Fraction of `κ` draws that branch.
    pub branch_fraction: f64,
    /// Ratio-estimator standard error of `branch_fraction` (draws within a tree are not independent in number).
    pub branch_se: f64,
    pub draws: u64,
    pub truncated: u64,
}

pub fn gw_statistics(p: f64, n: u64, depth_cap: u32, seed: u64) -> Result<GwStats> {
    let pair = make_h0_pair(Kernel::tail_profile(1.0))?.theorem_scaled(1.0, p)?;
    let data = AdmissiblePair { u0: InitialField::Zero, g: Forcing::Zero, alpha: 0.5, beta: 0.4, epsilon: 0.2 };
    let spec = ProblemSpec::new(1.0, p, pair, data, Mode::Xi)?;
    let mut per_tree = Vec::with_capacity(n as usize);
    let mut truncated = 0;
    for i in 0..n {
        let o = eval_cascade(
            Vec3::new(0.6, -0.2, 0.3),
            f64::INFINITY,
            &spec,
            RngStream::root(CascadeKey::new(seed, 7, i)),
            EvalOptions { depth_cap, ..Default::default() },
        )?;
        truncated += o.truncated as u64;
        let kc = o.kappa_counts;
        per_tree.push((o.nodes as f64, (kc[0] + kc[1] + kc[2]) as f64, kc.iter().sum::<u64>() as f64));
    }
    let nf = n as f64;
    let mean = per_tree.iter().map(|t| t.0).sum::<f64>() / nf;
    let var = per_tree.iter().map(|t| (t.0 - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let sb: f64 = per_tree.iter().map(|t| t.1).sum();
    let sd: f64 = per_tree.iter().map(|t| t.2).sum();
    let r = sb / sd;
    let dbar = sd / nf;
    let rvar = per_tree.iter().map(|t| (t.1 - r * t.2).powi(2)).sum::<f64>() / (nf - 1.0) / (nf * dbar * dbar);
    Ok(GwStats {
        mean_nodes: mean,
        mean_nodes_se: (var / nf).sqrt(),
        branch_fraction: r,
        branch_se: rvar.sqrt(),
        draws: sd as u64,
        truncated,
    })
}

fn cascade_suite(seed: u64) -> Result<Vec<Check>> {
    let s = "cascade";
    let mut out = Vec::new();
    for mode in [Mode::Xi, Mode::Upsilon] {
        let spec = reference_problem(mode)?;
        let (over, worst, trunc) = as_bound_sweep(&spec, &as_bound_points(), 100_000, seed)?;
        out.push(Check::new(
            s,
            format!("|Ξ| ≤ ε over 10⁵ cascades ({mode:?})"),
            format!("{over} above ε, max |Ξ| = {worst:.6}, truncated {trunc}"),
            format!("0 above ε = {}", spec.data.epsilon),
            over == 0,
        ));
    }
    let n = 100_000;
    let g = gw_statistics(0.25, n, 10_000, seed + 1)?;
    out.push(Check::new(
        s,
        "branch frequency (p = 1/4)",
        format!("{:.5} ± {:.5} over {} draws", g.branch_fraction, g.branch_se, g.draws),
        "within 3σ of 0.25",
        (g.branch_fraction - 0.25).abs() <= 3.0 * g.branch_se,
    ));
    out.push(Check::new(
        s,
        "mean tree size (p = 1/4, t = ∞)",
        format!("{:.4} ± {:.4}", g.mean_nodes, g.mean_nodes_se),
        "within 3σ of 1/(1−2p) = 2",
        (g.mean_nodes - 2.0).abs() <= 3.0 * g.mean_nodes_se,
    ));
    let probs = kappa_probabilities(0.5)?;
    out.push(Check::new(s, "κ probabilities sum", format!("{:.15}", probs.iter().sum::<f64>()), "1", (probs.iter().sum::<f64>() - 1.0).abs() < 1e-15));
    let spec = reference_problem(Mode::Xi)?;
    let (_, _, trunc) = as_bound_sweep(&spec, &[(Vec3::new(1.0, 0.0, 0.0), 2.0)], 20_000, seed + 2)?;
    let frac = trunc as f64 / 20_000.0;
    out.push(Check::new(s, "truncated fraction at depth cap 10⁴ (t = 2)", format!("{frac:.2e}"), "< 1e-3", frac < 1e-3));
    Ok(out)
}

// ---------------------------------------------------------------- oracle

fn oracle_suite() -> Result<Vec<Check>> {
    let s = "oracle";
    let mut out = Vec::new();
    let opts = PicardOptions::default();
    let u0 = InitialField::gaussian_swirl(1.0, 1.0)?;
    let mut worst: f64 = 0.0;
    for (x, var) in [(Vec3::new(1.0, 0.0, 0.0), 1.0), (Vec3::new(0.3, -0.5, 0.8), 0.25), (Vec3::new(2.0, 1.0, -1.0), 4.0)] {
        let q = heat_term_quadrature(&u0, x, var, &opts);
        let c = u0.heat_convolution(x, var)?;
        worst = worst.max((q - c).max_abs() / c.max_abs());
    }
    out.push(Check::new(s, "heat term: comparator rule vs closed form", format!("max relative error {worst:.2e}"), "≤ 1e-4", worst <= 1e-4));

    let mut zero = reference_config();
    zero.u0.amplitude = 0.0;
    zero.forcing.amplitude = 0.0;
    let spec = zero.problem()?;
    let grid = FieldGrid::new(0.1, 8.0, 6, 5, &[0.5, 1.0])?;
    let (f, rep) = picard_solve(&spec, &grid, &PicardOptions { n_polar: 6, n_azimuth: 8, ..opts })?;
    let zero_ok = f.values.iter().all(|v| *v == Vec3::ZERO) && rep.diffs == vec![0.0];
    out.push(Check::new(s, "zero data is a fixed point", format!("sweeps {:?}", rep.diffs), "one sweep, field ≡ 0", zero_ok));

    let spec = reference_problem(Mode::Xi)?;
    let grid = FieldGrid::new(0.0625, 16.0, 9, 5, &[0.125, 0.25, 0.5, 1.0, 2.0])?;
    let popts = PicardOptions { n_polar: 8, n_azimuth: 12, ..opts };
    let (coarse, rep) = picard_solve(&spec, &grid, &popts)?;
    let rmax = rep.ratios.iter().cloned().fold(0.0, f64::max);
    let eps = spec.data.epsilon;
    out.push(Check::new(
        s,
        "Picard contraction in the theorem regime",
        format!("ratios {:?}", rep.ratios.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>()),
        format!("≤ 2ε = {}", 2.0 * eps),
        !rep.ratios.is_empty() && rmax <= 2.0 * eps,
    ));
    let sup = *rep.sup_ratio.last().expect("sweeps");
    out.push(Check::new(s, "fixed point |u|/h ≤ ε at all nodes", format!("{sup:.6}"), format!("≤ {eps}"), sup <= eps));
    let (fine, _) = picard_solve(&spec, &grid.refined()?, &popts.refined())?;
    let mut dmax: f64 = 0.0;
    for k in 1..coarse.times.len() {
        for i in 0..coarse.n_r() {
            for j in 0..coarse.n_polar() {
                let h = spec.pair.h.eval(coarse.node(i, j));
                dmax = dmax.max((coarse.get(k, i, j) - fine.get(2 * k, 2 * i, 2 * j)).norm() / h);
            }
        }
    }
    out.push(Check::new(s, "grid halving changes |u|/h by", format!("{dmax:.2e}"), "≤ 1e-2·ε", dmax <= 1e-2 * eps));
    Ok(out)
}
