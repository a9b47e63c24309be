//! Numerical quadrature.
//!
//! * [`integrate`]: globally adaptive 21-point Gauss-Kronrod on a finite
//!   interval (QAG-style bisection of the worst interval).
//! * [`gauss_legendre`]: fixed Gauss-Legendre nodes by Newton iteration.
//! * [`integrate_r3`]: integrals over R³ whose integrand is singular (or
//!   sharply peaked) at a handful of known points. The integrand is split by
//!   a smooth partition of unity; each piece is integrated in spherical
//!   coordinates about its own center with the log-radial substitution
//!   `r = s·e^u`, adaptive in `u` and a product Gauss grid over directions.
//!   Weights like `|y|^-2` or `|x-y|^-1` become bounded after the `r³` Jacobian.

use std::collections::BinaryHeap;
use std::ops::{Add, Mul};

use crate::vecgeom::Vec3;

// QUADPACK qk21 abscissae and weights.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_656_887_112_631,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
// 10-point Gauss weights, paired with the odd entries of XGK.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Values that can be integrated: scalars, vectors, small matrices.
pub trait QuadValue: Copy + Add<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Vec3 {
    fn zero() -> Self {
        Vec3::ZERO
    }
    fn magnitude(&self) -> f64 {
        self.max_abs()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { abs_tol: 1e-13, rel_tol: 1e-10, max_intervals: 2000 }
    }
}

impl QuadOptions {
    pub fn rel(rel_tol: f64) -> Self {
        QuadOptions { rel_tol, ..Default::default() }
    }

    pub fn tol(abs_tol: f64, rel_tol: f64) -> Self {
        QuadOptions { abs_tol, rel_tol, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub abs_err: f64,
    pub evals: usize,
    pub converged: bool,
}

fn gk21<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[10];
    let mut gauss = T::zero();
    for j in 0..10 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        kron = kron + (f1 + f2) * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + (f1 + f2) * WG[j / 2];
        }
    }
    let kron = kron * h;
    let gauss = gauss * h;
    let err = (kron + gauss * -1.0).magnitude();
    (kron, err)
}

struct Piece<T> {
    a: f64,
    b: f64,
    value: T,
    err: f64,
}

impl<T> PartialEq for Piece<T> {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl<T> Eq for Piece<T> {}
impl<T> PartialOrd for Piece<T> {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl<T> Ord for Piece<T> {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Adaptive Gauss-Kronrod over `[a, b]`, starting from the subintervals cut
/// at `breaks` (points outside `(a, b)` are ignored).
pub fn integrate_with_breaks<T: QuadValue, F: FnMut(f64) -> T>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> QuadResult<T> {
    let mut cuts = vec![a];
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&p| p > lo && p < hi).collect();
    inner.sort_by(f64::total_cmp);
    if a > b {
        inner.reverse();
    }
    cuts.extend(inner);
    cuts.push(b);

    let mut heap = BinaryHeap::new();
    let mut evals = 0;
    for w in cuts.windows(2) {
        let (v, e) = gk21(&mut f, w[0], w[1]);
        evals += 21;
        heap.push(Piece { a: w[0], b: w[1], value: v, err: e });
    }
    loop {
        let (total, err) = heap
            .iter()
            .fold((T::zero(), 0.0), |(s, e), p| (s + p.value, e + p.err));
        let target = opts.abs_tol.max(opts.rel_tol * total.magnitude());
        if err <= target {
            return QuadResult { value: total, abs_err: err, evals, converged: true };
        }
        if heap.len() >= opts.max_intervals {
            return QuadResult { value: total, abs_err: err, evals, converged: false };
        }
        let worst = heap.pop().expect("nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid == worst.a || mid == worst.b {
            // interval exhausted at machine precision
            heap.push(Piece { err: 0.0, ..worst });
            continue;
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid);
        let (v2, e2) = gk21(&mut f, mid, worst.b);
        evals += 42;
        heap.push(Piece { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, err: e2 });
    }
}

pub fn integrate<T: QuadValue, F: FnMut(f64) -> T>(f: F, a: f64, b: f64, opts: QuadOptions) -> QuadResult<T> {
    integrate_with_breaks(f, a, b, &[], opts)
}

/// `∫_a^∞ f(x) dx` via `x = a + w/(1-w)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, opts: QuadOptions) -> QuadResult<f64> {
    integrate(
        |w: f64| {
            if w >= 1.0 {
                return 0.0;
            }
            let d = 1.0 - w;
            let v = f(a + w / d) / (d * d);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        opts,
    )
}

/// Positive-axis integral `∫_0^∞ f(r) dr` by the substitution `r = scale·e^u`
/// on `u ∈ [ln(lo), ln(hi)]` (relative to `scale`). Suits integrands with
/// power-law behaviour at both ends.
pub fn integrate_log_radial<F: FnMut(f64) -> f64>(
    mut f: F,
    scale: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> QuadResult<f64> {
    let ubreaks: Vec<f64> = breaks.iter().filter(|&&b| b > 0.0).map(|b| (b / scale).ln()).collect();
    integrate_with_breaks(
        |u: f64| {
            let r = scale * u.exp();
            let v = f(r) * r;
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        -40.0,
        40.0,
        &ubreaks,
        opts,
    )
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let _ = dp;
        // recompute derivative at the converged node
        let (mut p0, mut p1) = (1.0, z);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let (pn, pm1) = if n == 1 { (z, 1.0) } else { (p1, p0) };
        let d = n as f64 * (z * pn - pm1) / (z * z - 1.0);
        let wi = 2.0 / ((1.0 - z * z) * d * d);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Nodes and weights that integrate over the unit sphere (weights sum to 4π).
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub dirs: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    /// Gauss-Legendre in `cos θ` times the trapezoid rule in azimuth, with
    /// the polar axis along `axis`.
    pub fn product(n_polar: usize, n_azimuth: usize, axis: Vec3) -> Self {
        let (mu, wmu) = gauss_legendre(n_polar);
        let (e1, e2, e3) = frame(axis);
        let mut dirs = Vec::with_capacity(n_polar * n_azimuth);
        let mut weights = Vec::with_capacity(n_polar * n_azimuth);
        let dphi = 2.0 * std::f64::consts::PI / n_azimuth as f64;
        for (m, wm) in mu.iter().zip(&wmu) {
            let st = (1.0 - m * m).max(0.0).sqrt();
            for k in 0..n_azimuth {
                let phi = (k as f64 + 0.5) * dphi;
                dirs.push(e1 * (st * phi.cos()) + e2 * (st * phi.sin()) + e3 * *m);
                weights.push(wm * dphi);
            }
        }
        SphereRule { dirs, weights }
    }
}

/// Orthonormal frame whose third vector is along `axis` (e3 if degenerate).
pub fn frame(axis: Vec3) -> (Vec3, Vec3, Vec3) {
    let n = axis.norm();
    let e3 = if n > 0.0 { axis / n } else { Vec3::E3 };
    let helper = if e3.x1.abs() < 0.9 { Vec3::E1 } else { Vec3::E2 };
    let e1 = helper - e3 * helper.dot(e3);
    let e1 = e1 / e1.norm();
    let e2 = e3.cross(e1);
    (e1, e2, e3)
}

/// A point where the integrand may be singular, with the length scale of the
/// structure around it.
#[derive(Debug, Clone, Copy)]
pub struct Center {
    pub point: Vec3,
    pub scale: f64,
}

impl Center {
    pub fn new(point: Vec3, scale: f64) -> Self {
        Center { point, scale }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct R3Options {
    pub n_polar: usize,
    pub n_azimuth: usize,
    pub radial: QuadOptions,
    /// Radial range `[scale·e^u_min, scale·e^u_max]`.
    pub u_min: f64,
    pub u_max: f64,
}

impl Default for R3Options {
    fn default() -> Self {
        R3Options {
            n_polar: 32,
            n_azimuth: 48,
            radial: QuadOptions { abs_tol: 0.0, rel_tol: 1e-9, max_intervals: 400 },
            u_min: -30.0,
            u_max: 25.0,
        }
    }
}

/// Partition-of-unity weight of center `k` at `y`: `1 / (1 + Σ_j (d_k/d_j)^8)`.
/// Smooth everywhere and vanishing to eighth order at the other centers.
fn partition_weight(y: Vec3, k: usize, centers: &[Center]) -> f64 {
    if centers.len() == 1 {
        return 1.0;
    }
    let dk = (y - centers[k].point).norm_sq();
    let mut s = 1.0;
    for (j, c) in centers.iter().enumerate() {
        if j == k {
            continue;
        }
        let dj = (y - c.point).norm_sq();
        if dj == 0.0 {
            return 0.0;
        }
        let q = dk / dj;
        s += q * q * q * q;
    }
    1.0 / s
}

/// `∫_{R³} f(y) dy` with the singular structure of `f` located at `centers`.
pub fn integrate_r3<F: Fn(Vec3) -> f64>(f: F, centers: &[Center], opts: R3Options) -> QuadResult<f64> {
    assert!(!centers.is_empty(), "integrate_r3 needs at least one center");
    let mut total = 0.0;
    let mut err = 0.0;
    let mut evals = 0;
    let mut converged = true;
    for (k, c) in centers.iter().enumerate() {
        // polar axis toward the nearest other center, so its direction sits on a pole
        let axis = centers
            .iter()
            .enumerate()
            .filter(|(j, o)| *j != k && (o.point - c.point).norm() > 0.0)
            .min_by(|a, b| (a.1.point - c.point).norm().total_cmp(&(b.1.point - c.point).norm()))
            .map(|(_, o)| o.point - c.point)
            .unwrap_or(Vec3::E3);
        let rule = SphereRule::product(opts.n_polar, opts.n_azimuth, axis);
        let res = integrate(
            |u: f64| {
                let r = c.scale * u.exp();
                let r3 = r * r * r;
                let mut acc = 0.0;
                for (d, w) in rule.dirs.iter().zip(&rule.weights) {
                    let y = c.point + *d * r;
                    let pw = partition_weight(y, k, centers);
                    if pw == 0.0 {
                        continue;
                    }
                    let v = f(y);
                    if v != 0.0 {
                        acc += w * pw * v;
                    }
                }
                let v = acc * r3;
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            },
            opts.u_min,
            opts.u_max,
            opts.radial,
        );
        total += res.value;
        err += res.abs_err;
        evals += res.evals * rule.dirs.len();
        converged &= res.converged;
    }
    QuadResult { value: total, abs_err: err, evals, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_table_is_exact_to_degree_31() {
        for deg in 0..=31 {
            let r = gk21(&mut |x: f64| x.powi(deg), 0.0, 1.0);
            let exact = 1.0 / (deg as f64 + 1.0);
            assert!((r.0 - exact).abs() < 1e-14, "degree {deg}: {} vs {exact}", r.0);
        }
        // the embedded Gauss rule is exact to degree 19
        for deg in 0..=19 {
            let (k, e) = gk21(&mut |x: f64| x.powi(deg), -1.0, 1.0);
            let _ = k;
            assert!(e < 1e-14, "degree {deg} gauss mismatch {e}");
        }
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in [1, 2, 5, 16, 33, 64] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for deg in 0..(2 * n) {
                let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((s - exact).abs() < 1e-12, "n={n} deg={deg}: {s}");
            }
        }
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let r = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, QuadOptions::rel(1e-10));
        assert!(r.converged);
        assert!((r.value - 2.0).abs() < 1e-9);
        let r = integrate_with_breaks(|x: f64| (x - 0.3).abs().ln(), 0.0, 1.0, &[0.3], QuadOptions::rel(1e-10));
        let exact = 0.3 * 0.3f64.ln() - 0.3 + 0.7 * 0.7f64.ln() - 0.7;
        assert!((r.value - exact).abs() < 1e-9);
    }

    #[test]
    fn infinite_and_log_radial() {
        let r = integrate_to_infinity(|x| (-x).exp(), 0.0, QuadOptions::rel(1e-11));
        assert!((r.value - 1.0).abs() < 1e-10);
        // ∫_0^∞ dr / (1 + r²) = π/2
        let r = integrate_log_radial(|r| 1.0 / (1.0 + r * r), 1.0, &[], QuadOptions::rel(1e-11));
        assert!((r.value - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn sphere_rule_moments() {
        let rule = SphereRule::product(12, 24, Vec3::new(0.3, 0.4, 0.8));
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        let m2: f64 = rule.dirs.iter().zip(&rule.weights).map(|(d, w)| w * d.x1 * d.x1).sum();
        assert!((m2 - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn r3_gaussian_and_singular() {
        let pi = std::f64::consts::PI;
        // unit Gaussian mass
        let g = |y: Vec3| (2.0 * pi).powf(-1.5) * (-0.5 * y.norm_sq()).exp();
        let r = integrate_r3(g, &[Center::new(Vec3::new(0.5, 0.0, 0.0), 1.0)], R3Options::default());
        assert!((r.value - 1.0).abs() < 1e-9, "{}", r.value);
        // ∫ |y|^-2 |x-y|^-2 dy = π³/|x|
        let x = Vec3::new(0.0, 0.0, 2.0);
        let f = |y: Vec3| 1.0 / (y.norm_sq() * (x - y).norm_sq());
        let r = integrate_r3(f, &[Center::new(Vec3::ZERO, 2.0), Center::new(x, 2.0)], R3Options::default());
        let exact = pi.powi(3) / 2.0;
        assert!((r.value / exact - 1.0).abs() < 1e-5, "{} vs {exact}", r.value);
    }
}
