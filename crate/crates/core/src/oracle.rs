//! Deterministic comparator: Picard iteration of the integral equation
//!
//! `u(x,t) = (u₀∗K(2νt))(x) + ∫₀ᵗ∫ { w₁ b₁(z; u, u) + w₂ b₂(z; u, u) + Γ(z,s) g } (x−z, t−s) dz ds`
//!
//! for axisymmetric data, with `w₁ = |z|K(z,2νs)/(4νs)` and
//! `w₂ = K(z,2νs)/|z| − 3·ball(|z|,νs)/(4π|z|⁴)`.
//!
//! The field is stored on the meridional half-plane at nodes `(r, ϑ)` (log-spaced
//! radius, uniform polar angle) and time levels `t₀ = 0 < t₁ < …`; off-node
//! values come from tensor cubic interpolation and the rotation about the
//! `x₃` axis. Between time levels the field is linear in time, and the kernel
//! time integrals `∫ w(s) λ(s)^m ds` over each interval are computed once per
//! radial quadrature node, which makes the rule exact in `s` for the
//! interpolant (including the `s → 0` singularity). The `z` integral uses a
//! log-radial Gauss rule centered at `z = 0` times a product sphere rule.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::cascade::ProblemSpec;
use crate::data::InitialField;
use crate::error::{Error, Result};
use crate::estimator::{mc_estimate, EstimateReport, RunOptions, CSV_HEADER};
use crate::heat::{ball_mass_scaled, bilinear_w2, heat_kernel_r2, Mat3};
use crate::kernels::ratio;
use crate::quad::{gauss_legendre, integrate_with_breaks, QuadOptions, SphereRule};
use crate::vecgeom::Vec3;

/// Axisymmetric space-time field on a meridional `(r, ϑ)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub radii: Vec<f64>,
    pub polar: Vec<f64>,
    pub times: Vec<f64>,
    /// `values[(k·n_r + i)·n_ϑ + j]`: the field at `(r_i sin ϑ_j, 0, r_i cos ϑ_j)` and time `t_k`.
    pub values: Vec<Vec3>,
    log_r0: f64,
    dlog: f64,
    dtheta: f64,
}

impl FieldGrid {
    /// `n_r` log-spaced radii in `[r_min, r_max]`, `n_polar` angles in `[0, π]`.
    /// `times` must be increasing and positive; `t = 0` is prepended.
    pub fn new(r_min: f64, r_max: f64, n_r: usize, n_polar: usize, times: &[f64]) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min && n_r >= 4 && n_polar >= 4) {
            return Err(Error::config(format!(
                "field grid needs 0 < r_min < r_max, n_r ≥ 4, n_ϑ ≥ 4; got r ∈ [{r_min}, {r_max}], {n_r} × {n_polar}"
            )));
        }
        if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) || !(times[0] > 0.0) {
            return Err(Error::config("field grid times must be positive and strictly increasing"));
        }
        let dlog = (r_max / r_min).ln() / (n_r - 1) as f64;
        let radii = (0..n_r).map(|i| r_min * (dlog * i as f64).exp()).collect();
        let dtheta = PI / (n_polar - 1) as f64;
        let polar = (0..n_polar).map(|j| dtheta * j as f64).collect();
        let mut t = vec![0.0];
        t.extend_from_slice(times);
        let values = vec![Vec3::ZERO; t.len() * n_r * n_polar];
        Ok(FieldGrid { radii, polar, times: t, values, log_r0: r_min.ln(), dlog, dtheta })
    }

    /// Same range with half the spacing in `log r`, `ϑ` and time (every old node is kept).
    pub fn refined(&self) -> Result<FieldGrid> {
        let mut times = Vec::new();
        for w in self.times.windows(2) {
            times.push(0.5 * (w[0] + w[1]));
            times.push(w[1]);
        }
        FieldGrid::new(self.r_min(), self.r_max(), 2 * self.n_r() - 1, 2 * self.n_polar() - 1, &times)
    }

    pub fn n_r(&self) -> usize {
        self.radii.len()
    }
    pub fn n_polar(&self) -> usize {
        self.polar.len()
    }
    pub fn r_min(&self) -> f64 {
        self.radii[0]
    }
    pub fn r_max(&self) -> f64 {
        self.radii[self.n_r() - 1]
    }

    fn idx(&self, k: usize, i: usize, j: usize) -> usize {
        (k * self.n_r() + i) * self.n_polar() + j
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> Vec3 {
        self.values[self.idx(k, i, j)]
    }

    /// Cartesian location of node `(i, j)`.
    pub fn node(&self, i: usize, j: usize) -> Vec3 {
        let (r, th) = (self.radii[i], self.polar[j]);
        Vec3::new(r * th.sin(), 0.0, r * th.cos())
    }

    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
    }

    /// Index of the node closest to `x` in the meridional half-plane, if `x` is a node up to rotation.
    pub fn node_index(&self, x: Vec3) -> Option<(usize, usize)> {
        let r = x.norm();
        let fi = ((r.ln() - self.log_r0) / self.dlog).round();
        let th = x.x1.hypot(x.x2).atan2(x.x3);
        let fj = (th / self.dtheta).round();
        if fi < 0.0 || fi as usize >= self.n_r() || fj < 0.0 || fj as usize >= self.n_polar() {
            return None;
        }
        let (i, j) = (fi as usize, fj as usize);
        let y = self.node(i, j);
        ((y.norm() - r).abs() <= 1e-9 * r && (self.polar[j] - th).abs() <= 1e-9).then_some((i, j))
    }

    /// Cell volumes `(2π/3)(r_b³ − r_a³)(cos ϑ_a − cos ϑ_b)` of the dual cells; their sum is
    /// the volume of the shell between the outer cell faces.
    pub fn volume_weights(&self) -> Vec<f64> {
        let nr = self.n_r();
        let np = self.n_polar();
        let rf: Vec<f64> = (0..=nr)
            .map(|i| (self.log_r0 + self.dlog * (i as f64 - 0.5)).exp())
            .collect();
        let tf: Vec<f64> = (0..=np).map(|j| (self.dtheta * (j as f64 - 0.5)).clamp(0.0, PI)).collect();
        let mut w = Vec::with_capacity(nr * np);
        for i in 0..nr {
            for j in 0..np {
                w.push(2.0 * PI / 3.0 * (rf[i + 1].powi(3) - rf[i].powi(3)) * (tf[j].cos() - tf[j + 1].cos()));
            }
        }
        w
    }

    /// Volume represented by [`FieldGrid::volume_weights`].
    pub fn represented_volume(&self) -> f64 {
        let a = (self.log_r0 - 0.5 * self.dlog).exp();
        let b = (self.log_r0 + self.dlog * (self.n_r() as f64 - 0.5)).exp();
        4.0 * PI / 3.0 * (b.powi(3) - a.powi(3))
    }

    /// Interpolated field at `x` for every time level `k ≥ 1`; zero beyond `r_max`.
    fn eval_levels(&self, x: Vec3, out: &mut [Vec3]) {
        let r = x.norm();
        if r > self.r_max() {
            out.iter_mut().for_each(|o| *o = Vec3::ZERO);
            return;
        }
        let rc = x.x1.hypot(x.x2);
        let (cphi, sphi) = if rc > 0.0 { (x.x1 / rc, x.x2 / rc) } else { (1.0, 0.0) };
        let th = rc.atan2(x.x3);
        let fi = ((r.max(self.r_min()).ln() - self.log_r0) / self.dlog).clamp(0.0, (self.n_r() - 1) as f64);
        let fj = th / self.dtheta;
        let (ri, rw) = stencil(fi);
        let (tj, tw) = stencil(fj);
        let nr = self.n_r() as isize;
        let np = self.n_polar() as isize;
        for (k, o) in out.iter_mut().enumerate() {
            let k = k + 1;
            let mut acc = Vec3::ZERO;
            for (a, wa) in ri.iter().zip(&rw) {
                let i = (*a).clamp(0, nr - 1) as usize;
                let mut row = Vec3::ZERO;
                for (b, wb) in tj.iter().zip(&tw) {
                    // angles beyond the axis are the mirror node at azimuth π
                    let (j, flip) = if *b < 0 {
                        (-*b, true)
                    } else if *b >= np {
                        (2 * (np - 1) - *b, true)
                    } else {
                        (*b, false)
                    };
                    let v = self.values[self.idx(k, i, j as usize)];
                    let v = if flip { Vec3::new(-v.x1, -v.x2, v.x3) } else { v };
                    row += v * *wb;
                }
                acc += row * *wa;
            }
            *o = Vec3::new(acc.x1 * cphi - acc.x2 * sphi, acc.x1 * sphi + acc.x2 * cphi, acc.x3);
        }
    }

    /// Interpolated field at `(x, t_k)`.
    pub fn eval(&self, x: Vec3, k: usize) -> Vec3 {
        if k == 0 {
            return Vec3::ZERO;
        }
        let mut out = vec![Vec3::ZERO; self.times.len() - 1];
        self.eval_levels(x, &mut out);
        out[k - 1]
    }

    /// Rows in the estimator CSV schema (standard errors zero, `n = 0`).
    pub fn write_csv<W: Write>(&self, w: &mut W, provenance: &[String]) -> std::io::Result<()> {
        for p in provenance {
            writeln!(w, "# {p}")?;
        }
        writeln!(w, "{CSV_HEADER}")?;
        for k in 1..self.times.len() {
            for i in 0..self.n_r() {
                for j in 0..self.n_polar() {
                    let x = self.node(i, j);
                    let u = self.get(k, i, j);
                    writeln!(w, "{},{},{},{},{:e},{:e},{:e},0,0,0,0,0", x.x1, x.x2, x.x3, self.times[k], u.x1, u.x2, u.x3)?;
                }
            }
        }
        Ok(())
    }
}

// four-point Lagrange stencil around fractional index f
fn stencil(f: f64) -> ([isize; 4], [f64; 4]) {
    let i0 = f.floor();
    let t = f - i0;
    let i0 = i0 as isize;
    let w = [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ];
    ([i0 - 1, i0, i0 + 1, i0 + 2], w)
}

/// Resolution of the Duhamel quadrature.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PicardOptions {
    pub sweeps: usize,
    /// Radial range of the `z` rule.
    pub rho_min: f64,
    pub rho_max: f64,
    /// Width of one Gauss panel in `ln |z|`.
    pub panel: f64,
    pub nodes_per_panel: usize,
    pub n_polar: usize,
    pub n_azimuth: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions { sweeps: 5, rho_min: 1e-4, rho_max: 60.0, panel: 0.75, nodes_per_panel: 6, n_polar: 12, n_azimuth: 16 }
    }
}

impl PicardOptions {
    /// Twice the resolution in every quadrature direction.
    pub fn refined(&self) -> Self {
        PicardOptions {
            panel: self.panel / 2.0,
            n_polar: 2 * self.n_polar,
            n_azimuth: 2 * self.n_azimuth,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PicardReport {
    /// `max |u⁽ⁿ⁾ − u⁽ⁿ⁻¹⁾| / h` after each sweep.
    pub diffs: Vec<f64>,
    /// Successive ratios of `diffs`.
    pub ratios: Vec<f64>,
    /// `max |u|/h` over the grid after each sweep.
    pub sup_ratio: Vec<f64>,
    /// Geometric-tail bound on the remaining iteration error in `|u|/h` units.
    pub iteration_error: f64,
    pub wall_time: f64,
}

struct RadialWeights {
    rho: Vec<f64>,
    // [node][k][j] moments of w₁, w₂, K, −ball/(4πρ³), times the radial weight
    w1: Vec<Vec3>,
    w2: Vec<Vec3>,
    ga: Vec<Vec3>,
    gb: Vec<Vec3>,
    levels: usize,
}

impl RadialWeights {
    fn at(&self, node: usize, k: usize, j: usize) -> usize {
        (node * self.levels + k) * self.levels + j
    }
}

// radial nodes and weights of the z rule, including the measure ρ² dρ
fn radial_nodes(opts: &PicardOptions) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(opts.nodes_per_panel);
    let (u0, u1) = (opts.rho_min.ln(), opts.rho_max.ln());
    let panels = ((u1 - u0) / opts.panel).ceil() as usize;
    let h = (u1 - u0) / panels as f64;
    let mut rho = Vec::new();
    let mut rw = Vec::new();
    for p in 0..panels {
        let c = u0 + h * (p as f64 + 0.5);
        for (x, w) in gx.iter().zip(&gw) {
            let r = (c + 0.5 * h * x).exp();
            rho.push(r);
            rw.push(0.5 * h * w * r * r * r);
        }
    }
    (rho, rw)
}

/// `(u₀ ∗ K(·, var))(x)` by the comparator's own `z` rule.
pub fn heat_term_quadrature(u0: &InitialField, x: Vec3, var: f64, opts: &PicardOptions) -> Vec3 {
    let (rho, rw) = radial_nodes(opts);
    let axis = if x.norm() > 0.0 { x } else { Vec3::E3 };
    let rule = SphereRule::product(opts.n_polar, opts.n_azimuth, axis);
    let mut acc = Vec3::ZERO;
    for (r, w) in rho.iter().zip(&rw) {
        let k = heat_kernel_r2(r * r, var) * w;
        if k == 0.0 {
            continue;
        }
        for (e, we) in rule.dirs.iter().zip(&rule.weights) {
            acc += u0.eval(x - *e * *r) * (k * we);
        }
    }
    acc
}

fn radial_weights(times: &[f64], nu: f64, opts: &PicardOptions) -> Result<RadialWeights> {
    let (rho, rw) = radial_nodes(opts);
    let levels = times.len();
    let n = rho.len() * levels * levels;
    let mut out = RadialWeights { rho: rho.clone(), w1: vec![Vec3::ZERO; n], w2: vec![Vec3::ZERO; n], ga: vec![Vec3::ZERO; n], gb: vec![Vec3::ZERO; n], levels };
    let q = QuadOptions { abs_tol: 1e-300, rel_tol: 1e-10, max_intervals: 500 };
    let rows: Vec<Result<Vec<(usize, [Vec3; 4])>>> = rho
        .par_iter()
        .enumerate()
        .map(|(a, &r)| {
            let mut row = Vec::new();
            for k in 1..levels {
                for j in 0..k {
                    let (tj, tj1, tk) = (times[j], times[j + 1], times[k]);
                    let (sa, sb) = (tk - tj1, tk - tj);
                    let dt = tj1 - tj;
                    let peaks: Vec<f64> =
                        [r * r / (10.0 * nu), r * r / (6.0 * nu), r * r / (2.0 * nu)].into_iter().filter(|&s| s > sa && s < sb).collect();
                    let mut vals = [Vec3::ZERO; 4];
                    for (which, v) in vals.iter_mut().enumerate() {
                        let res = integrate_with_breaks(
                            |s: f64| {
                                if s <= 0.0 {
                                    return Vec3::ZERO;
                                }
                                let lam = (tk - s - tj) / dt;
                                let kk = heat_kernel_r2(r * r, 2.0 * nu * s);
                                let w = match which {
                                    0 => r * kk / (4.0 * nu * s),
                                    1 => bilinear_w2(r, s, nu),
                                    2 => kk,
                                    _ => -ball_mass_scaled(r / (2.0 * (nu * s).sqrt())) / (4.0 * PI * r.powi(3)),
                                };
                                Vec3::new(w, w * lam, w * lam * lam)
                            },
                            sa,
                            sb,
                            &peaks,
                            q,
                        );
                        if !res.converged {
                            return Err(Error::numeric(format!(
                                "time weight at |z| = {r}, interval [{sa}, {sb}] did not converge"
                            )));
                        }
                        *v = res.value * rw[a];
                    }
                    row.push((k * levels + j, vals));
                }
            }
            Ok(row)
        })
        .collect();
    for (a, row) in rows.into_iter().enumerate() {
        for (kj, vals) in row? {
            let i = a * levels * levels + kj;
            out.w1[i] = vals[0];
            out.w2[i] = vals[1];
            out.ga[i] = vals[2];
            out.gb[i] = vals[3];
        }
    }
    Ok(out)
}

fn reflect_e(e: Vec3, v: Vec3) -> Vec3 {
    v - e * (3.0 * v.dot(e))
}

fn perp_e(e: Vec3, v: Vec3) -> Vec3 {
    v - e * v.dot(e)
}

/// `b₁(e; a, b)` for a unit vector `e`.
fn b1e(e: Vec3, a: Vec3, b: Vec3) -> Vec3 {
    perp_e(e, b) * a.dot(e) + perp_e(e, a) * b.dot(e)
}

struct Sweep<'a> {
    spec: &'a ProblemSpec,
    weights: &'a RadialWeights,
    opts: &'a PicardOptions,
    rule_cache: Vec<SphereRule>,
}

impl Sweep<'_> {
    // Duhamel integrals at node x for all levels k ≥ 1, from the previous iterate.
    fn duhamel(&self, x: Vec3, j_polar: usize, prev: &FieldGrid, g_levels: bool) -> Vec<Vec3> {
        let levels = prev.times.len();
        let m = levels - 1;
        let mut acc = vec![Vec3::ZERO; levels];
        let mut ul = vec![Vec3::ZERO; levels];
        let mut gl = vec![Vec3::ZERO; levels];
        let mut tmp = vec![Vec3::ZERO; m];
        let rule = &self.rule_cache[j_polar];
        let g = &self.spec.data.g;
        let u0 = &self.spec.data.u0;
        let g_support = g.support_radius();
        let r_far = prev.r_max();
        for (a, &rho) in self.weights.rho.iter().enumerate() {
            for (e, wd) in rule.dirs.iter().zip(&rule.weights) {
                let y = x - *e * rho;
                let ry = y.norm();
                let has_u = ry <= r_far;
                let has_g = g_levels && g_support.is_none_or(|s| ry < s);
                if !has_u && !has_g {
                    continue;
                }
                if has_u {
                    ul[0] = u0.eval(y);
                    prev.eval_levels(y, &mut tmp);
                    ul[1..].copy_from_slice(&tmp);
                }
                if has_g {
                    for (k, gk) in gl.iter_mut().enumerate() {
                        *gk = g.eval(y, prev.times[k]);
                    }
                }
                for j in 0..m {
                    let (mut b, mut qv, mut pg, mut rg) = ([Vec3::ZERO; 3], [0.0; 3], [Vec3::ZERO; 2], [Vec3::ZERO; 2]);
                    if has_u {
                        let ua = ul[j];
                        let d = ul[j + 1] - ua;
                        b = [b1e(*e, ua, ua), b1e(*e, ua, d) * 2.0, b1e(*e, d, d)];
                        qv = [ua.dot(reflect_e(*e, ua)), 2.0 * ua.dot(reflect_e(*e, d)), d.dot(reflect_e(*e, d))];
                    }
                    if has_g {
                        let dg = gl[j + 1] - gl[j];
                        pg = [perp_e(*e, gl[j]), perp_e(*e, dg)];
                        rg = [reflect_e(*e, gl[j]), reflect_e(*e, dg)];
                    }
                    for (k, ak) in acc.iter_mut().enumerate().skip(j + 1) {
                        let i = self.weights.at(a, k, j);
                        let (w1, w2, ga, gb) = (self.weights.w1[i], self.weights.w2[i], self.weights.ga[i], self.weights.gb[i]);
                        let mut v = Vec3::ZERO;
                        if has_u {
                            let ww = [w1.x1 + w2.x1, w1.x2 + w2.x2, w1.x3 + w2.x3];
                            let w2m = [w2.x1, w2.x2, w2.x3];
                            for t in 0..3 {
                                v += b[t] * ww[t] + *e * (w2m[t] * qv[t]);
                            }
                        }
                        if has_g {
                            v += pg[0] * ga.x1 + pg[1] * ga.x2 + rg[0] * gb.x1 + rg[1] * gb.x2;
                        }
                        *ak += v * *wd;
                    }
                }
            }
        }
        acc
    }
}

/// Run up to `opts.sweeps` Jacobi sweeps from the heat-semigroup iterate.
/// Requires axisymmetric data; the first iterate is `u₀∗K`.
pub fn picard_solve(spec: &ProblemSpec, grid: &FieldGrid, opts: &PicardOptions) -> Result<(FieldGrid, PicardReport)> {
    if !(spec.data.u0.is_axisymmetric() && spec.data.g.is_axisymmetric()) {
        return Err(Error::config("the Picard comparator supports axisymmetric data only"));
    }
    if opts.sweeps == 0 {
        return Err(Error::config("Picard iteration needs at least one sweep"));
    }
    let start = std::time::Instant::now();
    let nu = spec.nu;
    let mut cur = grid.clone();
    let levels = cur.times.len();
    let (nr, np) = (cur.n_r(), cur.n_polar());
    let nodes: Vec<(usize, usize)> = (0..nr).flat_map(|i| (0..np).map(move |j| (i, j))).collect();
    let heat: Vec<Vec<Vec3>> = nodes
        .par_iter()
        .map(|&(i, j)| {
            let x = cur.node(i, j);
            (0..levels).map(|k| spec.data.u0.heat_convolution(x, 2.0 * nu * cur.times[k])).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let hvals: Vec<f64> = nodes.iter().map(|&(i, j)| spec.pair.h.eval(cur.node(i, j))).collect();
    for (n, &(i, j)) in nodes.iter().enumerate() {
        for k in 1..levels {
            let id = cur.idx(k, i, j);
            cur.values[id] = heat[n][k];
        }
    }
    let weights = radial_weights(&cur.times, nu, opts)?;
    let rule_cache: Vec<SphereRule> = (0..np)
        .map(|j| {
            let th = cur.polar[j];
            SphereRule::product(opts.n_polar, opts.n_azimuth, Vec3::new(th.sin(), 0.0, th.cos()))
        })
        .collect();
    let sweep = Sweep { spec, weights: &weights, opts, rule_cache };
    let _ = sweep.opts;
    let g_on = !spec.data.g.is_zero();
    let mut rep = PicardReport { diffs: vec![], ratios: vec![], sup_ratio: vec![], iteration_error: 0.0, wall_time: 0.0 };
    let mut growing = 0;
    for _ in 0..opts.sweeps {
        let prev = cur.clone();
        let new: Vec<Vec<Vec3>> = nodes
            .par_iter()
            .map(|&(i, j)| {
                let x = prev.node(i, j);
                sweep.duhamel(x, j, &prev, g_on)
            })
            .collect();
        let mut diff: f64 = 0.0;
        let mut sup: f64 = 0.0;
        for (n, &(i, j)) in nodes.iter().enumerate() {
            for k in 1..levels {
                let id = cur.idx(k, i, j);
                let v = heat[n][k] + new[n][k];
                diff = diff.max(ratio((v - prev.values[id]).norm(), hvals[n]));
                sup = sup.max(ratio(v.norm(), hvals[n]));
                cur.values[id] = v;
            }
        }
        if !diff.is_finite() {
            return Err(Error::Contraction("non-finite Picard iterate".into()));
        }
        if let Some(&last) = rep.diffs.last() {
            let r = if last > 0.0 { diff / last } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
            rep.ratios.push(r);
            growing = if r > 1.0 { growing + 1 } else { 0 };
            if growing >= 3 {
                return Err(Error::Contraction(format!(
                    "successive-iterate ratio above 1 for 3 consecutive sweeps: {:?}",
                    rep.ratios
                )));
            }
        }
        rep.diffs.push(diff);
        rep.sup_ratio.push(sup);
        if diff == 0.0 {
            break;
        }
    }
    let last = *rep.diffs.last().expect("one sweep");
    rep.iteration_error = match rep.ratios.last() {
        Some(&r) if r < 1.0 => last * r / (1.0 - r),
        _ => last,
    };
    rep.wall_time = start.elapsed().as_secs_f64();
    Ok((cur, rep))
}

/// Oracle value at a node `(x, t)` of the grid.
pub fn oracle_at(grid: &FieldGrid, x: Vec3, t: f64) -> Result<Vec3> {
    let k = grid.time_index(t).ok_or_else(|| Error::domain(format!("t = {t} is not a time level of the grid")))?;
    if k == 0 {
        return Err(Error::domain("the oracle stores t > 0 only"));
    }
    let (i, j) = grid.node_index(x).ok_or_else(|| Error::domain(format!("{x:?} is not a grid node")))?;
    let v = grid.get(k, i, j);
    // rotate from the meridional half-plane to the azimuth of x
    let rc = x.x1.hypot(x.x2);
    let (c, s) = if rc > 0.0 { (x.x1 / rc, x.x2 / rc) } else { (1.0, 0.0) };
    Ok(Vec3::new(v.x1 * c - v.x2 * s, v.x1 * s + v.x2 * c, v.x3))
}

/// Comparison at one probe.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeComparison {
    pub x: Vec3,
    pub t: f64,
    pub u_mc: Vec3,
    pub stderr: Vec3,
    pub u_oracle: Vec3,
    /// Oracle tolerance per component: coarse-vs-fine difference plus iteration tail.
    pub oracle_tol: Vec3,
    pub diff: Vec3,
    pub budget: Vec3,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub probes: Vec<ProbeComparison>,
    pub coarse: PicardReport,
    pub fine: PicardReport,
    pub pass: bool,
}

/// Solve on `grid` and on its refinement, estimate the oracle error from the
/// difference, and compare both against Monte Carlo at `points` (grid nodes).
pub fn compare_mc_oracle(
    points: &[(Vec3, f64)],
    spec: &ProblemSpec,
    run: RunOptions,
    grid: &FieldGrid,
    opts: &PicardOptions,
) -> Result<ComparisonReport> {
    let (coarse, crep) = picard_solve(spec, grid, opts)?;
    let (fine, frep) = picard_solve(spec, &grid.refined()?, &opts.refined())?;
    let mut probes = Vec::new();
    for &(x, t) in points {
        let mc: EstimateReport = mc_estimate(x, t, spec, run)?;
        let uc = oracle_at(&coarse, x, t)?;
        let uf = oracle_at(&fine, x, t)?;
        let h = spec.pair.h.eval(x);
        let iter_tol = (crep.iteration_error + frep.iteration_error) * h;
        let tol = (uc - uf).map(f64::abs) + Vec3::new(iter_tol, iter_tol, iter_tol);
        let diff = (mc.u - uf).map(f64::abs);
        let budget = mc.stderr * 3.0 + tol;
        let pass = (0..3).all(|i| diff[i] <= budget[i]);
        probes.push(ProbeComparison { x, t, u_mc: mc.u, stderr: mc.stderr, u_oracle: uf, oracle_tol: tol, diff, budget, pass });
    }
    let pass = probes.iter().all(|p| p.pass);
    Ok(ComparisonReport { probes, coarse: crep, fine: frep, pass })
}

/// `Γ(x,s)` as the inverse Fourier transform of `(2π)^{-3/2} e^{−ν|ξ|²s} P_ξ`, by direct quadrature.
pub fn gamma_fourier(x: Vec3, s: f64, nu: f64) -> Mat3 {
    let sd = (nu * s).sqrt();
    let kmax = 9.0 / sd;
    let (gx, gw) = gauss_legendre(48);
    let panels = 4;
    let rule = SphereRule::product(96, 8, if x.norm() > 0.0 { x } else { Vec3::E3 });
    let mut out = Mat3::ZERO;
    for p in 0..panels {
        let (a, b) = (kmax * p as f64 / panels as f64, kmax * (p + 1) as f64 / panels as f64);
        for (xi, wi) in gx.iter().zip(&gw) {
            let k = 0.5 * (a + b) + 0.5 * (b - a) * xi;
            let wk = 0.5 * (b - a) * wi * k * k * (-nu * s * k * k).exp();
            for (e, we) in rule.dirs.iter().zip(&rule.weights) {
                let c = (k * x.dot(*e)).cos();
                let m = Mat3::IDENTITY - Mat3::outer(*e, *e);
                out = out + m * (wk * we * c);
            }
        }
    }
    out * (2.0 * PI).powi(-3)
}
