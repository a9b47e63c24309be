//! Monte Carlo aggregation `u(x,t) = h(x)·E[Ξ(t)]`.
//!
//! Cascade `i` at point `(x,t)` runs on the stream keyed by
//! `(seed, point_key(x,t), i)`. Cascades are grouped in fixed-size chunks whose
//! moment summaries are merged in a fixed binary tree, so results are identical
//! for every worker count and scheduling.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::cascade::{eval_cascade, CascadeOutcome, EvalOptions, ProblemSpec};
use crate::error::{Error, Result};
use crate::kernels::INFINITE;
use crate::rng::{point_key, CascadeKey, RngStream};
use crate::vecgeom::Vec3;

/// Cascades per chunk.
pub const CHUNK: u64 = 256;

/// Streaming componentwise moments.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Moments {
    pub n: u64,
    pub mean: Vec3,
    pub m2: Vec3,
    pub nodes: u64,
    pub truncated: u64,
    pub max_norm: f64,
    pub max_depth: u32,
    pub kappa_counts: [u64; 5],
}

impl Moments {
    pub fn push(&mut self, o: &CascadeOutcome) {
        self.n += 1;
        let d = o.value - self.mean;
        self.mean += d / self.n as f64;
        let d2 = o.value - self.mean;
        self.m2 += d.zip_map(d2, |a, b| a * b);
        self.nodes += o.nodes;
        self.truncated += o.truncated as u64;
        self.max_norm = self.max_norm.max(o.value.norm());
        self.max_depth = self.max_depth.max(o.max_depth);
        for (a, b) in self.kappa_counts.iter_mut().zip(o.kappa_counts) {
            *a += b;
        }
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&self, other: &Moments) -> Moments {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let fa = self.n as f64;
        let fb = other.n as f64;
        let mut kc = self.kappa_counts;
        for (a, b) in kc.iter_mut().zip(other.kappa_counts) {
            *a += b;
        }
        Moments {
            n,
            mean: self.mean + d * (fb / n as f64),
            m2: self.m2 + other.m2 + d.zip_map(d, |a, b| a * b) * (fa * fb / n as f64),
            nodes: self.nodes + other.nodes,
            truncated: self.truncated + other.truncated,
            max_norm: self.max_norm.max(other.max_norm),
            max_depth: self.max_depth.max(other.max_depth),
            kappa_counts: kc,
        }
    }

    pub fn variance(&self) -> Vec3 {
        if self.n < 2 {
            Vec3::ZERO
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> Vec3 {
        (self.variance() / self.n as f64).map(f64::sqrt)
    }
}

fn tree_merge(parts: &[Moments]) -> Moments {
    match parts.len() {
        0 => Moments::default(),
        1 => parts[0],
        n => tree_merge(&parts[..n / 2]).merge(&tree_merge(&parts[n / 2..])),
    }
}

/// Monte Carlo estimate at one space-time point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub x: Vec3,
    pub t: f64,
    /// `h(x)·mean(Ξ)`
    pub u: Vec3,
    /// `h(x)·stderr(Ξ)`, componentwise
    pub stderr: Vec3,
    pub n: u64,
    pub truncated_fraction: f64,
    pub nodes_mean: f64,
    pub max_depth: u32,
    /// `h(x)`
    pub h: f64,
    /// `mean(Ξ)`
    pub xi_mean: Vec3,
    /// `max |Ξ|` over the sample
    pub xi_max_norm: f64,
    pub kappa_counts: [u64; 5],
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub n: u64,
    pub seed: u64,
    pub workers: usize,
    pub eval: EvalOptions,
}

impl RunOptions {
    pub fn new(n: u64, seed: u64, workers: usize) -> Self {
        RunOptions { n, seed, workers, eval: EvalOptions::default() }
    }
}

/// Key of cascade `index` at `(x, t)` under `seed`.
pub fn cascade_key(seed: u64, x: Vec3, t: f64, index: u64) -> CascadeKey {
    CascadeKey::new(seed, point_key(x, t), index)
}

fn run_chunk(x: Vec3, t: f64, spec: &ProblemSpec, opts: &RunOptions, chunk: u64) -> Result<Moments> {
    let mut m = Moments::default();
    let lo = chunk * CHUNK;
    let hi = (lo + CHUNK).min(opts.n);
    for i in lo..hi {
        let rng = RngStream::root(cascade_key(opts.seed, x, t, i));
        let o = eval_cascade(x, t, spec, rng, opts.eval).map_err(|e| match e {
            Error::Data { path, draw, msg } => Error::Data { path: format!("cascade {i}, {path}"), draw, msg },
            e => e,
        })?;
        m.push(&o);
    }
    Ok(m)
}

fn check_point(x: Vec3, t: f64, spec: &ProblemSpec) -> Result<()> {
    let h = spec.pair.h.eval(x);
    if !(h > 0.0 && h < INFINITE) {
        return Err(Error::domain(format!("u = h·E[Ξ] needs 0 < h(x) < ∞; h({x:?}) = {h}")));
    }
    if !(t > 0.0) {
        return Err(Error::domain(format!("estimation needs t > 0, got {t}")));
    }
    Ok(())
}

fn estimate_in_pool(x: Vec3, t: f64, spec: &ProblemSpec, opts: &RunOptions) -> Result<EstimateReport> {
    check_point(x, t, spec)?;
    let start = Instant::now();
    let chunks = opts.n.div_ceil(CHUNK);
    let parts: Vec<Result<Moments>> = (0..chunks).into_par_iter().map(|c| run_chunk(x, t, spec, opts, c)).collect();
    let parts: Vec<Moments> = parts.into_iter().collect::<Result<_>>()?;
    let m = tree_merge(&parts);
    let h = spec.pair.h.eval(x);
    let (u, se) = if m.mean == Vec3::ZERO && m.m2 == Vec3::ZERO {
        (Vec3::ZERO, Vec3::ZERO)
    } else {
        (m.mean * h, m.stderr() * h)
    };
    Ok(EstimateReport {
        x,
        t,
        u,
        stderr: se,
        n: m.n,
        truncated_fraction: m.truncated as f64 / m.n as f64,
        nodes_mean: m.nodes as f64 / m.n as f64,
        max_depth: m.max_depth,
        h,
        xi_mean: m.mean,
        xi_max_norm: m.max_norm,
        kappa_counts: m.kappa_counts,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::config("workers must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start {workers} workers: {e}")))
}

/// Average `n` independent cascades at `(x, t)`.
pub fn mc_estimate(x: Vec3, t: f64, spec: &ProblemSpec, opts: RunOptions) -> Result<EstimateReport> {
    if opts.n < 2 {
        return Err(Error::config(format!("n must be at least 2, got {}", opts.n)));
    }
    pool(opts.workers)?.install(|| estimate_in_pool(x, t, spec, &opts))
}

/// Per-point cascade moments without the report wrapper (for custom aggregation).
pub fn mc_moments(x: Vec3, t: f64, spec: &ProblemSpec, opts: RunOptions) -> Result<Moments> {
    check_point(x, t, spec)?;
    pool(opts.workers)?.install(|| {
        let chunks = opts.n.div_ceil(CHUNK);
        let parts: Vec<Result<Moments>> = (0..chunks).into_par_iter().map(|c| run_chunk(x, t, spec, &opts, c)).collect();
        Ok(tree_merge(&parts.into_iter().collect::<Result<Vec<_>>>()?))
    })
}

/// One report per grid point; point streams depend only on the point's coordinates.
pub fn grid_evaluate(points: &[(Vec3, f64)], spec: &ProblemSpec, opts: RunOptions) -> Result<Vec<EstimateReport>> {
    if points.is_empty() {
        return Err(Error::config("grid must contain at least one point"));
    }
    if opts.n < 2 {
        return Err(Error::config(format!("n must be at least 2, got {}", opts.n)));
    }
    pool(opts.workers)?.install(|| {
        let out: Vec<Result<EstimateReport>> =
            points.par_iter().map(|&(x, t)| estimate_in_pool(x, t, spec, &opts)).collect();
        out.into_iter().collect()
    })
}

pub const CSV_HEADER: &str = "x1,x2,x3,t,u1,u2,u3,se1,se2,se3,n,trunc_frac";

/// Write reports in the field CSV schema, preceded by `# <provenance>` lines.
pub fn write_csv<W: Write>(w: &mut W, provenance: &[String], reports: &[EstimateReport]) -> std::io::Result<()> {
    for p in provenance {
        writeln!(w, "# {p}")?;
    }
    writeln!(w, "{CSV_HEADER}")?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
            r.x.x1, r.x.x2, r.x.x3, r.t, r.u.x1, r.u.x2, r.u.x3, r.stderr.x1, r.stderr.x2, r.stderr.x3, r.n, r.truncated_fraction
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_matches_sequential() {
        let mut rng = RngStream::from_seed(4);
        let outs: Vec<CascadeOutcome> = (0..1000)
            .map(|_| CascadeOutcome {
                value: rng.normal3() * 3.0 + Vec3::E1,
                nodes: 1,
                max_depth: 0,
                truncated: false,
                kappa_counts: [0; 5],
            })
            .collect();
        let mut seq = Moments::default();
        outs.iter().for_each(|o| seq.push(o));
        let parts: Vec<Moments> = outs
            .chunks(37)
            .map(|c| {
                let mut m = Moments::default();
                c.iter().for_each(|o| m.push(o));
                m
            })
            .collect();
        let tm = tree_merge(&parts);
        assert_eq!(tm.n, seq.n);
        assert!((tm.mean - seq.mean).max_abs() < 1e-12);
        assert!((tm.m2 - seq.m2).max_abs() < 1e-8 * seq.m2.max_abs());
    }

    #[test]
    fn csv_layout() {
        let r = EstimateReport {
            x: Vec3::E1,
            t: 0.5,
            u: Vec3::ZERO,
            stderr: Vec3::ZERO,
            n: 10,
            truncated_fraction: 0.0,
            nodes_mean: 1.0,
            max_depth: 0,
            h: 1.0,
            xi_mean: Vec3::ZERO,
            xi_max_norm: 0.0,
            kappa_counts: [0; 5],
            wall_time: 0.0,
        };
        let mut buf = Vec::new();
        write_csv(&mut buf, &["seed=1".into()], &[r]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# seed=1");
        assert_eq!(lines[1], CSV_HEADER);
        assert_eq!(lines[2].split(',').count(), 12);
    }
}
