//! Acceptance criteria, one line per criterion.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::process::ExitCode;
use std::sync::Arc;

use nscascade::cascade::{eval_cascade, EvalOptions, Mode, ProblemSpec};
use nscascade::config::reference_config;
use nscascade::estimator::{cascade_key, grid_evaluate, mc_estimate, write_csv, RunOptions};
use nscascade::heat::{erf, gamma_kernel, heat_kernel};
use nscascade::kernels::{check_admissibility, make_h0_pair, DataCondition, Kernel};
use nscascade::oracle::{compare_mc_oracle, FieldGrid, PicardOptions};
use nscascade::rng::RngStream;
use nscascade::samplers::Branch;
use nscascade::verify::*;
use nscascade::{Result, Vec3};

struct Line {
    id: u32,
    pass: bool,
    text: String,
}

fn line(id: u32, pass: bool, text: impl Into<String>) -> Line {
    Line { id, pass, text: text.into() }
}

fn c1() -> Result<Line> {
    let (v, worst) = bilinear_bound_sweep(1_000_000, 11)?;
    Ok(line(1, v == 0, format!("bilinear bounds over 10⁶ triples: {v} violations, max normalized ratio {worst:.15}")))
}

fn c2() -> Result<Line> {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, f, want, label) in [
        ("h₀", Arc::new(|r: f64| 1.0 / r) as Arc<dyn Fn(f64) -> f64 + Send + Sync>, PI.powi(3), "π³"),
        ("H", Arc::new(|r: f64| 1.0 / (1.0 + r * r)), PI * PI, "π²"),
    ] {
        let q = gamma_quadrature(f, 20)?;
        let dev = q.iter().map(|v| (v / want - 1.0).abs()).fold(0.0, f64::max);
        ok &= dev <= 0.005;
        parts.push(format!("{name}: max deviation from {label} {dev:.2e}"));
    }
    Ok(line(2, ok, format!("γ quadrature at 20 probes (≤ 0.5%): {}", parts.join("; "))))
}

fn c3() -> Result<Line> {
    let ex = h0_excessivity(&excessivity_probes(), 1.0)?;
    let dev = ex.iter().map(|e| e.2).fold(0.0, f64::max);
    let top = ex.iter().map(|e| e.0).fold(0.0, f64::max);
    Ok(line(
        3,
        dev <= 1e-6 && top <= 1.0 + 1e-12,
        format!("h₀ heat ratio vs P(|N| < |x|/√(2νt)) = erf(|x|/(2√(νt))) at 20 probes: max |Δ| {dev:.2e}, max ratio {top:.9}"),
    ))
}

/// Criterion 4 reports two verdicts: every sampler test, and the literal trap constant.
fn c4() -> Result<(Line, bool)> {
    let seed = 40;
    let [(_, p1), (_, p0)] = tau_ks(100_000, 0.8, 1.0, seed)?;
    let pair = make_h0_pair(Kernel::tail_profile(1.0))?.theorem_scaled(1.0, 0.5)?;
    let x = Vec3::new(0.7, 0.3, -0.4);
    let (_, pzb, _) = z_chi_square(&pair, x, Branch::Bilinear, 100_000, seed + 1)?;
    let (_, pzf, _) = z_chi_square(&pair, x, Branch::Forcing, 100_000, seed + 2)?;
    let (_, ph, _, _) = hbm_chi_square(&pair, x, 0.3, 1.0, 100_000, seed + 3)?;
    let n = 100_000u64;
    let (trapped, derived) = trap_frequency(&pair, 1.0, 0.5, n, seed + 4)?;
    let f = trapped as f64 / n as f64;
    let sd = |q: f64| (q * (1.0 - q) / n as f64).sqrt();
    let literal = 1.0 - 0.19875;
    let tests_ok = [p1, p0, pzb, pzf, ph].iter().all(|p| *p >= 0.01);
    let derived_ok = (f - derived).abs() <= 3.0 * sd(derived);
    let literal_ok = (f - literal).abs() <= 3.0 * sd(literal);
    let chi3 = erf(FRAC_1_SQRT_2) - (2.0 / PI).sqrt() * (-0.5f64).exp();
    let text = format!(
        "KS p(τ₁) = {p1:.3}, p(τ₀) = {p0:.3}; χ² p(Z bilinear) = {pzb:.3}, p(Z forcing) = {pzf:.3}, p(endpoint) = {ph:.3}; \
         trap frequency {f:.5} ± {:.5} vs literal {literal:.5}: {}; vs 1 − erf(1/√2) = {derived:.5}: {}\n    \
         note: 0.19875 = P(χ₃ < 1) = {chi3:.5}, the three-dimensional radius law; the trap mass equals one minus the \
         h₀ heat ratio of criterion 3 at |x| = √(2νt), which is 1 − erf(1/√2) (one normal coordinate), so the literal \
         constant is unattainable by an exact sampler",
        sd(derived),
        if literal_ok { "within 3σ" } else { "outside 3σ" },
        if derived_ok { "within 3σ" } else { "outside 3σ" },
    );
    let consistent = tests_ok && derived_ok && !literal_ok;
    Ok((line(4, tests_ok && derived_ok && literal_ok, text), consistent))
}

fn c5() -> Result<Line> {
    let mut parts = Vec::new();
    let mut ok = true;
    for mode in [Mode::Xi, Mode::Upsilon] {
        let spec = reference_problem(mode)?;
        let viol = spec.hypothesis_violations();
        let (over, worst, _) = as_bound_sweep(&spec, &as_bound_points(), 100_000, 50)?;
        ok &= over == 0 && viol.is_empty();
        parts.push(format!("{mode:?}: {over} of 10⁵ above ε = {}, max |value| {worst:.4}", spec.data.epsilon));
    }
    Ok(line(5, ok, format!("p = α = 1/2, theorem-scaled h₀: {}", parts.join("; "))))
}

fn c6() -> Result<Line> {
    let g = gw_statistics(0.25, 100_000, 10_000, 60)?;
    let spec = reference_problem(Mode::Xi)?;
    let (_, _, trunc) = as_bound_sweep(&spec, &[(Vec3::new(1.0, 0.0, 0.0), 2.0)], 20_000, 61)?;
    let gw_trunc = g.truncated as f64 / 100_000.0;
    let ref_trunc = trunc as f64 / 20_000.0;
    let ok = (g.branch_fraction - 0.25).abs() <= 3.0 * g.branch_se
        && (g.mean_nodes - 2.0).abs() <= 3.0 * g.mean_nodes_se
        && gw_trunc < 1e-3
        && ref_trunc < 1e-3;
    Ok(line(
        6,
        ok,
        format!(
            "branch frequency {:.5} ± {:.5} (p = 0.25); mean size {:.4} ± {:.4} (want 2); truncated fraction {gw_trunc:.1e} (t = ∞), {ref_trunc:.1e} (p = 1/2, t = 2)",
            g.branch_fraction, g.branch_se, g.mean_nodes, g.mean_nodes_se
        ),
    ))
}

fn linear_spec(delta: f64) -> Result<ProblemSpec> {
    let mut c = reference_config();
    c.u0.amplitude = delta;
    c.forcing.amplitude = 0.0;
    c.problem()
}

fn c7() -> Result<Line> {
    let probes = [
        (Vec3::new(1.0, 0.0, 0.0), 0.5),
        (Vec3::new(0.5, 0.5, 0.2), 0.25),
        (Vec3::new(0.0, 0.8, -0.6), 1.0),
        (Vec3::new(2.0, 0.0, 1.0), 2.0),
        (Vec3::new(0.3, -0.2, 0.4), 0.1),
    ];
    let n = 100_000u64;
    let seed = 70;
    let d0 = 1e-8;
    let deltas = [1e-2, 1e-3];
    let base = linear_spec(d0)?;
    let specs: Vec<ProblemSpec> = deltas.iter().map(|&d| linear_spec(d)).collect::<Result<_>>()?;
    let mut c_fit = [0.0f64; 2];
    let mut resolved = [0usize; 2];
    let mut rows = Vec::new();
    for &(x, t) in &probes {
        let h = base.pair.h.eval(x);
        let mut xs = vec![Vec3::ZERO; n as usize];
        let mut vals = vec![vec![Vec3::ZERO; n as usize]; 2];
        for i in 0..n {
            let key = cascade_key(seed, x, t, i);
            xs[i as usize] = eval_cascade(x, t, &base, RngStream::root(key), EvalOptions::default())?.value;
            for (k, s) in specs.iter().enumerate() {
                vals[k][i as usize] = eval_cascade(x, t, s, RngStream::root(key), EvalOptions::default())?.value;
            }
        }
        for (k, &d) in deltas.iter().enumerate() {
            let nf = n as f64;
            let mean = vals[k].iter().fold(Vec3::ZERO, |a, &v| a + v) / nf;
            let var = vals[k].iter().fold(Vec3::ZERO, |a, &v| a + (v - mean).map(|c| c * c)) / (nf - 1.0);
            let se = var.map(|v| (v / nf).sqrt()) * h;
            let u_mc = mean * h;
            let lin = specs[k].data.u0.heat_convolution(x, 2.0 * specs[k].nu * t)?;
            let rem: Vec<Vec3> = vals[k].iter().zip(&xs).map(|(&v, &b)| v - b * (d / d0)).collect();
            let rmean = rem.iter().fold(Vec3::ZERO, |a, &v| a + v) / nf;
            let rvar = rem.iter().fold(Vec3::ZERO, |a, &v| a + (v - rmean).map(|c| c * c)) / (nf - 1.0);
            let rse = rvar.map(|v| (v / nf).sqrt());
            if (0..3).any(|c| rmean[c].abs() > 3.0 * rse[c]) {
                resolved[k] += 1;
            }
            let c_here = rmean.max_abs() / (d * d);
            c_fit[k] = c_fit[k].max(c_here);
            rows.push((k, u_mc, se, lin, h, d));
        }
    }
    let mut bound_ok = true;
    for &(k, u_mc, se, lin, h, d) in &rows {
        let slack = c_fit[k] * d * d * h;
        bound_ok &= (0..3).all(|c| (u_mc[c] - lin[c]).abs() <= 3.0 * se[c] + slack);
    }
    let stable = c_fit[0] > 0.0 && c_fit[1] > 0.0 && (c_fit[0] / c_fit[1]).max(c_fit[1] / c_fit[0]) <= 2.0;
    Ok(line(
        7,
        bound_ok && stable,
        format!(
            "g ≡ 0, 5 probes, n = 10⁵ (common random numbers): C(1e-2) = {:.4e}, C(1e-3) = {:.4e}, ratio {:.3}; \
             |u − u₀∗K| ≤ 3se + Cδ²h: {}; remainders resolved above 3σ at {}/5 and {}/5 probes",
            c_fit[0],
            c_fit[1],
            c_fit[0] / c_fit[1],
            if bound_ok { "holds" } else { "violated" },
            resolved[0],
            resolved[1],
        ),
    ))
}

fn c8() -> Result<Line> {
    let spec = reference_problem(Mode::Xi)?;
    let grid = FieldGrid::new(0.0625, 16.0, 9, 5, &[0.125, 0.25, 0.5, 1.0, 2.0])?;
    let opts = PicardOptions { n_polar: 8, n_azimuth: 12, ..PicardOptions::default() };
    // radii are 2^k/16 and polar angles kπ/4
    let points = vec![
        (grid.node(4, 2), 0.5),
        (grid.node(3, 1), 0.25),
        (grid.node(5, 3), 1.0),
        (grid.node(4, 1), 2.0),
        (grid.node(2, 2), 0.125),
    ];
    let rep = compare_mc_oracle(&points, &spec, RunOptions::new(100_000, 80, 1), &grid, &opts)?;
    let worst = rep
        .probes
        .iter()
        .map(|p| (0..3).map(|c| p.diff[c] / p.budget[c].max(f64::MIN_POSITIVE)).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let p0 = &rep.probes[0];
    Ok(line(
        8,
        rep.pass,
        format!(
            "theorem fixture with forcing, 5 probes, n = 10⁵: max |u_MC − u_Picard|/budget {worst:.3}; \
             at x = (1,0,0), t = 0.5: u₂ MC {:.6e} ± {:.1e}, Picard {:.6e}, oracle tolerance {:.1e}",
            p0.u_mc.x2, p0.stderr.x2, p0.u_oracle.x2, p0.oracle_tol.x2
        ),
    ))
}

fn c9() -> Result<Line> {
    let mut c = reference_config();
    c.mode = Mode::Upsilon;
    let up = c.problem()?;
    let xi = ProblemSpec::new(up.nu, up.p, up.pair.clone(), up.data.clone(), Mode::Xi)?;
    let probe_set: Vec<Vec3> = (0..60)
        .map(|i| {
            let r = 10f64.powf(-2.0 + 4.0 * i as f64 / 59.0);
            let th = 0.3 + 2.5 * (i % 7) as f64 / 6.0;
            Vec3::new(r * th.sin(), 0.0, r * th.cos())
        })
        .collect();
    let times = [0.0, 0.05, 0.2, 1.0, 5.0];
    let a_up = check_admissibility(&up.data, &up.pair, DataCondition::Pointwise, &probe_set, &times, up.nu)?;
    let a_xi = check_admissibility(&up.data, &up.pair, DataCondition::HeatSmoothed, &probe_set, &times, up.nu)?;
    let hyp = a_up.pass && a_xi.pass && up.hypothesis_violations().is_empty();
    let mut worst: f64 = 0.0;
    for (i, &(x, t)) in [(Vec3::new(1.0, 0.0, 0.0), 0.5), (Vec3::new(0.4, -0.3, 0.6), 0.2), (Vec3::new(1.5, 1.0, -0.5), 1.5)]
        .iter()
        .enumerate()
    {
        let a = mc_estimate(x, t, &xi, RunOptions::new(100_000, 90 + i as u64, 1))?;
        let b = mc_estimate(x, t, &up, RunOptions::new(100_000, 95 + i as u64, 1))?;
        for k in 0..3 {
            let s = (a.stderr[k].powi(2) + b.stderr[k].powi(2)).sqrt();
            if s > 0.0 {
                worst = worst.max((a.u[k] - b.u[k]).abs() / s);
            } else if a.u[k] != b.u[k] {
                worst = f64::INFINITY;
            }
        }
    }
    Ok(line(
        9,
        hyp && worst <= 3.0,
        format!(
            "same data under both hypotheses (sampled |u₀|/h ≤ {:.3} vs αε = {}, |u₀∗K|/h ≤ {:.3}): max |u_Xi − u_Upsilon|/σ = {worst:.2} at 3 probes",
            a_up.u_ratio_max, a_up.u_bound, a_xi.u_ratio_max
        ),
    ))
}

fn c10() -> Result<Line> {
    let mut rng = RngStream::from_seed(100);
    let probes: Vec<(Vec3, f64)> = (0..2000)
        .map(|_| {
            let x = rng.normal3() * 10f64.powf(2.0 * rng.uniform() - 1.0);
            let s = 10f64.powf(3.0 * rng.uniform() - 1.5);
            (x, s)
        })
        .collect();
    let (tr, asym) = gamma_trace_check(&probes, 1.0)?;
    let mut near = 0;
    let mut tr_k: f64 = 0.0;
    for &(x, s) in &probes {
        let g = gamma_kernel(x, s, 1.0)?;
        let k = heat_kernel(x, 2.0 * s)?;
        if 2.0 * k >= 1e-3 * g.max_abs() {
            near += 1;
            tr_k = tr_k.max((g.trace() - 2.0 * k).abs() / (2.0 * k));
        }
    }
    let fw = gamma_fourier_check(&gamma_probes(), 1.0)?;
    Ok(line(
        10,
        tr <= 1e-12 && asym <= 1e-12 && tr_k <= 1e-12 && fw <= 0.02,
        format!(
            "tr Γ vs 2K at 2000 random (x,s): max deviation {tr:.2e} relative to max(2K, max|Γᵢⱼ|), \
             {tr_k:.2e} relative to 2K at the {near} probes with 2K ≥ 1e-3·max|Γᵢⱼ|; Fourier quadrature at 5 points: {fw:.2e} (≤ 2%)"
        ),
    ))
}

fn c11() -> Result<Line> {
    let spec = reference_problem(Mode::Xi)?;
    let mut points = Vec::new();
    for t in [0.5, 1.0] {
        for a in [0.5, 1.5] {
            for b in [-0.5, 0.5] {
                points.push((Vec3::new(a, b, 0.25), t));
            }
        }
    }
    let mut outputs = Vec::new();
    for workers in [1, 4, 16] {
        let reps = grid_evaluate(&points, &spec, RunOptions::new(2000, 110, workers))?;
        let mut buf = Vec::new();
        write_csv(&mut buf, &["seed=110".to_string()], &reps).expect("in-memory write");
        outputs.push(buf);
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    Ok(line(11, same, format!("field CSV for 8 points × 2000 cascades: byte-identical across workers 1, 4, 16: {same}")))
}

fn main() -> ExitCode {
    let mut lines = Vec::new();
    let mut c4_consistent = false;
    let checks: Vec<(u32, fn() -> Result<Line>)> = vec![(1, c1), (2, c2), (3, c3), (5, c5), (6, c6), (7, c7), (8, c8), (9, c9), (10, c10), (11, c11)];
    match c4() {
        Ok((l, consistent)) => {
            c4_consistent = consistent;
            lines.push(l);
        }
        Err(e) => lines.push(line(4, false, format!("error: {e}"))),
    }
    for (id, f) in checks {
        lines.push(f().unwrap_or_else(|e| line(id, false, format!("error: {e}"))));
    }
    lines.sort_by_key(|l| l.id);
    for l in &lines {
        println!("criterion {:>2} [{}] {}", l.id, if l.pass { "PASS" } else { "FAIL" }, l.text);
    }
    let failed: Vec<u32> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    println!("{} of {} criteria pass", lines.len() - failed.len(), lines.len());
    // criterion 4 may fail only on its literal trap constant, with every sampler test passing
    let unexpected: Vec<u32> = failed.iter().copied().filter(|&id| !(id == 4 && c4_consistent)).collect();
    if unexpected.is_empty() {
        if failed.contains(&4) {
            println!("criterion 4 fails on the literal trap constant only; samplers match the derived trap mass");
        }
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
