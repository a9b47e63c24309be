//! `nscascade`: estimation runs, field export, verification suites and sampler diagnostics.

mod grid;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use nscascade::cascade::Mode;
use nscascade::config::RunConfig;
use nscascade::estimator::{grid_evaluate, mc_estimate, write_csv};
use nscascade::rng::RngStream;
use nscascade::samplers::{sample_hbm_endpoint, sample_tau0, sample_tau1, tau0_cdf, tau1_cdf, Branch};
use nscascade::verify::{run_suite, SAMPLED_CAVEAT};
use nscascade::Error;

const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

#[derive(Parser)]
#[command(name = "nscascade", version, about = "Stochastic-cascade Monte Carlo for 3-D Navier-Stokes")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate u(x,t) at one point and print the report as JSON.
    Estimate {
        #[command(flatten)]
        run: RunArgs,
        /// Point "x1,x2,x3".
        #[arg(long, default_value = "1,0,0")]
        x: String,
        #[arg(long, default_value_t = 0.5)]
        t: f64,
    },
    /// Estimate u on a grid and write the field CSV.
    Field {
        #[command(flatten)]
        run: RunArgs,
        /// "x1a:x1b:n1,x2a:x2b:n2,x3a:x3b:n3;t1,t2,..."
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run invariant and statistical check suites.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Dump sampler histograms as CSV.
    SampleDiag {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "1,0,0")]
        x: String,
        #[arg(long, default_value_t = 0.5)]
        t: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long = "depth-cap")]
    depth_cap: Option<u32>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    #[value(name = "Xi", alias = "xi")]
    Xi,
    #[value(name = "Upsilon", alias = "upsilon")]
    Upsilon,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Geometry,
    Heat,
    Kernels,
    Samplers,
    Cascade,
    Oracle,
    All,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::Geometry => "geometry",
            Suite::Heat => "heat",
            Suite::Kernels => "kernels",
            Suite::Samplers => "samplers",
            Suite::Cascade => "cascade",
            Suite::Oracle => "oracle",
            Suite::All => "all",
        }
    }
}

enum Failure {
    Verify(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Io(_) => 4,
        _ => 3,
    }
}

fn load_config(run: &RunArgs) -> Result<RunConfig, Error> {
    let mut c = RunConfig::load(&run.config)?;
    if let Some(n) = run.n {
        c.n = n;
    }
    if let Some(s) = run.seed {
        c.seed = s;
    }
    if let Some(w) = run.workers {
        c.workers = w;
    }
    if let Some(d) = run.depth_cap {
        c.depth_cap = d;
    }
    if let Some(m) = run.mode {
        c.mode = match m {
            ModeArg::Xi => Mode::Xi,
            ModeArg::Upsilon => Mode::Upsilon,
        };
    }
    c.validate()?;
    Ok(c)
}

fn provenance(c: &RunConfig) -> Vec<String> {
    vec![format!("nscascade {VERSION}"), format!("seed={}", c.seed), format!("config_sha256={}", c.hash())]
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn cmd_estimate(run: &RunArgs, x: &str, t: f64) -> Result<(), Failure> {
    let c = load_config(run)?;
    let x = grid::parse_point(x).map_err(Error::config)?;
    if !(t > 0.0) {
        return Err(Error::config(format!("--t must be positive, got {t}")).into());
    }
    let spec = c.problem()?;
    let r = mc_estimate(x, t, &spec, c.run_options())?;
    let u_over_h = r.xi_mean.norm();
    let eps = spec.data.epsilon;
    let bound = 2.0 * std::f64::consts::PI * spec.nu / 11.0;
    let holds = r.xi_max_norm <= eps * (1.0 + 1e-12) && u_over_h < bound;
    let out = json!({
        "version": VERSION,
        "seed": c.seed,
        "config_sha256": c.hash(),
        "mode": c.mode,
        "report": r,
        "u_over_h": u_over_h,
        "epsilon": eps,
        "two_pi_nu_over_11": bound,
        "bound_holds": holds,
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("report serializes"));
    if !holds {
        return Err(Failure::Verify(format!(
            "bound violated: max |Ξ| = {}, |u|/h = {u_over_h}; required max |Ξ| ≤ ε = {eps} and |u|/h < 2πν/11 = {bound}",
            r.xi_max_norm
        )));
    }
    Ok(())
}

fn cmd_field(run: &RunArgs, grid_spec: &str, out: &Path) -> Result<(), Failure> {
    let c = load_config(run)?;
    let points = grid::parse_grid(grid_spec).map_err(Error::config)?;
    let spec = c.problem()?;
    let f = File::create(out).map_err(|e| io_err(out, e))?;
    let reports = grid_evaluate(&points, &spec, c.run_options())?;
    let mut w = BufWriter::new(f);
    write_csv(&mut w, &provenance(&c), &reports).map_err(|e| io_err(out, e))?;
    w.flush().map_err(|e| io_err(out, e))?;
    Ok(())
}

fn cmd_verify(suite: Suite, seed: u64) -> Result<(), Failure> {
    let checks = run_suite(suite.name(), seed)?;
    for c in &checks {
        println!("{c}");
    }
    println!("note: {SAMPLED_CAVEAT}");
    let failed: Vec<_> = checks.iter().filter(|c| !c.pass).collect();
    println!("{} checks, {} failed", checks.len(), failed.len());
    match failed.first() {
        None => Ok(()),
        Some(f) => Err(Failure::Verify(format!("{}/{}: observed {}; required {}", f.suite, f.name, f.observed, f.required))),
    }
}

struct Histogram {
    edges: Vec<f64>,
    counts: Vec<u64>,
}

impl Histogram {
    /// Log-spaced bins on `[lo, hi)` plus `[0, lo)` and `[hi, ∞)`.
    fn log(lo: f64, hi: f64, bins: usize) -> Self {
        let mut edges = vec![0.0];
        edges.extend((0..=bins).map(|i| lo * (hi / lo).powf(i as f64 / bins as f64)));
        edges.push(f64::INFINITY);
        Histogram { counts: vec![0; edges.len() - 1], edges }
    }

    fn add(&mut self, v: f64) {
        let i = self.edges.partition_point(|&e| e <= v).clamp(1, self.counts.len());
        self.counts[i - 1] += 1;
    }

    fn write(&self, w: &mut dyn Write, name: &str, n: u64, cdf: Option<&dyn Fn(f64) -> f64>) -> std::io::Result<()> {
        for (i, c) in self.counts.iter().enumerate() {
            let (a, b) = (self.edges[i], self.edges[i + 1]);
            let e = cdf.map(|f| format!("{:e}", (f(b) - f(a)) * n as f64)).unwrap_or_default();
            writeln!(w, "{name},{a:e},{b:e},{c},{e}")?;
        }
        Ok(())
    }
}

fn cmd_sample_diag(run: &RunArgs, x: &str, t: f64, out: Option<&Path>) -> Result<(), Failure> {
    let c = load_config(run)?;
    let x = grid::parse_point(x).map_err(Error::config)?;
    let spec = c.problem()?;
    let n = c.n;
    let nu = spec.nu;
    let a = x.norm();
    if !(a > 0.0) {
        return Err(Error::config("sample-diag needs x ≠ 0").into());
    }
    let mut rng = RngStream::from_seed(c.seed);
    let scale = a * a / nu;
    let mut h1 = Histogram::log(1e-3 * scale, 1e3 * scale, 60);
    let mut h0 = Histogram::log(1e-3 * scale, 1e3 * scale, 60);
    for _ in 0..n {
        h1.add(sample_tau1(a, nu, &mut rng)?);
        h0.add(sample_tau0(a, nu, &mut rng)?);
    }
    let z = spec.z_sampler();
    let mut zb = Histogram::log(1e-3 * a, 1e3 * a, 60);
    for _ in 0..n {
        zb.add(z.sample(x, &spec.pair, Branch::Bilinear, &mut rng)?.norm());
    }
    let mut zf = Histogram::log(1e-3 * a, 1e3 * a, 60);
    if !spec.pair.h_tilde.is_zero() {
        for _ in 0..n {
            zf.add(z.sample(x, &spec.pair, Branch::Forcing, &mut rng)?.norm());
        }
    }
    let sd = (2.0 * nu * t).sqrt();
    let mut hb = Histogram::log(1e-3 * sd, 1e2 * sd, 50);
    let mut trapped = 0u64;
    if spec.pair.excessive {
        for _ in 0..n {
            match sample_hbm_endpoint(x, t, &spec.pair, nu, &mut rng)? {
                Some(y) => hb.add((y - x).norm()),
                None => trapped += 1,
            }
        }
    }
    let mut w: Box<dyn Write> = match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_err(p, e))?)),
        None => Box::new(std::io::stdout().lock()),
    };
    let write = |w: &mut dyn Write| -> std::io::Result<()> {
        for p in provenance(&c) {
            writeln!(w, "# {p}")?;
        }
        writeln!(w, "# x={},{},{} t={t} n={n}", x.x1, x.x2, x.x3)?;
        writeln!(w, "sampler,bin_lo,bin_hi,count,expected")?;
        h1.write(w, "tau1", n, Some(&|s| tau1_cdf(s, a, nu)))?;
        h0.write(w, "tau0", n, Some(&|s| tau0_cdf(s, a, nu)))?;
        zb.write(w, "z_bilinear", n, None)?;
        if !spec.pair.h_tilde.is_zero() {
            zf.write(w, "z_forcing", n, None)?;
        }
        if spec.pair.excessive {
            hb.write(w, "hbm_displacement", n, None)?;
            writeln!(w, "hbm_trap,,,{trapped},")?;
        }
        w.flush()
    };
    let target = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("<stdout>"));
    write(&mut *w).map_err(|e| io_err(&target, e))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Command::Estimate { run, x, t } => cmd_estimate(run, x, *t),
        Command::Field { run, grid, out } => cmd_field(run, grid, out),
        Command::Verify { suite, seed } => cmd_verify(*suite, *seed),
        Command::SampleDiag { run, x, t, out } => cmd_sample_diag(run, x, *t, out.as_deref()),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
