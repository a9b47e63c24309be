//! JSON run configuration.
//!
//! ```json
//! {
//!   "nu": 1.0, "p": 0.5, "epsilon": 0.2, "alpha": 0.5, "beta": 0.4,
//!   "kernel": { "name": "h0", "params": { "tail": 1.0, "scale": "theorem" } },
//!   "u0": { "fixture": "gaussian_swirl", "amplitude": 1.0, "params": { "length": 1.0 } },
//!   "forcing": { "fixture": "swirl_bump", "amplitude": 1.0, "params": { "radius": 1.0 } },
//!   "mode": "Xi", "n": 100000, "seed": 1, "workers": 1, "depth_cap": 10000
//! }
//! ```
//!
//! Fixture amplitudes are fractions of the admissible size: `amplitude = 1`
//! makes `sup |u₀∗K|/h = αε` (`sup |u₀|/h` in Upsilon mode) and
//! `sup |g|/h̃ = βε`. See `docs/config.md` for every key.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::cascade::{EvalOptions, Mode, ProblemSpec, DEFAULT_DEPTH_CAP};
use crate::data::{maximize_1d, Forcing, InitialField};
use crate::error::{Error, Result};
use crate::estimator::RunOptions;
use crate::kernels::{
    kernel_algebra, make_H_pair, make_Hp_pair, make_h0_pair, make_h1_pair, AdmissiblePair, Kernel, KernelOp, KernelPair, INFINITE,
};
use crate::vecgeom::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureConfig {
    pub fixture: String,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
}

impl FixtureConfig {
    pub fn zero() -> Self {
        FixtureConfig { fixture: "zero".into(), amplitude: 0.0, params: BTreeMap::new() }
    }
}

fn default_n() -> u64 {
    10_000
}
fn default_seed() -> u64 {
    1
}
fn default_workers() -> usize {
    1
}
fn default_depth_cap() -> u32 {
    DEFAULT_DEPTH_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub nu: f64,
    pub p: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    pub kernel: KernelConfig,
    pub u0: FixtureConfig,
    pub forcing: FixtureConfig,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_n")]
    pub n: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_depth_cap")]
    pub depth_cap: u32,
}

fn get_f64(params: &BTreeMap<String, Value>, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v.as_f64().ok_or_else(|| Error::config(format!("parameter {key} must be a number, got {v}"))),
    }
}

fn check_keys(params: &BTreeMap<String, Value>, allowed: &[&str], what: &str) -> Result<()> {
    for k in params.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::config(format!("unknown parameter {k} for {what}; allowed: {allowed:?}")));
        }
    }
    Ok(())
}

fn base_pair(k: &KernelConfig) -> Result<KernelPair> {
    let p = &k.params;
    let pair = match k.name.as_str() {
        "h0" => {
            check_keys(p, &["tail", "scale"], "h0")?;
            let tail = match p.get("tail") {
                Some(Value::Null) => Kernel::Zero,
                _ => Kernel::tail_profile(get_f64(p, "tail", 1.0)?),
            };
            make_h0_pair(tail)
        }
        "H" => {
            check_keys(p, &["scale"], "H")?;
            Ok(make_H_pair())
        }
        "Hp" => {
            check_keys(p, &["p", "scale"], "Hp")?;
            make_Hp_pair(get_f64(p, "p", 2.0)?)
        }
        "h1" => {
            check_keys(p, &["scale"], "h1")?;
            Ok(make_h1_pair())
        }
        "mixture" => {
            check_keys(p, &["components", "scale"], "mixture")?;
            let comps = p
                .get("components")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::config("mixture needs a components array of {weight, name, params}"))?;
            let mut parts = Vec::new();
            for c in comps {
                let w = c
                    .get("weight")
                    .and_then(Value::as_f64)
                    .ok_or_else(|| Error::config("mixture component needs a numeric weight"))?;
                let kc = KernelConfig {
                    name: c.get("name").and_then(Value::as_str).ok_or_else(|| Error::config("mixture component needs a name"))?.into(),
                    params: serde_json::from_value(c.get("params").cloned().unwrap_or(Value::Object(Default::default())))
                        .map_err(|e| Error::config(format!("mixture component params: {e}")))?,
                };
                if kc.params.contains_key("scale") {
                    return Err(Error::config("scale applies to the whole mixture, not to a component"));
                }
                parts.push((w, base_pair(&kc)?));
            }
            let first = parts.first().map(|p| p.1.clone()).ok_or_else(|| Error::config("mixture needs components"))?;
            kernel_algebra(KernelOp::Mixture(parts), &first)
        }
        other => return Err(Error::config(format!("unknown kernel {other}; expected h0, H, Hp, h1 or mixture"))),
    };
    pair.map_err(|e| Error::config(e.to_string()))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("config parse error: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Canonical JSON (keys of `params` sorted).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON, hex. `workers` is excluded: it never changes results.
    pub fn hash(&self) -> String {
        let c = RunConfig { workers: 1, ..self.clone() };
        let d = Sha256::digest(serde_json::to_string(&c).expect("config serializes").as_bytes());
        d.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Kernel pair after the requested rescaling.
    pub fn kernel_pair(&self) -> Result<KernelPair> {
        let pair = base_pair(&self.kernel)?;
        match self.kernel.params.get("scale") {
            None => pair.theorem_scaled(self.nu, self.p),
            Some(Value::String(s)) if s == "theorem" => pair.theorem_scaled(self.nu, self.p),
            Some(Value::String(s)) if s == "none" => Ok(pair),
            Some(Value::Object(o)) => {
                let c = o.get("c").and_then(Value::as_f64).unwrap_or(1.0);
                let ct = o.get("c_tilde").and_then(Value::as_f64).unwrap_or(1.0);
                pair.rescaled(c, ct)
            }
            Some(v) => Err(Error::config(format!("scale must be \"theorem\", \"none\" or {{c, c_tilde}}, got {v}"))),
        }
        .map_err(|e| Error::config(e.to_string()))
    }

    /// Every violated precondition, named; the first is reported on failure.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            v.push(format!("ν > 0 violated: ν = {}", self.nu));
        }
        if !(self.p > 0.0 && self.p <= 0.5) {
            v.push(format!("p ∈ (0,1/2] violated: p = {}", self.p));
        }
        if !v.is_empty() {
            return v;
        }
        let data = AdmissiblePair { u0: InitialField::Zero, g: Forcing::Zero, alpha: self.alpha, beta: self.beta, epsilon: self.epsilon };
        v.extend(data.parameter_violations());
        match self.kernel_pair() {
            Err(e) => v.push(e.to_string()),
            Ok(pair) => {
                let gmax = 8.0 * std::f64::consts::PI * self.nu * self.p / 11.0;
                if pair.gamma > gmax * (1.0 + 1e-12) {
                    v.push(format!("γ > 8πνp/11: γ = {}, 8πνp/11 = {gmax}", pair.gamma));
                }
                let gtmax = 2.0 * std::f64::consts::PI * self.nu * (1.0 - self.p);
                if pair.gamma_tilde > gtmax * (1.0 + 1e-12) {
                    v.push(format!("γ̃ > 2πν(1−p): γ̃ = {}, 2πν(1−p) = {gtmax}", pair.gamma_tilde));
                }
                if self.mode == Mode::Upsilon && !pair.excessive {
                    v.push(format!("mode Upsilon needs an excessive kernel; {} is not", pair.name));
                }
                if self.forcing.fixture != "zero" && self.forcing.amplitude != 0.0 && pair.h_tilde.is_zero() {
                    v.push(format!("nonzero forcing needs h̃ ≠ 0; kernel {} has h̃ = 0", self.kernel.name));
                }
            }
        }
        for (name, a) in [("u0", self.u0.amplitude), ("forcing", self.forcing.amplitude)] {
            if !(a >= 0.0 && a <= 1.0) {
                v.push(format!("{name} amplitude ∈ [0,1] violated (fraction of the admissible size): {a}"));
            }
        }
        if self.n < 2 {
            v.push(format!("n ≥ 2 violated: n = {}", self.n));
        }
        if self.workers == 0 {
            v.push("workers ≥ 1 violated".into());
        }
        if self.depth_cap == 0 {
            v.push("depth_cap ≥ 1 violated".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            None => Ok(()),
            Some(first) => Err(Error::config(first)),
        }
    }

    /// Validate and assemble the problem.
    pub fn problem(&self) -> Result<ProblemSpec> {
        self.validate()?;
        let pair = self.kernel_pair()?;
        let u0 = self.initial_field(&pair)?;
        let g = self.forcing_field(&pair)?;
        let data = AdmissiblePair { u0, g, alpha: self.alpha, beta: self.beta, epsilon: self.epsilon };
        ProblemSpec::new(self.nu, self.p, pair, data, self.mode)
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions { n: self.n, seed: self.seed, workers: self.workers, eval: EvalOptions { depth_cap: self.depth_cap, ..Default::default() } }
    }

    fn initial_field(&self, pair: &KernelPair) -> Result<InitialField> {
        let f = &self.u0;
        match f.fixture.as_str() {
            "zero" => {
                check_keys(&f.params, &[], "u0 zero")?;
                Ok(InitialField::Zero)
            }
            "gaussian_swirl" => {
                check_keys(&f.params, &["length"], "gaussian_swirl")?;
                let l = get_f64(&f.params, "length", 1.0)?;
                let unit = InitialField::gaussian_swirl(1.0, l)?;
                if f.amplitude == 0.0 {
                    return Ok(unit.scaled(0.0));
                }
                let s = swirl_sup_ratio(&pair.h, l, self.mode == Mode::Xi)?;
                Ok(unit.scaled(f.amplitude * self.alpha * self.epsilon / s))
            }
            other => Err(Error::config(format!("unknown u0 fixture {other}; expected zero or gaussian_swirl"))),
        }
    }

    fn forcing_field(&self, pair: &KernelPair) -> Result<Forcing> {
        let f = &self.forcing;
        match f.fixture.as_str() {
            "zero" => {
                check_keys(&f.params, &[], "forcing zero")?;
                Ok(Forcing::Zero)
            }
            "swirl_bump" => {
                check_keys(&f.params, &["radius"], "swirl_bump")?;
                let unit = Forcing::swirl_bump(1.0, get_f64(&f.params, "radius", 1.0)?)?;
                if f.amplitude == 0.0 {
                    return Ok(unit.scaled(0.0));
                }
                if !pair.h_tilde.is_radial() {
                    return Err(Error::config("forcing amplitude normalization needs a radial h̃"));
                }
                let ht = pair.h_tilde.clone();
                let s = unit
                    .sup_ratio_radial(&|r| ht.eval(Vec3::new(r, 0.0, 0.0)))
                    .ok_or_else(|| Error::config("no sup ratio for this forcing"))?;
                if !(s > 0.0 && s < INFINITE) {
                    return Err(Error::config(format!("sup |g|/h̃ = {s} for the unit forcing; cannot normalize")));
                }
                Ok(unit.scaled(f.amplitude * self.beta * self.epsilon / s))
            }
            other => Err(Error::config(format!("unknown forcing fixture {other}; expected zero or swirl_bump"))),
        }
    }
}

/// `sup |u₀∗K(·,T)|/h` for the unit Gaussian swirl, over `x` and, when `smoothed`, over `T ≥ 0`.
/// `|x_⊥| ≤ |x|` puts the maximum on the equatorial plane for radial `h`; the `T` sup is taken
/// over a log grid of 121 variances in `[10⁻⁴, 10⁴]·L²` plus `T = 0`.
pub fn swirl_sup_ratio(h: &Kernel, length: f64, smoothed: bool) -> Result<f64> {
    if !h.is_radial() {
        return Err(Error::config("u0 amplitude normalization needs a radial h"));
    }
    let l2 = length * length;
    let mut vars = vec![0.0];
    if smoothed {
        vars.extend((0..=120).map(|i| l2 * 10f64.powf(-4.0 + i as f64 / 15.0)));
    }
    let mut best: f64 = 0.0;
    for var in vars {
        let s = l2 + var;
        let rmax = 40.0 * s.sqrt();
        let f = |r: f64| {
            let d = h.eval(Vec3::new(r, 0.0, 0.0));
            if d == INFINITE || d <= 0.0 {
                0.0
            } else {
                r * (l2 / s).powf(2.5) * (-r * r / (2.0 * s)).exp() / d
            }
        };
        best = best.max(maximize_1d(f, 0.0, rmax));
    }
    if !(best > 0.0 && best.is_finite()) {
        return Err(Error::config(format!("sup |u₀∗K|/h = {best} for the unit swirl; cannot normalize")));
    }
    Ok(best)
}

/// The reference configuration: `h₀` pair at theorem scale, full-size swirl and bump.
pub fn reference_config() -> RunConfig {
    let mut kp = BTreeMap::new();
    kp.insert("tail".into(), Value::from(1.0));
    kp.insert("scale".into(), Value::from("theorem"));
    let mut up = BTreeMap::new();
    up.insert("length".into(), Value::from(1.0));
    let mut gp = BTreeMap::new();
    gp.insert("radius".into(), Value::from(1.0));
    RunConfig {
        nu: 1.0,
        p: 0.5,
        epsilon: 0.2,
        alpha: 0.5,
        beta: 0.4,
        kernel: KernelConfig { name: "h0".into(), params: kp },
        u0: FixtureConfig { fixture: "gaussian_swirl".into(), amplitude: 1.0, params: up },
        forcing: FixtureConfig { fixture: "swirl_bump".into(), amplitude: 1.0, params: gp },
        mode: Mode::Xi,
        n: 10_000,
        seed: 1,
        workers: 1,
        depth_cap: DEFAULT_DEPTH_CAP,
    }
}
