//! The tree-indexed recursion.
//!
//! Each node `v` starts at the location `X_v̄` of its parent with remaining time
//! `t − S_v`. It contributes a data term (the heat-smoothed initial data `m₀`
//! in [`Mode::Xi`], or `χ₀` at an h-Brownian endpoint in [`Mode::Upsilon`]),
//! then, if its waiting time fits in the remaining time, either branches into
//! two children at `X_v = X_v̄ − Z_v` (`κ ≤ 3`) or reads the forcing at `X_v`
//! (`κ ∈ {4,5}`).
//!
//! Trees are expanded with an explicit stack into an arena and folded in
//! reverse creation order, so depth is limited only by memory and `depth_cap`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{cascade_multipliers, AdmissiblePair, KernelPair, INFINITE};
use crate::rng::RngStream;
use crate::samplers::{
    check_p, sample_hbm_endpoint, sample_kappa, sample_tau0, sample_tau1, sample_y_given_z, Branch, Kappa, ZSampler,
};
use crate::vecgeom::{b1_unit, b2_unit, proj_perp_unit, reflect_unit, Vec3, ZERO_NORM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Mode {
    /// Data term `m₀(x, t)`; any majorizing pair.
    #[default]
    Xi,
    /// Data term `χ₀(V(t))` on an h-Brownian path; excessive pairs only.
    Upsilon,
}

pub const DEFAULT_DEPTH_CAP: u32 = 10_000;

/// Everything a cascade needs: viscosity, branch probability, majorizing pair, data.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub nu: f64,
    pub p: f64,
    pub pair: KernelPair,
    pub data: AdmissiblePair,
    pub mode: Mode,
    z_sampler: ZSampler,
}

impl ProblemSpec {
    pub fn new(nu: f64, p: f64, pair: KernelPair, data: AdmissiblePair, mode: Mode) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::config(format!("viscosity must satisfy ν > 0, got {nu}")));
        }
        check_p(p).map_err(|_| Error::config(format!("branch probability must satisfy p ∈ (0,1/2], got {p}")))?;
        if mode == Mode::Upsilon && !pair.excessive {
            return Err(Error::config(format!(
                "mode Upsilon needs an excessive kernel pair; {} is not excessive",
                pair.name
            )));
        }
        if !data.g.is_zero() && pair.h_tilde.is_zero() {
            return Err(Error::config("nonzero forcing needs a nonzero forcing majorant h̃"));
        }
        let z_sampler = ZSampler::new(&pair)?;
        Ok(ProblemSpec { nu, p, pair, data, mode, z_sampler })
    }

    /// Theorem hypotheses on `(γ, γ̃)` and `(α, β, ε)` that this problem violates, by name.
    pub fn hypothesis_violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let gmax = 8.0 * PI * self.nu * self.p / 11.0;
        if self.pair.gamma > gmax * (1.0 + 1e-12) {
            v.push(format!("γ > 8πνp/11: γ = {}, 8πνp/11 = {gmax}", self.pair.gamma));
        }
        let gtmax = 2.0 * PI * self.nu * (1.0 - self.p);
        if self.pair.gamma_tilde > gtmax * (1.0 + 1e-12) {
            v.push(format!("γ̃ > 2πν(1−p): γ̃ = {}, 2πν(1−p) = {gtmax}", self.pair.gamma_tilde));
        }
        v.extend(self.data.parameter_violations());
        v
    }

    /// `m₀(x, t) = (u₀ ∗ K(·, 2νt))(x) / h(x)`.
    pub fn m0(&self, x: Vec3, t: f64) -> Result<Vec3> {
        if !(t >= 0.0) {
            return Err(Error::domain(format!("m₀ needs t ≥ 0, got {t}")));
        }
        if self.data.u0.is_zero() {
            return Ok(Vec3::ZERO);
        }
        let u = self.data.u0.heat_convolution(x, 2.0 * self.nu * t)?;
        Ok(scale_by_inverse(u, self.pair.h.eval(x)))
    }

    /// `χ₀(y) = u₀(y) / h(y)`, and `0` at the trap.
    pub fn chi0(&self, y: Option<Vec3>) -> Vec3 {
        match y {
            None => Vec3::ZERO,
            Some(y) => scale_by_inverse(self.data.u0.eval(y), self.pair.h.eval(y)),
        }
    }

    /// `φ(x, t) = g(x, t) / h̃(x)`; `0` where `g = 0`.
    pub fn phi(&self, x: Vec3, t: f64) -> std::result::Result<Vec3, String> {
        let g = self.data.g.eval(x, t);
        if g == Vec3::ZERO {
            return Ok(Vec3::ZERO);
        }
        let ht = self.pair.h_tilde.eval(x);
        if ht == 0.0 {
            return Err(format!("h̃(X) = 0 but g(X, t) = {g:?} ≠ 0 at X = {x:?}, t = {t}"));
        }
        Ok(scale_by_inverse(g, ht))
    }

    pub fn z_sampler(&self) -> &ZSampler {
        &self.z_sampler
    }
}

fn scale_by_inverse(u: Vec3, h: f64) -> Vec3 {
    if h == INFINITE && u.is_finite() {
        Vec3::ZERO
    } else {
        u / h
    }
}

/// `B_v`: `b₁` for `κ = 1`, `+b₂/2` for `κ = 2`, `−b₂/2` for `κ = 3`.
pub fn apply_b(kappa: u8, z: Vec3, a: Vec3, b: Vec3) -> Result<Vec3> {
    let r = z.norm();
    if !(r >= ZERO_NORM) {
        return Err(Error::domain("B needs Z ≠ 0"));
    }
    let e = z / r;
    match kappa {
        1 => Ok(b1_unit(e, a, b)),
        2 => Ok(b2_unit(e, a, b) * 0.5),
        3 => Ok(b2_unit(e, a, b) * -0.5),
        k => Err(Error::domain(format!("B is defined for κ ∈ {{1,2,3}}, got {k}"))),
    }
}

/// `C_v`: `P_z` for `κ = 4`, `−(I − 3e_z e_zᵗ)/2` for `κ = 5`.
pub fn apply_c(kappa: u8, z: Vec3, phi: Vec3) -> Result<Vec3> {
    let r = z.norm();
    if !(r >= ZERO_NORM) {
        return Err(Error::domain("C needs Z ≠ 0"));
    }
    let e = z / r;
    match kappa {
        4 => Ok(proj_perp_unit(e, phi)),
        5 => Ok(reflect_unit(e, phi) * -0.5),
        k => Err(Error::domain(format!("C is defined for κ ∈ {{4,5}}, got {k}"))),
    }
}

/// Random marks of one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeEnsemble {
    /// `X_v = X_v̄ − Z_v`.
    pub x: Vec3,
    pub y: Vec3,
    pub z: Vec3,
    pub tau: f64,
    pub kappa: u8,
    /// Birth time: the sum of the waiting times of the strict ancestors.
    pub s: f64,
    pub depth: u32,
}

/// Draw `(κ, Z, Y, τ)` for a node starting at `x_parent`. `Z` and `Y` are zero
/// (and `τ = ∞`) on a forcing branch when `h̃ ≡ 0`: that branch contributes nothing.
pub fn sample_ensemble(x_parent: Vec3, s: f64, depth: u32, spec: &ProblemSpec, rng: &mut RngStream) -> Result<NodeEnsemble> {
    let kappa = sample_kappa(spec.p, rng)?;
    let Kappa(k) = kappa;
    if !kappa.is_bilinear() && spec.pair.h_tilde.is_zero() {
        return Ok(NodeEnsemble { x: x_parent, y: Vec3::ZERO, z: Vec3::ZERO, tau: f64::INFINITY, kappa: k, s, depth });
    }
    let branch = if kappa.is_bilinear() { Branch::Bilinear } else { Branch::Forcing };
    let z = spec.z_sampler.sample(x_parent, &spec.pair, branch, rng)?;
    let y = sample_y_given_z(z, rng)?;
    let tau = match k {
        1 => sample_tau0(z.norm(), spec.nu, rng)?,
        2 | 4 => sample_tau1(z.norm(), spec.nu, rng)?,
        _ => sample_tau1(y.norm(), spec.nu, rng)?,
    };
    Ok(NodeEnsemble { x: x_parent - z, y, z, tau, kappa: k, s, depth })
}

/// Result of evaluating one cascade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CascadeOutcome {
    pub value: Vec3,
    pub nodes: u64,
    pub max_depth: u32,
    pub truncated: bool,
    /// Number of nodes with each `κ` (sampled nodes only).
    pub kappa_counts: [u64; 5],
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub depth_cap: u32,
    /// Give the left child the right child's stream and vice versa.
    pub swap_children: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { depth_cap: DEFAULT_DEPTH_CAP, swap_children: false }
    }
}

enum Kind {
    Leaf,
    Branch { kappa: u8, z: Vec3, mult: f64, children: [usize; 2] },
}

struct Node {
    parent: usize,
    bit: u8,
    data: Vec3,
    kind: Kind,
    value: Vec3,
}

fn node_path(arena: &[Node], mut i: usize) -> String {
    let mut bits = Vec::new();
    while i != 0 {
        bits.push(char::from(b'0' + arena[i].bit));
        i = arena[i].parent;
    }
    bits.reverse();
    let s: String = bits.into_iter().collect();
    format!("φ{s}")
}

fn data_error(arena: &[Node], i: usize, draws: u64, msg: impl Into<String>) -> Error {
    Error::Data { path: node_path(arena, i), draw: draws, msg: msg.into() }
}

/// Evaluate `Ξ_φ(t)` or `Υ_φ(t)` (per `spec.mode`) for one realization of the tree.
pub fn eval_cascade(x: Vec3, t: f64, spec: &ProblemSpec, rng: RngStream, opts: EvalOptions) -> Result<CascadeOutcome> {
    eval_impl(x, t, spec, rng, opts, None)
}

/// As [`eval_cascade`], also returning every sampled node's marks.
pub fn eval_cascade_traced(
    x: Vec3,
    t: f64,
    spec: &ProblemSpec,
    rng: RngStream,
    opts: EvalOptions,
) -> Result<(CascadeOutcome, Vec<(String, NodeEnsemble)>)> {
    let mut trace = Vec::new();
    let out = eval_impl(x, t, spec, rng, opts, Some(&mut trace))?;
    Ok((out, trace))
}

pub fn eval_xi(x: Vec3, t: f64, spec: &ProblemSpec, rng: RngStream, depth_cap: u32) -> Result<CascadeOutcome> {
    if spec.mode != Mode::Xi {
        return Err(Error::domain("eval_xi called on a problem in Upsilon mode"));
    }
    eval_cascade(x, t, spec, rng, EvalOptions { depth_cap, ..Default::default() })
}

pub fn eval_upsilon(x: Vec3, t: f64, spec: &ProblemSpec, rng: RngStream, depth_cap: u32) -> Result<CascadeOutcome> {
    if spec.mode != Mode::Upsilon {
        return Err(Error::domain("eval_upsilon called on a problem in Xi mode"));
    }
    eval_cascade(x, t, spec, rng, EvalOptions { depth_cap, ..Default::default() })
}

fn eval_impl(
    x: Vec3,
    t: f64,
    spec: &ProblemSpec,
    root_rng: RngStream,
    opts: EvalOptions,
    mut trace: Option<&mut Vec<(String, NodeEnsemble)>>,
) -> Result<CascadeOutcome> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("cascade needs t > 0, got {t}")));
    }
    if !x.is_finite() {
        return Err(Error::domain(format!("cascade needs a finite start point, got {x:?}")));
    }
    let data_zero = spec.data.u0.is_zero() && spec.data.g.is_zero();
    let mut arena: Vec<Node> = Vec::new();
    // (node index, start location, birth time, depth, stream)
    let mut stack: Vec<(usize, Vec3, f64, u32, RngStream)> = Vec::new();
    arena.push(Node { parent: 0, bit: 0, data: Vec3::ZERO, kind: Kind::Leaf, value: Vec3::ZERO });
    stack.push((0, x, 0.0, 0, root_rng));
    let mut out = CascadeOutcome { value: Vec3::ZERO, nodes: 0, max_depth: 0, truncated: false, kappa_counts: [0; 5] };

    while let Some((i, xs, s, depth, mut rng)) = stack.pop() {
        out.nodes += 1;
        out.max_depth = out.max_depth.max(depth);
        let remaining = t - s;
        let data = if data_zero {
            Vec3::ZERO
        } else {
            match spec.mode {
                Mode::Xi => spec.m0(xs, remaining),
                Mode::Upsilon => {
                    let mut side = rng.side(0);
                    sample_hbm_endpoint(xs, remaining, &spec.pair, spec.nu, &mut side).map(|v| spec.chi0(v))
                }
            }
            .map_err(|e| data_error(&arena, i, rng.draws(), e.to_string()))?
        };
        arena[i].data = data;
        if depth >= opts.depth_cap {
            out.truncated = true;
            continue;
        }
        let ens = sample_ensemble(xs, s, depth, spec, &mut rng).map_err(|e| data_error(&arena, i, rng.draws(), e.to_string()))?;
        out.kappa_counts[(ens.kappa - 1) as usize] += 1;
        if let Some(tr) = trace.as_deref_mut() {
            tr.push((node_path(&arena, i), ens));
        }
        if ens.tau > remaining {
            continue;
        }
        if ens.kappa <= 3 {
            let (m, _) = cascade_multipliers(&spec.pair, spec.nu, xs).map_err(|e| data_error(&arena, i, rng.draws(), e.to_string()))?;
            let mult = 11.0 * m / spec.p;
            let base = arena.len();
            let children = [base, base + 1];
            for bit in 0..2u8 {
                arena.push(Node { parent: i, bit, data: Vec3::ZERO, kind: Kind::Leaf, value: Vec3::ZERO });
            }
            arena[i].kind = Kind::Branch { kappa: ens.kappa, z: ens.z, mult, children };
            for bit in (0..2u8).rev() {
                let stream_bit = if opts.swap_children { 1 - bit } else { bit };
                stack.push((children[bit as usize], ens.x, s + ens.tau, depth + 1, rng.child(stream_bit)));
            }
        } else {
            let tf = remaining - ens.tau;
            let phi = spec.phi(ens.x, tf).map_err(|m| data_error(&arena, i, rng.draws(), m))?;
            let (_, mt) = cascade_multipliers(&spec.pair, spec.nu, xs).map_err(|e| data_error(&arena, i, rng.draws(), e.to_string()))?;
            let c = apply_c(ens.kappa, ens.z, phi).map_err(|e| data_error(&arena, i, rng.draws(), e.to_string()))?;
            arena[i].data = data + c * (4.0 * mt / (1.0 - spec.p));
        }
    }

    for i in (0..arena.len()).rev() {
        let v = match arena[i].kind {
            Kind::Leaf => arena[i].data,
            Kind::Branch { kappa, z, mult, children } => {
                let a = arena[children[0]].value;
                let b = arena[children[1]].value;
                arena[i].data + apply_b(kappa, z, a, b)? * mult
            }
        };
        if !v.is_finite() {
            return Err(data_error(&arena, i, 0, format!("non-finite node value {v:?}")));
        }
        arena[i].value = v;
    }
    out.value = arena[0].value;
    Ok(out)
}

/// `|value| ≤ ε`, which holds surely under the theorem hypotheses.
pub fn within_bound(out: &CascadeOutcome, epsilon: f64) -> bool {
    out.value.norm() <= epsilon * (1.0 + 1e-12)
}
