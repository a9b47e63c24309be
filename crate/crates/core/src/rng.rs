//! Tree-addressed random streams.
//!
//! A cascade is keyed by `SHA-256(master seed, point key, cascade index)`.
//! Every tree node gets its own ChaCha8 stream under that key, selected by a
//! 64-bit hash of the node's path from the root. Streams therefore depend only
//! on `(key, path)`, never on the order in which nodes are visited.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use sha2::{Digest, Sha256};

use crate::vecgeom::Vec3;

const ROOT_PATH: u64 = 0x6a09_e667_f3bc_c908;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Path hash of child `bit` of a node with path hash `parent`.
pub fn child_path(parent: u64, bit: u8) -> u64 {
    mix64(parent.rotate_left(17) ^ mix64(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(bit as u64 + 1)))
}

/// 256-bit key for one cascade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CascadeKey(pub [u8; 32]);

impl CascadeKey {
    pub fn new(master_seed: u64, point_key: u64, cascade_index: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"nscascade/v1");
        h.update(master_seed.to_le_bytes());
        h.update(point_key.to_le_bytes());
        h.update(cascade_index.to_le_bytes());
        let out = h.finalize();
        let mut k = [0u8; 32];
        k.copy_from_slice(&out);
        CascadeKey(k)
    }

    /// Key for a standalone stream (diagnostics, tests).
    pub fn from_seed(seed: u64) -> Self {
        CascadeKey::new(seed, u64::MAX, u64::MAX)
    }
}

/// Key for a space-time point derived from the bit patterns of its coordinates,
/// so a point's stream does not depend on its position in a grid.
pub fn point_key(x: Vec3, t: f64) -> u64 {
    let mut h = Sha256::new();
    for v in [x.x1, x.x2, x.x3, t] {
        // normalize -0.0 so that equal points hash equally
        let v = if v == 0.0 { 0.0 } else { v };
        h.update(v.to_bits().to_le_bytes());
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

/// Random stream of one tree node.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: CascadeKey,
    path: u64,
    depth: u32,
    rng: ChaCha8Rng,
    draws: u64,
}

impl RngStream {
    pub fn root(key: CascadeKey) -> Self {
        Self::at(key, ROOT_PATH, 0)
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::root(CascadeKey::from_seed(seed))
    }

    fn at(key: CascadeKey, path: u64, depth: u32) -> Self {
        let mut rng = ChaCha8Rng::from_seed(key.0);
        rng.set_stream(path);
        RngStream { key, path, depth, rng, draws: 0 }
    }

    /// Stream of child `bit` (0 or 1).
    pub fn child(&self, bit: u8) -> Self {
        Self::at(self.key, child_path(self.path, bit), self.depth + 1)
    }

    /// An independent auxiliary stream at the same node (e.g. for endpoint draws).
    pub fn side(&self, tag: u8) -> Self {
        Self::at(self.key, child_path(self.path, 2 + tag), self.depth)
    }

    pub fn path_hash(&self) -> u64 {
        self.path
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Number of 64-bit draws taken so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        loop {
            let u = ((self.next_u64() >> 11) as f64) * (1.0 / (1u64 << 53) as f64);
            if u > 0.0 {
                return u;
            }
        }
    }

    pub fn normal(&mut self) -> f64 {
        self.sample(StandardNormal)
    }

    pub fn exp1(&mut self) -> f64 {
        self.sample(Exp1)
    }

    /// Uniform direction on the unit sphere.
    pub fn direction(&mut self) -> Vec3 {
        let z = 2.0 * self.uniform() - 1.0;
        let phi = 2.0 * std::f64::consts::PI * self.uniform();
        let s = (1.0 - z * z).max(0.0).sqrt();
        Vec3::new(s * phi.cos(), s * phi.sin(), z)
    }

    pub fn normal3(&mut self) -> Vec3 {
        Vec3::new(self.normal(), self.normal(), self.normal())
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.draws += 1;
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.draws += 1;
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.draws += 1;
        self.rng.fill_bytes(dst)
    }
}
