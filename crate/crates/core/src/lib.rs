//! Stochastic-cascade Monte Carlo for the 3-D incompressible Navier-Stokes
//! equations, `u(x,t) = h(x)·E[Ξ(t)]`, with a Picard-iteration comparator.

pub mod cascade;
pub mod config;
pub mod data;
pub mod error;
pub mod estimator;
pub mod heat;
pub mod kernels;
pub mod oracle;
pub mod quad;
pub mod rng;
pub mod samplers;
pub mod vecgeom;
pub mod verify;

pub use error::{Error, Result};
pub use heat::Mat3;
pub use vecgeom::Vec3;
