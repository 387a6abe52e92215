//! Sampling-based space-time empowerment for deterministic 2D navigation:
//! reachable-set volume estimation over obstacle maps, a multiplicative
//! empowered reward, and a from-scratch policy-gradient training and
//! evaluation stack around it.

pub mod config;
pub mod dynamics;
pub mod empowerment;
pub mod envs;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod reward;
pub mod rl;
pub mod rng;
pub mod snapshot;
pub mod vec2;
pub mod world;

pub use error::{Error, Result};
pub use vec2::Vec2;
