//! Kinetically constrained spin models on finite trees and on the
//! North-East triangle.
//!
//! The crate covers the bootstrap maps and their recursions, the scalar
//! threshold analysis of the one-generation map `g_p`, exact and variational
//! spectral gaps of finite-volume generators, continuous-time Glauber
//! simulation and the North-East quantities built on oriented bootstrap.

pub mod bootstrap;
pub mod error;
pub mod graph;
pub mod northeast;
pub mod sim;
pub mod spectral;
pub mod threshold;

pub use error::{Error, Result};
pub use graph::{
    build_graph, build_graph_with_cap, constraint_satisfied, sample_config, Boundary, Family,
    GraphKind, ModelSpec, SiteGraph, SpinConfig,
};

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

/// Independent random stream number `stream` derived from `seed`.
///
/// Replicas, samples and sweep points all draw from their own stream so
/// results do not depend on scheduling order.
pub fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
