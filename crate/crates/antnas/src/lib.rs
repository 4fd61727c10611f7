//! Multi-colony architecture search for recurrent networks.
//!
//! Colonies of foraging agents walk a continuous 3D pheromone volume from
//! input anchors to output anchors; their paths are clustered into graph
//! genomes, compiled to recurrent networks, trained by backpropagation
//! through time, and scored by validation MSE. Colony-level traits (ant
//! count, evaporation rate, mortality rate) are exchanged between
//! asynchronously running colonies through a particle-swarm update held by
//! a shared environment role.

pub mod ants;
pub mod colony;
pub mod config;
pub mod data;
pub mod error;
pub mod genome;
pub mod model;
pub mod nn;
pub mod orchestrator;
pub mod pso;
pub mod space;

pub use error::{Error, Result};

/// Splitmix64 round; used to derive independent RNG streams from one seed.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Derive a child seed from a master seed, a role tag, and an index.
///
/// Every stochastic component (colony foraging, candidate training, swarm
/// updates, data synthesis) draws from its own stream so that scheduling
/// differences in one component never perturb another.
pub fn derive_seed(master: u64, tag: u64, idx: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(tag)) ^ idx)
}
