//! Long-range percolation on the hierarchical lattice.
//!
//! Vertices of `H_L^d` restricted to the box `Λ_n` are the integers
//! `0..L^{nd}` read in mixed radix: digit tuple `i` (base `L^d`) is the
//! `i`-th hierarchical coordinate, lowest index least significant. Every
//! block of level `ℓ` is therefore a contiguous index range of length
//! `L^{ℓd}`, which most of this crate leans on.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coarse;
pub mod error;
pub mod estimate;
pub mod kernel;
pub mod kv;
pub mod lattice;
pub mod renorm;
pub mod rng;
pub mod sampler;
mod unionfind;

pub use error::{Error, Result};
pub use kernel::{FamilyKind, Kernel, KernelFamily, KernelForm};
pub use lattice::{BlockId, LatticeParams, Vertex};
pub use sampler::{ClusterForest, ClusterStats, Edge, EdgeList, SampleMode, SampleSpec};

/// Artifact version embedded in every output header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
