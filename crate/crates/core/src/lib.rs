//! Numerical laboratory for compact Lorentzian tori with periodic metrics.
//!
//! The crate works on the Abelian cover `ℝⁿ` of an n-torus (n ∈ {2, 3}) and
//! provides:
//!
//! * [`cone_kit`]: finitely generated convex cones, duals, boundary distances,
//!   ε-subcones and compactness witnesses.
//! * [`spacetime`]: periodic Lorentzian metric presets with time orientation
//!   and auxiliary Riemannian metric, pointwise causal classification.
//! * [`curves`]: polygonal worldlines, lengths, rotation vectors, geodesic
//!   shooting and seeded random causal walks.
//! * [`reach`]: grid causal reachability, viciousness, the fill constant and
//!   the homological distance function `f(h)`.
//! * [`timesep`]: time separation by path maximization with a grid oracle.
//! * [`stable`]: stable norm and stable time cone estimation.
//! * [`certify`]: class A certification, transversal forms, temporal functions,
//!   SCTP level-set checks and the coarse-Lipschitz harness.


pub mod certify;
pub mod cone_kit;
pub mod curves;

mod error;
pub mod linalg;
pub mod reach;

pub mod spacetime;
pub mod stable;
pub mod timesep;



pub use error::{LabError, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator used by every sampler in the crate.
pub type LabRng = ChaCha8Rng;

/// Builds the generator for `seed`, optionally split into an independent
/// stream for sub-task `stream`.
pub fn rng_for(seed: u64, stream: u64) -> LabRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
