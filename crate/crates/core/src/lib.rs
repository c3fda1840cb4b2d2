//! QUICCI local shape descriptors and Hamming-distance indexing.
//!
//! * [`mesh`]: triangle meshes, IO, placement and scene assembly.
//! * [`intersection`]: circle/mesh intersection counting.
//! * [`descriptor`]: the QUICCI bit image and its distance functions.
//! * [`hamming_tree`]: k-nearest-neighbour index over bit strings.
//! * [`runindex`]: column-run inverted index for weighted Hamming queries.
//! * [`experiments`]: clutterbox, distance study and throughput benchmarks.

pub mod descriptor;
pub mod error;
pub mod experiments;
pub mod hamming_tree;
pub mod intersection;
pub mod mesh;
pub mod runindex;
pub mod synth;

pub use error::{Error, Result};
