//! Experiment drivers: clutterbox, clutter heatmaps, the sphere-perturbation
//! distance study, run-index cost study and throughput benchmarks.
//!
//! Every driver is deterministic for a given seed regardless of the rayon
//! pool size, and writes plain CSV plus a `manifest.json` describing the run.

pub mod bench;
pub mod clutter;
pub mod clutterbox;
pub mod distance_study;
pub mod output;
pub mod runindex_study;

use serde::Serialize;

use crate::descriptor::{kernels, MismatchCounts, QuicciImage};
use crate::error::{Error, Result};

/// The three ways of comparing a needle image with a haystack image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceFunction {
    Hamming,
    ClutterResistant,
    WeightedHamming,
}

impl DistanceFunction {
    pub const ALL: [DistanceFunction; 3] =
        [DistanceFunction::Hamming, DistanceFunction::ClutterResistant, DistanceFunction::WeightedHamming];

    pub fn name(self) -> &'static str {
        match self {
            DistanceFunction::Hamming => "hamming",
            DistanceFunction::ClutterResistant => "clutter_resistant",
            DistanceFunction::WeightedHamming => "weighted_hamming",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == name)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown distance function {name:?}")))
    }

    /// Distance between two images of the same shape.
    #[inline]
    pub fn eval(self, needle: &QuicciImage, haystack: &QuicciImage) -> f64 {
        debug_assert!(needle.same_shape(haystack));
        let (a, b) = (needle.words(), haystack.words());
        match self {
            DistanceFunction::Hamming => kernels::xor_popcount(a, b) as f64,
            DistanceFunction::ClutterResistant => kernels::andnot_popcount(a, b) as f64,
            DistanceFunction::WeightedHamming => MismatchCounts {
                missing: kernels::andnot_popcount(a, b),
                extra: kernels::andnot_popcount(b, a),
                needle_set: kernels::popcount(a),
                total_bits: needle.bit_len() as u32,
            }
            .weighted(needle.width() as u32),
        }
    }
}
