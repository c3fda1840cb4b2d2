//! The QUICCI bit image, its distance functions and the packed on-disk form.

mod image;
pub mod io;
pub mod kernels;

use serde::{Deserialize, Serialize};

pub use image::{QuicciImage, MAX_IMAGE_BITS};
pub(crate) use image::words_for;

use crate::error::{Error, Result};
use crate::intersection::IntersectionCountGrid;

/// Identifies where a descriptor came from: the source object and the vertex
/// within it. Ordering is `(object_id, vertex_index)` and breaks distance ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub object_id: u32,
    pub vertex_index: u32,
}

impl Provenance {
    pub const fn new(object_id: u32, vertex_index: u32) -> Self {
        Self { object_id, vertex_index }
    }
}

/// Turns an intersection-count grid into a QUICCI image: a bit is set where a
/// circle's count differs from that of its next larger neighbour.
pub fn quicci_from_grid(grid: &IntersectionCountGrid) -> QuicciImage {
    let circles = grid.config().circles_per_layer;
    let layers = grid.config().layer_count;
    let mut image = QuicciImage::zeroed(circles - 1, layers).expect("config validated on construction");
    for layer in 0..layers {
        let row = grid.row(layer);
        for c in 0..circles - 1 {
            if row[c + 1] != row[c] {
                image.set(layer, c, true);
            }
        }
    }
    image
}

fn check_same_shape(a: &QuicciImage, b: &QuicciImage) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: format!("{}x{}", a.width(), a.height()),
            actual: format!("{}x{}", b.width(), b.height()),
        })
    }
}

pub fn hamming_distance(a: &QuicciImage, b: &QuicciImage) -> Result<u32> {
    check_same_shape(a, b)?;
    Ok(kernels::xor_popcount(a.words(), b.words()))
}

/// Bits set in the needle but missing from the haystack. Asymmetric: bits the
/// haystack adds on top of the needle cost nothing, which is what makes the
/// measure tolerant of clutter.
pub fn clutter_resistant_distance(needle: &QuicciImage, haystack: &QuicciImage) -> Result<u32> {
    check_same_shape(needle, haystack)?;
    Ok(kernels::andnot_popcount(needle.words(), haystack.words()))
}

/// The two kinds of mismatch between a needle and a haystack image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MismatchCounts {
    /// Set in the needle, unset in the haystack.
    pub missing: u32,
    /// Unset in the needle, set in the haystack.
    pub extra: u32,
    /// Set bits in the needle.
    pub needle_set: u32,
    /// Total bits per image.
    pub total_bits: u32,
}

pub fn mismatch_counts(needle: &QuicciImage, haystack: &QuicciImage) -> Result<MismatchCounts> {
    check_same_shape(needle, haystack)?;
    Ok(MismatchCounts {
        missing: kernels::andnot_popcount(needle.words(), haystack.words()),
        extra: kernels::andnot_popcount(haystack.words(), needle.words()),
        needle_set: needle.popcount(),
        total_bits: needle.bit_len() as u32,
    })
}

/// What the second weighted-Hamming denominator subtracts the needle's set
/// bits from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnsetBasis {
    /// All `width * height` bits of the image.
    TotalBits,
    /// The image width only.
    Width,
}

/// Basis used by [`weighted_hamming_distance`]. `Width` can go negative for any
/// non-trivial needle, so the total bit count is used.
pub const WEIGHTED_HAMMING_UNSET_BASIS: UnsetBasis = UnsetBasis::TotalBits;

impl MismatchCounts {
    pub fn weighted(&self, width: u32) -> f64 {
        let basis = match WEIGHTED_HAMMING_UNSET_BASIS {
            UnsetBasis::TotalBits => self.total_bits as i64,
            UnsetBasis::Width => width as i64,
        };
        let set_norm = (self.needle_set as i64).max(1) as f64;
        let unset_norm = (basis - self.needle_set as i64).max(1) as f64;
        self.missing as f64 / set_norm + self.extra as f64 / unset_norm
    }

    /// The missing-bits term alone.
    pub fn weighted_missing_term(&self) -> f64 {
        self.missing as f64 / (self.needle_set.max(1)) as f64
    }
}

/// Mismatches normalised separately by the needle's set and unset bit
/// counts. Lies in `[0, 2]`.
pub fn weighted_hamming_distance(needle: &QuicciImage, haystack: &QuicciImage) -> Result<f64> {
    Ok(mismatch_counts(needle, haystack)?.weighted(needle.width() as u32))
}

/// Set-bit counts of the string's suffixes after removing `ℓ` leading chunks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitCountProfile {
    pub suffix_counts: Vec<u32>,
    pub chunk_bits: usize,
}

impl BitCountProfile {
    /// Number of chunks (tree levels) the string is cut into.
    pub fn levels(&self) -> usize {
        self.suffix_counts.len() - 1
    }

    /// Set bits inside chunk `level`.
    #[inline]
    pub fn chunk_count(&self, level: usize) -> u32 {
        self.suffix_counts[level] - self.suffix_counts[level + 1]
    }
}

pub fn bit_count_profile(image: &QuicciImage, chunk_bits: usize) -> BitCountProfile {
    profile_of_words(image.words(), image.bit_len(), chunk_bits)
}

pub(crate) fn profile_of_words(words: &[u64], bits: usize, chunk_bits: usize) -> BitCountProfile {
    assert!(chunk_bits >= 1, "chunk_bits must be positive");
    let levels = bits.div_ceil(chunk_bits);
    let mut suffix_counts = vec![0u32; levels + 1];
    for level in (0..levels).rev() {
        let start = level * chunk_bits;
        let end = (start + chunk_bits).min(bits);
        suffix_counts[level] = suffix_counts[level + 1] + kernels::popcount_range(words, start, end);
    }
    BitCountProfile { suffix_counts, chunk_bits }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intersection::DescriptorConfig;
    use proptest::prelude::*;

    fn row_image(bits: &str) -> QuicciImage {
        QuicciImage::from_rows(&[bits]).unwrap()
    }

    fn grid_with_row(counts: &[u32]) -> IntersectionCountGrid {
        let config = DescriptorConfig::new(counts.len(), 1, 1.0).unwrap();
        IntersectionCountGrid::from_counts(config, counts.to_vec()).unwrap()
    }

    #[test]
    fn quicci_row_examples() {
        assert_eq!(quicci_from_grid(&grid_with_row(&[0, 0, 2, 2, 2])), row_image("0100"));
        assert_eq!(quicci_from_grid(&grid_with_row(&[1, 3, 3, 1, 2])), row_image("1011"));
        assert_eq!(quicci_from_grid(&grid_with_row(&[0; 5])).popcount(), 0);
    }

    #[test]
    fn distance_examples() {
        let a = row_image("1010");
        let b = row_image("0110");
        assert_eq!(hamming_distance(&a, &b).unwrap(), 2);
        assert_eq!(hamming_distance(&a, &a).unwrap(), 0);

        let zero = QuicciImage::zeroed(8, 8).unwrap();
        let mut k = zero.clone();
        for i in [3, 9, 40] {
            k.set_flat(i, true);
        }
        assert_eq!(hamming_distance(&zero, &k).unwrap(), 3);
        assert_eq!(clutter_resistant_distance(&zero, &k).unwrap(), 0);
        assert_eq!(weighted_hamming_distance(&zero, &k).unwrap(), 3.0 / 64.0);
    }

    #[test]
    fn clutter_distance_counts_only_missing_needle_bits() {
        let mut needle = QuicciImage::zeroed(16, 4).unwrap();
        for i in [1, 5, 9, 20, 33] {
            needle.set_flat(i, true);
        }
        let mut hay = needle.clone();
        hay.set_flat(5, false);
        hay.set_flat(33, false);
        for i in [0, 2, 3, 40, 41, 50, 63] {
            hay.set_flat(i, true);
        }
        assert_eq!(clutter_resistant_distance(&needle, &hay).unwrap(), 2);
        assert_eq!(clutter_resistant_distance(&needle, &needle).unwrap(), 0);
    }

    #[test]
    fn weighted_missing_one_of_four() {
        let needle = row_image("11110000");
        let hay = row_image("11100000");
        assert_eq!(weighted_hamming_distance(&needle, &hay).unwrap(), 0.25);
        assert_eq!(weighted_hamming_distance(&needle, &needle).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = QuicciImage::zeroed(4, 4).unwrap();
        let b = QuicciImage::zeroed(2, 8).unwrap();
        assert!(hamming_distance(&a, &b).is_err());
        assert!(clutter_resistant_distance(&a, &b).is_err());
        assert!(weighted_hamming_distance(&a, &b).is_err());
    }

    #[test]
    fn profile_examples() {
        let zero = QuicciImage::zeroed(64, 64).unwrap();
        let p = bit_count_profile(&zero, 128);
        assert_eq!(p.suffix_counts.len(), 33);
        assert!(p.suffix_counts.iter().all(|&c| c == 0));

        let img = row_image("1101001110");
        let p = bit_count_profile(&img, 4);
        // chunks: 1101 | 0011 | 10
        assert_eq!(p.suffix_counts, vec![6, 3, 1, 0]);
        assert_eq!(p.chunk_count(1), 2);
    }

    fn arb_image(width: usize, height: usize) -> impl Strategy<Value = QuicciImage> {
        let words = words_for(width * height);
        proptest::collection::vec(any::<u64>(), words)
            .prop_map(move |w| QuicciImage::from_words_masked(width, height, w).unwrap())
    }

    proptest! {
        #[test]
        fn hamming_splits_into_two_clutter_distances(a in arb_image(63, 5), b in arb_image(63, 5)) {
            let h = hamming_distance(&a, &b).unwrap();
            let ab = clutter_resistant_distance(&a, &b).unwrap();
            let ba = clutter_resistant_distance(&b, &a).unwrap();
            prop_assert_eq!(h, ab + ba);
            let m = mismatch_counts(&a, &b).unwrap();
            prop_assert_eq!(m.missing + m.extra, h);
            let w = weighted_hamming_distance(&a, &b).unwrap();
            prop_assert!((0.0..=2.0).contains(&w));
        }

        #[test]
        fn hamming_is_a_metric(a in arb_image(10, 7), b in arb_image(10, 7), c in arb_image(10, 7)) {
            let ab = hamming_distance(&a, &b).unwrap();
            prop_assert_eq!(ab, hamming_distance(&b, &a).unwrap());
            prop_assert!(ab <= hamming_distance(&a, &c).unwrap() + hamming_distance(&c, &b).unwrap());
            prop_assert_eq!(ab == 0, a == b);
        }

        #[test]
        fn profile_head_is_total_popcount(a in arb_image(64, 8), chunk in 1usize..200) {
            let p = bit_count_profile(&a, chunk);
            let zero = QuicciImage::zeroed(64, 8).unwrap();
            prop_assert_eq!(p.suffix_counts[0], hamming_distance(&a, &zero).unwrap());
            prop_assert!(p.suffix_counts.windows(2).all(|w| w[0] >= w[1]));
            prop_assert_eq!(*p.suffix_counts.last().unwrap(), 0);
            for (l, &s) in p.suffix_counts.iter().enumerate() {
                let expect = (l * chunk..a.bit_len()).filter(|&i| a.get_flat(i)).count() as u32;
                prop_assert_eq!(s, expect);
            }
        }
    }
}
