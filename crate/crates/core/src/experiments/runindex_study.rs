//! Cost of the column-run inverted index as needle density grows, measured
//! against a weighted Hamming linear scan over the same images.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::descriptor::{weighted_hamming_distance, Provenance, QuicciImage};
use crate::error::{Error, Result};
use crate::runindex::{build_run_index, RunInvertedIndex, WeightedResult};
use crate::synth::{random_image_with_popcount, random_mixed_density_image};

#[derive(Debug, Clone, Serialize)]
pub struct RunIndexStudyConfig {
    pub corpus_size: usize,
    pub width: usize,
    pub height: usize,
    /// Exact set-bit counts of the needles, one row of output each.
    pub needle_bits: Vec<usize>,
    pub needles_per_bucket: usize,
    pub k: usize,
    pub seed: u64,
}

impl Default for RunIndexStudyConfig {
    fn default() -> Self {
        Self {
            corpus_size: 10_000,
            width: 64,
            height: 64,
            needle_bits: vec![4, 8, 16, 32, 128, 512, 1024, 2048],
            needles_per_bucket: 20,
            k: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunIndexStudyRow {
    pub needle_set_bits: usize,
    pub needles: usize,
    pub corpus: usize,
    pub mean_candidate_fraction: f64,
    pub mean_lists_touched: f64,
    pub mean_postings_read: f64,
    pub mean_index_seconds: f64,
    pub mean_scan_seconds: f64,
    /// Needles whose index top-k equalled the linear scan top-k.
    pub exact_matches: usize,
}

/// Weighted Hamming top-k by scanning every image, ties broken by provenance.
pub fn linear_scan_weighted(
    images: &[QuicciImage],
    provenance: &[Provenance],
    needle: &QuicciImage,
    k: usize,
) -> Result<Vec<WeightedResult>> {
    let mut all = images
        .iter()
        .zip(provenance)
        .enumerate()
        .map(|(index, (image, &provenance))| {
            Ok(WeightedResult { index, provenance, distance: weighted_hamming_distance(needle, image)? })
        })
        .collect::<Result<Vec<_>>>()?;
    all.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.provenance.cmp(&b.provenance)));
    all.truncate(k);
    Ok(all)
}

fn same_results(a: &[WeightedResult], b: &[WeightedResult]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.provenance == y.provenance && x.distance == y.distance)
}

/// Measures `index` against a linear scan of `images` for needles of each
/// configured density.
pub fn study_index(
    index: &RunInvertedIndex,
    images: &[QuicciImage],
    provenance: &[Provenance],
    config: &RunIndexStudyConfig,
) -> Result<Vec<RunIndexStudyRow>> {
    let bits = config.width * config.height;
    if let Some(&b) = config.needle_bits.iter().find(|&&b| b > bits) {
        return Err(Error::InvalidConfig(format!("needle with {b} set bits does not fit {bits} bits")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x6e65_6564_6c65);
    let mut rows = Vec::with_capacity(config.needle_bits.len());
    for &set_bits in &config.needle_bits {
        let mut row = RunIndexStudyRow {
            needle_set_bits: set_bits,
            needles: config.needles_per_bucket,
            corpus: images.len(),
            mean_candidate_fraction: 0.0,
            mean_lists_touched: 0.0,
            mean_postings_read: 0.0,
            mean_index_seconds: 0.0,
            mean_scan_seconds: 0.0,
            exact_matches: 0,
        };
        for _ in 0..config.needles_per_bucket {
            let needle = random_image_with_popcount(&mut rng, config.width, config.height, set_bits);
            let start = Instant::now();
            let (found, stats) = index.query(&needle, config.k)?;
            row.mean_index_seconds += start.elapsed().as_secs_f64();
            let start = Instant::now();
            let expected = linear_scan_weighted(images, provenance, &needle, config.k)?;
            row.mean_scan_seconds += start.elapsed().as_secs_f64();
            // an all-zero needle has no defined ranking and yields nothing
            if same_results(&found, &expected) || (set_bits == 0 && found.is_empty()) {
                row.exact_matches += 1;
            }
            row.mean_candidate_fraction += stats.candidate_fraction();
            row.mean_lists_touched += stats.lists_touched as f64;
            row.mean_postings_read += stats.postings_read as f64;
        }
        let n = config.needles_per_bucket.max(1) as f64;
        row.mean_candidate_fraction /= n;
        row.mean_lists_touched /= n;
        row.mean_postings_read /= n;
        row.mean_index_seconds /= n;
        row.mean_scan_seconds /= n;
        rows.push(row);
    }
    Ok(rows)
}

/// Random mixed-density corpus of `config.corpus_size` images.
pub fn synthetic_corpus(config: &RunIndexStudyConfig) -> (Vec<QuicciImage>, Vec<Provenance>) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let images = (0..config.corpus_size).map(|_| random_mixed_density_image(&mut rng, config.width, config.height)).collect();
    let provenance = (0..config.corpus_size as u32).map(|i| Provenance::new(0, i)).collect();
    (images, provenance)
}

/// Builds the index over `images` and runs [`study_index`].
pub fn run_runindex_study(
    images: Vec<QuicciImage>,
    provenance: Vec<Provenance>,
    config: &RunIndexStudyConfig,
) -> Result<Vec<RunIndexStudyRow>> {
    if config.k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let index = build_run_index(config.width, config.height, images.clone(), provenance.clone())?;
    study_index(&index, &images, &provenance, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_study_is_exact_and_dense_needles_touch_most_images() {
        let config = RunIndexStudyConfig {
            corpus_size: 500,
            needle_bits: vec![0, 8, 1024],
            needles_per_bucket: 4,
            k: 10,
            ..Default::default()
        };
        let (images, prov) = synthetic_corpus(&config);
        let rows = run_runindex_study(images, prov, &config).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.exact_matches == 4));
        assert_eq!(rows[0].mean_candidate_fraction, 0.0);
        assert!(rows[2].mean_candidate_fraction > rows[1].mean_candidate_fraction);
        assert!(rows[2].mean_candidate_fraction > 0.9);
    }
}
