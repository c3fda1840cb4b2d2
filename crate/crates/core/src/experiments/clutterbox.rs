//! The clutterbox experiment: how well does a descriptor of a clean object
//! find its counterpart once other objects crowd the scene?
//!
//! One run draws `max(object_counts)` meshes, fits each into the unit
//! sphere, takes the first as the reference and computes its descriptors
//! ({RD}). Every object then gets a random rigid placement inside a cube. For
//! each object count `n` the scene made of the first `n` placed objects is
//! described at all its unique vertices ({CD}), and every reference
//! descriptor is ranked against the whole of {CD}; the rank of its true
//! counterpart goes into the histogram for `n`.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::clutter::{ClutterEstimator, ClutterHeatmap, DEFAULT_CLUTTER_SAMPLES};
use super::DistanceFunction;
use crate::descriptor::QuicciImage;
use crate::error::{Error, Result};
use crate::intersection::{DescriptorConfig, DescriptorGenerator};
use crate::mesh::{concatenate_scene, Mesh, OrientedPoint};

/// How a candidate at exactly the counterpart's distance is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum TieBreak {
    /// Equal distances never push the counterpart down.
    #[default]
    Favourable,
    /// Equal distances earlier in scene vertex order rank ahead.
    InsertionOrder,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClutterboxConfig {
    pub cube_edge: f64,
    pub object_counts: Vec<usize>,
    pub support_radius: f64,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub distance: DistanceFunction,
    pub tie_break: TieBreak,
    /// Ranks at or beyond this are only counted, not binned.
    pub rank_cap: usize,
    /// Leave every object where `fit_unit_sphere` put it.
    pub identity_placement: bool,
    /// Monte-Carlo samples per clutter estimate; 0 skips the heatmap.
    pub clutter_samples: usize,
    pub fraction_bins: usize,
}

impl Default for ClutterboxConfig {
    fn default() -> Self {
        Self {
            cube_edge: 3.0,
            object_counts: vec![1, 5, 10],
            support_radius: 0.3,
            width: 63,
            height: 64,
            seed: 0,
            distance: DistanceFunction::ClutterResistant,
            tie_break: TieBreak::Favourable,
            rank_cap: 4096,
            identity_placement: false,
            clutter_samples: DEFAULT_CLUTTER_SAMPLES,
            fraction_bins: 20,
        }
    }
}

impl ClutterboxConfig {
    pub fn validate(&self) -> Result<()> {
        if self.object_counts.is_empty() || self.object_counts[0] == 0 {
            return Err(Error::InvalidConfig("object counts must be non-empty and at least 1".into()));
        }
        if self.object_counts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("object counts must be strictly ascending".into()));
        }
        if !self.identity_placement && !(self.cube_edge >= 2.0) {
            return Err(Error::CubeTooSmall(self.cube_edge));
        }
        if self.rank_cap == 0 || self.fraction_bins == 0 {
            return Err(Error::InvalidConfig("rank cap and fraction bins must be positive".into()));
        }
        DescriptorConfig::for_image(self.width, self.height, self.support_radius)?;
        Ok(())
    }

    fn descriptor_config(&self) -> DescriptorConfig {
        DescriptorConfig::for_image(self.width, self.height, self.support_radius).expect("validated")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankHistogram {
    pub cap: usize,
    pub bins: Vec<u64>,
    /// Queries whose rank reached the cap.
    pub overflow: u64,
    pub total_queries: u64,
    /// Sum of all ranks, including capped ones.
    pub rank_sum: u64,
}

impl RankHistogram {
    pub fn new(cap: usize) -> Self {
        Self { cap, bins: vec![0; cap], overflow: 0, total_queries: 0, rank_sum: 0 }
    }

    pub fn add(&mut self, rank: usize) {
        self.total_queries += 1;
        self.rank_sum += rank as u64;
        match self.bins.get_mut(rank) {
            Some(b) => *b += 1,
            None => self.overflow += 1,
        }
    }

    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.cap, other.cap);
        self.bins.iter_mut().zip(&other.bins).for_each(|(a, b)| *a += b);
        self.overflow += other.overflow;
        self.total_queries += other.total_queries;
        self.rank_sum += other.rank_sum;
    }

    pub fn mean_rank(&self) -> f64 {
        if self.total_queries == 0 {
            0.0
        } else {
            self.rank_sum as f64 / self.total_queries as f64
        }
    }

    pub fn fraction_at_rank_zero(&self) -> f64 {
        if self.total_queries == 0 {
            0.0
        } else {
            self.bins[0] as f64 / self.total_queries as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClutterboxOutcome {
    pub object_counts: Vec<usize>,
    /// One per object count.
    pub histograms: Vec<RankHistogram>,
    /// One per object count; empty when clutter estimation is off.
    pub heatmaps: Vec<ClutterHeatmap>,
    pub runs: usize,
}

impl ClutterboxOutcome {
    fn empty(config: &ClutterboxConfig) -> Self {
        let heatmaps = if config.clutter_samples > 0 {
            config.object_counts.iter().map(|_| ClutterHeatmap::new(config.fraction_bins)).collect()
        } else {
            Vec::new()
        };
        Self {
            object_counts: config.object_counts.clone(),
            histograms: config.object_counts.iter().map(|_| RankHistogram::new(config.rank_cap)).collect(),
            heatmaps,
            runs: 0,
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.histograms.iter_mut().zip(&other.histograms).for_each(|(a, b)| a.merge(b));
        self.heatmaps.iter_mut().zip(&other.heatmaps).for_each(|(a, b)| a.merge(b));
        self.runs += other.runs;
    }
}

/// Rank of `cd[correct]` among all of `cd` for the given needle.
pub fn counterpart_rank(
    needle: &QuicciImage,
    cd: &[QuicciImage],
    correct: usize,
    distance: DistanceFunction,
    tie_break: TieBreak,
) -> usize {
    let target = distance.eval(needle, &cd[correct]);
    cd.iter()
        .enumerate()
        .filter(|&(j, img)| {
            let d = distance.eval(needle, img);
            d < target || (tie_break == TieBreak::InsertionOrder && d == target && j < correct)
        })
        .count()
}

fn vertex_key(mesh: &Mesh, v: usize) -> [u64; 6] {
    let p = mesh.vertices[v];
    let n = mesh.normals[v];
    [p.x, p.y, p.z, n.x, n.y, n.z].map(f64::to_bits)
}

/// One clutterbox run seeded by `config.seed`.
pub fn run_clutterbox(dataset: &[Mesh], config: &ClutterboxConfig) -> Result<ClutterboxOutcome> {
    config.validate()?;
    let needed = *config.object_counts.last().expect("validated non-empty");
    if dataset.len() < needed {
        return Err(Error::DatasetTooSmall { needed, available: dataset.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let chosen = sample(&mut rng, dataset.len(), needed).into_vec();
    let fitted: Vec<Mesh> = chosen.iter().map(|&i| dataset[i].fit_unit_sphere()).collect::<Result<_>>()?;
    let placed: Vec<Mesh> = if config.identity_placement {
        fitted.clone()
    } else {
        fitted
            .iter()
            .map(|m| m.place_in_cube(config.cube_edge, &mut rng).map(|(mesh, _)| mesh))
            .collect::<Result<_>>()?
    };
    let clutter_seed: u64 = rng.random();

    let desc_config = config.descriptor_config();
    let reference = &fitted[0];
    let ref_vertices = reference.unique_vertex_indices();
    let ref_points: Vec<OrientedPoint> =
        ref_vertices.iter().map(|&v| OrientedPoint { position: reference.vertices[v], normal: reference.normals[v] }).collect();
    let rd = DescriptorGenerator::new(reference, desc_config).descriptors(&ref_points);

    let mut outcome = ClutterboxOutcome::empty(config);
    outcome.runs = 1;
    for (slot, &n) in config.object_counts.iter().enumerate() {
        let scene = concatenate_scene(&placed[..n]);
        let cd_vertices = scene.mesh.unique_vertex_indices();
        let cd_points: Vec<OrientedPoint> = cd_vertices
            .iter()
            .map(|&v| OrientedPoint { position: scene.mesh.vertices[v], normal: scene.mesh.normals[v] })
            .collect();
        let cd = DescriptorGenerator::new(&scene.mesh, desc_config).descriptors(&cd_points);
        let position: HashMap<[u64; 6], usize> =
            cd_vertices.iter().enumerate().map(|(i, &v)| (vertex_key(&scene.mesh, v), i)).collect();
        // the reference is source 0, so its vertex v is scene vertex v
        let correct: Vec<usize> = ref_vertices.iter().map(|&v| position[&vertex_key(&scene.mesh, v)]).collect();

        let ranks: Vec<usize> = (0..rd.len())
            .into_par_iter()
            .map(|q| counterpart_rank(&rd[q], &cd, correct[q], config.distance, config.tie_break))
            .collect();
        for &r in &ranks {
            outcome.histograms[slot].add(r);
        }

        if config.clutter_samples > 0 {
            let estimator = ClutterEstimator::new(&scene, config.support_radius);
            let fractions: Vec<f64> = (0..rd.len())
                .into_par_iter()
                .map(|q| {
                    let mut qrng = ChaCha8Rng::seed_from_u64(clutter_seed);
                    qrng.set_stream((slot * rd.len() + q) as u64);
                    estimator.fraction(&cd_points[correct[q]], 0, config.support_radius, config.clutter_samples, &mut qrng)
                })
                .collect::<Result<_>>()?;
            for (f, r) in fractions.into_iter().zip(ranks) {
                outcome.heatmaps[slot].add(f, r);
            }
        }
    }
    Ok(outcome)
}

/// Seeds of `runs` runs derived from one master seed.
pub fn run_seeds(master: u64, runs: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..runs).map(|_| rng.random()).collect()
}

/// `runs` independent runs merged; `progress` is called after each run
/// finishes with its index.
pub fn run_clutterbox_series(
    dataset: &[Mesh],
    config: &ClutterboxConfig,
    runs: usize,
    progress: &(dyn Fn(usize) + Sync),
) -> Result<ClutterboxOutcome> {
    config.validate()?;
    let outcomes: Vec<ClutterboxOutcome> = run_seeds(config.seed, runs)
        .into_par_iter()
        .enumerate()
        .map(|(i, seed)| {
            let out = run_clutterbox(dataset, &ClutterboxConfig { seed, ..config.clone() });
            progress(i);
            out
        })
        .collect::<Result<_>>()?;
    let mut total = ClutterboxOutcome::empty(config);
    for o in &outcomes {
        total.merge(o);
    }
    Ok(total)
}
