//! How the three distance functions respond to shape changes.
//!
//! The nominal part compares descriptors at equal vertex indices of two
//! different objects. The perturbation part grows small spheres on an
//! object's surface ten at a time and compares each vertex's descriptor
//! against its unperturbed version after every step.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::clutterbox::run_seeds;
use super::DistanceFunction;
use crate::error::{Error, Result};
use crate::intersection::{DescriptorConfig, DescriptorGenerator};
use crate::mesh::{Mesh, OrientedPoint};

#[derive(Debug, Clone, Serialize)]
pub struct DistanceStudyConfig {
    pub width: usize,
    pub height: usize,
    pub support_radius: f64,
    pub sphere_radius: f64,
    pub sphere_subdivisions: u32,
    pub spheres_per_step: usize,
    pub max_spheres: usize,
    /// Random object pairs for the nominal comparison.
    pub nominal_pairs: usize,
    /// Bin width for the weighted Hamming distance on [0, 2].
    pub weighted_bin_width: f64,
    pub seed: u64,
}

impl Default for DistanceStudyConfig {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            support_radius: 0.3,
            sphere_radius: 0.05,
            sphere_subdivisions: 2,
            spheres_per_step: 10,
            max_spheres: 500,
            nominal_pairs: 100,
            weighted_bin_width: 0.01,
            seed: 0,
        }
    }
}

impl DistanceStudyConfig {
    pub fn steps(&self) -> usize {
        self.max_spheres / self.spheres_per_step
    }

    pub fn validate(&self) -> Result<()> {
        DescriptorConfig::for_image(self.width, self.height, self.support_radius)?;
        if self.spheres_per_step == 0 || self.max_spheres % self.spheres_per_step != 0 {
            return Err(Error::InvalidConfig("max spheres must be a positive multiple of spheres per step".into()));
        }
        if !(self.sphere_radius > 0.0) || !(self.weighted_bin_width > 0.0) {
            return Err(Error::InvalidConfig("sphere radius and bin width must be positive".into()));
        }
        Ok(())
    }
}

/// Counts of distance values. Integer-valued functions get one bin per
/// value; the weighted Hamming distance is binned at `bin_width` on [0, 2].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceHistogram {
    pub function: DistanceFunction,
    pub sphere_count: usize,
    pub bin_width: f64,
    pub bins: BTreeMap<u64, u64>,
    pub count: u64,
    pub sum: f64,
}

impl DistanceHistogram {
    pub fn new(function: DistanceFunction, sphere_count: usize, weighted_bin_width: f64) -> Self {
        let bin_width = if function == DistanceFunction::WeightedHamming { weighted_bin_width } else { 1.0 };
        Self { function, sphere_count, bin_width, bins: BTreeMap::new(), count: 0, sum: 0.0 }
    }

    pub fn bin_of(&self, value: f64) -> u64 {
        if self.function == DistanceFunction::WeightedHamming {
            let last = (2.0 / self.bin_width).ceil() as u64 - 1;
            ((value / self.bin_width).floor() as u64).min(last)
        } else {
            value as u64
        }
    }

    pub fn add(&mut self, value: f64) {
        *self.bins.entry(self.bin_of(value)).or_default() += 1;
        self.count += 1;
        self.sum += value;
    }

    pub fn merge(&mut self, other: &Self) {
        for (&b, &c) in &other.bins {
            *self.bins.entry(b).or_default() += c;
        }
        self.count += other.count;
        self.sum += other.sum;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceStudyOutcome {
    /// One histogram per function.
    pub nominal: Vec<DistanceHistogram>,
    /// `series[step * 3 + f]` for sphere count `step * spheres_per_step`.
    pub series: Vec<DistanceHistogram>,
    pub objects: usize,
}

impl DistanceStudyOutcome {
    fn empty(config: &DistanceStudyConfig) -> Self {
        let w = config.weighted_bin_width;
        Self {
            nominal: DistanceFunction::ALL.iter().map(|&f| DistanceHistogram::new(f, 0, w)).collect(),
            series: (0..=config.steps())
                .flat_map(|s| DistanceFunction::ALL.map(|f| DistanceHistogram::new(f, s * config.spheres_per_step, w)))
                .collect(),
            objects: 0,
        }
    }

    pub fn series_for(&self, function: DistanceFunction) -> Vec<&DistanceHistogram> {
        self.series.iter().filter(|h| h.function == function).collect()
    }
}

fn oriented_vertex(mesh: &Mesh, v: usize) -> OrientedPoint {
    OrientedPoint { position: mesh.vertices[v], normal: mesh.normals[v] }
}

/// Perturbation series for one object, as per-step histograms.
pub fn perturbation_series(mesh: &Mesh, config: &DistanceStudyConfig, seed: u64) -> Result<Vec<DistanceHistogram>> {
    let mut out = DistanceStudyOutcome::empty(config).series;
    if mesh.vertex_count() == 0 || mesh.triangle_count() == 0 {
        return Ok(out);
    }
    let desc_config = DescriptorConfig::for_image(config.width, config.height, config.support_radius)?;
    let mesh = mesh.fit_unit_sphere()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchors = mesh.sample_surface_points(config.max_spheres, &mut rng)?;
    let points: Vec<OrientedPoint> = mesh.unique_vertex_indices().into_iter().map(|v| oriented_vertex(&mesh, v)).collect();
    let generator = DescriptorGenerator::new(&mesh, desc_config);
    let mut grids = generator.grids(&points);
    let base: Vec<_> = grids.iter().map(|g| g.to_quicci()).collect();

    // a sphere can only matter to a point within the cull radius of its surface
    let reach = desc_config.cull_radius() + 2.0 * config.sphere_radius;
    let empty = Mesh::default();
    for step in 0..=config.steps() {
        if step > 0 {
            let batch = &anchors[(step - 1) * config.spheres_per_step..step * config.spheres_per_step];
            let spheres = empty.add_spheres(batch, config.sphere_radius, config.sphere_subdivisions)?;
            let per_sphere = spheres.triangle_count() / batch.len();
            grids.par_iter_mut().zip(&points).for_each(|(grid, p)| {
                let near = batch
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| (a.position - p.position).norm() <= reach)
                    .flat_map(|(i, _)| i * per_sphere..(i + 1) * per_sphere);
                grid.accumulate(&spheres, near.collect::<Vec<_>>());
            });
        }
        let values: Vec<[f64; 3]> = grids
            .par_iter()
            .zip(&base)
            .map(|(grid, before)| {
                let after = grid.to_quicci();
                DistanceFunction::ALL.map(|f| f.eval(before, &after))
            })
            .collect();
        for v in values {
            for (f, value) in v.into_iter().enumerate() {
                out[step * 3 + f].add(value);
            }
        }
    }
    Ok(out)
}

/// Nominal histograms for one pair of objects: descriptors at equal vertex
/// indices, the first object's acting as needles.
pub fn nominal_pair(a: &Mesh, b: &Mesh, config: &DistanceStudyConfig) -> Result<Vec<DistanceHistogram>> {
    let mut out = DistanceStudyOutcome::empty(config).nominal;
    let n = a.vertex_count().min(b.vertex_count());
    if n == 0 {
        return Ok(out);
    }
    let desc_config = DescriptorConfig::for_image(config.width, config.height, config.support_radius)?;
    let (a, b) = (a.fit_unit_sphere()?, b.fit_unit_sphere()?);
    let pa: Vec<OrientedPoint> = (0..n).map(|v| oriented_vertex(&a, v)).collect();
    let pb: Vec<OrientedPoint> = (0..n).map(|v| oriented_vertex(&b, v)).collect();
    let da = DescriptorGenerator::new(&a, desc_config).descriptors(&pa);
    let db = DescriptorGenerator::new(&b, desc_config).descriptors(&pb);
    for (x, y) in da.iter().zip(&db) {
        for (f, h) in DistanceFunction::ALL.iter().zip(out.iter_mut()) {
            h.add(f.eval(x, y));
        }
    }
    Ok(out)
}

/// Runs both parts over the dataset. `progress` is called with the number of
/// objects finished so far.
pub fn run_distance_study(
    dataset: &[Mesh],
    config: &DistanceStudyConfig,
    progress: &(dyn Fn(usize) + Sync),
) -> Result<DistanceStudyOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::DatasetTooSmall { needed: 1, available: 0 });
    }
    let mut outcome = DistanceStudyOutcome::empty(config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    if dataset.len() >= 2 {
        for _ in 0..config.nominal_pairs {
            let pair = sample(&mut rng, dataset.len(), 2).into_vec();
            let hists = nominal_pair(&dataset[pair[0]], &dataset[pair[1]], config)?;
            outcome.nominal.iter_mut().zip(&hists).for_each(|(a, b)| a.merge(b));
        }
    }
    let seeds = run_seeds(rng.random(), dataset.len());
    let done = std::sync::atomic::AtomicUsize::new(0);
    let per_object: Vec<Vec<DistanceHistogram>> = dataset
        .par_iter()
        .zip(seeds)
        .map(|(mesh, seed)| {
            let r = perturbation_series(mesh, config, seed);
            progress(done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1);
            r
        })
        .collect::<Result<_>>()?;
    for hists in &per_object {
        outcome.series.iter_mut().zip(hists).for_each(|(a, b)| a.merge(b));
    }
    outcome.objects = dataset.iter().filter(|m| m.vertex_count() > 0).count();
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    fn small() -> DistanceStudyConfig {
        DistanceStudyConfig { width: 31, height: 32, max_spheres: 60, nominal_pairs: 3, ..Default::default() }
    }

    #[test]
    fn no_spheres_means_no_distance() {
        let mesh = shapes::torus(0.7, 0.25, 20, 10);
        let series = perturbation_series(&mesh, &small(), 1).unwrap();
        assert_eq!(series.len(), 3 * 7);
        for h in &series[..3] {
            assert_eq!(h.sphere_count, 0);
            assert_eq!(h.sum, 0.0);
            assert_eq!(h.count, 200);
        }
        let last = &series[series.len() - 3..];
        assert!(last.iter().all(|h| h.sphere_count == 60 && h.sum > 0.0));
    }

    #[test]
    fn incremental_spheres_match_full_recompute() {
        let config = DistanceStudyConfig { max_spheres: 20, ..small() };
        let mesh = shapes::icosphere(2);
        let series = perturbation_series(&mesh, &config, 9).unwrap();

        let fitted = mesh.fit_unit_sphere().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let anchors = fitted.sample_surface_points(20, &mut rng).unwrap();
        let perturbed = fitted.add_spheres(&anchors, 0.05, 2).unwrap();
        let dc = DescriptorConfig::for_image(31, 32, 0.3).unwrap();
        let mut expected = DistanceHistogram::new(DistanceFunction::Hamming, 20, 0.01);
        for v in fitted.unique_vertex_indices() {
            let p = oriented_vertex(&fitted, v);
            let before = crate::intersection::compute_descriptor(&fitted, &p, &dc);
            let after = crate::intersection::compute_descriptor(&perturbed, &p, &dc);
            expected.add(DistanceFunction::Hamming.eval(&before, &after));
        }
        assert_eq!(series[2 * 3], expected);
    }

    #[test]
    fn identical_pair_gives_zero_nominal_distances() {
        let m = shapes::torus(0.7, 0.25, 20, 10);
        let hists = nominal_pair(&m, &m, &small()).unwrap();
        for h in hists {
            assert_eq!(h.bins.keys().copied().collect::<Vec<_>>(), vec![0]);
        }
        let dataset = vec![m.clone(), m];
        let out = run_distance_study(&dataset, &small(), &|_| {}).unwrap();
        assert!(out.nominal.iter().all(|h| h.sum == 0.0 && h.count > 0));
        assert_eq!(out.series.len(), 21);
        assert_eq!(out, run_distance_study(&dataset, &small(), &|_| {}).unwrap());
    }

    #[test]
    fn weighted_bins_cover_zero_to_two() {
        let mut h = DistanceHistogram::new(DistanceFunction::WeightedHamming, 0, 0.01);
        assert_eq!(h.bin_of(0.0), 0);
        assert_eq!(h.bin_of(0.015), 1);
        assert_eq!(h.bin_of(2.0), 199);
        h.add(1.0);
        assert_eq!(h.mean(), 1.0);
    }
}
