//! Throughput measurements: image comparisons per second and descriptors
//! generated per second as a function of scene size.

use std::hint::black_box;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::DistanceFunction;
use crate::descriptor::QuicciImage;
use crate::error::{Error, Result};
use crate::intersection::{DescriptorConfig, DescriptorGenerator};
use crate::mesh::Mesh;

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRate {
    pub function: DistanceFunction,
    pub images: usize,
    pub comparisons: u64,
    pub seconds: f64,
    pub comparisons_per_second: f64,
}

/// Compares image pairs drawn round-robin from `images` for at least
/// `duration` on the calling thread.
pub fn bench_comparison_rate(images: &[QuicciImage], function: DistanceFunction, duration: Duration) -> Result<ComparisonRate> {
    if images.len() < 2 {
        return Err(Error::InvalidConfig("comparison benchmark needs at least two images".into()));
    }
    if images.iter().any(|i| !i.same_shape(&images[0])) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", images[0].width(), images[0].height()),
            actual: "mixed image shapes".into(),
        });
    }
    let n = images.len();
    let start = Instant::now();
    let mut comparisons = 0u64;
    let mut offset = 1;
    let mut acc = 0.0;
    loop {
        for a in 0..n {
            acc += function.eval(&images[a], &images[(a + offset) % n]);
        }
        comparisons += n as u64;
        offset = offset % (n - 1) + 1;
        if start.elapsed() >= duration {
            break;
        }
    }
    black_box(acc);
    let seconds = start.elapsed().as_secs_f64();
    Ok(ComparisonRate {
        function,
        images: n,
        comparisons,
        seconds,
        comparisons_per_second: comparisons as f64 / seconds,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GenerationRate {
    pub triangles: usize,
    pub descriptors: usize,
    pub seconds: f64,
    pub descriptors_per_second: f64,
}

/// Scene of exactly `triangles` triangles made from copies of `pieces`
/// scattered in a cube of edge `cube_edge`.
pub fn scene_with_triangles<R: Rng + ?Sized>(pieces: &[Mesh], triangles: usize, cube_edge: f64, rng: &mut R) -> Result<Mesh> {
    let mut scene = Mesh::default();
    if triangles == 0 {
        return Ok(scene);
    }
    if pieces.iter().all(|p| p.triangle_count() == 0) {
        return Err(Error::InvalidConfig("scene pieces have no triangles".into()));
    }
    while scene.triangle_count() < triangles {
        let piece = &pieces[rng.random_range(0..pieces.len())];
        if piece.triangle_count() == 0 {
            continue;
        }
        let (placed, _) = piece.fit_unit_sphere()?.place_in_cube(cube_edge, rng)?;
        scene.append(&placed);
    }
    scene.triangles.truncate(triangles);
    Ok(scene)
}

/// Times descriptor generation (including the spatial index build) for
/// `descriptors` random surface points on scenes of each size.
pub fn bench_generation_rate(
    pieces: &[Mesh],
    triangle_counts: &[usize],
    descriptors: usize,
    config: DescriptorConfig,
    seed: u64,
) -> Result<Vec<GenerationRate>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(triangle_counts.len());
    for &triangles in triangle_counts {
        let scene = scene_with_triangles(pieces, triangles, 3.0, &mut rng)?;
        if triangles == 0 {
            rows.push(GenerationRate { triangles, descriptors: 0, seconds: 0.0, descriptors_per_second: 0.0 });
            continue;
        }
        let points = scene.sample_surface_points(descriptors, &mut rng)?;
        let start = Instant::now();
        let generator = DescriptorGenerator::new(&scene, config);
        let out = generator.descriptors(&points);
        black_box(&out);
        let seconds = start.elapsed().as_secs_f64();
        rows.push(GenerationRate {
            triangles,
            descriptors: out.len(),
            seconds,
            descriptors_per_second: out.len() as f64 / seconds.max(1e-9),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn comparison_rate_counts_work() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let images: Vec<_> = (0..16).map(|_| crate::synth::random_mixed_density_image(&mut rng, 64, 64)).collect();
        let r = bench_comparison_rate(&images, DistanceFunction::ClutterResistant, Duration::from_millis(20)).unwrap();
        assert!(r.comparisons >= 16 && r.comparisons % 16 == 0);
        assert!(r.comparisons_per_second > 0.0);
        assert!(bench_comparison_rate(&images[..1], DistanceFunction::Hamming, Duration::ZERO).is_err());
    }

    #[test]
    fn generation_rate_rows() {
        let pieces = vec![shapes::icosphere(2), shapes::box_mesh(crate::mesh::Vec3::new(0.5, 0.4, 0.3))];
        let config = DescriptorConfig::for_image(31, 32, 0.3).unwrap();
        let rows = bench_generation_rate(&pieces, &[0, 100, 1000], 20, config, 1).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].descriptors, 0);
        assert!(rows[1..].iter().all(|r| r.descriptors == 20 && r.descriptors_per_second > 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(scene_with_triangles(&pieces, 777, 3.0, &mut rng).unwrap().triangle_count(), 777);
    }
}
