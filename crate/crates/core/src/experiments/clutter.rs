//! Clutter fraction of a support region and the clutter/rank heatmap.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::intersection::TriangleIndex;
use crate::mesh::{OrientedPoint, Pt3, Scene};

pub const DEFAULT_CLUTTER_SAMPLES: usize = 10_000;
pub const HEATMAP_RANKS: usize = 256;

/// Closest point to `p` on triangle `abc`.
pub fn closest_point_on_triangle(p: &Pt3, a: &Pt3, b: &Pt3, c: &Pt3) -> Pt3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Estimates clutter fractions in one scene.
pub struct ClutterEstimator<'a> {
    scene: &'a Scene,
    index: TriangleIndex,
}

impl<'a> ClutterEstimator<'a> {
    pub fn new(scene: &'a Scene, support_radius: f64) -> Self {
        Self { scene, index: TriangleIndex::build(&scene.mesh, support_radius.max(1e-9)) }
    }

    /// Fraction of the surface inside the support sphere around `point`
    /// that belongs to sources other than `reference`.
    ///
    /// Samples are drawn area-uniformly from the triangles touching the
    /// sphere and kept if they fall inside it. Returns 0 when no sample
    /// lands inside.
    pub fn fraction<R: Rng + ?Sized>(
        &self,
        point: &OrientedPoint,
        reference: u32,
        support_radius: f64,
        samples: usize,
        rng: &mut R,
    ) -> Result<f64> {
        if samples == 0 {
            return Err(Error::InvalidConfig("clutter estimate needs at least one sample".into()));
        }
        let mesh = &self.scene.mesh;
        let center = point.position;
        let r2 = support_radius * support_radius;
        let mut tris = Vec::new();
        let mut cumulative = Vec::new();
        let mut total = 0.0;
        for t in self.index.query(mesh, &center, support_radius) {
            let [a, b, c] = mesh.triangle_vertices(t);
            if (closest_point_on_triangle(&center, &a, &b, &c) - center).norm_squared() > r2 {
                continue;
            }
            let area = mesh.triangle_area(t);
            if area <= 0.0 {
                continue;
            }
            total += area;
            tris.push(t);
            cumulative.push(total);
        }
        if tris.is_empty() {
            return Ok(0.0);
        }
        let (mut inside, mut foreign) = (0u64, 0u64);
        for _ in 0..samples {
            let target = rng.random::<f64>() * total;
            let k = cumulative.partition_point(|&c| c <= target).min(tris.len() - 1);
            let t = tris[k];
            let [a, b, c] = mesh.triangle_vertices(t);
            let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            let p = a + (b - a) * u + (c - a) * v;
            if (p - center).norm_squared() <= r2 {
                inside += 1;
                if self.scene.triangle_source(t) != reference {
                    foreign += 1;
                }
            }
        }
        Ok(if inside == 0 { 0.0 } else { foreign as f64 / inside as f64 })
    }
}

/// Counts of (clutter fraction bin, rank) pairs. Ranks at or beyond
/// [`HEATMAP_RANKS`] are tallied in `dropped`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClutterHeatmap {
    pub fraction_bins: usize,
    /// Row-major `fraction_bins x HEATMAP_RANKS`.
    pub counts: Vec<u64>,
    pub dropped: u64,
}

impl ClutterHeatmap {
    pub fn new(fraction_bins: usize) -> Self {
        Self { fraction_bins, counts: vec![0; fraction_bins * HEATMAP_RANKS], dropped: 0 }
    }

    /// Bin of a fraction in `[0, 1]`; 1 falls into the last bin.
    pub fn fraction_bin(&self, fraction: f64) -> usize {
        ((fraction.clamp(0.0, 1.0) * self.fraction_bins as f64) as usize).min(self.fraction_bins - 1)
    }

    pub fn add(&mut self, fraction: f64, rank: usize) {
        if rank >= HEATMAP_RANKS {
            self.dropped += 1;
            return;
        }
        let bin = self.fraction_bin(fraction);
        self.counts[bin * HEATMAP_RANKS + rank] += 1;
    }

    pub fn get(&self, fraction_bin: usize, rank: usize) -> u64 {
        self.counts[fraction_bin * HEATMAP_RANKS + rank]
    }

    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.fraction_bins, other.fraction_bins);
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        self.dropped += other.dropped;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.dropped
    }
}
