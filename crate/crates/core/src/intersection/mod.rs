//! Counting intersections between a stack of concentric circles and a
//! triangle mesh.
//!
//! The circles of one descriptor are arranged in `H` layers along the
//! reference normal, each layer holding `C` circles of radius
//! `(i + 1) * R / C`. Layer `l` sits at axial offset `R * ((l + 0.5) / H - 0.5)`
//! so the reference vertex is at the centre of the cylindrical support.
//!
//! Per triangle and layer the triangle is clipped by the layer plane to a
//! segment, and the circles crossed by that segment are found from the
//! segment's radial distance profile. Segment endpoints use a half-open rule
//! along the segment's orientation (derived from the face normal) so that a
//! crossing exactly on an edge shared by two consistently oriented triangles
//! is counted once.

mod spatial;

use nalgebra::Vector2;
use rayon::prelude::*;

pub use spatial::TriangleIndex;

use crate::descriptor::{quicci_from_grid, QuicciImage};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, OrientedPoint, Pt3, Vec3};

const DEGENERATE_AREA: f64 = 1e-12;

/// Shape of the circle stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescriptorConfig {
    pub circles_per_layer: usize,
    pub layer_count: usize,
    pub support_radius: f64,
}

impl DescriptorConfig {
    pub fn new(circles_per_layer: usize, layer_count: usize, support_radius: f64) -> Result<Self> {
        if circles_per_layer < 2 || layer_count < 1 || !(support_radius > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "descriptor config needs C >= 2, H >= 1, R > 0 (got C={circles_per_layer}, \
                 H={layer_count}, R={support_radius})"
            )));
        }
        if (circles_per_layer - 1) * layer_count > crate::descriptor::MAX_IMAGE_BITS {
            return Err(Error::InvalidConfig("descriptor image exceeds 65536 bits".into()));
        }
        Ok(Self { circles_per_layer, layer_count, support_radius })
    }

    /// Config producing a `width` x `height` image.
    pub fn for_image(width: usize, height: usize, support_radius: f64) -> Result<Self> {
        Self::new(width + 1, height, support_radius)
    }

    pub fn image_width(&self) -> usize {
        self.circles_per_layer - 1
    }

    pub fn image_height(&self) -> usize {
        self.layer_count
    }

    #[inline]
    pub fn circle_radius(&self, circle: usize) -> f64 {
        (circle + 1) as f64 * (self.support_radius / self.circles_per_layer as f64)
    }

    /// Signed distance of layer `layer`'s plane from the reference vertex,
    /// measured along the reference normal.
    #[inline]
    pub fn layer_offset(&self, layer: usize) -> f64 {
        self.support_radius * ((layer as f64 + 0.5) / self.layer_count as f64 - 0.5)
    }

    /// Radius of the sphere around the reference vertex that contains the
    /// whole support cylinder.
    pub fn cull_radius(&self) -> f64 {
        let r = self.support_radius;
        (r * r + (r / 2.0) * (r / 2.0)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleGeometry {
    pub center: Pt3,
    pub radius: f64,
    pub plane_normal: Vec3,
}

pub fn circle_geometry(
    config: &DescriptorConfig,
    origin: &OrientedPoint,
    layer: usize,
    circle: usize,
) -> Result<CircleGeometry> {
    if layer >= config.layer_count || circle >= config.circles_per_layer {
        return Err(Error::OutOfRange(format!(
            "circle ({layer}, {circle}) outside {}x{} stack",
            config.layer_count, config.circles_per_layer
        )));
    }
    Ok(CircleGeometry {
        center: origin.position + origin.normal * config.layer_offset(layer),
        radius: config.circle_radius(circle),
        plane_normal: origin.normal,
    })
}

/// Intersection counts of every circle, `layer_count` rows of
/// `circles_per_layer` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionCountGrid {
    config: DescriptorConfig,
    origin: OrientedPoint,
    counts: Vec<u32>,
}

impl IntersectionCountGrid {
    pub fn zeroed(config: DescriptorConfig, origin: OrientedPoint) -> Self {
        Self { config, origin, counts: vec![0; config.layer_count * config.circles_per_layer] }
    }

    /// Grid from explicit row-major counts, anchored at the origin facing +Z.
    pub fn from_counts(config: DescriptorConfig, counts: Vec<u32>) -> Result<Self> {
        if counts.len() != config.layer_count * config.circles_per_layer {
            return Err(Error::DimensionMismatch {
                expected: format!("{} counts", config.layer_count * config.circles_per_layer),
                actual: format!("{} counts", counts.len()),
            });
        }
        let origin = OrientedPoint { position: Pt3::origin(), normal: Vec3::z() };
        Ok(Self { config, origin, counts })
    }

    pub fn config(&self) -> &DescriptorConfig {
        &self.config
    }

    pub fn origin(&self) -> &OrientedPoint {
        &self.origin
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn row(&self, layer: usize) -> &[u32] {
        let c = self.config.circles_per_layer;
        &self.counts[layer * c..(layer + 1) * c]
    }

    #[inline]
    pub fn get(&self, layer: usize, circle: usize) -> u32 {
        self.counts[layer * self.config.circles_per_layer + circle]
    }

    /// Adds the contributions of the given triangles of `mesh`. Counts are
    /// per-triangle sums, so growing a mesh can be folded in incrementally.
    pub fn accumulate(&mut self, mesh: &Mesh, triangles: impl IntoIterator<Item = usize>) {
        let frame = LocalFrame::new(&self.origin);
        let c = self.config.circles_per_layer;
        let stride = c + 1;
        let mut diff = vec![0i32; self.config.layer_count * stride];
        for t in triangles {
            let world = mesh.triangle_vertices(t);
            if triangle_area2(&world) < 2.0 * DEGENERATE_AREA {
                continue;
            }
            let local = world.map(|p| frame.to_local(&p));
            accumulate_triangle(&self.config, &local, |layer, lo, hi| {
                diff[layer * stride + lo] += 1;
                diff[layer * stride + hi] -= 1;
            });
        }
        for layer in 0..self.config.layer_count {
            let mut running = 0i32;
            for i in 0..c {
                running += diff[layer * stride + i];
                if running != 0 {
                    let cell = &mut self.counts[layer * c + i];
                    *cell = (*cell as i32 + running) as u32;
                }
            }
        }
    }

    pub fn to_quicci(&self) -> QuicciImage {
        quicci_from_grid(self)
    }
}

fn triangle_area2(t: &[Pt3; 3]) -> f64 {
    (t[1] - t[0]).cross(&(t[2] - t[0])).norm()
}

/// Orthonormal frame with `z` along the reference normal.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalFrame {
    origin: Pt3,
    u: Vec3,
    w: Vec3,
    n: Vec3,
}

impl LocalFrame {
    pub(crate) fn new(point: &OrientedPoint) -> Self {
        let n = point.normal;
        let helper = if n.x.abs() < 0.6 { Vec3::x() } else { Vec3::y() };
        let u = n.cross(&helper).normalize();
        let w = n.cross(&u);
        Self { origin: point.position, u, w, n }
    }

    #[inline]
    pub(crate) fn to_local(&self, p: &Pt3) -> Vec3 {
        let d = p - self.origin;
        Vec3::new(d.dot(&self.u), d.dot(&self.w), d.dot(&self.n))
    }
}

/// The part of a triangle lying in the plane `z = plane_z`, oriented along
/// `plane normal x face normal`. `None` if the triangle does not straddle the
/// plane. Vertices exactly on the plane count as lying above it.
fn clip_to_plane(tri: &[Vec3; 3], plane_z: f64) -> Option<(Vector2<f64>, Vector2<f64>)> {
    let above = tri.map(|v| v.z - plane_z >= 0.0);
    let n_above = above.iter().filter(|&&a| a).count();
    if n_above == 0 || n_above == 3 {
        return None;
    }
    let mut pts = [Vector2::zeros(); 2];
    let mut k = 0;
    for e in 0..3 {
        let (a, b) = (tri[e], tri[(e + 1) % 3]);
        if above[e] != above[(e + 1) % 3] {
            let t = (plane_z - a.z) / (b.z - a.z);
            pts[k] = Vector2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
            k += 1;
        }
    }
    let face = (tri[1] - tri[0]).cross(&(tri[2] - tri[0]));
    // z x face, projected into the plane
    let dir = Vector2::new(-face.y, face.x);
    if (pts[1] - pts[0]).dot(&dir) >= 0.0 {
        Some((pts[0], pts[1]))
    } else {
        Some((pts[1], pts[0]))
    }
}

/// Radii bands crossed by the segment `a -> b` (distances from the axis).
/// Each band is `(lo, lo_inclusive, hi, hi_inclusive)`.
fn crossing_bands(a: Vector2<f64>, b: Vector2<f64>) -> [Option<(f64, bool, f64, bool)>; 2] {
    let d = b - a;
    let len2 = d.norm_squared();
    let f0 = a.norm();
    let f1 = b.norm();
    if len2 == 0.0 {
        return [None, None];
    }
    let t_star = -a.dot(&d) / len2;
    if t_star <= 0.0 {
        // distance grows along the segment; the start is included, the end is not
        [Some((f0, true, f1, false)), None]
    } else if t_star >= 1.0 {
        [Some((f1, false, f0, true)), None]
    } else {
        let fmin = (a + d * t_star).norm();
        [Some((fmin, false, f0, true)), Some((fmin, false, f1, false))]
    }
}

/// Number of crossings of a circle of radius `r` (in the same plane, centred
/// on the axis) with the oriented segment `a -> b`.
fn segment_circle_crossings(a: Vector2<f64>, b: Vector2<f64>, r: f64) -> u32 {
    crossing_bands(a, b)
        .iter()
        .flatten()
        .filter(|&&(lo, lo_inc, hi, hi_inc)| {
            (if lo_inc { r >= lo } else { r > lo }) && (if hi_inc { r <= hi } else { r < hi })
        })
        .count() as u32
}

/// First index in `0..n` for which `pred` holds, given `pred` is monotone
/// (false then true) and `guess` is close to the answer.
#[inline]
fn first_true(n: usize, guess: f64, pred: impl Fn(usize) -> bool) -> usize {
    let mut i = if guess.is_finite() { guess.clamp(0.0, n as f64) as usize } else if guess > 0.0 { n } else { 0 };
    while i > 0 && pred(i - 1) {
        i -= 1;
    }
    while i < n && !pred(i) {
        i += 1;
    }
    i
}

/// Calls `emit(layer, lo, hi)` for every layer the triangle crosses and every
/// half-open circle index range `[lo, hi)` whose circles it crosses once.
fn accumulate_triangle(config: &DescriptorConfig, tri: &[Vec3; 3], mut emit: impl FnMut(usize, usize, usize)) {
    let zmin = tri.iter().map(|v| v.z).fold(f64::INFINITY, f64::min);
    let zmax = tri.iter().map(|v| v.z).fold(f64::NEG_INFINITY, f64::max);
    let h = config.layer_count;
    let c = config.circles_per_layer;
    let spacing = config.support_radius / h as f64;
    let base = -0.5 * config.support_radius + 0.5 * spacing;
    // layers with zmin < z_l <= zmax
    let l_lo = first_true(h, (zmin - base) / spacing, |l| config.layer_offset(l) > zmin);
    let l_hi = first_true(h, (zmax - base) / spacing + 1.0, |l| config.layer_offset(l) > zmax);
    let step = config.support_radius / c as f64;
    for layer in l_lo..l_hi {
        let Some((a, b)) = clip_to_plane(tri, config.layer_offset(layer)) else {
            continue;
        };
        for (lo, lo_inc, hi, hi_inc) in crossing_bands(a, b).into_iter().flatten() {
            if lo > config.support_radius {
                continue;
            }
            let start = first_true(c, lo / step - 1.0, |i| {
                let r = config.circle_radius(i);
                if lo_inc { r >= lo } else { r > lo }
            });
            let end = first_true(c, hi / step - 1.0, |i| {
                let r = config.circle_radius(i);
                if hi_inc { r > hi } else { r >= hi }
            });
            if start < end {
                emit(layer, start, end);
            }
        }
    }
}

/// Counts crossings of one circle with all triangles of `mesh`.
pub fn count_circle_mesh_intersections(mesh: &Mesh, center: &Pt3, radius: f64, plane_normal: &Vec3) -> u32 {
    let Ok(anchor) = OrientedPoint::new(*center, *plane_normal) else {
        return 0;
    };
    let frame = LocalFrame::new(&anchor);
    let mut total = 0;
    for t in 0..mesh.triangle_count() {
        let world = mesh.triangle_vertices(t);
        if triangle_area2(&world) < 2.0 * DEGENERATE_AREA {
            continue;
        }
        let local = world.map(|p| frame.to_local(&p));
        if let Some((a, b)) = clip_to_plane(&local, 0.0) {
            total += segment_circle_crossings(a, b, radius);
        }
    }
    total
}

/// Intersection counts for every circle of the descriptor anchored at
/// `origin`. Scans all triangles; use [`DescriptorGenerator`] for many
/// descriptors on one mesh.
pub fn compute_intersection_grid(mesh: &Mesh, origin: &OrientedPoint, config: &DescriptorConfig) -> IntersectionCountGrid {
    let mut grid = IntersectionCountGrid::zeroed(*config, *origin);
    let cull = config.cull_radius();
    let candidates = (0..mesh.triangle_count()).filter(|&t| {
        let [a, b, c] = mesh.triangle_vertices(t);
        let lo = a.coords.inf(&b.coords).inf(&c.coords);
        let hi = a.coords.sup(&b.coords).sup(&c.coords);
        spatial::aabb_sphere_overlap(&lo, &hi, &origin.position.coords, cull)
    });
    grid.accumulate(mesh, candidates);
    grid
}

pub fn compute_descriptor(mesh: &Mesh, origin: &OrientedPoint, config: &DescriptorConfig) -> QuicciImage {
    compute_intersection_grid(mesh, origin, config).to_quicci()
}

/// Computes many descriptors over one mesh, using a spatial index to find
/// the triangles near each reference point.
pub struct DescriptorGenerator<'a> {
    mesh: &'a Mesh,
    config: DescriptorConfig,
    index: TriangleIndex,
}

impl<'a> DescriptorGenerator<'a> {
    pub fn new(mesh: &'a Mesh, config: DescriptorConfig) -> Self {
        let index = TriangleIndex::build(mesh, config.cull_radius());
        Self { mesh, config, index }
    }

    pub fn config(&self) -> &DescriptorConfig {
        &self.config
    }

    pub fn grid(&self, origin: &OrientedPoint) -> IntersectionCountGrid {
        let mut grid = IntersectionCountGrid::zeroed(self.config, *origin);
        let candidates = self.index.query(self.mesh, &origin.position, self.config.cull_radius());
        grid.accumulate(self.mesh, candidates);
        grid
    }

    pub fn descriptor(&self, origin: &OrientedPoint) -> QuicciImage {
        self.grid(origin).to_quicci()
    }

    /// Descriptors for all points, computed in parallel; output order matches
    /// input order.
    pub fn descriptors(&self, points: &[OrientedPoint]) -> Vec<QuicciImage> {
        points.par_iter().map(|p| self.descriptor(p)).collect()
    }

    pub fn grids(&self, points: &[OrientedPoint]) -> Vec<IntersectionCountGrid> {
        points.par_iter().map(|p| self.grid(p)).collect()
    }
}

#[cfg(test)]
mod tests;
