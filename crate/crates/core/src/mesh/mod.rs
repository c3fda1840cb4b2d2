//! Triangle meshes: representation, normalisation, rigid placement, surface
//! sampling and scene assembly.

mod io;
pub mod shapes;

use std::collections::HashMap;

use nalgebra::{Matrix3, Point3, UnitQuaternion, Vector3};
use rand::Rng;

pub use io::{load_mesh, load_mesh_auto, write_obj, MeshFormat};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Pt3 = Point3<f64>;

const UNIT_TOLERANCE: f64 = 1e-6;
const DEGENERATE_AREA: f64 = 1e-12;

/// An indexed triangle mesh with one unit normal per vertex.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh {
    pub vertices: Vec<Pt3>,
    pub normals: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

/// A surface point with its unit normal; anchors one descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedPoint {
    pub position: Pt3,
    pub normal: Vec3,
}

impl OrientedPoint {
    /// Normalises `normal`; fails on a zero vector.
    pub fn new(position: Pt3, normal: Vec3) -> Result<Self> {
        let len = normal.norm();
        if !(len > 0.0) || !len.is_finite() {
            return Err(Error::InvalidConfig("oriented point normal has zero length".into()));
        }
        Ok(Self { position, normal: normal / len })
    }

    pub fn transformed(&self, placement: &RigidPlacement) -> Self {
        Self {
            position: placement.apply_point(&self.position),
            normal: placement.rotation * self.normal,
        }
    }
}

/// Rotation followed by translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPlacement {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl RigidPlacement {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vec3::zeros() }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        let det = rotation.determinant();
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if (det - 1.0).abs() > UNIT_TOLERANCE || ortho > UNIT_TOLERANCE {
            return Err(Error::InvalidConfig(format!(
                "rotation is not a proper orthonormal matrix (det {det}, orthogonality error {ortho})"
            )));
        }
        Ok(Self { rotation, translation })
    }

    /// Rotation drawn uniformly from SO(3) via a uniform unit quaternion
    /// (Shoemake's subgroup method).
    pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        let u3: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        let a = (1.0 - u1).sqrt();
        let b = u1.sqrt();
        let q = nalgebra::Quaternion::new(b * u3.cos(), a * u2.sin(), a * u2.cos(), b * u3.sin());
        UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner()
    }

    #[inline]
    pub fn apply_point(&self, p: &Pt3) -> Pt3 {
        Pt3::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply(&self, mesh: &Mesh) -> Mesh {
        Mesh {
            vertices: mesh.vertices.iter().map(|p| self.apply_point(p)).collect(),
            normals: mesh.normals.iter().map(|n| self.rotation * n).collect(),
            triangles: mesh.triangles.clone(),
        }
    }
}

impl Mesh {
    /// Builds a mesh, checking indices and normalising normals.
    pub fn new(vertices: Vec<Pt3>, normals: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if normals.len() != vertices.len() {
            return Err(Error::InvalidConfig(format!(
                "{} normals for {} vertices",
                normals.len(),
                vertices.len()
            )));
        }
        let n = vertices.len() as u32;
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(Error::OutOfRange(format!("triangle {t:?} references a vertex >= {n}")));
        }
        let normals = normals
            .into_iter()
            .map(|v| {
                let len = v.norm();
                if len > 0.0 && len.is_finite() {
                    Ok(v / len)
                } else {
                    Err(Error::InvalidConfig("zero-length vertex normal".into()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { vertices, normals, triangles })
    }

    /// Builds a mesh whose normals are area-weighted averages of incident
    /// face normals. Vertices touched only by degenerate faces get `+Z`.
    pub fn with_computed_normals(vertices: Vec<Pt3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len() as u32;
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(Error::OutOfRange(format!("triangle {t:?} references a vertex >= {n}")));
        }
        let mut acc = vec![Vec3::zeros(); vertices.len()];
        for t in &triangles {
            let [a, b, c] = t.map(|i| vertices[i as usize]);
            // cross product length is twice the area, so this is area-weighted
            let face = (b - a).cross(&(c - a));
            for &i in t {
                acc[i as usize] += face;
            }
        }
        let normals = acc
            .into_iter()
            .map(|v| {
                let len = v.norm();
                if len > 0.0 && len.is_finite() {
                    v / len
                } else {
                    Vec3::z()
                }
            })
            .collect();
        Ok(Self { vertices, normals, triangles })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    #[inline]
    pub fn triangle_vertices(&self, t: usize) -> [Pt3; 3] {
        self.triangles[t].map(|i| self.vertices[i as usize])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(t);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangle_count()).map(|t| self.triangle_area(t)).sum()
    }

    /// Uniformly scales and translates the mesh so that its bounding sphere
    /// (centred on the bounding-box midpoint) is the unit sphere at the origin.
    pub fn fit_unit_sphere(&self) -> Result<Mesh> {
        if self.vertices.is_empty() {
            return Err(Error::ZeroRadius);
        }
        let mut lo = self.vertices[0].coords;
        let mut hi = lo;
        for p in &self.vertices {
            lo = lo.inf(&p.coords);
            hi = hi.sup(&p.coords);
        }
        let center = (lo + hi) * 0.5;
        let radius = self.vertices.iter().map(|p| (p.coords - center).norm()).fold(0.0, f64::max);
        if !(radius > 0.0) {
            return Err(Error::ZeroRadius);
        }
        let scale = 1.0 / radius;
        Ok(Mesh {
            vertices: self.vertices.iter().map(|p| Pt3::from((p.coords - center) * scale)).collect(),
            normals: self.normals.clone(),
            triangles: self.triangles.clone(),
        })
    }

    /// Randomly rotates the (unit-sphere-fitted) mesh and translates it so the
    /// unit bounding sphere lies inside the origin-centred cube of edge
    /// `cube_edge`.
    pub fn place_in_cube<R: Rng + ?Sized>(&self, cube_edge: f64, rng: &mut R) -> Result<(Mesh, RigidPlacement)> {
        if !(cube_edge >= 2.0) {
            return Err(Error::CubeTooSmall(cube_edge));
        }
        let rotation = RigidPlacement::random_rotation(rng);
        let half = cube_edge / 2.0 - 1.0;
        let mut coord = || if half > 0.0 { rng.random_range(-half..=half) } else { 0.0 };
        let translation = Vec3::new(coord(), coord(), coord());
        let placement = RigidPlacement { rotation, translation };
        Ok((placement.apply(self), placement))
    }

    /// Indices of the first occurrence of every distinct (position, normal)
    /// pair, compared bitwise.
    pub fn unique_vertex_indices(&self) -> Vec<usize> {
        let mut seen: HashMap<[u64; 6], ()> = HashMap::with_capacity(self.vertices.len());
        let mut out = Vec::new();
        for (i, (p, n)) in self.vertices.iter().zip(&self.normals).enumerate() {
            let key = [
                p.x.to_bits(),
                p.y.to_bits(),
                p.z.to_bits(),
                n.x.to_bits(),
                n.y.to_bits(),
                n.z.to_bits(),
            ];
            if seen.insert(key, ()).is_none() {
                out.push(i);
            }
        }
        out
    }

    pub fn unique_oriented_points(&self) -> Vec<OrientedPoint> {
        self.unique_vertex_indices()
            .into_iter()
            .map(|i| OrientedPoint { position: self.vertices[i], normal: self.normals[i] })
            .collect()
    }

    /// Area-uniform random surface points with barycentrically interpolated
    /// normals.
    pub fn sample_surface_points<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<OrientedPoint>> {
        if count == 0 {
            return Ok(Vec::new());
        }
        let mut cumulative = Vec::with_capacity(self.triangle_count());
        let mut total = 0.0;
        for t in 0..self.triangle_count() {
            total += self.triangle_area(t);
            cumulative.push(total);
        }
        if !(total > 0.0) {
            return Err(Error::ZeroAreaMesh);
        }
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let target = rng.random::<f64>() * total;
            let t = cumulative.partition_point(|&c| c <= target).min(cumulative.len() - 1);
            let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            let w = 1.0 - u - v;
            let [ia, ib, ic] = self.triangles[t].map(|i| i as usize);
            let position = Pt3::from(
                self.vertices[ia].coords * w + self.vertices[ib].coords * u + self.vertices[ic].coords * v,
            );
            let mut normal = self.normals[ia] * w + self.normals[ib] * u + self.normals[ic] * v;
            if normal.norm() < 1e-12 {
                let [a, b, c] = self.triangle_vertices(t);
                normal = (b - a).cross(&(c - a));
            }
            // zero-area triangles are never drawn, so the fallback is non-zero
            out.push(OrientedPoint::new(position, normal)?);
        }
        Ok(out)
    }

    /// Appends one icosphere per point, each touching the point from the
    /// side its normal faces.
    pub fn add_spheres(&self, points: &[OrientedPoint], radius: f64, subdivisions: u32) -> Result<Mesh> {
        if !(radius > 0.0) {
            return Err(Error::InvalidConfig(format!("sphere radius must be positive, got {radius}")));
        }
        let sphere = shapes::icosphere(subdivisions);
        let mut out = self.clone();
        for p in points {
            let center = p.position + p.normal * radius;
            out.append_transformed(&sphere, |v| Pt3::from(v.coords * radius + center.coords));
        }
        Ok(out)
    }

    pub(crate) fn append_transformed(&mut self, other: &Mesh, f: impl Fn(&Pt3) -> Pt3) {
        let offset = self.vertices.len() as u32;
        self.vertices.extend(other.vertices.iter().map(f));
        self.normals.extend_from_slice(&other.normals);
        self.triangles.extend(other.triangles.iter().map(|t| t.map(|i| i + offset)));
    }

    pub fn append(&mut self, other: &Mesh) {
        self.append_transformed(other, |p| *p);
    }

    /// True if no triangle has area above the degenerate threshold.
    pub fn is_zero_area(&self) -> bool {
        (0..self.triangle_count()).all(|t| self.triangle_area(t) < DEGENERATE_AREA)
    }
}

/// A mesh assembled from several source meshes, remembering which source
/// every vertex came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scene {
    pub mesh: Mesh,
    /// Source mesh id per vertex.
    pub vertex_source: Vec<u32>,
    /// First vertex index of each source mesh.
    pub source_offsets: Vec<usize>,
}

impl Scene {
    pub fn push(&mut self, mesh: &Mesh) -> u32 {
        let id = self.source_offsets.len() as u32;
        self.source_offsets.push(self.mesh.vertex_count());
        self.mesh.append(mesh);
        self.vertex_source.resize(self.mesh.vertex_count(), id);
        id
    }

    pub fn source_count(&self) -> usize {
        self.source_offsets.len()
    }

    /// Source id of triangle `t` (that of its first vertex).
    pub fn triangle_source(&self, t: usize) -> u32 {
        self.vertex_source[self.mesh.triangles[t][0] as usize]
    }

    /// Maps a scene vertex to `(source id, vertex index within the source)`.
    pub fn local_vertex(&self, v: usize) -> (u32, u32) {
        let src = self.vertex_source[v];
        (src, (v - self.source_offsets[src as usize]) as u32)
    }
}

pub fn concatenate_scene(meshes: &[Mesh]) -> Scene {
    let mut scene = Scene::default();
    for m in meshes {
        scene.push(m);
    }
    scene
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cube(half: f64) -> Mesh {
        shapes::box_mesh(Vec3::new(half, half, half))
    }

    #[test]
    fn fit_unit_sphere_scales_cube() {
        let m = cube(2.0).fit_unit_sphere().unwrap();
        let max = m.vertices.iter().map(|p| p.coords.norm()).fold(0.0, f64::max);
        assert!((max - 1.0).abs() < 1e-6);
        // idempotent
        let again = m.fit_unit_sphere().unwrap();
        for (a, b) in m.vertices.iter().zip(&again.vertices) {
            assert!((a - b).abs().max() < 1e-6);
        }
    }

    #[test]
    fn fit_unit_sphere_rejects_single_point() {
        let m = Mesh::with_computed_normals(vec![Pt3::new(1.0, 2.0, 3.0); 3], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(m.fit_unit_sphere(), Err(Error::ZeroRadius)));
    }

    #[test]
    fn placement_respects_cube() {
        let m = cube(1.0).fit_unit_sphere().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (_, p) = m.place_in_cube(3.0, &mut rng).unwrap();
            assert!(p.translation.iter().all(|t| t.abs() <= 0.5));
            RigidPlacement::new(p.rotation, p.translation).unwrap();
        }
        let (_, p) = m.place_in_cube(2.0, &mut rng).unwrap();
        assert_eq!(p.translation, Vec3::zeros());
        assert!(matches!(m.place_in_cube(1.9, &mut rng), Err(Error::CubeTooSmall(_))));

        let a = m.place_in_cube(3.0, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = m.place_in_cube(3.0, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn placement_is_rigid() {
        let m = shapes::icosphere(1);
        let (placed, _) = m.place_in_cube(3.0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        for i in 0..m.vertex_count() {
            for j in (i + 1)..m.vertex_count() {
                let d0 = (m.vertices[i] - m.vertices[j]).norm();
                let d1 = (placed.vertices[i] - placed.vertices[j]).norm();
                assert!((d0 - d1).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn unique_points_of_face_split_cube() {
        let m = cube(1.0);
        assert_eq!(m.vertex_count(), 24);
        assert_eq!(m.unique_oriented_points().len(), 24);

        let mut doubled = m.clone();
        doubled.append(&m);
        assert_eq!(doubled.unique_oriented_points().len(), 24);
        assert!(Mesh::default().unique_oriented_points().is_empty());
    }

    #[test]
    fn sampling_stays_on_plane_and_follows_area() {
        let tri = Mesh::with_computed_normals(
            vec![Pt3::new(0.0, 0.0, 1.0), Pt3::new(1.0, 0.0, 1.0), Pt3::new(0.0, 1.0, 1.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in tri.sample_surface_points(1000, &mut rng).unwrap() {
            assert!((p.position.z - 1.0).abs() < 1e-6);
        }
        assert!(tri.sample_surface_points(0, &mut rng).unwrap().is_empty());

        // areas 1 and 3
        let two = Mesh::with_computed_normals(
            vec![
                Pt3::new(0.0, 0.0, 0.0),
                Pt3::new(2.0, 0.0, 0.0),
                Pt3::new(0.0, 1.0, 0.0),
                Pt3::new(10.0, 0.0, 0.0),
                Pt3::new(13.0, 0.0, 0.0),
                Pt3::new(10.0, 2.0, 0.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        let samples = two.sample_surface_points(100_000, &mut rng).unwrap();
        let second = samples.iter().filter(|p| p.position.x >= 10.0).count() as f64 / 1e5;
        assert!((second - 0.75).abs() < 0.01, "{second}");

        let flat = Mesh::with_computed_normals(vec![Pt3::origin(); 3], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(flat.sample_surface_points(1, &mut rng), Err(Error::ZeroAreaMesh)));
    }

    #[test]
    fn spheres_touch_their_points() {
        let base = cube(1.0);
        let p = OrientedPoint::new(Pt3::origin(), Vec3::z()).unwrap();
        let out = base.add_spheres(&[p], 0.05, 2).unwrap();
        let sphere_tris = shapes::icosphere(2).triangle_count();
        assert_eq!(sphere_tris, 320);
        assert_eq!(out.triangle_count(), base.triangle_count() + sphere_tris);
        assert_eq!(&out.vertices[..base.vertex_count()], &base.vertices[..]);
        let centroid: Vec3 =
            out.vertices[base.vertex_count()..].iter().map(|v| v.coords).sum::<Vec3>() / 162.0;
        assert!((centroid - Vec3::new(0.0, 0.0, 0.05)).norm() < 1e-9);
        assert_eq!(base.add_spheres(&[], 0.05, 2).unwrap(), base);
    }

    #[test]
    fn scene_offsets_indices() {
        let a = shapes::icosphere(0);
        let b = cube(1.0);
        let scene = concatenate_scene(&[a.clone(), b.clone()]);
        assert_eq!(scene.mesh.triangle_count(), a.triangle_count() + b.triangle_count());
        let first_b = scene.mesh.triangles[a.triangle_count()];
        assert_eq!(first_b, b.triangles[0].map(|i| i + a.vertex_count() as u32));
        assert_eq!(scene.local_vertex(a.vertex_count() + 3), (1, 3));
        assert_eq!(concatenate_scene(std::slice::from_ref(&a)).mesh, a);
        assert!(concatenate_scene(&[]).mesh.is_empty());
    }
}
