//! Synthetic inputs: random bit images and a small corpus of toy meshes.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use nalgebra::Matrix3;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::descriptor::{words_for, QuicciImage};
use crate::error::Result;
use crate::mesh::{shapes, write_obj, Mesh, Pt3, RigidPlacement, Vec3};

/// Random image whose bits are each set with probability `2^-sparsity`
/// (the AND of `sparsity` uniform words). `sparsity` 0 gives all-zero.
pub fn random_sparse_image<R: Rng + ?Sized>(rng: &mut R, width: usize, height: usize, sparsity: u32) -> QuicciImage {
    let words = (0..words_for(width * height))
        .map(|_| if sparsity == 0 { 0 } else { (0..sparsity).fold(u64::MAX, |acc, _| acc & rng.random::<u64>()) })
        .collect();
    QuicciImage::from_words_masked(width, height, words).expect("valid dimensions")
}

/// Random image with a density drawn from {1/2, 1/4, 1/8, 1/16, 1/32}.
pub fn random_mixed_density_image<R: Rng + ?Sized>(rng: &mut R, width: usize, height: usize) -> QuicciImage {
    let sparsity = rng.random_range(1..=5);
    random_sparse_image(rng, width, height, sparsity)
}

/// Random image with each bit set independently with probability `density`.
pub fn random_image<R: Rng + ?Sized>(rng: &mut R, width: usize, height: usize, density: f64) -> QuicciImage {
    QuicciImage::from_fn(width, height, |_, _| rng.random_bool(density)).expect("valid dimensions")
}

/// Image with exactly `count` set bits at random positions.
pub fn random_image_with_popcount<R: Rng + ?Sized>(rng: &mut R, width: usize, height: usize, count: usize) -> QuicciImage {
    let mut positions: Vec<usize> = (0..width * height).collect();
    let (chosen, _) = positions.partial_shuffle(rng, count);
    let mut image = QuicciImage::zeroed(width, height).expect("valid dimensions");
    for &p in chosen.iter() {
        image.set_flat(p, true);
    }
    image
}

/// Copy of `image` with exactly `flips` distinct bits inverted.
pub fn flip_bits<R: Rng + ?Sized>(rng: &mut R, image: &QuicciImage, flips: usize) -> QuicciImage {
    let mut positions: Vec<usize> = (0..image.bit_len()).collect();
    let (chosen, _) = positions.partial_shuffle(rng, flips);
    let mut out = image.clone();
    for &p in chosen.iter() {
        out.set_flat(p, !out.get_flat(p));
    }
    out
}

fn random_stretch<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vec3::new(rng.random_range(0.6..1.4), rng.random_range(0.6..1.4), rng.random_range(0.6..1.4)))
}

/// Applies `f` to every vertex and recomputes normals.
fn deform(mesh: &Mesh, f: impl Fn(&Pt3) -> Pt3) -> Mesh {
    Mesh::with_computed_normals(mesh.vertices.iter().map(f).collect(), mesh.triangles.clone())
        .expect("deformation keeps indices valid")
}

/// One random closed primitive: stretched and rotated sphere, box, torus or
/// cylinder, with a little radial noise on the curved shapes.
pub fn toy_mesh<R: Rng + ?Sized>(rng: &mut R) -> Mesh {
    let kind = rng.random_range(0..4);
    let base = match kind {
        0 => shapes::icosphere(rng.random_range(1..=2)),
        1 => shapes::box_mesh(Vec3::new(
            rng.random_range(0.3..1.0),
            rng.random_range(0.3..1.0),
            rng.random_range(0.3..1.0),
        )),
        2 => {
            let major = rng.random_range(0.6..1.0);
            shapes::torus(major, major * rng.random_range(0.2..0.5), rng.random_range(16..28), rng.random_range(8..14))
        }
        _ => shapes::cylinder(rng.random_range(0.3..0.8), rng.random_range(0.3..1.0), rng.random_range(12..24)),
    };
    let noise = if kind == 1 { 0.0 } else { rng.random_range(0.0..0.04) };
    // one factor per distinct position so split vertices stay welded
    let mut jitter: HashMap<[u64; 3], f64> = HashMap::new();
    let vertices = base
        .vertices
        .iter()
        .map(|p| {
            let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
            let f = *jitter.entry(key).or_insert_with(|| 1.0 + noise * rng.random_range(-1.0..1.0));
            Pt3::from(p.coords * f)
        })
        .collect();
    let stretch = random_stretch(rng);
    let rotation = RigidPlacement::random_rotation(rng);
    let transform = rotation * stretch;
    let noisy = Mesh { vertices, ..base };
    deform(&noisy, |p| Pt3::from(transform * p.coords))
}

pub fn toy_corpus<R: Rng + ?Sized>(rng: &mut R, count: usize) -> Vec<Mesh> {
    (0..count).map(|_| toy_mesh(rng)).collect()
}

/// Writes `count` toy meshes as `toy_NNN.obj` into `dir`.
pub fn write_toy_corpus<R: Rng + ?Sized>(rng: &mut R, dir: &Path, count: usize) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|source| crate::Error::IoPath { path: dir.to_path_buf(), source })?;
    let mut paths = Vec::with_capacity(count);
    for i in 0..count {
        let path = dir.join(format!("toy_{i:03}.obj"));
        write_obj(&path, &toy_mesh(rng))?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sparse_images_have_expected_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = random_sparse_image(&mut rng, 64, 64, 3);
        let frac = img.popcount() as f64 / 4096.0;
        assert!((frac - 0.125).abs() < 0.02, "{frac}");
        assert_eq!(random_sparse_image(&mut rng, 63, 64, 0).popcount(), 0);
        // padding stays clear
        let odd = random_sparse_image(&mut rng, 7, 3, 1);
        assert_eq!(odd.words()[0] >> 21, 0);
    }

    #[test]
    fn exact_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(random_image_with_popcount(&mut rng, 16, 16, 32).popcount(), 32);
        let img = random_mixed_density_image(&mut rng, 64, 64);
        let flipped = flip_bits(&mut rng, &img, 8);
        assert_eq!(crate::descriptor::hamming_distance(&img, &flipped).unwrap(), 8);
    }

    #[test]
    fn toy_meshes_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for mesh in toy_corpus(&mut rng, 40) {
            assert!(mesh.triangle_count() >= 12);
            assert!(!mesh.is_zero_area());
            assert!(mesh.normals.iter().all(|n| (n.norm() - 1.0).abs() < 1e-6));
            mesh.fit_unit_sphere().unwrap();
            // every directed edge has its reverse
            let key = |i: u32| mesh.vertices[i as usize].coords.map(f64::to_bits);
            let mut edges = std::collections::HashMap::new();
            for t in &mesh.triangles {
                for k in 0..3 {
                    *edges.entry((key(t[k]), key(t[(k + 1) % 3]))).or_insert(0) += 1;
                }
            }
            assert!(edges.iter().all(|((a, b), c)| edges.get(&(*b, *a)) == Some(c)));
        }
    }
}
