//! Reference implementations the library is checked against. Each one
//! recomputes its answer from first principles with no shared code paths:
//! bit-by-bit distances, full linear scans and brute-force angular sampling
//! of circles against triangles.
#![allow(dead_code)]

use quicci_core::descriptor::{Provenance, QuicciImage};
use quicci_core::mesh::{Mesh, Pt3, Vec3};

pub fn bit_hamming(a: &QuicciImage, b: &QuicciImage) -> u32 {
    (0..a.bit_len()).filter(|&i| a.get_flat(i) != b.get_flat(i)).count() as u32
}

pub fn bit_missing(needle: &QuicciImage, haystack: &QuicciImage) -> u32 {
    (0..needle.bit_len()).filter(|&i| needle.get_flat(i) && !haystack.get_flat(i)).count() as u32
}

pub fn bit_extra(needle: &QuicciImage, haystack: &QuicciImage) -> u32 {
    bit_missing(haystack, needle)
}

/// missing / S + extra / (T - S), each denominator floored at 1.
pub fn bit_weighted(needle: &QuicciImage, haystack: &QuicciImage) -> f64 {
    let total = needle.bit_len() as f64;
    let set = (0..needle.bit_len()).filter(|&i| needle.get_flat(i)).count() as f64;
    bit_missing(needle, haystack) as f64 / set.max(1.0) + bit_extra(needle, haystack) as f64 / (total - set).max(1.0)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "popcnt")]
unsafe fn xor_count_hw(a: &[u64], b: &[u64]) -> u32 {
    let mut n = 0;
    for i in 0..a.len() {
        n += (a[i] ^ b[i]).count_ones();
    }
    n
}

/// Word-wise Hamming distance for corpora too large for the bit loop.
pub fn word_hamming(a: &[u64], b: &[u64]) -> u32 {
    assert_eq!(a.len(), b.len());
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("popcnt") {
        // SAFETY: feature checked.
        return unsafe { xor_count_hw(a, b) };
    }
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// Smallest `k` (distance, provenance) pairs by full scan, optionally
/// restricted to distances `<= limit`.
pub fn scan_top_k(corpus: &[QuicciImage], prov: &[Provenance], needle: &QuicciImage, k: usize, limit: Option<u32>) -> Vec<(u32, Provenance)> {
    let mut best: Vec<(u32, Provenance)> = Vec::with_capacity(k + 1);
    for (img, &p) in corpus.iter().zip(prov) {
        let d = word_hamming(needle.words(), img.words());
        if limit.is_some_and(|l| d > l) {
            continue;
        }
        if best.len() == k && (d, p) >= best[k - 1] {
            continue;
        }
        let at = best.partition_point(|&e| e < (d, p));
        best.insert(at, (d, p));
        best.truncate(k);
    }
    best
}

/// Word-wise form of [`bit_weighted`].
pub fn word_weighted(needle: &[u64], haystack: &[u64], total_bits: usize) -> f64 {
    let mut missing = 0u32;
    let mut extra = 0u32;
    let mut set = 0u32;
    for (n, h) in needle.iter().zip(haystack) {
        missing += (n & !h).count_ones();
        extra += (h & !n).count_ones();
        set += n.count_ones();
    }
    missing as f64 / (set as f64).max(1.0) + extra as f64 / (total_bits as f64 - set as f64).max(1.0)
}

pub fn scan_top_k_weighted(corpus: &[QuicciImage], prov: &[Provenance], needle: &QuicciImage, k: usize) -> Vec<(f64, Provenance)> {
    let mut all: Vec<(f64, Provenance)> = corpus
        .iter()
        .zip(prov)
        .map(|(img, &p)| (word_weighted(needle.words(), img.words(), needle.bit_len()), p))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.truncate(k);
    all
}

fn any_perpendicular(n: &Vec3) -> Vec3 {
    let helper = if n.x.abs() < 0.6 { Vec3::x() } else { Vec3::y() };
    (helper - n * n.dot(&helper)).normalize()
}

/// Crossings of the circle (centre, radius, plane normal) with the mesh,
/// found by walking `steps` points around the circle and counting sign
/// changes of each triangle's plane function whose interpolated crossing
/// lies inside the triangle.
pub fn sampled_circle_crossings(mesh: &Mesh, center: &Pt3, normal: &Vec3, radius: f64, steps: usize, table: &[(f64, f64)]) -> u32 {
    debug_assert_eq!(table.len(), steps);
    let n = normal.normalize();
    let u = any_perpendicular(&n);
    let v = n.cross(&u);
    let mut total = 0;
    for t in 0..mesh.triangle_count() {
        let [a, b, c] = mesh.triangle_vertices(t);
        let m = (b - a).cross(&(c - a));
        let area2 = m.norm();
        if area2 < 1e-12 {
            continue;
        }
        let m = m / area2;
        // circle plane must cut the triangle
        let side = |p: &Pt3| n.dot(&(p - center));
        let (sa, sb, sc) = (side(&a), side(&b), side(&c));
        if (sa > 0.0 && sb > 0.0 && sc > 0.0) || (sa < 0.0 && sb < 0.0 && sc < 0.0) {
            continue;
        }
        let k0 = m.dot(&(center - a));
        let ku = radius * m.dot(&u);
        let kv = radius * m.dot(&v);
        if k0.abs() > (ku * ku + kv * kv).sqrt() {
            continue;
        }
        let f = |i: usize| {
            let (cs, sn) = table[i % steps];
            k0 + ku * cs + kv * sn
        };
        let mut prev = f(0);
        for i in 1..=steps {
            let cur = f(i);
            if (prev < 0.0) != (cur < 0.0) {
                let s = prev / (prev - cur);
                let (c0, s0) = table[i - 1];
                let (c1, s1) = table[i % steps];
                let p = center + (u * (c0 + s * (c1 - c0)) + v * (s0 + s * (s1 - s0))) * radius;
                if inside_triangle(&p, &a, &b, &c, &m) {
                    total += 1;
                }
            }
            prev = cur;
        }
    }
    total
}

fn inside_triangle(p: &Pt3, a: &Pt3, b: &Pt3, c: &Pt3, m: &Vec3) -> bool {
    let e0 = (b - a).cross(&(p - a)).dot(m);
    let e1 = (c - b).cross(&(p - b)).dot(m);
    let e2 = (a - c).cross(&(p - c)).dot(m);
    (e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0) || (e0 <= 0.0 && e1 <= 0.0 && e2 <= 0.0)
}

pub fn angle_table(steps: usize) -> Vec<(f64, f64)> {
    (0..steps)
        .map(|i| {
            let th = std::f64::consts::TAU * i as f64 / steps as f64;
            (th.cos(), th.sin())
        })
        .collect()
}

/// Intersection counts for all `layers x circles` circles of a descriptor
/// with support radius `r` anchored at (`p`, `n`), layer-major.
pub fn sampled_grid(mesh: &Mesh, p: &Pt3, n: &Vec3, circles: usize, layers: usize, r: f64, steps: usize, table: &[(f64, f64)]) -> Vec<u32> {
    let n = n.normalize();
    let mut out = Vec::with_capacity(circles * layers);
    for l in 0..layers {
        let offset = r * ((l as f64 + 0.5) / layers as f64 - 0.5);
        let center = p + n * offset;
        for i in 0..circles {
            let radius = (i + 1) as f64 * r / circles as f64;
            out.push(sampled_circle_crossings(mesh, &center, &n, radius, steps, table));
        }
    }
    out
}

/// Triangle-soup scene: `count` triangles with corners scattered around
/// points inside a cube of half-edge `spread` centred on the origin.
pub fn random_soup<R: rand::Rng>(rng: &mut R, count: usize, spread: f64, size: f64) -> Mesh {
    let mut vertices = Vec::with_capacity(count * 3);
    let mut triangles = Vec::with_capacity(count);
    for t in 0..count {
        let c = Vec3::new(rng.random_range(-spread..spread), rng.random_range(-spread..spread), rng.random_range(-spread..spread));
        for _ in 0..3 {
            let o = Vec3::new(rng.random_range(-size..size), rng.random_range(-size..size), rng.random_range(-size..size));
            vertices.push(Pt3::from(c + o));
        }
        let b = 3 * t as u32;
        triangles.push([b, b + 1, b + 2]);
    }
    Mesh::with_computed_normals(vertices, triangles).expect("valid soup")
}

pub fn random_unit<R: rand::Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}
