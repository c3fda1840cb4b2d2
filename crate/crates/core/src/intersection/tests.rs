use super::*;
use crate::mesh::shapes;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn up_at_origin() -> OrientedPoint {
    OrientedPoint::new(Pt3::origin(), Vec3::z()).unwrap()
}

#[test]
fn circle_geometry_examples() {
    let config = DescriptorConfig::new(64, 64, 0.3).unwrap();
    let g = circle_geometry(&config, &up_at_origin(), 31, 0).unwrap();
    assert!((g.center - Pt3::new(0.0, 0.0, -0.00234375)).norm() < 1e-15);
    assert!((g.radius - 0.3 / 64.0).abs() < 1e-15);
    assert_eq!(g.plane_normal, Vec3::z());

    let bottom = circle_geometry(&config, &up_at_origin(), 0, 0).unwrap();
    let top = circle_geometry(&config, &up_at_origin(), 63, 0).unwrap();
    assert!(((top.center.z - bottom.center.z) - 0.3 * 63.0 / 64.0).abs() < 1e-12);
    assert_eq!(circle_geometry(&config, &up_at_origin(), 0, 63).unwrap().radius, 0.3);

    assert!(circle_geometry(&config, &up_at_origin(), 64, 0).is_err());
    assert!(circle_geometry(&config, &up_at_origin(), 0, 64).is_err());
}

#[test]
fn config_validation() {
    assert!(DescriptorConfig::new(1, 4, 1.0).is_err());
    assert!(DescriptorConfig::new(4, 0, 1.0).is_err());
    assert!(DescriptorConfig::new(4, 4, 0.0).is_err());
    let c = DescriptorConfig::for_image(63, 64, 0.3).unwrap();
    assert_eq!((c.circles_per_layer, c.image_width(), c.image_height()), (64, 63, 64));
}

fn quad_at_x(x: f64) -> Mesh {
    shapes::quad([
        Pt3::new(x, -2.0, -2.0),
        Pt3::new(x, 2.0, -2.0),
        Pt3::new(x, 2.0, 2.0),
        Pt3::new(x, -2.0, 2.0),
    ])
}

#[test]
fn single_circle_against_quad() {
    let n = Vec3::z();
    assert_eq!(count_circle_mesh_intersections(&quad_at_x(0.5), &Pt3::origin(), 1.0, &n), 2);
    assert_eq!(count_circle_mesh_intersections(&quad_at_x(2.0), &Pt3::origin(), 1.0, &n), 0);
    // coplanar triangles contribute nothing
    let flat = shapes::quad([
        Pt3::new(-2.0, -2.0, 0.0),
        Pt3::new(2.0, -2.0, 0.0),
        Pt3::new(2.0, 2.0, 0.0),
        Pt3::new(-2.0, 2.0, 0.0),
    ]);
    assert_eq!(count_circle_mesh_intersections(&flat, &Pt3::origin(), 1.0, &n), 0);
}

#[test]
fn empty_mesh_gives_zero_grid() {
    let config = DescriptorConfig::new(16, 16, 0.3).unwrap();
    let grid = compute_intersection_grid(&Mesh::default(), &up_at_origin(), &config);
    assert!(grid.counts().iter().all(|&c| c == 0));
}

#[test]
fn plane_through_axis_crosses_every_circle_twice() {
    let config = DescriptorConfig::new(64, 64, 0.3).unwrap();
    for angle in [0.0f64, 0.3, 1.1, 2.5] {
        let (c, s) = (angle.cos(), angle.sin());
        let corner = |u: f64, z: f64| Pt3::new(u * c, u * s, z);
        let plane = shapes::quad([corner(-1.0, -1.0), corner(1.0, -1.0), corner(1.0, 1.0), corner(-1.0, 1.0)]);
        let grid = compute_intersection_grid(&plane, &up_at_origin(), &config);
        assert!(grid.counts().iter().all(|&n| n == 2), "angle {angle}");
        assert_eq!(grid.to_quicci().popcount(), 0);
    }
}

fn random_scene(rng: &mut ChaCha8Rng, triangles: usize, extent: f64) -> Mesh {
    let mut vertices = Vec::new();
    let mut tris = Vec::new();
    for t in 0..triangles {
        let center = Vec3::new(
            rng.random_range(-extent..extent),
            rng.random_range(-extent..extent),
            rng.random_range(-extent..extent),
        );
        for _ in 0..3 {
            let off = Vec3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
            vertices.push(Pt3::from(center + off));
        }
        let b = 3 * t as u32;
        tris.push([b, b + 1, b + 2]);
    }
    Mesh::with_computed_normals(vertices, tris).unwrap()
}

#[test]
fn grid_path_agrees_with_single_circle_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let config = DescriptorConfig::new(12, 10, 0.3).unwrap();
    let origin = OrientedPoint::new(Pt3::new(0.01, -0.02, 0.03), Vec3::new(0.3, -0.2, 1.0)).unwrap();
    for _ in 0..5 {
        let mesh = random_scene(&mut rng, 60, 0.3);
        let grid = compute_intersection_grid(&mesh, &origin, &config);
        for layer in 0..config.layer_count {
            for circle in 0..config.circles_per_layer {
                let g = circle_geometry(&config, &origin, layer, circle).unwrap();
                let direct = count_circle_mesh_intersections(&mesh, &g.center, g.radius, &g.plane_normal);
                assert_eq!(grid.get(layer, circle), direct, "cell ({layer}, {circle})");
            }
        }
    }
}

#[test]
fn generator_matches_full_scan_and_supports_increments() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let config = DescriptorConfig::new(65, 64, 0.3).unwrap();
    let base = random_scene(&mut rng, 200, 0.6);
    let extra = random_scene(&mut rng, 100, 0.6);
    let generator = DescriptorGenerator::new(&base, config);
    let mut combined = base.clone();
    combined.append(&extra);
    for _ in 0..20 {
        let origin = OrientedPoint::new(
            Pt3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)),
            Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.1..1.0)),
        )
        .unwrap();
        let full = compute_intersection_grid(&base, &origin, &config);
        let mut grid = generator.grid(&origin);
        assert_eq!(grid, full);

        grid.accumulate(&extra, 0..extra.triangle_count());
        assert_eq!(grid, compute_intersection_grid(&combined, &origin, &config));
    }
}

#[test]
fn closed_sphere_counts_are_even() {
    let config = DescriptorConfig::new(33, 32, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let sphere = shapes::icosphere(2);
    for _ in 0..10 {
        let placed = crate::mesh::RigidPlacement {
            rotation: crate::mesh::RigidPlacement::random_rotation(&mut rng),
            translation: Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), 0.0) * 3.0,
        };
        let mesh = placed.apply(&sphere.fit_unit_sphere().unwrap());
        let origin = OrientedPoint::new(
            Pt3::new(rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2), rng.random_range(-0.2..0.2)),
            Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        )
        .unwrap();
        let grid = compute_intersection_grid(&mesh, &origin, &config);
        assert!(grid.counts().iter().all(|c| c % 2 == 0));
    }
}

#[test]
fn shared_edge_crossing_counted_once() {
    // The quad's diagonal runs from (0.5, 0, -1) to (1.5, 0, 1) and meets the
    // plane z = 0 at (1, 0, 0), exactly on the unit circle.
    let strip = shapes::quad([
        Pt3::new(0.5, 0.0, -1.0),
        Pt3::new(1.5, 0.0, -1.0),
        Pt3::new(1.5, 0.0, 1.0),
        Pt3::new(0.5, 0.0, 1.0),
    ]);
    assert_eq!(count_circle_mesh_intersections(&strip, &Pt3::origin(), 1.0, &Vec3::z()), 1);
    let mut flipped = strip.clone();
    flipped.triangles.iter_mut().for_each(|t| t.swap(1, 2));
    assert_eq!(count_circle_mesh_intersections(&flipped, &Pt3::origin(), 1.0, &Vec3::z()), 1);
}
