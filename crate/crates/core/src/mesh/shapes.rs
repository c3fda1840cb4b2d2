//! Procedural primitive meshes.

use std::collections::HashMap;
use std::f64::consts::TAU;

use super::{Mesh, Pt3, Vec3};

/// Unit icosphere at the origin with radial normals. Level `n` has
/// `20 * 4^n` triangles.
pub fn icosphere(subdivisions: u32) -> Mesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Vec3::new(v[0], v[1], v[2]).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    Mesh {
        vertices: verts.iter().map(|v| Pt3::from(*v)).collect(),
        normals: verts,
        triangles: faces,
    }
}

/// Axis-aligned box centred at the origin; four vertices per face so every
/// face has its own flat normal (24 vertices, 12 triangles).
pub fn box_mesh(half: Vec3) -> Mesh {
    let mut mesh = Mesh::default();
    for axis in 0..3 {
        for sign in [-1.0, 1.0] {
            let mut n = Vec3::zeros();
            n[axis] = sign;
            let u_axis = (axis + 1) % 3;
            let v_axis = (axis + 2) % 3;
            let base = mesh.vertices.len() as u32;
            for (su, sv) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
                let mut p = Vec3::zeros();
                p[axis] = sign * half[axis];
                p[u_axis] = su * half[u_axis];
                p[v_axis] = sv * half[v_axis];
                mesh.vertices.push(Pt3::from(p));
                mesh.normals.push(n);
            }
            if sign > 0.0 {
                mesh.triangles.push([base, base + 1, base + 2]);
                mesh.triangles.push([base, base + 2, base + 3]);
            } else {
                mesh.triangles.push([base, base + 2, base + 1]);
                mesh.triangles.push([base, base + 3, base + 2]);
            }
        }
    }
    mesh
}

/// A planar quad split into two triangles.
pub fn quad(corners: [Pt3; 4]) -> Mesh {
    Mesh::with_computed_normals(corners.to_vec(), vec![[0, 1, 2], [0, 2, 3]]).expect("indices in range")
}

/// Torus around the Z axis.
pub fn torus(major: f64, minor: f64, segments: u32, rings: u32) -> Mesh {
    let mut mesh = Mesh::default();
    for i in 0..segments {
        let u = TAU * i as f64 / segments as f64;
        let dir = Vec3::new(u.cos(), u.sin(), 0.0);
        for j in 0..rings {
            let v = TAU * j as f64 / rings as f64;
            let n = dir * v.cos() + Vec3::z() * v.sin();
            mesh.vertices.push(Pt3::from(dir * major + n * minor));
            mesh.normals.push(n);
        }
    }
    let idx = |i: u32, j: u32| (i % segments) * rings + (j % rings);
    for i in 0..segments {
        for j in 0..rings {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            mesh.triangles.push([a, b, c]);
            mesh.triangles.push([a, c, d]);
        }
    }
    mesh
}

/// Closed cylinder along Z with flat caps.
pub fn cylinder(radius: f64, half_height: f64, segments: u32) -> Mesh {
    let mut mesh = Mesh::default();
    for z in [-half_height, half_height] {
        for i in 0..segments {
            let a = TAU * i as f64 / segments as f64;
            mesh.vertices.push(Pt3::new(radius * a.cos(), radius * a.sin(), z));
            mesh.normals.push(Vec3::new(a.cos(), a.sin(), 0.0));
        }
    }
    for i in 0..segments {
        let j = (i + 1) % segments;
        mesh.triangles.push([i, j, j + segments]);
        mesh.triangles.push([i, j + segments, i + segments]);
    }
    for (z, n) in [(-half_height, -Vec3::z()), (half_height, Vec3::z())] {
        let center = mesh.vertices.len() as u32;
        mesh.vertices.push(Pt3::new(0.0, 0.0, z));
        mesh.normals.push(n);
        let ring = mesh.vertices.len() as u32;
        for i in 0..segments {
            let a = TAU * i as f64 / segments as f64;
            mesh.vertices.push(Pt3::new(radius * a.cos(), radius * a.sin(), z));
            mesh.normals.push(n);
        }
        for i in 0..segments {
            let j = (i + 1) % segments;
            if n.z > 0.0 {
                mesh.triangles.push([center, ring + i, ring + j]);
            } else {
                mesh.triangles.push([center, ring + j, ring + i]);
            }
        }
    }
    mesh
}
