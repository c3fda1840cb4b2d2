use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ply_rs::parser::Parser;
use ply_rs::ply::{DefaultElement, Property};

use super::{Mesh, Pt3, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(Self::Obj),
            "ply" => Some(Self::Ply),
            _ => None,
        }
    }
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedMesh { path: path.to_path_buf(), reason: reason.into() }
}

/// Loads a mesh, picking the format from the file extension.
pub fn load_mesh_auto(path: &Path) -> Result<Mesh> {
    let format = MeshFormat::from_path(path).ok_or_else(|| malformed(path, "unknown extension"))?;
    load_mesh(path, format)
}

pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<Mesh> {
    if !path.is_file() {
        return Err(Error::IoPath {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "mesh file not found"),
        });
    }
    let (vertices, normals, triangles) = match format {
        MeshFormat::Obj => read_obj(path)?,
        MeshFormat::Ply => read_ply(path)?,
    };
    if triangles.is_empty() {
        return Err(malformed(path, "no faces"));
    }
    let mesh = finish(vertices, normals, triangles).map_err(|e| match e {
        Error::OutOfRange(r) => malformed(path, r),
        other => other,
    })?;
    if mesh.is_zero_area() {
        return Err(Error::ZeroAreaMesh);
    }
    Ok(mesh)
}

type RawMesh = (Vec<Pt3>, Option<Vec<Vec3>>, Vec<[u32; 3]>);

fn finish(vertices: Vec<Pt3>, normals: Option<Vec<Vec3>>, triangles: Vec<[u32; 3]>) -> Result<Mesh> {
    match normals {
        Some(n) if n.len() == vertices.len() && n.iter().all(|v| v.norm() > 1e-12) => {
            Mesh::new(vertices, n, triangles)
        }
        _ => Mesh::with_computed_normals(vertices, triangles),
    }
}

fn read_obj(path: &Path) -> Result<RawMesh> {
    let options = tobj::LoadOptions {
        single_index: true,
        triangulate: true,
        ignore_points: true,
        ignore_lines: true,
    };
    let (models, _materials) = tobj::load_obj(path, &options).map_err(|e| malformed(path, e.to_string()))?;
    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    let mut have_normals = true;
    let mut triangles = Vec::new();
    for model in models {
        let m = model.mesh;
        let base = vertices.len() as u32;
        let count = m.positions.len() / 3;
        vertices.extend(m.positions.chunks_exact(3).map(|p| Pt3::new(p[0] as f64, p[1] as f64, p[2] as f64)));
        if m.normals.len() == m.positions.len() {
            normals.extend(m.normals.chunks_exact(3).map(|n| Vec3::new(n[0] as f64, n[1] as f64, n[2] as f64)));
        } else {
            have_normals = false;
        }
        for t in m.indices.chunks_exact(3) {
            if t.iter().any(|&i| i as usize >= count) {
                return Err(malformed(path, "face index out of range"));
            }
            triangles.push([base + t[0], base + t[1], base + t[2]]);
        }
    }
    Ok((vertices, have_normals.then_some(normals), triangles))
}

fn scalar(p: &Property) -> Option<f64> {
    Some(match *p {
        Property::Char(v) => v as f64,
        Property::UChar(v) => v as f64,
        Property::Short(v) => v as f64,
        Property::UShort(v) => v as f64,
        Property::Int(v) => v as f64,
        Property::UInt(v) => v as f64,
        Property::Float(v) => v as f64,
        Property::Double(v) => v,
        _ => return None,
    })
}

fn index_list(p: &Property) -> Option<Vec<i64>> {
    Some(match p {
        Property::ListChar(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListUChar(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListShort(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListUShort(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListInt(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListUInt(v) => v.iter().map(|&x| x as i64).collect(),
        _ => return None,
    })
}

fn read_ply(path: &Path) -> Result<RawMesh> {
    let file = File::open(path).map_err(|source| Error::IoPath { path: path.to_path_buf(), source })?;
    let parser = Parser::<DefaultElement>::new();
    let ply = parser
        .read_ply(&mut BufReader::new(file))
        .map_err(|e| malformed(path, e.to_string()))?;
    let vertex_elems = ply.payload.get("vertex").ok_or_else(|| malformed(path, "no vertex element"))?;
    let mut vertices = Vec::with_capacity(vertex_elems.len());
    let mut normals = Vec::with_capacity(vertex_elems.len());
    let mut have_normals = true;
    for v in vertex_elems {
        let get = |k: &str| v.get(k).and_then(scalar);
        match (get("x"), get("y"), get("z")) {
            (Some(x), Some(y), Some(z)) => vertices.push(Pt3::new(x, y, z)),
            _ => return Err(malformed(path, "vertex without x/y/z")),
        }
        match (get("nx"), get("ny"), get("nz")) {
            (Some(x), Some(y), Some(z)) => normals.push(Vec3::new(x, y, z)),
            _ => have_normals = false,
        }
    }
    let n = vertices.len() as i64;
    let mut triangles = Vec::new();
    for f in ply.payload.get("face").map(|v| v.as_slice()).unwrap_or(&[]) {
        let list = f
            .get("vertex_indices")
            .or_else(|| f.get("vertex_index"))
            .and_then(index_list)
            .ok_or_else(|| malformed(path, "face without vertex_indices"))?;
        if list.iter().any(|&i| i < 0 || i >= n) {
            return Err(malformed(path, "face index out of range"));
        }
        for k in 1..list.len().saturating_sub(1) {
            triangles.push([list[0] as u32, list[k] as u32, list[k + 1] as u32]);
        }
    }
    Ok((vertices, have_normals.then_some(normals), triangles))
}

/// Writes `v`, `vn` and `f v//vn` records.
pub fn write_obj(path: &Path, mesh: &Mesh) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::IoPath { path: path.to_path_buf(), source })?;
    let mut out = BufWriter::new(file);
    for p in &mesh.vertices {
        writeln!(out, "v {} {} {}", p.x, p.y, p.z)?;
    }
    for n in &mesh.normals {
        writeln!(out, "vn {} {} {}", n.x, n.y, n.z)?;
    }
    for t in &mesh.triangles {
        let [a, b, c] = t.map(|i| i + 1);
        writeln!(out, "f {a}//{a} {b}//{b} {c}//{c}")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    const CUBE_OBJ: &str = "\
v -1 -1 -1\nv 1 -1 -1\nv 1 1 -1\nv -1 1 -1\nv -1 -1 1\nv 1 -1 1\nv 1 1 1\nv -1 1 1
f 1 3 2\nf 1 4 3\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5\nf 2 3 7\nf 2 7 6\nf 3 4 8\nf 3 8 7\nf 4 1 5\nf 4 5 8
";

    #[test]
    fn cube_obj_loads_with_computed_normals() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.obj");
        fs::write(&path, CUBE_OBJ).unwrap();
        let mesh = load_mesh(&path, MeshFormat::Obj).unwrap();
        assert_eq!(mesh.triangle_count(), 12);
        assert_eq!(mesh.vertex_count(), 8);
        for n in &mesh.normals {
            assert!((n.norm() - 1.0).abs() < 1e-6);
        }
        // corner normal points outward along the diagonal
        let n0 = mesh.normals[0];
        assert!(n0.x < 0.0 && n0.y < 0.0 && n0.z < 0.0);
    }

    #[test]
    fn quad_face_is_fan_triangulated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("quad.obj");
        fs::write(&path, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\n").unwrap();
        let mesh = load_mesh(&path, MeshFormat::Obj).unwrap();
        assert_eq!(mesh.triangle_count(), 2);
        assert!(mesh.normals.iter().all(|n| (n - Vec3::z()).norm() < 1e-9));
    }

    #[test]
    fn empty_and_missing_files_fail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.obj");
        fs::write(&path, "").unwrap();
        assert!(matches!(load_mesh(&path, MeshFormat::Obj), Err(Error::MalformedMesh { .. })));
        assert!(load_mesh(&dir.path().join("nope.obj"), MeshFormat::Obj).is_err());

        let flat = dir.path().join("flat.obj");
        fs::write(&flat, "v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n").unwrap();
        assert!(matches!(load_mesh(&flat, MeshFormat::Obj), Err(Error::ZeroAreaMesh)));
    }

    #[test]
    fn ply_ascii_and_binary() {
        let dir = tempfile::tempdir().unwrap();
        let ascii = dir.path().join("a.ply");
        fs::write(
            &ascii,
            "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\n\
             element face 1\nproperty list uchar int vertex_indices\nend_header\n\
             0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n",
        )
        .unwrap();
        let mesh = load_mesh(&ascii, MeshFormat::Ply).unwrap();
        assert_eq!(mesh.triangle_count(), 2);

        let bin = dir.path().join("b.ply");
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 3\nproperty float x\nproperty float y\n\
property float z\nproperty float nx\nproperty float ny\nproperty float nz\nelement face 1\n\
property list uchar uint vertex_indices\nend_header\n"
            .to_vec();
        for v in [[0f32, 0., 0., 0., 0., 1.], [1., 0., 0., 0., 0., 1.], [0., 1., 0., 0., 0., 1.]] {
            for x in v {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
        }
        bytes.push(3);
        for i in [0u32, 1, 2] {
            bytes.extend_from_slice(&i.to_le_bytes());
        }
        fs::write(&bin, bytes).unwrap();
        let mesh = load_mesh(&bin, MeshFormat::Ply).unwrap();
        assert_eq!(mesh.triangle_count(), 1);
        assert_eq!(mesh.normals[2], Vec3::z());
    }

    #[test]
    fn obj_writer_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.obj");
        let sphere = super::super::shapes::icosphere(1);
        write_obj(&path, &sphere).unwrap();
        let back = load_mesh_auto(&path).unwrap();
        assert_eq!(back.triangle_count(), sphere.triangle_count());
        for t in 0..sphere.triangle_count() {
            for (a, b) in back.triangle_vertices(t).iter().zip(sphere.triangle_vertices(t)) {
                assert!((a - b).norm() < 1e-6);
            }
        }
    }
}
