use std::cell::RefCell;
use std::collections::HashMap;

use crate::mesh::{Mesh, Pt3, Vec3};

/// Triangles whose bounding box covers more cells than this are kept in a
/// separate list that every query scans.
const MAX_CELLS_PER_TRIANGLE: i64 = 512;

pub(crate) fn aabb_sphere_overlap(lo: &Vec3, hi: &Vec3, center: &Vec3, radius: f64) -> bool {
    let mut d2 = 0.0;
    for k in 0..3 {
        let v = center[k];
        let e = if v < lo[k] {
            lo[k] - v
        } else if v > hi[k] {
            v - hi[k]
        } else {
            0.0
        };
        d2 += e * e;
    }
    d2 <= radius * radius
}

/// Uniform hash grid over triangle bounding boxes.
pub struct TriangleIndex {
    cell: f64,
    cells: HashMap<(i64, i64, i64), Vec<u32>>,
    large: Vec<u32>,
    bounds: Vec<(Vec3, Vec3)>,
}

thread_local! {
    static STAMPS: RefCell<(u32, Vec<u32>)> = const { RefCell::new((0, Vec::new())) };
}

impl TriangleIndex {
    pub fn build(mesh: &Mesh, cell: f64) -> Self {
        let mut cells: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        let mut large = Vec::new();
        let mut bounds = Vec::with_capacity(mesh.triangle_count());
        for t in 0..mesh.triangle_count() {
            let [a, b, c] = mesh.triangle_vertices(t);
            let lo = a.coords.inf(&b.coords).inf(&c.coords);
            let hi = a.coords.sup(&b.coords).sup(&c.coords);
            bounds.push((lo, hi));
            let clo = lo.map(|v| (v / cell).floor() as i64);
            let chi = hi.map(|v| (v / cell).floor() as i64);
            let span = (chi - clo).map(|v| v + 1);
            if span.x * span.y * span.z > MAX_CELLS_PER_TRIANGLE {
                large.push(t as u32);
                continue;
            }
            for x in clo.x..=chi.x {
                for y in clo.y..=chi.y {
                    for z in clo.z..=chi.z {
                        cells.entry((x, y, z)).or_default().push(t as u32);
                    }
                }
            }
        }
        Self { cell, cells, large, bounds }
    }

    /// Triangles whose bounding box overlaps the sphere, in ascending order.
    pub fn query(&self, mesh: &Mesh, center: &Pt3, radius: f64) -> Vec<usize> {
        debug_assert_eq!(mesh.triangle_count(), self.bounds.len());
        let c = center.coords;
        let lo = (c - Vec3::repeat(radius)).map(|v| (v / self.cell).floor() as i64);
        let hi = (c + Vec3::repeat(radius)).map(|v| (v / self.cell).floor() as i64);
        let mut out = Vec::new();
        STAMPS.with(|s| {
            let (stamp, marks) = &mut *s.borrow_mut();
            if marks.len() < self.bounds.len() {
                marks.resize(self.bounds.len(), 0);
            }
            *stamp = stamp.wrapping_add(1);
            if *stamp == 0 {
                marks.iter_mut().for_each(|m| *m = 0);
                *stamp = 1;
            }
            let mut visit = |t: u32| {
                let ti = t as usize;
                if marks[ti] != *stamp {
                    marks[ti] = *stamp;
                    let (blo, bhi) = &self.bounds[ti];
                    if aabb_sphere_overlap(blo, bhi, &c, radius) {
                        out.push(ti);
                    }
                }
            };
            for x in lo.x..=hi.x {
                for y in lo.y..=hi.y {
                    for z in lo.z..=hi.z {
                        if let Some(list) = self.cells.get(&(x, y, z)) {
                            list.iter().for_each(|&t| visit(t));
                        }
                    }
                }
            }
            self.large.iter().for_each(|&t| visit(t));
        });
        out.sort_unstable();
        out
    }
}
