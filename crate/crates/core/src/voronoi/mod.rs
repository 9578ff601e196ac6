//! Voronoi examination points and per-sample area weights.
//!
//! The Voronoi diagram is taken as the dual of the Delaunay tetrahedralization:
//! every tetrahedron contributes its circumcenter as a Voronoi vertex, and
//! every triangle contributes a Voronoi edge on the line through the
//! triangle's circumcenter along its normal. Hull triangles contribute rays.
//!
//! Examination points are the Voronoi vertices inside a scaled bounding box
//! plus every point where a Voronoi edge crosses the box boundary.

mod area;
mod delaunay;
pub mod predicates;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

pub use area::{cut_polygon_area, estimate_area_weights, finalize_area_weights, AreaWeights, MIN_VALID_AREA};
pub use delaunay::{delaunay_tetrahedralize, TetComplex, HULL, JITTER_RELATIVE};

use crate::geometry::{bounds, Point3, Vec3};
use crate::math;
use crate::{Error, Result};

/// Default enlargement of the bounding box that clips the diagram.
pub const DEFAULT_BBOX_SCALE: f64 = 1.3;

/// Examination points closer than this fraction of the box diagonal are merged.
pub const MERGE_RELATIVE: f64 = 1e-7;

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min: Point3,
    pub max: Point3,
}

impl BoundingBox {
    /// Bounding box of `points`, scaled by `scale` about its center.
    /// Cube of edge `scale` times the longest extent of `points`, centered on
    /// their bounding box. A per-axis scale would hug flat inputs and leave
    /// no exterior on their thin sides.
    pub fn scaled_around(points: &[Point3], scale: f64) -> Self {
        let (lo, hi) = bounds(points);
        let c = (lo + hi) * 0.5;
        let e = hi - lo;
        let half = 0.5 * scale * e.x.max(e.y).max(e.z);
        let h = Point3::new(half, half, half);
        BoundingBox { min: c - h, max: c + h }
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    pub fn contains(&self, p: Point3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    /// Distance by which `p` lies outside the box (0 inside).
    pub fn excess(&self, p: Point3) -> f64 {
        (0..3)
            .map(|a| (self.min[a] - p[a]).max(p[a] - self.max[a]).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn clamp(&self, p: Point3) -> Point3 {
        Point3::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
            p.z.clamp(self.min.z, self.max.z),
        )
    }

    /// Parameter interval `[enter, exit]` where `origin + s * dir` is inside.
    fn line_interval(&self, origin: Point3, dir: Vec3) -> Option<(f64, f64)> {
        let mut enter = f64::NEG_INFINITY;
        let mut exit = f64::INFINITY;
        for a in 0..3 {
            if dir[a] == 0.0 {
                if origin[a] < self.min[a] || origin[a] > self.max[a] {
                    return None;
                }
                continue;
            }
            let t1 = (self.min[a] - origin[a]) / dir[a];
            let t2 = (self.max[a] - origin[a]) / dir[a];
            enter = enter.max(t1.min(t2));
            exit = exit.min(t1.max(t2));
        }
        (enter <= exit).then_some((enter, exit))
    }
}

/// Where an examination point came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExamKind {
    /// Circumcenter of the given tetrahedron.
    Circumcenter { tet: u32 },
    /// Crossing of the Voronoi edge dual to the given triangle with the box.
    BoxCrossing { face: [u32; 3] },
}

/// Examination points and the Voronoi cell membership of every sample.
#[derive(Debug, Clone)]
pub struct VoronoiStructure {
    pub exam_points: Vec<Point3>,
    pub exam_kinds: Vec<ExamKind>,
    /// For each sample, sorted indices into `exam_points` on its cell.
    pub cell_vertex_ids: Vec<Vec<u32>>,
    /// Delaunay neighbors of each sample; these bound its Voronoi cell.
    pub neighbors: Vec<Vec<u32>>,
    /// Generator positions the diagram was built from.
    pub sites: Vec<Point3>,
    pub bbox: BoundingBox,
}

impl VoronoiStructure {
    /// Number of examination points.
    pub fn len(&self) -> usize {
        self.exam_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exam_points.is_empty()
    }

    pub fn num_samples(&self) -> usize {
        self.cell_vertex_ids.len()
    }

    /// Tetrahedralizes `points` and extracts the clipped Voronoi structure.
    pub fn build(points: &[Point3], bbox_scale: f64) -> Result<Self> {
        let complex = delaunay_tetrahedralize(points)?;
        extract_voronoi(&complex, bbox_scale)
    }
}

/// Circumcenter of a tetrahedron (positively oriented under [`predicates::orient3d`]).
pub fn tet_circumcenter(q: [Point3; 4]) -> Point3 {
    let d1 = q[1] - q[0];
    let d2 = q[2] - q[0];
    let d3 = q[3] - q[0];
    // det[d1; d2; d3] equals -orient3d(q0, q1, q2, q3); the adaptive value is
    // far more accurate on flat tets than the naive triple product.
    let det = -predicates::orient3d(q[0], q[1], q[2], q[3]);
    let num = d2.cross(d3) * d1.norm_squared() + d3.cross(d1) * d2.norm_squared() + d1.cross(d2) * d3.norm_squared();
    q[0] + num / (2.0 * det)
}

/// Circumcenter and unit normal of a triangle; `None` when degenerate.
fn triangle_frame(a: Point3, b: Point3, c: Point3) -> Option<(Point3, Vec3)> {
    let ab = b - a;
    let ac = c - a;
    let n = ab.cross(ac);
    let n2 = n.norm_squared();
    if !(n2 > 0.0) {
        return None;
    }
    let off = (n.cross(ab) * ac.norm_squared() + ac.cross(n) * ab.norm_squared()) / (2.0 * n2);
    let cc = a + off;
    cc.is_finite().then(|| (cc, n / math::sqrt(n2)))
}

/// Signed position along `cc + s * n` of the circumcenter of the triangle
/// (with circumcenter `cc`) extended by the apex `v`.
fn apex_offset(cc: Point3, n: Vec3, r2: f64, v: Point3) -> f64 {
    let w = cc - v;
    (r2 - w.norm_squared()) / (2.0 * n.dot(w))
}

/// Extracts examination points and cells from a tetrahedralization.
pub fn extract_voronoi(complex: &TetComplex, bbox_scale: f64) -> Result<VoronoiStructure> {
    if !(bbox_scale >= 1.0) || !bbox_scale.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "bbox scale must be finite and >= 1, got {bbox_scale}"
        )));
    }
    let n = complex.vertices.len();
    let bbox = BoundingBox::scaled_around(&complex.vertices, bbox_scale);
    let mut merger = Merger::new(MERGE_RELATIVE * bbox.diagonal());
    let mut cells: Vec<Vec<u32>> = alloc::vec![Vec::new(); n];

    for t in 0..complex.len() {
        let c = tet_circumcenter(complex.tet_points(t));
        if c.is_finite() && bbox.contains(c) {
            let id = merger.insert(c, ExamKind::Circumcenter { tet: t as u32 });
            for &v in &complex.tetrahedra[t] {
                cells[v as usize].push(id);
            }
        }
    }

    for t in 0..complex.len() {
        for k in 0..4 {
            let other = complex.adjacency[t][k];
            if other != HULL && (other as usize) < t {
                continue;
            }
            let face = complex.face(t, k);
            let [a, b, c] = face.map(|v| complex.vertices[v as usize]);
            let Some((cc, nrm)) = triangle_frame(a, b, c) else {
                continue;
            };
            let r2 = (a - cc).norm_squared();
            let apex = complex.vertices[complex.tetrahedra[t][k] as usize];
            let s_here = apex_offset(cc, nrm, r2, apex);
            let (lo, hi) = if other == HULL {
                // The ray leaves the hull away from the apex.
                if nrm.dot(apex - cc) > 0.0 {
                    (f64::NEG_INFINITY, s_here)
                } else {
                    (s_here, f64::INFINITY)
                }
            } else {
                let back = complex.adjacency[other as usize]
                    .iter()
                    .position(|&x| x as usize == t)
                    .expect("adjacency is symmetric");
                let apex2 = complex.vertices[complex.tetrahedra[other as usize][back] as usize];
                let s_there = apex_offset(cc, nrm, r2, apex2);
                (s_here.min(s_there), s_here.max(s_there))
            };
            if lo.is_nan() || hi.is_nan() {
                continue;
            }
            let Some((enter, exit)) = bbox.line_interval(cc, nrm) else {
                continue;
            };
            for s in [enter, exit] {
                if lo < s && s < hi {
                    let p = bbox.clamp(cc + nrm * s);
                    let id = merger.insert(p, ExamKind::BoxCrossing { face });
                    for &v in &face {
                        cells[v as usize].push(id);
                    }
                }
            }
        }
    }

    for (i, cell) in cells.iter_mut().enumerate() {
        cell.sort_unstable();
        cell.dedup();
        if cell.is_empty() {
            return Err(Error::Degenerate(format!(
                "sample {i} has no examination points in its cell"
            )));
        }
    }
    let (exam_points, exam_kinds) = merger.finish();
    if exam_points.is_empty() {
        return Err(Error::Degenerate("no examination points".into()));
    }
    Ok(VoronoiStructure {
        exam_points,
        exam_kinds,
        cell_vertex_ids: cells,
        neighbors: complex.vertex_neighbors(),
        sites: complex.vertices.clone(),
        bbox,
    })
}

/// Greedy deduplication of nearly coincident points on a hash grid.
struct Merger {
    tol: f64,
    grid: BTreeMap<[i64; 3], Vec<u32>>,
    points: Vec<Point3>,
    kinds: Vec<ExamKind>,
}

impl Merger {
    fn new(tol: f64) -> Self {
        Merger {
            tol,
            grid: BTreeMap::new(),
            points: Vec::new(),
            kinds: Vec::new(),
        }
    }

    fn key(&self, p: Point3) -> [i64; 3] {
        [p.x, p.y, p.z].map(|c| math::floor(c / self.tol) as i64)
    }

    fn insert(&mut self, p: Point3, kind: ExamKind) -> u32 {
        let k = self.key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &id in ids {
                            if self.points[id as usize].distance(p) <= self.tol {
                                return id;
                            }
                        }
                    }
                }
            }
        }
        let id = self.points.len() as u32;
        self.points.push(p);
        self.kinds.push(kind);
        self.grid.entry(k).or_default().push(id);
        id
    }

    fn finish(self) -> (Vec<Point3>, Vec<ExamKind>) {
        (self.points, self.kinds)
    }
}
