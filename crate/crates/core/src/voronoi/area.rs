//! Parameter-free area weights from planar sections of Voronoi cells.
//!
//! For sample `p` with farthest cell vertex `q_max`, the cell (clipped to the
//! box) is cut by the plane through `p` orthogonal to `q_max - p`. The area of
//! the resulting convex polygon is the weight. The polygon is computed by
//! clipping a large square in the plane against the bisector half-spaces of
//! the Delaunay neighbors and the six box half-spaces.

use alloc::vec::Vec;

use super::{BoundingBox, VoronoiStructure};
use crate::geometry::{check_len, Point3, PointCloud, Vec3};
use crate::{Error, Result};

/// Sections smaller than this are treated as degenerate.
pub const MIN_VALID_AREA: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct AreaWeights {
    pub areas: Vec<f64>,
    /// Indices whose section was degenerate and received the fallback value.
    pub fallback: Vec<u32>,
}

/// Area of the section of the cell `{x : (x - p)·(s - p) <= |s - p|²/2 for every
/// neighbor site s} ∩ bbox` by the plane through `plane_point` with normal
/// `plane_normal`, restricted to the in-plane square of half-size `extent`
/// centered at `plane_point`.
pub fn cut_polygon_area(
    p: Point3,
    neighbor_sites: &[Point3],
    bbox: &BoundingBox,
    plane_point: Point3,
    plane_normal: Vec3,
    extent: f64,
) -> f64 {
    let n = plane_normal.normalized();
    if n.norm_squared() == 0.0 {
        return 0.0;
    }
    let helper = if n.x.abs() < 0.6 {
        Point3::new(1.0, 0.0, 0.0)
    } else {
        Point3::new(0.0, 1.0, 0.0)
    };
    let e1 = n.cross(helper).normalized();
    let e2 = n.cross(e1);
    let o = plane_point;
    let h = extent.min(2.0 * bbox.diagonal() + (o - bbox.clamp(o)).norm());
    let mut poly: Vec<[f64; 2]> = alloc::vec![[-h, -h], [h, -h], [h, h], [-h, h]];
    let mut scratch = Vec::with_capacity(16);

    // Half-space  x·g <= c  becomes  s (e1·g) + t (e2·g) <= c - o·g.
    let mut clip = |poly: &mut Vec<[f64; 2]>, g: Vec3, c: f64| {
        clip_halfplane(poly, &mut scratch, [e1.dot(g), e2.dot(g)], c - o.dot(g));
    };
    for a in 0..3 {
        let mut unit = [0.0; 3];
        unit[a] = 1.0;
        let g = Point3::from(unit);
        clip(&mut poly, g, bbox.max[a]);
        clip(&mut poly, -g, -bbox.min[a]);
    }
    for &s in neighbor_sites {
        let g = s - p;
        clip(&mut poly, g, p.dot(g) + 0.5 * g.norm_squared());
        if poly.len() < 3 {
            return 0.0;
        }
    }
    polygon_area(&poly)
}

fn clip_halfplane(poly: &mut Vec<[f64; 2]>, out: &mut Vec<[f64; 2]>, g: [f64; 2], c: f64) {
    if poly.is_empty() {
        return;
    }
    out.clear();
    let f = |q: [f64; 2]| q[0] * g[0] + q[1] * g[1] - c;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (fa, fb) = (f(a), f(b));
        if fa <= 0.0 {
            out.push(a);
        }
        if (fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0) {
            let t = fa / (fa - fb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    core::mem::swap(poly, out);
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        s += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * s.abs()
}

/// Replaces degenerate sections (area below [`MIN_VALID_AREA`] or
/// non-finite) with the median of the valid ones, or `diag² / N` when none is
/// valid.
pub fn finalize_area_weights(raw: &[f64], diag: f64) -> AreaWeights {
    let valid = |a: f64| a.is_finite() && a >= MIN_VALID_AREA;
    let mut good: Vec<f64> = raw.iter().copied().filter(|&a| valid(a)).collect();
    let fill = if good.is_empty() {
        diag * diag / raw.len().max(1) as f64
    } else {
        good.sort_unstable_by(f64::total_cmp);
        let m = good.len();
        if m % 2 == 1 {
            good[m / 2]
        } else {
            0.5 * (good[m / 2 - 1] + good[m / 2])
        }
    };
    let mut fallback = Vec::new();
    let areas = raw
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            if valid(a) {
                a
            } else {
                fallback.push(i as u32);
                fill
            }
        })
        .collect();
    AreaWeights { areas, fallback }
}

/// Cut-polygon area weight of every sample.
pub fn estimate_area_weights(vor: &VoronoiStructure, cloud: &PointCloud) -> Result<AreaWeights> {
    check_len(vor.num_samples(), cloud.len())?;
    if vor.is_empty() {
        return Err(Error::Degenerate("no examination points".into()));
    }
    let pts = &cloud.points;
    let section = |i: usize| {
        let p = pts[i];
        let far = vor.cell_vertex_ids[i]
            .iter()
            .map(|&id| vor.exam_points[id as usize])
            .max_by(|a, b| a.distance(p).total_cmp(&b.distance(p)));
        let Some(far) = far else { return 0.0 };
        let nbrs: Vec<Point3> = vor.neighbors[i].iter().map(|&j| pts[j as usize]).collect();
        // Hull cells at sharp convex features are wedges bounded only by the
        // box; keep the section at the scale of the sample's neighborhood.
        let mut dist: Vec<f64> = nbrs.iter().map(|s| s.distance(p)).collect();
        let reach = if dist.is_empty() {
            f64::INFINITY
        } else {
            let mid = dist.len() / 2;
            *dist.select_nth_unstable_by(mid, f64::total_cmp).1
        };
        cut_polygon_area(p, &nbrs, &vor.bbox, p, far - p, reach)
    };
    #[cfg(feature = "std")]
    let raw: Vec<f64> = {
        use rayon::prelude::*;
        (0..pts.len()).into_par_iter().map(section).collect()
    };
    #[cfg(not(feature = "std"))]
    let raw: Vec<f64> = (0..pts.len()).map(section).collect();
    Ok(finalize_area_weights(&raw, vor.bbox.diagonal()))
}
