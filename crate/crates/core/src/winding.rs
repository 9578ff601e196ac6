//! Generalized winding numbers of oriented point clouds.
//!
//! `w(q) = Σ_i a_i (p_i - q)·n_i / (4π |p_i - q|³)`
//!
//! Every query is accumulated in sample-index order, so batch and single-point
//! evaluation agree bit for bit regardless of how queries are distributed
//! over threads.

use alloc::vec::Vec;

use crate::geometry::{check_len, spherical_to_cartesian, Point3, PointCloud, Vec3};
use crate::math;
use crate::voronoi::VoronoiStructure;
use crate::{Error, Result};

pub use mesh::{mesh_winding_oracle, TriangleMesh};

/// Contributions from samples closer than this to the query are skipped.
pub const SINGULARITY_EPS: f64 = 1e-12;

const SING2: f64 = SINGULARITY_EPS * SINGULARITY_EPS;

/// Winding number at every examination point.
#[derive(Debug, Clone, PartialEq)]
pub struct WindingField {
    pub values: Vec<f64>,
}

impl WindingField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Per-sample dipole moments `a_i n_i / 4π`; the kernel's only dependence on
/// normals and areas.
pub(crate) fn moments(areas: &[f64], normals: impl Iterator<Item = Vec3>) -> Vec<Vec3> {
    let inv = 1.0 / (4.0 * math::PI);
    areas.iter().zip(normals).map(|(&a, n)| n * (a * inv)).collect()
}

#[inline]
pub(crate) fn eval_at(q: Point3, points: &[Point3], moments: &[Vec3]) -> f64 {
    let mut w = 0.0;
    for (p, m) in points.iter().zip(moments) {
        let d = *p - q;
        let r2 = d.norm_squared();
        if r2 < SING2 {
            continue;
        }
        let r = math::sqrt(r2);
        w += m.dot(d) / (r2 * r);
    }
    w
}

/// Evaluates the field at all `queries`, in parallel when `std` is enabled.
pub(crate) fn eval_batch(queries: &[Point3], points: &[Point3], moments: &[Vec3], out: &mut Vec<f64>) {
    out.clear();
    #[cfg(feature = "std")]
    {
        use rayon::prelude::*;
        queries
            .par_iter()
            .map(|&q| eval_at(q, points, moments))
            .collect_into_vec(out);
    }
    #[cfg(not(feature = "std"))]
    out.extend(queries.iter().map(|&q| eval_at(q, points, moments)));
}

fn cloud_moments(cloud: &PointCloud) -> Result<Vec<Vec3>> {
    let normals = cloud
        .normals
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("cloud has no normals".into()))?;
    let areas = cloud
        .areas
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("cloud has no area weights".into()))?;
    check_len(cloud.len(), normals.len())?;
    check_len(cloud.len(), areas.len())?;
    Ok(moments(areas, normals.iter().map(|&n| spherical_to_cartesian(n))))
}

/// Winding number of the oriented, area-weighted cloud at `q`.
pub fn winding_number(q: Point3, cloud: &PointCloud) -> Result<f64> {
    if !q.is_finite() {
        return Err(Error::InvalidParameter("query point is not finite".into()));
    }
    Ok(eval_at(q, &cloud.points, &cloud_moments(cloud)?))
}

/// Winding number at every examination point of `vor`.
pub fn winding_field(vor: &VoronoiStructure, cloud: &PointCloud) -> Result<WindingField> {
    if vor.is_empty() {
        return Err(Error::Empty);
    }
    let m = cloud_moments(cloud)?;
    let mut values = Vec::new();
    eval_batch(&vor.exam_points, &cloud.points, &m, &mut values);
    Ok(WindingField { values })
}

pub mod mesh {
    //! Exact winding numbers of closed triangle meshes (signed solid angles),
    //! used as an oracle for the point-cloud field.

    use alloc::collections::BTreeMap;
    use alloc::vec::Vec;

    use crate::geometry::{Point3, Vec3};
    use crate::math;
    use crate::{Error, Result};

    /// Triangles are counter-clockwise when seen from outside.
    #[derive(Debug, Clone, PartialEq)]
    pub struct TriangleMesh {
        pub vertices: Vec<Point3>,
        pub triangles: Vec<[u32; 3]>,
    }

    impl TriangleMesh {
        /// Unit icosphere with outward orientation.
        pub fn icosphere(subdivisions: u32) -> Self {
            let t = (1.0 + math::sqrt(5.0)) / 2.0;
            let mut vertices: Vec<Point3> = [
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
            .map(|&a| Point3::from(a).normalized())
            .collect();
            let mut triangles: Vec<[u32; 3]> = alloc::vec![
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
                let mut mid: BTreeMap<(u32, u32), u32> = BTreeMap::new();
                let mut next = Vec::with_capacity(triangles.len() * 4);
                let mut midpoint = |a: u32, b: u32, vs: &mut Vec<Point3>| -> u32 {
                    let key = (a.min(b), a.max(b));
                    *mid.entry(key).or_insert_with(|| {
                        vs.push(((vs[a as usize] + vs[b as usize]) * 0.5).normalized());
                        (vs.len() - 1) as u32
                    })
                };
                for &[a, b, c] in &triangles {
                    let ab = midpoint(a, b, &mut vertices);
                    let bc = midpoint(b, c, &mut vertices);
                    let ca = midpoint(c, a, &mut vertices);
                    next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
                }
                triangles = next;
            }
            let mut mesh = TriangleMesh { vertices, triangles };
            // Enforce outward orientation face by face (the sphere is star-shaped).
            for tri in mesh.triangles.iter_mut() {
                let [a, b, c] = tri.map(|v| mesh.vertices[v as usize]);
                if (b - a).cross(c - a).dot(a + b + c) < 0.0 {
                    tri.swap(1, 2);
                }
            }
            mesh
        }

        /// The same surface with every triangle flipped.
        pub fn reversed(&self) -> Self {
            TriangleMesh {
                vertices: self.vertices.clone(),
                triangles: self.triangles.iter().map(|&[a, b, c]| [a, c, b]).collect(),
            }
        }

        /// Unit outward vertex normals (area-weighted face normals).
        pub fn vertex_normals(&self) -> Vec<Vec3> {
            let mut acc = alloc::vec![Point3::ZERO; self.vertices.len()];
            for tri in &self.triangles {
                let [a, b, c] = tri.map(|v| self.vertices[v as usize]);
                let n = (b - a).cross(c - a);
                for &v in tri {
                    acc[v as usize] += n;
                }
            }
            acc.into_iter().map(Point3::normalized).collect()
        }

        /// Unsigned distance from `q` to the surface.
        pub fn distance(&self, q: Point3) -> f64 {
            self.triangles
                .iter()
                .map(|tri| {
                    let [a, b, c] = tri.map(|v| self.vertices[v as usize]);
                    closest_on_triangle(q, a, b, c).distance(q)
                })
                .fold(f64::INFINITY, f64::min)
        }
    }

    /// Closest point on triangle `abc` to `p` (Voronoi-region walk).
    fn closest_on_triangle(p: Point3, a: Point3, b: Point3, c: Point3) -> Point3 {
        let ab = b - a;
        let ac = c - a;
        let ap = p - a;
        let d1 = ab.dot(ap);
        let d2 = ac.dot(ap);
        if d1 <= 0.0 && d2 <= 0.0 {
            return a;
        }
        let bp = p - b;
        let d3 = ab.dot(bp);
        let d4 = ac.dot(bp);
        if d3 >= 0.0 && d4 <= d3 {
            return b;
        }
        let vc = d1 * d4 - d3 * d2;
        if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
            return a + ab * (d1 / (d1 - d3));
        }
        let cp = p - c;
        let d5 = ab.dot(cp);
        let d6 = ac.dot(cp);
        if d6 >= 0.0 && d5 <= d6 {
            return c;
        }
        let vb = d5 * d2 - d1 * d6;
        if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
            return a + ac * (d2 / (d2 - d6));
        }
        let va = d3 * d6 - d5 * d4;
        if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
            return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
        }
        let denom = 1.0 / (va + vb + vc);
        a + ab * (vb * denom) + ac * (vc * denom)
    }

    /// Sum of signed solid angles of all triangles seen from `q`, over 4π.
    pub fn mesh_winding_oracle(q: Point3, mesh: &TriangleMesh) -> Result<f64> {
        if mesh.distance(q) < 1e-12 {
            return Err(Error::OnSurface);
        }
        let mut total = 0.0;
        for tri in &mesh.triangles {
            let [a, b, c] = tri.map(|v| mesh.vertices[v as usize] - q);
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let num = a.dot(b.cross(c));
            let den = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
            total += 2.0 * math::atan2(num, den);
        }
        Ok(total / (4.0 * math::PI))
    }
}
