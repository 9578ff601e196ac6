//! Core point types, normal parameterization, normalization and fixtures.

use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub, SubAssign};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::math;
use crate::{Error, Result};

/// Minimum number of samples accepted by the pipeline.
pub const MIN_POINTS: usize = 4;

/// A point (or free vector) in 3D.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Free vectors share the point representation.
pub type Vec3 = Point3;

impl Point3 {
    pub const ZERO: Point3 = Point3::new(0.0, 0.0, 0.0);

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    #[inline]
    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        math::sqrt(self.norm_squared())
    }

    /// Unit vector in the same direction; zero stays zero.
    pub fn normalized(self) -> Point3 {
        let n = self.norm();
        if n > 0.0 {
            self / n
        } else {
            self
        }
    }

    #[inline]
    pub fn distance(self, o: Point3) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn min_by_component(self, o: Point3) -> Point3 {
        Point3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max_by_component(self, o: Point3) -> Point3 {
        Point3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl Index<usize> for Point3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Point3 index {i} out of range"),
        }
    }
}

impl Add for Point3 {
    type Output = Point3;
    #[inline]
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Point3 {
    #[inline]
    fn add_assign(&mut self, o: Point3) {
        *self = *self + o;
    }
}

impl Sub for Point3 {
    type Output = Point3;
    #[inline]
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Point3 {
    #[inline]
    fn sub_assign(&mut self, o: Point3) {
        *self = *self - o;
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    #[inline]
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Point3 {
    type Output = Point3;
    #[inline]
    fn div(self, s: f64) -> Point3 {
        Point3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    #[inline]
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// A unit normal stored as polar angle `u` and azimuth `v`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SphericalNormal {
    pub u: f64,
    pub v: f64,
}

impl SphericalNormal {
    pub const fn new(u: f64, v: f64) -> Self {
        SphericalNormal { u, v }
    }

    /// Angles of a nonzero Cartesian direction.
    pub fn from_cartesian(n: Vec3) -> Self {
        let n = n.normalized();
        let u = math::acos(n.z.clamp(-1.0, 1.0));
        let v = math::atan2(n.y, n.x);
        SphericalNormal { u, v }
    }

    pub fn to_cartesian(self) -> Vec3 {
        spherical_to_cartesian(self)
    }

    /// Same direction with `u` in `[0, π]` and `v` in `[-π, π)`.
    pub fn canonical(self) -> Self {
        let n = self.to_cartesian();
        let mut c = SphericalNormal::from_cartesian(n);
        if c.v >= math::PI {
            c.v -= math::TAU;
        }
        c
    }
}

/// `(sin u cos v, sin u sin v, cos u)`.
#[inline]
pub fn spherical_to_cartesian(sn: SphericalNormal) -> Vec3 {
    let (su, cu) = (math::sin(sn.u), math::cos(sn.u));
    let (sv, cv) = (math::sin(sn.v), math::cos(sn.v));
    Point3::new(su * cv, su * sv, cu)
}

/// Partial derivatives of [`spherical_to_cartesian`] with respect to `u` and `v`.
#[inline]
pub fn spherical_jacobian(sn: SphericalNormal) -> (Vec3, Vec3) {
    let (su, cu) = (math::sin(sn.u), math::cos(sn.u));
    let (sv, cv) = (math::sin(sn.v), math::cos(sn.v));
    (Point3::new(cu * cv, cu * sv, -su), Point3::new(-su * sv, su * cv, 0.0))
}

/// Sample positions with optional normals and area weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub normals: Option<Vec<SphericalNormal>>,
    pub areas: Option<Vec<f64>>,
}

impl PointCloud {
    /// Validates size and finiteness.
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points.len() < MIN_POINTS {
            return Err(Error::TooFewPoints {
                required: MIN_POINTS,
                got: points.len(),
            });
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(PointCloud {
            points,
            normals: None,
            areas: None,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn with_normals(mut self, normals: Vec<SphericalNormal>) -> Result<Self> {
        self.set_normals(normals)?;
        Ok(self)
    }

    pub fn set_normals(&mut self, normals: Vec<SphericalNormal>) -> Result<()> {
        check_len(self.len(), normals.len())?;
        self.normals = Some(normals);
        Ok(())
    }

    pub fn with_areas(mut self, areas: Vec<f64>) -> Result<Self> {
        self.set_areas(areas)?;
        Ok(self)
    }

    pub fn set_areas(&mut self, areas: Vec<f64>) -> Result<()> {
        check_len(self.len(), areas.len())?;
        if areas.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidParameter(
                "area weights must be finite and nonnegative".into(),
            ));
        }
        self.areas = Some(areas);
        Ok(())
    }

    /// Cartesian normals, if assigned.
    pub fn cartesian_normals(&self) -> Option<Vec<Vec3>> {
        self.normals
            .as_ref()
            .map(|ns| ns.iter().map(|&n| spherical_to_cartesian(n)).collect())
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Point3, Point3) {
        bounds(&self.points)
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}

pub(crate) fn bounds(points: &[Point3]) -> (Point3, Point3) {
    let inf = f64::INFINITY;
    points.iter().fold(
        (Point3::new(inf, inf, inf), Point3::new(-inf, -inf, -inf)),
        |(lo, hi), &p| (lo.min_by_component(p), hi.max_by_component(p)),
    )
}

/// A cloud with analytic ground-truth normals.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthCloud {
    pub cloud: PointCloud,
    pub gt_normals: Vec<Vec3>,
}

/// Uniform scale plus translation: `x' = (x - center) * scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform {
    pub center: Point3,
    pub scale: f64,
}

impl AffineTransform {
    pub const IDENTITY: AffineTransform = AffineTransform {
        center: Point3::ZERO,
        scale: 1.0,
    };

    pub fn apply(&self, p: Point3) -> Point3 {
        (p - self.center) * self.scale
    }

    pub fn invert(&self, p: Point3) -> Point3 {
        p / self.scale + self.center
    }
}

/// Maps the cloud into `[-0.5, 0.5]^3` so the longest bounding-box edge is 1.
///
/// Normals and areas are carried over; areas scale with the square of the
/// scale factor.
pub fn normalize_unit_box(cloud: &PointCloud) -> Result<(PointCloud, AffineTransform)> {
    if cloud.len() < MIN_POINTS {
        return Err(Error::TooFewPoints {
            required: MIN_POINTS,
            got: cloud.len(),
        });
    }
    let (lo, hi) = cloud.bounds();
    let ext = hi - lo;
    let longest = ext.x.max(ext.y).max(ext.z);
    if !(longest > 0.0) || !longest.is_finite() {
        return Err(Error::Degenerate("bounding box has zero extent on every axis".into()));
    }
    let center = (lo + hi) * 0.5;
    let transform = if longest == 1.0 && center == Point3::ZERO {
        AffineTransform::IDENTITY
    } else {
        AffineTransform {
            center,
            scale: 1.0 / longest,
        }
    };
    let clamp = |v: f64| v.clamp(-0.5, 0.5);
    let points = cloud
        .points
        .iter()
        .map(|&p| {
            let q = transform.apply(p);
            Point3::new(clamp(q.x), clamp(q.y), clamp(q.z))
        })
        .collect();
    let areas = cloud.areas.as_ref().map(|a| {
        let s2 = transform.scale * transform.scale;
        a.iter().map(|x| x * s2).collect()
    });
    Ok((
        PointCloud {
            points,
            normals: cloud.normals.clone(),
            areas,
        },
        transform,
    ))
}

/// Displaces every point by `level` times a standard-normal 3-vector.
pub fn add_gaussian_noise(cloud: &PointCloud, level: f64, seed: u64) -> Result<PointCloud> {
    if !(level >= 0.0) || !level.is_finite() {
        return Err(Error::InvalidParameter(alloc::format!(
            "noise level must be finite and nonnegative, got {level}"
        )));
    }
    let mut out = cloud.clone();
    if level == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in out.points.iter_mut() {
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        let dz: f64 = rng.sample(StandardNormal);
        *p += Point3::new(dx, dy, dz) * level;
    }
    Ok(out)
}

/// Uniformly distributed random directions, deterministic per seed.
pub fn random_init_normals(n: usize, seed: u64) -> Vec<SphericalNormal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r1: f64 = rng.random();
            let r2: f64 = rng.random();
            SphericalNormal::new(math::acos(1.0 - 2.0 * r1), math::TAU * r2)
        })
        .collect()
}

/// Uniform samples on a torus in the xy-plane, normalized to the unit box.
///
/// The minor angle is drawn by rejection with density proportional to
/// `R + r cos θ`, which makes the samples uniform with respect to area.
pub fn generate_torus(major_radius: f64, minor_radius: f64, n: usize, seed: u64) -> Result<GroundTruthCloud> {
    if !(major_radius > minor_radius && minor_radius > 0.0) {
        return Err(Error::InvalidParameter(
            "torus needs major_radius > minor_radius > 0".into(),
        ));
    }
    if n < 100 {
        return Err(Error::TooFewPoints { required: 100, got: n });
    }
    let (points, normals) = torus_samples(major_radius, minor_radius, n, seed);
    let (cloud, _) = normalize_unit_box(&PointCloud::new(points)?)?;
    Ok(GroundTruthCloud {
        cloud,
        gt_normals: normals,
    })
}

fn torus_samples(major_radius: f64, minor_radius: f64, n: usize, seed: u64) -> (Vec<Point3>, Vec<Vec3>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    while points.len() < n {
        let theta = math::TAU * rng.random::<f64>();
        let accept: f64 = rng.random();
        let ring = major_radius + minor_radius * math::cos(theta);
        if accept * (major_radius + minor_radius) > ring {
            continue;
        }
        let phi = math::TAU * rng.random::<f64>();
        let (sp, cp) = (math::sin(phi), math::cos(phi));
        let (st, ct) = (math::sin(theta), math::cos(theta));
        points.push(Point3::new(ring * cp, ring * sp, minor_radius * st));
        normals.push(Point3::new(ct * cp, ct * sp, st));
    }
    (points, normals)
}

/// Uniform samples on the unit sphere at the origin; not normalized.
pub fn generate_sphere(n: usize, seed: u64) -> Result<GroundTruthCloud> {
    if n < 100 {
        return Err(Error::TooFewPoints { required: 100, got: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Point3> = (0..n)
        .map(|_| {
            let z = 1.0 - 2.0 * rng.random::<f64>();
            let phi = math::TAU * rng.random::<f64>();
            let r = math::sqrt((1.0 - z * z).max(0.0));
            Point3::new(r * math::cos(phi), r * math::sin(phi), z)
        })
        .collect();
    Ok(GroundTruthCloud {
        gt_normals: points.clone(),
        cloud: PointCloud::new(points)?,
    })
}

/// In-plane width of the thin-sheet fixture relative to its unit length.
pub const SHEET_WIDTH: f64 = 0.6;

/// Samples on the closed boundary of a `1 × 0.6 × thickness` slab.
///
/// Per-face counts are proportional to face area, with the two large faces
/// receiving identical counts; positions within a face are uniform.
pub fn generate_thin_sheet(thickness: f64, n: usize, seed: u64) -> Result<GroundTruthCloud> {
    if !(thickness > 0.0 && thickness < 0.1) {
        return Err(Error::InvalidParameter("sheet thickness must lie in (0, 0.1)".into()));
    }
    if n < 500 {
        return Err(Error::TooFewPoints { required: 500, got: n });
    }
    let (lx, ly, lz) = (1.0, SHEET_WIDTH, thickness);
    let big = lx * ly;
    let side_x = lx * lz; // faces with normal ±y
    let side_y = ly * lz; // faces with normal ±x
    let total = 2.0 * (big + side_x + side_y);
    let per_big = math::round((n as f64) * big / total) as usize;
    let per_sx = math::round((n as f64) * side_x / total) as usize;
    let rest = n - 2 * per_big - 2 * per_sx;
    let per_sy = [rest / 2, rest - rest / 2];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uni = |lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
    let (hx, hy, hz) = (lx / 2.0, ly / 2.0, lz / 2.0);
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for (sign, count) in [(1.0, per_big), (-1.0, per_big)] {
        for _ in 0..count {
            points.push(Point3::new(uni(-hx, hx), uni(-hy, hy), sign * hz));
            normals.push(Point3::new(0.0, 0.0, sign));
        }
    }
    for (sign, count) in [(1.0, per_sx), (-1.0, per_sx)] {
        for _ in 0..count {
            points.push(Point3::new(uni(-hx, hx), sign * hy, uni(-hz, hz)));
            normals.push(Point3::new(0.0, sign, 0.0));
        }
    }
    for (sign, count) in [(1.0, per_sy[0]), (-1.0, per_sy[1])] {
        for _ in 0..count {
            points.push(Point3::new(sign * hx, uni(-hy, hy), uni(-hz, hz)));
            normals.push(Point3::new(sign, 0.0, 0.0));
        }
    }
    let (cloud, _) = normalize_unit_box(&PointCloud::new(points)?)?;
    Ok(GroundTruthCloud {
        cloud,
        gt_normals: normals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn pts(v: &[[f64; 3]]) -> Vec<Point3> {
        v.iter().map(|&a| a.into()).collect()
    }

    #[test]
    fn normalize_maps_longest_edge_to_unit() {
        let c = PointCloud::new(pts(&[[0., 0., 0.], [2., 0., 0.], [0., 1., 0.], [0., 0., 1.]])).unwrap();
        let (n, _) = normalize_unit_box(&c).unwrap();
        let (lo, hi) = n.bounds();
        assert_eq!(lo.x, -0.5);
        assert_eq!(hi.x, 0.5);
        assert!(hi.y - lo.y <= 0.5 + 1e-15);
    }

    #[test]
    fn normalize_identity_on_unit_box() {
        let c = PointCloud::new(pts(&[
            [-0.5, -0.5, -0.5],
            [0.5, 0.5, 0.5],
            [0.1, -0.2, 0.3],
            [0.0, 0.4, -0.1],
        ]))
        .unwrap();
        let (n, t) = normalize_unit_box(&c).unwrap();
        assert_eq!(t, AffineTransform::IDENTITY);
        assert_eq!(n.points, c.points);
    }

    #[test]
    fn normalize_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p: Vec<Point3> = (0..100)
            .map(|_| {
                Point3::new(
                    rng.random::<f64>() * 7.0 - 2.0,
                    rng.random::<f64>() * 3.0,
                    rng.random::<f64>() - 10.0,
                )
            })
            .collect();
        let c = PointCloud::new(p.clone()).unwrap();
        let (n, t) = normalize_unit_box(&c).unwrap();
        for (a, b) in p.iter().zip(&n.points) {
            assert!(a.distance(t.invert(*b)) < 1e-12);
        }
    }

    #[test]
    fn normalize_rejects_coincident() {
        let c = PointCloud::new(vec![Point3::new(1., 1., 1.); 5]).unwrap();
        assert!(matches!(normalize_unit_box(&c), Err(Error::Degenerate(_))));
    }

    #[test]
    fn noise_zero_is_identity_and_seeded() {
        let g = generate_sphere(200, 1).unwrap();
        assert_eq!(add_gaussian_noise(&g.cloud, 0.0, 9).unwrap(), g.cloud);
        let a = add_gaussian_noise(&g.cloud, 0.01, 9).unwrap();
        let b = add_gaussian_noise(&g.cloud, 0.01, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_has_requested_spread() {
        let g = generate_sphere(4000, 2).unwrap();
        let noisy = add_gaussian_noise(&g.cloud, 0.005, 5).unwrap();
        let d: Vec<f64> = g
            .cloud
            .points
            .iter()
            .zip(&noisy.points)
            .flat_map(|(a, b)| (*b - *a).to_array())
            .collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / d.len() as f64;
        let sd = var.sqrt();
        assert!((sd - 0.005).abs() < 0.0005, "sd = {sd}");
    }

    #[test]
    fn spherical_axes() {
        let z = spherical_to_cartesian(SphericalNormal::new(0.0, 1.234));
        assert_abs_diff_eq!(z.x, 0.0);
        assert_abs_diff_eq!(z.z, 1.0);
        let x = spherical_to_cartesian(SphericalNormal::new(math::PI / 2.0, 0.0));
        assert_abs_diff_eq!(x.x, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x.z, 0.0, epsilon = 1e-15);
        let y = spherical_to_cartesian(SphericalNormal::new(math::PI / 2.0, math::PI / 2.0));
        assert_abs_diff_eq!(y.y, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y.x, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn random_normals_uniform_and_seeded() {
        let a = random_init_normals(100_000, 11);
        assert_eq!(a, random_init_normals(100_000, 11));
        let mut mean = Point3::ZERO;
        for n in &a {
            let c = n.to_cartesian();
            assert!((c.norm() - 1.0).abs() < 1e-12);
            mean += c;
        }
        assert!((mean / a.len() as f64).norm() < 0.02);
    }

    #[test]
    fn torus_normals() {
        let g = generate_torus(1.0, 0.4, 10_000, 4).unwrap();
        let mut mean = Point3::ZERO;
        for n in &g.gt_normals {
            assert!((n.norm() - 1.0).abs() < 1e-12);
            mean += *n;
        }
        assert!((mean / g.gt_normals.len() as f64).norm() < 0.05);
        // Outer equator: the point farthest from the axis has a radial normal.
        let (i, p) = g
            .cloud
            .points
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.x.hypot(a.1.y).total_cmp(&b.1.x.hypot(b.1.y)))
            .unwrap();
        let radial = Point3::new(p.x, p.y, 0.0).normalized();
        assert!(g.gt_normals[i].dot(radial) > 0.999);
        let (lo, hi) = g.cloud.bounds();
        assert!(lo.x >= -0.5 && hi.x <= 0.5 && (hi.x - lo.x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn torus_points_on_surface() {
        let (rr, r) = (1.0, 0.4);
        let (points, normals) = torus_samples(rr, r, 2000, 8);
        for (q, n) in points.iter().zip(&normals) {
            let ring = q.x.hypot(q.y) - rr;
            let res = (ring * ring + q.z * q.z).sqrt() - r;
            assert!(res.abs() < 1e-10, "residual {res}");
            // The normal points from the tube center to the sample.
            let tube = Point3::new(q.x, q.y, 0.0).normalized() * rr;
            assert!(((*q - tube) / r).distance(*n) < 1e-10);
        }
    }

    #[test]
    fn sphere_fixture() {
        let g = generate_sphere(10_000, 1).unwrap();
        let mut mean = Point3::ZERO;
        for (p, n) in g.cloud.points.iter().zip(&g.gt_normals) {
            assert!(p.distance(*n) < 1e-12);
            assert!((p.norm() - 1.0).abs() < 1e-10);
            mean += *p;
        }
        assert!((mean / 10_000.0).norm() < 0.05);

        let g = generate_sphere(1000, 7).unwrap();
        let mut keys: Vec<[u64; 3]> = g
            .cloud
            .points
            .iter()
            .map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()])
            .collect();
        keys.sort_unstable();
        keys.dedup();
        assert_eq!(keys.len(), 1000);
    }

    #[test]
    fn sheet_fixture() {
        let g = generate_thin_sheet(0.02, 3000, 2).unwrap();
        let top = g.gt_normals.iter().filter(|n| n.z > 0.5).count();
        let bottom = g.gt_normals.iter().filter(|n| n.z < -0.5).count();
        assert_eq!(top, bottom);
        assert!(top > 1000);
        for n in &g.gt_normals {
            assert!((n.norm() - 1.0).abs() < 1e-12);
        }
        assert_eq!(Point3::new(0., 0., 1.).dot(Point3::new(0., 0., -1.)), -1.0);
        // Thickness survives normalization (the long edge is already 1).
        let zs: Vec<f64> = g.cloud.points.iter().map(|p| p.z).collect();
        let span = zs.iter().cloned().fold(f64::MIN, f64::max) - zs.iter().cloned().fold(f64::MAX, f64::min);
        assert!((span - 0.02).abs() < 1e-9);
        assert!(generate_thin_sheet(0.2, 3000, 2).is_err());
    }

    proptest! {
        #[test]
        fn spherical_is_unit(u in -20.0f64..20.0, v in -20.0f64..20.0) {
            let n = spherical_to_cartesian(SphericalNormal::new(u, v));
            prop_assert!((n.norm() - 1.0).abs() < 1e-12);
            let back = SphericalNormal::new(u, v).canonical();
            prop_assert!(back.u >= 0.0 && back.u <= math::PI);
            prop_assert!(back.v >= -math::PI && back.v < math::PI);
            prop_assert!(back.to_cartesian().distance(n) < 1e-12);
        }

        #[test]
        fn normalize_is_idempotent(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p: Vec<Point3> = (0..20)
                .map(|_| Point3::new(rng.random::<f64>() * 5.0, rng.random::<f64>() * 2.0 - 8.0, rng.random::<f64>()))
                .collect();
            let (a, _) = normalize_unit_box(&PointCloud::new(p).unwrap()).unwrap();
            let (b, _) = normalize_unit_box(&a).unwrap();
            for (x, y) in a.points.iter().zip(&b.points) {
                prop_assert!(x.distance(*y) < 1e-12);
            }
        }
    }
}
