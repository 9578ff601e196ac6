//! Adaptive-precision orientation and in-sphere tests.

use robust::Coord3D;

use crate::geometry::Point3;

#[inline]
fn c(p: Point3) -> Coord3D<f64> {
    Coord3D { x: p.x, y: p.y, z: p.z }
}

/// Positive when `(a, b, c, d)` is a positively oriented tetrahedron, zero
/// when coplanar. The sign is exact.
#[inline]
pub fn orient3d(a: Point3, b: Point3, cc: Point3, d: Point3) -> f64 {
    robust::orient3d(c(a), c(b), c(cc), c(d))
}

/// Positive when `e` lies strictly inside the circumsphere of the positively
/// oriented tetrahedron `(a, b, c, d)`, zero when cospherical. The sign is
/// exact.
#[inline]
pub fn insphere(a: Point3, b: Point3, cc: Point3, d: Point3, e: Point3) -> f64 {
    robust::insphere(c(a), c(b), c(cc), c(d), c(e))
}

/// Exact collinearity of three points, via the three axis projections.
pub fn collinear(a: Point3, b: Point3, p: Point3) -> bool {
    let proj = |q: Point3, i: usize, j: usize| robust::Coord { x: q[i], y: q[j] };
    [(0, 1), (1, 2), (0, 2)]
        .iter()
        .all(|&(i, j)| robust::orient2d(proj(a, i, j), proj(b, i, j), proj(p, i, j)) == 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signs() {
        let a = Point3::new(0., 0., 0.);
        let b = Point3::new(1., 0., 0.);
        let cc = Point3::new(0., 1., 0.);
        let d = Point3::new(0., 0., 1.);
        // Shewchuk's convention: positive when d is below the ccw plane abc.
        assert!(orient3d(a, b, cc, d) < 0.0);
        assert!(orient3d(b, a, cc, d) > 0.0);
        assert_eq!(orient3d(a, b, cc, Point3::new(0.3, 0.3, 0.0)), 0.0);
        let inside = Point3::new(0.2, 0.2, 0.2);
        assert!(insphere(b, a, cc, d, inside) > 0.0);
        assert!(insphere(b, a, cc, d, Point3::new(2., 2., 2.)) < 0.0);
        assert_eq!(insphere(b, a, cc, d, Point3::new(1., 1., 0.)), 0.0);
    }

    #[test]
    fn collinearity() {
        let a = Point3::new(0., 0., 0.);
        let b = Point3::new(1., 2., 3.);
        assert!(collinear(a, b, Point3::new(2., 4., 6.)));
        assert!(!collinear(a, b, Point3::new(2., 4., 6.000001)));
    }
}
