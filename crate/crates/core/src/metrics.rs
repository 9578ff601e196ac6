//! Orientation quality indicators.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{check_len, Point3, Vec3};
use crate::winding::WindingField;
use crate::{Error, Result};

/// Percentage of normals within 90° of the reference. Exactly orthogonal
/// normals count as wrong.
pub fn truth_percentage(pred: &[Vec3], gt: &[Vec3]) -> Result<f64> {
    check_len(gt.len(), pred.len())?;
    if pred.is_empty() {
        return Err(Error::Empty);
    }
    let good = pred.iter().zip(gt).filter(|(p, g)| p.dot(**g) > 0.0).count();
    Ok(100.0 * good as f64 / pred.len() as f64)
}

/// Root mean square of the angles between corresponding normals, in degrees.
pub fn angle_rmse(pred: &[Vec3], gt: &[Vec3]) -> Result<f64> {
    check_len(gt.len(), pred.len())?;
    if pred.is_empty() {
        return Err(Error::Empty);
    }
    let sum: f64 = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| {
            let c = (p.dot(*g) / (p.norm() * g.norm())).clamp(-1.0, 1.0);
            let deg = crate::math::acos(c) * (180.0 / crate::math::PI);
            deg * deg
        })
        .sum();
    Ok(crate::math::sqrt(sum / pred.len() as f64))
}

/// Static 3D tree for exact nearest-neighbor distances.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3>,
    // Implicit balanced tree over `points` (reordered); node = median of a range.
    axes: Vec<u8>,
}

impl KdTree {
    pub fn new(points: &[Point3]) -> Self {
        let mut pts = points.to_vec();
        let mut axes = vec![0u8; pts.len()];
        build(&mut pts, &mut axes);
        KdTree { points: pts, axes }
    }

    /// Distance from `q` to the closest stored point; infinite when empty.
    pub fn nearest_distance(&self, q: Point3) -> f64 {
        let mut best = f64::INFINITY;
        self.search(0, self.points.len(), q, &mut best);
        crate::math::sqrt(best)
    }

    fn search(&self, lo: usize, hi: usize, q: Point3, best: &mut f64) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let p = self.points[mid];
        let d2 = (p - q).norm_squared();
        if d2 < *best {
            *best = d2;
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, q, best);
        if diff * diff < *best {
            self.search(far.0, far.1, q, best);
        }
    }
}

fn build(pts: &mut [Point3], axes: &mut [u8]) {
    if pts.is_empty() {
        return;
    }
    let (lo, hi) = crate::geometry::bounds(pts);
    let ext = hi - lo;
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = pts.len() / 2;
    pts.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    axes[mid] = axis as u8;
    let (left, rest) = pts.split_at_mut(mid);
    let (al, ar) = axes.split_at_mut(mid);
    build(left, al);
    build(&mut rest[1..], &mut ar[1..]);
}

fn mean_nearest(from: &[Point3], to: &KdTree) -> f64 {
    #[cfg(feature = "std")]
    let d: Vec<f64> = {
        use rayon::prelude::*;
        from.par_iter().map(|&p| to.nearest_distance(p)).collect()
    };
    #[cfg(not(feature = "std"))]
    let d: Vec<f64> = from.iter().map(|&p| to.nearest_distance(p)).collect();
    d.iter().sum::<f64>() / from.len() as f64
}

/// `½ (mean_a min_b |a - b| + mean_b min_a |a - b|)`, unscaled.
pub fn chamfer_distance(a: &[Point3], b: &[Point3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty);
    }
    let (ta, tb) = (KdTree::new(a), KdTree::new(b));
    Ok(0.5 * (mean_nearest(a, &tb) + mean_nearest(b, &ta)))
}

/// Counts of winding values in equal bins over
/// `[min(min w, -0.25), max(max w, 1.25)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        self.lo + (k as f64 + 0.5) * self.bin_width()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

pub fn winding_histogram(w: &WindingField, bins: usize) -> Result<Histogram> {
    if bins < 2 {
        return Err(Error::InvalidParameter("histogram needs at least 2 bins".into()));
    }
    let finite = w.values.iter().copied().filter(|x| x.is_finite());
    let (lo, hi) = finite.fold((-0.25f64, 1.25f64), |(a, b), x| (a.min(x), b.max(x)));
    let mut counts = vec![0usize; bins];
    let width = (hi - lo) / bins as f64;
    for &x in &w.values {
        // Non-finite values land in the nearest end bin so counts sum to M.
        let k = if x.is_nan() {
            0
        } else {
            (((x - lo) / width) as isize).clamp(0, bins as isize - 1) as usize
        };
        counts[k] += 1;
    }
    Ok(Histogram { lo, hi, counts })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub truth_percentage: f64,
    pub angle_rmse: f64,
    /// Chamfer distance multiplied by 100, when a reference surface is given.
    pub chamfer: Option<f64>,
    pub histogram: Histogram,
}

/// Normal-quality metrics against `gt`, plus the field histogram and, with a
/// reference sampling, the chamfer distance of `points` to it.
pub fn metric_report(
    pred: &[Vec3],
    gt: &[Vec3],
    field: &WindingField,
    bins: usize,
    points: &[Point3],
    reference: Option<&[Point3]>,
) -> Result<MetricReport> {
    let chamfer = match reference {
        Some(r) => Some(100.0 * chamfer_distance(points, r)?),
        None => None,
    };
    Ok(MetricReport {
        truth_percentage: truth_percentage(pred, gt)?,
        angle_rmse: angle_rmse(pred, gt)?,
        chamfer,
        histogram: winding_histogram(field, bins)?,
    })
}
