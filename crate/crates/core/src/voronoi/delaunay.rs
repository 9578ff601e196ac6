//! Incremental Bowyer-Watson tetrahedralization.
//!
//! The convex hull is closed with a symbolic vertex at infinity: every hull
//! face carries an "infinite" tetrahedron, so insertion outside the current
//! hull is the same cavity-and-star operation as insertion inside it.
//!
//! All decisions use exact predicates. When an exact test returns zero
//! (cospherical or coplanar configurations, duplicates), construction is
//! abandoned and restarted on a copy of the input with a deterministic jitter
//! of `1e-9` times the bounding-box diagonal, seeded from a hash of the
//! coordinates.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::predicates::{collinear, insphere, orient3d};
use crate::geometry::{bounds, Point3};
use crate::{math, Error, Result};

/// Adjacency sentinel for faces on the convex hull.
pub const HULL: u32 = u32::MAX;

const INF: u32 = u32::MAX;

/// Relative jitter applied when a degenerate configuration is detected.
pub const JITTER_RELATIVE: f64 = 1e-9;

const MAX_ATTEMPTS: usize = 4;

/// A Delaunay tetrahedralization.
///
/// `adjacency[t][k]` is the tetrahedron sharing the face opposite
/// `tetrahedra[t][k]`, or [`HULL`].
#[derive(Debug, Clone)]
pub struct TetComplex {
    /// Vertex positions the complex was built on. These equal the input
    /// unless `jittered` is set.
    pub vertices: Vec<Point3>,
    pub tetrahedra: Vec<[u32; 4]>,
    pub adjacency: Vec<[u32; 4]>,
    pub jittered: bool,
}

impl TetComplex {
    pub fn len(&self) -> usize {
        self.tetrahedra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tetrahedra.is_empty()
    }

    pub fn tet_points(&self, t: usize) -> [Point3; 4] {
        self.tetrahedra[t].map(|v| self.vertices[v as usize])
    }

    /// Vertex indices of the face opposite local vertex `k`.
    pub fn face(&self, t: usize, k: usize) -> [u32; 3] {
        let tet = self.tetrahedra[t];
        [tet[(k + 1) % 4], tet[(k + 2) % 4], tet[(k + 3) % 4]]
    }

    /// Sorted, deduplicated Delaunay neighbors of every vertex.
    pub fn vertex_neighbors(&self) -> Vec<Vec<u32>> {
        let mut out = alloc::vec![Vec::new(); self.vertices.len()];
        for tet in &self.tetrahedra {
            for a in 0..4 {
                for b in 0..4 {
                    if a != b {
                        out[tet[a] as usize].push(tet[b]);
                    }
                }
            }
        }
        for l in out.iter_mut() {
            l.sort_unstable();
            l.dedup();
        }
        out
    }
}

/// Builds the Delaunay tetrahedralization of `points`.
pub fn delaunay_tetrahedralize(points: &[Point3]) -> Result<TetComplex> {
    if points.len() < 4 {
        return Err(Error::TooFewPoints {
            required: 4,
            got: points.len(),
        });
    }
    if let Some(i) = points.iter().position(|p| !p.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let order = insertion_order(points);
    initial_simplex(points, &order)?;

    let mut work: Vec<Point3> = points.to_vec();
    let (lo, hi) = bounds(points);
    let diag = (hi - lo).norm();
    let mut rng = ChaCha8Rng::seed_from_u64(hash_points(points));
    for attempt in 0..MAX_ATTEMPTS {
        if attempt > 0 {
            let mag = JITTER_RELATIVE * diag * math::pow(10.0, attempt as f64 - 1.0);
            for (w, p) in work.iter_mut().zip(points) {
                let d = Point3::new(
                    rng.random::<f64>() - 0.5,
                    rng.random::<f64>() - 0.5,
                    rng.random::<f64>() - 0.5,
                );
                *w = *p + d * (2.0 * mag);
            }
        }
        let order = insertion_order(&work);
        let Ok(start) = initial_simplex(&work, &order) else {
            continue;
        };
        let mut b = Builder::new(&work);
        if b.run(start, &order).is_ok() {
            let mut complex = b.finish();
            complex.jittered = attempt > 0;
            return Ok(complex);
        }
    }
    Err(Error::Degenerate(format!(
        "tetrahedralization failed after {MAX_ATTEMPTS} perturbation attempts"
    )))
}

fn hash_points(points: &[Point3]) -> u64 {
    // FNV-1a over the coordinate bit patterns.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in points {
        for c in p.to_array() {
            for byte in c.to_bits().to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
    }
    h
}

/// Morton order over a 21-bit grid; ties broken by index.
fn insertion_order(points: &[Point3]) -> Vec<u32> {
    let (lo, hi) = bounds(points);
    let ext = hi - lo;
    let q = |v: f64, l: f64, e: f64| -> u64 {
        if e > 0.0 {
            (((v - l) / e) * ((1u64 << 21) - 1) as f64) as u64
        } else {
            0
        }
    };
    let spread = |mut x: u64| -> u64 {
        x &= 0x1f_ffff;
        x = (x | x << 32) & 0x1f_0000_0000_ffff;
        x = (x | x << 16) & 0x1f_0000_ff00_00ff;
        x = (x | x << 8) & 0x100f_00f0_0f00_f00f;
        x = (x | x << 4) & 0x10c3_0c30_c30c_30c3;
        x = (x | x << 2) & 0x1249_2492_4924_9249;
        x
    };
    let mut keyed: Vec<(u64, u32)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let code =
                spread(q(p.x, lo.x, ext.x)) | spread(q(p.y, lo.y, ext.y)) << 1 | spread(q(p.z, lo.z, ext.z)) << 2;
            (code, i as u32)
        })
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Four affinely independent points, taken greedily along `order`.
fn initial_simplex(points: &[Point3], order: &[u32]) -> Result<[u32; 4]> {
    let p = |i: u32| points[i as usize];
    let a = order[0];
    let b = order
        .iter()
        .copied()
        .find(|&i| p(i) != p(a))
        .ok_or_else(|| Error::Degenerate("all points coincide".into()))?;
    let c = order
        .iter()
        .copied()
        .find(|&i| !collinear(p(a), p(b), p(i)))
        .ok_or_else(|| Error::Degenerate("all points are collinear".into()))?;
    let d = order
        .iter()
        .copied()
        .find(|&i| orient3d(p(a), p(b), p(c), p(i)) != 0.0)
        .ok_or_else(|| Error::Degenerate("all points are coplanar".into()))?;
    if orient3d(p(a), p(b), p(c), p(d)) > 0.0 {
        Ok([a, b, c, d])
    } else {
        Ok([b, a, c, d])
    }
}

struct Degenerate;

struct Builder<'a> {
    pts: &'a [Point3],
    tets: Vec<[u32; 4]>,
    nbr: Vec<[u32; 4]>,
    alive: Vec<bool>,
    free: Vec<u32>,
    // Per-tet stamps: `in_cavity == stamp` marks cavity membership for the
    // current insertion, `tested == stamp` marks a completed conflict test.
    in_cavity: Vec<u32>,
    tested: Vec<u32>,
    stamp: u32,
    last: u32,
    walk_state: u32,
}

impl<'a> Builder<'a> {
    fn new(pts: &'a [Point3]) -> Self {
        let cap = pts.len() * 8;
        Builder {
            pts,
            tets: Vec::with_capacity(cap),
            nbr: Vec::with_capacity(cap),
            alive: Vec::with_capacity(cap),
            free: Vec::new(),
            in_cavity: Vec::with_capacity(cap),
            tested: Vec::with_capacity(cap),
            stamp: 0,
            last: 0,
            walk_state: 0x9e37_79b9,
        }
    }

    #[inline]
    fn p(&self, v: u32) -> Point3 {
        self.pts[v as usize]
    }

    fn alloc(&mut self, tet: [u32; 4]) -> u32 {
        if let Some(t) = self.free.pop() {
            self.tets[t as usize] = tet;
            self.nbr[t as usize] = [INF; 4];
            self.alive[t as usize] = true;
            t
        } else {
            self.tets.push(tet);
            self.nbr.push([INF; 4]);
            self.alive.push(true);
            self.in_cavity.push(0);
            self.tested.push(0);
            (self.tets.len() - 1) as u32
        }
    }

    fn run(&mut self, start: [u32; 4], order: &[u32]) -> core::result::Result<(), Degenerate> {
        self.seed_simplex(start);
        for &v in order {
            if start.contains(&v) {
                continue;
            }
            self.insert(v)?;
        }
        Ok(())
    }

    fn seed_simplex(&mut self, s: [u32; 4]) {
        let mut created = Vec::with_capacity(5);
        created.push(self.alloc(s));
        for k in 0..4 {
            // Hull face k seen from outside: INF takes slot k and two other
            // slots swap so that INF sits on the positive side.
            let mut t = s;
            t[k] = INF;
            t.swap((k + 1) % 4, (k + 2) % 4);
            created.push(self.alloc(t));
        }
        self.link_by_faces(&created);
        self.last = created[0];
    }

    /// Connects all face pairs among `ts` that share the same vertex triple.
    fn link_by_faces(&mut self, ts: &[u32]) {
        let mut faces: Vec<([u32; 3], u32, usize)> = Vec::new();
        for &t in ts {
            for k in 0..4 {
                let tet = self.tets[t as usize];
                let mut f = [tet[(k + 1) % 4], tet[(k + 2) % 4], tet[(k + 3) % 4]];
                f.sort_unstable();
                faces.push((f, t, k));
            }
        }
        faces.sort_unstable();
        for w in faces.windows(2) {
            if w[0].0 == w[1].0 {
                self.nbr[w[0].1 as usize][w[0].2] = w[1].1;
                self.nbr[w[1].1 as usize][w[1].2] = w[0].1;
            }
        }
    }

    /// Conflict test of tet `t` with point `p`: `Some(true)` when `p` lies in
    /// its open circumsphere (for infinite tets, strictly beyond the hull face).
    fn conflict(&self, t: u32, p: Point3) -> core::result::Result<bool, Degenerate> {
        let tet = self.tets[t as usize];
        let s = if let Some(k) = tet.iter().position(|&v| v == INF) {
            let mut q = [Point3::ZERO; 4];
            for i in 0..4 {
                q[i] = if i == k { p } else { self.p(tet[i]) };
            }
            orient3d(q[0], q[1], q[2], q[3])
        } else {
            insphere(self.p(tet[0]), self.p(tet[1]), self.p(tet[2]), self.p(tet[3]), p)
        };
        if s == 0.0 {
            Err(Degenerate)
        } else {
            Ok(s > 0.0)
        }
    }

    fn next_rand(&mut self) -> u32 {
        self.walk_state ^= self.walk_state << 13;
        self.walk_state ^= self.walk_state >> 17;
        self.walk_state ^= self.walk_state << 5;
        self.walk_state
    }

    /// Stochastic visibility walk to a tet in conflict with `p`.
    fn locate(&mut self, p: Point3) -> core::result::Result<u32, Degenerate> {
        let mut t = self.last;
        let limit = 4 * self.tets.len() + 64;
        'walk: for _ in 0..limit {
            let tet = self.tets[t as usize];
            if let Some(k) = tet.iter().position(|&v| v == INF) {
                if self.conflict(t, p)? {
                    return Ok(t);
                }
                t = self.nbr[t as usize][k];
                continue;
            }
            let off = (self.next_rand() % 4) as usize;
            for j in 0..4 {
                let k = (j + off) % 4;
                let mut q = tet.map(|v| self.p(v));
                q[k] = p;
                if orient3d(q[0], q[1], q[2], q[3]) < 0.0 {
                    t = self.nbr[t as usize][k];
                    continue 'walk;
                }
            }
            // p lies in the closed tet, hence strictly inside its circumsphere
            // unless it duplicates a vertex.
            return if self.conflict(t, p)? { Ok(t) } else { Err(Degenerate) };
        }
        // Walk did not settle; fall back to a scan.
        for t in 0..self.tets.len() as u32 {
            if self.alive[t as usize] && self.conflict(t, p)? {
                return Ok(t);
            }
        }
        Err(Degenerate)
    }

    fn insert(&mut self, v: u32) -> core::result::Result<(), Degenerate> {
        let p = self.p(v);
        let start = self.locate(p)?;
        self.stamp = self.stamp.wrapping_add(1);
        let stamp = self.stamp;

        let mut cavity = Vec::with_capacity(32);
        let mut stack = Vec::with_capacity(32);
        let mut boundary: Vec<(u32, usize, u32)> = Vec::with_capacity(64);
        self.in_cavity[start as usize] = stamp;
        self.tested[start as usize] = stamp;
        stack.push(start);
        while let Some(t) = stack.pop() {
            cavity.push(t);
            for k in 0..4 {
                let n = self.nbr[t as usize][k];
                if self.in_cavity[n as usize] == stamp {
                    continue;
                }
                if self.tested[n as usize] != stamp {
                    self.tested[n as usize] = stamp;
                    if self.conflict(n, p)? {
                        self.in_cavity[n as usize] = stamp;
                        stack.push(n);
                        continue;
                    }
                }
                boundary.push((t, k, n));
            }
        }

        // Star the cavity boundary from p.
        let mut fresh: Vec<[u32; 4]> = Vec::with_capacity(boundary.len());
        for &(t, k, _) in &boundary {
            let mut tet = self.tets[t as usize];
            tet[k] = v;
            if !tet.contains(&INF) {
                let q = tet.map(|i| self.p(i));
                if orient3d(q[0], q[1], q[2], q[3]) <= 0.0 {
                    return Err(Degenerate);
                }
            }
            fresh.push(tet);
        }
        for &t in &cavity {
            self.alive[t as usize] = false;
        }
        let mut created = Vec::with_capacity(fresh.len());
        for (tet, &(t_old, k, n)) in fresh.into_iter().zip(&boundary) {
            let nt = self.alloc(tet);
            // Keep the cavity flag off recycled slots.
            self.in_cavity[nt as usize] = 0;
            self.nbr[nt as usize][k] = n;
            let back = self.nbr[n as usize]
                .iter()
                .position(|&x| x == t_old)
                .expect("neighbor back-pointer");
            self.nbr[n as usize][back] = nt;
            created.push((nt, k));
        }
        // Faces through p pair up by their two remaining vertices.
        let mut keys: Vec<([u32; 2], u32, usize)> = Vec::with_capacity(created.len() * 3);
        for &(nt, pk) in &created {
            let tet = self.tets[nt as usize];
            for j in 0..4 {
                if j == pk {
                    continue;
                }
                let mut e = [0u32; 2];
                let mut m = 0;
                for (i, &v) in tet.iter().enumerate() {
                    if i != j && i != pk {
                        e[m] = v;
                        m += 1;
                    }
                }
                e.sort_unstable();
                keys.push((e, nt, j));
            }
        }
        keys.sort_unstable();
        for w in keys.chunks(2) {
            if w.len() != 2 || w[0].0 != w[1].0 {
                return Err(Degenerate);
            }
            self.nbr[w[0].1 as usize][w[0].2] = w[1].1;
            self.nbr[w[1].1 as usize][w[1].2] = w[0].1;
        }
        // Recycle only now: the back-pointer search above looks up old ids.
        self.free.extend_from_slice(&cavity);
        self.last = created[0].0;
        Ok(())
    }

    fn finish(self) -> TetComplex {
        let mut remap = alloc::vec![HULL; self.tets.len()];
        let mut tetrahedra = Vec::new();
        for (t, tet) in self.tets.iter().enumerate() {
            if self.alive[t] && !tet.contains(&INF) {
                remap[t] = tetrahedra.len() as u32;
                tetrahedra.push(*tet);
            }
        }
        let mut adjacency = Vec::with_capacity(tetrahedra.len());
        for (t, tet) in self.tets.iter().enumerate() {
            if self.alive[t] && !tet.contains(&INF) {
                adjacency.push(self.nbr[t].map(|n| remap[n as usize]));
            }
        }
        TetComplex {
            vertices: self.pts.to_vec(),
            tetrahedra,
            adjacency,
            jittered: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;

    fn random_points(n: usize, seed: u64) -> Vec<Point3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
            .collect()
    }

    /// Brute-force empty-circumsphere check.
    pub(crate) fn assert_delaunay(c: &TetComplex) {
        for (t, tet) in c.tetrahedra.iter().enumerate() {
            let q = c.tet_points(t);
            assert!(orient3d(q[0], q[1], q[2], q[3]) > 0.0, "tet {t} not positive");
            for (i, &p) in c.vertices.iter().enumerate() {
                if tet.contains(&(i as u32)) {
                    continue;
                }
                assert!(
                    insphere(q[0], q[1], q[2], q[3], p) <= 0.0,
                    "point {i} inside circumsphere of tet {t}"
                );
            }
        }
    }

    fn assert_adjacency(c: &TetComplex) {
        for t in 0..c.len() {
            for k in 0..4 {
                let n = c.adjacency[t][k];
                let mut f = c.face(t, k);
                f.sort_unstable();
                if n == HULL {
                    continue;
                }
                let back = c.adjacency[n as usize].iter().position(|&x| x == t as u32).unwrap();
                let mut g = c.face(n as usize, back);
                g.sort_unstable();
                assert_eq!(f, g);
            }
        }
    }

    #[test]
    fn single_tetrahedron() {
        let s = 1.0 / 2f64.sqrt();
        let pts = [
            Point3::new(1., 0., -s),
            Point3::new(-1., 0., -s),
            Point3::new(0., 1., s),
            Point3::new(0., -1., s),
        ];
        let c = delaunay_tetrahedralize(&pts).unwrap();
        assert_eq!(c.len(), 1);
        assert!(c.adjacency[0].iter().all(|&n| n == HULL));
    }

    #[test]
    fn tetrahedron_plus_centroid() {
        let mut pts = vec![
            Point3::new(0., 0., 0.),
            Point3::new(1., 0., 0.),
            Point3::new(0., 1., 0.),
            Point3::new(0., 0., 1.),
        ];
        pts.push(Point3::new(0.25, 0.25, 0.25));
        let c = delaunay_tetrahedralize(&pts).unwrap();
        assert_eq!(c.len(), 4);
        assert!(c.tetrahedra.iter().all(|t| t.contains(&4)));
        assert_delaunay(&c);
        assert_adjacency(&c);
    }

    #[test]
    fn random_cloud_is_delaunay() {
        let pts = random_points(1000, 42);
        let c = delaunay_tetrahedralize(&pts).unwrap();
        assert!(!c.jittered);
        assert_delaunay(&c);
        assert_adjacency(&c);
        let mut used = vec![false; pts.len()];
        for t in &c.tetrahedra {
            for &v in t {
                used[v as usize] = true;
            }
        }
        assert!(used.iter().all(|&u| u));
    }

    #[test]
    fn grid_triggers_jitter() {
        let mut pts = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    pts.push(Point3::new(i as f64, j as f64, k as f64));
                }
            }
        }
        let c = delaunay_tetrahedralize(&pts).unwrap();
        assert!(c.jittered);
        assert_delaunay(&c);
        assert_adjacency(&c);
        // Volume is preserved.
        let vol: f64 = (0..c.len())
            .map(|t| {
                let q = c.tet_points(t);
                (q[1] - q[0]).dot((q[2] - q[0]).cross(q[3] - q[0])).abs() / 6.0
            })
            .sum();
        assert!((vol - 27.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_coplanar() {
        let pts: Vec<Point3> = (0..10).map(|i| Point3::new(i as f64, (i * i) as f64, 0.0)).collect();
        assert!(matches!(delaunay_tetrahedralize(&pts), Err(Error::Degenerate(_))));
        let line: Vec<Point3> = (0..10).map(|i| Point3::new(i as f64, 2.0 * i as f64, 0.5)).collect();
        assert!(delaunay_tetrahedralize(&line).is_err());
    }

    #[test]
    fn deterministic() {
        let pts = random_points(300, 5);
        let a = delaunay_tetrahedralize(&pts).unwrap();
        let b = delaunay_tetrahedralize(&pts).unwrap();
        assert_eq!(a.tetrahedra, b.tetrahedra);
    }
}
