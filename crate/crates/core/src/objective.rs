//! The orientation objective and its analytic gradient.
//!
//! With `w_j` the winding number at examination point `q_j` and cell `i`
//! owning examination points `q_k^i` (`M_i` of them):
//!
//! ```text
//! f01 = Σ_j  fDW(w_j) - w_j / D            fDW(x) = 4(x-½)⁴ - 2(x-½)²
//! fB  = -Σ_i (1/M_i) Σ_k (w_k^i - w̄^i)²
//! fA  =  Σ_i (1/M_i) Σ_k w_k^i n_i·(q_k^i - p_i)
//! f   = (f01 + λB fB + λA fA) / N
//! ```
//!
//! The gradient with respect to the spherical angles `(u_i, v_i)` follows the
//! chain `f → w_j → n_i → (u_i, v_i)`, with `∂w_j/∂n_i = a_i (p_i - q_j) / (4π|p_i - q_j|³)`,
//! plus the explicit dependence of `fA` on `n_i`.

use alloc::vec::Vec;

use crate::geometry::{
    check_len, spherical_jacobian, spherical_to_cartesian, Point3, PointCloud, SphericalNormal, Vec3,
};
use crate::voronoi::VoronoiStructure;
use crate::winding::{self, WindingField};
use crate::{Error, Result};

/// Weights of the objective terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveParams {
    pub lambda_b: f64,
    pub lambda_a: f64,
    /// Shear-correction divisor `D`. `f64::INFINITY` removes the shear term.
    pub shear_d: f64,
}

impl Default for ObjectiveParams {
    fn default() -> Self {
        ObjectiveParams {
            lambda_b: 50.0,
            lambda_a: 10.0,
            shear_d: 4.0,
        }
    }
}

impl ObjectiveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_b >= 0.0 && self.lambda_b.is_finite()) {
            return Err(Error::InvalidParameter("lambda_b must be finite and >= 0".into()));
        }
        if !(self.lambda_a >= 0.0 && self.lambda_a.is_finite()) {
            return Err(Error::InvalidParameter("lambda_a must be finite and >= 0".into()));
        }
        if !(self.shear_d > 0.0) {
            return Err(Error::InvalidParameter("shear divisor D must be > 0".into()));
        }
        Ok(())
    }
}

/// Objective value and its unweighted terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObjectiveValue {
    pub total: f64,
    pub f01: f64,
    pub f_b: f64,
    pub f_a: f64,
}

impl ObjectiveValue {
    fn compose(f01: f64, f_b: f64, f_a: f64, p: &ObjectiveParams, n: usize) -> Self {
        ObjectiveValue {
            total: (f01 + p.lambda_b * f_b + p.lambda_a * f_a) / n as f64,
            f01,
            f_b,
            f_a,
        }
    }
}

/// `4(x - 0.5)⁴ - 2(x - 0.5)²`, minima at 0 and 1.
#[inline]
pub fn double_well(x: f64) -> f64 {
    let t = x - 0.5;
    let t2 = t * t;
    4.0 * t2 * t2 - 2.0 * t2
}

#[inline]
pub fn double_well_derivative(x: f64) -> f64 {
    let t = x - 0.5;
    16.0 * t * t * t - 4.0 * t
}

/// Shear-corrected double-well sum over all examination points.
pub fn term_01(w: &WindingField, shear_d: f64) -> f64 {
    term_01_values(&w.values, shear_d)
}

fn term_01_values(w: &[f64], shear_d: f64) -> f64 {
    w.iter().map(|&x| double_well(x) - x / shear_d).sum()
}

/// Negated sum of per-cell population variances.
pub fn term_balance(vor: &VoronoiStructure, w: &WindingField) -> f64 {
    let (f_b, _) = balance(&vor.cell_vertex_ids, &w.values);
    f_b
}

fn balance(cells: &[Vec<u32>], w: &[f64]) -> (f64, Vec<f64>) {
    let mut means = Vec::with_capacity(cells.len());
    let mut total = 0.0;
    for cell in cells {
        let m = cell.len() as f64;
        let mean = cell.iter().map(|&j| w[j as usize]).sum::<f64>() / m;
        let var = cell
            .iter()
            .map(|&j| {
                let d = w[j as usize] - mean;
                d * d
            })
            .sum::<f64>()
            / m;
        means.push(mean);
        total -= var;
    }
    (total, means)
}

/// Alignment of each normal with the winding-weighted offsets of its cell.
pub fn term_align(vor: &VoronoiStructure, w: &WindingField, cloud: &PointCloud) -> Result<f64> {
    let normals = cloud
        .cartesian_normals()
        .ok_or_else(|| Error::InvalidParameter("cloud has no normals".into()))?;
    check_len(vor.num_samples(), cloud.len())?;
    check_len(vor.len(), w.len())?;
    Ok(align(
        &vor.cell_vertex_ids,
        &vor.exam_points,
        &cloud.points,
        &normals,
        &w.values,
    ))
}

fn align(cells: &[Vec<u32>], exam: &[Point3], points: &[Point3], normals: &[Vec3], w: &[f64]) -> f64 {
    cells
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            let (p, n) = (points[i], normals[i]);
            let s: f64 = cell.iter().map(|&j| w[j as usize] * n.dot(exam[j as usize] - p)).sum();
            s / cell.len() as f64
        })
        .sum()
}

/// Fixed geometry plus evaluation caches for one optimization run.
#[derive(Debug, Clone)]
pub struct ObjectiveState {
    points: Vec<Point3>,
    areas: Vec<f64>,
    exam: Vec<Point3>,
    cells: Vec<Vec<u32>>,
    params: ObjectiveParams,
    // Cache keyed by the angles of the last evaluation.
    cached_uv: Vec<SphericalNormal>,
    normals: Vec<Vec3>,
    moments: Vec<Vec3>,
    field: Vec<f64>,
    means: Vec<f64>,
    value: ObjectiveValue,
    evaluations: usize,
}

impl ObjectiveState {
    /// `cloud` must carry area weights; `vor` must come from the same points.
    pub fn new(cloud: &PointCloud, vor: &VoronoiStructure, params: ObjectiveParams) -> Result<Self> {
        params.validate()?;
        let areas = cloud
            .areas
            .clone()
            .ok_or_else(|| Error::InvalidParameter("cloud has no area weights".into()))?;
        check_len(cloud.len(), vor.num_samples())?;
        if vor.is_empty() {
            return Err(Error::Empty);
        }
        Ok(ObjectiveState {
            points: cloud.points.clone(),
            areas,
            exam: vor.exam_points.clone(),
            cells: vor.cell_vertex_ids.clone(),
            params,
            cached_uv: Vec::new(),
            normals: Vec::new(),
            moments: Vec::new(),
            field: Vec::new(),
            means: Vec::new(),
            value: ObjectiveValue::default(),
            evaluations: 0,
        })
    }

    pub fn params(&self) -> &ObjectiveParams {
        &self.params
    }

    pub fn num_samples(&self) -> usize {
        self.points.len()
    }

    /// Number of field recomputations performed so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// Winding field of the most recent evaluation.
    pub fn field(&self) -> WindingField {
        WindingField {
            values: self.field.clone(),
        }
    }

    fn refresh(&mut self, uv: &[SphericalNormal]) -> Result<()> {
        check_len(self.points.len(), uv.len())?;
        if !self.cached_uv.is_empty() && self.cached_uv.as_slice() == uv {
            return Ok(());
        }
        self.evaluations += 1;
        self.normals.clear();
        self.normals.extend(uv.iter().map(|&sn| spherical_to_cartesian(sn)));
        self.moments = winding::moments(&self.areas, self.normals.iter().copied());
        winding::eval_batch(&self.exam, &self.points, &self.moments, &mut self.field);
        let f01 = term_01_values(&self.field, self.params.shear_d);
        let (f_b, means) = balance(&self.cells, &self.field);
        self.means = means;
        let f_a = align(&self.cells, &self.exam, &self.points, &self.normals, &self.field);
        self.value = ObjectiveValue::compose(f01, f_b, f_a, &self.params, self.points.len());
        self.cached_uv.clear();
        self.cached_uv.extend_from_slice(uv);
        Ok(())
    }

    pub fn objective(&mut self, uv: &[SphericalNormal]) -> Result<ObjectiveValue> {
        self.refresh(uv)?;
        Ok(self.value)
    }

    /// `∂f/∂w_j` for every examination point at the cached configuration.
    fn field_sensitivity(&self) -> Vec<f64> {
        let p = &self.params;
        let inv_n = 1.0 / self.points.len() as f64;
        let shear = 1.0 / p.shear_d;
        let mut g: Vec<f64> = self.field.iter().map(|&w| double_well_derivative(w) - shear).collect();
        for (i, cell) in self.cells.iter().enumerate() {
            let inv_m = 1.0 / cell.len() as f64;
            let (pi, ni, mean) = (self.points[i], self.normals[i], self.means[i]);
            for &j in cell {
                let j = j as usize;
                g[j] +=
                    -2.0 * p.lambda_b * inv_m * (self.field[j] - mean) + p.lambda_a * inv_m * ni.dot(self.exam[j] - pi);
            }
        }
        g.iter_mut().for_each(|x| *x *= inv_n);
        g
    }

    /// Value and flat gradient `[∂u_0, ∂v_0, ∂u_1, ...]`.
    pub fn evaluate(&mut self, uv: &[SphericalNormal], grad: &mut [f64]) -> Result<ObjectiveValue> {
        check_len(2 * self.points.len(), grad.len())?;
        self.refresh(uv)?;
        let g = self.field_sensitivity();
        let inv_n = 1.0 / self.points.len() as f64;
        let inv4pi = 1.0 / (4.0 * crate::math::PI);
        let lambda_a = self.params.lambda_a;
        let exam = &self.exam;
        let field = &self.field;
        let per_sample = |i: usize| -> (f64, f64) {
            let p = self.points[i];
            // Σ_j g_j (p - q_j)/r³, accumulated in examination-point order.
            let mut acc = Point3::ZERO;
            for (q, gj) in exam.iter().zip(&g) {
                let d = p - *q;
                let r2 = d.norm_squared();
                if r2 < winding::SINGULARITY_EPS * winding::SINGULARITY_EPS {
                    continue;
                }
                let r = crate::math::sqrt(r2);
                acc += d * (gj / (r2 * r));
            }
            let mut dn = acc * (self.areas[i] * inv4pi);
            let cell = &self.cells[i];
            if lambda_a != 0.0 {
                let mut direct = Point3::ZERO;
                for &j in cell {
                    direct += (exam[j as usize] - p) * field[j as usize];
                }
                dn += direct * (lambda_a * inv_n / cell.len() as f64);
            }
            let (du, dv) = spherical_jacobian(uv[i]);
            (dn.dot(du), dn.dot(dv))
        };
        #[cfg(feature = "std")]
        let parts: Vec<(f64, f64)> = {
            use rayon::prelude::*;
            (0..self.points.len()).into_par_iter().map(per_sample).collect()
        };
        #[cfg(not(feature = "std"))]
        let parts: Vec<(f64, f64)> = (0..self.points.len()).map(per_sample).collect();
        for (i, (du, dv)) in parts.into_iter().enumerate() {
            grad[2 * i] = du;
            grad[2 * i + 1] = dv;
        }
        Ok(self.value)
    }

    pub fn gradient(&mut self, uv: &[SphericalNormal]) -> Result<Vec<(f64, f64)>> {
        let mut flat = alloc::vec![0.0; 2 * uv.len()];
        self.evaluate(uv, &mut flat)?;
        Ok(flat.chunks_exact(2).map(|c| (c[0], c[1])).collect())
    }
}

/// Recomputes the field for `uv` and composes the objective.
pub fn objective(uv: &[SphericalNormal], state: &mut ObjectiveState) -> Result<ObjectiveValue> {
    state.objective(uv)
}

/// Analytic gradient of [`objective`] with respect to every `(u_i, v_i)`.
pub fn gradient(uv: &[SphericalNormal], state: &mut ObjectiveState) -> Result<Vec<(f64, f64)>> {
    state.gradient(uv)
}

/// Central differences of [`objective`]'s total, one coordinate at a time.
pub fn finite_diff_gradient(uv: &[SphericalNormal], state: &mut ObjectiveState, step: f64) -> Result<Vec<(f64, f64)>> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter("finite-difference step must be > 0".into()));
    }
    let mut work = uv.to_vec();
    let mut out = Vec::with_capacity(uv.len());
    for i in 0..uv.len() {
        let mut pair = [0.0; 2];
        for (c, slot) in pair.iter_mut().enumerate() {
            let orig = work[i];
            let bump = |sn: &mut SphericalNormal, h: f64| {
                if c == 0 {
                    sn.u = orig.u + h
                } else {
                    sn.v = orig.v + h
                }
            };
            bump(&mut work[i], step);
            let fp = state.objective(&work)?.total;
            bump(&mut work[i], -step);
            let fm = state.objective(&work)?.total;
            work[i] = orig;
            *slot = (fp - fm) / (2.0 * step);
        }
        out.push((pair[0], pair[1]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_torus, random_init_normals};
    use crate::voronoi::{estimate_area_weights, DEFAULT_BBOX_SCALE};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn double_well_values() {
        assert_eq!(double_well(0.5), 0.0);
        assert_eq!(double_well(0.0), -0.25);
        assert_eq!(double_well(1.0), -0.25);
    }

    #[test]
    fn term_01_values_by_hand() {
        assert_eq!(term_01_values(&[0.5; 10], 4.0), -1.25);
        assert_eq!(term_01_values(&[0.0; 10], 4.0), -2.5);
        assert_eq!(term_01_values(&[1.0], 4.0), -0.5);
        assert_eq!(term_01_values(&[1.0], f64::INFINITY), -0.25);
    }

    #[test]
    fn balance_by_hand() {
        let (fb, means) = balance(&[vec![0, 1]], &[0.0, 1.0]);
        assert_eq!(fb, -0.25);
        assert_eq!(means, vec![0.5]);
        let (fb, _) = balance(&[vec![0, 1, 2]], &[0.3, 0.3, 0.3]);
        assert_eq!(fb, 0.0);
    }

    #[test]
    fn align_by_hand() {
        let cells = vec![vec![0]];
        let exam = [Point3::new(1.0, 2.0, 2.0)];
        let pts = [Point3::new(1.0, 2.0, 0.0)];
        let n = [Point3::new(0., 0., 1.)];
        assert_eq!(align(&cells, &exam, &pts, &n, &[1.0]), 2.0);
        assert_eq!(align(&cells, &exam, &pts, &[-n[0]], &[1.0]), -2.0);
        assert_eq!(align(&cells, &exam, &pts, &n, &[0.0]), 0.0);
    }

    pub(crate) fn random_state(n: usize, seed: u64, params: ObjectiveParams) -> (ObjectiveState, Vec<SphericalNormal>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Point3> = (0..n)
            .map(|_| {
                Point3::new(
                    rng.random::<f64>() - 0.5,
                    rng.random::<f64>() - 0.5,
                    rng.random::<f64>() - 0.5,
                )
            })
            .collect();
        let cloud = PointCloud::new(pts).unwrap();
        let vor = VoronoiStructure::build(&cloud.points, DEFAULT_BBOX_SCALE).unwrap();
        let areas = estimate_area_weights(&vor, &cloud).unwrap().areas;
        let cloud = cloud.with_areas(areas).unwrap();
        (
            ObjectiveState::new(&cloud, &vor, params).unwrap(),
            random_init_normals(n, seed + 1),
        )
    }

    fn max_rel_error(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
        let flat = |v: &[(f64, f64)]| v.iter().flat_map(|&(x, y)| [x, y]).collect::<Vec<_>>();
        let (a, b) = (flat(a), flat(b));
        let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        a.iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-3 * scale))
            .fold(0.0, f64::max)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (mut st, uv) = random_state(50, 7, ObjectiveParams::default());
        let an = gradient(&uv, &mut st).unwrap();
        let fd = finite_diff_gradient(&uv, &mut st, 1e-6).unwrap();
        let err = max_rel_error(&an, &fd);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn gradient_terms_individually() {
        for params in [
            ObjectiveParams {
                lambda_b: 0.0,
                lambda_a: 0.0,
                shear_d: 4.0,
            },
            ObjectiveParams {
                lambda_b: 1.0,
                lambda_a: 0.0,
                shear_d: f64::INFINITY,
            },
            ObjectiveParams {
                lambda_b: 0.0,
                lambda_a: 1.0,
                shear_d: f64::INFINITY,
            },
        ] {
            let (mut st, uv) = random_state(40, 3, params);
            let an = gradient(&uv, &mut st).unwrap();
            let fd = finite_diff_gradient(&uv, &mut st, 1e-6).unwrap();
            let err = max_rel_error(&an, &fd);
            assert!(err < 1e-4, "{params:?}: {err}");
        }
    }

    #[test]
    fn fd_step_convergence() {
        let (mut st, uv) = random_state(30, 11, ObjectiveParams::default());
        let an = gradient(&uv, &mut st).unwrap();
        let err = |h: f64, st: &mut ObjectiveState| {
            let fd = finite_diff_gradient(&uv, st, h).unwrap();
            an.iter()
                .zip(&fd)
                .map(|(a, b)| (a.0 - b.0).abs().max((a.1 - b.1).abs()))
                .fold(0.0, f64::max)
        };
        let e1 = err(2e-3, &mut st);
        let e2 = err(1e-3, &mut st);
        let ratio = e1 / e2;
        assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio}");
    }

    #[test]
    fn fd_exact_on_quadratic() {
        // A quadratic in every coordinate is differenced exactly up to rounding.
        let f = |x: f64| 3.0 * x * x - 2.0 * x + 1.0;
        let (x, h) = (0.7, 1e-3);
        let d = (f(x + h) - f(x - h)) / (2.0 * h);
        assert!((d - (6.0 * x - 2.0)).abs() < 1e-9);
    }

    #[test]
    fn shear_only_sensitivity_at_half() {
        let (mut st, uv) = random_state(
            20,
            1,
            ObjectiveParams {
                lambda_b: 0.0,
                lambda_a: 0.0,
                shear_d: 4.0,
            },
        );
        st.objective(&uv).unwrap();
        st.field.iter_mut().for_each(|w| *w = 0.5);
        let g = st.field_sensitivity();
        let expect = -0.25 / 20.0;
        assert!(g.iter().all(|&x| x == expect));
    }

    #[test]
    fn zero_weights_give_plain_f01() {
        let (mut st, uv) = random_state(
            30,
            2,
            ObjectiveParams {
                lambda_b: 0.0,
                lambda_a: 0.0,
                shear_d: 4.0,
            },
        );
        let v = st.objective(&uv).unwrap();
        assert_eq!(v.total, v.f01 / 30.0);
    }

    #[test]
    fn deterministic_evaluation() {
        let (mut st, uv) = random_state(60, 5, ObjectiveParams::default());
        let (mut st2, _) = random_state(60, 5, ObjectiveParams::default());
        let a = st.objective(&uv).unwrap();
        let b = st2.objective(&uv).unwrap();
        assert_eq!(a, b);
        assert_eq!(gradient(&uv, &mut st).unwrap(), gradient(&uv, &mut st2).unwrap());
        assert_eq!(st.evaluations(), 1);
    }

    #[test]
    fn fb_nonpositive() {
        let (mut st, uv) = random_state(50, 8, ObjectiveParams::default());
        assert!(st.objective(&uv).unwrap().f_b <= 0.0);
    }

    #[test]
    fn gt_normals_beat_random_on_torus() {
        let g = generate_torus(1.0, 0.4, 1500, 6).unwrap();
        let vor = VoronoiStructure::build(&g.cloud.points, DEFAULT_BBOX_SCALE).unwrap();
        let areas = estimate_area_weights(&vor, &g.cloud).unwrap().areas;
        let cloud = g.cloud.clone().with_areas(areas).unwrap();
        let mut st = ObjectiveState::new(&cloud, &vor, ObjectiveParams::default()).unwrap();
        let gt: Vec<_> = g
            .gt_normals
            .iter()
            .map(|&n| SphericalNormal::from_cartesian(n))
            .collect();
        let best = st.objective(&gt).unwrap().total;
        for seed in 0..100 {
            let r = st.objective(&random_init_normals(gt.len(), seed)).unwrap().total;
            assert!(best < r, "seed {seed}: gt {best} vs random {r}");
        }
    }

    proptest! {
        #[test]
        fn double_well_symmetric(x in -10.0f64..10.0) {
            prop_assert!((double_well(x) - double_well(1.0 - x)).abs() <= 1e-12 * (1.0 + double_well(x).abs()));
        }

        #[test]
        fn balance_zero_iff_constant(vals in proptest::collection::vec(-2.0f64..3.0, 2..8)) {
            let cell = vec![(0..vals.len() as u32).collect::<Vec<_>>()];
            let (fb, _) = balance(&cell, &vals);
            prop_assert!(fb <= 0.0);
            let constant = vals.iter().all(|&v| v == vals[0]);
            if constant { prop_assert_eq!(fb, 0.0); } else { prop_assert!(fb < 0.0); }
        }

        /// Scaling one winding value while holding the rest fixed drives the
        /// composed objective to +∞: the quartic dominates every other term.
        #[test]
        fn objective_coercive_in_single_value(j in 0usize..6, sign in prop_oneof![Just(-1.0), Just(1.0)]) {
            let cells = vec![vec![0, 1, 2, 3], vec![2, 3, 4, 5], vec![0, 5, 1]];
            let exam: Vec<Point3> = (0..6).map(|k| Point3::new(k as f64 * 0.1, 0.2, -0.3)).collect();
            let pts = [Point3::ZERO, Point3::new(0.1, 0.1, 0.1), Point3::new(-0.2, 0.0, 0.3)];
            let normals = [Point3::new(0., 0., 1.), Point3::new(1., 0., 0.), Point3::new(0., 1., 0.)];
            let base = [0.1, 0.9, 0.4, 0.0, 1.0, 0.6];
            let p = ObjectiveParams::default();
            let total = |t: f64| {
                let mut w = base;
                w[j] = t;
                let (fb, _) = balance(&cells, &w);
                ObjectiveValue::compose(term_01_values(&w, p.shear_d), fb, align(&cells, &exam, &pts, &normals, &w), &p, 3).total
            };
            let mut prev = total(sign * 10.0);
            for k in 2..8 {
                let t = sign * 10f64.powi(k);
                let cur = total(t);
                prop_assert!(cur > prev);
                prev = cur;
            }
            prop_assert!(prev > 1e20);
        }
    }
}
