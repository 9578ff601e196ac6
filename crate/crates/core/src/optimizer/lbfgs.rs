//! Limited-memory BFGS with a strong-Wolfe line search.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::{OptimizerConfig, TerminationReason};
use crate::{Error, Result};

/// Evaluations allowed in one strong-Wolfe search, and halvings in the
/// Armijo fallback.
pub const MAX_LINE_SEARCH_STEPS: usize = 40;
/// Curvature pairs with `yᵀs <= CURVATURE_EPS·|y|·|s|` are not stored.
pub const CURVATURE_EPS: f64 = 1e-12;

/// One accepted iterate. Iteration 0 is the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsStep<T> {
    pub iteration: usize,
    pub value: f64,
    pub gradient_norm: f64,
    pub info: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsResult<T> {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub reason: TerminationReason,
    pub trace: Vec<LbfgsStep<T>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    crate::math::sqrt(dot(a, a))
}

fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

struct Point<T> {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
    info: T,
}

struct Evaluator<'a, T> {
    eval: &'a mut dyn FnMut(&[f64], &mut [f64]) -> (f64, T),
    count: usize,
}

impl<T> Evaluator<'_, T> {
    fn at(&mut self, x: Vec<f64>) -> Point<T> {
        let mut g = vec![0.0; x.len()];
        let (f, info) = (self.eval)(&x, &mut g);
        self.count += 1;
        // A non-finite gradient is as unusable as a non-finite value.
        let f = if all_finite(&g) { f } else { f64::NAN };
        Point { x, f, g, info }
    }

    fn along(&mut self, base: &[f64], d: &[f64], alpha: f64) -> Point<T> {
        self.at(base.iter().zip(d).map(|(x, di)| x + alpha * di).collect())
    }
}

/// Cubic interpolation minimizer of the bracket, bisection when it falls
/// outside the safeguarded interior.
fn interpolate(a_lo: f64, f_lo: f64, d_lo: f64, a_hi: f64, f_hi: f64, d_hi: f64) -> f64 {
    let (lo, hi) = if a_lo < a_hi { (a_lo, a_hi) } else { (a_hi, a_lo) };
    let mid = 0.5 * (a_lo + a_hi);
    if !(f_lo.is_finite() && f_hi.is_finite() && d_hi.is_finite()) {
        return mid;
    }
    let d1 = d_lo + d_hi - 3.0 * (f_lo - f_hi) / (a_lo - a_hi);
    let disc = d1 * d1 - d_lo * d_hi;
    if !(disc >= 0.0) {
        return mid;
    }
    let d2 = crate::math::sqrt(disc) * if a_hi > a_lo { 1.0 } else { -1.0 };
    let a = a_hi - (a_hi - a_lo) * (d_hi + d2 - d1) / (d_hi - d_lo + 2.0 * d2);
    let margin = 0.1 * (hi - lo);
    if a.is_finite() && a > lo + margin && a < hi - margin {
        a
    } else {
        mid
    }
}

/// Strong-Wolfe search along `d`. The accepted point is always the last one
/// evaluated.
fn strong_wolfe<T>(
    ev: &mut Evaluator<'_, T>,
    cur: &Point<T>,
    d: &[f64],
    alpha0: f64,
    cfg: &OptimizerConfig,
) -> Option<Point<T>> {
    let (c1, c2) = (cfg.c1, cfg.c2);
    let f0 = cur.f;
    let dg0 = dot(&cur.g, d);
    let armijo = |a: f64, f: f64| f <= f0 + c1 * a * dg0;
    let curvature = |dg: f64| dg.abs() <= -c2 * dg0;

    let mut steps = 0;
    let (mut a_prev, mut f_prev, mut dg_prev) = (0.0, f0, dg0);
    let mut a = alpha0;
    let bracket;
    loop {
        if steps >= MAX_LINE_SEARCH_STEPS {
            return None;
        }
        let p = ev.along(&cur.x, d, a);
        steps += 1;
        let dg = dot(&p.g, d);
        if !p.f.is_finite() || !armijo(a, p.f) || (steps > 1 && p.f >= f_prev) {
            bracket = (a_prev, f_prev, dg_prev, a, p.f, dg);
            break;
        }
        if curvature(dg) {
            return Some(p);
        }
        if dg >= 0.0 {
            bracket = (a, p.f, dg, a_prev, f_prev, dg_prev);
            break;
        }
        (a_prev, f_prev, dg_prev) = (a, p.f, dg);
        a *= 2.0;
    }

    let (mut a_lo, mut f_lo, mut d_lo, mut a_hi, mut f_hi, mut d_hi) = bracket;
    while steps < MAX_LINE_SEARCH_STEPS {
        let a = interpolate(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi);
        if a == a_lo || a == a_hi {
            return None;
        }
        let p = ev.along(&cur.x, d, a);
        steps += 1;
        let dg = dot(&p.g, d);
        if !p.f.is_finite() || !armijo(a, p.f) || p.f >= f_lo {
            (a_hi, f_hi, d_hi) = (a, p.f, dg);
            continue;
        }
        if curvature(dg) {
            return Some(p);
        }
        if dg * (a_hi - a_lo) >= 0.0 {
            (a_hi, f_hi, d_hi) = (a_lo, f_lo, d_lo);
        }
        (a_lo, f_lo, d_lo) = (a, p.f, dg);
    }
    None
}

/// Steepest descent with Armijo backtracking.
fn armijo_fallback<T>(ev: &mut Evaluator<'_, T>, cur: &Point<T>, cfg: &OptimizerConfig) -> Option<Point<T>> {
    let d: Vec<f64> = cur.g.iter().map(|x| -x).collect();
    let dg0 = dot(&cur.g, &d);
    let mut a = 1.0 / norm(&cur.g);
    for _ in 0..MAX_LINE_SEARCH_STEPS {
        let p = ev.along(&cur.x, &d, a);
        if p.f.is_finite() && p.f <= cur.f + cfg.c1 * a * dg0 {
            return Some(p);
        }
        a *= 0.5;
    }
    None
}

/// Two-loop recursion: `-H g` with the scaled identity as the initial Hessian.
fn direction(g: &[f64], hist: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(hist.len());
    for (s, y, rho) in hist.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = hist.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|x| *x *= gamma);
    }
    for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|x| *x = -*x);
    q
}

/// Minimizes `evaluate`, which writes the gradient into its second argument
/// and returns the value together with caller data kept in the trace.
///
/// Stops when two successive accepted values differ by less than
/// `cfg.termination_delta`, when the gradient norm drops to
/// `cfg.gradient_tolerance`, after `cfg.max_iterations`, or when neither the
/// line search nor the steepest-descent fallback makes progress.
pub fn lbfgs_minimize<T: Clone>(
    initial: Vec<f64>,
    evaluate: &mut dyn FnMut(&[f64], &mut [f64]) -> (f64, T),
    cfg: &OptimizerConfig,
    observer: &mut dyn FnMut(&LbfgsStep<T>),
) -> Result<LbfgsResult<T>> {
    cfg.validate()?;
    let mut ev = Evaluator {
        eval: evaluate,
        count: 0,
    };
    let mut cur = ev.at(initial);
    if !cur.f.is_finite() {
        return Err(Error::NonFiniteObjective { iteration: 0 });
    }
    let mut trace = Vec::new();
    let mut record = |iteration: usize, p: &Point<T>, trace: &mut Vec<LbfgsStep<T>>| {
        let step = LbfgsStep {
            iteration,
            value: p.f,
            gradient_norm: norm(&p.g),
            info: p.info.clone(),
        };
        observer(&step);
        trace.push(step);
    };
    record(0, &cur, &mut trace);

    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.lbfgs_history);
    let mut iterations = 0;
    let reason = loop {
        let gnorm = norm(&cur.g);
        if gnorm <= cfg.gradient_tolerance {
            break TerminationReason::GradientTolerance;
        }
        if iterations >= cfg.max_iterations {
            break TerminationReason::MaxIterations;
        }
        let mut d = direction(&cur.g, &hist);
        if !(dot(&d, &cur.g) < 0.0) || !all_finite(&d) {
            hist.clear();
            d = cur.g.iter().map(|x| -x).collect();
        }
        let alpha0 = if hist.is_empty() { 1.0 / norm(&d) } else { 1.0 };
        let next = match strong_wolfe(&mut ev, &cur, &d, alpha0, cfg) {
            Some(p) => p,
            None => match armijo_fallback(&mut ev, &cur, cfg) {
                Some(p) => {
                    hist.clear();
                    p
                }
                None => break TerminationReason::LineSearchFailure,
            },
        };
        iterations += 1;
        if !next.f.is_finite() {
            return Err(Error::NonFiniteObjective { iteration: iterations });
        }
        let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
        let ys = dot(&y, &s);
        if ys > CURVATURE_EPS * norm(&y) * norm(&s) {
            if hist.len() == cfg.lbfgs_history {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / ys));
        }
        let delta = (cur.f - next.f).abs();
        cur = next;
        record(iterations, &cur, &mut trace);
        if delta < cfg.termination_delta {
            break TerminationReason::DeltaBelowThreshold;
        }
    };
    Ok(LbfgsResult {
        x: cur.x,
        value: cur.f,
        iterations,
        evaluations: ev.count,
        reason,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(delta: f64) -> OptimizerConfig {
        OptimizerConfig {
            termination_delta: delta,
            ..OptimizerConfig::default()
        }
    }

    fn run(x0: Vec<f64>, f: &mut dyn FnMut(&[f64], &mut [f64]) -> f64, cfg: &OptimizerConfig) -> LbfgsResult<()> {
        let mut eval = |x: &[f64], g: &mut [f64]| (f(x, g), ());
        lbfgs_minimize(x0, &mut eval, cfg, &mut |_| {}).unwrap()
    }

    #[test]
    fn convex_quadratic() {
        // f = ½ Σ c_i (x_i - t_i)² with condition number 100.
        let c: Vec<f64> = (0..10).map(|i| 1.0 + 11.0 * i as f64).collect();
        let t: Vec<f64> = (0..10).map(|i| i as f64 * 0.3 - 1.0).collect();
        let mut f = |x: &[f64], g: &mut [f64]| {
            let mut v = 0.0;
            for i in 0..10 {
                let d = x[i] - t[i];
                g[i] = c[i] * d;
                v += 0.5 * c[i] * d * d;
            }
            v
        };
        let c30 = OptimizerConfig {
            max_iterations: 30,
            termination_delta: 1e-30,
            ..OptimizerConfig::default()
        };
        let r = run(vec![0.0; 10], &mut f, &c30);
        for (i, (x, t)) in r.x.iter().zip(&t).enumerate() {
            assert!((x - t).abs() < 1e-8, "x[{i}] = {x}");
        }
    }

    #[test]
    fn rosenbrock() {
        let mut f = |x: &[f64], g: &mut [f64]| {
            let (a, b) = (1.0 - x[0], x[1] - x[0] * x[0]);
            g[0] = -2.0 * a - 400.0 * x[0] * b;
            g[1] = 200.0 * b;
            a * a + 100.0 * b * b
        };
        let r = run(vec![-1.2, 1.0], &mut f, &cfg(1e-30));
        assert!(r.value < 1e-10, "f = {} after {} iterations", r.value, r.iterations);
        assert!(r.iterations <= 200);
    }

    #[test]
    fn zero_gradient_returns_immediately() {
        let mut f = |_: &[f64], g: &mut [f64]| {
            g.fill(0.0);
            3.0
        };
        let r = run(vec![1.0, 2.0], &mut f, &cfg(1.0));
        assert_eq!(r.iterations, 0);
        assert_eq!(r.evaluations, 1);
        assert_eq!(r.reason, TerminationReason::GradientTolerance);
        assert_eq!(r.x, vec![1.0, 2.0]);
    }

    #[test]
    fn accepted_values_nonincreasing_and_wolfe() {
        let c1 = OptimizerConfig::default().c1;
        let c2 = OptimizerConfig::default().c2;
        // Non-quadratic, bounded below.
        let f = |x: &[f64], g: &mut [f64]| {
            let mut v = 0.0;
            for i in 0..x.len() {
                v += x[i].powi(4) - 3.0 * x[i] * x[i] + x[i];
                g[i] = 4.0 * x[i].powi(3) - 6.0 * x[i] + 1.0;
            }
            v
        };
        let mut pts: Vec<(Vec<f64>, f64, Vec<f64>)> = Vec::new();
        let mut eval = |x: &[f64], g: &mut [f64]| {
            let v = f(x, g);
            pts.push((x.to_vec(), v, g.to_vec()));
            (v, pts.len() - 1)
        };
        let r = lbfgs_minimize(vec![0.3, -0.2, 1.7, 0.05], &mut eval, &cfg(1e-14), &mut |_| {}).unwrap();
        for w in r.trace.windows(2) {
            assert!(w[1].value <= w[0].value);
            let (x0, f0, g0) = &pts[w[0].info];
            let (x1, f1, g1) = &pts[w[1].info];
            let s: Vec<f64> = x1.iter().zip(x0).map(|(a, b)| a - b).collect();
            let (dg0, dg1) = (dot(g0, &s), dot(g1, &s));
            assert!(*f1 <= f0 + c1 * dg0 + 1e-15);
            assert!(dg1.abs() <= c2 * dg0.abs() + 1e-15);
        }
    }

    #[test]
    fn line_search_failure_is_reported() {
        // The reported gradient points the wrong way, so no descent is possible.
        let mut f = |x: &[f64], g: &mut [f64]| {
            g[0] = -1.0;
            x[0]
        };
        let r = run(vec![0.0], &mut f, &cfg(1e-12));
        assert_eq!(r.reason, TerminationReason::LineSearchFailure);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let mut eval = |_: &[f64], g: &mut [f64]| {
            g.fill(0.0);
            (f64::NAN, ())
        };
        let e = lbfgs_minimize(vec![0.0], &mut eval, &cfg(1.0), &mut |_| {}).unwrap_err();
        assert_eq!(e, Error::NonFiniteObjective { iteration: 0 });
    }

    #[test]
    fn iteration_cap() {
        let mut f = |x: &[f64], g: &mut [f64]| {
            let (a, b) = (1.0 - x[0], x[1] - x[0] * x[0]);
            g[0] = -2.0 * a - 400.0 * x[0] * b;
            g[1] = 200.0 * b;
            a * a + 100.0 * b * b
        };
        let c = OptimizerConfig {
            max_iterations: 3,
            termination_delta: 1e-30,
            ..OptimizerConfig::default()
        };
        let r = run(vec![-1.2, 1.0], &mut f, &c);
        assert_eq!(r.iterations, 3);
        assert_eq!(r.reason, TerminationReason::MaxIterations);
        assert_eq!(r.trace.len(), 4);
    }

    #[test]
    fn interpolation_stays_inside_bracket() {
        let a = interpolate(0.0, 1.0, -1.0, 1.0, 2.0, 3.0);
        assert!(a > 0.0 && a < 1.0);
        assert_eq!(interpolate(0.0, 1.0, -1.0, 1.0, f64::INFINITY, 0.0), 0.5);
    }
}
