//! Orientation by unconstrained minimization over spherical angles.

mod lbfgs;

pub use lbfgs::{lbfgs_minimize, LbfgsResult, LbfgsStep, CURVATURE_EPS, MAX_LINE_SEARCH_STEPS};

use alloc::vec::Vec;

use crate::geometry::{check_len, random_init_normals, PointCloud, SphericalNormal};
use crate::objective::{ObjectiveParams, ObjectiveState, ObjectiveValue};
use crate::voronoi::VoronoiStructure;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    /// Threshold on the change of the objective between accepted iterates.
    /// [`orient_normals`] compares it against the unnormalized sum `N·f`.
    pub termination_delta: f64,
    pub lbfgs_history: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Stops when the gradient norm is at or below this. Zero means only an
    /// exactly stationary point stops the run.
    pub gradient_tolerance: f64,
    /// Seed for the random initial normals.
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iterations: 200,
            termination_delta: 1.0,
            lbfgs_history: 10,
            c1: 1e-4,
            c2: 0.9,
            gradient_tolerance: 0.0,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.max_iterations < 1 {
            return bad("max_iterations must be >= 1");
        }
        if !(self.termination_delta > 0.0) {
            return bad("termination_delta must be > 0");
        }
        if self.lbfgs_history < 1 {
            return bad("lbfgs_history must be >= 1");
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return bad("line-search constants must satisfy 0 < c1 < c2 < 1");
        }
        if !(self.gradient_tolerance >= 0.0) {
            return bad("gradient_tolerance must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    DeltaBelowThreshold,
    GradientTolerance,
    MaxIterations,
    LineSearchFailure,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::DeltaBelowThreshold => "delta below threshold",
            TerminationReason::GradientTolerance => "gradient tolerance",
            TerminationReason::MaxIterations => "iteration cap",
            TerminationReason::LineSearchFailure => "line-search failure",
        }
    }
}

impl core::fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub value: ObjectiveValue,
    pub gradient_norm: f64,
    /// Seconds since the start of the run; always zero without `std`.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrientationTrace {
    /// Starting point followed by every accepted iterate.
    pub records: Vec<IterationRecord>,
    pub iterations: usize,
    pub evaluations: usize,
    pub reason: TerminationReason,
}

impl OrientationTrace {
    pub fn final_value(&self) -> Option<ObjectiveValue> {
        self.records.last().map(|r| r.value)
    }
}

struct Clock {
    #[cfg(feature = "std")]
    start: std::time::Instant,
}

impl Clock {
    fn start() -> Self {
        Clock {
            #[cfg(feature = "std")]
            start: std::time::Instant::now(),
        }
    }

    fn seconds(&self) -> f64 {
        #[cfg(feature = "std")]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(not(feature = "std"))]
        {
            0.0
        }
    }
}

fn flatten(uv: &[SphericalNormal]) -> Vec<f64> {
    uv.iter().flat_map(|sn| [sn.u, sn.v]).collect()
}

fn unflatten(x: &[f64], out: &mut Vec<SphericalNormal>) {
    out.clear();
    out.extend(x.chunks_exact(2).map(|c| SphericalNormal::new(c[0], c[1])));
}

/// Orients `cloud` (which must carry area weights) starting from its normals
/// if present, otherwise from uniformly random directions drawn with
/// `cfg.seed`. `progress` sees the start and every accepted iterate.
pub fn orient_normals(
    cloud: &PointCloud,
    vor: &VoronoiStructure,
    params: ObjectiveParams,
    cfg: &OptimizerConfig,
    progress: &mut dyn FnMut(&IterationRecord),
) -> Result<(PointCloud, OrientationTrace)> {
    cfg.validate()?;
    let n = cloud.len();
    let init = match &cloud.normals {
        Some(nrm) => nrm.clone(),
        None => random_init_normals(n, cfg.seed),
    };
    check_len(n, init.len())?;
    let mut state = ObjectiveState::new(cloud, vor, params)?;
    let inner = OptimizerConfig {
        termination_delta: cfg.termination_delta / n as f64,
        ..*cfg
    };
    let clock = Clock::start();
    let mut uv = Vec::with_capacity(n);
    let mut failure = None;
    let mut eval = |x: &[f64], g: &mut [f64]| {
        unflatten(x, &mut uv);
        match state.evaluate(&uv, g) {
            Ok(v) => (v.total, v),
            Err(e) => {
                failure = Some(e);
                (f64::NAN, ObjectiveValue::default())
            }
        }
    };
    let mut times = Vec::new();
    let mut observe = |s: &LbfgsStep<ObjectiveValue>| {
        let seconds = clock.seconds();
        times.push(seconds);
        progress(&IterationRecord {
            iteration: s.iteration,
            value: s.info,
            gradient_norm: s.gradient_norm,
            seconds,
        })
    };
    let result = lbfgs_minimize(flatten(&init), &mut eval, &inner, &mut observe);
    if let Some(e) = failure {
        return Err(e);
    }
    let result = result?;
    let records = result
        .trace
        .iter()
        .zip(times)
        .map(|(s, seconds)| IterationRecord {
            iteration: s.iteration,
            value: s.info,
            gradient_norm: s.gradient_norm,
            seconds,
        })
        .collect();
    let mut normals = Vec::with_capacity(n);
    unflatten(&result.x, &mut normals);
    let normals = normals.into_iter().map(SphericalNormal::canonical).collect();
    let mut out = cloud.clone();
    out.set_normals(normals)?;
    let trace = OrientationTrace {
        records,
        iterations: result.iterations,
        evaluations: result.evaluations,
        reason: result.reason,
    };
    Ok((out, trace))
}
