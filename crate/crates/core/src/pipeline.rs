//! Normalize, build the Voronoi structure, estimate areas, optimize.

use alloc::vec::Vec;

use crate::geometry::{
    add_gaussian_noise, check_len, normalize_unit_box, AffineTransform, Point3, PointCloud, SphericalNormal, Vec3,
};
use crate::metrics::{metric_report, MetricReport};
use crate::objective::ObjectiveParams;
use crate::optimizer::{orient_normals, IterationRecord, OptimizerConfig, OrientationTrace};
use crate::voronoi::{estimate_area_weights, VoronoiStructure, DEFAULT_BBOX_SCALE};
use crate::winding::{winding_field, WindingField};
use crate::{Error, Result};

pub const DEFAULT_HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub params: ObjectiveParams,
    pub optimizer: OptimizerConfig,
    pub bbox_scale: f64,
    /// Standard deviation of the Gaussian noise added after normalization.
    pub noise_level: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            params: ObjectiveParams::default(),
            optimizer: OptimizerConfig::default(),
            bbox_scale: DEFAULT_BBOX_SCALE,
            noise_level: 0.0,
        }
    }
}

impl PipelineConfig {
    /// Noise uses a stream separate from the initial normals.
    pub fn noise_seed(&self) -> u64 {
        self.optimizer.seed ^ 0x6e6f_6973_6500
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Oriented cloud in the input frame (noisy positions if noise was added).
    pub cloud: PointCloud,
    /// Oriented cloud in the unit box, with area weights.
    pub normalized: PointCloud,
    pub transform: AffineTransform,
    pub voronoi: VoronoiStructure,
    /// Samples whose area weight came from the fallback.
    pub area_fallbacks: Vec<u32>,
    /// Winding field at the final normals.
    pub field: WindingField,
    pub trace: OrientationTrace,
}

impl PipelineOutput {
    pub fn normals(&self) -> Vec<Vec3> {
        self.normalized.cartesian_normals().unwrap_or_default()
    }

    /// Metrics against reference normals and, optionally, a dense sampling
    /// of the reference surface in the input frame.
    pub fn metrics(&self, gt_normals: &[Vec3], reference: Option<&[Point3]>, bins: usize) -> Result<MetricReport> {
        metric_report(
            &self.normals(),
            gt_normals,
            &self.field,
            bins,
            &self.cloud.points,
            reference,
        )
    }
}

/// Orients `points`. `init`, if given, warm-starts the optimization.
pub fn run_pipeline(
    points: &[Point3],
    init: Option<&[Vec3]>,
    cfg: &PipelineConfig,
    progress: &mut dyn FnMut(&IterationRecord),
) -> Result<PipelineOutput> {
    if !(cfg.noise_level >= 0.0 && cfg.noise_level.is_finite()) {
        return Err(Error::InvalidParameter("noise level must be finite and >= 0".into()));
    }
    cfg.params.validate()?;
    cfg.optimizer.validate()?;
    let input = PointCloud::new(points.to_vec())?;
    let (mut cloud, transform) = normalize_unit_box(&input)?;
    if cfg.noise_level > 0.0 {
        cloud = add_gaussian_noise(&cloud, cfg.noise_level, cfg.noise_seed())?;
    }
    let voronoi = VoronoiStructure::build(&cloud.points, cfg.bbox_scale)?;
    let weights = estimate_area_weights(&voronoi, &cloud)?;
    cloud.set_areas(weights.areas)?;
    if let Some(init) = init {
        check_len(points.len(), init.len())?;
        cloud.set_normals(init.iter().map(|&n| SphericalNormal::from_cartesian(n)).collect())?;
    }
    let (normalized, trace) = orient_normals(&cloud, &voronoi, cfg.params, &cfg.optimizer, progress)?;
    let field = winding_field(&voronoi, &normalized)?;
    let mut out = PointCloud::new(normalized.points.iter().map(|&p| transform.invert(p)).collect())?;
    out.normals = normalized.normals.clone();
    Ok(PipelineOutput {
        cloud: out,
        normalized,
        transform,
        voronoi,
        area_fallbacks: weights.fallback,
        field,
        trace,
    })
}
