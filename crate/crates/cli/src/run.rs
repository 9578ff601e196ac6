use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use wnorient_core::geometry::{generate_sphere, generate_thin_sheet, generate_torus, GroundTruthCloud};
use wnorient_core::metrics::winding_histogram;
use wnorient_core::objective::ObjectiveParams;
use wnorient_core::optimizer::{IterationRecord, OptimizerConfig};
use wnorient_core::pipeline::{run_pipeline, PipelineConfig, DEFAULT_HISTOGRAM_BINS};
use wnorient_core::voronoi::DEFAULT_BBOX_SCALE;

use crate::io::{self, CloudData, Format};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    /// Format of every cloud file; `None` picks it from each file's extension.
    pub format: Option<Format>,
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub shear_d: f64,
    pub bbox_scale: f64,
    pub noise_level: f64,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop when the unnormalized objective changes by less than this.
    pub tol: f64,
    pub export_exam_points: bool,
    pub export_histogram: bool,
    /// Reference normals, index-aligned with the input points.
    pub gt: Option<PathBuf>,
    /// Starting normals, index-aligned with the input points.
    pub init: Option<PathBuf>,
    /// Worker threads; 0 uses the default pool.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = ObjectiveParams::default();
        let o = OptimizerConfig::default();
        RunConfig {
            input: PathBuf::new(),
            output: PathBuf::new(),
            format: None,
            lambda_a: p.lambda_a,
            lambda_b: p.lambda_b,
            shear_d: p.shear_d,
            bbox_scale: DEFAULT_BBOX_SCALE,
            noise_level: 0.0,
            seed: o.seed,
            max_iters: o.max_iterations,
            tol: o.termination_delta,
            export_exam_points: false,
            export_histogram: false,
            gt: None,
            init: None,
            threads: 0,
        }
    }
}

impl RunConfig {
    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            params: ObjectiveParams {
                lambda_b: self.lambda_b,
                lambda_a: self.lambda_a,
                shear_d: self.shear_d,
            },
            optimizer: OptimizerConfig {
                max_iterations: self.max_iters,
                termination_delta: self.tol,
                seed: self.seed,
                ..OptimizerConfig::default()
            },
            bbox_scale: self.bbox_scale,
            noise_level: self.noise_level,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let empty = |p: &Path| p.as_os_str().is_empty();
        if empty(&self.input) || empty(&self.output) {
            return Err(CliError::Config("input and output paths must be nonempty".into()));
        }
        if self.gt.as_deref().is_some_and(empty) || self.init.as_deref().is_some_and(empty) {
            return Err(CliError::Config("gt and init paths must be nonempty".into()));
        }
        let cfg = self.pipeline_config();
        cfg.params.validate()?;
        cfg.optimizer.validate()?;
        if !(self.bbox_scale > 1.0 && self.bbox_scale.is_finite()) {
            return Err(CliError::Config("bbox scale must be finite and > 1".into()));
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return Err(CliError::Config("noise level must be finite and >= 0".into()));
        }
        Ok(())
    }

    fn format_of(&self, path: &Path) -> Format {
        self.format.unwrap_or_else(|| Format::from_path(path))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArtifactPaths {
    pub cloud: PathBuf,
    pub exam_points: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

/// `out.xyz` gives `out.exam.txt` and `out.report.json` next to it. The
/// report is written when metrics or the histogram were requested.
pub fn artifact_paths(cfg: &RunConfig) -> ArtifactPaths {
    let sibling = |suffix: &str| {
        let stem = cfg.output.file_stem().map(|s| s.to_os_string()).unwrap_or_default();
        let mut name = stem;
        name.push(suffix);
        cfg.output.with_file_name(name)
    };
    ArtifactPaths {
        cloud: cfg.output.clone(),
        exam_points: cfg.export_exam_points.then(|| sibling(".exam.txt")),
        report: (cfg.export_histogram || cfg.gt.is_some()).then(|| sibling(".report.json")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveReport {
    pub total: f64,
    pub f01: f64,
    pub f_b: f64,
    pub f_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub truth_percentage: f64,
    pub angle_rmse: f64,
    /// Chamfer distance ×100 between the oriented positions and the
    /// reference file's positions.
    pub chamfer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramReport {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub points: usize,
    pub exam_points: usize,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: String,
    pub seconds: f64,
    pub objective: ObjectiveReport,
    pub area_fallbacks: usize,
    pub metrics: Option<MetricsReport>,
    pub histogram: Option<HistogramReport>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub report: Report,
    pub artifacts: ArtifactPaths,
}

fn read_aligned_normals(path: &Path, cfg: &RunConfig, n: usize, what: &str) -> Result<CloudData, CliError> {
    let data = io::read_point_cloud(path, cfg.format_of(path))?;
    match &data.normals {
        None => Err(CliError::Config(format!(
            "{what} file {} has no normals",
            path.display()
        ))),
        Some(nrm) if nrm.len() != n => Err(CliError::Config(format!(
            "{what} file {} has {} normals for {n} input points",
            path.display(),
            nrm.len()
        ))),
        Some(_) => Ok(data),
    }
}

/// Reads, orients and writes. Every artifact is written or none is.
/// Normals stored in the input file are not used; pass them through
/// `init` or `gt` instead.
pub fn run_orient(
    cfg: &RunConfig,
    progress: &mut (dyn FnMut(&IterationRecord) + Send),
) -> Result<RunSummary, CliError> {
    cfg.validate()?;
    let input = io::read_point_cloud(&cfg.input, cfg.format_of(&cfg.input))?;
    let n = input.points.len();
    let gt = cfg
        .gt
        .as_deref()
        .map(|p| read_aligned_normals(p, cfg, n, "gt"))
        .transpose()?;
    let init = cfg
        .init
        .as_deref()
        .map(|p| read_aligned_normals(p, cfg, n, "init"))
        .transpose()?;
    let pcfg = cfg.pipeline_config();

    let mut run = || {
        run_pipeline(
            &input.points,
            init.as_ref().and_then(|d| d.normals.as_deref()),
            &pcfg,
            progress,
        )
    };
    let out = if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
        pool.install(run)?
    } else {
        run()?
    };

    let normals = out.normals();
    let metrics = match &gt {
        Some(gt) => {
            let m = out.metrics(
                gt.normals.as_deref().unwrap_or_default(),
                Some(&gt.points),
                DEFAULT_HISTOGRAM_BINS,
            )?;
            Some(MetricsReport {
                truth_percentage: m.truth_percentage,
                angle_rmse: m.angle_rmse,
                chamfer: m.chamfer.unwrap_or(0.0),
            })
        }
        None => None,
    };
    let histogram = if cfg.export_histogram {
        let h = winding_histogram(&out.field, DEFAULT_HISTOGRAM_BINS)?;
        Some(HistogramReport {
            lo: h.lo,
            hi: h.hi,
            counts: h.counts,
        })
    } else {
        None
    };
    let last = out.trace.records.last();
    let value = out.trace.final_value().unwrap_or_default();
    let report = Report {
        points: n,
        exam_points: out.voronoi.exam_points.len(),
        iterations: out.trace.iterations,
        evaluations: out.trace.evaluations,
        termination: out.trace.reason.to_string(),
        seconds: last.map_or(0.0, |r| r.seconds),
        objective: ObjectiveReport {
            total: value.total,
            f01: value.f01,
            f_b: value.f_b,
            f_a: value.f_a,
        },
        area_fallbacks: out.area_fallbacks.len(),
        metrics,
        histogram,
    };

    let artifacts = artifact_paths(cfg);
    let mut files = vec![(
        artifacts.cloud.clone(),
        io::encode_oriented_cloud(&out.cloud.points, &normals, cfg.format_of(&cfg.output))?,
    )];
    if let Some(path) = &artifacts.exam_points {
        // Exam points live in the normalized frame; report them in the input frame.
        let pts: Vec<_> = out
            .voronoi
            .exam_points
            .iter()
            .map(|&q| out.transform.invert(q))
            .collect();
        files.push((path.clone(), io::encode_exam_points(&pts, &out.field.values)));
    }
    if let Some(path) = &artifacts.report {
        let mut json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Config(e.to_string()))?;
        json.push('\n');
        files.push((path.clone(), json.into_bytes()));
    }
    io::write_all_or_nothing(&files)?;
    Ok(RunSummary { report, artifacts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fixture {
    Torus,
    Sphere,
    Sheet,
}

impl FromStr for Fixture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "torus" => Ok(Fixture::Torus),
            "sphere" => Ok(Fixture::Sphere),
            "sheet" => Ok(Fixture::Sheet),
            other => Err(format!("unknown fixture {other:?} (expected torus, sphere or sheet)")),
        }
    }
}

/// Torus with radii 1 and 0.4, unit sphere, or `1 × 0.6 × thickness` slab.
pub fn generate_fixture(kind: Fixture, n: usize, seed: u64, thickness: f64) -> Result<GroundTruthCloud, CliError> {
    Ok(match kind {
        Fixture::Torus => generate_torus(1.0, 0.4, n, seed)?,
        Fixture::Sphere => generate_sphere(n, seed)?,
        Fixture::Sheet => generate_thin_sheet(thickness, n, seed)?,
    })
}
