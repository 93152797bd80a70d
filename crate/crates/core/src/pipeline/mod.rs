//! Batch runs over annotated datasets: occlusion audits, pose fitting,
//! metric joins, dorsal alignment, feature deltas and click labeling.
//!
//! Every run writes a fixed set of files with stable column order and
//! six-significant-digit floats, so identical inputs give byte-identical
//! report directories regardless of the worker count.

mod align;
mod audit;
mod clicks;
mod delta;
mod eval;
pub mod fixture;
mod fitbatch;
pub mod io;
mod schema;

pub use clicks::{run_clicks, ClickInputs};
pub use delta::run_delta;
pub use schema::{
    ingest, read_predictions, to_jsonl, FrameAnnotation, IngestReport, Manifest, MarkerObservation, Prediction, RunConfig,
    SkippedLine, ANNOTATIONS_SCHEMA, LOW_VISIBILITY_MAX, MANIFEST_SCHEMA, PREDICTIONS_SCHEMA,
};

use nalgebra::Vector3;
use serde::Serialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::alignment::{AlignError, CROP_SIZE};
use crate::camera::{CameraError, CameraRig};
use crate::features::{FeatureError, DEFAULT_PATCH_SIZE};
use crate::fitting::{fit, FitError};
use crate::hand_model::{keypoints, pose_mesh, synthetic::synthetic_hand, HandMesh, HandState, ModelError, RiggedHandTemplate};
use crate::metrics::MetricError;
use crate::occlusion::{OcclusionError, ThresholdMode};
use crate::stats::{StatsError, CLICK_THRESHOLD};
use io::ReportDir;

pub const REPORT_SCHEMA: &str = "dorsalkit.report/1";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema mismatch: found {found:?}, expected {expected:?}")]
    Schema { found: String, expected: &'static str },
    #[error("input file missing: {0}")]
    MissingInput(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot write report: {0}")]
    Report(String),
    #[error("no frames to process")]
    NoFrames,
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Occlusion(#[from] OcclusionError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl PipelineError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Constants every report echoes so a reader can tell how it was produced.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportHeader {
    pub schema: &'static str,
    pub tool_version: &'static str,
    pub occluded_threshold: f64,
    pub visible_threshold: f64,
    pub finger_scale: f64,
    pub threshold_mode: ThresholdMode,
    pub raster_px: [usize; 2],
    pub crop_size: usize,
    pub patch_size: usize,
    pub feature_grid: usize,
    pub click_threshold: f64,
    pub low_visibility_max: f64,
}

impl ReportHeader {
    pub fn new(cfg: &RunConfig) -> Self {
        Self {
            schema: REPORT_SCHEMA,
            tool_version: env!("CARGO_PKG_VERSION"),
            occluded_threshold: cfg.occluded_threshold,
            visible_threshold: cfg.visible_threshold,
            finger_scale: cfg.finger_scale,
            threshold_mode: cfg.threshold_mode,
            raster_px: [cfg.raster.width, cfg.raster.height],
            crop_size: cfg.crop.size,
            patch_size: DEFAULT_PATCH_SIZE,
            feature_grid: CROP_SIZE / DEFAULT_PATCH_SIZE,
            click_threshold: CLICK_THRESHOLD,
            low_visibility_max: cfg.low_visibility_max,
        }
    }
}

/// Command-line overrides applied on top of a manifest.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub raster: Option<usize>,
    pub occluded_threshold: Option<f64>,
    pub visible_threshold: Option<f64>,
    pub predictions: Option<PathBuf>,
}

/// Result of one batch command.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunOutcome {
    pub frames_ok: usize,
    pub frames_failed: usize,
    pub files: Vec<String>,
}

impl RunOutcome {
    pub fn partial(&self) -> bool {
        self.frames_failed > 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameFailure {
    pub frame_id: String,
    pub error: String,
}

#[derive(Serialize)]
struct RunSummary<'a> {
    schema: &'static str,
    command: &'a str,
    tool_version: &'static str,
    seed: u64,
    manifest: &'a Manifest,
    ingest: &'a IngestReport,
    outcome: &'a RunOutcome,
}

/// How a frame's hand state was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSource {
    GroundTruth,
    Fitted,
}

impl StateSource {
    pub fn as_str(self) -> &'static str {
        match self {
            StateSource::GroundTruth => "gt_state",
            StateSource::Fitted => "fit",
        }
    }
}

/// Hand state of a frame with the fitted objective when it had to be fitted.
pub struct ResolvedState {
    pub state: HandState,
    pub source: StateSource,
    pub fit_objective: Option<f64>,
    pub fit_iterations: Option<usize>,
    pub converged: Option<bool>,
}

/// A loaded manifest with its camera, template and frames.
pub struct Pipeline {
    pub manifest: Manifest,
    pub template: RiggedHandTemplate,
    pub rig: CameraRig,
    pub frames: Vec<FrameAnnotation>,
    pub ingest: IngestReport,
    pub output: PathBuf,
    pub predictions: Option<PathBuf>,
    workers: usize,
}

impl Pipeline {
    pub fn load(manifest_path: impl AsRef<Path>, overrides: &Overrides) -> Result<Self, PipelineError> {
        let mut manifest = Manifest::load(manifest_path)?;
        if let Some(seed) = overrides.seed {
            manifest.seed = seed;
        }
        if let Some(px) = overrides.raster {
            manifest.config.raster.width = px;
            manifest.config.raster.height = px;
        }
        if let Some(t) = overrides.occluded_threshold {
            manifest.config.occluded_threshold = t;
        }
        if let Some(t) = overrides.visible_threshold {
            manifest.config.visible_threshold = t;
        }
        manifest.config.validate()?;
        manifest.check_inputs()?;

        let template = match &manifest.template {
            Some(p) => RiggedHandTemplate::load(manifest.resolve(p))?,
            None => synthetic_hand(),
        };
        let rig = CameraRig::load(manifest.resolve(&manifest.calibration))?;
        let mut ingest_report = IngestReport::default();
        let paths: Vec<PathBuf> = manifest.annotations.iter().map(|p| manifest.resolve(p)).collect();
        let frames = schema::ingest(&paths, &mut ingest_report)?;
        let output = overrides
            .output
            .clone()
            .or_else(|| manifest.output.as_ref().map(|p| manifest.resolve(p)))
            .ok_or_else(|| PipelineError::Config("no output directory given".into()))?;
        let predictions = overrides
            .predictions
            .clone()
            .or_else(|| manifest.predictions.as_ref().map(|p| manifest.resolve(p)));
        Ok(Self {
            manifest,
            template,
            rig,
            frames,
            ingest: ingest_report,
            output,
            predictions,
            workers: 1,
        })
    }

    /// Worker threads for frame-parallel stages (at least 1).
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn config(&self) -> &RunConfig {
        &self.manifest.config
    }

    pub fn header(&self) -> ReportHeader {
        ReportHeader::new(self.config())
    }

    /// Maps frames in parallel and returns results in frame order.
    fn map_frames<T: Send>(&self, f: impl Fn(usize, &FrameAnnotation) -> T + Sync) -> Result<Vec<T>, PipelineError> {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| PipelineError::Pool(e.to_string()))?;
        Ok(pool.install(|| self.frames.par_iter().enumerate().map(|(i, fr)| f(i, fr)).collect()))
    }

    /// Ground-truth state if annotated, else a fit to keypoints or markers.
    pub fn resolve_state(&self, frame: &FrameAnnotation) -> Result<ResolvedState, PipelineError> {
        if let Some(s) = &frame.gt_state {
            return Ok(ResolvedState {
                state: s.clone(),
                source: StateSource::GroundTruth,
                fit_objective: None,
                fit_iterations: None,
                converged: None,
            });
        }
        let targets = frame
            .fit_targets()
            .ok_or_else(|| PipelineError::Config(format!("frame {} has nothing to fit", frame.frame_id)))?;
        let init = HandState::neutral(self.template.shape_rank());
        let r = fit(&self.template, &targets, &init, &self.config().fit)?;
        Ok(ResolvedState {
            state: r.state,
            source: StateSource::Fitted,
            fit_objective: Some(r.final_objective),
            fit_iterations: Some(r.iterations),
            converged: Some(r.converged),
        })
    }

    fn mesh(&self, state: &HandState) -> Result<HandMesh, PipelineError> {
        Ok(pose_mesh(&self.template, state)?)
    }

    fn keypoints_of(&self, state: &HandState) -> Result<[Vector3<f64>; 21], PipelineError> {
        Ok(keypoints(&self.mesh(state)?))
    }

    fn finish(&self, dir: &mut ReportDir, command: &str, outcome: RunOutcome) -> Result<RunOutcome, PipelineError> {
        let mut outcome = outcome;
        let name = format!("{command}_run.json");
        outcome.files.push(name.clone());
        outcome.files.sort();
        let summary = RunSummary {
            schema: REPORT_SCHEMA,
            command,
            tool_version: env!("CARGO_PKG_VERSION"),
            seed: self.manifest.seed,
            manifest: &self.manifest,
            ingest: &self.ingest,
            outcome: &outcome,
        };
        dir.write_json(&name, &summary)?;
        Ok(outcome)
    }
}

/// Splits per-frame results into successes and recorded failures.
fn partition<T>(frames: &[FrameAnnotation], results: Vec<Result<T, PipelineError>>) -> (Vec<(usize, T)>, Vec<FrameFailure>) {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push((i, v)),
            Err(e) => {
                log::warn!("frame {} failed: {e}", frames[i].frame_id);
                failed.push(FrameFailure {
                    frame_id: frames[i].frame_id.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    (ok, failed)
}
