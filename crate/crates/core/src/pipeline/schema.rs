//! Manifest, annotation and prediction files.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::io::BufRead;
use std::path::{Path, PathBuf};

use super::PipelineError;
use crate::alignment::{CropConfig, RansacConfig};
use crate::fitting::{FitConfig, FitTargets, KeypointTargets, MarkerTargets};
use crate::hand_model::{HandState, NUM_KEYPOINTS};
use crate::occlusion::{RasterConfig, ThresholdMode, VisibilityThresholds};

pub const MANIFEST_SCHEMA: &str = "dorsalkit.manifest/1";
pub const ANNOTATIONS_SCHEMA: &str = "dorsalkit.annotations/1";
pub const PREDICTIONS_SCHEMA: &str = "dorsalkit.predictions/1";

/// Highest mean finger visibility included in the low-visibility subset.
pub const LOW_VISIBILITY_MAX: f64 = 0.50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub raster: RasterConfig,
    pub occluded_threshold: f64,
    pub visible_threshold: f64,
    pub finger_scale: f64,
    pub threshold_mode: ThresholdMode,
    pub fit: FitConfig,
    pub ransac: RansacConfig,
    pub crop: CropConfig,
    pub low_visibility_max: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = VisibilityThresholds::default();
        Self {
            raster: RasterConfig::default(),
            occluded_threshold: t.occluded,
            visible_threshold: t.visible,
            finger_scale: t.finger_scale,
            threshold_mode: t.mode,
            fit: FitConfig::default(),
            ransac: RansacConfig::default(),
            crop: CropConfig::default(),
            low_visibility_max: LOW_VISIBILITY_MAX,
        }
    }
}

impl RunConfig {
    pub fn thresholds(&self) -> VisibilityThresholds {
        VisibilityThresholds {
            occluded: self.occluded_threshold,
            visible: self.visible_threshold,
            finger_scale: self.finger_scale,
            mode: self.threshold_mode,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.raster.validate()?;
        self.thresholds().validate()?;
        self.fit.validate()?;
        self.ransac.validate()?;
        if !(0.0..=1.0).contains(&self.low_visibility_max) {
            return Err(PipelineError::Config(format!("low_visibility_max {} outside [0, 1]", self.low_visibility_max)));
        }
        Ok(())
    }
}

/// A batch run description. Relative paths resolve against the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub calibration: PathBuf,
    pub annotations: Vec<PathBuf>,
    /// Rigged hand template; the built-in synthetic hand when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub config: RunConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut m: Manifest = serde_json::from_str(&text)?;
        if m.schema != MANIFEST_SCHEMA {
            return Err(PipelineError::Schema {
                found: m.schema,
                expected: MANIFEST_SCHEMA,
            });
        }
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Checks that every referenced input exists.
    pub fn check_inputs(&self) -> Result<(), PipelineError> {
        let mut inputs = vec![&self.calibration];
        inputs.extend(&self.annotations);
        inputs.extend(self.template.iter());
        for p in inputs {
            let full = self.resolve(p);
            if !full.is_file() {
                return Err(PipelineError::MissingInput(full.display().to_string()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerObservation {
    pub points: Vec<[f64; 3]>,
    pub vertex_ids: Vec<usize>,
}

/// One annotated frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameAnnotation {
    pub frame_id: String,
    pub subject_id: String,
    #[serde(default)]
    pub gesture: String,
    /// 21 keypoints in metres, world frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoints3d: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub markers3d: Option<MarkerObservation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_state: Option<HandState>,
    /// Monk scale, 1 to 10.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skin_tone_level: Option<u8>,
    /// Grayscale PGM of the frame, relative to the annotation file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
}

impl FrameAnnotation {
    pub fn validate(&self) -> Result<(), String> {
        if self.frame_id.is_empty() {
            return Err("empty frame_id".into());
        }
        if self.keypoints3d.is_none() && self.markers3d.is_none() && self.gt_state.is_none() {
            return Err("needs keypoints3d, markers3d or gt_state".into());
        }
        if let Some(k) = &self.keypoints3d {
            if k.len() != NUM_KEYPOINTS {
                return Err(format!("keypoints3d has {} points, expected {NUM_KEYPOINTS}", k.len()));
            }
            if k.iter().flatten().any(|v| !v.is_finite()) {
                return Err("non-finite keypoint".into());
            }
        }
        if let Some(m) = &self.markers3d {
            if m.points.len() != m.vertex_ids.len() {
                return Err(format!("{} marker points but {} vertex ids", m.points.len(), m.vertex_ids.len()));
            }
            if m.points.iter().flatten().any(|v| !v.is_finite()) {
                return Err("non-finite marker".into());
            }
        }
        if let Some(s) = &self.gt_state {
            s.validate().map_err(|e| e.to_string())?;
        }
        if let Some(level) = self.skin_tone_level {
            if !(1..=10).contains(&level) {
                return Err(format!("skin_tone_level {level} outside 1..=10"));
            }
        }
        Ok(())
    }

    pub fn keypoints(&self) -> Option<[Vector3<f64>; NUM_KEYPOINTS]> {
        let k = self.keypoints3d.as_ref()?;
        Some(std::array::from_fn(|i| Vector3::from(k[i])))
    }

    /// Fitting targets, preferring keypoints over markers.
    pub fn fit_targets(&self) -> Option<FitTargets> {
        if let Some(k) = self.keypoints() {
            return Some(FitTargets::Keypoints(KeypointTargets::new(k)));
        }
        self.markers3d.as_ref().map(|m| {
            FitTargets::Markers(MarkerTargets {
                points: m.points.iter().map(|p| Vector3::from(*p)).collect(),
                vertex_ids: m.vertex_ids.clone(),
            })
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub frame_id: String,
    pub state: HandState,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SkippedLine {
    pub file: String,
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub frames: usize,
    pub skipped: Vec<SkippedLine>,
}

#[derive(Deserialize)]
struct Header {
    schema: String,
}

/// Reads a JSON-lines file whose first non-blank line is `{"schema": ...}`.
/// Records that fail to parse or validate are skipped and reported; a
/// missing or wrong header is fatal. An empty file yields nothing.
fn read_jsonl<T: serde::de::DeserializeOwned>(
    path: &Path,
    schema: &'static str,
    label: &str,
    validate: impl Fn(&T) -> Result<(), String>,
    report: &mut IngestReport,
) -> Result<Vec<T>, PipelineError> {
    let file = std::fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
    let mut out = Vec::new();
    let mut header_seen = false;
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| PipelineError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            let h: Header = serde_json::from_str(&line).map_err(|_| PipelineError::Schema {
                found: format!("no header in {}", path.display()),
                expected: schema,
            })?;
            if h.schema != schema {
                return Err(PipelineError::Schema {
                    found: h.schema,
                    expected: schema,
                });
            }
            header_seen = true;
            continue;
        }
        let parsed = serde_json::from_str::<T>(&line)
            .map_err(|e| e.to_string())
            .and_then(|r| validate(&r).map(|_| r));
        match parsed {
            Ok(r) => out.push(r),
            Err(reason) => {
                log::warn!("{}:{}: skipping malformed {label}: {reason}", path.display(), i + 1);
                report.skipped.push(SkippedLine {
                    file: path.display().to_string(),
                    line: i + 1,
                    reason,
                });
            }
        }
    }
    if out.is_empty() && report.skipped.is_empty() {
        log::warn!("{} contains no {label}s", path.display());
    }
    Ok(out)
}

/// Annotations from all files in order, with image paths resolved.
pub fn ingest(paths: &[PathBuf], report: &mut IngestReport) -> Result<Vec<FrameAnnotation>, PipelineError> {
    let mut frames = Vec::new();
    for path in paths {
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        for mut f in read_jsonl::<FrameAnnotation>(path, ANNOTATIONS_SCHEMA, "frame", FrameAnnotation::validate, report)? {
            f.image = f.image.map(|p| if p.is_absolute() { p } else { base.join(p) });
            frames.push(f);
        }
    }
    report.frames = frames.len();
    Ok(frames)
}

pub fn read_predictions(path: &Path, report: &mut IngestReport) -> Result<Vec<Prediction>, PipelineError> {
    read_jsonl(path, PREDICTIONS_SCHEMA, "prediction", |p: &Prediction| p.state.validate().map_err(|e| e.to_string()), report)
}

/// JSON-lines text with a schema header line.
pub fn to_jsonl<T: Serialize>(schema: &str, records: &[T]) -> Result<String, PipelineError> {
    let mut out = serde_json::to_string(&serde_json::json!({ "schema": schema }))?;
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}
