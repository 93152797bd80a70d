use serde::{Deserialize, Serialize};

use super::StatsError;

/// Fraction of the trial's maximum force a reading must exceed to count as a click.
pub const CLICK_THRESHOLD: f64 = 0.20;

/// Force-sensor readings for one trial, aligned to video frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForceTrace {
    pub timestamps: Vec<f64>,
    pub readings: Vec<f64>,
}

impl ForceTrace {
    pub fn new(timestamps: Vec<f64>, readings: Vec<f64>) -> Result<Self, StatsError> {
        if timestamps.len() != readings.len() {
            return Err(StatsError::LengthMismatch(timestamps.len(), readings.len()));
        }
        Ok(Self { timestamps, readings })
    }

    /// Trace with frame indices as timestamps.
    pub fn from_readings(readings: Vec<f64>) -> Self {
        Self {
            timestamps: (0..readings.len()).map(|i| i as f64).collect(),
            readings,
        }
    }

    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }

    pub fn trial_max(&self) -> f64 {
        self.readings.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A run of frames sharing one label, `start..=end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickSegment {
    pub start: usize,
    pub end: usize,
    pub click: bool,
    /// First frame of the highest reading inside a click segment.
    pub peak: Option<usize>,
}

impl ClickSegment {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Per-frame labels plus the ordered segments covering the whole trace,
/// alternating between click and non-click runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClickLabels {
    pub frames: Vec<bool>,
    pub segments: Vec<ClickSegment>,
    pub trial_max: f64,
}

impl ClickLabels {
    pub fn clicks(&self) -> impl Iterator<Item = &ClickSegment> {
        self.segments.iter().filter(|s| s.click)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClickConfig {
    pub threshold: f64,
    /// Above-threshold runs shorter than this are not clicks.
    pub min_len: usize,
}

impl Default for ClickConfig {
    fn default() -> Self {
        Self {
            threshold: CLICK_THRESHOLD,
            min_len: 1,
        }
    }
}

pub fn label_clicks(trace: &ForceTrace) -> Result<ClickLabels, StatsError> {
    label_clicks_with(trace, &ClickConfig::default())
}

/// Labels frames whose max-normalized reading exceeds the threshold.
///
/// Each contiguous above-threshold run is one click; its peak is the first
/// frame attaining the run's maximum, so a plateau counts once. A trace with
/// no positive reading has no clicks.
pub fn label_clicks_with(trace: &ForceTrace, cfg: &ClickConfig) -> Result<ClickLabels, StatsError> {
    if trace.is_empty() {
        return Err(StatsError::Empty);
    }
    if trace.readings.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = trace.len();
    let trial_max = trace.trial_max();
    let mut frames = vec![false; n];
    if trial_max > 0.0 {
        let mut i = 0;
        while i < n {
            if trace.readings[i] / trial_max > cfg.threshold {
                let start = i;
                while i < n && trace.readings[i] / trial_max > cfg.threshold {
                    i += 1;
                }
                if i - start >= cfg.min_len.max(1) {
                    frames[start..i].fill(true);
                }
            } else {
                i += 1;
            }
        }
    } else {
        log::warn!("force trace has no positive reading; no clicks labeled");
    }

    let mut segments = Vec::new();
    let mut start = 0;
    for i in 1..=n {
        if i == n || frames[i] != frames[start] {
            let click = frames[start];
            let peak = click.then(|| {
                (start..i).fold(start, |best, j| if trace.readings[j] > trace.readings[best] { j } else { best })
            });
            segments.push(ClickSegment {
                start,
                end: i - 1,
                click,
                peak,
            });
            start = i;
        }
    }
    Ok(ClickLabels {
        frames,
        segments,
        trial_max,
    })
}

/// How a segment with equally many positive and negative frame predictions is
/// resolved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    Positive,
    Negative,
}

/// Majority frame prediction inside each segment.
pub fn per_click_majority(
    frame_preds: &[bool],
    segments: &[ClickSegment],
    tie: TieBreak,
) -> Result<Vec<bool>, StatsError> {
    if segments.is_empty() {
        return Err(StatsError::Empty);
    }
    let needed = segments.iter().map(|s| s.end + 1).max().unwrap_or(0);
    if frame_preds.len() < needed {
        return Err(StatsError::LengthMismatch(frame_preds.len(), needed));
    }
    Ok(segments
        .iter()
        .map(|s| {
            let positive = frame_preds[s.start..=s.end].iter().filter(|&&p| p).count();
            let negative = s.len() - positive;
            match positive.cmp(&negative) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => tie == TieBreak::Positive,
            }
        })
        .collect())
}
