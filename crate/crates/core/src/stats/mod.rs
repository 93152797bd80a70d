//! Statistics used in the analyses: regression, one-way ANOVA, percentile
//! summaries, force-trace click labeling and binary classification metrics.

mod anova;
mod classification;
mod clicks;
mod percentile;
mod regression;

pub use anova::{one_way_anova, AnovaResult};
pub use classification::{classification_report, ClassMetrics, ClassificationReport};
pub use clicks::{
    label_clicks, label_clicks_with, per_click_majority, ClickConfig, ClickLabels, ClickSegment, ForceTrace,
    TieBreak, CLICK_THRESHOLD,
};
pub use percentile::{percentile, percentile_summary, PercentileSummary};
pub use regression::{linear_regression, RegressionFit};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("empty input")]
    Empty,
    #[error("need at least {required} samples, got {found}")]
    TooFew { required: usize, found: usize },
    #[error("x values are constant")]
    ConstantX,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("degenerate degrees of freedom: {0}")]
    DegreesOfFreedom(String),
    #[error("non-finite value in input")]
    NonFinite,
}

/// Arithmetic mean; `None` for an empty slice.
pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Sample standard deviation (n − 1 denominator); 0 for fewer than two values.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values).unwrap();
    let ss: f64 = values.iter().map(|v| (v - m).powi(2)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Root mean square of a residual series.
pub fn rms(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt())
}
