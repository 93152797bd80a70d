use serde::Serialize;

use super::StatsError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PercentileSummary {
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub max: f64,
    pub n: usize,
}

/// Linear-interpolation percentile (sample quantile type 7) of sorted data.
fn sorted_percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile `q ∈ [0, 1]` with linear interpolation between order statistics.
pub fn percentile(values: &[f64], q: f64) -> Result<f64, StatsError> {
    let sorted = sorted_copy(values)?;
    Ok(sorted_percentile(&sorted, q.clamp(0.0, 1.0)))
}

fn sorted_copy(values: &[f64]) -> Result<Vec<f64>, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted)
}

pub fn percentile_summary(values: &[f64]) -> Result<PercentileSummary, StatsError> {
    let s = sorted_copy(values)?;
    Ok(PercentileSummary {
        min: s[0],
        p25: sorted_percentile(&s, 0.25),
        median: sorted_percentile(&s, 0.5),
        p75: sorted_percentile(&s, 0.75),
        max: s[s.len() - 1],
        n: s.len(),
    })
}
