use serde::Serialize;

use super::StatsError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Binary classification summary. Averages are weighted by class support;
/// undefined ratios (no predictions or no support for a class) count as 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `[[tn, fp], [fn, tp]]`, rows ground truth, columns prediction.
    pub confusion: [[usize; 2]; 2],
    /// Index 0 is the negative class, 1 the positive class.
    pub per_class: [ClassMetrics; 2],
    pub n: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn classification_report(pred: &[bool], gt: &[bool]) -> Result<ClassificationReport, StatsError> {
    if pred.len() != gt.len() {
        return Err(StatsError::LengthMismatch(pred.len(), gt.len()));
    }
    if pred.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut confusion = [[0usize; 2]; 2];
    for (&p, &g) in pred.iter().zip(gt) {
        confusion[g as usize][p as usize] += 1;
    }
    let n = pred.len();
    let per_class = [0usize, 1].map(|c| {
        let tp = confusion[c][c];
        let predicted = confusion[0][c] + confusion[1][c];
        let support = confusion[c][0] + confusion[c][1];
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ClassMetrics {
            precision,
            recall,
            f1,
            support,
        }
    });
    let weighted = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / n as f64;
    Ok(ClassificationReport {
        accuracy: ratio(confusion[0][0] + confusion[1][1], n),
        precision: weighted(|m| m.precision),
        recall: weighted(|m| m.recall),
        f1: weighted(|m| m.f1),
        confusion,
        per_class,
        n,
    })
}
