use serde::Serialize;
use std::path::{Path, PathBuf};

use super::io::{fmt6, CsvTable, ReportDir};
use super::{PipelineError, ReportHeader, RunConfig, RunOutcome};
use crate::stats::{
    classification_report, label_clicks_with, per_click_majority, ClassificationReport, ClickConfig, ForceTrace,
    TieBreak,
};

/// Force trace CSV with `timestamp_s` and `reading` columns, plus optional
/// per-frame predictions (a `prediction` column of 0/1 or true/false).
#[derive(Clone, Debug)]
pub struct ClickInputs {
    pub trace: PathBuf,
    pub predictions: Option<PathBuf>,
    pub config: ClickConfig,
    pub tie: TieBreak,
}

#[derive(Serialize)]
struct ClickReport {
    header: ReportHeader,
    config: ClickConfig,
    tie_break: TieBreak,
    frames: usize,
    clicks: usize,
    trial_max: f64,
    frame_level: Option<ClassificationReport>,
    per_click: Option<ClassificationReport>,
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize, PipelineError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| PipelineError::Config(format!("{}: no {name} column", path.display())))
}

fn read_trace(path: &Path) -> Result<ForceTrace, PipelineError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let (ti, ri) = (column(&headers, "timestamp_s", path)?, column(&headers, "reading", path)?);
    let mut ts = Vec::new();
    let mut rs = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| {
            rec[i].trim().parse::<f64>().map_err(|e| {
                PipelineError::Config(format!("{} record {}: {e}", path.display(), line + 1))
            })
        };
        ts.push(parse(ti)?);
        rs.push(parse(ri)?);
    }
    Ok(ForceTrace::new(ts, rs)?)
}

fn read_frame_predictions(path: &Path) -> Result<Vec<bool>, PipelineError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let pi = column(&rdr.headers()?.clone(), "prediction", path)?;
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        out.push(match rec[pi].trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(PipelineError::Config(format!(
                    "{} record {}: prediction {other:?} is not 0/1",
                    path.display(),
                    line + 1
                )))
            }
        });
    }
    Ok(out)
}

/// Labels clicks in a force trace and, given predictions, scores them per
/// frame and per click (majority vote inside each segment).
pub fn run_clicks(inputs: &ClickInputs, out: &Path) -> Result<RunOutcome, PipelineError> {
    let trace = read_trace(&inputs.trace)?;
    let labels = label_clicks_with(&trace, &inputs.config)?;
    let preds = inputs.predictions.as_deref().map(read_frame_predictions).transpose()?;
    if let Some(p) = &preds {
        if p.len() != trace.len() {
            return Err(PipelineError::Config(format!(
                "{} predictions for {} trace samples",
                p.len(),
                trace.len()
            )));
        }
    }

    let mut frames = CsvTable::new(&["frame", "timestamp_s", "reading", "normalized", "click", "prediction"]);
    for i in 0..trace.len() {
        let norm = if labels.trial_max > 0.0 { trace.readings[i] / labels.trial_max } else { 0.0 };
        frames.push(vec![
            i.to_string(),
            fmt6(trace.timestamps[i]),
            fmt6(trace.readings[i]),
            fmt6(norm),
            u8::from(labels.frames[i]).to_string(),
            preds.as_ref().map(|p| u8::from(p[i]).to_string()).unwrap_or_default(),
        ]);
    }

    let majority = preds
        .as_ref()
        .map(|p| per_click_majority(p, &labels.segments, inputs.tie))
        .transpose()?;
    let mut segs = CsvTable::new(&["segment", "start", "end", "click", "peak", "predicted"]);
    for (k, s) in labels.segments.iter().enumerate() {
        segs.push(vec![
            k.to_string(),
            s.start.to_string(),
            s.end.to_string(),
            u8::from(s.click).to_string(),
            s.peak.map(|p| p.to_string()).unwrap_or_default(),
            majority.as_ref().map(|m| u8::from(m[k]).to_string()).unwrap_or_default(),
        ]);
    }

    let seg_truth: Vec<bool> = labels.segments.iter().map(|s| s.click).collect();
    let report = ClickReport {
        header: ReportHeader::new(&RunConfig::default()),
        config: inputs.config,
        tie_break: inputs.tie,
        frames: trace.len(),
        clicks: labels.clicks().count(),
        trial_max: labels.trial_max,
        frame_level: preds.as_ref().map(|p| classification_report(p, &labels.frames)).transpose()?,
        per_click: majority.as_ref().map(|m| classification_report(m, &seg_truth)).transpose()?,
    };

    let mut dir = ReportDir::create(out)?;
    dir.write_csv("click_frames.csv", &frames)?;
    dir.write_csv("click_segments.csv", &segs)?;
    dir.write_json("click_report.json", &report)?;
    Ok(RunOutcome {
        frames_ok: trace.len(),
        frames_failed: 0,
        files: dir.files(),
    })
}
