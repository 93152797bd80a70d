use serde::Serialize;

use super::io::{fmt6, fmt_opt, CsvTable, ReportDir};
use super::{partition, FrameFailure, Pipeline, PipelineError, ReportHeader, RunOutcome, SkippedLine};
use crate::hand_model::{Finger, HandPart};
use crate::occlusion::{dataset_occlusion_stats, visibility_report, DatasetOcclusionStats, VisibilityReport};

struct AuditRow {
    source: &'static str,
    fit_objective: Option<f64>,
    report: VisibilityReport,
}

#[derive(Serialize)]
struct AuditSummary<'a> {
    header: ReportHeader,
    frames_total: usize,
    frames_ok: usize,
    frames_failed: usize,
    occlusion: Option<DatasetOcclusionStats>,
    failures: &'a [FrameFailure],
    skipped_lines: &'a [SkippedLine],
}

fn finger_list(flags: &[bool; 5]) -> String {
    Finger::ALL
        .iter()
        .zip(flags)
        .filter(|(_, &on)| on)
        .map(|(f, _)| f.as_str())
        .collect::<Vec<_>>()
        .join(";")
}

impl Pipeline {
    /// Per-frame visibility audit: `audit_frames.csv` and `audit_summary.json`.
    pub fn run_audit(&self) -> Result<RunOutcome, PipelineError> {
        let thresholds = self.config().thresholds();
        let results = self.map_frames(|_, frame| -> Result<AuditRow, PipelineError> {
            let resolved = self.resolve_state(frame)?;
            let mesh = self.mesh(&resolved.state)?;
            let report = visibility_report(&mesh, &self.template, &self.rig, &self.config().raster, &thresholds)?;
            Ok(AuditRow {
                source: resolved.source.as_str(),
                fit_objective: resolved.fit_objective,
                report,
            })
        })?;
        let (ok, failures) = partition(&self.frames, results);

        let mut header: Vec<String> = ["frame_id", "subject_id", "gesture", "state_source", "fit_objective"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(HandPart::ALL.iter().map(|p| format!("vis_{}", p.as_str())));
        header.extend(["mean_finger_visibility", "occluded_fingers", "visible_fingers"].map(String::from));
        let mut table = CsvTable::new(&header);
        for (i, row) in &ok {
            let f = &self.frames[*i];
            let mut r = vec![
                f.frame_id.clone(),
                f.subject_id.clone(),
                f.gesture.clone(),
                row.source.to_string(),
                fmt_opt(row.fit_objective),
            ];
            r.extend(HandPart::ALL.iter().map(|&p| fmt6(row.report.per_part_visibility[p])));
            r.push(fmt6(row.report.mean_finger_visibility));
            r.push(finger_list(&row.report.fully_occluded));
            r.push(finger_list(&row.report.fully_visible));
            table.push(r);
        }

        let reports: Vec<VisibilityReport> = ok.into_iter().map(|(_, r)| r.report).collect();
        let occlusion = if reports.is_empty() {
            None
        } else {
            Some(dataset_occlusion_stats(&reports)?)
        };
        let mut dir = ReportDir::create(&self.output)?;
        dir.write_csv("audit_frames.csv", &table)?;
        dir.write_json(
            "audit_summary.json",
            &AuditSummary {
                header: self.header(),
                frames_total: self.frames.len(),
                frames_ok: reports.len(),
                frames_failed: failures.len(),
                occlusion,
                failures: &failures,
                skipped_lines: &self.ingest.skipped,
            },
        )?;
        let outcome = RunOutcome {
            frames_ok: reports.len(),
            frames_failed: failures.len(),
            files: dir.files(),
        };
        self.finish(&mut dir, "audit", outcome)
    }
}
