use serde::Serialize;
use std::collections::BTreeMap;

use super::io::{fmt6, fmt_opt, CsvTable, ReportDir};
use super::{
    partition, read_predictions, FrameFailure, IngestReport, Pipeline, PipelineError, ReportHeader, RunOutcome,
    SkippedLine,
};
use crate::hand_model::NUM_POSE_JOINTS;
use crate::metrics::{mean_sd_across_groups, GroupedMeanSd, MetricReport, MpjaeMode, PosePair};
use crate::occlusion::visibility_report;
use crate::stats::{linear_regression, one_way_anova, AnovaResult, RegressionFit};

struct EvalRow {
    metrics: MetricReport,
    mean_finger_visibility: f64,
    occluded_fingers: usize,
}

#[derive(Serialize)]
struct SubsetSummary {
    subset: &'static str,
    mpjae_deg: Option<GroupedMeanSd>,
    pa_mpjpe_mm: Option<GroupedMeanSd>,
}

#[derive(Serialize)]
struct Outcome<T: Serialize> {
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl<T: Serialize, E: std::fmt::Display> From<Result<T, E>> for Outcome<T> {
    fn from(r: Result<T, E>) -> Self {
        match r {
            Ok(v) => Outcome {
                result: Some(v),
                error: None,
            },
            Err(e) => Outcome {
                result: None,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Serialize)]
struct SkinToneAnova {
    levels: Vec<u8>,
    #[serde(flatten)]
    anova: Outcome<AnovaResult>,
}

#[derive(Serialize)]
struct EvalSummary<'a> {
    header: ReportHeader,
    mpjae_mode: MpjaeMode,
    frames_total: usize,
    frames_evaluated: usize,
    frames_failed: usize,
    overall: Vec<SubsetSummary>,
    /// MPJAE (degrees) against mean finger visibility.
    visibility_regression: Outcome<RegressionFit>,
    skin_tone_anova: SkinToneAnova,
    frames_without_ground_truth: Vec<String>,
    frames_without_prediction: Vec<String>,
    predictions_without_frame: Vec<String>,
    duplicate_predictions: Vec<String>,
    failures: &'a [FrameFailure],
    skipped_lines: Vec<SkippedLine>,
}

fn subset_stats<'a>(name: &'static str, rows: impl Iterator<Item = (&'a str, &'a EvalRow)> + Clone) -> SubsetSummary {
    SubsetSummary {
        subset: name,
        mpjae_deg: mean_sd_across_groups(rows.clone().map(|(s, r)| (s, r.metrics.mpjae_deg))),
        pa_mpjpe_mm: mean_sd_across_groups(rows.filter_map(|(s, r)| r.metrics.pa_mpjpe_mm.map(|v| (s, v)))),
    }
}

fn stat_cells(g: Option<GroupedMeanSd>) -> [String; 2] {
    match g {
        Some(g) => [fmt6(g.mean), fmt6(g.sd)],
        None => [String::new(), String::new()],
    }
}

impl Pipeline {
    /// Joins predictions to annotated ground truth by `frame_id` and reports
    /// per-frame, per-subset, per-gesture and per-joint errors.
    pub fn run_eval(&self) -> Result<RunOutcome, PipelineError> {
        let path = self
            .predictions
            .as_ref()
            .ok_or_else(|| PipelineError::Config("eval needs a predictions file".into()))?;
        if !path.is_file() {
            return Err(PipelineError::MissingInput(path.display().to_string()));
        }
        let mut pred_ingest = IngestReport::default();
        let predictions = read_predictions(path, &mut pred_ingest)?;
        let mut by_id = BTreeMap::new();
        let mut duplicates = Vec::new();
        for p in &predictions {
            if by_id.insert(p.frame_id.as_str(), &p.state).is_some() {
                log::warn!("duplicate prediction for frame {}; using the last one", p.frame_id);
                duplicates.push(p.frame_id.clone());
            }
        }

        let thresholds = self.config().thresholds();
        let results = self.map_frames(|_, frame| -> Option<Result<EvalRow, PipelineError>> {
            let gt = frame.gt_state.as_ref()?;
            let pred = by_id.get(frame.frame_id.as_str())?;
            Some((|| {
                let gt_mesh = self.mesh(gt)?;
                let pair = PosePair::new((*pred).clone(), gt.clone())
                    .with_keypoints(self.keypoints_of(pred)?, crate::hand_model::keypoints(&gt_mesh));
                let metrics = MetricReport::evaluate(&pair, MpjaeMode::Geodesic)?;
                let vis = visibility_report(&gt_mesh, &self.template, &self.rig, &self.config().raster, &thresholds)?;
                Ok(EvalRow {
                    metrics,
                    mean_finger_visibility: vis.mean_finger_visibility,
                    occluded_fingers: vis.occluded_finger_count(),
                })
            })())
        })?;

        let mut no_gt = Vec::new();
        let mut no_pred = Vec::new();
        let mut matched = Vec::new();
        let mut matched_frames = Vec::new();
        for (frame, r) in self.frames.iter().zip(results) {
            match r {
                Some(r) => {
                    matched.push(r);
                    matched_frames.push(frame.clone());
                }
                None if frame.gt_state.is_none() => no_gt.push(frame.frame_id.clone()),
                None => no_pred.push(frame.frame_id.clone()),
            }
        }
        let known: std::collections::BTreeSet<&str> = self.frames.iter().map(|f| f.frame_id.as_str()).collect();
        let orphans: Vec<String> = by_id.keys().filter(|k| !known.contains(*k)).map(|k| k.to_string()).collect();
        let (ok, failures) = partition(&matched_frames, matched);
        let rows: Vec<(&super::FrameAnnotation, &EvalRow)> = ok.iter().map(|(i, r)| (&matched_frames[*i], r)).collect();

        let mut frames_csv = CsvTable::new(&[
            "frame_id",
            "subject_id",
            "gesture",
            "skin_tone_level",
            "mean_finger_visibility",
            "occluded_fingers",
            "mpjae_deg",
            "pa_mpjpe_mm",
            "loss",
        ]);
        let mut scatter = CsvTable::new(&["frame_id", "mean_finger_visibility", "mpjae_deg"]);
        for (f, r) in &rows {
            frames_csv.push(vec![
                f.frame_id.clone(),
                f.subject_id.clone(),
                f.gesture.clone(),
                f.skin_tone_level.map(|l| l.to_string()).unwrap_or_default(),
                fmt6(r.mean_finger_visibility),
                r.occluded_fingers.to_string(),
                fmt6(r.metrics.mpjae_deg),
                fmt_opt(r.metrics.pa_mpjpe_mm),
                fmt_opt(r.metrics.loss),
            ]);
            scatter.push(vec![f.frame_id.clone(), fmt6(r.mean_finger_visibility), fmt6(r.metrics.mpjae_deg)]);
        }

        let all = rows.iter().map(|(f, r)| (f.subject_id.as_str(), *r));
        let low_max = self.config().low_visibility_max;
        let low = all.clone().filter(|(_, r)| r.mean_finger_visibility <= low_max);
        let overall = vec![
            subset_stats("all", all.clone()),
            subset_stats("low_visibility", low.clone()),
        ];
        let subset_counts = [rows.len(), low.count()];
        let stat_header = [
            "frames",
            "subjects",
            "mpjae_mean_deg",
            "mpjae_sd_deg",
            "pa_mpjpe_mean_mm",
            "pa_mpjpe_sd_mm",
        ];
        let mut overall_csv = CsvTable::new(&[&["subset"][..], &stat_header[..]].concat());
        for (s, n) in overall.iter().zip(subset_counts) {
            let mut r = vec![s.subset.to_string(), n.to_string(), s.mpjae_deg.map_or(0, |g| g.groups).to_string()];
            r.extend(stat_cells(s.mpjae_deg));
            r.extend(stat_cells(s.pa_mpjpe_mm));
            overall_csv.push(r);
        }

        let mut gestures: BTreeMap<&str, Vec<(&str, &EvalRow)>> = BTreeMap::new();
        for (f, r) in &rows {
            gestures.entry(f.gesture.as_str()).or_default().push((f.subject_id.as_str(), r));
        }
        let mut gesture_csv = CsvTable::new(&[&["gesture"][..], &stat_header[..]].concat());
        for (g, members) in &gestures {
            let s = subset_stats("gesture", members.iter().copied());
            let mut r = vec![
                g.to_string(),
                members.len().to_string(),
                s.mpjae_deg.map_or(0, |m| m.groups).to_string(),
            ];
            r.extend(stat_cells(s.mpjae_deg));
            r.extend(stat_cells(s.pa_mpjpe_mm));
            gesture_csv.push(r);
        }

        let mut joint_csv = CsvTable::new(&["joint", "name", "mpjae_mean_deg", "mpjae_sd_deg"]);
        for j in 0..NUM_POSE_JOINTS {
            let v: Vec<f64> = rows.iter().map(|(_, r)| r.metrics.mpjae_per_joint_deg[j]).collect();
            let (m, sd) = match crate::stats::mean(&v) {
                Some(m) => (fmt6(m), fmt6(crate::stats::sample_sd(&v))),
                None => (String::new(), String::new()),
            };
            joint_csv.push(vec![(j + 1).to_string(), self.template.joint_name(j + 1), m, sd]);
        }

        let xs: Vec<f64> = rows.iter().map(|(_, r)| r.mean_finger_visibility).collect();
        let ys: Vec<f64> = rows.iter().map(|(_, r)| r.metrics.mpjae_deg).collect();
        let mut tones: BTreeMap<u8, Vec<f64>> = BTreeMap::new();
        for (f, r) in &rows {
            if let Some(l) = f.skin_tone_level {
                tones.entry(l).or_default().push(r.metrics.mpjae_deg);
            }
        }
        let tone_groups: Vec<&Vec<f64>> = tones.values().collect();
        let summary = EvalSummary {
            header: self.header(),
            mpjae_mode: MpjaeMode::Geodesic,
            frames_total: self.frames.len(),
            frames_evaluated: rows.len(),
            frames_failed: failures.len(),
            overall,
            visibility_regression: linear_regression(&xs, &ys).into(),
            skin_tone_anova: SkinToneAnova {
                levels: tones.keys().copied().collect(),
                anova: one_way_anova(&tone_groups.iter().map(|g| g.as_slice()).collect::<Vec<_>>()).into(),
            },
            frames_without_ground_truth: no_gt,
            frames_without_prediction: no_pred,
            predictions_without_frame: orphans,
            duplicate_predictions: duplicates,
            failures: &failures,
            skipped_lines: pred_ingest.skipped,
        };

        let mut dir = ReportDir::create(&self.output)?;
        dir.write_csv("eval_frames.csv", &frames_csv)?;
        dir.write_csv("eval_overall.csv", &overall_csv)?;
        dir.write_csv("eval_per_gesture.csv", &gesture_csv)?;
        dir.write_csv("eval_per_joint.csv", &joint_csv)?;
        dir.write_csv("eval_scatter.csv", &scatter)?;
        dir.write_json("eval_summary.json", &summary)?;
        let outcome = RunOutcome {
            frames_ok: rows.len(),
            frames_failed: failures.len(),
            files: dir.files(),
        };
        self.finish(&mut dir, "eval", outcome)
    }
}
