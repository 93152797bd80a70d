use super::io::{fmt6, CsvTable, ReportDir};
use super::{partition, to_jsonl, Pipeline, PipelineError, Prediction, RunOutcome, PREDICTIONS_SCHEMA};

impl Pipeline {
    /// Fits every frame that has keypoints or markers: `fits.jsonl` in the
    /// predictions format plus `fit_summary.csv`. Ground-truth states are
    /// ignored here and frames without fit targets are left out.
    pub fn run_fit(&self) -> Result<RunOutcome, PipelineError> {
        let results = self.map_frames(|_, frame| {
            if frame.fit_targets().is_none() {
                return Ok(None);
            }
            let mut f = frame.clone();
            f.gt_state = None;
            self.resolve_state(&f).map(Some)
        })?;
        let (ok, failures) = partition(&self.frames, results);
        let ok: Vec<_> = ok.into_iter().filter_map(|(i, r)| r.map(|r| (i, r))).collect();

        let mut table = CsvTable::new(&["frame_id", "subject_id", "target", "objective", "iterations", "converged"]);
        let mut preds = Vec::with_capacity(ok.len());
        for (i, r) in &ok {
            let f = &self.frames[*i];
            let target = if f.keypoints3d.is_some() { "keypoints" } else { "markers" };
            table.push(vec![
                f.frame_id.clone(),
                f.subject_id.clone(),
                target.into(),
                r.fit_objective.map(fmt6).unwrap_or_default(),
                r.fit_iterations.map(|n| n.to_string()).unwrap_or_default(),
                r.converged.map(|c| c.to_string()).unwrap_or_default(),
            ]);
            preds.push(Prediction {
                frame_id: f.frame_id.clone(),
                state: r.state.clone(),
            });
        }
        let mut dir = ReportDir::create(&self.output)?;
        dir.write_bytes("fits.jsonl", to_jsonl(PREDICTIONS_SCHEMA, &preds)?.as_bytes())?;
        dir.write_csv("fit_summary.csv", &table)?;
        if !failures.is_empty() {
            dir.write_json("fit_failures.json", &failures)?;
        }
        let outcome = RunOutcome {
            frames_ok: ok.len(),
            frames_failed: failures.len(),
            files: dir.files(),
        };
        self.finish(&mut dir, "fit", outcome)
    }
}
