use serde::Serialize;
use std::path::Path;

use super::io::{fmt6, CsvTable, ReportDir};
use super::{PipelineError, ReportHeader, RunConfig, RunOutcome};
use crate::features::{cosine_map, feature_delta, fuse_change_tensor, similarity_to_image, FeatureGrid, GridSource};
use crate::stats::{percentile_summary, PercentileSummary};

#[derive(Serialize)]
struct DeltaSummary {
    header: ReportHeader,
    reference: String,
    target: String,
    grid: [usize; 3],
    grid_patch_size: usize,
    fused_channels: usize,
    mean_similarity: f64,
    similarity: PercentileSummary,
    /// L2 norm of the per-patch delta vector.
    delta_norm: PercentileSummary,
}

/// Delta stream between a reference and a target feature grid: `delta.fgrid`,
/// `fused.fgrid`, a similarity image and per-patch CSV.
pub fn run_delta(reference: &Path, target: &Path, out: &Path) -> Result<RunOutcome, PipelineError> {
    let f0 = FeatureGrid::load(reference)?.with_source(GridSource::Reference);
    let ft = FeatureGrid::load(target)?.with_source(GridSource::Target);
    let delta = feature_delta(&f0, &ft)?;
    let cos = cosine_map(&f0, &ft)?;
    let fused = fuse_change_tensor(&f0, &ft)?;

    let mut table = CsvTable::new(&["row", "col", "cosine", "delta_norm"]);
    let mut norms = Vec::with_capacity(cos.values().len());
    for r in 0..delta.height() {
        for c in 0..delta.width() {
            let n = delta.patch(r, c).iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
            norms.push(n);
            table.push(vec![r.to_string(), c.to_string(), fmt6(cos.get(r, c)), fmt6(n)]);
        }
    }
    let (h, w, ch) = f0.shape();
    let summary = DeltaSummary {
        header: ReportHeader::new(&RunConfig::default()),
        reference: reference.display().to_string(),
        target: target.display().to_string(),
        grid: [h, w, ch],
        grid_patch_size: f0.patch_size(),
        fused_channels: fused.channels(),
        mean_similarity: cos.mean(),
        similarity: percentile_summary(cos.values())?,
        delta_norm: percentile_summary(&norms)?,
    };

    let mut dir = ReportDir::create(out)?;
    dir.write_bytes("delta.fgrid", &delta.to_fgrid_bytes())?;
    dir.write_bytes("fused.fgrid", &fused.to_fgrid_bytes())?;
    dir.write_bytes("similarity.pgm", &similarity_to_image(&cos).to_pnm_bytes(255)?)?;
    dir.write_csv("similarity.csv", &table)?;
    dir.write_json("delta_summary.json", &summary)?;
    Ok(RunOutcome {
        frames_ok: 1,
        frames_failed: 0,
        files: dir.files(),
    })
}
