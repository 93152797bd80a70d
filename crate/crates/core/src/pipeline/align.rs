use nalgebra::Point2;
use serde::Serialize;

use super::io::{file_stem, fmt6, CsvTable, ReportDir};
use super::{partition, FrameFailure, Pipeline, PipelineError, ReportHeader, RunOutcome};
use crate::alignment::{crop_transform, dorsal_crop, estimate_homography, symmetric_transfer_error, Raster, RansacConfig};
use crate::hand_model::NUM_KEYPOINTS;

struct AlignRow {
    inliers: usize,
    iterations: usize,
    mean_transfer_px: f64,
    homography: [f64; 9],
    crop_file: Option<String>,
    crop_bytes: Option<Vec<u8>>,
}

#[derive(Serialize)]
struct AlignSummary<'a> {
    header: ReportHeader,
    reference_frame: &'a str,
    ransac: RansacConfig,
    keypoints: &'a [usize],
    frames_total: usize,
    frames_aligned: usize,
    frames_failed: usize,
    crops_written: usize,
    failures: &'a [FrameFailure],
}

impl Pipeline {
    /// Image-plane keypoints of a frame under the calibrated camera.
    pub fn project_keypoints(&self, frame: &super::FrameAnnotation) -> Result<[Point2<f64>; NUM_KEYPOINTS], PipelineError> {
        let state = self.resolve_state(frame)?;
        let kp = self.keypoints_of(&state.state)?;
        let mut out = [Point2::origin(); NUM_KEYPOINTS];
        for (o, p) in out.iter_mut().zip(&kp) {
            let proj = self.rig.project_point(&self.rig.to_camera(p));
            if !proj.valid {
                return Err(PipelineError::Config(format!("frame {}: keypoint behind the camera", frame.frame_id)));
            }
            *o = Point2::from(proj.pixel);
        }
        Ok(out)
    }

    /// Homography from the reference frame's dorsal keypoints to each frame's,
    /// plus dorsal crops of frames that carry an image.
    pub fn run_align(&self, reference: Option<&str>) -> Result<RunOutcome, PipelineError> {
        let ref_frame = match reference {
            Some(id) => self
                .frames
                .iter()
                .find(|f| f.frame_id == id)
                .ok_or_else(|| PipelineError::Config(format!("reference frame {id} not found")))?,
            None => self.frames.first().ok_or(PipelineError::NoFrames)?,
        };
        let crop_cfg = &self.config().crop;
        let pick = |kp: &[Point2<f64>]| -> Vec<Point2<f64>> { crop_cfg.keypoints.iter().map(|&k| kp[k]).collect() };
        let ref_pts = pick(&self.project_keypoints(ref_frame)?);

        let results = self.map_frames(|i, frame| -> Result<AlignRow, PipelineError> {
            let kp = self.project_keypoints(frame)?;
            let pts = pick(&kp);
            let cfg = RansacConfig {
                seed: self.manifest.seed.wrapping_add(i as u64),
                ..self.config().ransac
            };
            let r = estimate_homography(&ref_pts, &pts, &cfg)?;
            let inv = r.homography.inverse();
            let errs: Vec<f64> = ref_pts
                .iter()
                .zip(&pts)
                .zip(&r.inliers)
                .filter(|(_, &m)| m)
                .map(|((s, d), _)| symmetric_transfer_error(&r.homography, &inv, s, d))
                .collect();
            let mean_transfer_px = crate::stats::mean(&errs).unwrap_or(f64::NAN);
            let m = r.homography.matrix();
            let (crop_file, crop_bytes) = match &frame.image {
                Some(path) => {
                    let img = Raster::read_pnm(path)?;
                    let crop = dorsal_crop(&kp, &img, crop_cfg)?;
                    let maxval = if crop.raster.data.iter().any(|&v| v > 255.5) { u16::MAX } else { 255 };
                    let ext = if crop.raster.channels == 3 { "ppm" } else { "pgm" };
                    (
                        Some(format!("crops/{}.{ext}", file_stem(&frame.frame_id))),
                        Some(crop.raster.to_pnm_bytes(maxval)?),
                    )
                }
                None => {
                    crop_transform(&kp, crop_cfg)?;
                    (None, None)
                }
            };
            Ok(AlignRow {
                inliers: r.inlier_count,
                iterations: r.iterations,
                mean_transfer_px,
                homography: std::array::from_fn(|k| m[(k / 3, k % 3)] / m[(2, 2)]),
                crop_file,
                crop_bytes,
            })
        })?;
        let (ok, failures) = partition(&self.frames, results);

        let mut header: Vec<String> = ["frame_id", "inliers", "points", "iterations", "mean_transfer_px"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend((0..9).map(|k| format!("h{}{}", k / 3, k % 3)));
        header.push("crop".into());
        let mut table = CsvTable::new(&header);
        let mut dir = ReportDir::create(&self.output)?;
        let mut crops = 0;
        for (i, row) in &ok {
            let mut r = vec![
                self.frames[*i].frame_id.clone(),
                row.inliers.to_string(),
                crop_cfg.keypoints.len().to_string(),
                row.iterations.to_string(),
                fmt6(row.mean_transfer_px),
            ];
            r.extend(row.homography.iter().map(|&v| fmt6(v)));
            r.push(row.crop_file.clone().unwrap_or_default());
            table.push(r);
            if let (Some(name), Some(bytes)) = (&row.crop_file, &row.crop_bytes) {
                dir.write_bytes(name, bytes)?;
                crops += 1;
            }
        }
        dir.write_csv("align_frames.csv", &table)?;
        dir.write_json(
            "align_summary.json",
            &AlignSummary {
                header: self.header(),
                reference_frame: &ref_frame.frame_id,
                ransac: self.config().ransac,
                keypoints: &crop_cfg.keypoints,
                frames_total: self.frames.len(),
                frames_aligned: ok.len(),
                frames_failed: failures.len(),
                crops_written: crops,
                failures: &failures,
            },
        )?;
        let outcome = RunOutcome {
            frames_ok: ok.len(),
            frames_failed: failures.len(),
            files: dir.files(),
        };
        self.finish(&mut dir, "align", outcome)
    }
}
