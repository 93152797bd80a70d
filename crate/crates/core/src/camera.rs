//! Pinhole camera: world → camera → pixel.
//!
//! Camera space has +z pointing into the scene. No lens distortion is
//! modelled; distortion coefficients in a calibration file are read and
//! ignored with a warning.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

use crate::geometry::is_rotation;

pub const CALIBRATION_FORMAT: &str = "dorsalkit.calibration/1";

/// Points at or behind this depth (meters) do not project.
pub const Z_NEAR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("cannot read calibration {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("calibration parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported calibration format {0:?}")]
    Format(String),
    #[error("extrinsic rotation is not orthonormal with determinant +1")]
    NotARotation,
    #[error("focal lengths must be positive (fx={fx}, fy={fy})")]
    Focal { fx: f64, fy: f64 },
    #[error("image size must be positive")]
    ImageSize,
    #[error("non-finite calibration value")]
    NonFinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CameraRig {
    intrinsics: Intrinsics,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    width: u32,
    height: u32,
}

/// Pixel position of a projected point; `valid` is false when the point is
/// not in front of the camera.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub pixel: Vector2<f64>,
    pub valid: bool,
}

impl CameraRig {
    pub fn new(
        intrinsics: Intrinsics,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        width: u32,
        height: u32,
    ) -> Result<Self, CameraError> {
        let Intrinsics { fx, fy, cx, cy } = intrinsics;
        if ![fx, fy, cx, cy].iter().all(|x| x.is_finite())
            || !rotation.iter().all(|x| x.is_finite())
            || !translation.iter().all(|x| x.is_finite())
        {
            return Err(CameraError::NonFinite);
        }
        if !(fx > 0.0 && fy > 0.0) {
            return Err(CameraError::Focal { fx, fy });
        }
        if width == 0 || height == 0 {
            return Err(CameraError::ImageSize);
        }
        if !is_rotation(&rotation, 1e-9) {
            return Err(CameraError::NotARotation);
        }
        Ok(CameraRig {
            intrinsics,
            rotation,
            translation,
            width,
            height,
        })
    }

    /// Camera at the world origin looking down +z.
    pub fn identity(intrinsics: Intrinsics, width: u32, height: u32) -> Result<Self, CameraError> {
        Self::new(intrinsics, Matrix3::identity(), Vector3::zeros(), width, height)
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        &self.intrinsics
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn image_size(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn project_point(&self, p: &Vector3<f64>) -> Projection {
        if p.z <= Z_NEAR {
            return Projection {
                pixel: Vector2::new(f64::NAN, f64::NAN),
                valid: false,
            };
        }
        let k = &self.intrinsics;
        Projection {
            pixel: Vector2::new(k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy),
            valid: true,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CameraError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CameraError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_data(serde_json::from_str(&text)?)
    }

    pub fn from_data(data: CalibrationData) -> Result<Self, CameraError> {
        if data.schema != CALIBRATION_FORMAT {
            return Err(CameraError::Format(data.schema));
        }
        if data.distortion.iter().any(|&d| d != 0.0) {
            log::warn!("calibration has distortion coefficients; they are ignored (pinhole projection)");
        }
        let r = data.extrinsics.rotation;
        Self::new(
            data.intrinsics,
            Matrix3::from_fn(|i, j| r[i][j]),
            Vector3::from(data.extrinsics.translation),
            data.image_size.width,
            data.image_size.height,
        )
    }

    pub fn to_data(&self) -> CalibrationData {
        CalibrationData {
            schema: CALIBRATION_FORMAT.to_string(),
            intrinsics: self.intrinsics,
            extrinsics: Extrinsics {
                rotation: std::array::from_fn(|i| std::array::from_fn(|j| self.rotation[(i, j)])),
                translation: [self.translation.x, self.translation.y, self.translation.z],
            },
            image_size: ImageSize {
                width: self.width,
                height: self.height,
            },
            distortion: Vec::new(),
        }
    }
}

/// Maps world points into camera space: `p ↦ R p + t`.
pub fn world_to_camera(rig: &CameraRig, points: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    points.iter().map(|p| rig.to_camera(p)).collect()
}

/// Pinhole projection of camera-space points.
pub fn project(rig: &CameraRig, points_cam: &[Vector3<f64>]) -> Vec<Projection> {
    points_cam.iter().map(|p| rig.project_point(p)).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CalibrationData {
    pub schema: String,
    pub intrinsics: Intrinsics,
    pub extrinsics: Extrinsics,
    pub image_size: ImageSize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub distortion: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Extrinsics {
    /// Row-major world → camera rotation.
    pub rotation: [[f64; 3]; 3],
    /// Meters.
    pub translation: [f64; 3],
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}
