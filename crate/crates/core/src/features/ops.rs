use crate::alignment::Raster;

use super::{FeatureError, FeatureGrid};

/// Per-patch cosine similarities, values in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMap {
    height: usize,
    width: usize,
    patch_size: usize,
    values: Vec<f64>,
}

impl SimilarityMap {
    /// Values within 1e-6 of the range are clamped; anything further is an error.
    pub fn new(height: usize, width: usize, patch_size: usize, values: Vec<f64>) -> Result<Self, FeatureError> {
        if height == 0 || width == 0 {
            return Err(FeatureError::EmptyGrid {
                height,
                width,
                channels: 1,
            });
        }
        if patch_size == 0 {
            return Err(FeatureError::PatchSize);
        }
        if values.len() != height * width {
            return Err(FeatureError::DataLength {
                expected: height * width,
                found: values.len(),
            });
        }
        let mut values = values;
        for v in &mut values {
            if !(v.abs() <= 1.0 + 1e-6) {
                return Err(FeatureError::SimilarityRange(*v));
            }
            *v = v.clamp(-1.0, 1.0);
        }
        Ok(Self {
            height,
            width,
            patch_size,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

fn check_shapes(f0: &FeatureGrid, ft: &FeatureGrid) -> Result<(), FeatureError> {
    if f0.shape() != ft.shape() {
        return Err(FeatureError::ShapeMismatch(f0.shape(), ft.shape()));
    }
    if f0.patch_size() != ft.patch_size() {
        log::warn!("patch sizes differ ({} vs {}); using the reference's", f0.patch_size(), ft.patch_size());
    }
    Ok(())
}

/// Elementwise `ft − f0`.
pub fn feature_delta(f0: &FeatureGrid, ft: &FeatureGrid) -> Result<FeatureGrid, FeatureError> {
    check_shapes(f0, ft)?;
    let data = ft.data().iter().zip(f0.data()).map(|(t, r)| t - r).collect();
    let (h, w, c) = f0.shape();
    FeatureGrid::new(h, w, c, f0.patch_size(), data)
}

/// Cosine of two feature vectors accumulated in `f64`; 0 if either is zero.
fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    // Norms taken separately so that power-of-two rescaling commutes exactly.
    let c = dot / (na.sqrt() * nb.sqrt());
    c.clamp(-1.0, 1.0)
}

pub fn cosine_map(f0: &FeatureGrid, ft: &FeatureGrid) -> Result<SimilarityMap, FeatureError> {
    check_shapes(f0, ft)?;
    let values = (0..f0.height())
        .flat_map(|r| (0..f0.width()).map(move |c| (r, c)))
        .map(|(r, c)| cosine(f0.patch(r, c), ft.patch(r, c)))
        .collect();
    SimilarityMap::new(f0.height(), f0.width(), f0.patch_size(), values)
}

/// Channel stack `[ft − f0 | cos | ft | f0]` with `3C + 1` channels.
pub fn fuse_change_tensor(f0: &FeatureGrid, ft: &FeatureGrid) -> Result<FeatureGrid, FeatureError> {
    let delta = feature_delta(f0, ft)?;
    let cos = cosine_map(f0, ft)?;
    let (h, w, c) = f0.shape();
    let mut data = Vec::with_capacity(h * w * (3 * c + 1));
    for r in 0..h {
        for col in 0..w {
            data.extend_from_slice(delta.patch(r, col));
            data.push(cos.get(r, col) as f32);
            data.extend_from_slice(ft.patch(r, col));
            data.extend_from_slice(f0.patch(r, col));
        }
    }
    FeatureGrid::new(h, w, 3 * c + 1, f0.patch_size(), data)
}

/// Grayscale image of a similarity map: `−1 → 0` (black), `1 → 255` (white),
/// each patch upsampled to `patch_size × patch_size` pixels.
pub fn similarity_to_image(map: &SimilarityMap) -> Raster {
    let p = map.patch_size();
    Raster::from_fn(map.width() * p, map.height() * p, 1, |x, y, _| {
        ((map.get(y / p, x / p) + 1.0) * 127.5).round()
    })
}
