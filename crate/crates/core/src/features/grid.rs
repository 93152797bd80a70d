use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

use super::{FeatureError, DEFAULT_PATCH_SIZE};

pub const FGRID_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSource {
    Reference,
    Target,
    #[default]
    Derived,
}

/// `height × width × channels` patch features, row-major `(row, col, channel)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureGrid {
    height: usize,
    width: usize,
    channels: usize,
    patch_size: usize,
    pub source: GridSource,
    data: Vec<f32>,
}

impl FeatureGrid {
    pub fn new(height: usize, width: usize, channels: usize, patch_size: usize, data: Vec<f32>) -> Result<Self, FeatureError> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(FeatureError::EmptyGrid { height, width, channels });
        }
        if patch_size == 0 {
            return Err(FeatureError::PatchSize);
        }
        let expected = height * width * channels;
        if data.len() != expected {
            return Err(FeatureError::DataLength {
                expected,
                found: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite(i));
        }
        Ok(Self {
            height,
            width,
            channels,
            patch_size,
            source: GridSource::Derived,
            data,
        })
    }

    /// Grid covering a square crop of `crop_size` pixels with the default patch.
    pub fn for_crop(crop_size: usize, channels: usize, data: Vec<f32>) -> Result<Self, FeatureError> {
        let side = crop_size / DEFAULT_PATCH_SIZE;
        Self::new(side, side, channels, DEFAULT_PATCH_SIZE, data)
    }

    pub fn with_source(mut self, source: GridSource) -> Self {
        self.source = source;
        self
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Feature vector of the patch at `(row, col)`.
    pub fn patch(&self, row: usize, col: usize) -> &[f32] {
        let start = (row * self.width + col) * self.channels;
        &self.data[start..start + self.channels]
    }

    pub fn write_fgrid<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "FGRID {FGRID_VERSION} {} {} {} {}",
            self.height, self.width, self.channels, self.patch_size
        )?;
        let mut bytes = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes)
    }

    pub fn to_fgrid_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_fgrid(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_fgrid<R: BufRead>(mut r: R) -> Result<Self, FeatureError> {
        let bad = |msg: String| FeatureError::Format(msg);
        let mut header = String::new();
        r.read_line(&mut header).map_err(|e| bad(e.to_string()))?;
        let line = header.strip_suffix('\n').ok_or_else(|| bad("header line not terminated".into()))?;
        let fields: Vec<&str> = line.split(' ').collect();
        if fields.len() != 6 || fields[0] != "FGRID" {
            return Err(bad(format!("bad header {line:?}")));
        }
        let nums: Vec<usize> = fields[1..]
            .iter()
            .map(|f| f.parse().map_err(|_| bad(format!("bad header field {f:?}"))))
            .collect::<Result<_, _>>()?;
        if nums[0] != FGRID_VERSION as usize {
            return Err(bad(format!("unsupported FGRID version {}", nums[0])));
        }
        let (h, w, c, patch) = (nums[1], nums[2], nums[3], nums[4]);
        let count = h
            .checked_mul(w)
            .and_then(|v| v.checked_mul(c))
            .ok_or_else(|| bad("grid size overflows".into()))?;
        let mut body = Vec::new();
        r.read_to_end(&mut body).map_err(|e| bad(e.to_string()))?;
        if body.len() != count * 4 {
            return Err(bad(format!("expected {} payload bytes, found {}", count * 4, body.len())));
        }
        let data = body
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        Self::new(h, w, c, patch, data)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FeatureError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| FeatureError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read_fgrid(std::io::BufReader::new(file))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FeatureError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_fgrid_bytes()).map_err(|source| FeatureError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}
