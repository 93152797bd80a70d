//! Dense multi-channel images and PGM/PPM I/O.

use nalgebra::Point2;
use std::path::Path;

use super::{AlignError, Homography};

/// Row-major `height × width × channels` image of `f64` samples. Pixel
/// `(x, y)` has its center at integer coordinates `(x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_fn(width: usize, height: usize, channels: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0 || self.channels == 0
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Bilinear sample at a sub-pixel position; 0 outside `[0, w−1] × [0, h−1]`.
    pub fn sample_bilinear(&self, x: f64, y: f64, c: usize) -> f64 {
        if self.is_empty() || !(x >= 0.0 && y >= 0.0 && x <= (self.width - 1) as f64 && y <= (self.height - 1) as f64) {
            return 0.0;
        }
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0, c) * (1.0 - fx) + self.get(x1, y0, c) * fx;
        let bottom = self.get(x0, y1, c) * (1.0 - fx) + self.get(x1, y1, c) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Reads a PGM (P2/P5) or PPM (P3/P6) file with 8- or 16-bit samples.
    pub fn read_pnm(path: impl AsRef<Path>) -> Result<Self, AlignError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| AlignError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_pnm(&bytes)
    }

    pub fn parse_pnm(bytes: &[u8]) -> Result<Self, AlignError> {
        let bad = |msg: &str| AlignError::Format(msg.to_string());
        if bytes.len() < 2 || bytes[0] != b'P' {
            return Err(bad("missing P magic number"));
        }
        let (channels, binary) = match bytes[1] {
            b'2' => (1, false),
            b'5' => (1, true),
            b'3' => (3, false),
            b'6' => (3, true),
            _ => return Err(bad("unsupported PNM variant")),
        };
        let mut pos = 2;
        let mut header = [0usize; 3];
        for field in header.iter_mut() {
            *field = next_token(bytes, &mut pos)
                .ok_or_else(|| bad("truncated header"))?
                .parse()
                .map_err(|_| bad("non-numeric header field"))?;
        }
        let [width, height, maxval] = header;
        if width == 0 || height == 0 {
            return Err(bad("zero image dimension"));
        }
        if !(1..=65535).contains(&maxval) {
            return Err(bad("maxval outside 1..=65535"));
        }
        let count = width * height * channels;
        let mut data = Vec::with_capacity(count);
        if binary {
            // Exactly one whitespace byte separates the header from the samples.
            pos += 1;
            let wide = maxval > 255;
            let need = count * if wide { 2 } else { 1 };
            let body = bytes.get(pos..pos + need).ok_or_else(|| bad("truncated pixel data"))?;
            if wide {
                data.extend(body.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]]) as f64));
            } else {
                data.extend(body.iter().map(|&b| b as f64));
            }
        } else {
            for _ in 0..count {
                let v: usize = next_token(bytes, &mut pos)
                    .ok_or_else(|| bad("truncated pixel data"))?
                    .parse()
                    .map_err(|_| bad("non-numeric sample"))?;
                data.push(v as f64);
            }
        }
        if data.iter().any(|&v| v > maxval as f64) {
            return Err(bad("sample exceeds maxval"));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Binary PGM (1 channel) or PPM (3 channels); samples are rounded and
    /// clamped to `[0, maxval]`, stored as 16-bit when `maxval > 255`.
    pub fn to_pnm_bytes(&self, maxval: u16) -> Result<Vec<u8>, AlignError> {
        let magic = match self.channels {
            1 => "P5",
            3 => "P6",
            c => return Err(AlignError::Format(format!("cannot store {c} channels as PNM"))),
        };
        if maxval == 0 {
            return Err(AlignError::Format("maxval must be positive".into()));
        }
        let mut out = format!("{magic}\n{} {}\n{maxval}\n", self.width, self.height).into_bytes();
        for &v in &self.data {
            let q = if v.is_nan() { 0.0 } else { v.round().clamp(0.0, maxval as f64) } as u16;
            if maxval > 255 {
                out.extend_from_slice(&q.to_be_bytes());
            } else {
                out.push(q as u8);
            }
        }
        Ok(out)
    }

    pub fn write_pnm(&self, path: impl AsRef<Path>, maxval: u16) -> Result<(), AlignError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_pnm_bytes(maxval)?).map_err(|source| AlignError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Next whitespace-delimited header token, skipping `#` comments.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a str> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| std::str::from_utf8(&bytes[start..*pos]).ok()).flatten()
}

/// Resamples `grid` into an `out_width × out_height` raster: each output pixel
/// is mapped back through `h⁻¹` (`h` takes grid coordinates to output
/// coordinates) and sampled bilinearly. Samples outside the grid are 0.
pub fn warp_grid(h: &Homography, grid: &Raster, out_width: usize, out_height: usize) -> Raster {
    let inv = h.inverse();
    let mut out = Raster::new(out_width, out_height, grid.channels);
    for y in 0..out_height {
        for x in 0..out_width {
            if let Some(src) = inv.apply(&Point2::new(x as f64, y as f64)) {
                for c in 0..grid.channels {
                    out.set(x, y, c, grid.sample_bilinear(src.x, src.y, c));
                }
            }
        }
    }
    out
}
