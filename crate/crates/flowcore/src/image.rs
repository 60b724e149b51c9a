use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::{FlowError, Result};

/// Luma weights used whenever color content is reduced to grayscale.
pub(crate) const LUMA_WEIGHTS: [f32; 3] = [0.299, 0.587, 0.114];

/// A raster of intensities in `[0,1]`, row-major with interleaved channels.
///
/// Channels are 1 (gray) or 3 (RGB). 8-bit sources are divided by 255 on
/// ingest; 16-bit PGM/PPM sources by 65535.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    /// Build an image from raw intensities, validating the type invariants.
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(FlowError::InvalidImage("empty image".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(FlowError::InvalidImage(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(FlowError::InvalidImage(format!(
                "data length {} does not match {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(FlowError::InvalidImage(format!(
                "intensity {} at index {i} outside [0,1]",
                data[i]
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// All-zero image.
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self::new(width, height, channels, vec![0.0; width * height * channels])
            .expect("zeros is always valid for nonzero dims")
    }

    /// Fill from a generator called per `(x, y, channel)`; values are clamped to `[0,1]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c).clamp(0.0, 1.0));
                }
            }
        }
        Self::new(width, height, channels, data).expect("from_fn clamps into range")
    }

    /// Ingest 8-bit samples, dividing by 255.
    pub fn from_u8(width: usize, height: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        let data = bytes.iter().map(|&b| b as f32 / 255.0).collect();
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Grayscale view: identity for single-channel images, luma reduction for RGB.
    pub fn to_luma(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let mut data = Vec::with_capacity(self.width * self.height);
        for px in self.data.chunks_exact(3) {
            let v = px[0] * LUMA_WEIGHTS[0] + px[1] * LUMA_WEIGHTS[1] + px[2] * LUMA_WEIGHTS[2];
            data.push(v.clamp(0.0, 1.0));
        }
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Axis-aligned crop. The window must lie inside the image.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Image> {
        if width == 0 || height == 0 || x0 + width > self.width || y0 + height > self.height {
            return Err(FlowError::DimensionMismatch(format!(
                "crop {width}x{height}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(width * height * self.channels);
        for y in y0..y0 + height {
            let row = &self.data[(y * self.width + x0) * self.channels..][..width * self.channels];
            data.extend_from_slice(row);
        }
        Ok(Image {
            width,
            height,
            channels: self.channels,
            data,
        })
    }

    /// Load an image by extension: `.png`, `.pgm`, or `.ppm`.
    pub fn load(path: impl AsRef<Path>) -> Result<Image> {
        let path = path.as_ref();
        match extension(path).as_deref() {
            Some("png") => load_png(path),
            Some("pgm") | Some("ppm") => load_pnm(path),
            other => Err(FlowError::UnsupportedImage(format!(
                "unknown extension {other:?} for {}",
                path.display()
            ))),
        }
    }

    /// Save by extension: `.png` (8-bit), `.pgm`/`.ppm` (16-bit binary).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        match extension(path).as_deref() {
            Some("png") => save_png(self, path),
            Some("pgm") | Some("ppm") => save_pnm(self, path),
            other => Err(FlowError::UnsupportedImage(format!(
                "unknown extension {other:?} for {}",
                path.display()
            ))),
        }
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension().map(|e| e.to_string_lossy().to_lowercase())
}

fn load_png(path: &Path) -> Result<Image> {
    let decoder = png::Decoder::new(BufReader::new(File::open(path)?));
    let mut reader = decoder.read_info()?;
    let mut buf = vec![0u8; reader.output_buffer_size().expect("png buffer size")];
    let info = reader.next_frame(&mut buf)?;
    buf.truncate(info.buffer_size());
    if info.bit_depth != png::BitDepth::Eight {
        return Err(FlowError::UnsupportedImage(format!(
            "only 8-bit PNG supported, got {:?} in {}",
            info.bit_depth,
            path.display()
        )));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    // Alpha is dropped on ingest; palette is not supported.
    let (channels, stride) = match info.color_type {
        png::ColorType::Grayscale => (1, 1),
        png::ColorType::GrayscaleAlpha => (1, 2),
        png::ColorType::Rgb => (3, 3),
        png::ColorType::Rgba => (3, 4),
        other => {
            return Err(FlowError::UnsupportedImage(format!(
                "PNG color type {other:?} in {}",
                path.display()
            )))
        }
    };
    let mut data = Vec::with_capacity(w * h * channels);
    for px in buf.chunks_exact(stride) {
        for &v in &px[..channels] {
            data.push(v as f32 / 255.0);
        }
    }
    Image::new(w, h, channels, data)
}

fn save_png(img: &Image, path: &Path) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    let mut encoder = png::Encoder::new(file, img.width as u32, img.height as u32);
    encoder.set_color(match img.channels {
        1 => png::ColorType::Grayscale,
        _ => png::ColorType::Rgb,
    });
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header()?;
    let bytes: Vec<u8> = img
        .data
        .iter()
        .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    writer.write_image_data(&bytes)?;
    Ok(())
}

/// Binary PGM (P5) and PPM (P6) with 8- or 16-bit samples. 16-bit output is
/// used for quantization-free test fixtures.
fn load_pnm(path: &Path) -> Result<Image> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    let err = |msg: &str| FlowError::UnsupportedImage(format!("{msg} in {}", path.display()));

    fn next_token(bytes: &[u8], pos: &mut usize) -> Option<String> {
        let mut i = *pos;
        loop {
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            break;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        *pos = i;
        (start < i).then(|| String::from_utf8_lossy(&bytes[start..i]).into_owned())
    }

    let mut pos = 0usize;
    let read_token = |pos: &mut usize| -> Result<String> {
        next_token(&bytes, pos).ok_or_else(|| err("truncated header"))
    };

    let magic = read_token(&mut pos)?;
    let channels = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        _ => return Err(err("expected P5/P6 magic")),
    };
    let width: usize = read_token(&mut pos)?.parse().map_err(|_| err("bad width"))?;
    let height: usize = read_token(&mut pos)?.parse().map_err(|_| err("bad height"))?;
    let maxval: usize = read_token(&mut pos)?.parse().map_err(|_| err("bad maxval"))?;
    pos += 1; // single whitespace byte after maxval

    let n = width * height * channels;
    let data: Vec<f32> = if maxval < 256 {
        let raw = bytes.get(pos..pos + n).ok_or_else(|| err("truncated payload"))?;
        raw.iter().map(|&b| b as f32 / maxval as f32).collect()
    } else {
        let raw = bytes
            .get(pos..pos + 2 * n)
            .ok_or_else(|| err("truncated payload"))?;
        raw.chunks_exact(2)
            .map(|p| u16::from_be_bytes([p[0], p[1]]) as f32 / maxval as f32)
            .collect()
    };
    Image::new(width, height, channels, data)
}

fn save_pnm(img: &Image, path: &Path) -> Result<()> {
    let magic = if img.channels == 1 { "P5" } else { "P6" };
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "{magic}\n{} {}\n65535\n", img.width, img.height)?;
    for v in &img.data {
        let q = (v * 65535.0).round().clamp(0.0, 65535.0) as u16;
        out.write_all(&q.to_be_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_out_of_range() {
        assert!(Image::new(2, 2, 1, vec![0.0, 0.5, 1.0, 1.5]).is_err());
        assert!(Image::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(Image::new(2, 2, 2, vec![0.0; 8]).is_err());
        assert!(Image::new(0, 2, 1, vec![]).is_err());
    }

    #[test]
    fn luma_matches_weights() {
        let img = Image::new(1, 1, 3, vec![0.2, 0.4, 0.8]).unwrap();
        let l = img.to_luma();
        let expect = 0.2 * 0.299 + 0.4 * 0.587 + 0.8 * 0.114;
        assert!((l.get(0, 0, 0) - expect).abs() < 1e-6);
    }

    #[test]
    fn crop_extracts_window() {
        let img = Image::from_fn(4, 4, 1, |x, y, _| (x + 4 * y) as f32 / 16.0);
        let c = img.crop(1, 2, 2, 2).unwrap();
        assert_eq!(c.get(0, 0, 0), img.get(1, 2, 0));
        assert_eq!(c.get(1, 1, 0), img.get(2, 3, 0));
        assert!(img.crop(3, 3, 2, 2).is_err());
    }

    #[test]
    fn pnm_round_trip_is_lossless_after_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::from_fn(5, 3, 3, |x, y, c| (x + y + c) as f32 * 17.0 / 65535.0 );
        let path = dir.path().join("t.ppm");
        img.save(&path).unwrap();
        let back = Image::load(&path).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn png_round_trip_8bit() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::from_fn(7, 4, 1, |x, y, _| ((x * 13 + y * 31) % 256) as f32 / 255.0);
        let path = dir.path().join("t.png");
        img.save(&path).unwrap();
        let back = Image::load(&path).unwrap();
        assert_eq!(img, back);
    }
}
