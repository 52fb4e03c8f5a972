//! RGB images with `f64` samples in [0, 1], stored H×W×C, plus 8-bit PNG I/O.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Image(format!("empty image {height}×{width}×{channels}")));
        }
        if data.len() != height * width * channels {
            return Err(Error::Image(format!(
                "{height}×{width}×{channels} image needs {} samples, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(Image { height, width, channels, data })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Image { height, width, channels, data: vec![0.0; height * width * channels] }
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.height, self.width, self.channels], self.data.clone()).expect("image dims are positive")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        match t.shape() {
            [h, w, c] => Image::new(*h, *w, *c, t.data().to_vec()),
            s => Err(Error::Image(format!("expected an H×W×C tensor, got {s:?}"))),
        }
    }

    pub fn clamp_unit(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// Rounds samples to the 8-bit grid, the same values a PNG round trip yields.
    pub fn quantized(&self) -> Image {
        Image {
            data: self.data.iter().map(|&v| f64::from(to_u8(v)) / 255.0).collect(),
            ..self.clone()
        }
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| to_u8(v)).collect()
    }

    pub fn to_rgba8(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.height * self.width * 4);
        for px in self.data.chunks_exact(self.channels) {
            for c in 0..3 {
                out.push(to_u8(px[c.min(self.channels - 1)]));
            }
            out.push(255);
        }
        out
    }
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes an 8-bit RGB PNG. `text` entries become tEXt chunks.
pub fn write_png(path: &Path, image: &Image, text: &[(&str, &str)]) -> Result<()> {
    if image.channels != 3 {
        return Err(Error::Image(format!("PNG output expects 3 channels, got {}", image.channels)));
    }
    let file = File::create(path)?;
    let mut buf = Vec::new();
    encode_png(&mut buf, image, text)?;
    let mut w = BufWriter::new(file);
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn encode_png<W: Write>(out: W, image: &Image, text: &[(&str, &str)]) -> Result<()> {
    let mut enc = png::Encoder::new(out, image.width as u32, image.height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    for (k, v) in text {
        enc.add_text_chunk(k.to_string(), v.to_string()).map_err(png_err)?;
    }
    let mut writer = enc.write_header().map_err(png_err)?;
    writer.write_image_data(&image.to_rgb8()).map_err(png_err)?;
    writer.finish().map_err(png_err)?;
    Ok(())
}

pub fn read_png(path: &Path) -> Result<Image> {
    let mut bytes = Vec::new();
    File::open(path)
        .map_err(|e| Error::Image(format!("cannot open {}: {e}", path.display())))?
        .read_to_end(&mut bytes)?;
    decode_png(&bytes).map_err(|e| Error::Image(format!("{}: {e}", path.display())))
}

pub fn decode_png(bytes: &[u8]) -> Result<Image> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(png_err)?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Image(format!("unsupported bit depth {:?}", info.bit_depth)));
    }
    let (h, w) = (info.height as usize, info.width as usize);
    let src = &buf[..info.buffer_size()];
    let data: Vec<f64> = match info.color_type {
        png::ColorType::Rgb => src.iter().map(|&b| f64::from(b) / 255.0).collect(),
        png::ColorType::Rgba => src
            .chunks_exact(4)
            .flat_map(|px| px[..3].iter().map(|&b| f64::from(b) / 255.0))
            .collect(),
        png::ColorType::Grayscale => src.iter().flat_map(|&b| [f64::from(b) / 255.0; 3]).collect(),
        other => return Err(Error::Image(format!("unsupported color type {other:?}"))),
    };
    Image::new(h, w, 3, data)
}

fn png_err(e: impl std::fmt::Display) -> Error {
    Error::Image(e.to_string())
}
