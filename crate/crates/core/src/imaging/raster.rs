use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 8-bit image, row-major, channel-interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::shape(format!("raster {width}x{height} has a zero side")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::shape(format!("raster needs 1 or 3 channels, got {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::shape(format!(
                "raster {width}x{height}x{channels} needs {} bytes, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(Raster { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn gray(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 1, data)
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

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub(crate) fn require_gray(&self, op: &str) -> Result<()> {
        if self.channels != 1 {
            return Err(Error::contract(format!("{op} needs a single-channel raster, got {} channels", self.channels)));
        }
        Ok(())
    }

    /// Decode a PNG or JPEG file. Gray sources stay single-channel, everything
    /// else becomes RGB.
    pub fn load(path: &Path) -> Result<Self> {
        let img =
            image::open(path).map_err(|e| Error::Ingestion { path: path.to_path_buf(), reason: e.to_string() })?;
        let raster = match img.color().channel_count() {
            1 | 2 => {
                let g = img.into_luma8();
                let (w, h) = g.dimensions();
                Raster::new(w as usize, h as usize, 1, g.into_raw())?
            }
            _ => {
                let rgb = img.into_rgb8();
                let (w, h) = rgb.dimensions();
                Raster::new(w as usize, h as usize, 3, rgb.into_raw())?
            }
        };
        Ok(raster)
    }

    /// Write as PNG.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let color = if self.channels == 1 { image::ExtendedColorType::L8 } else { image::ExtendedColorType::Rgb8 };
        image::save_buffer_with_format(
            path,
            &self.data,
            self.width as u32,
            self.height as u32,
            color,
            image::ImageFormat::Png,
        )?;
        Ok(())
    }
}

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BoundingBox {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Result<Self> {
        if x0 > x1 || y0 > y1 {
            return Err(Error::contract(format!("inverted box ({x0},{y0})-({x1},{y1})")));
        }
        Ok(BoundingBox { x0, y0, x1, y1 })
    }

    pub fn full(raster: &Raster) -> Self {
        BoundingBox { x0: 0, y0: 0, x1: raster.width() - 1, y1: raster.height() - 1 }
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.x0 <= self.x1 && self.y0 <= self.y1 && self.x1 < width && self.y1 < height
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let ix0 = self.x0.max(other.x0);
        let iy0 = self.y0.max(other.y0);
        let ix1 = self.x1.min(other.x1);
        let iy1 = self.y1.min(other.y1);
        if ix0 > ix1 || iy0 > iy1 {
            return 0.0;
        }
        let inter = ((ix1 - ix0 + 1) * (iy1 - iy0 + 1)) as f64;
        inter / ((self.area() + other.area()) as f64 - inter)
    }
}
