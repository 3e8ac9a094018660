use crate::error::{Error, Result};

use super::filter::to_u8;
use super::{BoundingBox, Raster};

/// Crop `bbox` out of `img` and resample it bilinearly to `side x side`.
///
/// Sample centres are aligned: output pixel `d` reads source coordinate
/// `(d + 0.5) * scale - 0.5`, clamped to the crop.
pub fn crop_resize(img: &Raster, bbox: &BoundingBox, side: usize) -> Result<Raster> {
    if side == 0 {
        return Err(Error::param("output side must be >= 1"));
    }
    if !bbox.fits(img.width(), img.height()) {
        return Err(Error::contract(format!("box {bbox:?} outside {}x{} raster", img.width(), img.height())));
    }
    let (cw, ch) = (bbox.width(), bbox.height());
    let channels = img.channels();
    let sx = cw as f64 / side as f64;
    let sy = ch as f64 / side as f64;
    let sample = |d: usize, scale: f64, extent: usize| {
        let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (extent - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(extent - 1);
        (i0, i1, s - i0 as f64)
    };
    let mut out = Vec::with_capacity(side * side * channels);
    for dy in 0..side {
        let (y0, y1, fy) = sample(dy, sy, ch);
        for dx in 0..side {
            let (x0, x1, fx) = sample(dx, sx, cw);
            for c in 0..channels {
                let p = |x: usize, y: usize| img.get(bbox.x0 + x, bbox.y0 + y, c) as f64;
                let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                out.push(to_u8(top * (1.0 - fy) + bottom * fy));
            }
        }
    }
    Raster::new(side, side, channels, out)
}
