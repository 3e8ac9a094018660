use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Raster;
use crate::rng::Rng;

/// Counterclockwise quarter turns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum RotationAngle {
    Deg90,
    Deg180,
    Deg270,
}

impl RotationAngle {
    pub const ALL: [RotationAngle; 3] = [RotationAngle::Deg90, RotationAngle::Deg180, RotationAngle::Deg270];

    pub fn from_degrees(deg: u32) -> Result<Self> {
        match deg {
            90 => Ok(RotationAngle::Deg90),
            180 => Ok(RotationAngle::Deg180),
            270 => Ok(RotationAngle::Deg270),
            other => Err(Error::param(format!("rotation must be 90, 180 or 270 degrees, got {other}"))),
        }
    }

    pub fn degrees(self) -> u32 {
        match self {
            RotationAngle::Deg90 => 90,
            RotationAngle::Deg180 => 180,
            RotationAngle::Deg270 => 270,
        }
    }
}

impl TryFrom<u32> for RotationAngle {
    type Error = Error;
    fn try_from(deg: u32) -> Result<Self> {
        RotationAngle::from_degrees(deg)
    }
}

impl From<RotationAngle> for u32 {
    fn from(a: RotationAngle) -> u32 {
        a.degrees()
    }
}

/// Lossless counterclockwise rotation.
pub fn rotate(img: &Raster, angle: RotationAngle) -> Raster {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let (ow, oh) = match angle {
        RotationAngle::Deg180 => (w, h),
        _ => (h, w),
    };
    let mut out = vec![0u8; w * h * ch];
    for oy in 0..oh {
        for ox in 0..ow {
            let (sx, sy) = match angle {
                RotationAngle::Deg90 => (w - 1 - oy, ox),
                RotationAngle::Deg180 => (w - 1 - ox, h - 1 - oy),
                RotationAngle::Deg270 => (oy, h - 1 - ox),
            };
            for c in 0..ch {
                out[(oy * ow + ox) * ch + c] = img.get(sx, sy, c);
            }
        }
    }
    Raster::new(ow, oh, ch, out).expect("rotation preserves pixel count")
}

/// Upside-down flip (row order reversed).
pub fn flip_vertical(img: &Raster) -> Raster {
    let row = img.width() * img.channels();
    let data: Vec<u8> = img.data().chunks_exact(row).rev().flatten().copied().collect();
    Raster::new(img.width(), img.height(), img.channels(), data).expect("flip preserves shape")
}

/// Salt-and-pepper noise; see [`salt_pepper_counted`].
pub fn salt_pepper(img: &Raster, rate: f64, rng: &mut Rng) -> Result<Raster> {
    salt_pepper_counted(img, rate, rng).map(|(r, _)| r)
}

/// Each pixel is replaced with probability `rate` by black or white (equal
/// odds, all channels together). Returns the image and the replacement count.
pub fn salt_pepper_counted(img: &Raster, rate: f64, rng: &mut Rng) -> Result<(Raster, usize)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::param(format!("noise rate must be in [0, 1), got {rate}")));
    }
    let mut out = img.clone();
    let ch = img.channels();
    let mut replaced = 0;
    for px in out.data_mut().chunks_exact_mut(ch) {
        if rng.bernoulli(rate) {
            let v = if rng.bernoulli(0.5) { 255 } else { 0 };
            px.fill(v);
            replaced += 1;
        }
    }
    Ok((out, replaced))
}
