use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::Raster;

pub const FOREGROUND: u8 = 255;
pub const BACKGROUND: u8 = 0;

/// Which side of the threshold counts as foreground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarity {
    /// Pixels below the threshold (dark object on a light belt).
    #[default]
    DarkForeground,
    /// Pixels at or above the threshold (e.g. edge responses).
    BrightForeground,
}

pub fn histogram(img: &Raster) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &v in img.data() {
        hist[v as usize] += 1;
    }
    hist
}

/// Between-class variance of the split `{v < t}` / `{v >= t}`.
pub fn between_class_variance(hist: &[u64; 256], t: usize) -> f64 {
    let (mut n0, mut s0, mut n1, mut s1) = (0u64, 0u64, 0u64, 0u64);
    for (v, &c) in hist.iter().enumerate() {
        if v < t {
            n0 += c;
            s0 += c * v as u64;
        } else {
            n1 += c;
            s1 += c * v as u64;
        }
    }
    if n0 == 0 || n1 == 0 {
        return 0.0;
    }
    let n = (n0 + n1) as f64;
    let (w0, w1) = (n0 as f64 / n, n1 as f64 / n);
    let (m0, m1) = (s0 as f64 / n0 as f64, s1 as f64 / n1 as f64);
    w0 * w1 * (m0 - m1) * (m0 - m1)
}

/// Otsu threshold `t` in `1..=255`; `None` for a single-level histogram.
///
/// Pixels `< t` form the dark class. When several thresholds tie for the
/// maximal variance (empty bins between the modes) the middle of the first
/// tied run is returned.
pub fn otsu_threshold(hist: &[u64; 256]) -> Option<u8> {
    let scores: Vec<f64> = (1..256).map(|t| between_class_variance(hist, t)).collect();
    let best = scores.iter().cloned().fold(0.0, f64::max);
    if best <= 0.0 {
        return None;
    }
    let first = scores.iter().position(|&s| s == best)?;
    let run = scores[first..].iter().take_while(|&&s| s == best).count();
    // scores[i] belongs to threshold i + 1
    Some((1 + first + (run - 1) / 2) as u8)
}

/// Otsu binarization with a dark foreground.
pub fn binarize(img: &Raster) -> Result<Raster> {
    binarize_with(img, Polarity::DarkForeground)
}

/// Otsu binarization; foreground pixels become 255, background 0. A
/// single-level image has no foreground.
pub fn binarize_with(img: &Raster, polarity: Polarity) -> Result<Raster> {
    img.require_gray("binarize")?;
    let data = match otsu_threshold(&histogram(img)) {
        None => vec![BACKGROUND; img.pixel_count()],
        Some(t) => img
            .data()
            .iter()
            .map(|&v| {
                let fg = match polarity {
                    Polarity::DarkForeground => v < t,
                    Polarity::BrightForeground => v >= t,
                };
                if fg {
                    FOREGROUND
                } else {
                    BACKGROUND
                }
            })
            .collect(),
    };
    Raster::gray(img.width(), img.height(), data)
}
