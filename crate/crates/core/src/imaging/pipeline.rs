use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::binarize::{binarize_with, Polarity};
use super::filter::{gaussian_smooth, to_grayscale};
use super::locate::{locate_target_with_margin, DEFAULT_MARGIN};
use super::resize::crop_resize;
use super::sobel::{sobel_with, SobelOptions};
use super::{BoundingBox, Raster};

/// Which plane is thresholded before the scanline search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinarizeSource {
    /// Rescaled edge magnitude; strong edges are foreground.
    #[default]
    Magnitude,
    /// Smoothed intensity, foreground side chosen by `polarity`.
    Intensity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentConfig {
    pub sigma: f64,
    pub min_run_fraction: f64,
    pub margin: usize,
    pub side: usize,
    pub sobel: SobelOptions,
    pub binarize_on: BinarizeSource,
    pub polarity: Polarity,
    /// Keep every intermediate raster in the result.
    pub debug: bool,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            sigma: 1.0,
            min_run_fraction: 0.01,
            margin: DEFAULT_MARGIN,
            side: 188,
            sobel: SobelOptions::default(),
            binarize_on: BinarizeSource::Magnitude,
            polarity: Polarity::DarkForeground,
            debug: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Intermediates {
    pub smoothed: Raster,
    pub gray: Raster,
    pub magnitude: Raster,
    pub binary: Raster,
}

#[derive(Debug, Clone)]
pub struct Segmentation {
    /// `side x side`, single channel.
    pub output: Raster,
    pub bbox: BoundingBox,
    pub intermediates: Option<Intermediates>,
}

/// smooth -> grayscale -> Sobel -> Otsu -> scanline locate -> crop/resize.
///
/// The crop is taken from the grayscale of the *unsmoothed* input; the blur
/// only conditions the edge map.
pub fn segment_pipeline(img: &Raster, cfg: &SegmentConfig) -> Result<Segmentation> {
    let smoothed = gaussian_smooth(img, cfg.sigma)?;
    let smoothed_gray = to_grayscale(&smoothed)?;
    let field = sobel_with(&smoothed_gray, cfg.sobel)?;
    let magnitude = field.magnitude_raster()?;
    let binary = match cfg.binarize_on {
        BinarizeSource::Magnitude => binarize_with(&magnitude, Polarity::BrightForeground)?,
        BinarizeSource::Intensity => binarize_with(&smoothed_gray, cfg.polarity)?,
    };
    let bbox = locate_target_with_margin(&binary, cfg.min_run_fraction, cfg.margin)?;
    let gray = to_grayscale(img)?;
    let output = crop_resize(&gray, &bbox, cfg.side)?;
    let intermediates = cfg.debug.then(|| Intermediates { smoothed, gray, magnitude, binary });
    Ok(Segmentation { output, bbox, intermediates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn ellipse_frame(w: usize, h: usize, cx: f64, cy: f64, a: f64, b: f64) -> (Raster, BoundingBox) {
        let mut data = vec![0u8; w * h * 3];
        let (mut x0, mut y0, mut x1, mut y1) = (w, h, 0, 0);
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = ((x as f64 - cx) / a, (y as f64 - cy) / b);
                let inside = dx * dx + dy * dy <= 1.0;
                let px = if inside { [40, 110, 35] } else { [245, 245, 242] };
                data[(y * w + x) * 3..(y * w + x) * 3 + 3].copy_from_slice(&px);
                if inside {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        (Raster::new(w, h, 3, data).unwrap(), BoundingBox { x0, y0, x1, y1 })
    }

    #[test]
    fn ellipse_on_white_canvas() {
        let (img, truth) = ellipse_frame(400, 300, 190.0, 160.0, 120.0, 85.0);
        let seg = segment_pipeline(&img, &SegmentConfig::default()).unwrap();
        assert!(seg.bbox.iou(&truth) >= 0.9, "iou {}", seg.bbox.iou(&truth));
        assert_eq!((seg.output.width(), seg.output.height(), seg.output.channels()), (188, 188, 1));
    }

    #[test]
    fn blank_frame_is_empty_target() {
        let img = Raster::filled(120, 90, 3, 255).unwrap();
        assert!(matches!(segment_pipeline(&img, &SegmentConfig::default()), Err(Error::EmptyTarget)));
    }

    #[test]
    fn deterministic_and_debug_artifacts() {
        let (img, _) = ellipse_frame(200, 150, 100.0, 70.0, 60.0, 40.0);
        let cfg = SegmentConfig { debug: true, ..Default::default() };
        let a = segment_pipeline(&img, &cfg).unwrap();
        let b = segment_pipeline(&img, &cfg).unwrap();
        assert_eq!(a.output, b.output);
        let inter = a.intermediates.unwrap();
        assert_eq!(inter.binary.width(), 200);
        assert!(inter.binary.data().iter().all(|&v| v == 0 || v == 255));
    }

    #[test]
    fn intensity_mode_finds_dark_leaf() {
        let (img, truth) = ellipse_frame(200, 150, 100.0, 70.0, 60.0, 40.0);
        let cfg = SegmentConfig { binarize_on: BinarizeSource::Intensity, ..Default::default() };
        let seg = segment_pipeline(&img, &cfg).unwrap();
        assert!(seg.bbox.iou(&truth) >= 0.9);
    }
}
