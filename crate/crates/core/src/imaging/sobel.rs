use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::filter::mirror;
use super::Raster;

/// How the gradient magnitude plane is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MagnitudeMode {
    /// `sqrt(gx² + gy²)`.
    #[default]
    Euclidean,
    /// `|gx| + |gy|`, the square-root-free approximation.
    L1,
    /// `|gx|` only: responds to vertical edges.
    VerticalOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrientationMode {
    /// `atan2(gy, gx)`.
    #[default]
    Conventional,
    /// `atan2(gx, gy)`, the transposed form.
    Transposed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SobelOptions {
    pub magnitude: MagnitudeMode,
    pub orientation: OrientationMode,
}

/// Per-pixel gradient planes, each `width * height`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub orientation: Vec<f64>,
}

/// Largest possible Euclidean magnitude on 8-bit input.
pub const MAX_EUCLIDEAN_MAGNITUDE: f64 = 1020.0 * std::f64::consts::SQRT_2;

pub fn sobel(img: &Raster) -> Result<GradientField> {
    sobel_with(img, SobelOptions::default())
}

/// 3x3 Sobel gradients with mirrored borders.
///
/// `gx` uses `[-1 0 1; -2 0 2; -1 0 1]` (positive for intensity rising to the
/// right), `gy` its transpose (positive for intensity rising downwards).
pub fn sobel_with(img: &Raster, opts: SobelOptions) -> Result<GradientField> {
    img.require_gray("sobel")?;
    let (w, h) = (img.width(), img.height());
    let px = |x: isize, y: isize| img.get(mirror(x, w), mirror(y, h), 0) as f64;
    let n = w * h;
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    let mut magnitude = vec![0.0; n];
    let mut orientation = vec![0.0; n];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (a, b, c) = (px(x - 1, y - 1), px(x, y - 1), px(x + 1, y - 1));
            let (d, f) = (px(x - 1, y), px(x + 1, y));
            let (g, hh, i) = (px(x - 1, y + 1), px(x, y + 1), px(x + 1, y + 1));
            let sx = (c + 2.0 * f + i) - (a + 2.0 * d + g);
            let sy = (g + 2.0 * hh + i) - (a + 2.0 * b + c);
            let k = y as usize * w + x as usize;
            gx[k] = sx;
            gy[k] = sy;
            magnitude[k] = match opts.magnitude {
                MagnitudeMode::Euclidean => (sx * sx + sy * sy).sqrt(),
                MagnitudeMode::L1 => sx.abs() + sy.abs(),
                MagnitudeMode::VerticalOnly => sx.abs(),
            };
            let theta = match opts.orientation {
                OrientationMode::Conventional => sy.atan2(sx),
                OrientationMode::Transposed => sx.atan2(sy),
            };
            // atan2 can return -pi for signed zeros; fold it into (-pi, pi].
            orientation[k] = if theta <= -std::f64::consts::PI { std::f64::consts::PI } else { theta };
        }
    }
    Ok(GradientField { width: w, height: h, gx, gy, magnitude, orientation })
}

impl GradientField {
    /// Magnitude rescaled so the strongest response maps to 255.
    /// An all-zero field maps to an all-zero raster.
    pub fn magnitude_raster(&self) -> Result<Raster> {
        let max = self.magnitude.iter().cloned().fold(0.0, f64::max);
        let data = if max > 0.0 {
            self.magnitude.iter().map(|&m| super::filter::to_u8(m * 255.0 / max)).collect()
        } else {
            vec![0; self.magnitude.len()]
        };
        Raster::gray(self.width, self.height, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::rng::Rng;
    use std::f64::consts::PI;

    fn random_gray(rng: &mut Rng, w: usize, h: usize) -> Raster {
        Raster::gray(w, h, (0..w * h).map(|_| rng.below(256) as u8).collect()).unwrap()
    }

    #[test]
    fn constant_image_has_no_gradient() {
        let f = sobel(&Raster::filled(8, 5, 1, 99).unwrap()).unwrap();
        assert!(f.gx.iter().chain(&f.gy).chain(&f.magnitude).all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_step_edge() {
        let (w, h) = (10, 6);
        let data = (0..w * h).map(|k| if k % w >= 5 { 255 } else { 0 }).collect();
        let f = sobel(&Raster::gray(w, h, data).unwrap()).unwrap();
        for y in 0..h {
            for x in [4, 5] {
                assert_eq!(f.gx[y * w + x], 1020.0);
                assert_eq!(f.gy[y * w + x], 0.0);
                assert_eq!(f.magnitude[y * w + x], 1020.0);
            }
            assert_eq!(f.gx[y * w + 2], 0.0);
        }
    }

    #[test]
    fn multichannel_rejected() {
        let img = Raster::filled(3, 3, 3, 0).unwrap();
        assert!(matches!(sobel(&img), Err(Error::Contract(_))));
    }

    #[test]
    fn magnitude_modes_relation() {
        let mut rng = Rng::new(4);
        for _ in 0..10 {
            let img = random_gray(&mut rng, 17, 13);
            let exact = sobel(&img).unwrap();
            let approx = sobel_with(&img, SobelOptions { magnitude: MagnitudeMode::L1, ..Default::default() }).unwrap();
            for k in 0..exact.magnitude.len() {
                let (gx, gy) = (exact.gx[k], exact.gy[k]);
                assert!((exact.magnitude[k] - (gx * gx + gy * gy).sqrt()).abs() <= 1e-12);
                assert!(exact.magnitude[k] >= 0.0);
                let (m, a) = (exact.magnitude[k], approx.magnitude[k]);
                assert!(a >= m);
                if m > 0.0 {
                    assert!(a / m <= std::f64::consts::SQRT_2 + 1e-12);
                }
                if gx == 0.0 || gy == 0.0 {
                    assert_eq!(a, m);
                } else {
                    assert!(a > m);
                }
                assert!(exact.orientation[k] > -PI && exact.orientation[k] <= PI);
            }
        }
    }

    #[test]
    fn orientation_variants() {
        // Horizontal ramp: gx > 0, gy = 0.
        let data = (0..25).map(|k| (k % 5 * 40) as u8).collect();
        let img = Raster::gray(5, 5, data).unwrap();
        let conv = sobel(&img).unwrap();
        let trans =
            sobel_with(&img, SobelOptions { orientation: OrientationMode::Transposed, ..Default::default() }).unwrap();
        assert_eq!(conv.orientation[12], 0.0);
        assert!((trans.orientation[12] - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn vertical_only_ignores_horizontal_edges() {
        let data = (0..36).map(|k| if k / 6 >= 3 { 200 } else { 0 }).collect();
        let img = Raster::gray(6, 6, data).unwrap();
        let f =
            sobel_with(&img, SobelOptions { magnitude: MagnitudeMode::VerticalOnly, ..Default::default() }).unwrap();
        assert!(f.magnitude.iter().all(|&m| m == 0.0));
    }
}
