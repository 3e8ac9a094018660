use crate::error::{Error, Result};

use super::Raster;

/// Mirror-reflect an index into `0..n` without repeating the edge sample
/// (`-1 -> 1`, `n -> n - 2`).
#[inline]
pub(crate) fn mirror(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= n as isize {
        m = period - m;
    }
    m as usize
}

/// Normalized 1-D Gaussian taps for offsets `-radius..=radius`.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::param(format!("sigma must be > 0, got {sigma}")));
    }
    let r = radius as isize;
    let mut taps: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    Ok(taps)
}

/// Gaussian blur with the default radius `ceil(3 sigma)`.
pub fn gaussian_smooth(img: &Raster, sigma: f64) -> Result<Raster> {
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    gaussian_smooth_with_radius(img, sigma, radius)
}

/// Separable Gaussian blur, mirrored borders, applied per channel.
pub fn gaussian_smooth_with_radius(img: &Raster, sigma: f64, radius: usize) -> Result<Raster> {
    let taps = gaussian_kernel(sigma, radius)?;
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let r = radius as isize;
    let src = img.data();

    let mut horiz = vec![0.0f64; w * h * ch];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for (t, &k) in taps.iter().enumerate() {
                    let sx = mirror(x as isize + t as isize - r, w);
                    acc += k * src[(y * w + sx) * ch + c] as f64;
                }
                horiz[(y * w + x) * ch + c] = acc;
            }
        }
    }

    let mut out = vec![0u8; w * h * ch];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for (t, &k) in taps.iter().enumerate() {
                    let sy = mirror(y as isize + t as isize - r, h);
                    acc += k * horiz[(sy * w + x) * ch + c];
                }
                out[(y * w + x) * ch + c] = to_u8(acc);
            }
        }
    }
    Raster::new(w, h, ch, out)
}

#[inline]
pub(crate) fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// BT.601 luma, rounded. Single-channel input is returned unchanged.
pub fn to_grayscale(img: &Raster) -> Result<Raster> {
    if img.channels() == 1 {
        return Ok(img.clone());
    }
    let data = img
        .data()
        .chunks_exact(3)
        .map(|p| to_u8(LUMA_WEIGHTS[0] * p[0] as f64 + LUMA_WEIGHTS[1] * p[1] as f64 + LUMA_WEIGHTS[2] * p[2] as f64))
        .collect();
    Raster::gray(img.width(), img.height(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn mirror_reflects_without_edge_repeat() {
        assert_eq!(mirror(-1, 5), 1);
        assert_eq!(mirror(-2, 5), 2);
        assert_eq!(mirror(5, 5), 3);
        assert_eq!(mirror(6, 5), 2);
        assert_eq!(mirror(3, 5), 3);
        assert_eq!(mirror(-7, 1), 0);
        assert_eq!(mirror(-1, 2), 1);
        assert_eq!(mirror(2, 2), 0);
    }

    #[test]
    fn smoothing_preserves_constants() {
        let img = Raster::filled(9, 6, 3, 137).unwrap();
        assert_eq!(gaussian_smooth(&img, 1.3).unwrap(), img);
    }

    #[test]
    fn rejects_non_positive_sigma() {
        let img = Raster::filled(4, 4, 1, 0).unwrap();
        assert!(matches!(gaussian_smooth(&img, 0.0), Err(Error::Parameter(_))));
        assert!(gaussian_smooth(&img, -1.0).is_err());
    }

    #[test]
    fn impulse_response_matches_direct_2d_convolution() {
        // Direct 2-D oracle: the 5x5 kernel built from exp(-(x²+y²)/2σ²) and
        // normalized as a whole, convolved by brute force.
        let sigma: f64 = 1.0;
        let mut k2 = [[0.0f64; 5]; 5];
        let mut sum = 0.0;
        for (dy, row) in k2.iter_mut().enumerate() {
            for (dx, v) in row.iter_mut().enumerate() {
                let (x, y) = (dx as f64 - 2.0, dy as f64 - 2.0);
                *v = (-(x * x + y * y) / (2.0 * sigma * sigma)).exp();
                sum += *v;
            }
        }
        let mut data = vec![0u8; 49];
        data[3 * 7 + 3] = 200;
        let img = Raster::gray(7, 7, data).unwrap();
        let out = gaussian_smooth_with_radius(&img, sigma, 2).unwrap();
        for y in 0..7usize {
            for x in 0..7usize {
                let mut acc = 0.0;
                for dy in 0..5usize {
                    for dx in 0..5usize {
                        let sx = mirror(x as isize + dx as isize - 2, 7);
                        let sy = mirror(y as isize + dy as isize - 2, 7);
                        acc += k2[dy][dx] / sum * img.get(sx, sy, 0) as f64;
                    }
                }
                assert_eq!(out.get(x, y, 0), acc.round() as u8, "({x},{y})");
            }
        }
        let center = (k2[2][2] / sum * 200.0).round() as u8;
        assert_eq!(out.get(3, 3, 0), center);
    }

    #[test]
    fn smoothing_roughly_preserves_mass() {
        let mut rng = Rng::new(21);
        for _ in 0..5 {
            let data = (0..32 * 32).map(|_| rng.below(256) as u8).collect();
            let img = Raster::gray(32, 32, data).unwrap();
            let out = gaussian_smooth(&img, 1.0).unwrap();
            let a: f64 = img.data().iter().map(|&v| v as f64).sum();
            let b: f64 = out.data().iter().map(|&v| v as f64).sum();
            assert!((a - b).abs() / a < 0.005, "{a} vs {b}");
        }
    }

    #[test]
    fn grayscale_values() {
        let img = Raster::new(3, 1, 3, vec![255, 0, 0, 90, 90, 90, 0, 0, 255]).unwrap();
        let g = to_grayscale(&img).unwrap();
        assert_eq!(g.channels(), 1);
        assert_eq!(g.data(), &[76, 90, 29]);
        for v in 0..=255u8 {
            let p = Raster::new(1, 1, 3, vec![v, v, v]).unwrap();
            assert_eq!(to_grayscale(&p).unwrap().data(), &[v]);
        }
        let already = Raster::gray(2, 1, vec![3, 4]).unwrap();
        assert_eq!(to_grayscale(&already).unwrap(), already);
    }
}
