use crate::error::{Error, Result};

use super::binarize::FOREGROUND;
use super::{BoundingBox, Raster};

pub const DEFAULT_MARGIN: usize = 2;

/// Scanline localization with the default 2-pixel margin.
pub fn locate_target(binary: &Raster, min_run_fraction: f64) -> Result<BoundingBox> {
    locate_target_with_margin(binary, min_run_fraction, DEFAULT_MARGIN)
}

/// Horizontal then vertical scan: keep rows and columns whose foreground
/// count exceeds `min_run_fraction` of their length, take the span of the
/// survivors, grow it by `margin` and clamp to the image.
pub fn locate_target_with_margin(binary: &Raster, min_run_fraction: f64, margin: usize) -> Result<BoundingBox> {
    binary.require_gray("locate_target")?;
    if !(0.0..1.0).contains(&min_run_fraction) {
        return Err(Error::param(format!("min_run_fraction must be in [0, 1), got {min_run_fraction}")));
    }
    let (w, h) = (binary.width(), binary.height());
    let mut rows = vec![0usize; h];
    let mut cols = vec![0usize; w];
    for y in 0..h {
        for x in 0..w {
            if binary.get(x, y, 0) == FOREGROUND {
                rows[y] += 1;
                cols[x] += 1;
            }
        }
    }
    let row_min = min_run_fraction * w as f64;
    let col_min = min_run_fraction * h as f64;
    let span = |counts: &[usize], min: f64| {
        let first = counts.iter().position(|&c| c as f64 > min)?;
        let last = counts.iter().rposition(|&c| c as f64 > min)?;
        Some((first, last))
    };
    let (y0, y1) = span(&rows, row_min).ok_or(Error::EmptyTarget)?;
    let (x0, x1) = span(&cols, col_min).ok_or(Error::EmptyTarget)?;
    Ok(BoundingBox {
        x0: x0.saturating_sub(margin),
        y0: y0.saturating_sub(margin),
        x1: (x1 + margin).min(w - 1),
        y1: (y1 + margin).min(h - 1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn single_pixel_gets_margin() {
        let mut img = Raster::filled(100, 100, 1, 0).unwrap();
        img.set(10, 10, 0, FOREGROUND);
        assert_eq!(locate_target(&img, 0.0).unwrap(), BoundingBox { x0: 8, y0: 8, x1: 12, y1: 12 });
    }

    #[test]
    fn blank_and_full() {
        let blank = Raster::filled(20, 10, 1, 0).unwrap();
        assert!(matches!(locate_target(&blank, 0.01), Err(Error::EmptyTarget)));
        let full = Raster::filled(20, 10, 1, FOREGROUND).unwrap();
        assert_eq!(locate_target(&full, 0.5).unwrap(), BoundingBox::full(&full));
    }

    #[test]
    fn matches_brute_force_scan() {
        let mut rng = Rng::new(12);
        for _ in 0..30 {
            let (w, h) = (5 + rng.below(40) as usize, 5 + rng.below(40) as usize);
            let p = rng.uniform(0.0, 0.2);
            let data = (0..w * h).map(|_| if rng.bernoulli(p) { FOREGROUND } else { 0 }).collect();
            let img = Raster::gray(w, h, data).unwrap();
            let frac = rng.uniform(0.0, 0.3);
            // Oracle: test every row and column independently.
            let row_ok = |y: usize| (0..w).filter(|&x| img.get(x, y, 0) == FOREGROUND).count() as f64 > frac * w as f64;
            let col_ok = |x: usize| (0..h).filter(|&y| img.get(x, y, 0) == FOREGROUND).count() as f64 > frac * h as f64;
            let ys: Vec<usize> = (0..h).filter(|&y| row_ok(y)).collect();
            let xs: Vec<usize> = (0..w).filter(|&x| col_ok(x)).collect();
            match locate_target(&img, frac) {
                Ok(b) => {
                    assert_eq!(b.y0, ys[0].saturating_sub(2));
                    assert_eq!(b.y1, (ys[ys.len() - 1] + 2).min(h - 1));
                    assert_eq!(b.x0, xs[0].saturating_sub(2));
                    assert_eq!(b.x1, (xs[xs.len() - 1] + 2).min(w - 1));
                    assert!(b.fits(w, h));
                }
                Err(Error::EmptyTarget) => assert!(ys.is_empty() || xs.is_empty()),
                Err(e) => panic!("{e}"),
            }
        }
    }
}
