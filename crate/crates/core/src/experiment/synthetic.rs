//! Synthetic stand-in corpus: a dark leaf-shaped ellipse on a near-white
//! background, with a class-specific lesion pattern painted inside the leaf.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::augment::{presets, DatasetManifest};
use crate::error::{Error, Result};
use crate::imaging::{BoundingBox, Raster, INPUT_SIDE};

/// Side of the square camera frame the generator renders.
pub const PHOTO_SIDE: usize = 320;
use crate::rng::Rng;

/// Every leaf pixel is darker than this and every background pixel is at
/// least this bright.
pub const FOREGROUND_LEVEL: u8 = 210;

const LEAF_MAX: f64 = 200.0;
const BACKGROUND_MIN: f64 = 222.0;
/// Approximate fraction of the leaf covered by lesions.
const COVERAGE: f64 = 0.4;

#[derive(Debug, Clone)]
pub struct SyntheticImage {
    pub class: usize,
    pub raster: Raster,
    /// Bounding box of the leaf pixels.
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub classes: Vec<String>,
    /// Grouped by class, `per_class` images each.
    pub images: Vec<SyntheticImage>,
}

impl SyntheticCorpus {
    /// Relative file name of image `i`.
    pub fn file_name(&self, i: usize) -> String {
        let img = &self.images[i];
        let within = self.images[..i].iter().filter(|o| o.class == img.class).count();
        format!("{}/{:04}.png", self.classes[img.class], within)
    }

    pub fn manifest(&self) -> DatasetManifest {
        let mut files: Vec<Vec<String>> = vec![Vec::new(); self.classes.len()];
        for i in 0..self.images.len() {
            files[self.images[i].class].push(self.file_name(i));
        }
        DatasetManifest::from_files(self.classes.iter().cloned().zip(files).collect())
    }

    /// `(label, raster)` pairs in corpus order.
    pub fn items(&self) -> Vec<(usize, Raster)> {
        self.images.iter().map(|i| (i.class, i.raster.clone())).collect()
    }

    /// Writes the PNGs, `manifest.json` and `boxes.csv` (file, x0, y0, x1, y1).
    pub fn write(&self, dir: &Path) -> Result<DatasetManifest> {
        for c in &self.classes {
            fs::create_dir_all(dir.join(c))?;
        }
        let names: Vec<String> = (0..self.images.len()).map(|i| self.file_name(i)).collect();
        self.images.par_iter().zip(&names).try_for_each(|(img, name)| img.raster.save_png(&dir.join(name)))?;
        let mut w = csv::Writer::from_path(dir.join("boxes.csv"))?;
        w.write_record(["file", "x0", "y0", "x1", "y1"])?;
        for (img, name) in self.images.iter().zip(&names) {
            let b = img.bbox;
            w.write_record([name.clone(), b.x0.to_string(), b.y0.to_string(), b.x1.to_string(), b.y1.to_string()])?;
        }
        w.flush()?;
        let manifest = self.manifest();
        manifest.save(&dir.join("manifest.json"))?;
        Ok(manifest)
    }
}

/// Class names: the reference disease names for up to seven classes,
/// `class_NN` beyond.
pub fn class_names(classes: usize) -> Vec<String> {
    (0..classes)
        .map(
            |i| {
                if classes <= presets::CLASSES.len() {
                    presets::CLASSES[i].to_string()
                } else {
                    format!("class_{i:02}")
                }
            },
        )
        .collect()
}

/// `per_class` images of each class. Image `j` of class `c` is drawn from
/// `rng.child(c).child(j)`, so the corpus is reproducible and each image
/// independent of the corpus size.
pub fn make_synthetic_corpus(classes: usize, per_class: usize, rng: &Rng) -> Result<SyntheticCorpus> {
    if classes < 2 {
        return Err(Error::param(format!("need at least 2 classes, got {classes}")));
    }
    if per_class < 2 {
        return Err(Error::param(format!("need at least 2 images per class, got {per_class}")));
    }
    let jobs: Vec<(usize, usize)> = (0..classes).flat_map(|c| (0..per_class).map(move |j| (c, j))).collect();
    let images = jobs
        .par_iter()
        .map(|&(c, j)| synthetic_leaf(c, &mut rng.child(c as u64).child(j as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticCorpus { classes: class_names(classes), images })
}

struct Canvas {
    side: usize,
    value: Vec<f64>,
    leaf: Vec<bool>,
}

impl Canvas {
    fn paint(&mut self, x: f64, y: f64, v: f64) {
        if x < 0.0 || y < 0.0 {
            return;
        }
        let (xi, yi) = (x as usize, y as usize);
        if xi < self.side && yi < self.side && self.leaf[yi * self.side + xi] {
            self.value[yi * self.side + xi] = v;
        }
    }

    /// Paint every leaf pixel whose centre satisfies `inside`, within the
    /// square of half-size `r` around `(cx, cy)`.
    fn fill(&mut self, cx: f64, cy: f64, r: f64, v: f64, inside: impl Fn(f64, f64) -> bool) {
        let last = self.side - 1;
        let lo = |c: f64| (c - r).floor().max(0.0) as usize;
        let hi = |c: f64| ((c + r).ceil().max(0.0) as usize).min(last);
        for y in lo(cy)..=hi(cy) {
            for x in lo(cx)..=hi(cx) {
                let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                if inside(dx, dy) {
                    self.paint(x as f64, y as f64, v);
                }
            }
        }
    }

    fn disc(&mut self, cx: f64, cy: f64, r: f64, v: f64) {
        self.fill(cx, cy, r, v, |dx, dy| dx * dx + dy * dy <= r * r);
    }

    fn ring(&mut self, cx: f64, cy: f64, r: f64, width: f64, v: f64) {
        self.fill(cx, cy, r, v, |dx, dy| {
            let d = (dx * dx + dy * dy).sqrt();
            d <= r && d >= r - width
        });
    }

    /// Segment of half-length `len` and half-width `w` through `(cx, cy)`
    /// at angle `theta`.
    fn bar(&mut self, cx: f64, cy: f64, len: f64, w: f64, theta: f64, v: f64) {
        let (s, c) = theta.sin_cos();
        self.fill(cx, cy, len + w, v, |dx, dy| {
            let along = dx * c + dy * s;
            let across = -dx * s + dy * c;
            along.abs() <= len && across.abs() <= w
        });
    }
}

fn synthetic_leaf(class: usize, rng: &mut Rng) -> Result<SyntheticImage> {
    let side = PHOTO_SIDE;
    // geometry is laid out for an INPUT_SIDE frame and scaled up
    let f = PHOTO_SIDE as f64 / INPUT_SIDE as f64;
    let a = f * rng.uniform(70.0, 86.0);
    let b = f * rng.uniform(58.0, 80.0f64.min(a / f));
    let theta = rng.uniform(-0.05, 0.05);
    let (s, c) = theta.sin_cos();
    // half extents of the rotated ellipse
    let ex = ((a * c).powi(2) + (b * s).powi(2)).sqrt();
    let ey = ((a * s).powi(2) + (b * c).powi(2)).sqrt();
    let margin = 4.0 * f;
    let cx = rng.uniform(ex + margin, side as f64 - ex - margin);
    let cy = rng.uniform(ey + margin, side as f64 - ey - margin);

    let mut leaf = vec![false; side * side];
    for y in 0..side {
        for x in 0..side {
            let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            let u = (dx * c + dy * s) / a;
            let v = (-dx * s + dy * c) / b;
            leaf[y * side + x] = u * u + v * v <= 1.0;
        }
    }
    let base = rng.uniform(80.0, 90.0);
    let background = rng.uniform(230.0, 236.0);
    let value = leaf.iter().map(|&l| if l { base } else { background }).collect();
    let mut canvas = Canvas { side, value, leaf };

    // uniform lesion centre inside the leaf
    let spot = |rng: &mut Rng| -> (f64, f64) {
        let r = rng.next_f64().sqrt();
        let phi = rng.uniform(0.0, std::f64::consts::TAU);
        let (u, v) = (r * a * phi.cos(), r * b * phi.sin());
        (cx + u * c - v * s, cy + u * s + v * c)
    };
    // lesions of (unscaled) mean area `area` covering about COVERAGE of the leaf
    let leaf_area = std::f64::consts::PI * a * b / (f * f);
    let count = |area: f64| (COVERAGE * leaf_area / area).round() as usize;
    let bright = |rng: &mut Rng| rng.uniform(165.0, 180.0);
    let k = class % 7;
    match k {
        0 => {
            for _ in 0..count(28.0) {
                let (x, y) = spot(rng);
                canvas.disc(x, y, f * rng.uniform(2.5, 3.5), rng.uniform(30.0, 45.0));
            }
        }
        1 => {
            for _ in 0..count(154.0) {
                let (x, y) = spot(rng);
                canvas.disc(x, y, f * rng.uniform(6.0, 8.0), bright(rng));
            }
        }
        3 => {
            for _ in 0..count(75.0) {
                let (x, y) = spot(rng);
                canvas.ring(x, y, f * rng.uniform(6.0, 8.0), 2.0 * f, bright(rng));
            }
        }
        4 => {
            for _ in 0..count(44.0) {
                let (x, y) = spot(rng);
                let (arm, v) = (f * rng.uniform(5.0, 7.0), bright(rng));
                let tilt = rng.uniform(0.0, std::f64::consts::FRAC_PI_2);
                canvas.bar(x, y, arm, f, tilt, v);
                canvas.bar(x, y, arm, f, tilt + std::f64::consts::FRAC_PI_2, v);
            }
        }
        _ => {
            // streaks that differ only in orientation
            let angle = match k {
                2 => 0.0,
                5 => std::f64::consts::FRAC_PI_2,
                _ => std::f64::consts::FRAC_PI_4,
            };
            for _ in 0..count(48.0) {
                let (x, y) = spot(rng);
                let len = f * rng.uniform(7.0, 9.0);
                canvas.bar(x, y, len, 1.5 * f, angle + rng.uniform(-0.1, 0.1), bright(rng));
            }
        }
    }

    let mut data = Vec::with_capacity(side * side);
    let (mut x0, mut y0, mut x1, mut y1) = (side, side, 0, 0);
    for y in 0..side {
        for x in 0..side {
            let i = y * side + x;
            let noise = rng.normal(0.0, 4.0).clamp(-8.0, 8.0);
            let v = if canvas.leaf[i] {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
                (canvas.value[i] + noise).clamp(0.0, LEAF_MAX)
            } else {
                (canvas.value[i] + noise).clamp(BACKGROUND_MIN, 255.0)
            };
            data.push(v.round() as u8);
        }
    }
    Ok(SyntheticImage { class, raster: Raster::gray(side, side, data)?, bbox: BoundingBox::new(x0, y0, x1, y1)? })
}
