use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiment::Dataset;
use crate::imaging::{sobel, Raster, INPUT_SIDE, MAX_EUCLIDEAN_MAGNITUDE};

pub const HIST_BINS: usize = 16;
pub const GRID: usize = 4;
pub const FEATURE_DIM: usize = HIST_BINS + GRID * GRID + 2;

/// 16-bin intensity histogram, 4x4 grid of mean Sobel magnitude, intensity
/// mean and variance (intensities scaled to [0, 1]).
pub type FeatureVector = [f64; FEATURE_DIM];

pub fn extract_features(img: &Raster) -> Result<FeatureVector> {
    img.require_gray("extract_features")?;
    if img.width() != INPUT_SIDE || img.height() != INPUT_SIDE {
        return Err(Error::contract(format!(
            "features need a {INPUT_SIDE}x{INPUT_SIDE} image, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    let mut f = [0.0; FEATURE_DIM];
    let n = img.pixel_count() as f64;
    for &v in img.data() {
        f[v as usize * HIST_BINS / 256] += 1.0;
    }
    for b in &mut f[..HIST_BINS] {
        *b /= n;
    }

    let field = sobel(img)?;
    let (w, h) = (img.width(), img.height());
    for gy in 0..GRID {
        for gx in 0..GRID {
            let (y0, y1) = (gy * h / GRID, (gy + 1) * h / GRID);
            let (x0, x1) = (gx * w / GRID, (gx + 1) * w / GRID);
            let sum: f64 =
                (y0..y1).flat_map(|y| (x0..x1).map(move |x| (x, y))).map(|(x, y)| field.magnitude[y * w + x]).sum();
            f[HIST_BINS + gy * GRID + gx] = sum / ((y1 - y0) * (x1 - x0)) as f64 / MAX_EUCLIDEAN_MAGNITUDE;
        }
    }

    let (sum, sq) = img.data().iter().fold((0u64, 0u64), |(s, q), &v| (s + v as u64, q + (v as u64).pow(2)));
    let count = img.pixel_count() as u64;
    let spread = (count * sq - sum * sum) as f64;
    f[FEATURE_DIM - 2] = sum as f64 / n / 255.0;
    f[FEATURE_DIM - 1] = spread / (n * n * 255.0 * 255.0);
    Ok(f)
}

/// Row-major feature matrix with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub dim: usize,
    pub classes: usize,
    pub data: Vec<f64>,
    pub labels: Vec<usize>,
}

impl FeatureSet {
    pub fn new(dim: usize, classes: usize, data: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if dim == 0 || data.len() != dim * labels.len() {
            return Err(Error::shape(format!("{} values do not form {} rows of {dim}", data.len(), labels.len())));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::contract(format!("label {l} out of range for {classes} classes")));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("features must be finite"));
        }
        Ok(FeatureSet { dim, classes, data, labels })
    }

    /// Features of every image in `data`, extracted in parallel.
    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        let side = data.side();
        let rows = (0..data.len())
            .into_par_iter()
            .map(|i| {
                let px = data.sample(i).iter().map(|&p| (p * 255.0).round() as u8).collect();
                extract_features(&Raster::gray(side, side, px)?)
            })
            .collect::<Result<Vec<_>>>()?;
        let flat = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(FEATURE_DIM, data.classes().len(), flat, data.labels().to_vec())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn distinct_labels(&self) -> usize {
        let mut seen = vec![false; self.classes];
        self.labels.iter().for_each(|&l| seen[l] = true);
        seen.iter().filter(|&&s| s).count()
    }
}

/// Per-feature z-scoring fitted on a training set. Constant features keep
/// unit scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(set: &FeatureSet) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::contract("cannot standardize an empty feature set"));
        }
        let n = set.len() as f64;
        let mut mean = vec![0.0; set.dim];
        for i in 0..set.len() {
            mean.iter_mut().zip(set.row(i)).for_each(|(m, v)| *m += v / n);
        }
        let mut var = vec![0.0; set.dim];
        for i in 0..set.len() {
            var.iter_mut().zip(set.row(i).iter().zip(&mean)).for_each(|(s, (v, m))| *s += (v - m).powi(2) / n);
        }
        let std = var.into_iter().map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 }).collect();
        Ok(Standardizer { mean, std })
    }

    pub fn apply(&self, set: &FeatureSet) -> Result<FeatureSet> {
        if set.dim != self.mean.len() {
            return Err(Error::shape(format!("standardizer fitted on {} features, got {}", self.mean.len(), set.dim)));
        }
        let data = set
            .data
            .chunks(set.dim)
            .flat_map(|row| row.iter().zip(self.mean.iter().zip(&self.std)).map(|(v, (m, s))| (v - m) / s))
            .collect();
        FeatureSet::new(set.dim, set.classes, data, set.labels.clone())
    }
}
