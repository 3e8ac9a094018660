use std::path::Path;

use rayon::prelude::*;

use crate::augment::DatasetManifest;
use crate::error::{Error, Result};
use crate::imaging::{to_grayscale, Raster};
use crate::tensor::Tensor;

/// Labelled square grayscale images held in memory, intensities scaled to
/// `[0, 1]`. Network batches are shifted so that each image has median zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    classes: Vec<String>,
    side: usize,
    pixels: Vec<f64>,
    medians: Vec<f64>,
    labels: Vec<usize>,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    let mid = s.len() / 2;
    *s.select_nth_unstable_by(mid, f64::total_cmp).1
}

impl Dataset {
    pub fn from_rasters(classes: Vec<String>, side: usize, items: &[(usize, Raster)]) -> Result<Self> {
        let per = side * side;
        let mut pixels = Vec::with_capacity(items.len() * per);
        let mut labels = Vec::with_capacity(items.len());
        for (label, img) in items {
            if *label >= classes.len() {
                return Err(Error::contract(format!("label {label} but only {} classes", classes.len())));
            }
            let gray = to_grayscale(img)?;
            if gray.width() != side || gray.height() != side {
                return Err(Error::contract(format!(
                    "expected {side}x{side} images, got {}x{}; segment the images first",
                    gray.width(),
                    gray.height()
                )));
            }
            pixels.extend(gray.data().iter().map(|&p| p as f64 / 255.0));
            labels.push(*label);
        }
        let medians = if per == 0 { vec![0.0; labels.len()] } else { pixels.par_chunks(per).map(median).collect() };
        Ok(Dataset { classes, side, pixels, medians, labels })
    }

    /// Decode every file of `manifest` (paths relative to `root`). Class
    /// indices follow manifest order.
    pub fn load(manifest: &DatasetManifest, root: &Path, side: usize) -> Result<Self> {
        let samples = manifest.samples(root);
        if samples.len() != manifest.total() {
            return Err(Error::contract("manifest lists fewer files than its counts"));
        }
        let items =
            samples.par_iter().map(|(label, path)| Ok((*label, Raster::load(path)?))).collect::<Result<Vec<_>>>()?;
        let classes = manifest.entries.iter().map(|e| e.class.clone()).collect();
        Self::from_rasters(classes, side, &items)
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Raw `[0, 1]` intensities of sample `i`.
    pub fn sample(&self, i: usize) -> &[f64] {
        let per = self.side * self.side;
        &self.pixels[i * per..(i + 1) * per]
    }

    /// `[m, side, side, 1]` median-centred batch of the given samples.
    pub fn batch(&self, indices: &[usize]) -> Result<Tensor> {
        let mut data = Vec::with_capacity(indices.len() * self.side * self.side);
        for &i in indices {
            let m = self.medians[i];
            data.extend(self.sample(i).iter().map(|p| p - m));
        }
        Tensor::from_vec(&[indices.len(), self.side, self.side, 1], data)
    }

    /// Samples `start..start + len` as a batch.
    pub fn range(&self, start: usize, len: usize) -> Result<Tensor> {
        let idx: Vec<usize> = (start..start + len).collect();
        self.batch(&idx)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scales_and_labels() {
        let img = Raster::gray(2, 2, vec![0, 255, 51, 102]).unwrap();
        let ds = Dataset::from_rasters(vec!["a".into(), "b".into()], 2, &[(1, img)]).unwrap();
        assert_eq!(ds.sample(0), &[0.0, 1.0, 0.2, 0.4]);
        assert_eq!(ds.labels(), &[1]);
        let b = ds.batch(&[0, 0]).unwrap();
        assert_eq!(b.shape(), &[2, 2, 2, 1]);
        let want = [-0.4, 0.6, -0.2, 0.0];
        assert!(b.data()[..4].iter().zip(want).all(|(a, w)| (a - w).abs() < 1e-12));
    }

    #[test]
    fn wrong_size_is_rejected() {
        let img = Raster::gray(3, 2, vec![0; 6]).unwrap();
        assert!(Dataset::from_rasters(vec!["a".into()], 2, &[(0, img)]).is_err());
    }
}
