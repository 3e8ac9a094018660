use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::imaging::Raster;
use crate::rng::Rng;

use super::ops::{flip_vertical, rotate, salt_pepper, RotationAngle};

/// One augmentation operator.
pub trait Augmentation: Send + Sync {
    /// Registry name, also used as the file-name suffix.
    fn name(&self) -> &str;

    fn apply(&self, img: &Raster, rng: &mut Rng) -> Result<Raster>;

    /// Geometric operators are exact pixel permutations.
    fn is_geometric(&self) -> bool {
        true
    }
}

pub struct Rotate(pub RotationAngle);

impl Augmentation for Rotate {
    fn name(&self) -> &str {
        match self.0 {
            RotationAngle::Deg90 => "rot90",
            RotationAngle::Deg180 => "rot180",
            RotationAngle::Deg270 => "rot270",
        }
    }

    fn apply(&self, img: &Raster, _rng: &mut Rng) -> Result<Raster> {
        Ok(rotate(img, self.0))
    }
}

pub struct FlipVertical;

impl Augmentation for FlipVertical {
    fn name(&self) -> &str {
        "flip"
    }

    fn apply(&self, img: &Raster, _rng: &mut Rng) -> Result<Raster> {
        Ok(flip_vertical(img))
    }
}

pub struct SaltPepper {
    pub rate: f64,
}

impl Augmentation for SaltPepper {
    fn name(&self) -> &str {
        "noise"
    }

    fn apply(&self, img: &Raster, rng: &mut Rng) -> Result<Raster> {
        salt_pepper(img, self.rate, rng)
    }

    fn is_geometric(&self) -> bool {
        false
    }
}

/// Knobs an operator builder may read.
#[derive(Debug, Clone, Copy)]
pub struct OperatorParams {
    pub noise_rate: f64,
}

type Builder = fn(&OperatorParams) -> Result<Box<dyn Augmentation>>;

/// Operators by name.
pub struct AugmentationRegistry {
    builders: BTreeMap<&'static str, Builder>,
}

impl AugmentationRegistry {
    pub fn empty() -> Self {
        AugmentationRegistry { builders: BTreeMap::new() }
    }

    pub fn register(&mut self, name: &'static str, builder: Builder) {
        self.builders.insert(name, builder);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.builders.keys().copied()
    }

    pub fn build(&self, name: &str, params: &OperatorParams) -> Result<Box<dyn Augmentation>> {
        let builder = self.builders.get(name).ok_or_else(|| Error::param(format!("unknown augmentation `{name}`")))?;
        builder(params)
    }
}

impl Default for AugmentationRegistry {
    fn default() -> Self {
        let mut r = AugmentationRegistry::empty();
        r.register("rot90", |_| Ok(Box::new(Rotate(RotationAngle::Deg90))));
        r.register("rot180", |_| Ok(Box::new(Rotate(RotationAngle::Deg180))));
        r.register("rot270", |_| Ok(Box::new(Rotate(RotationAngle::Deg270))));
        r.register("flip", |_| Ok(Box::new(FlipVertical)));
        r.register("noise", |p| {
            if !(0.0..1.0).contains(&p.noise_rate) {
                return Err(Error::param(format!("noise rate must be in [0, 1), got {}", p.noise_rate)));
            }
            Ok(Box::new(SaltPepper { rate: p.noise_rate }))
        });
        r
    }
}
