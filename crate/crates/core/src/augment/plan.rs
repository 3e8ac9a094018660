use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ops::RotationAngle;
use super::registry::{Augmentation, AugmentationRegistry, OperatorParams};

/// Which operators run during dataset expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentPlan {
    pub rotations: Vec<RotationAngle>,
    pub flip: bool,
    pub noise: bool,
    pub noise_rate: f64,
}

impl Default for AugmentPlan {
    fn default() -> Self {
        AugmentPlan { rotations: RotationAngle::ALL.to_vec(), flip: true, noise: true, noise_rate: 0.05 }
    }
}

impl AugmentPlan {
    pub fn none() -> Self {
        AugmentPlan { rotations: Vec::new(), flip: false, noise: false, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.noise_rate) {
            return Err(Error::param(format!("noise rate must be in [0, 1), got {}", self.noise_rate)));
        }
        let mut seen = self.rotations.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.rotations.len() {
            return Err(Error::param("rotation angles must be distinct"));
        }
        Ok(())
    }

    /// Enabled operator names in canonical order: rotations, flip, noise.
    pub fn operator_names(&self) -> Vec<&'static str> {
        let mut rot = self.rotations.clone();
        rot.sort();
        let mut names: Vec<&'static str> = rot
            .iter()
            .map(|a| match a {
                RotationAngle::Deg90 => "rot90",
                RotationAngle::Deg180 => "rot180",
                RotationAngle::Deg270 => "rot270",
            })
            .collect();
        if self.flip {
            names.push("flip");
        }
        if self.noise {
            names.push("noise");
        }
        names
    }

    pub fn enabled_count(&self) -> usize {
        self.operator_names().len()
    }

    pub fn build_operators(&self, registry: &AugmentationRegistry) -> Result<Vec<Box<dyn Augmentation>>> {
        self.validate()?;
        let params = OperatorParams { noise_rate: self.noise_rate };
        self.operator_names().into_iter().map(|n| registry.build(n, &params)).collect()
    }
}
