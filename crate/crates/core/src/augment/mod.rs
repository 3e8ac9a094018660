//! Rotation, vertical flip and salt-and-pepper operators, and the manifest
//! bookkeeping for growing a dataset with them.

mod expand;
mod manifest;
mod ops;
mod plan;
mod registry;

pub use expand::{
    expand_dataset, expansion_counts, plan_class_expansion, variant_chains, ExpansionItem, ExpansionTargets,
};
pub use manifest::{presets, resolve, ClassEntry, DatasetManifest, PROPORTION_SUM_TOLERANCE, PROPORTION_TOLERANCE};
pub use ops::{flip_vertical, rotate, salt_pepper, salt_pepper_counted, RotationAngle};
pub use plan::AugmentPlan;
pub use registry::{Augmentation, AugmentationRegistry, FlipVertical, OperatorParams, Rotate, SaltPepper};
