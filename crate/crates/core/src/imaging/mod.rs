//! Leaf localization: smoothing, grayscale, Sobel gradients, Otsu
//! binarization, scanline target search and crop/resize to the network input.

mod binarize;
mod filter;
mod locate;
mod pipeline;
mod raster;
mod resize;
mod sobel;

pub use binarize::{
    between_class_variance, binarize, binarize_with, histogram, otsu_threshold, Polarity, BACKGROUND, FOREGROUND,
};
pub use filter::{gaussian_kernel, gaussian_smooth, gaussian_smooth_with_radius, to_grayscale, LUMA_WEIGHTS};
pub use locate::{locate_target, locate_target_with_margin, DEFAULT_MARGIN};
pub use pipeline::{segment_pipeline, BinarizeSource, Intermediates, SegmentConfig, Segmentation};
pub use raster::{BoundingBox, Raster};
pub use resize::crop_resize;
pub use sobel::{
    sobel, sobel_with, GradientField, MagnitudeMode, OrientationMode, SobelOptions, MAX_EUCLIDEAN_MAGNITUDE,
};

/// Side of the square network input.
pub const INPUT_SIDE: usize = 188;
