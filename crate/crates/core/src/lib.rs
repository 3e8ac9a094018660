pub mod augment;
pub mod baselines;
pub mod cnn;
pub mod error;
pub mod experiment;
pub mod imaging;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::Tensor;
