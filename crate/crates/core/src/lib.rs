pub mod acquisition;
pub mod alloop;
pub mod bnn;
pub mod config;
mod codec;
pub mod error;
pub mod ndcalc;
pub mod ood;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor = ndcalc::Tensor<f64>;
pub mod datasets;
