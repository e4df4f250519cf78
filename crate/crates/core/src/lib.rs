pub mod error;
pub mod features;
pub mod geo;
pub mod context;
pub mod ingest;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod scalar;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision aliases for the generic core.
pub type Tensor = nn::Tensor<f64>;
pub type ParamStore = nn::ParamStore<f64>;
pub type GeneralFeatures = features::general::GeneralFeatures<f64>;
pub type NormStats = features::general::NormStats<f64>;
pub type Sample = model::Sample<f64>;
pub type S2sModel = model::S2sModel<f64>;
