pub mod autodiff;
pub mod cli;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod layers;
pub mod models;
pub mod plot;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use tensor::Tensor;
