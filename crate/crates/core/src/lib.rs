pub mod augment;
pub mod autodiff;
pub mod config;
pub mod experiment;
pub mod featnet;
pub mod image;
pub mod nst;
pub mod pipeline;
pub mod seeds;
pub mod trainer;

mod error;

pub use error::{Error, Result, WeightFileError};
