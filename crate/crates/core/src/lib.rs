pub mod distributions;
pub mod error;
pub mod moments;
pub mod montecarlo;
pub mod power;
pub mod quadrature;
pub mod special;
pub mod sphere;
pub mod testing;

pub use error::{Error, Result};
