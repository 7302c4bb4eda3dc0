pub mod error;
pub mod io;
pub mod langevin;
pub mod model;
pub mod rng;
pub mod spectral;
pub mod tomography;

pub use error::{Error, Result};
