pub mod bubbles;
pub mod circle_maps;
pub mod cli;
pub mod complex_rot;
pub mod error;
pub mod linearization;
pub mod moebius;
pub mod numerics;
pub mod perturbation;
pub mod rotation;

pub use error::{Error, Result};
