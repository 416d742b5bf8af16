//! Holevo Cramér-Rao bound evaluation for finite-dimensional multi-parameter quantum models.

pub mod checks;
pub mod conic;
pub mod error;
pub mod hcrb;
pub mod info;
pub mod interferometer;
pub mod json;
pub mod linalg;
pub mod magnetometry;
pub mod measurement;
pub mod model;
pub mod quotient;
pub mod report;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{load_model, QuantumModel};
pub use quotient::{GramFactor, GramMatrix, QuotientFrame};
pub use spectral::{eigendecompose, SpectralData};
