//! Nearby commuting matrices for almost commuting inputs.

pub mod bounds;
pub mod error;
pub mod gallery;
pub mod matcore;
pub mod matfile;
pub mod pipeline;
pub mod projgeom;
pub mod random;
pub mod realset;
pub mod smoothing;
pub mod subspace;
pub mod suites;

pub use error::{Error, Result};
pub use matcore::{ComplexMatrix, HermitianEig, OrthoProjection, C64};
pub use realset::RealSet;
