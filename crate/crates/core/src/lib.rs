pub mod analytics;
pub mod dst;
pub mod error;
pub mod exploration;
pub mod geometry;
pub mod green;
pub mod overlay;
pub mod percolation;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use geometry::{Annulus, BoxSpec, Site};
