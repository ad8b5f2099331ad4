//! Exact dyadic time-frequency tiles, tile structures and the operators built on them.

pub mod carleson;
pub mod cme;
pub mod counting;
pub mod dyadic;
pub mod norms;
pub mod setsbuild;
pub mod structures;
pub mod tiles;
pub mod walsh;

pub use dyadic::{DyadicInterval, MeasurableSet, RealInterval, Scalar, StepFunction};
