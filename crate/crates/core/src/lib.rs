pub mod applications;
pub mod concentration;
pub mod error;
pub mod map;
pub mod measure;
pub mod observables;
pub mod rng;
pub mod stats;
pub mod wasserstein;

pub use error::{Error, Result};
pub use map::{Branch, MapModel, MarkovPartition, OrbitSegment};
pub use measure::{build_ulam, GridScheme, UlamMeasure, UlamOperator};
