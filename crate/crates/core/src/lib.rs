pub mod datafile;
pub mod error;
pub mod evaluate;
pub mod ingest;
pub mod model;
pub mod num;
pub mod sampler;
pub mod spatial;
pub mod synthetic;

pub use error::{Error, Result};
pub use num::Real;
