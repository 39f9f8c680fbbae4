//! Lead-210 sediment chronologies.
//!
//! * [`data`]: slab measurements, datasets, chronologies and the CSV format.
//! * [`simulator`]: synthetic cores from known age-depth functions.
//! * [`crs`]: Constant Rate of Supply dating, classical and Monte Carlo.
//! * [`plum`]: Bayesian dating with an autoregressive accumulation prior.
//! * [`evaluation`]: accuracy and precision metrics and the subsampling experiment.

pub mod crs;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod plum;
pub mod simulator;
pub mod stats;

pub use data::{
    load_dataset, slab_areal_activity, write_dataset, AgeEstimate, Chronology, Dataset, DecayConstants,
    Measurement, Method,
};
pub use error::{Error, Result};
