//! Bayesian 210Pb dating with a piecewise-linear age-depth model.
//!
//! Section accumulation rates follow an autoregressive Gamma prior; the
//! 210Pb supply and the supported level are inferred jointly with the ages
//! from the total 210Pb and the 226Ra measurements.

mod model;
mod sampler;
mod summary;

pub use model::{
    age_at, beta_ln_pdf, gamma_ln_pdf, log_likelihood, log_prior, normal_ln_pdf, Likelihood, PlumParams,
    PlumPriors,
};
pub use sampler::{
    default_initial_state, run_chain, sample_chains, sample_posterior, sample_prior, Block, BlockStats,
    McmcConfig, PlumModel, PosteriorDraws, SectionGrid,
};
pub use summary::{summarize_chronology, summarize_params, MIN_DRAWS};
