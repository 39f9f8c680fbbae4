use super::model::{interpolate_age, PlumParams};
use super::sampler::PosteriorDraws;
use crate::data::{AgeEstimate, Chronology, Method};
use crate::error::{Error, Result};
use crate::stats;

/// Fewest retained draws accepted for a chronology summary.
pub const MIN_DRAWS: usize = 100;

/// Posterior age summary at each depth: mean, 2.5% and 97.5% quantiles, and
/// a quarter of the interval length as the sd proxy.
pub fn summarize_chronology(draws: &PosteriorDraws, depths: &[f64]) -> Result<Chronology> {
    summarize_params(&draws.draws, depths)
}

pub fn summarize_params(draws: &[PlumParams], depths: &[f64]) -> Result<Chronology> {
    if draws.len() < MIN_DRAWS {
        return Err(Error::domain(format!(
            "need at least {MIN_DRAWS} retained draws to summarize, got {}",
            draws.len()
        )));
    }
    let max_depth = draws[0].max_depth();
    if let Some(d) = depths.iter().find(|d| !(**d >= 0.0 && **d <= max_depth + 1e-9)) {
        return Err(Error::domain(format!(
            "depth {d} cm lies outside the section grid [0, {max_depth}]"
        )));
    }

    let boundary_ages: Vec<Vec<f64>> = draws.iter().map(PlumParams::boundary_ages).collect();
    let mut ages = vec![0.0; draws.len()];
    let estimates = depths
        .iter()
        .map(|&depth| {
            for ((a, d), b) in ages.iter_mut().zip(draws).zip(&boundary_ages) {
                *a = interpolate_age(b, &d.alphas, d.section_width, depth.min(max_depth));
            }
            let q = stats::quantiles(&ages, &[0.025, 0.975]);
            AgeEstimate {
                depth,
                age_mean: stats::mean(&ages),
                lower95: q[0],
                upper95: q[1],
                sd_proxy: (q[1] - q[0]) / 4.0,
            }
        })
        .collect();
    Ok(Chronology::new(Method::Plum, estimates))
}
