//! Constant Rate of Supply dating.
//!
//! The classical pipeline subtracts the mean supported activity, integrates
//! the excess 210Pb inventory below each slab boundary and converts the
//! inventory ratio to an age, `t(x) = ln(A0 / A(x)) / λ`, with first-order
//! error propagation. The Monte Carlo variant reruns the same pipeline on
//! resampled activities and summarizes the age distribution per depth.
//!
//! The deepest slab of a dataset is always treated as the equilibrium marker
//! and does not contribute to the inventory.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::data::{AgeEstimate, Chronology, Dataset, DecayConstants, Method};
use crate::error::{Error, Result};
use crate::stats;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq)]
pub struct CrsConfig {
    pub decay: DecayConstants,
    /// Add the standard error of the supported mean to each excess sd.
    pub propagate_supported_sd: bool,
    /// Add the decay-constant uncertainty to the age sd.
    pub include_lambda_sd: bool,
    /// Account for A(x) being part of A0 when propagating errors.
    pub shared_sum_covariance: bool,
}

impl Default for CrsConfig {
    fn default() -> Self {
        Self {
            decay: DecayConstants::PB210,
            propagate_supported_sd: true,
            include_lambda_sd: false,
            shared_sum_covariance: false,
        }
    }
}

/// Mean supported activity estimated from the 226Ra column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportedEstimate {
    /// Bq/kg
    pub mean: f64,
    /// Standard error of the mean, Bq/kg.
    pub sd: f64,
    pub n: usize,
    /// Set when a single measurement leaves the standard error undefined.
    pub degenerate: bool,
}

pub fn estimate_supported(dataset: &Dataset) -> Result<SupportedEstimate> {
    let ra: Vec<f64> = dataset.measurements().iter().map(|m| m.ra226).collect();
    supported_from_values(&ra)
}

fn supported_from_values(ra: &[f64]) -> Result<SupportedEstimate> {
    if ra.is_empty() {
        return Err(Error::domain("no 226Ra measurements to estimate the supported level"));
    }
    let n = ra.len();
    Ok(SupportedEstimate {
        mean: stats::mean(ra),
        sd: stats::sd(ra) / (n as f64).sqrt(),
        n,
        degenerate: n < 2,
    })
}

/// Excess activity of one datable slab.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcessSlab {
    /// Slab bottom, cm.
    pub depth: f64,
    pub thickness: f64,
    pub density: f64,
    /// Bq/kg
    pub excess: f64,
    pub sd: f64,
}

impl ExcessSlab {
    fn top(&self) -> f64 {
        self.depth - self.thickness
    }

    fn midpoint(&self) -> f64 {
        self.depth - 0.5 * self.thickness
    }

    /// Excess areal activity per cm of core, Bq/m²/cm.
    fn areal_density(&self) -> f64 {
        self.excess * self.density * 10.0
    }

    fn areal_density_sd(&self) -> f64 {
        self.sd * self.density * 10.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcessProfile {
    /// Datable slabs, shallowest first.
    pub slabs: Vec<ExcessSlab>,
    pub supported: SupportedEstimate,
    /// First depth with non-positive excess above the equilibrium marker.
    pub truncation_depth: Option<f64>,
    /// Measured depths left out of dating: truncated slabs and the equilibrium marker.
    pub excluded_depths: Vec<f64>,
}

/// Subtracts the supported mean and truncates at the first non-positive excess.
pub fn excess_profile(dataset: &Dataset, cfg: &CrsConfig) -> Result<ExcessProfile> {
    let supported = estimate_supported(dataset)?;
    let supported_sd = if cfg.propagate_supported_sd { supported.sd } else { 0.0 };
    let rows = dataset.measurements();
    let (datable_rows, marker) = rows.split_at(rows.len() - 1);

    let mut slabs = Vec::with_capacity(datable_rows.len());
    let mut truncation_depth = None;
    let mut excluded_depths = Vec::new();
    for m in datable_rows {
        let excess = m.pb210 - supported.mean;
        if truncation_depth.is_none() && excess <= 0.0 {
            truncation_depth = Some(m.depth);
        }
        if truncation_depth.is_some() {
            excluded_depths.push(m.depth);
            continue;
        }
        slabs.push(ExcessSlab {
            depth: m.depth,
            thickness: m.thickness,
            density: m.density,
            excess,
            sd: m.pb210_sd.hypot(supported_sd),
        });
    }
    excluded_depths.extend(marker.iter().map(|m| m.depth));
    if slabs.is_empty() {
        return Err(Error::NoDatableExcess);
    }
    Ok(ExcessProfile {
        slabs,
        supported,
        truncation_depth,
        excluded_depths,
    })
}

/// Remaining excess inventory below a slab boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct InventoryPoint {
    pub depth: f64,
    /// Bq/m²
    pub a_below: f64,
    pub sd: f64,
    /// Weight of each datable slab's areal density in `a_below`.
    coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InventoryProfile {
    /// Total excess inventory, Bq/m².
    pub a0: f64,
    pub a0_sd: f64,
    /// `A(x)` at the bottom of each datable slab, shallowest first. The last
    /// entry is zero.
    pub boundaries: Vec<InventoryPoint>,
    /// The shallowest slab did not start at the surface and its areal density
    /// was extended flat up to depth 0.
    pub surface_extrapolated: bool,
    a0_coefficients: Vec<f64>,
    slab_sd: Vec<f64>,
}

impl InventoryProfile {
    fn variance(&self, c: &[f64]) -> f64 {
        c.iter().zip(&self.slab_sd).map(|(c, s)| (c * s).powi(2)).sum()
    }

    fn covariance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.slab_sd)
            .map(|((a, b), s)| a * b * s * s)
            .sum()
    }
}

/// Integrates the excess inventory. Gaps between measured slabs are filled by
/// linear interpolation of the areal density between slab midpoints.
pub fn inventory_profile(excess: &ExcessProfile) -> Result<InventoryProfile> {
    let slabs = &excess.slabs;
    let n = slabs.len();
    if n < 2 {
        return Err(Error::TooFewSlabs { needed: 2, found: n });
    }
    let densities: Vec<f64> = slabs.iter().map(ExcessSlab::areal_density).collect();
    let slab_sd: Vec<f64> = slabs.iter().map(ExcessSlab::areal_density_sd).collect();

    // Each segment: (top, coefficients on the slab areal densities).
    let mut segments: Vec<(f64, Vec<(usize, f64)>)> = Vec::with_capacity(2 * n);
    let first = &slabs[0];
    let surface_extrapolated = first.top() > 1e-12;
    if surface_extrapolated {
        segments.push((0.0, vec![(0, first.top())]));
    }
    for (k, s) in slabs.iter().enumerate() {
        segments.push((s.top(), vec![(k, s.thickness)]));
        if let Some(next) = slabs.get(k + 1) {
            let gap = next.top() - s.depth;
            if gap > 1e-12 {
                let u = (s.depth + 0.5 * gap - s.midpoint()) / (next.midpoint() - s.midpoint());
                segments.push((s.depth, vec![(k, gap * (1.0 - u)), (k + 1, gap * u)]));
            }
        }
    }

    let coefficients_below = |x: f64| -> Vec<f64> {
        let mut c = vec![0.0; n];
        for (top, terms) in &segments {
            if *top >= x - 1e-12 {
                for &(k, w) in terms {
                    c[k] += w;
                }
            }
        }
        c
    };
    let dot = |c: &[f64]| -> f64 { c.iter().zip(&densities).map(|(c, d)| c * d).sum() };

    let a0_coefficients = coefficients_below(0.0);
    let mut profile = InventoryProfile {
        a0: dot(&a0_coefficients),
        a0_sd: 0.0,
        boundaries: Vec::with_capacity(n),
        surface_extrapolated,
        a0_coefficients,
        slab_sd,
    };
    profile.a0_sd = profile.variance(&profile.a0_coefficients).sqrt();
    for s in slabs {
        let c = coefficients_below(s.depth);
        let a_below = dot(&c);
        let sd = profile.variance(&c).sqrt();
        profile.boundaries.push(InventoryPoint {
            depth: s.depth,
            a_below,
            sd,
            coefficients: c,
        });
    }
    Ok(profile)
}

/// Age at a boundary with remaining inventory `a_below` out of `a0`.
pub fn crs_age(a0: f64, a_below: f64, decay: &DecayConstants) -> f64 {
    (a0 / a_below).ln() / decay.lambda
}

/// Full classical CRS result with its intermediate profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct CrsDating {
    pub chronology: Chronology,
    pub excess: ExcessProfile,
    pub inventory: InventoryProfile,
}

/// Classical CRS with first-order error propagation.
pub fn ci_crs(dataset: &Dataset, cfg: &CrsConfig) -> Result<CrsDating> {
    let excess = excess_profile(dataset, cfg)?;
    let inventory = inventory_profile(&excess)?;
    let lambda = cfg.decay.lambda;

    let mut estimates = Vec::with_capacity(inventory.boundaries.len());
    let mut undated = Vec::new();
    for point in &inventory.boundaries {
        // The chronology stops at the first boundary with no inventory left.
        if !undated.is_empty() || !(point.a_below > 0.0) {
            undated.push(point.depth);
            continue;
        }
        let age = crs_age(inventory.a0, point.a_below, &cfg.decay);
        let rel0 = inventory.a0_sd / inventory.a0;
        let relx = point.sd / point.a_below;
        let mut var = rel0 * rel0 + relx * relx;
        if cfg.shared_sum_covariance {
            let cov = inventory.covariance(&inventory.a0_coefficients, &point.coefficients);
            var -= 2.0 * cov / (inventory.a0 * point.a_below);
        }
        var = var.max(0.0) / (lambda * lambda);
        if cfg.include_lambda_sd {
            var += (age * cfg.decay.lambda_sd / lambda).powi(2);
        }
        let sd = var.sqrt();
        estimates.push(AgeEstimate {
            depth: point.depth,
            age_mean: age,
            lower95: age - Z95 * sd,
            upper95: age + Z95 * sd,
            sd_proxy: sd,
        });
    }
    undated.extend_from_slice(&excess.excluded_depths);
    Ok(CrsDating {
        chronology: Chronology {
            method: Method::CiCrs,
            estimates,
            undated,
        },
        excess,
        inventory,
    })
}

pub fn ci_crs_chronology(dataset: &Dataset, cfg: &CrsConfig) -> Result<Chronology> {
    ci_crs(dataset, cfg).map(|d| d.chronology)
}

#[derive(Debug, Clone, PartialEq)]
pub struct McCrsConfig {
    pub n_draws: usize,
    pub seed: u64,
    /// Multiplier on every reported sd before resampling; 0 disables perturbation.
    pub sd_scale: f64,
    pub crs: CrsConfig,
}

impl Default for McCrsConfig {
    fn default() -> Self {
        Self {
            n_draws: 10_000,
            seed: 0,
            sd_scale: 1.0,
            crs: CrsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McCrsDating {
    pub chronology: Chronology,
    /// `(depth, draws excluded at that depth)` for every candidate depth.
    pub exclusions: Vec<(f64, usize)>,
    pub n_draws: usize,
}

/// Monte Carlo CRS: resample every 210Pb and 226Ra value from its reported
/// normal distribution and rerun the classical pipeline for each draw.
pub fn r_crs(dataset: &Dataset, cfg: &McCrsConfig) -> Result<McCrsDating> {
    if cfg.n_draws < 2 {
        return Err(Error::domain("draws must be >= 2"));
    }
    if !(cfg.sd_scale >= 0.0) {
        return Err(Error::domain("sd scale must be >= 0"));
    }
    let rows = dataset.measurements();
    let candidates: Vec<f64> = rows[..rows.len() - 1].iter().map(|m| m.depth).collect();

    let draws: Vec<Vec<Option<f64>>> = (0..cfg.n_draws as u64)
        .into_par_iter()
        .map(|draw| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(draw);
            let mut pb = Vec::with_capacity(rows.len());
            let mut ra = Vec::with_capacity(rows.len());
            for m in rows {
                let z1: f64 = StandardNormal.sample(&mut rng);
                let z2: f64 = StandardNormal.sample(&mut rng);
                pb.push(m.pb210 + cfg.sd_scale * m.pb210_sd * z1);
                ra.push(m.ra226 + cfg.sd_scale * m.ra226_sd * z2);
            }
            let resampled = dataset.with_activities(&pb, &ra);
            let mut ages = vec![None; candidates.len()];
            if let Ok(chron) = ci_crs_chronology(&resampled, &cfg.crs) {
                for e in &chron.estimates {
                    if let Some(i) = candidates.iter().position(|&d| d == e.depth) {
                        ages[i] = Some(e.age_mean);
                    }
                }
            }
            ages
        })
        .collect();

    let mut estimates = Vec::new();
    let mut undated = Vec::new();
    let mut exclusions = Vec::with_capacity(candidates.len());
    for (i, &depth) in candidates.iter().enumerate() {
        let ages: Vec<f64> = draws.iter().filter_map(|d| d[i]).collect();
        let excluded = cfg.n_draws - ages.len();
        exclusions.push((depth, excluded));
        if 2 * excluded > cfg.n_draws {
            undated.push(depth);
            continue;
        }
        let q = stats::quantiles(&ages, &[0.025, 0.975]);
        estimates.push(AgeEstimate {
            depth,
            age_mean: stats::mean(&ages),
            lower95: q[0],
            upper95: q[1],
            sd_proxy: stats::sd(&ages),
        });
    }
    undated.push(dataset.deepest().depth);
    Ok(McCrsDating {
        chronology: Chronology {
            method: Method::RCrs,
            estimates,
            undated,
        },
        exclusions,
        n_draws: cfg.n_draws,
    })
}

pub fn r_crs_chronology(dataset: &Dataset, cfg: &McCrsConfig) -> Result<Chronology> {
    r_crs(dataset, cfg).map(|d| d.chronology)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Measurement;
    use approx::assert_relative_eq;

    fn row(depth: f64, pb210: f64, ra226: f64) -> Measurement {
        Measurement {
            label: format!("d{depth}"),
            depth,
            density: 0.1,
            pb210,
            pb210_sd: 1.0,
            thickness: 1.0,
            ra226,
            ra226_sd: 0.5,
        }
    }

    fn dataset(rows: Vec<Measurement>) -> Dataset {
        Dataset::new("t", rows).unwrap()
    }

    #[test]
    fn supported_mean_and_standard_error() {
        let d = dataset(vec![row(1.0, 50.0, 9.0), row(2.0, 30.0, 10.0), row(3.0, 10.0, 11.0)]);
        let s = estimate_supported(&d).unwrap();
        assert_relative_eq!(s.mean, 10.0, epsilon = 1e-12);
        assert!((s.sd - 0.577).abs() < 1e-3);
        assert!(!s.degenerate);

        let single = estimate_supported(&dataset(vec![row(1.0, 50.0, 15.0)])).unwrap();
        assert_eq!(single.mean, 15.0);
        assert_eq!(single.sd, 0.0);
        assert!(single.degenerate);
    }

    #[test]
    fn excess_truncates_at_first_nonpositive() {
        let d = dataset(vec![
            row(1.0, 40.0, 10.0),
            row(2.0, 20.0, 10.0),
            row(3.0, 10.0, 10.0),
            row(4.0, 15.0, 10.0),
            row(5.0, 10.0, 10.0),
        ]);
        let e = excess_profile(&d, &CrsConfig::default()).unwrap();
        assert_eq!(e.slabs.len(), 2);
        assert_eq!(e.truncation_depth, Some(3.0));
        assert_eq!(e.excluded_depths, vec![3.0, 4.0, 5.0]);
        assert_relative_eq!(e.slabs[0].excess, 30.0, epsilon = 1e-12);
    }

    #[test]
    fn excess_sd_includes_supported_error() {
        let d = dataset(vec![row(1.0, 40.0, 9.0), row(2.0, 20.0, 11.0), row(3.0, 10.0, 10.0)]);
        let with = excess_profile(&d, &CrsConfig::default()).unwrap();
        let se = with.supported.sd;
        assert_relative_eq!(with.slabs[0].sd, (1.0 + se * se).sqrt(), epsilon = 1e-12);
        let cfg = CrsConfig {
            propagate_supported_sd: false,
            ..CrsConfig::default()
        };
        assert_eq!(excess_profile(&d, &cfg).unwrap().slabs[0].sd, 1.0);
    }

    #[test]
    fn no_datable_excess_is_an_error() {
        let d = dataset(vec![row(1.0, 5.0, 10.0), row(2.0, 20.0, 10.0)]);
        assert!(matches!(excess_profile(&d, &CrsConfig::default()), Err(Error::NoDatableExcess)));
    }

    #[test]
    fn two_equal_slabs_inventory() {
        // Excess 100 Bq/kg on 0.1 g/cm³ × 1 cm gives 100 Bq/m² per slab.
        let d = dataset(vec![row(1.0, 110.0, 10.0), row(2.0, 110.0, 10.0), row(3.0, 10.0, 10.0)]);
        let e = excess_profile(&d, &CrsConfig::default()).unwrap();
        let inv = inventory_profile(&e).unwrap();
        assert_relative_eq!(inv.a0, 200.0, epsilon = 1e-9);
        assert_relative_eq!(inv.boundaries[0].a_below, 100.0, epsilon = 1e-9);
        assert_eq!(inv.boundaries[1].a_below, 0.0);
        assert!(!inv.surface_extrapolated);

        let c = ci_crs_chronology(&d, &CrsConfig::default()).unwrap();
        assert_eq!(c.estimates.len(), 1);
        assert!((c.estimates[0].age_mean - 22.23).abs() < 0.01);
        assert_eq!(c.undated, vec![2.0, 3.0]);
    }

    #[test]
    fn gap_is_filled_by_linear_interpolation() {
        // Areal densities 100 and 40 Bq/m²/cm at midpoints 0.5 and 3.5; the gap
        // [1, 3) integrates the line between them: 2 × 70 = 140.
        let d = dataset(vec![row(1.0, 110.0, 10.0), row(4.0, 50.0, 10.0), row(6.0, 10.0, 10.0)]);
        let e = excess_profile(&d, &CrsConfig::default()).unwrap();
        let inv = inventory_profile(&e).unwrap();
        assert_relative_eq!(inv.a0, 100.0 + 140.0 + 40.0, epsilon = 1e-9);
        assert_relative_eq!(inv.boundaries[0].a_below, 180.0, epsilon = 1e-9);
    }

    #[test]
    fn surface_gap_is_extrapolated_flat() {
        let mut first = row(3.0, 110.0, 10.0);
        first.thickness = 1.0;
        let d = dataset(vec![first, row(4.0, 60.0, 10.0), row(5.0, 10.0, 10.0)]);
        let e = excess_profile(&d, &CrsConfig::default()).unwrap();
        let inv = inventory_profile(&e).unwrap();
        assert!(inv.surface_extrapolated);
        assert_relative_eq!(inv.a0, 2.0 * 100.0 + 100.0 + 50.0, epsilon = 1e-9);
    }

    #[test]
    fn quadrature_error_formula() {
        let lambda = DecayConstants::PB210.lambda;
        let sd = (0.05f64.powi(2) + 0.05f64.powi(2)).sqrt() / lambda;
        assert!((sd - 2.268).abs() < 1e-3);
    }

    #[test]
    fn shared_sum_covariance_shrinks_sd() {
        let d = dataset(vec![
            row(1.0, 200.0, 10.0),
            row(2.0, 150.0, 10.0),
            row(3.0, 100.0, 10.0),
            row(4.0, 10.0, 10.0),
        ]);
        let plain = ci_crs_chronology(&d, &CrsConfig::default()).unwrap();
        let cov = ci_crs_chronology(
            &d,
            &CrsConfig {
                shared_sum_covariance: true,
                ..CrsConfig::default()
            },
        )
        .unwrap();
        for (a, b) in plain.estimates.iter().zip(&cov.estimates) {
            assert_eq!(a.age_mean, b.age_mean);
            assert!(b.sd_proxy < a.sd_proxy);
        }
    }

    #[test]
    fn r_crs_rejects_too_few_draws() {
        let d = dataset(vec![row(1.0, 200.0, 10.0), row(2.0, 150.0, 10.0), row(3.0, 10.0, 10.0)]);
        let cfg = McCrsConfig {
            n_draws: 1,
            ..McCrsConfig::default()
        };
        assert!(matches!(r_crs(&d, &cfg), Err(Error::Domain(_))));
    }
}
