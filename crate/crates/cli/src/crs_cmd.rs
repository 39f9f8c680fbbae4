use std::path::{Path, PathBuf};

use pb210::crs::{ci_crs, r_crs, CrsConfig, McCrsConfig};
use pb210::{load_dataset, Chronology, Dataset};
use serde::{Deserialize, Serialize};

use crate::output::write_rows;
use crate::{with_jobs, Failure};

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Classical error propagation.
    Ci,
    /// Monte Carlo resampling of the measurements.
    Mc,
}

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Input dataset CSV (label, depth, density, pb210, sd_pb210, thickness,
    /// ra226, sd_ra226).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Uncertainty method.
    #[arg(long, value_enum, default_value_t = Variant::Ci)]
    variant: Variant,
    /// Monte Carlo draws (mc only), at least 2.
    #[arg(long, default_value_t = 10_000)]
    draws: usize,
    /// Random seed (mc only).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for the Monte Carlo draws [default: all cores].
    #[arg(long)]
    jobs: Option<usize>,
    /// Leave the standard error of the supported mean out of the excess sd.
    #[arg(long)]
    no_supported_sd: bool,
    /// Account for A(x) being part of A0 when propagating errors.
    #[arg(long)]
    covariance: bool,
    /// Add the decay-constant uncertainty (0.00017 1/yr) to the age sd.
    #[arg(long)]
    lambda_sd: bool,
    /// Output chronology CSV [default: stdout]. Columns: depth (cm), age (yr),
    /// sd (yr), lower95 (yr), upper95 (yr), truncated.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// One row of a chronology table. Undated depths have empty age columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChronologyRow {
    pub depth: f64,
    pub age: Option<f64>,
    pub sd: Option<f64>,
    pub lower95: Option<f64>,
    pub upper95: Option<f64>,
    pub truncated: bool,
}

pub fn chronology_rows(chron: &Chronology) -> Vec<ChronologyRow> {
    let mut rows: Vec<ChronologyRow> = chron
        .estimates
        .iter()
        .map(|e| ChronologyRow {
            depth: e.depth,
            age: Some(e.age_mean),
            sd: Some(e.sd_proxy),
            lower95: Some(e.lower95),
            upper95: Some(e.upper95),
            truncated: false,
        })
        .chain(chron.undated.iter().map(|&depth| ChronologyRow {
            depth,
            age: None,
            sd: None,
            lower95: None,
            upper95: None,
            truncated: true,
        }))
        .collect();
    rows.sort_by(|a, b| a.depth.total_cmp(&b.depth));
    rows
}

pub(crate) fn load_input(input: Option<&Path>) -> Result<Dataset, Failure> {
    let path = input.ok_or_else(|| Failure::usage("--input: an input dataset is required"))?;
    if !path.exists() {
        return Err(Failure::usage(format!("--input: {} does not exist", path.display())));
    }
    load_dataset(path).map_err(|e| Failure::usage(format!("--input: {e}")))
}

pub fn run(args: &Args, invocation: &str) -> Result<(), Failure> {
    if args.variant == Variant::Mc && args.draws < 2 {
        return Err(Failure::usage("--draws: draws must be >= 2"));
    }
    let dataset = load_input(args.input.as_deref())?;
    let crs = CrsConfig {
        propagate_supported_sd: !args.no_supported_sd,
        include_lambda_sd: args.lambda_sd,
        shared_sum_covariance: args.covariance,
        ..CrsConfig::default()
    };
    let chron = match args.variant {
        Variant::Ci => {
            let dating = ci_crs(&dataset, &crs)?;
            eprintln!(
                "supported {:.4} ± {:.4} Bq/kg, inventory {:.2} ± {:.2} Bq/m²",
                dating.excess.supported.mean, dating.excess.supported.sd, dating.inventory.a0, dating.inventory.a0_sd
            );
            dating.chronology
        }
        Variant::Mc => {
            let cfg = McCrsConfig {
                n_draws: args.draws,
                seed: args.seed,
                sd_scale: 1.0,
                crs,
            };
            let dating = with_jobs(args.jobs, || r_crs(&dataset, &cfg))??;
            for (depth, excluded) in dating.exclusions.iter().filter(|(_, n)| *n > 0) {
                eprintln!("{depth} cm: {excluded} of {} draws truncated", dating.n_draws);
            }
            dating.chronology
        }
    };
    write_rows(args.out.as_deref(), invocation, &chronology_rows(&chron))
}
