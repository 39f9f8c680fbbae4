use std::path::PathBuf;

use pb210::evaluation::{aggregate_summary, run_experiment, Core, ExperimentPlan};
use pb210::plum::McmcConfig;
use pb210::simulator::{published_core, simulate_core, NoiseConfig, Scenario, PERCENT_GRID};
use pb210::{DecayConstants, Method};

use crate::output::write_rows;
use crate::{with_jobs, Failure};

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    /// The bundled published realisation of each scenario.
    Published,
    /// A fresh noisy realisation simulated from --seed.
    Simulated,
}

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Subsamples per information percentage (the 100% level runs once).
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    /// Information percentages, % of slabs kept (10, 15, ..., 95, 100)
    /// [default: all].
    #[arg(long, value_delimiter = ',')]
    percents: Vec<u32>,
    /// Scenarios to use as base cores.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    scenarios: Vec<u8>,
    /// Dating methods: ci-crs, r-crs, plum.
    #[arg(long, value_delimiter = ',', default_value = "ci-crs,plum")]
    engines: Vec<String>,
    /// Where the base cores come from.
    #[arg(long, value_enum, default_value_t = Source::Published)]
    source: Source,
    /// Master random seed; every subsample and engine seed derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads [default: all cores].
    #[arg(long)]
    jobs: Option<usize>,
    /// Monte Carlo draws per R-CRS run.
    #[arg(long, default_value_t = 1000)]
    draws: usize,
    /// MCMC sweeps per Bayesian run, burn-in included.
    #[arg(long, default_value_t = 20_000)]
    iterations: usize,
    /// MCMC sweeps discarded per Bayesian run.
    #[arg(long, default_value_t = 5_000)]
    burn_in: usize,
    /// Keep every n-th MCMC sweep after burn-in.
    #[arg(long, default_value_t = 10)]
    thin: usize,
    /// Long-format records CSV: scenario, percent, replicate, method,
    /// depth (cm), true_age (yr), age_mean (yr), offset (yr),
    /// signed_offset (yr), interval_length (yr), normalized_offset.
    #[arg(long, default_value = "records.csv")]
    records: PathBuf,
    /// Summary CSV: per scenario, method and percentage, plus pooled rows
    /// marked `all`.
    #[arg(long, default_value = "summary.csv")]
    summary: PathBuf,
    /// Optional per-run outcome CSV, including skipped runs and reasons.
    #[arg(long)]
    runs: Option<PathBuf>,
}

fn plan(args: &Args) -> Result<ExperimentPlan, Failure> {
    if args.replicates < 1 {
        return Err(Failure::usage("--replicates: must be >= 1"));
    }
    let percents = if args.percents.is_empty() {
        PERCENT_GRID.to_vec()
    } else {
        args.percents.clone()
    };
    if let Some(p) = percents.iter().find(|p| !PERCENT_GRID.contains(p)) {
        return Err(Failure::usage(format!("--percents: {p} is not one of 10, 15, ..., 95, 100")));
    }
    let engines = args
        .engines
        .iter()
        .map(|e| e.parse::<Method>().map_err(|err| Failure::usage(format!("--engines: {err}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if engines.contains(&Method::RCrs) && args.draws < 2 {
        return Err(Failure::usage("--draws: draws must be >= 2"));
    }
    let cores = args
        .scenarios
        .iter()
        .map(|&n| {
            let scenario = Scenario::builtin(n).map_err(|e| Failure::usage(format!("--scenarios: {e}")))?;
            let dataset = match args.source {
                Source::Published => published_core(n)?,
                Source::Simulated => simulate_core(
                    &scenario,
                    &NoiseConfig::default().with_seed(args.seed.wrapping_add(u64::from(n))),
                    1.0,
                    30.0,
                    &DecayConstants::PB210,
                )?,
            };
            Ok(Core { scenario, dataset })
        })
        .collect::<Result<Vec<_>, Failure>>()?;

    let mut plan = ExperimentPlan::new(cores, args.seed);
    plan.percents = percents;
    plan.replicates = args.replicates;
    plan.engines = engines;
    plan.mc_draws = args.draws;
    plan.mcmc = McmcConfig {
        iterations: args.iterations,
        burn_in: args.burn_in,
        thinning: args.thin,
        ..McmcConfig::default()
    };
    plan.validate().map_err(|e| Failure::usage(e.to_string()))?;
    Ok(plan)
}

pub fn run(args: &Args, invocation: &str) -> Result<(), Failure> {
    let plan = plan(args)?;
    let result = with_jobs(args.jobs, || run_experiment(&plan))??;

    for &method in &plan.engines {
        let done = result
            .runs
            .iter()
            .filter(|r| r.method == method && r.skipped.is_empty())
            .count();
        eprintln!("{method}: {done} of {} runs completed", plan.attempted_runs());
    }
    write_rows(Some(&args.records), invocation, &result.records)?;
    if result.records.is_empty() {
        return Err(Failure::runtime("every run was skipped; no summary to write"));
    }
    write_rows(Some(&args.summary), invocation, &aggregate_summary(&result.records)?)?;
    if let Some(path) = &args.runs {
        write_rows(Some(path), invocation, &result.runs)?;
    }
    Ok(())
}
