use std::path::PathBuf;

use pb210::plum::{default_initial_state, run_chain, summarize_chronology, McmcConfig, PlumModel, PlumPriors};
use pb210::{stats, DecayConstants};

use crate::crs_cmd::{chronology_rows, load_input};
use crate::output::{write_records, write_rows};
use crate::{flag_check, Failure};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Input dataset CSV (label, depth, density, pb210, sd_pb210, thickness,
    /// ra226, sd_ra226).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Shape of the Gamma prior on accumulation rates (dimensionless).
    #[arg(long, default_value_t = 1.5)]
    acc_shape: f64,
    /// Mean of the Gamma prior on accumulation rates, yr/cm.
    #[arg(long, default_value_t = 10.0)]
    acc_mean: f64,
    /// Strength of the Beta prior on the memory (dimensionless).
    #[arg(long, default_value_t = 10.0)]
    mem_strength: f64,
    /// Mean of the Beta prior on the memory (0-1).
    #[arg(long, default_value_t = 0.5)]
    mem_mean: f64,
    /// Shape of the Gamma prior on the 210Pb supply (dimensionless).
    #[arg(long, default_value_t = 2.0)]
    phi_shape: f64,
    /// Mean of the Gamma prior on the 210Pb supply, Bq/(m²·yr).
    #[arg(long, default_value_t = 50.0)]
    phi_mean: f64,
    /// Shape of the Gamma prior on the supported level (dimensionless).
    #[arg(long, default_value_t = 2.0)]
    s_shape: f64,
    /// Mean of the Gamma prior on the supported level, Bq/kg
    /// [default: mean of the ra226 column].
    #[arg(long)]
    s_mean: Option<f64>,
    /// Section thickness of the age-depth model, cm.
    #[arg(long, default_value_t = 1.0)]
    section: f64,
    /// MCMC sweeps including burn-in.
    #[arg(long, default_value_t = 20_000)]
    iterations: usize,
    /// Sweeps discarded before keeping draws.
    #[arg(long, default_value_t = 5_000)]
    burn_in: usize,
    /// Keep every n-th sweep after burn-in.
    #[arg(long, default_value_t = 10)]
    thin: usize,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output chronology CSV at every section boundary [default: stdout].
    /// Columns: depth (cm), age (yr), sd (yr, 95% width / 4), lower95 (yr),
    /// upper95 (yr), truncated.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the retained draws: w, phi (Bq/(m²·yr)), supported (Bq/kg),
    /// alpha_1..alpha_K (yr/cm), log_post.
    #[arg(long)]
    draws_out: Option<PathBuf>,
}

fn describe(name: &str, unit: &str, values: &[f64]) {
    let q = stats::quantiles(values, &[0.025, 0.975]);
    eprintln!("{name}: mean {:.4} (95% {:.4} to {:.4}) {unit}", stats::mean(values), q[0], q[1]);
}

pub fn run(args: &Args, invocation: &str) -> Result<(), Failure> {
    if !(args.section > 0.0) {
        return Err(Failure::usage("--section: must be > 0"));
    }
    let mcmc = McmcConfig {
        iterations: args.iterations,
        burn_in: args.burn_in,
        thinning: args.thin,
        seed: args.seed,
        ..McmcConfig::default()
    };
    flag_check("--iterations/--burn-in/--thin", mcmc.validate())?;
    let dataset = load_input(args.input.as_deref())?;
    let priors = PlumPriors {
        acc_shape: args.acc_shape,
        acc_mean: args.acc_mean,
        mem_mean: args.mem_mean,
        mem_strength: args.mem_strength,
        phi_shape: args.phi_shape,
        phi_mean: args.phi_mean,
        s_shape: args.s_shape,
        s_mean: args
            .s_mean
            .unwrap_or_else(|| PlumPriors::for_dataset(&dataset).s_mean),
    };
    flag_check("prior flags", priors.validate())?;

    let decay = DecayConstants::PB210;
    let model = PlumModel::new(&dataset, priors, args.section, &decay)?;
    let draws = run_chain(&model, &default_initial_state(&model), &mcmc)?;
    let chron = summarize_chronology(&draws, &model.grid.boundaries())?;

    describe("phi", "Bq/(m²·yr)", &draws.phi());
    describe("supported", "Bq/kg", &draws.supported());
    describe("memory", "", &draws.memory());
    for w in &draws.warnings {
        eprintln!("warning: {w}");
    }

    write_rows(args.out.as_deref(), invocation, &chronology_rows(&chron))?;
    if let Some(path) = &args.draws_out {
        let k = model.grid.count;
        let header: Vec<String> = ["w", "phi", "supported"]
            .iter()
            .map(|s| s.to_string())
            .chain((1..=k).map(|j| format!("alpha_{j}")))
            .chain(std::iter::once("log_post".to_string()))
            .collect();
        let rows = draws.draws.iter().zip(&draws.log_posterior).map(|(p, lp)| {
            [p.memory, p.phi, p.supported]
                .iter()
                .chain(&p.alphas)
                .chain(std::iter::once(lp))
                .map(|x| x.to_string())
                .collect()
        });
        write_records(Some(path), invocation, &header, rows)?;
    }
    Ok(())
}
