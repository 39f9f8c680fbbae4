use std::path::PathBuf;

use pb210::data::write_dataset_to;
use pb210::simulator::{published_core, simulate_core, AgeFunction, NoiseConfig, Scenario};
use pb210::DecayConstants;

use crate::output::{provenance, sink};
use crate::{flag_check, Failure};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Built-in scenario 1, 2 or 3, or `custom` with --poly.
    #[arg(long, default_value = "1")]
    scenario: String,
    /// Age-depth polynomial coefficients for `custom`, constant term first
    /// (yr, yr/cm, yr/cm², ...).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    poly: Vec<f64>,
    /// Amplitude of the sinusoidal age term for `custom`, yr.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    sin_amplitude: f64,
    /// Angular frequency of the sinusoidal age term for `custom`, rad/cm.
    #[arg(long, default_value_t = 0.0)]
    sin_frequency: f64,
    /// 210Pb supply, Bq/(m²·yr). Required for `custom`.
    #[arg(long)]
    phi: Option<f64>,
    /// Supported 210Pb level, Bq/kg. Required for `custom`.
    #[arg(long)]
    supported: Option<f64>,
    /// Slab thickness, cm.
    #[arg(long, default_value_t = 1.0)]
    slab: f64,
    /// Core length, cm; a multiple of --slab.
    #[arg(long, default_value_t = 30.0)]
    max_depth: f64,
    /// Disable every noise stage (reported sds still follow the sd rule).
    #[arg(long)]
    noiseless: bool,
    /// Variance of the scatter around the true activity, (Bq/kg)².
    #[arg(long)]
    scatter_var: Option<f64>,
    /// Probability that a value is shifted as an outlier (0-1).
    #[arg(long)]
    p_out: Option<f64>,
    /// Half-width of the uniform outlier shift, Bq/kg [default: 3 x scatter sd].
    #[arg(long)]
    x_shift: Option<f64>,
    /// Floor of the reported sd, Bq/kg.
    #[arg(long)]
    sigma_min: Option<f64>,
    /// Reported sd as a fraction of the activity (dimensionless).
    #[arg(long)]
    sd_factor: Option<f64>,
    /// Write the bundled published realisation of the scenario instead of
    /// simulating (noise flags and --seed are ignored).
    #[arg(long)]
    published: bool,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dataset CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

fn scenario(args: &Args) -> Result<Scenario, Failure> {
    let mut s = match args.scenario.as_str() {
        "custom" => {
            if args.poly.is_empty() {
                return Err(Failure::usage("--poly: required with --scenario custom"));
            }
            let (Some(phi), Some(supported)) = (args.phi, args.supported) else {
                return Err(Failure::usage("--phi and --supported are required with --scenario custom"));
            };
            let age_fn = AgeFunction {
                poly: args.poly.clone(),
                sin_amplitude: args.sin_amplitude,
                sin_frequency: args.sin_frequency,
            };
            Scenario::custom(age_fn, phi, supported)
        }
        other => {
            let n: u8 = other
                .parse()
                .map_err(|_| Failure::usage(format!("--scenario: expected 1, 2, 3 or custom, got '{other}'")))?;
            if !args.poly.is_empty() || args.sin_amplitude != 0.0 {
                return Err(Failure::usage("--poly and --sin-amplitude only apply to --scenario custom"));
            }
            flag_check("--scenario", Scenario::builtin(n))?
        }
    };
    if let Some(phi) = args.phi {
        s.phi = phi;
    }
    if let Some(supported) = args.supported {
        s.supported = supported;
    }
    if !(s.phi > 0.0) {
        return Err(Failure::usage("--phi: must be > 0"));
    }
    if !(s.supported > 0.0) {
        return Err(Failure::usage("--supported: must be > 0"));
    }
    flag_check("--scenario", s.validate(args.max_depth))?;
    Ok(s)
}

fn noise(args: &Args) -> Result<NoiseConfig, Failure> {
    let mut cfg = if args.noiseless {
        NoiseConfig::noiseless()
    } else {
        NoiseConfig::default()
    };
    if let Some(v) = args.scatter_var {
        cfg.scatter_var = v;
        cfg.x_shift = 3.0 * v.max(0.0).sqrt();
    }
    if let Some(v) = args.p_out {
        cfg.p_out = v;
    }
    if let Some(v) = args.x_shift {
        cfg.x_shift = v;
    }
    if let Some(v) = args.sigma_min {
        cfg.sigma_min = v;
    }
    if let Some(v) = args.sd_factor {
        cfg.reported_sd_factor = v;
    }
    cfg.seed = args.seed;
    flag_check("noise flags", cfg.validate())?;
    Ok(cfg)
}

pub fn run(args: &Args, invocation: &str) -> Result<(), Failure> {
    let dataset = if args.published {
        let n: u8 = args
            .scenario
            .parse()
            .map_err(|_| Failure::usage("--published: needs --scenario 1, 2 or 3"))?;
        flag_check("--scenario", published_core(n))?
    } else {
        if !(args.slab > 0.0) {
            return Err(Failure::usage("--slab: must be > 0"));
        }
        let slabs = args.max_depth / args.slab;
        if !(args.max_depth > 0.0) || (slabs - slabs.round()).abs() > 1e-9 * slabs.max(1.0) {
            return Err(Failure::usage("--max-depth: must be a positive multiple of --slab"));
        }
        let s = scenario(args)?;
        let cfg = noise(args)?;
        simulate_core(&s, &cfg, args.slab, args.max_depth, &DecayConstants::PB210)?
    };
    let out = sink(args.out.as_deref())?;
    write_dataset_to(&dataset, out, Some(&provenance(invocation)))?;
    Ok(())
}
