use std::path::PathBuf;

use pb210::evaluation::{aggregate_summary, ComparisonRecord};
use pb210::simulator::{true_age, Scenario};
use pb210::Method;
use serde::Serialize;

use crate::crs_cmd::ChronologyRow;
use crate::output::{read_rows, write_rows};
use crate::Failure;

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    /// Chronology CSV in; depth (cm), mean, lower95, upper95, truth (yr) out.
    Agedepth,
    /// Experiment records in; percent, method, mean_offset (yr),
    /// mean_interval (yr), mean_normalized out, pooled over scenarios.
    Accpre,
    /// Experiment records in; depth (cm), percent, method, normalized_offset out.
    DepthNormalized,
}

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Table to produce.
    #[arg(long, value_enum)]
    kind: Kind,
    /// Chronology CSV (agedepth) or experiment records CSV (other kinds).
    #[arg(long)]
    input: Option<PathBuf>,
    /// agedepth: scenario 1, 2 or 3 supplying the truth column. Other kinds:
    /// keep only this scenario's records.
    #[arg(long)]
    scenario: Option<u8>,
    /// Output CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct AgeDepthRow {
    depth: f64,
    mean: f64,
    lower95: f64,
    upper95: f64,
    truth: Option<f64>,
}

#[derive(Serialize)]
struct AccPreRow {
    percent: u32,
    method: Method,
    mean_offset: f64,
    mean_interval: f64,
    mean_normalized: f64,
}

#[derive(Serialize)]
struct DepthNormalizedRow {
    depth: f64,
    percent: u32,
    method: Method,
    normalized_offset: f64,
}

fn records(args: &Args, input: &std::path::Path) -> Result<Vec<ComparisonRecord>, Failure> {
    let mut records: Vec<ComparisonRecord> = read_rows(input, "--input")?;
    if let Some(n) = args.scenario {
        let id = n.to_string();
        records.retain(|r| r.scenario == id);
    }
    if records.is_empty() {
        return Err(Failure::usage("--input: no experiment records to plot"));
    }
    Ok(records)
}

pub fn run(args: &Args, invocation: &str) -> Result<(), Failure> {
    let input = args
        .input
        .as_deref()
        .ok_or_else(|| Failure::usage("--input: an input table is required"))?;
    let out = args.out.as_deref();
    match args.kind {
        Kind::Agedepth => {
            let scenario = args
                .scenario
                .map(Scenario::builtin)
                .transpose()
                .map_err(|e| Failure::usage(format!("--scenario: {e}")))?;
            let rows: Vec<ChronologyRow> = read_rows(input, "--input")?;
            let rows: Vec<AgeDepthRow> = rows
                .into_iter()
                .filter_map(|r| {
                    Some(AgeDepthRow {
                        depth: r.depth,
                        mean: r.age?,
                        lower95: r.lower95?,
                        upper95: r.upper95?,
                        truth: scenario.as_ref().map(|s| true_age(s, r.depth)),
                    })
                })
                .collect();
            if rows.is_empty() {
                return Err(Failure::usage("--input: chronology has no dated depths"));
            }
            write_rows(out, invocation, &rows)
        }
        Kind::Accpre => {
            let summary = aggregate_summary(&records(args, input)?)?;
            let rows: Vec<AccPreRow> = summary
                .iter()
                .filter(|r| r.scenario == "all")
                .filter_map(|r| {
                    Some(AccPreRow {
                        percent: r.percent.parse().ok()?,
                        method: r.method,
                        mean_offset: r.mean_offset,
                        mean_interval: r.mean_interval,
                        mean_normalized: r.mean_normalized,
                    })
                })
                .collect();
            write_rows(out, invocation, &rows)
        }
        Kind::DepthNormalized => {
            let rows: Vec<DepthNormalizedRow> = records(args, input)?
                .iter()
                .map(|r| DepthNormalizedRow {
                    depth: r.depth,
                    percent: r.percent,
                    method: r.method,
                    normalized_offset: r.normalized_offset,
                })
                .collect();
            write_rows(out, invocation, &rows)
        }
    }
}
