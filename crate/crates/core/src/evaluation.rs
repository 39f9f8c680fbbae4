//! Accuracy and precision of chronologies against a known age-depth function,
//! and the subsampling experiment that compares the dating methods.
//!
//! Every run subsamples a base core at a given information percentage, dates
//! it with each engine and scores the result depth by depth. The CRS variants
//! are scored at their datable slab boundaries, the Bayesian model at every
//! section boundary.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crs::{ci_crs_chronology, r_crs_chronology, CrsConfig, McCrsConfig};
use crate::data::{Chronology, Dataset, DecayConstants, Method};
use crate::error::{Error, Result};
use crate::plum::{sample_posterior, summarize_chronology, McmcConfig, PlumPriors, SectionGrid};
use crate::simulator::{subsample, true_age, Scenario, PERCENT_GRID};
use crate::stats;

/// One depth of one dated run compared with the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub scenario: String,
    pub percent: u32,
    pub replicate: usize,
    pub method: Method,
    pub depth: f64,
    pub true_age: f64,
    pub age_mean: f64,
    /// |estimate − truth|, yr
    pub offset: f64,
    /// estimate − truth, yr
    pub signed_offset: f64,
    /// Length of the 95% interval, yr.
    pub interval_length: f64,
    /// offset / sd proxy; infinite when the sd proxy is zero.
    pub normalized_offset: f64,
}

/// Scores every estimate of a chronology against the scenario's true ages.
pub fn score_chronology(
    chronology: &Chronology,
    scenario: &Scenario,
    percent: u32,
    replicate: usize,
) -> Result<Vec<ComparisonRecord>> {
    chronology
        .estimates
        .iter()
        .map(|e| {
            if !(e.depth >= 0.0) {
                return Err(Error::domain(format!("cannot score negative depth {}", e.depth)));
            }
            let truth = true_age(scenario, e.depth);
            let signed = e.age_mean - truth;
            let offset = signed.abs();
            let normalized = if e.sd_proxy > 0.0 {
                offset / e.sd_proxy
            } else if offset == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            Ok(ComparisonRecord {
                scenario: scenario.id.to_string(),
                percent,
                replicate,
                method: chronology.method,
                depth: e.depth,
                true_age: truth,
                age_mean: e.age_mean,
                offset,
                signed_offset: signed,
                interval_length: e.interval_length(),
                normalized_offset: normalized,
            })
        })
        .collect()
}

/// A base core with the scenario that generated it.
#[derive(Debug, Clone)]
pub struct Core {
    pub scenario: Scenario,
    pub dataset: Dataset,
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub cores: Vec<Core>,
    pub percents: Vec<u32>,
    pub replicates: usize,
    pub master_seed: u64,
    pub engines: Vec<Method>,
    pub crs: CrsConfig,
    /// Draws per R-CRS run; the seed is derived per run.
    pub mc_draws: usize,
    /// Sampler settings for the Bayesian runs; the seed is derived per run.
    pub mcmc: McmcConfig,
    /// Prior for the Bayesian runs. `None` uses the defaults centred on each
    /// subsample's mean 226Ra.
    pub priors: Option<PlumPriors>,
    pub decay: DecayConstants,
}

impl ExperimentPlan {
    /// Full-grid plan (10–95% plus 100%, 100 replicates) with CI-CRS and the
    /// Bayesian model.
    pub fn new(cores: Vec<Core>, master_seed: u64) -> Self {
        Self {
            cores,
            percents: PERCENT_GRID.to_vec(),
            replicates: 100,
            master_seed,
            engines: vec![Method::CiCrs, Method::Plum],
            crs: CrsConfig::default(),
            mc_draws: 1000,
            mcmc: McmcConfig::default(),
            priors: None,
            decay: DecayConstants::PB210,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.cores.is_empty() {
            problems.push("plan has no cores".to_string());
        }
        if self.percents.is_empty() {
            problems.push("plan has no information percentages".to_string());
        }
        for p in &self.percents {
            if !PERCENT_GRID.contains(p) {
                problems.push(format!("percentage {p} is not on the grid 10, 15, ..., 95, 100"));
            }
        }
        if self.replicates < 1 {
            problems.push("replicates must be >= 1".to_string());
        }
        if self.engines.is_empty() {
            problems.push("plan has no engines".to_string());
        }
        if self.engines.contains(&Method::RCrs) && self.mc_draws < 2 {
            problems.push("draws must be >= 2".to_string());
        }
        if let Err(Error::Validation(v)) = self.mcmc.validate() {
            problems.extend(v);
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Runs attempted per engine. A 100% level is a single run because every
    /// replicate would see the same data.
    pub fn attempted_runs(&self) -> usize {
        let per_core: usize = self
            .percents
            .iter()
            .map(|&p| if p == 100 { 1 } else { self.replicates })
            .sum();
        per_core * self.cores.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub scenario: String,
    pub percent: u32,
    pub replicate: usize,
    pub method: Method,
    /// Number of scored depths; zero when skipped.
    pub depths: usize,
    /// Empty on success, otherwise the reason the run was skipped.
    pub skipped: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub records: Vec<ComparisonRecord>,
    pub runs: Vec<RunOutcome>,
}

#[derive(Debug, Clone, Copy)]
struct Job {
    core: usize,
    percent: u32,
    replicate: usize,
}

fn job_rng(master: u64, job: &Job) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((job.core as u64) << 48) | ((job.percent as u64) << 32) | job.replicate as u64);
    rng
}

fn run_engine(plan: &ExperimentPlan, method: Method, data: &Dataset, seed: u64) -> Result<Chronology> {
    match method {
        Method::CiCrs => ci_crs_chronology(data, &plan.crs),
        Method::RCrs => r_crs_chronology(
            data,
            &McCrsConfig {
                n_draws: plan.mc_draws,
                seed,
                sd_scale: 1.0,
                crs: plan.crs.clone(),
            },
        ),
        Method::Plum => {
            let priors = plan
                .priors
                .clone()
                .unwrap_or_else(|| PlumPriors::for_dataset(data));
            let mcmc = McmcConfig {
                seed,
                ..plan.mcmc.clone()
            };
            let draws = sample_posterior(data, &priors, &mcmc, &plan.decay)?;
            let grid = SectionGrid::covering(data.deepest().depth, 1.0);
            summarize_chronology(&draws, &grid.boundaries())
        }
    }
}

fn run_job(plan: &ExperimentPlan, job: Job) -> (Vec<ComparisonRecord>, Vec<RunOutcome>) {
    let core = &plan.cores[job.core];
    let mut rng = job_rng(plan.master_seed, &job);
    // One seed per engine, drawn in a fixed order so that enabling or
    // disabling an engine leaves the others unchanged.
    let seeds: BTreeMap<Method, u64> = Method::ALL.iter().map(|&m| (m, rng.random())).collect();
    let sub = subsample(&core.dataset, job.percent, &mut rng);

    let mut records = Vec::new();
    let mut runs = Vec::new();
    for &method in &plan.engines {
        let outcome = sub
            .as_ref()
            .map_err(|e| Error::domain(e.to_string()))
            .and_then(|data| run_engine(plan, method, data, seeds[&method]))
            .and_then(|chron| score_chronology(&chron, &core.scenario, job.percent, job.replicate));
        let (depths, skipped) = match outcome {
            Ok(r) if r.is_empty() => (0, "no datable depths".to_string()),
            Ok(r) => {
                let n = r.len();
                records.extend(r);
                (n, String::new())
            }
            Err(e) => (0, e.to_string()),
        };
        runs.push(RunOutcome {
            scenario: core.scenario.id.to_string(),
            percent: job.percent,
            replicate: job.replicate,
            method,
            depths,
            skipped,
        });
    }
    (records, runs)
}

/// Runs every (core, percentage, replicate) job in parallel. The output order
/// and content depend only on the plan.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentResult> {
    plan.validate()?;
    let mut jobs = Vec::new();
    for core in 0..plan.cores.len() {
        for &percent in &plan.percents {
            let reps = if percent == 100 { 1 } else { plan.replicates };
            for replicate in 0..reps {
                jobs.push(Job {
                    core,
                    percent,
                    replicate,
                });
            }
        }
    }
    let results: Vec<_> = jobs.par_iter().map(|&job| run_job(plan, job)).collect();
    let mut out = ExperimentResult {
        records: Vec::new(),
        runs: Vec::new(),
    };
    for (records, runs) in results {
        out.records.extend(records);
        out.runs.extend(runs);
    }
    Ok(out)
}

/// Grouped means and coverage. `scenario` and `percent` are `"all"` for
/// pooled rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub method: Method,
    pub percent: String,
    pub runs: usize,
    pub records: usize,
    /// Records with an infinite normalized offset, excluded from the normalized mean.
    pub infinite_normalized: usize,
    pub mean_offset: f64,
    pub mean_interval: f64,
    pub mean_normalized: f64,
    /// Fraction of runs whose mean normalized offset is at most 1.
    pub within_1sd: f64,
    /// Fraction of runs whose mean normalized offset is at most 2.
    pub within_2sd: f64,
}

#[derive(Default)]
struct Acc {
    offsets: Vec<f64>,
    intervals: Vec<f64>,
    normalized: Vec<f64>,
    infinite: usize,
    run_means: Vec<f64>,
}

type RunKey = (String, u32, usize, Method);

/// Means of offset, interval length and normalized offset per
/// (scenario, method, percentage), pooled over scenarios and over
/// percentages, plus the fraction of runs whose mean normalized offset is
/// within 1 and 2.
///
/// Means pool records; coverage is computed on per-run means. Order of the
/// input records does not matter.
pub fn aggregate_summary(records: &[ComparisonRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::domain("no records to summarize"));
    }
    let mut by_run: BTreeMap<RunKey, Vec<&ComparisonRecord>> = BTreeMap::new();
    for r in records {
        by_run
            .entry((r.scenario.clone(), r.percent, r.replicate, r.method))
            .or_default()
            .push(r);
    }

    let all = || "all".to_string();
    let mut groups: BTreeMap<(String, Method, String), Acc> = BTreeMap::new();
    for ((scenario, percent, _, method), recs) in &by_run {
        let mut finite: Vec<f64> = recs
            .iter()
            .map(|r| r.normalized_offset)
            .filter(|x| x.is_finite())
            .collect();
        finite.sort_by(f64::total_cmp);
        let run_mean = if finite.is_empty() {
            None
        } else {
            Some(stats::mean(&finite))
        };
        let keys = [
            (scenario.clone(), *method, percent.to_string()),
            (scenario.clone(), *method, all()),
            (all(), *method, percent.to_string()),
            (all(), *method, all()),
        ];
        for key in keys {
            let acc = groups.entry(key).or_default();
            for r in recs {
                acc.offsets.push(r.offset);
                acc.intervals.push(r.interval_length);
                if r.normalized_offset.is_finite() {
                    acc.normalized.push(r.normalized_offset);
                } else {
                    acc.infinite += 1;
                }
            }
            if let Some(m) = run_mean {
                acc.run_means.push(m);
            }
        }
    }

    let mean_sorted = |xs: &mut Vec<f64>| -> f64 {
        xs.sort_by(f64::total_cmp);
        stats::mean(xs)
    };
    let frac = |xs: &[f64], t: f64| -> f64 {
        if xs.is_empty() {
            f64::NAN
        } else {
            xs.iter().filter(|x| **x <= t).count() as f64 / xs.len() as f64
        }
    };
    let mut rows: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((scenario, method, percent), mut acc)| SummaryRow {
            scenario,
            method,
            percent,
            runs: acc.run_means.len(),
            records: acc.offsets.len(),
            infinite_normalized: acc.infinite,
            mean_offset: mean_sorted(&mut acc.offsets),
            mean_interval: mean_sorted(&mut acc.intervals),
            mean_normalized: mean_sorted(&mut acc.normalized),
            within_1sd: frac(&acc.run_means, 1.0),
            within_2sd: frac(&acc.run_means, 2.0),
        })
        .collect();
    // Numeric percentages before "all", scenarios likewise.
    let order = |s: &str| s.parse::<u32>().unwrap_or(u32::MAX);
    rows.sort_by(|a, b| {
        (a.scenario == "all", &a.scenario, a.method, order(&a.percent)).cmp(&(
            b.scenario == "all",
            &b.scenario,
            b.method,
            order(&b.percent),
        ))
    });
    Ok(rows)
}

/// Pooled row for one method across every scenario and percentage.
pub fn overall(rows: &[SummaryRow], method: Method) -> Option<&SummaryRow> {
    rows.iter()
        .find(|r| r.scenario == "all" && r.percent == "all" && r.method == method)
}

/// Pooled row for one method at one percentage.
pub fn at_percent(rows: &[SummaryRow], method: Method, percent: u32) -> Option<&SummaryRow> {
    let p = percent.to_string();
    rows.iter()
        .find(|r| r.scenario == "all" && r.percent == p && r.method == method)
}
