//! Adaptive random-walk Metropolis-within-Gibbs sampler for the Bayesian
//! age-depth model.
//!
//! The chain lives on the prior's natural coordinates: the autoregressive
//! innovations of the section rates, the memory, the supply and the supported
//! level. Each sweep runs these blocks in turn:
//!
//! * a log-scale random walk on each innovation,
//! * an additive exchange between adjacent section rates (moves a slab
//!   boundary while keeping every deeper age fixed),
//! * a logit-scale walk on the memory holding the innovations fixed, and a
//!   second one holding the section rates fixed,
//! * log-scale walks on the supply and the supported level.
//!
//! Proposal scales adapt towards an acceptance rate of 0.44 during burn-in
//! and are frozen afterwards.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::model::{
    alphas_from_innovations, innovations, log_prior_innovations, Likelihood, PlumParams, PlumPriors,
};
use crate::data::{Dataset, DecayConstants};
use crate::error::{Error, Result};
use crate::stats;

const TARGET_ACCEPTANCE: f64 = 0.44;
const MAX_LOG_SCALE: f64 = 5.0;
const MIN_LOG_SCALE: f64 = -12.0;

#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    /// Total sweeps, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    /// Effective sample sizes below this attach a convergence warning.
    pub ess_floor: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 20_000,
            burn_in: 5_000,
            thinning: 10,
            seed: 0,
            ess_floor: 100.0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.iterations <= self.burn_in {
            problems.push(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            ));
        }
        if self.thinning < 1 {
            problems.push("thinning must be >= 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thinning
    }
}

/// Section grid of the age-depth model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionGrid {
    /// cm
    pub width: f64,
    pub count: usize,
}

impl SectionGrid {
    /// Depth every chronology reaches, cm.
    pub const MIN_DEPTH: f64 = 30.0;

    /// Sections of `width` cm covering `[0, max(30 cm, deepest))`.
    pub fn covering(deepest: f64, width: f64) -> Self {
        let depth = deepest.max(Self::MIN_DEPTH);
        Self {
            width,
            count: (depth / width - 1e-9).ceil().max(1.0) as usize,
        }
    }

    pub fn depth(&self) -> f64 {
        self.width * self.count as f64
    }

    /// Section boundaries below the surface: `width, 2·width, …, depth`.
    pub fn boundaries(&self) -> Vec<f64> {
        (1..=self.count).map(|i| i as f64 * self.width).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    Innovations,
    Exchange,
    Memory,
    MemoryRatesFixed,
    Supply,
    Supported,
}

impl Block {
    pub const ALL: [Block; 6] = [
        Block::Innovations,
        Block::Exchange,
        Block::Memory,
        Block::MemoryRatesFixed,
        Block::Supply,
        Block::Supported,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Block::Innovations => "innovations",
            Block::Exchange => "exchange",
            Block::Memory => "memory",
            Block::MemoryRatesFixed => "memory-rates-fixed",
            Block::Supply => "phi",
            Block::Supported => "supported",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockStats {
    pub block: Block,
    pub proposed: u64,
    pub accepted: u64,
}

impl BlockStats {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Retained posterior draws with sampler diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub draws: Vec<PlumParams>,
    pub log_posterior: Vec<f64>,
    /// Post-burn-in acceptance per block.
    pub acceptance: Vec<BlockStats>,
    /// Effective sample size per parameter block (`phi`, `supported`,
    /// `memory`, and the smallest over `alphas`).
    pub ess: Vec<(String, f64)>,
    pub warnings: Vec<String>,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn phi(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.phi).collect()
    }

    pub fn supported(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.supported).collect()
    }

    pub fn memory(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.memory).collect()
    }

    pub fn ess_of(&self, name: &str) -> Option<f64> {
        self.ess.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// Target of the chain. Without a likelihood the chain samples the prior.
#[derive(Debug, Clone)]
pub struct PlumModel {
    pub priors: PlumPriors,
    pub grid: SectionGrid,
    likelihood: Option<Likelihood>,
}

impl PlumModel {
    pub fn new(dataset: &Dataset, priors: PlumPriors, section_width: f64, decay: &DecayConstants) -> Result<Self> {
        priors.validate()?;
        if !(section_width > 0.0) {
            return Err(Error::domain("section width must be > 0"));
        }
        let likelihood = Likelihood::new(dataset, decay);
        Ok(Self {
            grid: SectionGrid::covering(likelihood.deepest(), section_width),
            priors,
            likelihood: Some(likelihood),
        })
    }

    pub fn prior_only(priors: PlumPriors, grid: SectionGrid) -> Result<Self> {
        priors.validate()?;
        Ok(Self {
            priors,
            grid,
            likelihood: None,
        })
    }

    fn log_likelihood(&self, state: &State) -> f64 {
        match &self.likelihood {
            Some(l) => l.eval(&state.alphas, self.grid.width, &state.ages, state.phi, state.s),
            None => 0.0,
        }
    }

    fn log_prior(&self, state: &State) -> f64 {
        log_prior_innovations(&state.g, state.w, state.phi, state.s, &self.priors)
    }
}

#[derive(Debug, Clone)]
struct State {
    g: Vec<f64>,
    w: f64,
    phi: f64,
    s: f64,
    alphas: Vec<f64>,
    ages: Vec<f64>,
    log_prior: f64,
    log_lik: f64,
}

impl State {
    fn refresh_alphas(&mut self, width: f64) {
        let g = std::mem::take(&mut self.g);
        alphas_from_innovations(&g, self.w, &mut self.alphas);
        self.g = g;
        self.refresh_ages(width);
    }

    fn refresh_ages(&mut self, width: f64) {
        self.ages.clear();
        let mut t = 0.0;
        self.ages.push(t);
        for a in &self.alphas {
            t += a * width;
            self.ages.push(t);
        }
    }

    fn log_post(&self) -> f64 {
        self.log_prior + self.log_lik
    }

    fn to_params(&self, width: f64) -> PlumParams {
        PlumParams {
            alphas: self.alphas.clone(),
            memory: self.w,
            phi: self.phi,
            supported: self.s,
            section_width: width,
        }
    }
}

/// Adaptive proposal scale for one update slot.
#[derive(Debug, Clone, Copy)]
struct Scale {
    log_scale: f64,
    proposed: u64,
}

impl Scale {
    fn new(scale: f64) -> Self {
        Self {
            log_scale: scale.ln(),
            proposed: 0,
        }
    }

    fn get(&self) -> f64 {
        self.log_scale.exp()
    }

    fn adapt(&mut self, accepted: bool) {
        self.proposed += 1;
        let step = 1.0 / (1.0 + self.proposed as f64).powf(0.6);
        let signal = if accepted { 1.0 } else { 0.0 } - TARGET_ACCEPTANCE;
        self.log_scale = (self.log_scale + step * signal).clamp(MIN_LOG_SCALE, MAX_LOG_SCALE);
    }
}

struct Chain<'a> {
    model: &'a PlumModel,
    state: State,
    rng: ChaCha8Rng,
    innov_scales: Vec<Scale>,
    exchange_scales: Vec<Scale>,
    memory_scale: Scale,
    memory_fixed_scale: Scale,
    phi_scale: Scale,
    s_scale: Scale,
    adapting: bool,
    stats: Vec<BlockStats>,
}

impl<'a> Chain<'a> {
    fn new(model: &'a PlumModel, init: &PlumParams, seed: u64) -> Result<Self> {
        let k = model.grid.count;
        if init.alphas.len() != k {
            return Err(Error::domain("initial state does not match the section grid"));
        }
        let mut state = State {
            g: innovations(&init.alphas, init.memory),
            w: init.memory,
            phi: init.phi,
            s: init.supported,
            alphas: Vec::with_capacity(k),
            ages: Vec::with_capacity(k + 1),
            log_prior: 0.0,
            log_lik: 0.0,
        };
        state.refresh_alphas(model.grid.width);
        state.log_prior = model.log_prior(&state);
        state.log_lik = model.log_likelihood(&state);
        if !state.log_post().is_finite() {
            return Err(Error::domain("initial state has zero posterior density"));
        }
        let mean_alpha = init.alphas.iter().sum::<f64>() / k as f64;
        Ok(Self {
            model,
            state,
            rng: ChaCha8Rng::seed_from_u64(seed),
            innov_scales: vec![Scale::new(0.3); k],
            exchange_scales: vec![Scale::new(0.1 * mean_alpha); k.saturating_sub(1)],
            memory_scale: Scale::new(0.5),
            memory_fixed_scale: Scale::new(0.1),
            phi_scale: Scale::new(0.1),
            s_scale: Scale::new(0.05),
            adapting: true,
            stats: Block::ALL
                .iter()
                .map(|&block| BlockStats {
                    block,
                    proposed: 0,
                    accepted: 0,
                })
                .collect(),
        })
    }

    fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    fn accept(&mut self, log_ratio: f64) -> bool {
        log_ratio >= 0.0 || self.rng.random::<f64>().ln() < log_ratio
    }

    fn record(&mut self, block: Block, accepted: bool) {
        if self.adapting {
            return;
        }
        let s = &mut self.stats[block as usize];
        s.proposed += 1;
        s.accepted += accepted as u64;
    }

    fn sweep(&mut self) {
        let width = self.model.grid.width;
        let k = self.model.grid.count;

        for j in 0..k {
            let eps = self.innov_scales[j].get() * self.normal();
            let mut prop = self.state.clone();
            prop.g[j] *= eps.exp();
            prop.refresh_alphas(width);
            let ok = self.try_move(prop, eps);
            if self.adapting {
                self.innov_scales[j].adapt(ok);
            }
            self.record(Block::Innovations, ok);
        }

        for j in 0..k.saturating_sub(1) {
            let delta = self.exchange_scales[j].get() * self.normal();
            let mut prop = self.state.clone();
            prop.alphas[j] += delta;
            prop.alphas[j + 1] -= delta;
            let ok = if prop.alphas[j] > 0.0 && prop.alphas[j + 1] > 0.0 {
                prop.g = innovations(&prop.alphas, prop.w);
                prop.refresh_ages(width);
                self.try_move(prop, 0.0)
            } else {
                false
            };
            if self.adapting {
                self.exchange_scales[j].adapt(ok);
            }
            self.record(Block::Exchange, ok);
        }

        // Memory with innovations fixed.
        {
            let (w_new, log_jac) = self.logit_step(self.memory_scale.get());
            let mut prop = self.state.clone();
            prop.w = w_new;
            prop.refresh_alphas(width);
            let ok = self.try_move(prop, log_jac);
            if self.adapting {
                self.memory_scale.adapt(ok);
            }
            self.record(Block::Memory, ok);
        }

        // Memory with section rates fixed; the likelihood is unchanged.
        {
            let (w_new, log_jac) = self.logit_step(self.memory_fixed_scale.get());
            let g_new = innovations(&self.state.alphas, w_new);
            let ok = if g_new.iter().all(|x| *x > 0.0) {
                let mut prop = self.state.clone();
                prop.g = g_new;
                prop.w = w_new;
                prop.log_prior = self.model.log_prior(&prop);
                let rate_jac = (k - 1) as f64 * ((1.0 - self.state.w).ln() - (1.0 - w_new).ln());
                let log_ratio = prop.log_post() - self.state.log_post() + log_jac + rate_jac;
                if self.accept(log_ratio) {
                    self.state = prop;
                    true
                } else {
                    false
                }
            } else {
                false
            };
            if self.adapting {
                self.memory_fixed_scale.adapt(ok);
            }
            self.record(Block::MemoryRatesFixed, ok);
        }

        {
            let eps = self.phi_scale.get() * self.normal();
            let mut prop = self.state.clone();
            prop.phi *= eps.exp();
            let ok = self.try_move(prop, eps);
            if self.adapting {
                self.phi_scale.adapt(ok);
            }
            self.record(Block::Supply, ok);
        }

        {
            let eps = self.s_scale.get() * self.normal();
            let mut prop = self.state.clone();
            prop.s *= eps.exp();
            let ok = self.try_move(prop, eps);
            if self.adapting {
                self.s_scale.adapt(ok);
            }
            self.record(Block::Supported, ok);
        }
    }

    /// Random walk on logit(w). Returns the proposal and the log Jacobian
    /// of the logit transform.
    fn logit_step(&mut self, scale: f64) -> (f64, f64) {
        let w = self.state.w;
        let eta = (w / (1.0 - w)).ln() + scale * self.normal();
        let w_new = 1.0 / (1.0 + (-eta).exp());
        let w_new = w_new.clamp(1e-12, 1.0 - 1e-12);
        let log_jac = (w_new * (1.0 - w_new)).ln() - (w * (1.0 - w)).ln();
        (w_new, log_jac)
    }

    /// Metropolis-Hastings step for a proposal whose log Hastings
    /// correction is `log_correction`.
    fn try_move(&mut self, mut prop: State, log_correction: f64) -> bool {
        prop.log_prior = self.model.log_prior(&prop);
        if prop.log_prior == f64::NEG_INFINITY {
            return false;
        }
        prop.log_lik = self.model.log_likelihood(&prop);
        let log_ratio = prop.log_post() - self.state.log_post() + log_correction;
        if log_ratio.is_finite() && self.accept(log_ratio) {
            self.state = prop;
            true
        } else {
            false
        }
    }
}

/// Starting point: prior-mean rates, prior-mean memory and the prior means of
/// the supply and supported level.
pub fn default_initial_state(model: &PlumModel) -> PlumParams {
    PlumParams {
        alphas: vec![model.priors.acc_mean; model.grid.count],
        memory: model.priors.mem_mean,
        phi: model.priors.phi_mean,
        supported: model.priors.s_mean,
        section_width: model.grid.width,
    }
}

/// Runs one chain from `init`.
pub fn run_chain(model: &PlumModel, init: &PlumParams, mcmc: &McmcConfig) -> Result<PosteriorDraws> {
    mcmc.validate()?;
    let mut chain = Chain::new(model, init, mcmc.seed)?;
    let width = model.grid.width;
    let mut draws = Vec::with_capacity(mcmc.retained());
    let mut log_posterior = Vec::with_capacity(mcmc.retained());
    for it in 0..mcmc.iterations {
        chain.adapting = it < mcmc.burn_in;
        chain.sweep();
        if it >= mcmc.burn_in && (it - mcmc.burn_in + 1).is_multiple_of(mcmc.thinning) {
            draws.push(chain.state.to_params(width));
            log_posterior.push(chain.state.log_post());
        }
    }

    let mut out = PosteriorDraws {
        draws,
        log_posterior,
        acceptance: chain.stats,
        ess: Vec::new(),
        warnings: Vec::new(),
    };
    if out.draws.len() >= 4 {
        let mut ess = vec![
            ("phi".to_string(), stats::effective_sample_size(&out.phi())),
            ("supported".to_string(), stats::effective_sample_size(&out.supported())),
            ("memory".to_string(), stats::effective_sample_size(&out.memory())),
        ];
        let alpha_ess = (0..model.grid.count)
            .map(|j| {
                let xs: Vec<f64> = out.draws.iter().map(|d| d.alphas[j]).collect();
                stats::effective_sample_size(&xs)
            })
            .fold(f64::INFINITY, f64::min);
        ess.push(("alphas".to_string(), alpha_ess));
        for (name, value) in &ess {
            if *value < mcmc.ess_floor {
                out.warnings.push(format!(
                    "effective sample size of {name} is {value:.1}, below the floor of {}",
                    mcmc.ess_floor
                ));
            }
        }
        out.ess = ess;
    }
    Ok(out)
}

/// Samples the posterior of a dataset with default initialisation.
pub fn sample_posterior(
    dataset: &Dataset,
    priors: &PlumPriors,
    mcmc: &McmcConfig,
    decay: &DecayConstants,
) -> Result<PosteriorDraws> {
    let model = PlumModel::new(dataset, priors.clone(), 1.0, decay)?;
    let init = default_initial_state(&model);
    run_chain(&model, &init, mcmc)
}

/// Samples the prior alone on the given section grid.
pub fn sample_prior(priors: &PlumPriors, grid: SectionGrid, mcmc: &McmcConfig) -> Result<PosteriorDraws> {
    let model = PlumModel::prior_only(priors.clone(), grid)?;
    let init = default_initial_state(&model);
    run_chain(&model, &init, mcmc)
}

/// Runs `n_chains` independent chains in parallel, chain `i` seeded with
/// `mcmc.seed + i`.
pub fn sample_chains(model: &PlumModel, mcmc: &McmcConfig, n_chains: usize) -> Result<Vec<PosteriorDraws>> {
    let init = default_initial_state(model);
    (0..n_chains as u64)
        .into_par_iter()
        .map(|i| {
            let cfg = McmcConfig {
                seed: mcmc.seed.wrapping_add(i),
                ..mcmc.clone()
            };
            run_chain(model, &init, &cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_always_reaches_thirty_cm() {
        assert_eq!(SectionGrid::covering(12.0, 1.0).count, 30);
        assert_eq!(SectionGrid::covering(30.0, 1.0).count, 30);
        assert_eq!(SectionGrid::covering(31.5, 1.0).count, 32);
        assert_eq!(SectionGrid::covering(30.0, 0.5).count, 60);
    }

    #[test]
    fn config_validation() {
        let bad = McmcConfig {
            iterations: 10,
            burn_in: 10,
            ..McmcConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = McmcConfig {
            thinning: 0,
            ..McmcConfig::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(McmcConfig::default().retained(), 1500);
    }

    #[test]
    fn prior_chain_is_deterministic_and_in_support() {
        let grid = SectionGrid { width: 1.0, count: 5 };
        let mcmc = McmcConfig {
            iterations: 600,
            burn_in: 100,
            thinning: 5,
            seed: 4,
            ess_floor: 0.0,
        };
        let a = sample_prior(&PlumPriors::default(), grid, &mcmc).unwrap();
        let b = sample_prior(&PlumPriors::default(), grid, &mcmc).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 100);
        for d in &a.draws {
            assert!(d.in_support());
            assert!(d.innovations().iter().all(|g| *g > 0.0));
        }
        for s in &a.acceptance {
            assert!(s.proposed > 0, "{:?}", s.block);
        }
    }
}
