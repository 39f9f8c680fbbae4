//! Synthetic 210Pb/226Ra cores generated from a known age-depth function.
//!
//! A core is integrated slab by slab under constant 210Pb supply, then passed
//! through a three-stage noise model: Gaussian scatter around the true
//! concentration, an occasional uniform outlier shift, and finally a
//! laboratory measurement drawn around the shifted value with the sd the
//! laboratory would report.

use std::fmt;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::data::{read_dataset, Dataset, DecayConstants, Measurement};
use crate::error::{Error, Result};

/// Information percentages used by the subsampling experiment: 10, 15, …, 95, 100.
pub const PERCENT_GRID: [u32; 19] = [
    10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60, 65, 70, 75, 80, 85, 90, 95, 100,
];

/// Depth of the simulated cores, cm.
pub const CORE_DEPTH: f64 = 30.0;

/// `t(x) = Σ poly[k]·xᵏ + sin_amplitude·sin(sin_frequency·x)`, in years for x in cm.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeFunction {
    pub poly: Vec<f64>,
    pub sin_amplitude: f64,
    pub sin_frequency: f64,
}

impl AgeFunction {
    pub fn polynomial(poly: Vec<f64>) -> Self {
        Self {
            poly,
            sin_amplitude: 0.0,
            sin_frequency: 0.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let p = self.poly.iter().rev().fold(0.0, |acc, c| acc * x + c);
        p + self.sin_amplitude * (self.sin_frequency * x).sin()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let p = self
            .poly
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * x + k as f64 * c);
        p + self.sin_amplitude * self.sin_frequency * (self.sin_frequency * x).cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioId {
    S1,
    S2,
    S3,
    Custom,
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioId::S1 => "1",
            ScenarioId::S2 => "2",
            ScenarioId::S3 => "3",
            ScenarioId::Custom => "custom",
        })
    }
}

/// Known sedimentation history: age-depth function, 210Pb supply and supported level.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: ScenarioId,
    pub age_fn: AgeFunction,
    /// Bq/(m²·yr)
    pub phi: f64,
    /// Bq/kg
    pub supported: f64,
}

impl Scenario {
    fn age_function(n: u8) -> Result<(ScenarioId, AgeFunction)> {
        Ok(match n {
            1 => (ScenarioId::S1, AgeFunction::polynomial(vec![0.0, 0.5, 0.25])),
            2 => (ScenarioId::S2, AgeFunction::polynomial(vec![0.0, 12.0, -0.2])),
            3 => (
                ScenarioId::S3,
                AgeFunction {
                    poly: vec![0.0, 8.0],
                    sin_amplitude: 25.0,
                    sin_frequency: 1.0 / std::f64::consts::PI,
                },
            ),
            _ => return Err(Error::domain(format!("unknown scenario {n}; expected 1, 2 or 3"))),
        })
    }

    /// Built-in scenario with the supply and supported levels that reproduce
    /// the published simulated cores (scenario 1: Φ=50, Aˢ=25; scenario 2:
    /// Φ=100, Aˢ=10; scenario 3: Φ=500, Aˢ=15).
    pub fn builtin(n: u8) -> Result<Self> {
        let (id, age_fn) = Self::age_function(n)?;
        let (phi, supported) = match id {
            ScenarioId::S1 => (50.0, 25.0),
            ScenarioId::S2 => (100.0, 10.0),
            _ => (500.0, 15.0),
        };
        Ok(Self {
            id,
            age_fn,
            phi,
            supported,
        })
    }

    /// Built-in scenario with supply and supported levels as tabulated
    /// alongside the age-depth functions (scenarios 1 and 2 swapped
    /// relative to [`Scenario::builtin`]).
    pub fn tabulated(n: u8) -> Result<Self> {
        let (id, age_fn) = Self::age_function(n)?;
        let (phi, supported) = match id {
            ScenarioId::S1 => (100.0, 10.0),
            ScenarioId::S2 => (50.0, 25.0),
            _ => (500.0, 15.0),
        };
        Ok(Self {
            id,
            age_fn,
            phi,
            supported,
        })
    }

    pub fn custom(age_fn: AgeFunction, phi: f64, supported: f64) -> Self {
        Self {
            id: ScenarioId::Custom,
            age_fn,
            phi,
            supported,
        }
    }

    /// Checks `t(0) = 0`, monotonicity on `[0, max_depth]`, `Φ > 0` and `Aˢ ≥ 0`.
    pub fn validate(&self, max_depth: f64) -> Result<()> {
        let mut problems = Vec::new();
        if self.age_fn.eval(0.0).abs() > 1e-12 {
            problems.push(format!("age function must vanish at the surface (t(0) = {})", self.age_fn.eval(0.0)));
        }
        let steps = 3000;
        for i in 0..=steps {
            let x = max_depth * i as f64 / steps as f64;
            if self.age_fn.derivative(x) < -1e-9 {
                problems.push(format!("age function decreases at depth {x:.3} cm"));
                break;
            }
        }
        if !(self.phi > 0.0) {
            problems.push(format!("supply must be > 0 (got {})", self.phi));
        }
        if !(self.supported >= 0.0) {
            problems.push(format!("supported activity must be >= 0 (got {})", self.supported));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

/// Age of the scenario at `depth`, years before sampling.
pub fn true_age(scenario: &Scenario, depth: f64) -> f64 {
    scenario.age_fn.eval(depth)
}

/// Dry bulk density profile of the simulated cores, g/cm³.
pub fn density_at(depth_mid: f64) -> f64 {
    0.15 - 0.05 * (std::f64::consts::PI * depth_mid / CORE_DEPTH).cos()
}

/// True total 210Pb concentration (Bq/kg) of the slab `[top, bottom)`:
/// supported level plus the slab's excess inventory over its dry mass per area.
pub fn true_total_concentration(scenario: &Scenario, top: f64, bottom: f64, decay: &DecayConstants) -> f64 {
    let lambda = decay.lambda;
    let thickness = bottom - top;
    let rho = density_at(0.5 * (top + bottom));
    let t_top = scenario.age_fn.eval(top);
    let t_bottom = scenario.age_fn.eval(bottom);
    let inventory = scenario.phi / lambda * ((-lambda * t_top).exp() - (-lambda * t_bottom).exp());
    scenario.supported + inventory / (10.0 * rho * thickness)
}

/// Parameters of the measurement noise model.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    /// Variance of the scatter around the true value, (Bq/kg)².
    pub scatter_var: f64,
    /// Probability that a value is shifted as an outlier.
    pub p_out: f64,
    /// Half-width of the uniform outlier shift, Bq/kg.
    pub x_shift: f64,
    /// Floor of the reported sd, Bq/kg.
    pub sigma_min: f64,
    /// Analytical uncertainty (nominal reported sd factor is `epsilon · y_scat`).
    pub epsilon: f64,
    /// Error multiplier.
    pub y_scat: f64,
    /// Reported sd as a fraction of the measured activity.
    pub reported_sd_factor: f64,
    /// When false, the final laboratory draw is skipped and the measurement
    /// equals the (scattered, shifted) value.
    pub measurement_noise: bool,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        let scatter_var = 10.0;
        Self {
            scatter_var,
            p_out: 0.05,
            x_shift: 3.0 * f64::sqrt(scatter_var),
            sigma_min: 1.0,
            epsilon: 0.01,
            y_scat: 1.5,
            reported_sd_factor: 0.045,
            measurement_noise: true,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    /// Every noise stage disabled; reported sds still follow the sd rule.
    pub fn noiseless() -> Self {
        Self {
            scatter_var: 0.0,
            p_out: 0.0,
            measurement_noise: false,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Reported sd factor from the nominal formula, `epsilon · y_scat`.
    pub fn nominal_sd_factor(&self) -> f64 {
        self.epsilon * self.y_scat
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.scatter_var >= 0.0) {
            problems.push("scatter_var must be >= 0".to_string());
        }
        if !(0.0..=1.0).contains(&self.p_out) {
            problems.push("p_out must lie in [0, 1]".to_string());
        }
        if !(self.x_shift >= 0.0) {
            problems.push("x_shift must be >= 0".to_string());
        }
        if !(self.sigma_min > 0.0) {
            problems.push("sigma_min must be > 0".to_string());
        }
        if !(self.reported_sd_factor > 0.0) {
            problems.push("reported_sd_factor must be > 0".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Sd the laboratory reports for a measured value.
    pub fn reported_sd(&self, value: f64) -> f64 {
        self.sigma_min.max(value * self.reported_sd_factor)
    }
}

/// Applies the noise model to one true concentration. Returns the measured
/// value and the sd a laboratory would report for it.
pub fn perturb_measurement<R: Rng + ?Sized>(true_conc: f64, cfg: &NoiseConfig, rng: &mut R) -> (f64, f64) {
    let z: f64 = StandardNormal.sample(rng);
    let theta = true_conc + cfg.scatter_var.sqrt() * z;
    let theta_shifted = if cfg.p_out > 0.0 && rng.random::<f64>() < cfg.p_out {
        theta + cfg.x_shift * (2.0 * rng.random::<f64>() - 1.0)
    } else {
        theta
    };
    let reported = cfg.reported_sd(theta_shifted);
    let measured = if cfg.measurement_noise {
        let z: f64 = StandardNormal.sample(rng);
        theta_shifted + reported * z
    } else {
        theta_shifted
    };
    (measured, reported)
}

/// Simulates one core of `max_depth / slab` contiguous slabs. Deterministic
/// in `cfg.seed`.
pub fn simulate_core(
    scenario: &Scenario,
    cfg: &NoiseConfig,
    slab: f64,
    max_depth: f64,
    decay: &DecayConstants,
) -> Result<Dataset> {
    cfg.validate()?;
    scenario.validate(max_depth)?;
    if !(slab > 0.0) {
        return Err(Error::domain(format!("slab thickness must be > 0 (got {slab})")));
    }
    let n_slabs = (max_depth / slab).round();
    if n_slabs < 1.0 || (n_slabs * slab - max_depth).abs() > 1e-9 * max_depth.max(1.0) {
        return Err(Error::domain(format!(
            "max depth {max_depth} is not a multiple of the slab thickness {slab}"
        )));
    }
    if !(scenario.supported > 0.0) {
        return Err(Error::domain("simulating 226Ra requires a supported level > 0"));
    }
    let n_slabs = n_slabs as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ra_sd = scenario.supported * cfg.reported_sd_factor;
    let ra_dist = Normal::new(scenario.supported, ra_sd).map_err(|e| Error::domain(e.to_string()))?;
    let width = if n_slabs >= 100 { 3 } else { 2 };

    let measurements = (0..n_slabs)
        .map(|i| {
            let top = i as f64 * slab;
            let bottom = (i + 1) as f64 * slab;
            let truth = true_total_concentration(scenario, top, bottom, decay);
            let (pb210, pb210_sd) = perturb_measurement(truth, cfg, &mut rng);
            let ra226 = if cfg.measurement_noise {
                ra_dist.sample(&mut rng)
            } else {
                scenario.supported
            };
            Measurement {
                label: format!("S{}-{:0width$}", scenario.id, i + 1),
                depth: bottom,
                density: density_at(0.5 * (top + bottom)),
                pb210,
                pb210_sd,
                thickness: slab,
                ra226,
                ra226_sd: ra_sd,
            }
        })
        .collect();
    Dataset::new(format!("scenario-{}", scenario.id), measurements)
}

/// Keeps `round(percent% · n)` slabs chosen uniformly without replacement,
/// always including the deepest slab.
/// The published noisy realisation of a built-in scenario (30 slabs of 1 cm),
/// bundled with the library.
pub fn published_core(n: u8) -> Result<Dataset> {
    let (name, text) = match n {
        1 => ("Sim01", include_str!("../data/sim01.csv")),
        2 => ("Sim02", include_str!("../data/sim02.csv")),
        3 => ("Sim03", include_str!("../data/sim03.csv")),
        _ => return Err(Error::domain(format!("unknown scenario {n}; expected 1, 2 or 3"))),
    };
    read_dataset(text.as_bytes(), name, Path::new(name))
}

pub fn subsample<R: Rng + ?Sized>(dataset: &Dataset, percent: u32, rng: &mut R) -> Result<Dataset> {
    if !PERCENT_GRID.contains(&percent) {
        return Err(Error::domain(format!(
            "information percentage {percent} is not on the grid 10, 15, ..., 95, 100"
        )));
    }
    let n = dataset.len();
    if percent == 100 {
        return Ok(dataset.clone());
    }
    let keep = ((percent as f64 / 100.0 * n as f64).round() as usize).clamp(1, n);
    let mut picked = index::sample(rng, n - 1, keep - 1).into_vec();
    picked.sort_unstable();
    picked.push(n - 1);
    let rows = picked
        .into_iter()
        .map(|i| dataset.measurements()[i].clone())
        .collect();
    dataset.with_measurements(rows)
}
