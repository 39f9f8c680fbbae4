use statrs::function::gamma::ln_gamma;

use crate::data::{Dataset, DecayConstants};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Parameters of the piecewise-linear age-depth model.
#[derive(Debug, Clone, PartialEq)]
pub struct PlumParams {
    /// Accumulation rate of each section, yr/cm, shallowest first.
    pub alphas: Vec<f64>,
    /// Autocorrelation of accumulation between adjacent sections, in (0, 1).
    pub memory: f64,
    /// Supply of excess 210Pb, Bq/(m²·yr).
    pub phi: f64,
    /// Supported 210Pb, Bq/kg.
    pub supported: f64,
    /// Section thickness, cm.
    pub section_width: f64,
}

impl PlumParams {
    pub fn in_support(&self) -> bool {
        !self.alphas.is_empty()
            && self.alphas.iter().all(|a| *a > 0.0 && a.is_finite())
            && self.memory > 0.0
            && self.memory < 1.0
            && self.phi > 0.0
            && self.phi.is_finite()
            && self.supported > 0.0
            && self.supported.is_finite()
            && self.section_width > 0.0
    }

    /// Depth covered by the section grid, cm.
    pub fn max_depth(&self) -> f64 {
        self.section_width * self.alphas.len() as f64
    }

    /// Ages at the section boundaries `0, w, 2w, …`.
    pub fn boundary_ages(&self) -> Vec<f64> {
        let mut ages = Vec::with_capacity(self.alphas.len() + 1);
        let mut t = 0.0;
        ages.push(t);
        for a in &self.alphas {
            t += a * self.section_width;
            ages.push(t);
        }
        ages
    }

    /// Innovations of the autoregressive accumulation prior. The first
    /// section's innovation is its own rate.
    pub fn innovations(&self) -> Vec<f64> {
        innovations(&self.alphas, self.memory)
    }
}

pub(crate) fn innovations(alphas: &[f64], w: f64) -> Vec<f64> {
    let mut g = Vec::with_capacity(alphas.len());
    for (j, a) in alphas.iter().enumerate() {
        if j == 0 {
            g.push(*a);
        } else {
            g.push((a - w * alphas[j - 1]) / (1.0 - w));
        }
    }
    g
}

pub(crate) fn alphas_from_innovations(g: &[f64], w: f64, out: &mut Vec<f64>) {
    out.clear();
    for (j, gj) in g.iter().enumerate() {
        if j == 0 {
            out.push(*gj);
        } else {
            let prev = out[j - 1];
            out.push(w * prev + (1.0 - w) * gj);
        }
    }
}

/// Age at `depth` from the cumulative boundary ages of a grid with the given width.
pub(crate) fn interpolate_age(boundary_ages: &[f64], alphas: &[f64], width: f64, depth: f64) -> f64 {
    let k = alphas.len();
    let j = ((depth / width).floor() as usize).min(k - 1);
    boundary_ages[j] + alphas[j] * (depth - j as f64 * width)
}

/// Age (yr) of the model at `depth` (cm). Zero at the surface.
pub fn age_at(params: &PlumParams, depth: f64) -> Result<f64> {
    let max = params.max_depth();
    if !(depth >= 0.0) || depth > max + 1e-9 {
        return Err(Error::domain(format!(
            "depth {depth} cm lies outside the section grid [0, {max}]"
        )));
    }
    let ages = params.boundary_ages();
    Ok(interpolate_age(&ages, &params.alphas, params.section_width, depth.min(max)))
}

/// Hyperparameters of the prior. Gamma priors are given by shape and mean.
#[derive(Debug, Clone, PartialEq)]
pub struct PlumPriors {
    pub acc_shape: f64,
    /// yr/cm
    pub acc_mean: f64,
    pub mem_mean: f64,
    pub mem_strength: f64,
    pub phi_shape: f64,
    /// Bq/(m²·yr)
    pub phi_mean: f64,
    pub s_shape: f64,
    /// Bq/kg
    pub s_mean: f64,
}

impl Default for PlumPriors {
    fn default() -> Self {
        Self {
            acc_shape: 1.5,
            acc_mean: 10.0,
            mem_mean: 0.5,
            mem_strength: 10.0,
            phi_shape: 2.0,
            phi_mean: 50.0,
            s_shape: 2.0,
            s_mean: 10.0,
        }
    }
}

impl PlumPriors {
    /// Defaults with the supported prior centred on the mean 226Ra activity.
    pub fn for_dataset(dataset: &Dataset) -> Self {
        let ra: Vec<f64> = dataset.measurements().iter().map(|m| m.ra226).collect();
        let s_mean = crate::stats::mean(&ra);
        Self {
            s_mean: if s_mean > 0.0 { s_mean } else { Self::default().s_mean },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("acc_shape", self.acc_shape),
            ("acc_mean", self.acc_mean),
            ("mem_strength", self.mem_strength),
            ("phi_shape", self.phi_shape),
            ("phi_mean", self.phi_mean),
            ("s_shape", self.s_shape),
            ("s_mean", self.s_mean),
        ];
        let mut problems: Vec<String> = positive
            .iter()
            .filter(|(_, v)| !(*v > 0.0 && v.is_finite()))
            .map(|(n, v)| format!("{n} must be > 0 (got {v})"))
            .collect();
        if !(self.mem_mean > 0.0 && self.mem_mean < 1.0) {
            problems.push(format!("mem_mean must lie in (0, 1) (got {})", self.mem_mean));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Beta parameters of the memory prior.
    pub fn memory_beta(&self) -> (f64, f64) {
        (
            self.mem_strength * self.mem_mean,
            self.mem_strength * (1.0 - self.mem_mean),
        )
    }
}

/// Log-density of a Gamma distribution given by shape and mean.
pub fn gamma_ln_pdf(x: f64, shape: f64, mean: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NEG_INFINITY;
    }
    let rate = shape / mean;
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

pub fn beta_ln_pdf(x: f64, a: f64, b: f64) -> f64 {
    if !(x > 0.0 && x < 1.0) {
        return f64::NEG_INFINITY;
    }
    ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln()
}

pub fn normal_ln_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * (LN_2PI + z * z) - sd.ln()
}

/// Prior log-density in sampler coordinates: innovations, memory, supply
/// and supported level are independent a priori.
pub(crate) fn log_prior_innovations(g: &[f64], w: f64, phi: f64, s: f64, priors: &PlumPriors) -> f64 {
    let (a, b) = priors.memory_beta();
    let mut lp = beta_ln_pdf(w, a, b)
        + gamma_ln_pdf(phi, priors.phi_shape, priors.phi_mean)
        + gamma_ln_pdf(s, priors.s_shape, priors.s_mean);
    for gj in g {
        lp += gamma_ln_pdf(*gj, priors.acc_shape, priors.acc_mean);
        if lp == f64::NEG_INFINITY {
            break;
        }
    }
    lp
}

/// Prior log-density of a parameter vector.
///
/// Each section rate follows `α_j = w·α_{j−1} + (1−w)·g_j` with Gamma
/// innovations `g_j` (`g_1 = α_1`). The density is expressed over the rates
/// themselves, so it includes the Jacobian `(1−w)^{−(K−1)}` of the map from
/// innovations to rates. Out of support returns `−∞`.
pub fn log_prior(params: &PlumParams, priors: &PlumPriors) -> f64 {
    if !params.in_support() {
        return f64::NEG_INFINITY;
    }
    let g = params.innovations();
    if g.iter().any(|x| !(*x > 0.0)) {
        return f64::NEG_INFINITY;
    }
    let jacobian = -((params.alphas.len() - 1) as f64) * (1.0 - params.memory).ln();
    log_prior_innovations(&g, params.memory, params.phi, params.supported, priors) + jacobian
}

#[derive(Debug, Clone)]
struct SlabTerm {
    top: f64,
    bottom: f64,
    /// Dry mass per area, kg/m².
    mass: f64,
    /// Observed areal activity, Bq/m².
    observed: f64,
    /// Sd of the observed areal activity.
    sd: f64,
}

/// Data-dependent part of the posterior, with the per-slab constants
/// precomputed.
#[derive(Debug, Clone)]
pub struct Likelihood {
    slabs: Vec<SlabTerm>,
    radium: Vec<(f64, f64)>,
    lambda: f64,
    deepest: f64,
}

impl Likelihood {
    pub fn new(dataset: &Dataset, decay: &DecayConstants) -> Self {
        let slabs = dataset
            .measurements()
            .iter()
            .map(|m| {
                let mass = m.mass_per_area();
                SlabTerm {
                    top: m.top(),
                    bottom: m.depth,
                    mass,
                    observed: m.pb210 * mass,
                    sd: m.pb210_sd * mass,
                }
            })
            .collect();
        let radium = dataset
            .measurements()
            .iter()
            .map(|m| (m.ra226, m.ra226_sd))
            .collect();
        Self {
            slabs,
            radium,
            lambda: decay.lambda,
            deepest: dataset.deepest().depth,
        }
    }

    /// Deepest measured depth, cm.
    pub fn deepest(&self) -> f64 {
        self.deepest
    }

    pub(crate) fn eval(&self, alphas: &[f64], width: f64, boundary_ages: &[f64], phi: f64, s: f64) -> f64 {
        let inv_scale = phi / self.lambda;
        let mut ll = 0.0;
        for slab in &self.slabs {
            let t_top = interpolate_age(boundary_ages, alphas, width, slab.top);
            let t_bottom = interpolate_age(boundary_ages, alphas, width, slab.bottom);
            let excess = inv_scale * ((-self.lambda * t_top).exp() - (-self.lambda * t_bottom).exp());
            ll += normal_ln_pdf(slab.observed, slab.mass * s + excess, slab.sd);
        }
        for &(ra, sd) in &self.radium {
            ll += normal_ln_pdf(ra, s, sd);
        }
        ll
    }

    pub fn log_likelihood(&self, params: &PlumParams) -> f64 {
        let ages = params.boundary_ages();
        self.eval(
            &params.alphas,
            params.section_width,
            &ages,
            params.phi,
            params.supported,
        )
    }
}

/// Log-likelihood of a dataset: every slab's areal 210Pb activity is normal
/// around its supported share plus the excess decayed between the slab's
/// top and bottom ages; every 226Ra value is normal around the supported level.
pub fn log_likelihood(params: &PlumParams, dataset: &Dataset, decay: &DecayConstants) -> Result<f64> {
    if dataset.deepest().depth > params.max_depth() + 1e-9 {
        return Err(Error::domain(format!(
            "dataset reaches {} cm, beyond the section grid ({} cm)",
            dataset.deepest().depth,
            params.max_depth()
        )));
    }
    Ok(Likelihood::new(dataset, decay).log_likelihood(params))
}
