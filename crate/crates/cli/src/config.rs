//! Experiment configuration, read from a TOML file.

use std::path::{Path, PathBuf};

use pdhams::samplers::{KernelKind, SamplerConfig};
use pdhams::targets::{self, TargetModel};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: TargetConfig,
    pub sampler: SamplerSection,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub tune: Option<TuneConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    DiscreteGaussian { d: usize, k: usize, sigma: f64, rho: f64 },
    QuadraticMixture { d: usize, k: usize },
    ClockPotts { side: usize, q: usize, coupling: f64 },
}

pub type BoxedTarget = Box<dyn TargetModel<f64>>;

impl TargetConfig {
    pub fn build(&self) -> pdhams::Result<BoxedTarget> {
        Ok(match *self {
            TargetConfig::DiscreteGaussian { d, k, sigma, rho } => Box::new(targets::discrete_gaussian(d, k, sigma, rho)?),
            TargetConfig::QuadraticMixture { d, k } => Box::new(targets::quadratic_mixture_default(d, k)?),
            TargetConfig::ClockPotts { side, q, coupling } => Box::new(targets::clock_potts(side, q, coupling)?),
        })
    }
}

/// Kernel plus the [`SamplerConfig`] fields it reads; omitted fields take the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub kernel: KernelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
}

impl SamplerSection {
    pub fn resolve(&self) -> SamplerConfig {
        let base = SamplerConfig::default();
        SamplerConfig {
            epsilon: self.epsilon.unwrap_or(base.epsilon),
            delta: self.delta.unwrap_or(base.delta),
            phi: self.phi.unwrap_or(base.phi),
            beta: self.beta.unwrap_or(base.beta),
            r: self.r.unwrap_or(base.r),
        }
    }

    pub fn from_config(kernel: KernelKind, c: &SamplerConfig) -> Self {
        SamplerSection {
            kernel,
            epsilon: Some(c.epsilon),
            delta: Some(c.delta),
            phi: Some(c.phi),
            beta: Some(c.beta),
            r: Some(c.r),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationChoice {
    GradientDiff,
    EnergyDiff,
    /// Use the target's own quadratic matrix.
    ExactQuadratic,
    /// `W = 0`: the first-order specialization of the kernel.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub method: CalibrationChoice,
    /// Length of the burn-in run whose draws feed the estimator.
    pub burn_in: usize,
    /// Burn-in sampler: metropolis, or the first-order (`W = 0`) pavg/vpdhams/opdhams.
    pub burn_in_kernel: KernelKind,
    /// Metropolis radius of the burn-in run.
    pub burn_in_r: usize,
    /// Stepsize of a first-order burn-in run.
    pub burn_in_delta: f64,
    pub cond_threshold: f64,
    /// Take the calibration draws from the first chain of a chain CSV instead.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub from_csv: Option<PathBuf>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            method: CalibrationChoice::ExactQuadratic,
            burn_in: 500,
            burn_in_kernel: KernelKind::Metropolis,
            burn_in_r: 2,
            burn_in_delta: 1.0,
            cond_threshold: pdhams::precondition::DEFAULT_COND_THRESHOLD,
            from_csv: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Uniformly random lattice point per chain.
    Random,
    /// Every coordinate at the lowest level.
    Lowest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub chains: usize,
    /// Total transitions per chain, burn-in included.
    pub length: usize,
    pub burn_in: usize,
    pub seed: u64,
    #[serde(default = "default_init")]
    pub init: Init,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub threads: usize,
    pub output: PathBuf,
    /// Write per-chain draw CSVs.
    #[serde(default = "yes")]
    pub write_chains: bool,
}

fn default_init() -> Init {
    Init::Random
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Kept-draw counts at which metrics are emitted; empty means only at the end.
    pub checkpoints: Vec<usize>,
    /// Sizes of the coordinate tuples whose TV to the exact marginal is reported.
    pub tv_orders: Vec<usize>,
    pub moments: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    pub delta: Vec<f64>,
    pub phi: Vec<f64>,
    /// Metropolis radii, used only for the metropolis kernel.
    pub r: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance_window: Option<(f64, f64)>,
    pub probe_chains: usize,
    pub probe_length: usize,
    pub probe_burn_in: usize,
    pub probe_seed: u64,
    /// When set, a stepsize search toward this acceptance rate runs first and its
    /// result joins the δ grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_acceptance: Option<f64>,
    pub delta0: f64,
    pub decay: f64,
    pub max_iter: usize,
}

impl Default for TuneConfig {
    fn default() -> Self {
        let probe = pdhams::tuning::ProbeSpec::default();
        TuneConfig {
            delta: Vec::new(),
            phi: vec![0.0],
            r: Vec::new(),
            acceptance_window: None,
            probe_chains: probe.chains,
            probe_length: probe.len,
            probe_burn_in: probe.burn_in,
            probe_seed: probe.seed,
            target_acceptance: None,
            delta0: 1.0,
            decay: pdhams::tuning::DEFAULT_DECAY,
            max_iter: 20,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        self.sampler.resolve()
    }

    pub fn kept(&self) -> usize {
        self.run.length - self.run.burn_in
    }

    /// Checkpoints in increasing order, always ending with the full kept length.
    pub fn checkpoints(&self) -> Vec<usize> {
        let mut c = self.metrics.checkpoints.clone();
        c.push(self.kept());
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError(msg));
        let run = &self.run;
        if run.chains == 0 {
            return bad("run.chains must be at least 1".into());
        }
        if run.burn_in >= run.length {
            return bad(format!("run.burn_in {} must be below run.length {}", run.burn_in, run.length));
        }
        if let Err(e) = self.sampler_config().validate() {
            return bad(format!("sampler: {e}"));
        }
        if let Some(&c) = self.metrics.checkpoints.iter().find(|&&c| c == 0 || c > self.kept()) {
            return bad(format!("checkpoint {c} outside 1..={}", self.kept()));
        }
        if self.metrics.tv_orders.contains(&0) {
            return bad("metrics.tv_orders entries must be positive".into());
        }
        let kind = self.sampler.kernel;
        let method = self.calibration.method;
        if kind == KernelKind::Gibbs && method != CalibrationChoice::ExactQuadratic {
            return bad("the gibbs kernel needs calibration.method = \"exact_quadratic\"".into());
        }
        if kind != KernelKind::Metropolis
            && matches!(method, CalibrationChoice::GradientDiff | CalibrationChoice::EnergyDiff)
            && self.calibration.from_csv.is_none()
            && self.calibration.burn_in < 2
        {
            return bad("calibration.burn_in must be at least 2".into());
        }
        let burn = SamplerConfig {
            r: self.calibration.burn_in_r,
            delta: self.calibration.burn_in_delta,
            ..SamplerConfig::default()
        };
        if let Err(e) = burn.validate() {
            return bad(format!("calibration burn-in: {e}"));
        }
        if self.calibration.burn_in_kernel == KernelKind::Gibbs {
            return bad("calibration.burn_in_kernel cannot be gibbs".into());
        }
        if let Some(t) = &self.tune {
            if t.probe_chains == 0 || t.probe_length <= t.probe_burn_in {
                return bad("tune probe needs at least one chain and probe_length > probe_burn_in".into());
            }
            if let Some(a) = t.target_acceptance {
                if !(a > 0.0 && a < 1.0) {
                    return bad(format!("tune.target_acceptance {a} outside (0, 1)"));
                }
            }
        }
        Ok(())
    }
}
