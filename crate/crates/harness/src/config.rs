//! Experiment configuration, read from TOML.
//!
//! ```toml
//! version = 1
//! experiment = "laplace"
//! seed = 7
//!
//! [scenario]
//! preset = "von-mises-circle"
//!
//! [params]
//! n_samples = 100000
//! probes = 10
//! ```
//!
//! A scenario is either a `preset` or an explicit `model`, `window`, `rho`
//! and `marks` (plus optional `rho_max` and `mixing`).

use std::path::Path;
use std::sync::Arc;

use markcfg_core::base_space::Window;
use markcfg_core::mark_space::MarkSpace;
use markcfg_core::sampling::{presets, BaseDensity, IntensityModel, MarkFamily, MixingLaw};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::experiments::Experiment;

/// Schema version understood by this build.
pub const CONFIG_VERSION: u32 = 1;

pub const DEFAULT_SAMPLES: u64 = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub tolerance: Tolerances,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    MassTwoCircle,
    VonMisesCircle,
    GammaDilation,
    TiltedGammaDilation,
    VmfSphere,
    PlaneCircle,
    OuCircle,
}

impl Preset {
    pub fn model(self) -> IntensityModel {
        match self {
            Preset::MassTwoCircle => presets::mass_two_circle(),
            Preset::VonMisesCircle => presets::von_mises_circle(),
            Preset::GammaDilation => presets::gamma_dilation(),
            Preset::TiltedGammaDilation => presets::tilted_gamma_dilation(),
            Preset::VmfSphere => presets::vmf_sphere(),
            Preset::PlaneCircle => presets::plane_circle(),
            Preset::OuCircle => presets::ou_circle(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub preset: Option<Preset>,
    pub model: Option<MarkSpace>,
    pub window: Option<Window>,
    pub rho: Option<BaseDensity>,
    pub marks: Option<MarkFamily>,
    pub rho_max: Option<f64>,
    /// Mixing law κ for experiments that also run under μ_{κ,σ̃}.
    pub mixing: Option<MixingLaw>,
}

impl ScenarioConfig {
    pub fn preset(preset: Preset) -> Self {
        ScenarioConfig { preset: Some(preset), ..Default::default() }
    }

    pub fn build(&self) -> Result<Arc<IntensityModel>> {
        let model = match self.preset {
            Some(p) => {
                if self.window.is_some() || self.rho.is_some() || self.marks.is_some() || self.rho_max.is_some() {
                    return Err(HarnessError::Config("a preset scenario takes no window, rho, marks or rho_max".into()));
                }
                p.model()
            }
            None => {
                let (Some(window), Some(rho), Some(marks)) = (self.window, self.rho.clone(), self.marks.clone()) else {
                    return Err(HarnessError::Config("scenario needs a preset or all of window, rho and marks".into()));
                };
                if self.model.is_none() {
                    return Err(HarnessError::Config("scenario needs a model name: circle, dilation or sphere".into()));
                }
                IntensityModel::new(window, rho, marks, self.rho_max).map_err(|e| HarnessError::Config(e.to_string()))?
            }
        };
        if let Some(space) = self.model {
            if space != model.space() {
                return Err(HarnessError::Config(format!("model '{space}' does not match marks on '{}'", model.space())));
            }
        }
        if let Some(k) = &self.mixing {
            k.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        Ok(Arc::new(model))
    }
}

/// Experiment parameters; each experiment reads the ones it needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub n_samples: u64,
    /// Number of random probes; each experiment has its own default.
    pub probes: Option<usize>,
    /// Sampled configurations for pointwise identities.
    pub points: usize,
    /// Highest chaos degree in the orthogonality table.
    pub max_degree: usize,
    /// Sample count for the top-degree diagonal entry of the orthogonality table.
    pub top_samples: Option<u64>,
    /// Highest degree in the generating-function check.
    pub generating_degree: usize,
    pub times: Vec<f64>,
    /// Constant test function for the Laplace experiment.
    pub constant: Option<f64>,
    /// Include a = id among the quasi-invariance elements.
    pub identity: bool,
    /// Eigen-expansions as (n, k, coefficient) triples.
    pub phi: Option<Vec<(u32, i32, f64)>>,
    pub psi: Option<Vec<(u32, i32, f64)>>,
    /// Prefix of CSV dumps of the first `dump_count` samples.
    pub dump_prefix: Option<String>,
    pub dump_count: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            n_samples: DEFAULT_SAMPLES,
            probes: None,
            points: 100,
            max_degree: 4,
            top_samples: None,
            generating_degree: 6,
            times: vec![0.0, 0.25, 0.5, 1.0],
            constant: None,
            identity: true,
            phi: None,
            psi: None,
            dump_prefix: None,
            dump_count: 0,
        }
    }
}

/// Pass rules. Monte Carlo checks pass when |estimate − target| ≤ max(se_multiplier·SE, floor).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub se_multiplier: f64,
    pub floor: f64,
    /// Absolute bound on quadrature residuals.
    pub quadrature: f64,
    /// Relative bound for pointwise identities of nested derivatives.
    pub relative: f64,
    /// Relative bound for closed-form pointwise identities.
    pub pointwise: f64,
    /// Magnitudes below this count as this size in relative comparisons.
    pub relative_scale: f64,
    /// Significance level of the χ² goodness-of-fit test.
    pub chi2_alpha: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            se_multiplier: 4.0,
            floor: 1e-7,
            quadrature: 1e-6,
            relative: 1e-6,
            pointwise: 1e-8,
            relative_scale: 1e-3,
            chi2_alpha: 1e-3,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<()> {
        let all = [self.se_multiplier, self.floor, self.quadrature, self.relative, self.pointwise, self.relative_scale];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) || !(self.chi2_alpha > 0.0 && self.chi2_alpha < 1.0) {
            return Err(HarnessError::Config(format!("invalid tolerances {self:?}")));
        }
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, scenario: ScenarioConfig, seed: u64) -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            experiment,
            seed,
            scenario,
            params: Params::default(),
            tolerance: Tolerances::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(HarnessError::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.params.n_samples < 2 {
            return Err(HarnessError::Config("n_samples must be at least 2".into()));
        }
        if self.params.points == 0 {
            return Err(HarnessError::Config("points must be positive".into()));
        }
        if self.params.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(HarnessError::Config("semigroup times must be finite and non-negative".into()));
        }
        self.tolerance.validate()
    }
}
