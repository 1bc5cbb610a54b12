//! The verification experiments.

mod calculus;
mod chaos;
mod stats;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use markcfg_core::base_space::Point;
use markcfg_core::configuration::MarkedConfiguration;
use markcfg_core::quadrature::Tolerance;
use markcfg_core::sampling::{sample_rng, Estimate, IntensityModel, Measure};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Params, Tolerances};
use crate::error::{Context, HarnessError, Result};
use crate::probes::Probes;
use crate::report::CheckRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SampleStats,
    Laplace,
    Quasiinvariance,
    IbpBase,
    IbpConfig,
    DirichletForm,
    DivergenceDuality,
    Commutators,
    CharlierOrthogonality,
    ExpvecPairing,
    Semigroup,
}

impl Experiment {
    pub const ALL: [Experiment; 11] = [
        Experiment::SampleStats,
        Experiment::Laplace,
        Experiment::Quasiinvariance,
        Experiment::IbpBase,
        Experiment::IbpConfig,
        Experiment::DirichletForm,
        Experiment::DivergenceDuality,
        Experiment::Commutators,
        Experiment::CharlierOrthogonality,
        Experiment::ExpvecPairing,
        Experiment::Semigroup,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::SampleStats => "sample-stats",
            Experiment::Laplace => "laplace",
            Experiment::Quasiinvariance => "quasiinvariance",
            Experiment::IbpBase => "ibp-base",
            Experiment::IbpConfig => "ibp-config",
            Experiment::DirichletForm => "dirichlet-form",
            Experiment::DivergenceDuality => "divergence-duality",
            Experiment::Commutators => "commutators",
            Experiment::CharlierOrthogonality => "charlier-orthogonality",
            Experiment::ExpvecPairing => "expvec-pairing",
            Experiment::Semigroup => "semigroup",
        }
    }

    pub fn identity(self) -> &'static str {
        match self {
            Experiment::SampleStats => "|ω| ~ Poisson(σ̃(Λ × M))",
            Experiment::Laplace => "E_π[exp⟨φ, ω⟩] = exp ∫(e^φ − 1) dσ̃",
            Experiment::Quasiinvariance => "E_π[F(aω)] = E_π[F(ω) Π_{(x,m)∈ω} p_a(x, m)]",
            Experiment::IbpBase => "∫ (∇_{(v,u)}φ₁)φ₂ + φ₁∇_{(v,u)}φ₂ + φ₁φ₂β_{(v,u)} dσ̃ = 0",
            Experiment::IbpConfig => "E[(∇_{(v,u)}F₁)F₂ + F₁∇_{(v,u)}F₂ + F₁F₂B_{(v,u)}] = 0 under π and μ_{κ,σ̃}",
            Experiment::DirichletForm => "E⟨∇F₁, ∇F₂⟩_{T_ω} = E[(H^Ω F₁)F₂] and H^Ω e^{⟨φ,·⟩} = ⟨Hφ − |∇φ|², ω⟩ e^{⟨φ,ω⟩}",
            Experiment::DivergenceDuality => "E⟨V, ∇F⟩_{T_ω} = −E[F div V]",
            Experiment::Commutators => "(K₁K₂ − K₂K₁)F = K_{[1,2]}F with K = ∇^Ω + ½B",
            Experiment::CharlierOrthogonality => "E[Q_n(φ^{⊗n}) Q_m(ψ^{⊗m})] = δ_{nm} n! (φ, ψ)ⁿ",
            Experiment::ExpvecPairing => "E[e(φ)e(ψ)] = exp (φ, ψ)_{L²(σ̃)} and E[e(φ)] = 1",
            Experiment::Semigroup => "E[e(e^{−tH}φ) e(ψ)] = exp (e^{−tH}φ, ψ)_{L²(σ̃)}",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment '{s}'")))
    }
}

/// Everything an experiment needs from the config.
pub(crate) struct Ctx<'a> {
    pub model: Arc<IntensityModel>,
    pub cfg: &'a ExperimentConfig,
}

/// Quadrature tolerance for one-particle inner products and means.
pub(crate) const INNER_TOL: Tolerance = Tolerance::new(1e-11, 1e-11);

impl Ctx<'_> {
    pub fn params(&self) -> &Params {
        &self.cfg.params
    }

    pub fn tol(&self) -> &Tolerances {
        &self.cfg.tolerance
    }

    pub fn seed(&self) -> u64 {
        self.cfg.seed
    }

    pub fn n(&self) -> u64 {
        self.cfg.params.n_samples
    }

    pub fn probe_count(&self, default: usize) -> usize {
        self.cfg.params.probes.unwrap_or(default)
    }

    pub fn probes(&self, tag: u64) -> Probes {
        Probes::new(&self.model, self.seed(), tag)
    }

    pub fn measure(&self) -> Measure<'_> {
        Measure::Poisson(&self.model)
    }

    pub fn mc(&self, name: impl Into<String>, est: Estimate, target: f64) -> CheckRecord {
        CheckRecord::monte_carlo(name, est, target, self.tol())
    }

    /// |a − b| / max(|a|, |b|, relative_scale).
    pub fn rel_err(&self, a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(self.tol().relative_scale)
    }

    /// The configurations used for pointwise identities: samples 0, 1, … of the run's stream.
    pub fn pointwise_samples(&self, count: usize, what: &str) -> Result<Vec<MarkedConfiguration>> {
        let measure = self.measure();
        (0..count as u64).map(|i| measure.sample(&mut sample_rng(self.seed(), i), i).check(what)).collect()
    }

    /// Three points spread over the window, with marks 1, 2, 3 (or the coordinate axes).
    pub fn three_points(&self) -> Result<MarkedConfiguration> {
        use markcfg_core::mark_space::{MarkPoint, MarkSpace};
        let w = self.model.window();
        let pts = [0.2, 0.5, 0.9]
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let x: Vec<f64> = (0..w.dim()).map(|d| w.lo()[d] + f * (w.hi()[d] - w.lo()[d])).collect();
                let m = match self.model.space() {
                    MarkSpace::Circle => MarkPoint::circle(1.0 + i as f64),
                    MarkSpace::Dilation => MarkPoint::Dilation(1.0 + i as f64),
                    MarkSpace::Sphere => {
                        let mut v = [0.0; 3];
                        v[i] = 1.0;
                        MarkPoint::sphere(v)
                    }
                };
                (Point::new(&x), m)
            })
            .collect();
        MarkedConfiguration::new(w.dim(), self.model.space(), pts).check("three-point configuration")
    }
}

pub(crate) fn dispatch(ctx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    match ctx.cfg.experiment {
        Experiment::SampleStats => stats::sample_stats(ctx),
        Experiment::Laplace => stats::laplace(ctx),
        Experiment::Quasiinvariance => stats::quasiinvariance(ctx),
        Experiment::IbpBase => calculus::ibp_base(ctx),
        Experiment::IbpConfig => calculus::ibp_config(ctx),
        Experiment::DirichletForm => calculus::dirichlet_form(ctx),
        Experiment::DivergenceDuality => calculus::divergence_duality(ctx),
        Experiment::Commutators => calculus::commutators(ctx),
        Experiment::CharlierOrthogonality => chaos::charlier_orthogonality(ctx),
        Experiment::ExpvecPairing => chaos::expvec_pairing(ctx),
        Experiment::Semigroup => chaos::semigroup(ctx),
    }
}
