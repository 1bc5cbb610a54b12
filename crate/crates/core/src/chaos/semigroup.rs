//! e^{−tH} on the Ornstein–Uhlenbeck × circle scenario, lifted to exponential vectors.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calculus::TestFunction;
use crate::configuration::MarkedConfiguration;
use crate::error::{Error, Result};
use crate::mark_space::MarkSpace;
use crate::quadrature::Tolerance;
use crate::sampling::{BaseDensity, IntensityModel, MarkFamily};

use super::{expvec_pairing_mc, poisson_exponential_with_mean, sigma_mean, PairingCheck};

/// φ = Σ c · Heₙ(x) · trig_k(m), with trig_k = cos(k·) for k ≥ 0 and sin(|k|·) for k < 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenExpansion {
    pub terms: Vec<(u32, i32, f64)>,
}

impl EigenExpansion {
    pub fn single(n: u32, k: i32, c: f64) -> Self {
        EigenExpansion { terms: vec![(n, k, c)] }
    }

    pub fn test_function(&self) -> TestFunction {
        TestFunction::Sum(
            self.terms
                .iter()
                .map(|&(n, k, c)| TestFunction::Product(vec![TestFunction::Hermite(n), TestFunction::MarkFourier(k)]).scaled(c))
                .collect(),
        )
    }
}

/// H^{X×M} for ρ = e^{−x²/2} on ℝ with uniform circle marks, diagonal on Heₙ ⊗ trig_k
/// with eigenvalue n + k².
#[derive(Clone, Debug)]
pub struct HeatKernelModel {
    model: Arc<IntensityModel>,
}

impl HeatKernelModel {
    pub fn new(model: Arc<IntensityModel>) -> Result<Self> {
        let gaussian = matches!(
            model.rho(),
            BaseDensity::Gaussian { center, width, .. } if center.iter().all(|c| *c == 0.0) && *width == 1.0
        );
        if model.dim() != 1 || model.space() != MarkSpace::Circle || !gaussian || *model.marks() != MarkFamily::CircleUniform {
            return Err(Error::Config(
                "the heat-kernel scenario needs d = 1, ρ ∝ e^{−x²/2} and uniform circle marks".into(),
            ));
        }
        Ok(HeatKernelModel { model })
    }

    pub fn model(&self) -> &Arc<IntensityModel> {
        &self.model
    }

    pub fn eigenvalue(n: u32, k: i32) -> f64 {
        n as f64 + (k as f64) * (k as f64)
    }

    /// e^{−tH} φ by damping each coefficient.
    pub fn damp(&self, phi: &EigenExpansion, t: f64) -> EigenExpansion {
        EigenExpansion {
            terms: phi.terms.iter().map(|&(n, k, c)| (n, k, c * (-t * Self::eigenvalue(n, k)).exp())).collect(),
        }
    }
}

/// The functional T(t) exp(⟨log(1+φ), ·⟩) = exp(⟨log(1+e^{−tH}φ), ·⟩ − ⟨(e^{−tH} − 1)φ⟩_σ̃).
pub fn semigroup_apply_expvec(
    t: f64,
    phi: &EigenExpansion,
    heat: &HeatKernelModel,
    tol: Tolerance,
) -> Result<impl Fn(&MarkedConfiguration) -> Result<f64> + Sync> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Usage(format!("semigroup time must be finite and non-negative, got {t}")));
    }
    let damped = heat.damp(phi, t).test_function();
    let original = phi.test_function();
    let shift = sigma_mean(&damped, heat.model(), tol)? - sigma_mean(&original, heat.model(), tol)?;
    Ok(move |omega: &MarkedConfiguration| poisson_exponential_with_mean(&damped, shift, omega))
}

/// E_π[e(e^{−tH}φ; ω)·e(ψ; ω)] against exp((e^{−tH}φ, ψ)_{L²(σ̃)}).
pub fn semigroup_mc_check(
    t: f64,
    phi: &EigenExpansion,
    psi: &EigenExpansion,
    heat: &HeatKernelModel,
    n_samples: u64,
    seed: u64,
    tol: Tolerance,
) -> Result<PairingCheck> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Usage(format!("semigroup time must be finite and non-negative, got {t}")));
    }
    let damped = heat.damp(phi, t).test_function();
    expvec_pairing_mc(&damped, &psi.test_function(), heat.model(), n_samples, seed, tol)
}
