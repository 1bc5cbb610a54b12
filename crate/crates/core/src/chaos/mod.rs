//! Charlier chaos, Poisson exponentials and the second-quantized heat semigroup.

mod charlier;
mod fock;
mod semigroup;

pub use charlier::{charlier, CharlierPlan, DEFAULT_MAX_DEGREE};
pub use fock::{ChaosVector, FockSpace, SymmetricTensor};
pub use semigroup::{semigroup_apply_expvec, semigroup_mc_check, EigenExpansion, HeatKernelModel};

use serde::{Deserialize, Serialize};

use crate::calculus::TestFunction;
use crate::configuration::MarkedConfiguration;
use crate::error::{Error, Result};
use crate::quadrature::Tolerance;
use crate::sampling::{mc_estimate_many, Estimate, IntensityModel, Measure};

/// ⟨φ⟩_σ̃ by quadrature over the support of φ.
pub fn sigma_mean(phi: &TestFunction, model: &IntensityModel, tol: Tolerance) -> Result<f64> {
    let support = phi.support();
    if support == crate::calculus::Support::Empty {
        return Ok(0.0);
    }
    if let TestFunction::Const(c) = phi {
        return Ok(c * model.total_mass());
    }
    model.integrate(|x, m| phi.value(x, m), support.window(), tol)
}

/// e(φ; ω) = exp(⟨log(1+φ), ω⟩ − ⟨φ⟩_σ̃) given ⟨φ⟩_σ̃.
pub fn poisson_exponential_with_mean(phi: &TestFunction, mean: f64, omega: &MarkedConfiguration) -> Result<f64> {
    let support = phi.support();
    let mut log_sum = 0.0;
    for (x, m) in omega.iter() {
        if support.excludes(x) {
            continue;
        }
        let v = phi.value(x, m);
        if !(v > -1.0) {
            return Err(Error::Domain(format!("exponential vector needs φ > −1, got φ = {v} at {x:?}")));
        }
        log_sum += v.ln_1p();
    }
    Ok((log_sum - mean).exp())
}

/// e(φ; ω) = exp(⟨log(1+φ), ω⟩ − ⟨φ⟩_σ̃).
pub fn poisson_exponential(phi: &TestFunction, omega: &MarkedConfiguration, model: &IntensityModel) -> Result<f64> {
    let mean = sigma_mean(phi, model, Tolerance::default())?;
    poisson_exponential_with_mean(phi, mean, omega)
}

/// (a⁻(φ)F)(ω) = ∫ (F(ω + ε_{(x,m)}) − F(ω)) φ(x,m) σ̃(dx,dm).
pub fn annihilation<F>(
    phi: &TestFunction,
    f: F,
    omega: &MarkedConfiguration,
    model: &IntensityModel,
    tol: Tolerance,
) -> Result<f64>
where
    F: Fn(&MarkedConfiguration) -> f64,
{
    let support = phi.support();
    if support == crate::calculus::Support::Empty {
        return Ok(0.0);
    }
    let base = f(omega);
    let failure = std::cell::RefCell::new(None);
    let value = model.integrate(
        |x, m| {
            let w = phi.value(x, m);
            if w == 0.0 {
                return 0.0;
            }
            match omega.with_point(*x, *m) {
                Ok(bigger) => (f(&bigger) - base) * w,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        },
        support.window(),
        tol,
    )?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// A Monte Carlo estimate next to its closed-form target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingCheck {
    pub estimate: Estimate,
    pub target: f64,
}

impl PairingCheck {
    pub fn residual(&self) -> f64 {
        self.estimate.mean - self.target
    }

    pub fn passes(&self) -> bool {
        self.estimate.passes(self.target)
    }
}

/// E_π[e(φ; ω)·e(ψ; ω)] against exp((φ, ψ)_{L²(σ̃)}).
pub fn expvec_pairing_mc(
    phi: &TestFunction,
    psi: &TestFunction,
    model: &IntensityModel,
    n_samples: u64,
    seed: u64,
    tol: Tolerance,
) -> Result<PairingCheck> {
    let target = FockSpace::new(model, tol).l2(phi, psi)?.exp();
    let (ma, mb) = (sigma_mean(phi, model, tol)?, sigma_mean(psi, model, tol)?);
    let est = mc_estimate_many(&Measure::Poisson(model), n_samples, seed, 1, |w| {
        Ok(vec![poisson_exponential_with_mean(phi, ma, w)? * poisson_exponential_with_mean(psi, mb, w)?])
    })?;
    Ok(PairingCheck { estimate: est[0], target })
}

/// Compiled image I(F)(ω) = Σ_n Q_n(f⁽ⁿ⁾; ω) of a chaos vector.
#[derive(Clone, Debug)]
pub struct ChaosFunctional {
    plans: Vec<CharlierPlan>,
}

impl ChaosFunctional {
    pub fn compile(f: &ChaosVector, model: &IntensityModel, tol: Tolerance, max_degree: usize) -> Result<Self> {
        let plans = f
            .components
            .iter()
            .map(|t| CharlierPlan::compile(t, model, tol, max_degree))
            .collect::<Result<Vec<_>>>()?;
        Ok(ChaosFunctional { plans })
    }

    pub fn eval(&self, omega: &MarkedConfiguration) -> f64 {
        self.plans.iter().map(|p| p.eval(omega)).sum()
    }
}

#[cfg(test)]
mod tests;
