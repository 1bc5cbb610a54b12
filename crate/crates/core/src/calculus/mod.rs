//! Intrinsic differential calculus on X × M and on the configuration space.

mod cylinder;
mod test_function;

use std::sync::Arc;

pub use cylinder::{
    b_config, beta_log_derivative, dir_derivative_base, divergence_cyl, field_pairing, h_base, ibp_config_integrand,
    ibp_config_residual, lie_bracket, ConfigVectorField, CylinderFunction, DirectionPair, Outer, TangentVector,
};
pub use test_function::{Support, TestFunction, UnaryMap};

use crate::error::Result;
use crate::quadrature::Tolerance;
use crate::sampling::IntensityModel;

/// ∫(∇φ₁)φ₂ + φ₁(∇φ₂) + φ₁φ₂β dσ̃ by adaptive quadrature; zero up to quadrature error.
pub fn ibp_base_residual(
    phi1: &TestFunction,
    phi2: &TestFunction,
    dir: &DirectionPair,
    model: &Arc<IntensityModel>,
    tol: Tolerance,
) -> Result<f64> {
    if dir.is_zero() {
        return Ok(0.0);
    }
    let support = phi1.support().intersect(phi2.support());
    if support == Support::Empty {
        return Ok(0.0);
    }
    let d1 = phi1.directional(&dir.v, &dir.u);
    let d2 = phi2.directional(&dir.v, &dir.u);
    let beta = TestFunction::log_derivative(&dir.v, &dir.u, model);
    model.integrate(
        |x, m| {
            let (a, b) = (phi1.value(x, m), phi2.value(x, m));
            d1.value(x, m) * b + a * d2.value(x, m) + a * b * beta.value(x, m)
        },
        support.window(),
        tol,
    )
}

/// ∫(H^{X×M}φ)ψ dσ̃ and the Dirichlet form ∫⟨∇φ, ∇ψ⟩ dσ̃, both by quadrature.
pub fn dirichlet_pair(
    phi: &TestFunction,
    psi: &TestFunction,
    model: &Arc<IntensityModel>,
    tol: Tolerance,
) -> Result<(f64, f64)> {
    let support = phi.support().intersect(psi.support());
    if support == Support::Empty {
        return Ok((0.0, 0.0));
    }
    let h = phi.generator(model);
    let form = phi.grad_dot(psi);
    let lhs = model.integrate(|x, m| h.value(x, m) * psi.value(x, m), support.window(), tol)?;
    let rhs = model.integrate(|x, m| form.value(x, m), support.window(), tol)?;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests;
