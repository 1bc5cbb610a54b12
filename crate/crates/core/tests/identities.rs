//! Monte Carlo checks of the configuration-space identities at modest sample sizes.

use std::sync::Arc;

use markcfg_core::base_space::{AlgebraField, BaseField};
use markcfg_core::calculus::{
    divergence_cyl, field_pairing, ibp_config_residual, ConfigVectorField, CylinderFunction, DirectionPair, Outer,
    TestFunction,
};
use markcfg_core::chaos::{
    expvec_pairing_mc, semigroup_mc_check, CharlierPlan, EigenExpansion, FockSpace, HeatKernelModel, SymmetricTensor,
};
use markcfg_core::group_action::GroupElement;
use markcfg_core::mark_space::{AlgebraVector, MarkSpace};
use markcfg_core::quadrature::Tolerance;
use markcfg_core::sampling::{mc_estimate, mc_estimate_many, presets, IntensityModel, Measure, MixingLaw};

const N: u64 = 20_000;
const TOL: Tolerance = Tolerance::new(1e-11, 1e-11);

fn model() -> Arc<IntensityModel> {
    Arc::new(presets::von_mises_circle())
}

fn bump(center: f64, radius: f64, amp: f64, k: i32, c: f64) -> TestFunction {
    TestFunction::Product(vec![
        TestFunction::base_bump(&[center], radius, amp),
        TestFunction::Sum(vec![TestFunction::Const(0.6), TestFunction::MarkFourier(k).scaled(c)]),
    ])
}

fn cylinders() -> (CylinderFunction, CylinderFunction) {
    let f1 = CylinderFunction::new(vec![bump(-0.3, 1.0, 2.0, 1, 0.4)], Outer::var(0).scaled(0.9).sin()).unwrap();
    let f2 = CylinderFunction::new(
        vec![bump(0.4, 0.9, 1.5, -1, 0.3), bump(-0.6, 0.8, 2.2, 2, -0.35)],
        Outer::Mul(vec![Outer::var(0).cos(), Outer::var(1).tanh()]),
    )
    .unwrap();
    (f1, f2)
}

fn direction(center: f64) -> DirectionPair {
    let v = BaseField::bump(&[center], 1.0, &[0.6]).unwrap();
    let u = AlgebraField::bump(&[center + 0.2], 0.9, AlgebraVector::scalar(0.7)).unwrap();
    DirectionPair::new(MarkSpace::Circle, v, u).unwrap()
}

#[test]
fn laplace_functional_matches_closed_form() {
    let model = model();
    let phi = bump(0.2, 1.1, 1.8, 1, 0.5);
    let target = model.laplace_closed(|x, m| phi.value(x, m), phi.support().window()).unwrap();
    let est = mc_estimate(&Measure::Poisson(&model), N, 1, |w| phi.pair(w).exp()).unwrap();
    assert!(est.passes(target), "{est:?} vs {target}");
}

#[test]
fn configuration_integration_by_parts_under_poisson_and_mixed_laws() {
    let model = model();
    let (f1, f2) = cylinders();
    let dir = direction(0.1);
    let kappa = MixingLaw::Discrete { atoms: vec![(1.0, 0.5), (2.0, 0.5)] };
    for measure in [Measure::Poisson(&model), Measure::Mixed(&model, &kappa)] {
        let est = ibp_config_residual(&f1, &f2, &dir, &measure, N, 2).unwrap();
        assert!(est.passes(0.0), "{est:?}");
        assert!(est.std_error > 0.0);
    }
}

#[test]
fn divergence_is_dual_to_the_gradient() {
    let model = model();
    let (f, g) = cylinders();
    let field: ConfigVectorField = vec![(g, direction(-0.2)), (CylinderFunction::constant(1.0), direction(0.5))];
    let est = mc_estimate(&Measure::Poisson(&model), N, 3, |w| {
        field_pairing(&field, &f, w) + f.value(w) * divergence_cyl(&field, w, &model)
    })
    .unwrap();
    assert!(est.passes(0.0), "{est:?}");
}

#[test]
fn dirichlet_operator_is_associated_with_the_form() {
    let model = model();
    let (f1, f2) = cylinders();
    let est = mc_estimate(&Measure::Poisson(&model), N, 4, |w| {
        f1.gradient(w).inner(&f2.gradient(w)) - f1.h_omega(&model, w) * f2.value(w)
    })
    .unwrap();
    assert!(est.passes(0.0), "{est:?}");
}

#[test]
fn change_of_variables_under_a_mixed_element() {
    let model = model();
    let (f, _) = cylinders();
    let dir = direction(0.0);
    let a = GroupElement::from_pair(MarkSpace::Circle, dir.v.clone(), dir.u.clone(), 1.0).unwrap();
    let est = mc_estimate_many(&Measure::Poisson(&model), N, 5, 2, |w| {
        let density = a.rn_density_config(&model, w)?;
        Ok(vec![density, f.value(&a.act_config(w)?) - f.value(w) * density])
    })
    .unwrap();
    assert!(est[0].passes(1.0), "{:?}", est[0]);
    assert!(est[1].passes(0.0), "{:?}", est[1]);
}

#[test]
fn low_order_charlier_polynomials_are_orthogonal() {
    let model = model();
    let (phi, psi) = (bump(0.0, 1.2, 1.6, 1, 0.3), bump(0.1, 1.2, 1.4, 1, -0.2));
    let ip = FockSpace::new(&model, TOL).l2(&phi, &psi).unwrap();
    assert!(ip.abs() > 0.05);
    let plan = |f: &TestFunction, n| CharlierPlan::compile(&SymmetricTensor::power(f, n), &model, TOL, 2).unwrap();
    let (p1, p2, q1, q2) = (plan(&phi, 1), plan(&phi, 2), plan(&psi, 1), plan(&psi, 2));
    let est = mc_estimate_many(&Measure::Poisson(&model), N, 6, 4, |w| {
        let (a1, a2, b1, b2) = (p1.eval(w), p2.eval(w), q1.eval(w), q2.eval(w));
        Ok(vec![a1 * b1, a2 * b2, a1 * b2, a2])
    })
    .unwrap();
    let targets = [ip, 2.0 * ip * ip, 0.0, 0.0];
    for (e, t) in est.iter().zip(targets) {
        assert!(e.passes(t), "{e:?} vs {t}");
    }
}

#[test]
fn exponential_vectors_pair_to_the_exponential_inner_product() {
    let model = model();
    let (phi, psi) = (bump(0.0, 1.2, 0.9, 1, 0.3), bump(0.2, 1.0, 0.8, -1, 0.4));
    let check = expvec_pairing_mc(&phi, &psi, &model, N, 7, TOL).unwrap();
    assert!(check.passes(), "{check:?}");
    assert!(check.target > 1.0);
}

#[test]
fn semigroup_check_reduces_to_the_pairing_at_time_zero() {
    let heat = HeatKernelModel::new(Arc::new(presets::ou_circle())).unwrap();
    let phi = EigenExpansion { terms: vec![(1, 1, 0.1)] };
    let psi = EigenExpansion { terms: vec![(1, 1, 0.1), (0, 2, 0.05)] };
    let at_zero = semigroup_mc_check(0.0, &phi, &psi, &heat, N, 8, TOL).unwrap();
    let direct =
        expvec_pairing_mc(&phi.test_function(), &psi.test_function(), heat.model(), N, 8, TOL).unwrap();
    assert_eq!(at_zero.estimate.mean.to_bits(), direct.estimate.mean.to_bits());
    assert_eq!(at_zero.estimate.std_error.to_bits(), direct.estimate.std_error.to_bits());
    for t in [0.3, 1.0] {
        let check = semigroup_mc_check(t, &phi, &psi, &heat, N, 8, TOL).unwrap();
        assert!(check.passes(), "t = {t}: {check:?}");
        assert!(check.target < at_zero.target);
    }
}
