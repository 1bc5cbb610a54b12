use std::sync::Arc;

use num_complex::Complex64;

use super::*;
use crate::base_space::Point;
use crate::calculus::{CylinderFunction, UnaryMap};
use crate::mark_space::{MarkPoint, MarkSpace};
use crate::sampling::{presets, sample_rng, Measure};

fn tol() -> Tolerance {
    Tolerance::new(1e-11, 1e-11)
}

fn three_points() -> MarkedConfiguration {
    MarkedConfiguration::new(
        1,
        MarkSpace::Circle,
        vec![
            (Point::new(&[0.2]), MarkPoint::circle(1.0)),
            (Point::new(&[0.5]), MarkPoint::circle(2.0)),
            (Point::new(&[0.9]), MarkPoint::circle(3.0)),
        ],
    )
    .unwrap()
}

fn bump_mark(c: f64) -> TestFunction {
    TestFunction::Product(vec![
        TestFunction::base_bump(&[c], 1.4, 0.8),
        TestFunction::Sum(vec![TestFunction::Const(0.5), TestFunction::MarkFourier(1).scaled(0.4)]),
    ])
}

fn omega_vm(seed: u64) -> MarkedConfiguration {
    Measure::Poisson(&presets::von_mises_circle()).sample(&mut sample_rng(seed, 0), 0).unwrap()
}

/// n!·[sⁿ] e(sφ; ω) by the trapezoidal rule on a circle |s| = r with |sφ|, |s⟨φ⟩| ≤ ½.
fn contour_charlier(phi: &TestFunction, mean: f64, omega: &MarkedConfiguration, n: usize) -> f64 {
    let values: Vec<f64> = omega.iter().map(|(x, m)| phi.value(x, m)).collect();
    let big = values.iter().fold(mean.abs().max(0.5), |a, v| a.max(v.abs()));
    let r = 0.5 / big;
    let count = 128;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..count {
        let zeta = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / count as f64);
        let s = zeta * r;
        let log_e: Complex64 = values.iter().map(|v| (Complex64::new(1.0, 0.0) + s * *v).ln()).sum::<Complex64>() - s * mean;
        acc += log_e.exp() * zeta.powi(-(n as i32));
    }
    let fact: f64 = (1..=n).map(|i| i as f64).product();
    fact * acc.re / (count as f64 * r.powi(n as i32))
}

/// Σ_{A ⊆ [n]} (−1)^{n−|A|} Π_{i∉A} ⟨φᵢ⟩ Σ_{distinct points} Π_{i∈A} φᵢ(xᵢ).
fn partition_charlier(phis: &[TestFunction], means: &[f64], omega: &MarkedConfiguration) -> f64 {
    let n = phis.len();
    let pts: Vec<_> = omega.iter().collect();
    let mut total = 0.0;
    for set in 0u32..(1 << n) {
        let chosen: Vec<usize> = (0..n).filter(|i| set & (1 << i) != 0).collect();
        let outside: f64 = (0..n).filter(|i| set & (1 << i) == 0).map(|i| means[i]).product();
        let sign = if (n - chosen.len()) % 2 == 0 { 1.0 } else { -1.0 };
        fn distinct(phis: &[TestFunction], chosen: &[usize], pts: &[&(Point, MarkPoint)], used: &mut Vec<usize>) -> f64 {
            if used.len() == chosen.len() {
                return 1.0;
            }
            let f = &phis[chosen[used.len()]];
            let mut s = 0.0;
            for p in 0..pts.len() {
                if used.contains(&p) {
                    continue;
                }
                let v = f.value(&pts[p].0, &pts[p].1);
                used.push(p);
                s += v * distinct(phis, chosen, pts, used);
                used.pop();
            }
            s
        }
        total += sign * outside * distinct(phis, &chosen, &pts, &mut Vec::new());
    }
    total
}

#[test]
fn low_degree_charlier_values() {
    let model = presets::von_mises_circle();
    let phi = bump_mark(0.1);
    let omega = omega_vm(3);
    let q0 = CharlierPlan::compile(&SymmetricTensor::vacuum(1.0), &model, tol(), 6).unwrap();
    assert_eq!(q0.eval(&omega), 1.0);
    let q1 = CharlierPlan::compile(&SymmetricTensor::power(&phi, 1), &model, tol(), 6).unwrap().eval(&omega);
    let mean = sigma_mean(&phi, &model, tol()).unwrap();
    assert!((q1 - (phi.pair(&omega) - mean)).abs() < 1e-13);
}

#[test]
fn hand_value_on_the_mass_two_scenario() {
    let model = Arc::new(presets::mass_two_circle());
    let q2 = charlier(&SymmetricTensor::power(&TestFunction::Const(1.0), 2), &three_points(), &model).unwrap();
    assert_eq!(q2, -2.0);
}

#[test]
fn degree_overflow_is_rejected() {
    let model = presets::mass_two_circle();
    let t = SymmetricTensor::power(&TestFunction::Const(1.0), 7);
    assert!(matches!(CharlierPlan::compile(&t, &model, tol(), 6), Err(Error::Usage(_))));
}

#[test]
fn recursion_matches_generating_function() {
    let flat = presets::mass_two_circle();
    let vm = presets::von_mises_circle();
    let cases: Vec<(&IntensityModel, TestFunction, MarkedConfiguration)> = vec![
        (&flat, TestFunction::Const(1.0), three_points()),
        (&flat, TestFunction::Const(0.7), Measure::Poisson(&flat).sample(&mut sample_rng(8, 0), 0).unwrap()),
        (&vm, bump_mark(0.0), omega_vm(1)),
        (&vm, bump_mark(-0.4), omega_vm(2)),
    ];
    for (model, phi, omega) in cases {
        let mean = sigma_mean(&phi, model, tol()).unwrap();
        for n in 0..=6 {
            let plan = CharlierPlan::compile(&SymmetricTensor::power(&phi, n), model, tol(), 6).unwrap();
            let q = plan.eval(&omega);
            let oracle = contour_charlier(&phi, mean, &omega, n);
            assert!((q - oracle).abs() <= 1e-6 * oracle.abs().max(1.0), "n={n}: {q} vs {oracle}");
        }
    }
}

#[test]
fn mixed_tensors_match_distinct_point_sums() {
    let model = presets::von_mises_circle();
    let phis = [bump_mark(0.0), bump_mark(0.6), TestFunction::base_bump(&[-0.3], 1.0, 1.2)];
    let means: Vec<f64> = phis.iter().map(|p| sigma_mean(p, &model, tol()).unwrap()).collect();
    for seed in 0..3 {
        let omega = omega_vm(40 + seed);
        for pick in [vec![0, 1], vec![0, 0, 1], vec![0, 1, 2], vec![1, 1, 0, 0]] {
            let fs: Vec<TestFunction> = pick.iter().map(|&i| phis[i].clone()).collect();
            let ms: Vec<f64> = pick.iter().map(|&i| means[i]).collect();
            let t = SymmetricTensor::elementary(1.0, fs.clone());
            let q = CharlierPlan::compile(&t, &model, tol(), 6).unwrap().eval(&omega);
            let oracle = partition_charlier(&fs, &ms, &omega);
            assert!((q - oracle).abs() <= 1e-8 * oracle.abs().max(1.0), "{pick:?}: {q} vs {oracle}");
        }
        let a = SymmetricTensor::elementary(2.0, vec![phis[0].clone(), phis[1].clone()]);
        let b = SymmetricTensor::power(&phis[2], 2).scaled(-0.5);
        let sum = CharlierPlan::compile(&a.plus(&b).unwrap(), &model, tol(), 6).unwrap().eval(&omega);
        let parts = CharlierPlan::compile(&a, &model, tol(), 6).unwrap().eval(&omega)
            + CharlierPlan::compile(&b, &model, tol(), 6).unwrap().eval(&omega);
        assert!((sum - parts).abs() < 1e-10 * (1.0 + sum.abs()));
    }
}

#[test]
fn exponential_closed_form() {
    let model = presets::mass_two_circle();
    let omega = three_points();
    assert_eq!(poisson_exponential(&TestFunction::Const(0.0), &omega, &model).unwrap(), 1.0);
    for c in [-0.5, 0.3, 1.7] {
        let e = poisson_exponential(&TestFunction::Const(c), &omega, &model).unwrap();
        let expect = (1.0f64 + c).powi(3) * (-2.0 * c).exp();
        assert!((e - expect).abs() < 1e-13 * expect);
    }
    assert!(matches!(poisson_exponential(&TestFunction::Const(-1.0), &omega, &model), Err(Error::Domain(_))));
}

#[test]
fn exponential_matches_truncated_chaos_series() {
    let model = presets::von_mises_circle();
    let phi = bump_mark(0.2).scaled(0.3);
    let omega = omega_vm(5);
    let e = poisson_exponential(&phi, &omega, &model).unwrap();
    let series = ChaosFunctional::compile(&ChaosVector::exponential(&phi, 6), &model, tol(), 6).unwrap().eval(&omega);
    // the coefficients of s ↦ e(sφ) decay geometrically at rate max|φ| on ω plus the mean
    let big = omega.iter().map(|(x, m)| phi.value(x, m).abs()).fold(0.0f64, f64::max);
    let rate = big.max(0.3);
    let bound = 10.0 * rate.powi(7) / (1.0 - rate);
    assert!((e - series).abs() <= bound, "{e} vs {series}, bound {bound}");
}

#[test]
fn annihilation_rules() {
    let model = presets::von_mises_circle();
    let phi = bump_mark(0.1);
    let psi = bump_mark(-0.3);
    let omega = omega_vm(9);
    let t = Tolerance::new(1e-10, 1e-10);
    assert_eq!(annihilation(&phi, |_| 4.0, &omega, &model, t).unwrap(), 0.0);
    let lin = annihilation(&phi, |w| psi.pair(w), &omega, &model, t).unwrap();
    let mut fock = FockSpace::new(&model, t);
    let inner = fock.l2(&phi, &psi).unwrap();
    assert!((lin - inner).abs() < 1e-9);
    for n in 1..=4 {
        let qn = CharlierPlan::compile(&SymmetricTensor::power(&psi, n), &model, t, 6).unwrap();
        let qm = CharlierPlan::compile(&SymmetricTensor::power(&psi, n - 1), &model, t, 6).unwrap();
        let lhs = annihilation(&phi, |w| qn.eval(w), &omega, &model, t).unwrap();
        let rhs = n as f64 * inner * qm.eval(&omega);
        assert!((lhs - rhs).abs() <= 1e-5 * rhs.abs().max(1.0), "n={n}: {lhs} vs {rhs}");
    }
}

#[test]
fn fock_inner_products() {
    let model = presets::von_mises_circle();
    let mut fock = FockSpace::new(&model, tol());
    let vac = ChaosVector::vacuum();
    assert!((fock.fock_inner(&vac, &vac).unwrap() - 1.0).abs() < 1e-15);
    let phi = bump_mark(0.1);
    let psi = bump_mark(-0.3).scaled(1.3);
    let ip = fock.l2(&phi, &psi).unwrap();
    let lhs = fock.fock_inner(&ChaosVector::exponential(&phi, 14), &ChaosVector::exponential(&psi, 14)).unwrap();
    assert!((lhs - ip.exp()).abs() < 1e-12 * ip.exp());
    let p3 = SymmetricTensor::power(&phi, 3);
    assert!((fock.tensor_inner(&p3, &p3).unwrap() - fock.l2(&phi, &phi).unwrap().powi(3)).abs() < 1e-12);
    // ⟨a⁻(χ)F, G⟩ = ⟨F, a⁺(χ)G⟩
    let chi = TestFunction::base_bump(&[0.4], 1.1, 0.9);
    let f = ChaosVector {
        components: vec![
            SymmetricTensor::vacuum(0.3),
            SymmetricTensor::power(&phi, 1),
            SymmetricTensor::elementary(1.0, vec![phi.clone(), psi.clone()]),
        ],
    };
    let g = ChaosVector { components: vec![SymmetricTensor::vacuum(-1.0), SymmetricTensor::power(&psi, 1).scaled(2.0)] };
    let left = fock.annihilation(&chi, &f).unwrap();
    let a = fock.fock_inner(&left, &g).unwrap();
    let b = fock.fock_inner(&f, &g.creation(&chi)).unwrap();
    assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
}

fn heat() -> HeatKernelModel {
    HeatKernelModel::new(Arc::new(presets::ou_circle())).unwrap()
}

#[test]
fn semigroup_on_eigen_expansions() {
    let heat = heat();
    let phi = EigenExpansion { terms: vec![(1, 1, 0.1), (2, 0, 0.05), (0, -2, 0.03)] };
    assert_eq!(heat.damp(&phi, 0.0), phi);
    let single = EigenExpansion::single(1, 1, 0.1);
    assert!((heat.damp(&single, 0.7).terms[0].2 - 0.1 * (-1.4f64).exp()).abs() < 1e-16);
    let two = heat.damp(&heat.damp(&phi, 0.3), 0.45);
    let once = heat.damp(&phi, 0.75);
    for (a, b) in two.terms.iter().zip(&once.terms) {
        assert!((a.2 - b.2).abs() <= 1e-16 * b.2.abs().max(1e-300) * 4.0);
    }
    let omega = Measure::Poisson(heat.model()).sample(&mut sample_rng(2, 0), 0).unwrap();
    let t0 = semigroup_apply_expvec(0.0, &phi, &heat, tol()).unwrap()(&omega).unwrap();
    let f = phi.test_function();
    let direct: f64 = omega.iter().map(|(x, m)| f.value(x, m).ln_1p()).sum::<f64>().exp();
    assert!((t0 - direct).abs() < 1e-13 * direct);
    assert!(HeatKernelModel::new(Arc::new(presets::von_mises_circle())).is_err());
}

#[test]
fn semigroup_generator_is_the_configuration_dirichlet_operator() {
    let heat = heat();
    let phi = EigenExpansion { terms: vec![(1, 1, 0.1), (2, -1, 0.04)] };
    let f = CylinderFunction::exponential(phi.test_function().map(UnaryMap::Log1p));
    for seed in 0..4 {
        let omega = Measure::Poisson(heat.model()).sample(&mut sample_rng(30 + seed, 0), 0).unwrap();
        let at = |t: f64| semigroup_apply_expvec(t, &phi, &heat, tol()).unwrap()(&omega).unwrap();
        // one-sided derivative at t = 0 by Richardson on forward differences
        let h = 1e-4;
        let d1 = (at(h) - at(0.0)) / h;
        let d2 = (at(h / 2.0) - at(0.0)) / (h / 2.0);
        let deriv = 2.0 * d2 - d1;
        let h_f = f.h_omega(heat.model(), &omega);
        assert!((deriv + h_f).abs() < 1e-6 * (1.0 + h_f.abs()), "{deriv} vs {}", -h_f);
    }
}

#[test]
fn eigenfunction_inner_product_quadrature() {
    let heat = heat();
    let phi = EigenExpansion::single(1, 1, 0.1).test_function();
    let mut fock = FockSpace::new(heat.model(), tol());
    let ip = fock.l2(&phi, &phi).unwrap();
    let expect = 0.01 * (2.0 * std::f64::consts::PI).sqrt() / 2.0;
    assert!((ip - expect).abs() < 1e-10, "{ip} vs {expect}");
    let orth = EigenExpansion::single(1, -1, 0.1).test_function();
    assert!(fock.l2(&phi, &orth).unwrap().abs() < 1e-12);
}

#[test]
fn vacuum_expectation_of_exponential() {
    let model = presets::von_mises_circle();
    let phi = bump_mark(0.2).scaled(0.5);
    let mean = sigma_mean(&phi, &model, tol()).unwrap();
    let est = crate::sampling::mc_estimate_many(&Measure::Poisson(&model), 20_000, 17, 1, |w| {
        Ok(vec![poisson_exponential_with_mean(&phi, mean, w)?])
    })
    .unwrap()[0];
    assert!(est.passes(1.0), "{est:?}");
}
