use super::*;
use crate::base_space::{AlgebraField, BaseField, Point};
use crate::configuration::MarkedConfiguration;
use crate::group_action::GroupElement;
use crate::mark_space::{AlgebraVector, MarkPoint, MarkSpace};
use crate::sampling::{presets, sample_rng, Measure};

fn circle_pair() -> DirectionPair {
    DirectionPair::new(
        MarkSpace::Circle,
        BaseField::bump(&[0.2], 1.1, &[0.6]).unwrap(),
        AlgebraField::bump(&[0.4], 1.3, AlgebraVector::scalar(0.8)).unwrap(),
    )
    .unwrap()
}

fn circle_test() -> TestFunction {
    TestFunction::Product(vec![
        TestFunction::base_bump(&[0.3], 1.5, 2.0),
        TestFunction::Sum(vec![TestFunction::MarkFourier(1), TestFunction::MarkFourier(-2).scaled(0.5)]),
    ])
}

fn sphere_pair() -> DirectionPair {
    DirectionPair::new(
        MarkSpace::Sphere,
        BaseField::bump(&[0.1], 1.2, &[0.5]).unwrap(),
        AlgebraField::bump(&[-0.2], 1.4, AlgebraVector::new(&[0.7, -0.4, 0.9])).unwrap(),
    )
    .unwrap()
}

fn sphere_test() -> TestFunction {
    TestFunction::Product(vec![
        TestFunction::base_bump(&[0.0], 1.6, 1.0),
        TestFunction::MarkLinear([0.3, -0.5, 0.8]).map(UnaryMap::Exp),
    ])
}

/// Richardson-extrapolated central difference of t ↦ f(t) at 0.
fn richardson(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    let c = |h: f64| (f(h) - f(-h)) / (2.0 * h);
    (4.0 * c(h / 2.0) - c(h)) / 3.0
}

fn flow_fd(phi: &TestFunction, dir: &DirectionPair, x: &Point, m: &MarkPoint, h: f64) -> f64 {
    (phi_at(phi, dir, x, m, h) - phi_at(phi, dir, x, m, -h)) / (2.0 * h)
}

fn phi_at(phi: &TestFunction, dir: &DirectionPair, x: &Point, m: &MarkPoint, t: f64) -> f64 {
    let g = GroupElement::from_pair(dir.space, dir.v.clone(), dir.u.clone(), t).unwrap();
    let (y, n) = g.act_point(x, m).unwrap();
    phi.value(&y, &n)
}

#[test]
fn directional_derivative_matches_flow_difference() {
    let cases = [
        (circle_test(), circle_pair(), MarkPoint::circle(0.9)),
        (sphere_test(), sphere_pair(), MarkPoint::sphere([0.2, 0.6, -0.7])),
    ];
    for (phi, dir, m) in cases {
        let x = Point::new(&[0.35]);
        let exact = dir_derivative_base(&phi, &dir, &x, &m);
        let e1 = (flow_fd(&phi, &dir, &x, &m, 1e-2) - exact).abs();
        let e2 = (flow_fd(&phi, &dir, &x, &m, 5e-3) - exact).abs();
        assert!(e2 < 1e-5, "{exact} err {e2}");
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "convergence ratio {ratio}");
    }
}

#[test]
fn directional_reductions() {
    let x = Point::new(&[0.1]);
    let m = MarkPoint::circle(2.0);
    let zero = DirectionPair::zero(MarkSpace::Circle, 1);
    assert_eq!(dir_derivative_base(&circle_test(), &zero, &x, &m), 0.0);
    let f = TestFunction::base_bump(&[0.0], 1.0, 1.0);
    let dir = circle_pair();
    let expect = f.base_gradient(&x, &m)[0] * dir.v.eval(&x)[0];
    assert!((dir_derivative_base(&f, &dir, &x, &m) - expect).abs() < 1e-14);
    let both = dir_derivative_base(&circle_test(), &dir, &x, &m);
    let v_only = dir_derivative_base(&circle_test(), &DirectionPair::base(MarkSpace::Circle, dir.v.clone()), &x, &m);
    let u_only = dir_derivative_base(&circle_test(), &DirectionPair::current(MarkSpace::Circle, 1, dir.u.clone()), &x, &m);
    assert!((both - v_only - u_only).abs() < 1e-14);
}

#[test]
fn derivative_rules_match_finite_differences() {
    let phi = TestFunction::Product(vec![
        TestFunction::base_bump(&[0.1, -0.2], 1.4, 1.5),
        TestFunction::Sum(vec![TestFunction::MarkFourier(2), TestFunction::Coordinate(1).map(UnaryMap::Sin)]),
    ]);
    let x = Point::new(&[0.3, 0.25]);
    let m = MarkPoint::circle(0.7);
    let g = phi.base_gradient(&x, &m);
    let lap = phi.base_laplacian(&x, &m);
    let mut fd_lap = 0.0;
    for i in 0..2 {
        let shifted = |t: f64| {
            let mut c = [x.get(0), x.get(1)];
            c[i] += t;
            phi.value(&Point::new(&c), &m)
        };
        assert!((richardson(shifted, 1e-3) - g[i]).abs() < 1e-9);
        let h: f64 = 1e-3;
        fd_lap += (shifted(h) - 2.0 * shifted(0.0) + shifted(-h)) / (h * h);
    }
    assert!((fd_lap - lap).abs() < 1e-5, "{fd_lap} vs {lap}");
    let tg = phi.mark_gradient(&x, &m)[0];
    let along = |t: f64| phi.value(&x, &MarkPoint::circle(0.7 + t));
    assert!((richardson(along, 1e-3) - tg).abs() < 1e-9);
    let h: f64 = 1e-3;
    let fd = (along(h) - 2.0 * along(0.0) + along(-h)) / (h * h);
    assert!((fd - phi.mark_laplacian(&x, &m)).abs() < 1e-5);
}

#[test]
fn support_rules() {
    let a = TestFunction::base_bump(&[0.0], 1.0, 1.0);
    let b = TestFunction::base_bump(&[5.0], 1.0, 1.0);
    assert_eq!(TestFunction::Product(vec![a.clone(), b.clone()]).support(), Support::Empty);
    let hull = TestFunction::Sum(vec![a.clone(), b.clone()]).support();
    assert!(!hull.excludes(&Point::new(&[3.0])));
    assert!(hull.excludes(&Point::new(&[6.5])));
    assert_eq!(TestFunction::Sum(vec![a.clone(), TestFunction::Hermite(1)]).support(), Support::Everywhere);
    assert_eq!(TestFunction::Product(vec![a.clone(), TestFunction::Hermite(2)]).support(), a.support());
    let zero_dir = TestFunction::Hermite(2).directional(&BaseField::zero(1), &AlgebraField::zero(1, 1));
    assert_eq!(zero_dir.support(), Support::Empty);
}

#[test]
fn hermite_times_fourier_is_an_eigenfunction() {
    let model = Arc::new(presets::ou_circle());
    for n in 0..5u32 {
        for k in 0..3i32 {
            let phi = TestFunction::Product(vec![TestFunction::Hermite(n), TestFunction::MarkFourier(k)]);
            for (x, m) in [(0.4, 0.3), (-1.3, 2.2), (2.1, 5.0)] {
                let (x, m) = (Point::new(&[x]), MarkPoint::circle(m));
                let lhs = h_base(&phi, &x, &m, &model);
                let rhs = (n as f64 + (k * k) as f64) * phi.value(&x, &m);
                assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()), "n={n} k={k}: {lhs} vs {rhs}");
            }
        }
    }
    let c = TestFunction::Const(3.0);
    assert_eq!(h_base(&c, &Point::new(&[0.2]), &MarkPoint::circle(0.1), &model), 0.0);
}

#[test]
fn beta_reductions() {
    let flat = Arc::new(presets::mass_two_circle());
    let dir = circle_pair();
    let x = Point::new(&[0.5]);
    let m = MarkPoint::circle(1.0);
    let beta = beta_log_derivative(&dir, &x, &m, &flat);
    assert!((beta - dir.v.divergence(&x)).abs() < 1e-13);
    assert_eq!(beta_log_derivative(&DirectionPair::zero(MarkSpace::Circle, 1), &x, &m, &flat), 0.0);

    let gamma = Arc::new(presets::gamma_dilation());
    let c = 0.7;
    let u = AlgebraField::plateau(&[1.0], 0.3, 0.6, AlgebraVector::scalar(c)).unwrap();
    let dir = DirectionPair::current(MarkSpace::Dilation, 1, u);
    for s in [0.4, 1.0, 2.5, 6.0] {
        let beta = beta_log_derivative(&dir, &Point::new(&[1.1]), &MarkPoint::Dilation(s), &gamma);
        assert!((beta - c * (3.0 - s)).abs() < 1e-12, "{beta}");
    }
}

#[test]
fn base_integration_by_parts() {
    let tol = Tolerance::new(1e-10, 1e-10);
    let cases: Vec<(Arc<IntensityModel>, TestFunction, TestFunction, DirectionPair)> = vec![
        (Arc::new(presets::von_mises_circle()), circle_test(), TestFunction::base_bump(&[0.0], 1.8, 1.0), circle_pair()),
        (
            Arc::new(presets::tilted_gamma_dilation()),
            TestFunction::Product(vec![
                TestFunction::base_bump(&[0.2], 1.5, 1.0),
                TestFunction::MarkPower { power: 2.0, decay: 0.5 },
            ]),
            TestFunction::base_bump(&[-0.1], 1.7, 1.0),
            DirectionPair::new(
                MarkSpace::Dilation,
                BaseField::bump(&[0.0], 1.2, &[0.4]).unwrap(),
                AlgebraField::bump(&[0.3], 1.1, AlgebraVector::scalar(0.6)).unwrap(),
            )
            .unwrap(),
        ),
        (Arc::new(presets::vmf_sphere()), sphere_test(), TestFunction::base_bump(&[0.2], 1.5, 1.0), sphere_pair()),
    ];
    for (model, phi1, phi2, dir) in cases {
        let r = ibp_base_residual(&phi1, &phi2, &dir, &model, tol).unwrap();
        assert!(r.abs() < 1e-6, "{} residual {r}", model.space());
        let zero = DirectionPair::zero(model.space(), 1);
        assert_eq!(ibp_base_residual(&phi1, &phi2, &zero, &model, tol).unwrap(), 0.0);
        assert_eq!(ibp_base_residual(&TestFunction::Const(0.0), &phi2, &dir, &model, tol).unwrap(), 0.0);
    }
}

#[test]
fn generator_is_symmetric_for_the_dirichlet_form() {
    let tol = Tolerance::new(1e-10, 1e-10);
    let model = Arc::new(presets::von_mises_circle());
    let phi = circle_test();
    let psi = TestFunction::Product(vec![TestFunction::base_bump(&[-0.2], 1.4, 1.0), TestFunction::MarkFourier(-1)]);
    let (lhs, rhs) = dirichlet_pair(&phi, &psi, &model, tol).unwrap();
    assert!((lhs - rhs).abs() < 1e-6, "{lhs} vs {rhs}");
    let (back, _) = dirichlet_pair(&psi, &phi, &model, tol).unwrap();
    assert!((back - lhs).abs() < 1e-6);
}

#[test]
fn outer_derivatives() {
    let g = Outer::Mul(vec![Outer::Var(0), Outer::Add(vec![Outer::Var(1), Outer::Const(2.0)]).tanh()]).exp();
    let y = [0.3, -0.8];
    let f = |a: f64, b: f64| (a * (b + 2.0).tanh()).exp();
    let grad = g.gradient(&y);
    let hess = g.hessian(&y);
    let fd_a = richardson(|t| f(y[0] + t, y[1]), 1e-3);
    let fd_b = richardson(|t| f(y[0], y[1] + t), 1e-3);
    assert!((grad[0] - fd_a).abs() < 1e-9 && (grad[1] - fd_b).abs() < 1e-9);
    let fd_ab = richardson(|t| g.gradient(&[y[0], y[1] + t])[0], 1e-3);
    assert!((hess[0][1] - fd_ab).abs() < 1e-9 && hess[0][1] == hess[1][0]);
    assert!((g.partial(1).eval(&y) - grad[1]).abs() < 1e-14);
}

fn sample_omega(model: &IntensityModel, seed: u64) -> MarkedConfiguration {
    Measure::Poisson(model).sample(&mut sample_rng(seed, 0), 0).unwrap()
}

fn circle_cylinder() -> CylinderFunction {
    CylinderFunction::new(
        vec![circle_test(), TestFunction::Product(vec![TestFunction::base_bump(&[-0.5], 1.2, 1.0), TestFunction::MarkFourier(1)])],
        Outer::Add(vec![Outer::Mul(vec![Outer::Var(0), Outer::Var(1)]).sin(), Outer::Var(1).scaled(0.3)]),
    )
    .unwrap()
}

#[test]
fn cylinder_directional_derivative_matches_action() {
    let model = presets::von_mises_circle();
    let f = circle_cylinder();
    let dir = circle_pair();
    for seed in 0..5 {
        let omega = sample_omega(&model, seed);
        let exact = f.dir_derivative(&dir, &omega);
        let moved = |t: f64| {
            let g = GroupElement::from_pair(dir.space, dir.v.clone(), dir.u.clone(), t).unwrap();
            f.value(&g.act_config(&omega).unwrap())
        };
        let fd = richardson(moved, 1e-2);
        assert!((fd - exact).abs() < 1e-7 * (1.0 + exact.abs()), "{fd} vs {exact}");
        let materialized = f.directional(&dir).value(&omega);
        assert!((materialized - exact).abs() < 1e-12 * (1.0 + exact.abs()));
        let additive = f.dir_derivative(&DirectionPair::base(MarkSpace::Circle, dir.v.clone()), &omega)
            + f.dir_derivative(&DirectionPair::current(MarkSpace::Circle, 1, dir.u.clone()), &omega);
        assert!((additive - exact).abs() < 1e-12 * (1.0 + exact.abs()));
        let grad = f.gradient(&omega);
        assert!((grad.pair_direction(&dir) - exact).abs() < 1e-12 * (1.0 + exact.abs()));
    }
}

#[test]
fn cylinder_trivial_cases() {
    let model = Arc::new(presets::von_mises_circle());
    let omega = sample_omega(&model, 11);
    let empty = MarkedConfiguration::empty(1, MarkSpace::Circle);
    let c = CylinderFunction::constant(2.5);
    let dir = circle_pair();
    assert_eq!(c.dir_derivative(&dir, &omega), 0.0);
    assert!(c.gradient(&omega).is_zero());
    assert_eq!(c.h_omega(&model, &omega), 0.0);
    let lin = CylinderFunction::linear(circle_test());
    assert_eq!(lin.dir_derivative(&dir, &empty), 0.0);
    assert_eq!(lin.h_omega(&model, &empty), 0.0);
    for (x, v, g) in lin.gradient(&omega).values {
        let m = omega.iter().find(|(y, _)| *y == x).unwrap().1;
        assert_eq!(v[0], circle_test().base_gradient(&x, &m)[0]);
        assert_eq!(g.as_slice()[0], circle_test().mark_gradient(&x, &m)[0]);
    }
    assert_eq!(b_config(&dir, &empty, &model), 0.0);
    assert_eq!(b_config(&DirectionPair::zero(MarkSpace::Circle, 1), &omega, &model), 0.0);
    let k1 = c.k_operator(&dir, &model).value(&omega);
    assert!((k1 - 0.5 * 2.5 * b_config(&dir, &omega, &model)).abs() < 1e-12);
    assert_eq!(c.k_operator(&DirectionPair::zero(MarkSpace::Circle, 1), &model).value(&omega), 0.0);
    let field: ConfigVectorField = vec![(CylinderFunction::constant(1.0), dir.clone())];
    assert!((divergence_cyl(&field, &omega, &model) - b_config(&dir, &omega, &model)).abs() < 1e-14);
    assert_eq!(divergence_cyl(&Vec::new(), &omega, &model), 0.0);
}

#[test]
fn b_is_additive_over_disjoint_unions() {
    let model = Arc::new(presets::von_mises_circle());
    let a = sample_omega(&model, 3);
    let b = sample_omega(&model, 4);
    let union = a.union(&b).unwrap();
    let dir = circle_pair();
    let lhs = b_config(&dir, &union, &model);
    let rhs = b_config(&dir, &a, &model) + b_config(&dir, &b, &model);
    assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
}

#[test]
fn exponential_generator_formula() {
    let model = Arc::new(presets::von_mises_circle());
    let phi = circle_test().scaled(0.4);
    let f = CylinderFunction::exponential(phi.clone());
    for seed in 0..3 {
        let omega = sample_omega(&model, 20 + seed);
        let e = phi.pair(&omega).exp();
        let expect = (phi.generator(&model).pair(&omega) - phi.grad_dot(&phi).pair(&omega)) * e;
        let got = f.h_omega(&model, &omega);
        assert!((got - expect).abs() < 1e-12 * (1.0 + expect.abs()));
    }
}

#[test]
fn bracket_basic_properties() {
    let a = circle_pair();
    let self_bracket = lie_bracket(&a, &a).unwrap();
    let b = DirectionPair::new(
        MarkSpace::Circle,
        BaseField::bump(&[-0.1], 1.0, &[0.9]).unwrap(),
        AlgebraField::bump(&[0.1], 0.9, AlgebraVector::scalar(-0.5)).unwrap(),
    )
    .unwrap();
    let ab = lie_bracket(&a, &b).unwrap();
    let ba = lie_bracket(&b, &a).unwrap();
    for x in [-0.6, -0.1, 0.2, 0.5] {
        let x = Point::new(&[x]);
        let (v0, u0) = self_bracket.eval(&x);
        assert!(v0[0].abs() < 1e-15 && u0.norm() < 1e-15);
        let (v1, u1) = ab.eval(&x);
        let (v2, u2) = ba.eval(&x);
        assert!((v1[0] + v2[0]).abs() < 1e-14 && (u1.as_slice()[0] + u2.as_slice()[0]).abs() < 1e-14);
        // in d = 1, [v₁,v₂] = v₁v₂′ − v₂v₁′
        let v = |f: &BaseField, t: f64| f.eval(&Point::new(&[x.get(0) + t]))[0];
        let d_a = richardson(|t| v(&a.v, t), 1e-3);
        let d_b = richardson(|t| v(&b.v, t), 1e-3);
        let expect = v(&a.v, 0.0) * d_b - v(&b.v, 0.0) * d_a;
        assert!((v1[0] - expect).abs() < 1e-9);
    }
    let abelian = AlgebraField::GBracket(MarkSpace::Dilation, Box::new(a.u.clone()), Box::new(b.u.clone()));
    assert_eq!(abelian.eval(&Point::new(&[0.1])).norm(), 0.0);
}

fn check_commutator(model: &Arc<IntensityModel>, f: &CylinderFunction, a: &DirectionPair, b: &DirectionPair, seeds: u64) {
    let ab = lie_bracket(a, b).unwrap();
    let k1k2 = f.k_operator(b, model).k_operator(a, model);
    let k2k1 = f.k_operator(a, model).k_operator(b, model);
    let k12 = f.k_operator(&ab, model);
    let mut largest: f64 = 0.0;
    for seed in 0..seeds {
        let omega = sample_omega(model, 100 + seed);
        let lhs = k1k2.value(&omega) - k2k1.value(&omega);
        let rhs = k12.value(&omega);
        assert!((lhs - rhs).abs() <= 1e-6 * lhs.abs().max(rhs.abs()).max(1e-3), "seed {seed}: {lhs} vs {rhs}");
        largest = largest.max(rhs.abs());
    }
    assert!(largest > 1e-2, "commutator is degenerate: {largest}");
}

#[test]
fn representation_commutator_on_the_circle() {
    let model = Arc::new(presets::von_mises_circle());
    let b = DirectionPair::new(
        MarkSpace::Circle,
        BaseField::bump(&[-0.1], 1.0, &[0.9]).unwrap(),
        AlgebraField::bump(&[0.1], 0.9, AlgebraVector::scalar(-0.5)).unwrap(),
    )
    .unwrap();
    check_commutator(&model, &circle_cylinder(), &circle_pair(), &b, 10);
    let v1 = DirectionPair::base(MarkSpace::Circle, circle_pair().v);
    let v2 = DirectionPair::base(MarkSpace::Circle, b.v.clone());
    check_commutator(&model, &circle_cylinder(), &v1, &v2, 5);
    let u = DirectionPair::current(MarkSpace::Circle, 1, b.u.clone());
    check_commutator(&model, &circle_cylinder(), &v1, &u, 5);
    let vu = lie_bracket(&v1, &u).unwrap();
    let expect = AlgebraField::DerivAlong(Box::new(v1.v.clone()), Box::new(u.u.clone()));
    for x in [-0.4, 0.0, 0.3] {
        let x = Point::new(&[x]);
        assert_eq!(vu.v.eval(&x)[0], 0.0);
        assert!((vu.u.eval(&x).as_slice()[0] - expect.eval(&x).as_slice()[0]).abs() < 1e-15);
    }
}

#[test]
fn representation_commutator_on_the_sphere() {
    let model = Arc::new(presets::vmf_sphere());
    let f = CylinderFunction::new(
        vec![sphere_test(), TestFunction::Product(vec![TestFunction::base_bump(&[0.4], 1.0, 1.0), TestFunction::MarkLinear([1.0, 0.2, 0.0])])],
        Outer::Mul(vec![Outer::Var(0), Outer::Var(1).cos()]),
    )
    .unwrap();
    let b = DirectionPair::new(
        MarkSpace::Sphere,
        BaseField::bump(&[0.3], 1.1, &[-0.6]).unwrap(),
        AlgebraField::bump(&[0.0], 1.3, AlgebraVector::new(&[-0.3, 0.8, 0.5])).unwrap(),
    )
    .unwrap();
    check_commutator(&model, &f, &sphere_pair(), &b, 10);
    let u1 = DirectionPair::current(MarkSpace::Sphere, 1, sphere_pair().u);
    let u2 = DirectionPair::current(MarkSpace::Sphere, 1, b.u.clone());
    check_commutator(&model, &f, &u1, &u2, 5);
}
