//! Cylinder functions F(ω) = g(⟨φ₁, ω⟩, …, ⟨φ_N, ω⟩) and the calculus on Ω_X.

use std::sync::Arc;

use crate::base_space::{AlgebraField, BaseField, Point};
use crate::configuration::MarkedConfiguration;
use crate::error::{Error, Result};
use crate::jet::{next_generator, Jet};
use crate::mark_space::{AlgebraVector, MarkPoint, MarkSpace};
use crate::sampling::{mc_estimate_many, Estimate, IntensityModel, Measure};

use super::test_function::{direction_support, Support, TestFunction};

/// The outer function g of a cylinder function, as a term in its arguments.
#[derive(Clone, Debug, PartialEq)]
pub enum Outer {
    Var(usize),
    Const(f64),
    Add(Vec<Outer>),
    Mul(Vec<Outer>),
    Scale(f64, Box<Outer>),
    Exp(Box<Outer>),
    Sin(Box<Outer>),
    Cos(Box<Outer>),
    Tanh(Box<Outer>),
    /// ∂g/∂y_j.
    Partial(Box<Outer>, usize),
}

impl Outer {
    pub fn var(j: usize) -> Self {
        Outer::Var(j)
    }

    pub fn exp(self) -> Self {
        Outer::Exp(Box::new(self))
    }

    pub fn sin(self) -> Self {
        Outer::Sin(Box::new(self))
    }

    pub fn cos(self) -> Self {
        Outer::Cos(Box::new(self))
    }

    pub fn tanh(self) -> Self {
        Outer::Tanh(Box::new(self))
    }

    pub fn scaled(self, s: f64) -> Self {
        Outer::Scale(s, Box::new(self))
    }

    pub fn partial(&self, j: usize) -> Self {
        Outer::Partial(Box::new(self.clone()), j)
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Outer::Var(j) => Some(*j),
            Outer::Const(_) => None,
            Outer::Add(p) | Outer::Mul(p) => p.iter().filter_map(Outer::max_var).max(),
            Outer::Scale(_, g) | Outer::Exp(g) | Outer::Sin(g) | Outer::Cos(g) | Outer::Tanh(g) => g.max_var(),
            Outer::Partial(g, _) => g.max_var(),
        }
    }

    pub fn eval_jet(&self, y: &[Jet]) -> Jet {
        match self {
            Outer::Var(j) => y[*j],
            Outer::Const(c) => Jet::constant(*c),
            Outer::Add(p) => p.iter().map(|g| g.eval_jet(y)).sum(),
            Outer::Mul(p) => p.iter().fold(Jet::constant(1.0), |acc, g| acc * g.eval_jet(y)),
            Outer::Scale(s, g) => g.eval_jet(y) * *s,
            Outer::Exp(g) => g.eval_jet(y).exp(),
            Outer::Sin(g) => g.eval_jet(y).sin(),
            Outer::Cos(g) => g.eval_jet(y).cos(),
            Outer::Tanh(g) => g.eval_jet(y).tanh(),
            Outer::Partial(g, j) => {
                let k = next_generator(y.iter());
                let mut moved = y.to_vec();
                moved[*j] += Jet::epsilon(k);
                g.eval_jet(&moved).derivative(k)
            }
        }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let jets: Vec<Jet> = y.iter().map(|&v| Jet::constant(v)).collect();
        self.eval_jet(&jets).value()
    }

    /// ∇g(y).
    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        (0..y.len())
            .map(|j| {
                let jets: Vec<Jet> =
                    y.iter().enumerate().map(|(i, &v)| if i == j { Jet::variable(v, 0) } else { Jet::constant(v) }).collect();
                self.eval_jet(&jets).derivative(0).value()
            })
            .collect()
    }

    /// ∇²g(y), row-major.
    pub fn hessian(&self, y: &[f64]) -> Vec<Vec<f64>> {
        let n = y.len();
        let mut h = vec![vec![0.0; n]; n];
        for j in 0..n {
            for k in j..n {
                let jets: Vec<Jet> = y
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let mut x = Jet::constant(v);
                        if i == j {
                            x += Jet::epsilon(0);
                        }
                        if i == k {
                            x += Jet::epsilon(1);
                        }
                        x
                    })
                    .collect();
                let v = self.eval_jet(&jets).derivative(1).derivative(0).value();
                h[j][k] = v;
                h[k][j] = v;
            }
        }
        h
    }
}

/// A direction (v, u) ∈ 𝔞 = V₀(X) × C₀^∞(X; 𝔤).
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionPair {
    pub space: MarkSpace,
    pub v: BaseField,
    pub u: AlgebraField,
}

impl DirectionPair {
    pub fn new(space: MarkSpace, v: BaseField, u: AlgebraField) -> Result<Self> {
        if u.algebra_dim() != space.algebra_dim() {
            return Err(Error::Usage(format!(
                "current has {} components, the {space} algebra has {}",
                u.algebra_dim(),
                space.algebra_dim()
            )));
        }
        Ok(DirectionPair { space, v, u })
    }

    pub fn zero(space: MarkSpace, dim: usize) -> Self {
        DirectionPair { space, v: BaseField::zero(dim), u: AlgebraField::zero(dim, space.algebra_dim()) }
    }

    pub fn base(space: MarkSpace, v: BaseField) -> Self {
        let dim = v.dim();
        DirectionPair { space, v, u: AlgebraField::zero(dim, space.algebra_dim()) }
    }

    pub fn current(space: MarkSpace, dim: usize, u: AlgebraField) -> Self {
        DirectionPair { space, v: BaseField::zero(dim), u }
    }

    pub fn is_zero(&self) -> bool {
        self.v.is_zero() && self.u.is_zero()
    }

    pub fn scaled(&self, s: f64) -> Self {
        DirectionPair {
            space: self.space,
            v: self.v.clone().scaled(s),
            u: AlgebraField::Scaled(s, Box::new(self.u.clone())),
        }
    }

    /// Value (v(x), u(x)) at a base point.
    pub fn eval(&self, x: &Point) -> ([f64; 2], AlgebraVector) {
        (self.v.eval(x), self.u.eval(x))
    }
}

/// [(v₁,u₁), (v₂,u₂)] = ([v₁,v₂], ∇_{v₁}u₂ − ∇_{v₂}u₁ + [u₁,u₂]).
pub fn lie_bracket(a: &DirectionPair, b: &DirectionPair) -> Result<DirectionPair> {
    if a.space != b.space {
        return Err(Error::Usage(format!("cannot bracket {} and {} directions", a.space, b.space)));
    }
    let u = AlgebraField::Sum(vec![
        AlgebraField::DerivAlong(Box::new(a.v.clone()), Box::new(b.u.clone())),
        AlgebraField::Scaled(-1.0, Box::new(AlgebraField::DerivAlong(Box::new(b.v.clone()), Box::new(a.u.clone())))),
        AlgebraField::GBracket(a.space, Box::new(a.u.clone()), Box::new(b.u.clone())),
    ]);
    Ok(DirectionPair { space: a.space, v: BaseField::bracket(a.v.clone(), b.v.clone()), u })
}

/// An element of T_ω = L²(X → TX ⊕ 𝔤; γ), stored per point of ω.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    pub values: Vec<(Point, [f64; 2], AlgebraVector)>,
}

impl TangentVector {
    /// Σ_x ⟨V(x), (v(x), u(x))⟩ with the Euclidean product on TX ⊕ 𝔤.
    pub fn pair_direction(&self, dir: &DirectionPair) -> f64 {
        self.values
            .iter()
            .map(|(x, vx, gx)| {
                let (v, u) = dir.eval(x);
                (0..x.dim()).map(|i| vx[i] * v[i]).sum::<f64>() + gx.dot(&u)
            })
            .sum()
    }

    /// ⟨V, W⟩_{T_ω}; both vectors must live over the same ω.
    pub fn inner(&self, other: &TangentVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|((x, a, g), (_, b, h))| (0..x.dim()).map(|i| a[i] * b[i]).sum::<f64>() + g.dot(h))
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|(_, v, g)| v.iter().all(|c| *c == 0.0) && g.as_slice().iter().all(|c| *c == 0.0))
    }
}

/// F(ω) = g(⟨φ₁, ω⟩, …, ⟨φ_N, ω⟩).
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderFunction {
    tests: Vec<TestFunction>,
    outer: Outer,
}

impl CylinderFunction {
    pub fn new(tests: Vec<TestFunction>, outer: Outer) -> Result<Self> {
        if tests.is_empty() {
            return Err(Error::Usage("a cylinder function needs at least one test function".into()));
        }
        if let Some(j) = outer.max_var() {
            if j >= tests.len() {
                return Err(Error::Usage(format!("outer function uses y{j} but only {} tests are given", tests.len())));
            }
        }
        Ok(CylinderFunction { tests, outer })
    }

    pub fn constant(c: f64) -> Self {
        CylinderFunction { tests: vec![TestFunction::Const(0.0)], outer: Outer::Const(c) }
    }

    /// L_φ(ω) = ⟨φ, ω⟩.
    pub fn linear(phi: TestFunction) -> Self {
        CylinderFunction { tests: vec![phi], outer: Outer::Var(0) }
    }

    /// e^{⟨φ, ω⟩}.
    pub fn exponential(phi: TestFunction) -> Self {
        CylinderFunction { tests: vec![phi], outer: Outer::Var(0).exp() }
    }

    pub fn tests(&self) -> &[TestFunction] {
        &self.tests
    }

    pub fn outer(&self) -> &Outer {
        &self.outer
    }

    pub fn pairings(&self, omega: &MarkedConfiguration) -> Vec<f64> {
        self.tests.iter().map(|t| t.pair(omega)).collect()
    }

    pub fn value(&self, omega: &MarkedConfiguration) -> f64 {
        self.outer.eval(&self.pairings(omega))
    }

    fn partial_sum(&self, extra: usize) -> Outer {
        let n = self.tests.len();
        Outer::Add((0..n).map(|j| Outer::Mul(vec![Outer::Var(n * extra + j), self.outer.partial(j)])).collect())
    }

    /// ∇^Ω_{(v,u)} F as a cylinder function over {φ_j, ∇_{(v,u)}φ_j}.
    pub fn directional(&self, dir: &DirectionPair) -> CylinderFunction {
        let mut tests = self.tests.clone();
        tests.extend(self.tests.iter().map(|t| t.directional(&dir.v, &dir.u)));
        CylinderFunction { tests, outer: self.partial_sum(1) }
    }

    /// K F = ∇^Ω_{(v,u)} F + ½ B_{(v,u)} F as a cylinder function over {φ_j, ∇φ_j, β}.
    pub fn k_operator(&self, dir: &DirectionPair, model: &Arc<IntensityModel>) -> CylinderFunction {
        let n = self.tests.len();
        let mut tests = self.tests.clone();
        tests.extend(self.tests.iter().map(|t| t.directional(&dir.v, &dir.u)));
        tests.push(TestFunction::log_derivative(&dir.v, &dir.u, model));
        let half_b = Outer::Mul(vec![Outer::Const(0.5), Outer::Var(2 * n), self.outer.clone()]);
        CylinderFunction { tests, outer: Outer::Add(vec![self.partial_sum(1), half_b]) }
    }

    /// Σ_j ∂_j g · ⟨∇^{X×M}_{(v,u)} φ_j, ω⟩.
    pub fn dir_derivative(&self, dir: &DirectionPair, omega: &MarkedConfiguration) -> f64 {
        let dg = self.outer.gradient(&self.pairings(omega));
        let reach = direction_support(&dir.v, &dir.u);
        let mut total = 0.0;
        for (t, d) in self.tests.iter().zip(dg) {
            if d == 0.0 {
                continue;
            }
            let support = t.support().intersect(reach.clone());
            total += d * omega.pairing(|x, m| if support.excludes(x) { 0.0 } else { t.directional_value(&dir.v, &dir.u, x, m) });
        }
        total
    }

    /// (∇^Ω F)(ω, x) = Σ_j ∂_j g · ∇^{X×M} φ_j(x, s_x).
    pub fn gradient(&self, omega: &MarkedConfiguration) -> TangentVector {
        let dg = self.outer.gradient(&self.pairings(omega));
        let adim = omega.space().algebra_dim();
        let values = omega
            .iter()
            .map(|(x, m)| {
                let mut v = [0.0; 2];
                let mut g = [0.0; 3];
                for (t, d) in self.tests.iter().zip(&dg) {
                    if *d == 0.0 || t.support().excludes(x) {
                        continue;
                    }
                    let bx = t.base_gradient(x, m);
                    let tm = t.mark_gradient(x, m);
                    for i in 0..x.dim() {
                        v[i] += d * bx[i];
                    }
                    for i in 0..adim {
                        g[i] += d * tm[i];
                    }
                }
                (*x, v, AlgebraVector::new(&g[..adim]))
            })
            .collect();
        TangentVector { values }
    }

    /// H^Ω F(ω) = −Σ ∂_j∂_k g ⟨⟨∇φ_j, ∇φ_k⟩, ω⟩ + Σ ∂_j g ⟨H^{X×M}φ_j, ω⟩.
    pub fn h_omega(&self, model: &Arc<IntensityModel>, omega: &MarkedConfiguration) -> f64 {
        let y = self.pairings(omega);
        let dg = self.outer.gradient(&y);
        let hg = self.outer.hessian(&y);
        let n = self.tests.len();
        let supports: Vec<Support> = self.tests.iter().map(|t| t.support()).collect();
        let adim = omega.space().algebra_dim();
        let mut total = 0.0;
        let mut grads: Vec<Option<([f64; 2], [f64; 3])>> = vec![None; n];
        for (x, m) in omega.iter() {
            for j in 0..n {
                grads[j] = None;
                if supports[j].excludes(x) {
                    continue;
                }
                let t = &self.tests[j];
                if dg[j] != 0.0 {
                    total += dg[j] * t.generator_value(model, x, m);
                }
                if hg[j].iter().any(|h| *h != 0.0) {
                    grads[j] = Some((t.base_gradient(x, m), t.mark_gradient(x, m)));
                }
            }
            for j in 0..n {
                let Some((bj, mj)) = grads[j] else { continue };
                for k in 0..n {
                    let Some((bk, mk)) = grads[k] else { continue };
                    let dot: f64 = (0..x.dim()).map(|i| bj[i] * bk[i]).sum::<f64>() + (0..adim).map(|i| mj[i] * mk[i]).sum::<f64>();
                    total -= hg[j][k] * dot;
                }
            }
        }
        total
    }
}

/// ∇^{X×M}_{(v,u)} φ(x, m).
pub fn dir_derivative_base(phi: &TestFunction, dir: &DirectionPair, x: &Point, m: &MarkPoint) -> f64 {
    phi.directional_value(&dir.v, &dir.u, x, m)
}

/// β_{(v,u)}(x, m) for the intensity of `model`.
pub fn beta_log_derivative(dir: &DirectionPair, x: &Point, m: &MarkPoint, model: &Arc<IntensityModel>) -> f64 {
    TestFunction::log_derivative_value(&dir.v, &dir.u, model, x, m)
}

/// B_{(v,u)}(ω) = ⟨β_{(v,u)}, ω⟩.
pub fn b_config(dir: &DirectionPair, omega: &MarkedConfiguration, model: &Arc<IntensityModel>) -> f64 {
    if dir.is_zero() {
        return 0.0;
    }
    let reach = direction_support(&dir.v, &dir.u);
    omega.pairing(|x, m| if reach.excludes(x) { 0.0 } else { TestFunction::log_derivative_value(&dir.v, &dir.u, model, x, m) })
}

/// H^{X×M} φ(x, m).
pub fn h_base(phi: &TestFunction, x: &Point, m: &MarkPoint, model: &Arc<IntensityModel>) -> f64 {
    phi.generator_value(model, x, m)
}

/// A smooth vector field V = Σ_j F_j · (v_j, u_j) on Ω_X.
pub type ConfigVectorField = Vec<(CylinderFunction, DirectionPair)>;

/// ⟨V(ω), ∇^Ω F(ω)⟩_{T_ω} = Σ_j F_j(ω) ∇^Ω_{(v_j,u_j)}F(ω).
pub fn field_pairing(field: &ConfigVectorField, f: &CylinderFunction, omega: &MarkedConfiguration) -> f64 {
    field.iter().map(|(fj, dir)| fj.value(omega) * f.dir_derivative(dir, omega)).sum()
}

/// div V = Σ_j (∇^Ω_{(v_j,u_j)} F_j + F_j B_{(v_j,u_j)}), so that E⟨V, ∇F⟩ = −E[F div V].
pub fn divergence_cyl(field: &ConfigVectorField, omega: &MarkedConfiguration, model: &Arc<IntensityModel>) -> f64 {
    field
        .iter()
        .map(|(fj, dir)| fj.dir_derivative(dir, omega) + fj.value(omega) * b_config(dir, omega, model))
        .sum()
}

/// Per-sample (∇F₁)F₂ + F₁(∇F₂) + F₁F₂B, whose mean vanishes by integration by parts.
pub fn ibp_config_integrand(
    f1: &CylinderFunction,
    f2: &CylinderFunction,
    dir: &DirectionPair,
    omega: &MarkedConfiguration,
    model: &Arc<IntensityModel>,
) -> f64 {
    let (a, b) = (f1.value(omega), f2.value(omega));
    f1.dir_derivative(dir, omega) * b + a * f2.dir_derivative(dir, omega) + a * b * b_config(dir, omega, model)
}

/// Monte Carlo estimate of E[(∇F₁)F₂ + F₁∇F₂ + F₁F₂B] under `measure`.
pub fn ibp_config_residual(
    f1: &CylinderFunction,
    f2: &CylinderFunction,
    dir: &DirectionPair,
    measure: &Measure<'_>,
    n_samples: u64,
    seed: u64,
) -> Result<Estimate> {
    let model = Arc::new(measure.model().clone());
    let est = mc_estimate_many(measure, n_samples, seed, 1, |w| Ok(vec![ibp_config_integrand(f1, f2, dir, w, &model)]))?;
    Ok(est[0])
}
