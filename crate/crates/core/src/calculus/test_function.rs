//! Test functions on X × M as closed combinator terms.
//!
//! A term is evaluated on jets, so every derivative rule (∇^X, Δ^X, ∇̃, Δ̃,
//! directional derivatives, the generator H and the logarithmic derivative β)
//! is exact. Derivative operators are themselves terms, which makes the class
//! closed under differentiation.

use std::sync::Arc;

use crate::base_space::{profile_sq, AlgebraField, BaseField, Point, Window};
use crate::configuration::MarkedConfiguration;
use crate::jet::{next_generator, Jet};
use crate::mark_space::{MarkJet, MarkPoint, MarkSpace};
use crate::sampling::IntensityModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryMap {
    Exp,
    Log1p,
    Square,
    Sin,
    Cos,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TestFunction {
    Const(f64),
    /// amplitude · β(|x − c| / R) on the base.
    BaseBump { center: Point, radius: f64, amplitude: f64 },
    /// Probabilists' Hermite polynomial Heₙ(x₁).
    Hermite(u32),
    /// The coordinate xᵢ.
    Coordinate(usize),
    /// cos(k m) for k ≥ 0 and sin(|k| m) for k < 0 on the circle.
    MarkFourier(i32),
    /// m^p e^{−decay·m} on ℝ₊.
    MarkPower { power: f64, decay: f64 },
    /// ⟨c, m⟩ on the sphere.
    MarkLinear([f64; 3]),
    Sum(Vec<TestFunction>),
    Product(Vec<TestFunction>),
    Scale(f64, Box<TestFunction>),
    Map(UnaryMap, Box<TestFunction>),
    /// ∇^{X×M}_{(v,u)} φ = ⟨∇^X φ, v⟩ + ⟨∇̃ φ, u⟩.
    Directional { phi: Box<TestFunction>, v: BaseField, u: AlgebraField },
    /// ⟨∇^{X×M} a, ∇^{X×M} b⟩ on TX ⊕ 𝔤.
    GradDot(Box<TestFunction>, Box<TestFunction>),
    /// H^{X×M} φ for the intensity of the model.
    Generator(Box<TestFunction>, Arc<IntensityModel>),
    /// β_{(v,u)} for the intensity of the model.
    LogDerivative { v: BaseField, u: AlgebraField, model: Arc<IntensityModel> },
}

/// Where a test function may be non-zero.
#[derive(Clone, Debug, PartialEq)]
pub enum Support {
    Empty,
    /// Contained in the closed box.
    Within(Window),
    Everywhere,
}

impl Support {
    pub fn union(self, other: Support) -> Support {
        match (self, other) {
            (Support::Empty, s) | (s, Support::Empty) => s,
            (Support::Within(a), Support::Within(b)) => Support::Within(a.hull(&b)),
            _ => Support::Everywhere,
        }
    }

    pub fn intersect(self, other: Support) -> Support {
        match (self, other) {
            (Support::Everywhere, s) | (s, Support::Everywhere) => s,
            (Support::Within(a), Support::Within(b)) => a.intersect(&b).map_or(Support::Empty, Support::Within),
            _ => Support::Empty,
        }
    }

    /// True when x certainly lies outside.
    pub fn excludes(&self, x: &Point) -> bool {
        match self {
            Support::Empty => true,
            Support::Within(w) => !w.contains(x),
            Support::Everywhere => false,
        }
    }

    pub fn window(&self) -> Option<&Window> {
        match self {
            Support::Within(w) => Some(w),
            _ => None,
        }
    }
}

pub(crate) fn direction_support(v: &BaseField, u: &AlgebraField) -> Support {
    let of = |w: Option<Window>| w.map_or(Support::Empty, Support::Within);
    of(v.support()).union(of(u.support()))
}

fn axis_nudge(x: &[Jet], i: usize, eps: Jet) -> [Jet; 2] {
    let mut out = [x[0], if x.len() > 1 { x[1] } else { Jet::constant(0.0) }];
    out[i] += eps;
    out
}

fn free_generator(x: &[Jet], m: &MarkJet) -> usize {
    next_generator(x.iter()).max(m.generators())
}

/// ∇^X f on jets, one component per base coordinate.
pub(crate) fn base_grad<F: Fn(&[Jet], &MarkJet) -> Jet>(f: &F, x: &[Jet], m: &MarkJet) -> [Jet; 2] {
    let k = free_generator(x, m);
    let mut out = [Jet::constant(0.0); 2];
    for (i, slot) in out.iter_mut().enumerate().take(x.len()) {
        let xi = axis_nudge(x, i, Jet::epsilon(k));
        *slot = f(&xi[..x.len()], m).derivative(k);
    }
    out
}

/// ∇̃ f on jets.
pub(crate) fn mark_grad<F: Fn(&[Jet], &MarkJet) -> Jet>(f: &F, x: &[Jet], m: &MarkJet) -> [Jet; 3] {
    let k = free_generator(x, m);
    m.space().tilde_grad_jet(&|mm: &MarkJet| f(x, mm), m, k)
}

/// Δ^X f on jets.
pub(crate) fn base_laplacian<F: Fn(&[Jet], &MarkJet) -> Jet>(f: &F, x: &[Jet], m: &MarkJet) -> Jet {
    let k = free_generator(x, m);
    let mut total = Jet::constant(0.0);
    for i in 0..x.len() {
        let xi = axis_nudge(x, i, Jet::epsilon(k) + Jet::epsilon(k + 1));
        total += f(&xi[..x.len()], m).derivative(k + 1).derivative(k);
    }
    total
}

/// ∇^{X×M}_{(v,u)} f on jets: the ε-coefficient of f(x + εv(x), exp(εu(x))m).
pub(crate) fn directional<F: Fn(&[Jet], &MarkJet) -> Jet>(
    f: &F,
    v: &BaseField,
    u: &AlgebraField,
    x: &[Jet],
    m: &MarkJet,
) -> Jet {
    let k = free_generator(x, m);
    let eps = Jet::epsilon(k);
    let vx = v.eval_jet(x);
    let ux = u.eval_jet(x);
    let mut moved = [Jet::constant(0.0); 2];
    for i in 0..x.len() {
        moved[i] = x[i] + eps * vx[i];
    }
    let mm = m.space().nudge(m, &ux, eps);
    f(&moved[..x.len()], &mm).derivative(k)
}

/// H^{X×M} f = −Δ^X f − Δ̃ f − ⟨∇^X log q, ∇^X f⟩ − ⟨∇̃ log q, ∇̃ f⟩ on jets.
fn generator_jet(f: &TestFunction, model: &IntensityModel, x: &[Jet], m: &MarkJet) -> Jet {
    let phi = |xx: &[Jet], mm: &MarkJet| f.eval_jet(xx, mm);
    let logq = |xx: &[Jet], mm: &MarkJet| model.log_q_jet(xx, mm);
    let space = m.space();
    let lap_x = base_laplacian(&phi, x, m);
    let k = free_generator(x, m);
    let lap_m = space.tilde_laplacian_jet(&|mm: &MarkJet| phi(x, mm), m, k);
    let (gp, gq) = (base_grad(&phi, x, m), base_grad(&logq, x, m));
    let (tp, tq) = (mark_grad(&phi, x, m), mark_grad(&logq, x, m));
    let mut drift = Jet::constant(0.0);
    for i in 0..x.len() {
        drift += gp[i] * gq[i];
    }
    for j in 0..space.algebra_dim() {
        drift += tp[j] * tq[j];
    }
    -(lap_x + lap_m + drift)
}

/// β_{(v,u)} = ∇_{(v,u)} log q + div v − ⟨∇p^λ(e, ·), u⟩ on jets.
fn log_derivative_jet(v: &BaseField, u: &AlgebraField, model: &IntensityModel, x: &[Jet], m: &MarkJet) -> Jet {
    let logq = |xx: &[Jet], mm: &MarkJet| model.log_q_jet(xx, mm);
    let space = m.space();
    let along = directional(&logq, v, u, x, m);
    let div = v.divergence_jet(x);
    let ux = u.eval_jet(x);
    let gp = space.grad_plambda_e_const();
    let corr: Jet = gp.as_slice().iter().zip(ux.iter()).map(|(c, w)| *w * *c).sum();
    along + div - corr
}

impl TestFunction {
    pub fn base_bump(center: &[f64], radius: f64, amplitude: f64) -> Self {
        TestFunction::BaseBump { center: Point::new(center), radius, amplitude }
    }

    pub fn product(parts: Vec<TestFunction>) -> Self {
        TestFunction::Product(parts)
    }

    pub fn scaled(self, s: f64) -> Self {
        TestFunction::Scale(s, Box::new(self))
    }

    pub fn map(self, f: UnaryMap) -> Self {
        TestFunction::Map(f, Box::new(self))
    }

    pub fn directional(&self, v: &BaseField, u: &AlgebraField) -> Self {
        TestFunction::Directional { phi: Box::new(self.clone()), v: v.clone(), u: u.clone() }
    }

    pub fn grad_dot(&self, other: &TestFunction) -> Self {
        TestFunction::GradDot(Box::new(self.clone()), Box::new(other.clone()))
    }

    pub fn generator(&self, model: &Arc<IntensityModel>) -> Self {
        TestFunction::Generator(Box::new(self.clone()), model.clone())
    }

    pub fn log_derivative(v: &BaseField, u: &AlgebraField, model: &Arc<IntensityModel>) -> Self {
        TestFunction::LogDerivative { v: v.clone(), u: u.clone(), model: model.clone() }
    }

    /// Region outside which the function and all its derivatives vanish.
    pub fn support(&self) -> Support {
        match self {
            TestFunction::Const(c) if *c == 0.0 => Support::Empty,
            TestFunction::Const(_)
            | TestFunction::Hermite(_)
            | TestFunction::Coordinate(_)
            | TestFunction::MarkFourier(_)
            | TestFunction::MarkPower { .. }
            | TestFunction::MarkLinear(_) => Support::Everywhere,
            TestFunction::BaseBump { center, radius, amplitude } => {
                if *amplitude == 0.0 {
                    Support::Empty
                } else {
                    Support::Within(Window::ball_box(center, *radius))
                }
            }
            TestFunction::Sum(parts) => parts.iter().map(TestFunction::support).fold(Support::Empty, Support::union),
            TestFunction::Product(parts) => {
                parts.iter().map(TestFunction::support).fold(Support::Everywhere, Support::intersect)
            }
            TestFunction::Scale(s, f) => {
                if *s == 0.0 {
                    Support::Empty
                } else {
                    f.support()
                }
            }
            TestFunction::Map(UnaryMap::Exp | UnaryMap::Cos, _) => Support::Everywhere,
            TestFunction::Map(_, f) => f.support(),
            TestFunction::Directional { phi, v, u } => phi.support().intersect(direction_support(v, u)),
            TestFunction::GradDot(a, b) => a.support().intersect(b.support()),
            TestFunction::Generator(f, _) => f.support(),
            TestFunction::LogDerivative { v, u, .. } => direction_support(v, u),
        }
    }

    /// Evaluates the term on jet coordinates.
    pub fn eval_jet(&self, x: &[Jet], m: &MarkJet) -> Jet {
        match self {
            TestFunction::Const(c) => Jet::constant(*c),
            TestFunction::BaseBump { center, radius, amplitude } => {
                let s: Jet = (0..center.dim()).map(|i| ((x[i] - center.get(i)) / *radius).square()).sum();
                profile_sq(s) * *amplitude
            }
            TestFunction::Hermite(n) => {
                let t = x[0];
                let (mut prev, mut cur) = (Jet::constant(1.0), t);
                if *n == 0 {
                    return prev;
                }
                for k in 1..*n {
                    let next = t * cur - prev * k as f64;
                    prev = cur;
                    cur = next;
                }
                cur
            }
            TestFunction::Coordinate(i) => x[*i],
            TestFunction::MarkFourier(k) => match m {
                MarkJet::Circle(a) => {
                    if *k >= 0 {
                        (*a * *k as f64).cos()
                    } else {
                        (*a * (-*k) as f64).sin()
                    }
                }
                _ => panic!("circle Fourier mode evaluated on a {} mark", m.space()),
            },
            TestFunction::MarkPower { power, decay } => match m {
                MarkJet::Dilation(s) => s.powf(*power) * (*s * -*decay).exp(),
                _ => panic!("dilation power evaluated on a {} mark", m.space()),
            },
            TestFunction::MarkLinear(c) => match m {
                MarkJet::Sphere(v) => v[0] * c[0] + v[1] * c[1] + v[2] * c[2],
                _ => panic!("sphere linear function evaluated on a {} mark", m.space()),
            },
            TestFunction::Sum(parts) => parts.iter().map(|p| p.eval_jet(x, m)).sum(),
            TestFunction::Product(parts) => {
                let mut acc = Jet::constant(1.0);
                for p in parts {
                    acc *= p.eval_jet(x, m);
                    if acc == Jet::constant(0.0) {
                        break;
                    }
                }
                acc
            }
            TestFunction::Scale(s, f) => f.eval_jet(x, m) * *s,
            TestFunction::Map(op, f) => {
                let y = f.eval_jet(x, m);
                match op {
                    UnaryMap::Exp => y.exp(),
                    UnaryMap::Log1p => y.ln_1p(),
                    UnaryMap::Square => y.square(),
                    UnaryMap::Sin => y.sin(),
                    UnaryMap::Cos => y.cos(),
                }
            }
            TestFunction::Directional { phi, v, u } => {
                directional(&|xx: &[Jet], mm: &MarkJet| phi.eval_jet(xx, mm), v, u, x, m)
            }
            TestFunction::GradDot(a, b) => {
                let fa = |xx: &[Jet], mm: &MarkJet| a.eval_jet(xx, mm);
                let fb = |xx: &[Jet], mm: &MarkJet| b.eval_jet(xx, mm);
                let (ga, gb) = (base_grad(&fa, x, m), base_grad(&fb, x, m));
                let (ta, tb) = (mark_grad(&fa, x, m), mark_grad(&fb, x, m));
                let mut total = Jet::constant(0.0);
                for i in 0..x.len() {
                    total += ga[i] * gb[i];
                }
                for j in 0..m.space().algebra_dim() {
                    total += ta[j] * tb[j];
                }
                total
            }
            TestFunction::Generator(f, model) => generator_jet(f, model, x, m),
            TestFunction::LogDerivative { v, u, model } => log_derivative_jet(v, u, model, x, m),
        }
    }

    pub fn value(&self, x: &Point, m: &MarkPoint) -> f64 {
        let xs = x.to_jets();
        self.eval_jet(&xs[..x.dim()], &m.to_jet()).value()
    }

    /// H^{X×M} φ(x, m) without building the generator term.
    pub(crate) fn generator_value(&self, model: &IntensityModel, x: &Point, m: &MarkPoint) -> f64 {
        let xs = x.to_jets();
        generator_jet(self, model, &xs[..x.dim()], &m.to_jet()).value()
    }

    /// ∇^{X×M}_{(v,u)} φ(x, m) without building the directional term.
    pub(crate) fn directional_value(&self, v: &BaseField, u: &AlgebraField, x: &Point, m: &MarkPoint) -> f64 {
        let xs = x.to_jets();
        directional(&|xx: &[Jet], mm: &MarkJet| self.eval_jet(xx, mm), v, u, &xs[..x.dim()], &m.to_jet()).value()
    }

    /// β_{(v,u)}(x, m) without building the log-derivative term.
    pub(crate) fn log_derivative_value(v: &BaseField, u: &AlgebraField, model: &IntensityModel, x: &Point, m: &MarkPoint) -> f64 {
        let xs = x.to_jets();
        log_derivative_jet(v, u, model, &xs[..x.dim()], &m.to_jet()).value()
    }

    /// ∇^X φ(x, m).
    pub fn base_gradient(&self, x: &Point, m: &MarkPoint) -> [f64; 2] {
        let xs = x.to_jets();
        base_grad(&|xx: &[Jet], mm: &MarkJet| self.eval_jet(xx, mm), &xs[..x.dim()], &m.to_jet()).map(|j| j.value())
    }

    /// ∇̃ φ(x, m).
    pub fn mark_gradient(&self, x: &Point, m: &MarkPoint) -> [f64; 3] {
        let xs = x.to_jets();
        mark_grad(&|xx: &[Jet], mm: &MarkJet| self.eval_jet(xx, mm), &xs[..x.dim()], &m.to_jet()).map(|j| j.value())
    }

    /// Δ^X φ(x, m).
    pub fn base_laplacian(&self, x: &Point, m: &MarkPoint) -> f64 {
        let xs = x.to_jets();
        base_laplacian(&|xx: &[Jet], mm: &MarkJet| self.eval_jet(xx, mm), &xs[..x.dim()], &m.to_jet()).value()
    }

    /// Δ̃ φ(x, m).
    pub fn mark_laplacian(&self, x: &Point, m: &MarkPoint) -> f64 {
        let xs = x.to_jets();
        let mj = m.to_jet();
        m.space().tilde_laplacian_jet(&|mm: &MarkJet| self.eval_jet(&xs[..x.dim()], mm), &mj, 0).value()
    }

    /// ⟨φ, ω⟩, skipping points outside the support box.
    pub fn pair(&self, omega: &MarkedConfiguration) -> f64 {
        let support = self.support();
        omega.pairing(|x, m| if support.excludes(x) { 0.0 } else { self.value(x, m) })
    }

    /// Checks that the term can be evaluated on marks of `space`.
    pub fn fits(&self, space: MarkSpace) -> bool {
        match self {
            TestFunction::MarkFourier(_) => space == MarkSpace::Circle,
            TestFunction::MarkPower { .. } => space == MarkSpace::Dilation,
            TestFunction::MarkLinear(_) => space == MarkSpace::Sphere,
            TestFunction::Sum(p) | TestFunction::Product(p) => p.iter().all(|t| t.fits(space)),
            TestFunction::Scale(_, f) | TestFunction::Map(_, f) | TestFunction::Generator(f, _) => f.fits(space),
            TestFunction::Directional { phi, u, .. } => phi.fits(space) && u.algebra_dim() == space.algebra_dim(),
            TestFunction::GradDot(a, b) => a.fits(space) && b.fits(space),
            TestFunction::LogDerivative { u, model, .. } => {
                u.algebra_dim() == space.algebra_dim() && model.space() == space
            }
            _ => true,
        }
    }
}
