//! Seeded random test functions, directions, cylinder functions and group
//! elements fitted to a scenario.
//!
//! Supports are kept inside the window, in the part of it where ρ carries
//! most of its mass.

use std::sync::Arc;

use markcfg_core::base_space::{AlgebraField, BaseField, Window, BUMP_PROFILE_LIP};
use markcfg_core::calculus::{CylinderFunction, DirectionPair, Outer, TestFunction};
use markcfg_core::group_action::GroupElement;
use markcfg_core::mark_space::{AlgebraVector, MarkSpace};
use markcfg_core::sampling::{BaseDensity, IntensityModel};
use markcfg_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Probe streams live far above the per-sample Monte Carlo streams.
const PROBE_STREAM: u64 = 1 << 62;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementKind {
    Mixed,
    Diffeo,
    Current,
}

pub struct Probes {
    rng: ChaCha8Rng,
    model: Arc<IntensityModel>,
    focus: Window,
}

fn focus_region(model: &IntensityModel) -> Window {
    let region = model.base_region().unwrap_or(*model.window());
    if let BaseDensity::Gaussian { center, width, .. } = model.rho() {
        let lo: Vec<f64> = center.iter().map(|c| c - 2.0 * width).collect();
        let hi: Vec<f64> = center.iter().map(|c| c + 2.0 * width).collect();
        if let Some(core) = Window::new(&lo, &hi).ok().and_then(|w| w.intersect(&region)) {
            return core;
        }
    }
    region
}

impl Probes {
    /// Independent probe stream `tag` under `seed`.
    pub fn new(model: &Arc<IntensityModel>, seed: u64, tag: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(PROBE_STREAM + tag);
        Probes { rng, model: model.clone(), focus: focus_region(model) }
    }

    pub fn model(&self) -> &Arc<IntensityModel> {
        &self.model
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn space(&self) -> MarkSpace {
        self.model.space()
    }

    /// A ball inside the focus region whose radius is a fraction of its shortest side.
    fn ball(&mut self, lo: f64, hi: f64) -> (Vec<f64>, f64) {
        let side = (0..self.focus.dim()).map(|i| self.focus.hi()[i] - self.focus.lo()[i]).fold(f64::INFINITY, f64::min);
        let r = 0.5 * side * self.rng.random_range(lo..hi);
        let center = (0..self.focus.dim())
            .map(|i| self.rng.random_range((self.focus.lo()[i] + r)..=(self.focus.hi()[i] - r)))
            .collect();
        (center, r)
    }

    fn signed(&mut self, lo: f64, hi: f64) -> f64 {
        let v = self.rng.random_range(lo..hi);
        if self.rng.random::<bool>() {
            v
        } else {
            -v
        }
    }

    /// A mark-dependent factor with sup |·| ≤ 1.
    pub fn mark_factor(&mut self) -> TestFunction {
        let c0 = self.rng.random_range(0.3..1.0);
        let (parts, l1) = match self.space() {
            MarkSpace::Circle => {
                let (c1, c2) = (self.signed(0.2, 1.0), self.signed(0.2, 1.0));
                let (k1, k2) = (self.rng.random_range(1..=2), self.rng.random_range(1..=2));
                (
                    vec![TestFunction::MarkFourier(k1).scaled(c1), TestFunction::MarkFourier(-k2).scaled(c2)],
                    c0 + c1.abs() + c2.abs(),
                )
            }
            MarkSpace::Dilation => {
                let c1 = self.signed(0.3, 1.0);
                let power = f64::from(self.rng.random_range(1..=2u8));
                let decay = self.rng.random_range(0.4..0.8);
                let sup = (power / decay).powf(power) * (-power).exp();
                (vec![TestFunction::MarkPower { power, decay }.scaled(c1 / sup)], c0 + c1.abs())
            }
            MarkSpace::Sphere => {
                let c = [self.signed(0.1, 0.8), self.signed(0.1, 0.8), self.signed(0.1, 0.8)];
                let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
                (vec![TestFunction::MarkLinear(c)], c0 + norm)
            }
        };
        let mut terms = vec![TestFunction::Const(c0)];
        terms.extend(parts);
        TestFunction::Sum(terms).scaled(1.0 / l1)
    }

    fn bump_on(&mut self, center: &[f64], r: f64, sup: f64) -> TestFunction {
        // the profile peaks at e⁻¹
        let amp = sup * std::f64::consts::E * self.rng.random_range(0.6..1.0);
        TestFunction::Product(vec![TestFunction::base_bump(center, r, amp), self.mark_factor()])
    }

    /// β-bump on the base times a mark factor, with sup |φ| ≤ `sup`.
    pub fn test_function(&mut self, sup: f64) -> TestFunction {
        let (center, r) = self.ball(0.5, 0.9);
        self.bump_on(&center, r, sup)
    }

    /// Two test functions on a common base ball, so that their L²(σ̃) product is not small.
    pub fn test_function_pair(&mut self, sup: f64) -> (TestFunction, TestFunction) {
        let (center, r) = self.ball(0.5, 0.9);
        (self.bump_on(&center, r, sup), self.bump_on(&center, r, sup))
    }

    pub fn base_field(&mut self) -> BaseField {
        let (center, r) = self.ball(0.3, 0.6);
        let raw: Vec<f64> = (0..center.len()).map(|_| self.signed(0.2, 1.0)).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let size = self.rng.random_range(0.3..0.8) * r / BUMP_PROFILE_LIP;
        let amp: Vec<f64> = raw.iter().map(|v| v * size / norm).collect();
        BaseField::bump(&center, r, &amp).expect("amplitude below the cap")
    }

    pub fn algebra_field(&mut self) -> AlgebraField {
        let (center, r) = self.ball(0.3, 0.6);
        let scale = if self.space() == MarkSpace::Dilation { 0.4 } else { 0.8 };
        let comps: Vec<f64> = (0..self.space().algebra_dim()).map(|_| scale * self.signed(0.3, 1.0)).collect();
        AlgebraField::bump(&center, r, AlgebraVector::new(&comps)).expect("finite bump")
    }

    pub fn direction(&mut self) -> DirectionPair {
        let (v, u) = (self.base_field(), self.algebra_field());
        DirectionPair::new(self.space(), v, u).expect("matching algebra dimension")
    }

    pub fn base_direction(&mut self) -> DirectionPair {
        let v = self.base_field();
        DirectionPair::base(self.space(), v)
    }

    pub fn current_direction(&mut self) -> DirectionPair {
        let u = self.algebra_field();
        DirectionPair::current(self.space(), self.model.dim(), u)
    }

    /// g(⟨φ₁,ω⟩, …) with g bounded together with its derivatives.
    pub fn cylinder(&mut self) -> CylinderFunction {
        let n = self.rng.random_range(1..=2usize);
        let tests: Vec<TestFunction> = (0..n).map(|_| self.test_function(1.0)).collect();
        let a = self.rng.random_range(0.5..1.5);
        let outer = match (n, self.rng.random_range(0..2u8)) {
            (1, 0) => Outer::var(0).scaled(a).sin(),
            (1, _) => Outer::var(0).scaled(a).tanh(),
            (_, 0) => Outer::Mul(vec![Outer::var(0).scaled(a).cos(), Outer::var(1).tanh()]),
            _ => Outer::Add(vec![Outer::var(0).tanh(), Outer::var(1).scaled(a).sin().scaled(0.5)]),
        };
        CylinderFunction::new(tests, outer).expect("variables match the tests")
    }

    pub fn group_element(&mut self, kind: ElementKind) -> Result<GroupElement> {
        let space = self.space();
        match kind {
            ElementKind::Mixed => {
                let (v, u) = (self.base_field(), self.algebra_field());
                GroupElement::from_pair(space, v, u, 1.0)
            }
            ElementKind::Diffeo => Ok(GroupElement::diffeo(space, self.base_field(), 1.0)),
            ElementKind::Current => Ok(GroupElement::current(space, self.model.dim(), self.algebra_field(), 1.0)),
        }
    }
}
