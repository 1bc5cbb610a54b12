//! The semidirect product 𝔄 = Diff₀(X) ⋉ G^X acting on X × M and on
//! configurations, with exact Radon–Nikodym densities.
//!
//! An element is stored as a word of pure factors. The element
//! a = (ψ, η) with ψ = ψ_t^v and η = exp(t·u) acts by
//! a(x, m) = (ψ(x), θ(η(ψ(x)), m)), which is the word
//! `Current(u, t) · Diffeo(v, t)`. Products concatenate words, so the group
//! law (ψ₁∘ψ₂, η₁·(η₂∘ψ₁⁻¹)) holds by construction.

use crate::base_space::{det, AlgebraField, BaseField, Point, Window};
use crate::configuration::MarkedConfiguration;
use crate::error::{Error, Result};
use crate::mark_space::{GroupPoint, MarkPoint, MarkSpace};
use crate::sampling::IntensityModel;

#[derive(Clone, Debug, PartialEq)]
pub enum Factor {
    /// (x, m) ↦ (ψ_t^v(x), m).
    Diffeo { field: BaseField, time: f64 },
    /// (x, m) ↦ (x, θ(exp(t·u(x)), m)).
    Current { field: AlgebraField, time: f64 },
}

impl Factor {
    fn inverse(&self) -> Factor {
        match self {
            Factor::Diffeo { field, time } => Factor::Diffeo { field: field.clone(), time: -time },
            Factor::Current { field, time } => Factor::Current { field: field.clone(), time: -time },
        }
    }

    fn support(&self) -> Option<Window> {
        match self {
            Factor::Diffeo { field, time } if *time != 0.0 => field.support(),
            Factor::Current { field, time } if *time != 0.0 => field.support(),
            _ => None,
        }
    }

    fn outside(&self, x: &Point) -> bool {
        match self {
            Factor::Diffeo { field, time } => *time == 0.0 || field.outside_support(x),
            Factor::Current { field, time } => *time == 0.0 || field.outside_support(x),
        }
    }
}

/// An element of 𝔄.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    space: MarkSpace,
    dim: usize,
    /// Factors in product order; the rightmost acts first.
    word: Vec<Factor>,
}

impl GroupElement {
    pub fn identity(dim: usize, space: MarkSpace) -> Self {
        GroupElement { space, dim, word: Vec::new() }
    }

    /// The element generated by (v, u) at flow time t.
    pub fn from_pair(space: MarkSpace, v: BaseField, u: AlgebraField, t: f64) -> Result<Self> {
        if u.algebra_dim() != space.algebra_dim() {
            return Err(Error::Usage(format!(
                "current with values of dimension {} used with the {space} model",
                u.algebra_dim()
            )));
        }
        if !t.is_finite() {
            return Err(Error::Usage(format!("flow time {t} is not finite")));
        }
        let dim = v.dim();
        Ok(GroupElement {
            space,
            dim,
            word: vec![Factor::Current { field: u, time: t }, Factor::Diffeo { field: v, time: t }],
        })
    }

    pub fn diffeo(space: MarkSpace, v: BaseField, t: f64) -> Self {
        GroupElement { space, dim: v.dim(), word: vec![Factor::Diffeo { field: v, time: t }] }
    }

    pub fn current(space: MarkSpace, dim: usize, u: AlgebraField, t: f64) -> Self {
        GroupElement { space, dim, word: vec![Factor::Current { field: u, time: t }] }
    }

    pub fn space(&self) -> MarkSpace {
        self.space
    }

    pub fn factors(&self) -> &[Factor] {
        &self.word
    }

    /// The product `self · other`, acting as `self ∘ other`.
    pub fn compose(&self, other: &GroupElement) -> Result<Self> {
        if self.space != other.space || self.dim != other.dim {
            return Err(Error::Usage("group elements of different models".into()));
        }
        let mut word = self.word.clone();
        word.extend(other.word.iter().cloned());
        Ok(GroupElement { space: self.space, dim: self.dim, word })
    }

    pub fn inverse(&self) -> Self {
        GroupElement { space: self.space, dim: self.dim, word: self.word.iter().rev().map(Factor::inverse).collect() }
    }

    /// Bounding box of K_a, outside of which a is the identity.
    pub fn support(&self) -> Option<Window> {
        self.word.iter().filter_map(Factor::support).reduce(|a, b| a.hull(&b))
    }

    fn outside(&self, x: &Point) -> bool {
        self.word.iter().all(|f| f.outside(x))
    }

    fn check(&self, x: &Point, m: &MarkPoint) -> Result<()> {
        if x.dim() != self.dim || m.space() != self.space {
            return Err(Error::Usage(format!("point ({x:?}, {m:?}) does not match the group element's model")));
        }
        Ok(())
    }

    /// The action of a word at a fixed base point: the base trajectory does
    /// not depend on the mark, so a(x, ·) = θ(g, ·) for one group element g.
    /// `sign` is −1 to apply the inverse of every factor.
    fn local<'a>(&self, word: impl Iterator<Item = &'a Factor>, sign: f64, x: &Point) -> Result<LocalAction> {
        let mut y = *x;
        let mut g = self.space.identity();
        let mut jac = 1.0;
        for f in word {
            match f {
                Factor::Diffeo { field, time } => {
                    let r = field.flow(sign * time, &y)?;
                    jac *= det(&r.jacobian, y.dim());
                    y = r.endpoint;
                }
                Factor::Current { field, time } => {
                    if *time == 0.0 || field.outside_support(&y) {
                        continue;
                    }
                    let h = self.space.exp_map(&field.eval(&y), sign * time)?;
                    g = self.space.compose(&h, &g)?;
                }
            }
        }
        Ok(LocalAction { space: self.space, endpoint: y, mark_element: g, base_jacobian: jac })
    }

    /// a(x, ·) at the base point x.
    pub fn local_action(&self, x: &Point) -> Result<LocalAction> {
        if self.outside(x) {
            return Ok(LocalAction::identity(self.space, x));
        }
        self.local(self.word.iter().rev(), 1.0, x)
    }

    /// a⁻¹(x, ·) at the base point x.
    pub fn local_inverse(&self, x: &Point) -> Result<LocalAction> {
        if self.outside(x) {
            return Ok(LocalAction::identity(self.space, x));
        }
        self.local(self.word.iter(), -1.0, x)
    }

    /// a(x, m).
    pub fn act_point(&self, x: &Point, m: &MarkPoint) -> Result<(Point, MarkPoint)> {
        self.check(x, m)?;
        if self.outside(x) {
            return Ok((*x, *m));
        }
        self.local_action(x)?.apply(m)
    }

    /// a(ω) = {a(x, m) : (x, m) ∈ ω}.
    pub fn act_config(&self, omega: &MarkedConfiguration) -> Result<MarkedConfiguration> {
        omega.map_points(|x, m| self.act_point(x, m))
    }

    /// p_a(x, m) = d(a*σ̃)/dσ̃(x, m), with a*σ̃ the image of σ̃ under a.
    ///
    /// Equals q(a⁻¹(x, m))/q(x, m) times the Jacobian of a⁻¹ with respect to
    /// ν ⊗ λ: det Dψ⁻¹(x) from the diffeomorphisms and p^λ(h⁻¹, m) from the
    /// mark map θ_h of a⁻¹.
    pub fn rn_density_point(&self, model: &IntensityModel, x: &Point, m: &MarkPoint) -> Result<f64> {
        self.check(x, m)?;
        if self.outside(x) {
            return Ok(1.0);
        }
        self.local_inverse(x)?.density(model, x, m)
    }

    /// Π_{(x,m) ∈ ω} p_a(x, m) = d(a*π_σ̃)/dπ_σ̃(ω).
    pub fn rn_density_config(&self, model: &IntensityModel, omega: &MarkedConfiguration) -> Result<f64> {
        let mut prod = 1.0;
        for (x, m) in omega.iter() {
            if self.outside(x) {
                continue;
            }
            prod *= self.rn_density_point(model, x, m)?;
        }
        Ok(prod)
    }
}

/// a(x, ·) for a fixed base point x.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalAction {
    space: MarkSpace,
    pub endpoint: Point,
    pub mark_element: GroupPoint,
    /// det of the base Jacobian along the word.
    pub base_jacobian: f64,
}

impl LocalAction {
    fn identity(space: MarkSpace, x: &Point) -> Self {
        LocalAction { space, endpoint: *x, mark_element: space.identity(), base_jacobian: 1.0 }
    }

    pub fn apply(&self, m: &MarkPoint) -> Result<(Point, MarkPoint)> {
        Ok((self.endpoint, self.space.act(&self.mark_element, m)?))
    }

    /// Density q(a⁻¹(x, m))/q(x, m) · J for a local inverse action.
    ///
    /// The λ-Jacobian of θ_h is p^λ(h⁻¹, ·); every mark model here has a
    /// mark-independent p^λ, so the factors of a word combine into one.
    pub fn density(&self, model: &IntensityModel, x: &Point, m: &MarkPoint) -> Result<f64> {
        let q0 = model.q(x, m);
        if q0 == 0.0 {
            return Ok(1.0);
        }
        let (y, n) = self.apply(m)?;
        let pl = self.space.lambda_density(&self.space.inverse(&self.mark_element)?, m)?;
        Ok(model.q(&y, &n) / q0 * self.base_jacobian * pl)
    }
}
