//! Homogeneous mark spaces M = G/H.
//!
//! Three instances are provided:
//!
//! * `Circle`: SO(2) acting on [0, 2π) by rotation, λ = Lebesgue (invariant).
//! * `Dilation`: ℝ₊ acting on itself by multiplication, λ = Lebesgue on ℝ₊,
//!   which is only quasiinvariant: d(g*λ)/dλ = 1/g.
//! * `Sphere`: SO(3) acting on S² by rotation, λ = surface measure (invariant).
//!
//! The Lie algebra carries the Euclidean inner product on the chosen basis
//! (the generator of rotations for SO(2), d/dt e^t for ℝ₊, and the three
//! infinitesimal rotations about the coordinate axes for so(3)).

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkSpace {
    Circle,
    Dilation,
    Sphere,
}

impl fmt::Display for MarkSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarkSpace::Circle => "circle",
            MarkSpace::Dilation => "dilation",
            MarkSpace::Sphere => "sphere",
        })
    }
}

impl FromStr for MarkSpace {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circle" => Ok(MarkSpace::Circle),
            "dilation" => Ok(MarkSpace::Dilation),
            "sphere" => Ok(MarkSpace::Sphere),
            other => Err(Error::Config(format!("unknown mark space '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MarkPoint {
    /// Angle in [0, 2π).
    Circle(f64),
    /// Positive scale.
    Dilation(f64),
    /// Unit vector in ℝ³.
    Sphere([f64; 3]),
}

impl MarkPoint {
    pub fn space(&self) -> MarkSpace {
        match self {
            MarkPoint::Circle(_) => MarkSpace::Circle,
            MarkPoint::Dilation(_) => MarkSpace::Dilation,
            MarkPoint::Sphere(_) => MarkSpace::Sphere,
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        match *self {
            MarkPoint::Circle(a) => vec![a],
            MarkPoint::Dilation(s) => vec![s],
            MarkPoint::Sphere(v) => v.to_vec(),
        }
    }

    pub fn to_jet(&self) -> MarkJet {
        match *self {
            MarkPoint::Circle(a) => MarkJet::Circle(Jet::constant(a)),
            MarkPoint::Dilation(s) => MarkJet::Dilation(Jet::constant(s)),
            MarkPoint::Sphere(v) => MarkJet::Sphere(v.map(Jet::constant)),
        }
    }

    /// Normalizes an angle into [0, 2π).
    pub fn circle(angle: f64) -> MarkPoint {
        MarkPoint::Circle(wrap_angle(angle))
    }

    /// Projects onto the unit sphere.
    pub fn sphere(v: [f64; 3]) -> MarkPoint {
        let n = norm3(&v);
        MarkPoint::Sphere([v[0] / n, v[1] / n, v[2] / n])
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MarkPoint::Circle(a) if (0.0..TAU).contains(&a) => Ok(()),
            MarkPoint::Dilation(s) if s > 0.0 && s.is_finite() => Ok(()),
            MarkPoint::Sphere(v) if (norm3(&v) - 1.0).abs() <= 1e-12 => Ok(()),
            other => Err(Error::Usage(format!("invalid mark {other:?}"))),
        }
    }
}

pub(crate) fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Mark coordinates carrying jet derivatives.
#[derive(Clone, Copy, Debug)]
pub enum MarkJet {
    Circle(Jet),
    Dilation(Jet),
    Sphere([Jet; 3]),
}

impl MarkJet {
    pub fn space(&self) -> MarkSpace {
        match self {
            MarkJet::Circle(_) => MarkSpace::Circle,
            MarkJet::Dilation(_) => MarkSpace::Dilation,
            MarkJet::Sphere(_) => MarkSpace::Sphere,
        }
    }

    pub fn value(&self) -> MarkPoint {
        match self {
            MarkJet::Circle(a) => MarkPoint::Circle(wrap_angle(a.value())),
            MarkJet::Dilation(s) => MarkPoint::Dilation(s.value()),
            MarkJet::Sphere(v) => MarkPoint::Sphere([v[0].value(), v[1].value(), v[2].value()]),
        }
    }

    pub fn generators(&self) -> usize {
        match self {
            MarkJet::Circle(a) | MarkJet::Dilation(a) => a.generators(),
            MarkJet::Sphere(v) => v.iter().map(Jet::generators).max().unwrap_or(0),
        }
    }
}

/// An element of the Lie algebra 𝔤 in the model basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlgebraVector {
    comps: [f64; 3],
    dim: u8,
}

impl AlgebraVector {
    pub fn new(components: &[f64]) -> Self {
        assert!((1..=3).contains(&components.len()), "algebra dimension is 1 or 3");
        let mut comps = [0.0; 3];
        comps[..components.len()].copy_from_slice(components);
        AlgebraVector { comps, dim: components.len() as u8 }
    }

    pub fn zero(dim: usize) -> Self {
        AlgebraVector { comps: [0.0; 3], dim: dim as u8 }
    }

    pub fn scalar(v: f64) -> Self {
        AlgebraVector::new(&[v])
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.comps[..self.dim()]
    }

    pub fn dot(&self, other: &AlgebraVector) -> f64 {
        self.as_slice().iter().zip(other.as_slice()).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = *self;
        for c in out.comps.iter_mut() {
            *c *= s;
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|c| c.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GroupPoint {
    /// Rotation angle of SO(2), taken modulo 2π.
    Rotation2(f64),
    /// Element of the multiplicative group ℝ₊.
    Scale(f64),
    /// Rotation matrix of SO(3), row-major.
    Rotation3([[f64; 3]; 3]),
}

impl GroupPoint {
    pub fn space(&self) -> MarkSpace {
        match self {
            GroupPoint::Rotation2(_) => MarkSpace::Circle,
            GroupPoint::Scale(_) => MarkSpace::Dilation,
            GroupPoint::Rotation3(_) => MarkSpace::Sphere,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            GroupPoint::Rotation2(a) if a.is_finite() => Ok(()),
            GroupPoint::Scale(s) if *s > 0.0 && s.is_finite() => Ok(()),
            GroupPoint::Rotation3(r) => {
                let mut worst: f64 = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        let rtr: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
                        let id = if i == j { 1.0 } else { 0.0 };
                        worst = worst.max((rtr - id).abs());
                    }
                }
                let det = det3(r);
                if worst <= 1e-10 && (det - 1.0).abs() <= 1e-10 {
                    Ok(())
                } else {
                    Err(Error::Usage(format!("not a rotation: |RᵀR − I| = {worst:e}, det = {det}")))
                }
            }
            other => Err(Error::Usage(format!("invalid group element {other:?}"))),
        }
    }
}

pub(crate) fn det3(r: &[[f64; 3]; 3]) -> f64 {
    r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
        + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
}

fn matmul3(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn transpose3(a: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

/// Rodrigues formula for exp(ŵ).
pub fn rodrigues(w: [f64; 3]) -> [[f64; 3]; 3] {
    let theta2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
    let theta = theta2.sqrt();
    let (a, b) = if theta < 1e-4 {
        // Taylor expansions of sin θ/θ and (1 − cos θ)/θ².
        (1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0, 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let k = hat(w);
    let k2 = matmul3(&k, &k);
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = if i == j { 1.0 } else { 0.0 } + a * k[i][j] + b * k2[i][j];
        }
    }
    r
}

pub(crate) fn hat(w: [f64; 3]) -> [[f64; 3]; 3] {
    [[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn cross_jet(a: &[Jet; 3], b: &[Jet; 3]) -> [Jet; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

impl MarkSpace {
    pub const ALL: [MarkSpace; 3] = [MarkSpace::Circle, MarkSpace::Dilation, MarkSpace::Sphere];

    pub fn algebra_dim(&self) -> usize {
        match self {
            MarkSpace::Circle | MarkSpace::Dilation => 1,
            MarkSpace::Sphere => 3,
        }
    }

    pub fn is_abelian(&self) -> bool {
        !matches!(self, MarkSpace::Sphere)
    }

    /// Number of mark coordinates in CSV dumps.
    pub fn coord_dim(&self) -> usize {
        match self {
            MarkSpace::Circle | MarkSpace::Dilation => 1,
            MarkSpace::Sphere => 3,
        }
    }

    pub fn mark_from_coords(&self, coords: &[f64]) -> Result<MarkPoint> {
        let m = match (self, coords) {
            (MarkSpace::Circle, [a]) => MarkPoint::Circle(*a),
            (MarkSpace::Dilation, [s]) => MarkPoint::Dilation(*s),
            (MarkSpace::Sphere, [a, b, c]) => MarkPoint::Sphere([*a, *b, *c]),
            _ => return Err(Error::Usage(format!("{coords:?} are not {self} mark coordinates"))),
        };
        m.validate()?;
        Ok(m)
    }

    fn check_mark(&self, m: &MarkPoint) -> Result<()> {
        if m.space() == *self {
            Ok(())
        } else {
            Err(Error::Usage(format!("mark {m:?} does not belong to the {self} model")))
        }
    }

    fn check_group(&self, g: &GroupPoint) -> Result<()> {
        if g.space() == *self {
            Ok(())
        } else {
            Err(Error::Usage(format!("group element {g:?} does not belong to the {self} model")))
        }
    }

    fn check_algebra(&self, u: &AlgebraVector) -> Result<()> {
        if u.dim() == self.algebra_dim() {
            Ok(())
        } else {
            Err(Error::Usage(format!(
                "algebra vector of dimension {} used with the {self} model (dimension {})",
                u.dim(),
                self.algebra_dim()
            )))
        }
    }

    pub fn identity(&self) -> GroupPoint {
        match self {
            MarkSpace::Circle => GroupPoint::Rotation2(0.0),
            MarkSpace::Dilation => GroupPoint::Scale(1.0),
            MarkSpace::Sphere => GroupPoint::Rotation3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
        }
    }

    /// θ(g, m).
    pub fn act(&self, g: &GroupPoint, m: &MarkPoint) -> Result<MarkPoint> {
        self.check_group(g)?;
        self.check_mark(m)?;
        Ok(match (g, m) {
            (GroupPoint::Rotation2(alpha), MarkPoint::Circle(a)) => MarkPoint::circle(a + alpha),
            (GroupPoint::Scale(s), MarkPoint::Dilation(v)) => MarkPoint::Dilation(s * v),
            (GroupPoint::Rotation3(r), MarkPoint::Sphere(v)) => {
                let mut out = [0.0; 3];
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (0..3).map(|k| r[i][k] * v[k]).sum();
                }
                MarkPoint::sphere(out)
            }
            _ => unreachable!("checked above"),
        })
    }

    /// exp(t·u).
    pub fn exp_map(&self, u: &AlgebraVector, t: f64) -> Result<GroupPoint> {
        self.check_algebra(u)?;
        let c = u.as_slice();
        Ok(match self {
            MarkSpace::Circle => GroupPoint::Rotation2(t * c[0]),
            MarkSpace::Dilation => GroupPoint::Scale((t * c[0]).exp()),
            MarkSpace::Sphere => GroupPoint::Rotation3(rodrigues([t * c[0], t * c[1], t * c[2]])),
        })
    }

    /// Group product g₁g₂.
    pub fn compose(&self, g1: &GroupPoint, g2: &GroupPoint) -> Result<GroupPoint> {
        self.check_group(g1)?;
        self.check_group(g2)?;
        Ok(match (g1, g2) {
            (GroupPoint::Rotation2(a), GroupPoint::Rotation2(b)) => GroupPoint::Rotation2(a + b),
            (GroupPoint::Scale(a), GroupPoint::Scale(b)) => GroupPoint::Scale(a * b),
            (GroupPoint::Rotation3(a), GroupPoint::Rotation3(b)) => GroupPoint::Rotation3(matmul3(a, b)),
            _ => unreachable!("checked above"),
        })
    }

    pub fn inverse(&self, g: &GroupPoint) -> Result<GroupPoint> {
        self.check_group(g)?;
        Ok(match g {
            GroupPoint::Rotation2(a) => GroupPoint::Rotation2(-a),
            GroupPoint::Scale(s) => GroupPoint::Scale(1.0 / s),
            GroupPoint::Rotation3(r) => GroupPoint::Rotation3(transpose3(r)),
        })
    }

    /// p^λ(g, m) = d(g*λ)/dλ(m), where g*λ is the image of λ under θ_g.
    pub fn lambda_density(&self, g: &GroupPoint, m: &MarkPoint) -> Result<f64> {
        self.check_group(g)?;
        self.check_mark(m)?;
        Ok(match g {
            GroupPoint::Scale(s) => 1.0 / s,
            _ => 1.0,
        })
    }

    /// ∇^G p^λ(e, m).
    pub fn grad_plambda_e(&self, m: &MarkPoint) -> Result<AlgebraVector> {
        self.check_mark(m)?;
        Ok(self.grad_plambda_e_const())
    }

    /// All three models have a mark-independent ∇^G p^λ(e, ·).
    pub(crate) fn grad_plambda_e_const(&self) -> AlgebraVector {
        match self {
            MarkSpace::Circle => AlgebraVector::zero(1),
            MarkSpace::Dilation => AlgebraVector::scalar(-1.0),
            MarkSpace::Sphere => AlgebraVector::zero(3),
        }
    }

    /// Pointwise Lie bracket on 𝔤, normalized so that the infinitesimal
    /// action is a homomorphism: ∇̃_{[a,b]} = ∇̃_a∇̃_b − ∇̃_b∇̃_a.
    pub fn bracket(&self, a: &AlgebraVector, b: &AlgebraVector) -> Result<AlgebraVector> {
        self.check_algebra(a)?;
        self.check_algebra(b)?;
        Ok(match self {
            MarkSpace::Circle | MarkSpace::Dilation => AlgebraVector::zero(1),
            MarkSpace::Sphere => {
                let (x, y) = (a.as_slice(), b.as_slice());
                AlgebraVector::new(&cross([y[0], y[1], y[2]], [x[0], x[1], x[2]]))
            }
        })
    }

    pub(crate) fn bracket_jet(&self, a: &[Jet; 3], b: &[Jet; 3]) -> [Jet; 3] {
        match self {
            MarkSpace::Circle | MarkSpace::Dilation => [Jet::constant(0.0); 3],
            MarkSpace::Sphere => cross_jet(b, a),
        }
    }

    /// θ(exp(ε·u), m) for a nilpotent ε (ε² = 0), which is exactly
    /// m + ε·(Ru)(m) with R the infinitesimal action.
    pub fn nudge(&self, m: &MarkJet, u: &[Jet; 3], eps: Jet) -> MarkJet {
        match m {
            MarkJet::Circle(a) => MarkJet::Circle(*a + eps * u[0]),
            MarkJet::Dilation(s) => MarkJet::Dilation(*s + eps * u[0] * *s),
            MarkJet::Sphere(v) => {
                let r = cross_jet(u, v);
                MarkJet::Sphere([v[0] + eps * r[0], v[1] + eps * r[1], v[2] + eps * r[2]])
            }
        }
    }

    /// Basis vector eᵢ of 𝔤 as jets.
    pub(crate) fn basis_jet(&self, i: usize) -> [Jet; 3] {
        let mut e = [Jet::constant(0.0); 3];
        e[i] = Jet::constant(1.0);
        e
    }

    /// ∇̃f(m) for a function given on jets; `gen` is the first free generator.
    pub fn tilde_grad_jet<F>(&self, f: &F, m: &MarkJet, gen: usize) -> [Jet; 3]
    where
        F: Fn(&MarkJet) -> Jet,
    {
        let mut out = [Jet::constant(0.0); 3];
        for (i, slot) in out.iter_mut().enumerate().take(self.algebra_dim()) {
            let moved = self.nudge(m, &self.basis_jet(i), Jet::epsilon(gen));
            *slot = f(&moved).derivative(gen);
        }
        out
    }

    /// Σᵢ ∇̃_{eᵢ}∇̃_{eᵢ} f(m), the Casimir part of Δ̃.
    pub fn casimir_jet<F>(&self, f: &F, m: &MarkJet, gen: usize) -> Jet
    where
        F: Fn(&MarkJet) -> Jet,
    {
        let mut total = Jet::constant(0.0);
        for i in 0..self.algebra_dim() {
            let e = self.basis_jet(i);
            let inner = self.nudge(m, &e, Jet::epsilon(gen + 1));
            let outer = self.nudge(&inner, &e, Jet::epsilon(gen));
            // The two nudges commute to first order in each generator, and the
            // ε_gen·ε_{gen+1} coefficient is the second derivative along eᵢ.
            total += f(&outer).derivative(gen + 1).derivative(gen);
        }
        total
    }

    /// Δ̃f = div_λ(R∇̃f) = Σᵢ ∇̃ᵢ∇̃ᵢ f − ⟨∇^G p^λ(e, m), ∇̃f⟩.
    pub fn tilde_laplacian_jet<F>(&self, f: &F, m: &MarkJet, gen: usize) -> Jet
    where
        F: Fn(&MarkJet) -> Jet,
    {
        let cas = self.casimir_jet(f, m, gen);
        let grad = self.tilde_grad_jet(f, m, gen);
        let gp = self.grad_plambda_e_const();
        let drift: Jet = gp.as_slice().iter().zip(grad.iter()).map(|(c, g)| *g * *c).sum();
        cas - drift
    }

    /// ∇̃f(m) at a plain mark.
    pub fn tilde_grad<F>(&self, f: F, m: &MarkPoint) -> Result<AlgebraVector>
    where
        F: Fn(&MarkJet) -> Jet,
    {
        self.check_mark(m)?;
        let g = self.tilde_grad_jet(&f, &m.to_jet(), 0);
        let vals: Vec<f64> = g.iter().take(self.algebra_dim()).map(Jet::value).collect();
        Ok(AlgebraVector::new(&vals))
    }

    /// Δ̃f(m) at a plain mark.
    pub fn tilde_laplacian<F>(&self, f: F, m: &MarkPoint) -> Result<f64>
    where
        F: Fn(&MarkJet) -> Jet,
    {
        self.check_mark(m)?;
        Ok(self.tilde_laplacian_jet(&f, &m.to_jet(), 0).value())
    }

    /// λ-integral over M of a smooth integrand.
    pub fn integrate_lambda<F>(&self, f: F, upper: f64, tol: crate::quadrature::Tolerance) -> Result<f64>
    where
        F: Fn(&MarkPoint) -> f64,
    {
        use crate::quadrature::{integrate, integrate_periodic};
        match self {
            MarkSpace::Circle => integrate_periodic(|a| f(&MarkPoint::Circle(a)), 0.0, TAU, tol),
            MarkSpace::Dilation => integrate(|s| if s > 0.0 { f(&MarkPoint::Dilation(s)) } else { 0.0 }, 0.0, upper, tol),
            MarkSpace::Sphere => {
                let inner_tol = crate::quadrature::Tolerance::new(tol.abs * 1e-2, tol.rel * 1e-2);
                let mut failure = None;
                // dA = dz dϕ with z = cos θ; the azimuthal average is analytic in z
                let v = integrate(
                    |ct| {
                        let st = (1.0 - ct * ct).max(0.0).sqrt();
                        match integrate_periodic(
                            |ph| {
                                let (sp, cp) = ph.sin_cos();
                                f(&MarkPoint::Sphere([st * cp, st * sp, ct]))
                            },
                            0.0,
                            TAU,
                            inner_tol,
                        ) {
                            Ok(v) => v,
                            Err(e) => {
                                failure = Some(e);
                                0.0
                            }
                        }
                    },
                    -1.0,
                    1.0,
                    tol,
                )?;
                match failure {
                    Some(e) => Err(e),
                    None => Ok(v),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use crate::quadrature::{integrate, Tolerance};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn act_examples() {
        let c = MarkSpace::Circle;
        let m = c.act(&GroupPoint::Rotation2(PI / 2.0), &MarkPoint::Circle(PI)).unwrap();
        assert!(matches!(m, MarkPoint::Circle(a) if close(a, 1.5 * PI, 1e-15)));
        let d = MarkSpace::Dilation;
        assert_eq!(d.act(&GroupPoint::Scale(2.0), &MarkPoint::Dilation(1.5)).unwrap(), MarkPoint::Dilation(3.0));
        let s = MarkSpace::Sphere;
        let north = MarkPoint::Sphere([0.0, 0.0, 1.0]);
        assert_eq!(s.act(&s.identity(), &north).unwrap(), north);
    }

    #[test]
    fn act_rejects_mismatched_models() {
        let err = MarkSpace::Circle.act(&GroupPoint::Scale(2.0), &MarkPoint::Circle(0.0));
        assert!(matches!(err, Err(Error::Usage(_))));
        let err = MarkSpace::Dilation.act(&GroupPoint::Scale(2.0), &MarkPoint::Circle(0.0));
        assert!(matches!(err, Err(Error::Usage(_))));
        assert!(MarkSpace::Sphere.exp_map(&AlgebraVector::scalar(1.0), 1.0).is_err());
    }

    #[test]
    fn exp_map_examples() {
        let g = MarkSpace::Dilation.exp_map(&AlgebraVector::scalar(1.0), 2f64.ln()).unwrap();
        assert!(matches!(g, GroupPoint::Scale(s) if close(s, 2.0, 1e-15)));
        let g = MarkSpace::Circle.exp_map(&AlgebraVector::scalar(1.0), TAU).unwrap();
        let m = MarkSpace::Circle.act(&g, &MarkPoint::Circle(1.0)).unwrap();
        assert!(matches!(m, MarkPoint::Circle(a) if close(a, 1.0, 1e-14)));
    }

    /// exp(A) by scaling and squaring with a truncated series.
    fn expm_series(a: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let norm: f64 = a.iter().flatten().map(|v| v.abs()).sum();
        let s = (norm / 0.25).log2().ceil().max(0.0) as i32;
        let scale = 0.5f64.powi(s);
        let a = a.map(|r| r.map(|v| v * scale));
        let mut term = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let mut acc = term;
        for k in 1..30 {
            term = matmul3(&term, &a).map(|r| r.map(|v| v / k as f64));
            for i in 0..3 {
                for j in 0..3 {
                    acc[i][j] += term[i][j];
                }
            }
        }
        for _ in 0..s {
            acc = matmul3(&acc, &acc);
        }
        acc
    }

    #[test]
    fn rodrigues_matches_series_oracle() {
        let g = MarkSpace::Sphere.exp_map(&AlgebraVector::new(&[0.0, 0.0, 1.0]), PI / 2.0).unwrap();
        let GroupPoint::Rotation3(r) = g else { panic!() };
        let expected = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!(close(r[i][j], expected[i][j], 1e-15));
            }
        }
        for w in [[0.3, -1.2, 0.7], [1e-6, 2e-6, -1e-6], [2.5, 0.1, -0.4], [0.0, 0.0, 0.0]] {
            let r = rodrigues(w);
            let s = expm_series(hat(w));
            for i in 0..3 {
                for j in 0..3 {
                    assert!(close(r[i][j], s[i][j], 1e-12), "{w:?}");
                }
            }
        }
    }

    #[test]
    fn tilde_grad_examples() {
        let sq = |m: &MarkJet| match m {
            MarkJet::Dilation(s) => s.square(),
            _ => unreachable!(),
        };
        let g = MarkSpace::Dilation.tilde_grad(sq, &MarkPoint::Dilation(1.5)).unwrap();
        assert!(close(g.as_slice()[0], 4.5, 1e-14));
        // Oracle: central difference of t ↦ f(e^t m).
        let h: f64 = 1e-5;
        let fd = ((1.5 * h.exp()).powi(2) - (1.5 * (-h).exp()).powi(2)) / (2.0 * h);
        assert!(close(g.as_slice()[0], fd, 1e-8));

        let cosf = |m: &MarkJet| match m {
            MarkJet::Circle(a) => a.cos(),
            _ => unreachable!(),
        };
        let g = MarkSpace::Circle.tilde_grad(cosf, &MarkPoint::Circle(PI / 2.0)).unwrap();
        assert!(close(g.as_slice()[0], -1.0, 1e-15));

        for space in MarkSpace::ALL {
            let m = match space {
                MarkSpace::Circle => MarkPoint::Circle(1.0),
                MarkSpace::Dilation => MarkPoint::Dilation(1.0),
                MarkSpace::Sphere => MarkPoint::Sphere([1.0, 0.0, 0.0]),
            };
            let g = space.tilde_grad(|_| Jet::constant(3.0), &m).unwrap();
            assert!(g.as_slice().iter().all(|&c| c == 0.0));
            assert_eq!(space.tilde_laplacian(|_| Jet::constant(3.0), &m).unwrap(), 0.0);
        }
    }

    #[test]
    fn tilde_laplacian_examples() {
        let cosf = |m: &MarkJet| match m {
            MarkJet::Circle(a) => a.cos(),
            _ => unreachable!(),
        };
        let l = MarkSpace::Circle.tilde_laplacian(cosf, &MarkPoint::Circle(0.0)).unwrap();
        assert!(close(l, -1.0, 1e-14));
        let h: f64 = 1e-4;
        let fd = ((h).cos() - 2.0 + (-h).cos()) / (h * h);
        assert!(close(l, fd, 1e-7));

        // d/dm(m² f′(m)) with f = m² is 6m².
        let sq = |m: &MarkJet| match m {
            MarkJet::Dilation(s) => s.square(),
            _ => unreachable!(),
        };
        let l = MarkSpace::Dilation.tilde_laplacian(sq, &MarkPoint::Dilation(1.0)).unwrap();
        assert!(close(l, 6.0, 1e-13));
        let g = |m: f64| 2.0 * m.powi(3);
        let fd = (g(1.0 + h) - g(1.0 - h)) / (2.0 * h);
        assert!(close(l, fd, 1e-6));
    }

    #[test]
    fn sphere_laplacian_is_laplace_beltrami() {
        // z = cos θ is a degree-1 spherical harmonic: Δ z = −2 z.
        let f = |m: &MarkJet| match m {
            MarkJet::Sphere(v) => v[2],
            _ => unreachable!(),
        };
        let m = MarkPoint::sphere([0.3, -0.5, 0.8]);
        let MarkPoint::Sphere(v) = m else { panic!() };
        let l = MarkSpace::Sphere.tilde_laplacian(f, &m).unwrap();
        assert!(close(l, -2.0 * v[2], 1e-13));
        // xy is degree 2: Δ(xy) = −6 xy.
        let f = |m: &MarkJet| match m {
            MarkJet::Sphere(v) => v[0] * v[1],
            _ => unreachable!(),
        };
        let l = MarkSpace::Sphere.tilde_laplacian(f, &m).unwrap();
        assert!(close(l, -6.0 * v[0] * v[1], 1e-13));
    }

    #[test]
    fn lambda_density_examples() {
        let c = MarkSpace::Circle;
        assert_eq!(c.lambda_density(&GroupPoint::Rotation2(1.3), &MarkPoint::Circle(0.2)).unwrap(), 1.0);
        let d = MarkSpace::Dilation;
        assert_eq!(d.lambda_density(&GroupPoint::Scale(2.0), &MarkPoint::Dilation(0.7)).unwrap(), 0.5);
        assert_eq!(d.lambda_density(&GroupPoint::Scale(1.0), &MarkPoint::Dilation(0.7)).unwrap(), 1.0);
        // Change of variables: ∫ f(2m) dm = ∫ f(m) · ½ dm.
        let f = |m: f64| (-(m - 2.0) * (m - 2.0)).exp();
        let lhs = integrate(|m| f(2.0 * m), 0.0, 20.0, Tolerance::default()).unwrap();
        let rhs = integrate(|m| f(m) * 0.5, 0.0, 40.0, Tolerance::default()).unwrap();
        assert!(close(lhs, rhs, 1e-10));
    }

    #[test]
    fn grad_plambda_examples() {
        assert_eq!(MarkSpace::Circle.grad_plambda_e(&MarkPoint::Circle(0.5)).unwrap().as_slice(), &[0.0]);
        assert_eq!(MarkSpace::Dilation.grad_plambda_e(&MarkPoint::Dilation(0.5)).unwrap().as_slice(), &[-1.0]);
        assert_eq!(
            MarkSpace::Sphere.grad_plambda_e(&MarkPoint::Sphere([0.0, 1.0, 0.0])).unwrap().as_slice(),
            &[0.0, 0.0, 0.0]
        );
        // d/dt p^λ(e^t, m) at t = 0 by central difference.
        let h: f64 = 1e-6;
        let d = MarkSpace::Dilation;
        let p = |t: f64| d.lambda_density(&GroupPoint::Scale(t.exp()), &MarkPoint::Dilation(1.0)).unwrap();
        assert!(close((p(h) - p(-h)) / (2.0 * h), -1.0, 1e-8));
    }

    #[test]
    fn sphere_bracket_is_a_homomorphism() {
        // [∇̃_a, ∇̃_b] f = ∇̃_{[a,b]} f for f(m) = x² + yz.
        let space = MarkSpace::Sphere;
        let a = [0.4, -1.1, 0.3];
        let b = [0.9, 0.2, -0.7];
        let f = |m: &MarkJet| match m {
            MarkJet::Sphere(v) => v[0].square() + v[1] * v[2],
            _ => unreachable!(),
        };
        let m = MarkPoint::sphere([0.2, 0.6, -0.5]).to_jet();
        let aj = a.map(Jet::constant);
        let bj = b.map(Jet::constant);
        // ∇̃_a(∇̃_b f)(m): outer generator 0 moves along a, inner generator 1 along b.
        let second = |first: &[Jet; 3], then: &[Jet; 3]| {
            let outer = space.nudge(&m, first, Jet::epsilon(0));
            let inner = space.nudge(&outer, then, Jet::epsilon(1));
            f(&inner).derivative(1).derivative(0).value()
        };
        let lhs = second(&aj, &bj) - second(&bj, &aj);
        let br = space.bracket(&AlgebraVector::new(&a), &AlgebraVector::new(&b)).unwrap();
        let s = br.as_slice();
        let g = space.tilde_grad(f, &m.value()).unwrap();
        let rhs = g.dot(&AlgebraVector::new(s));
        assert!(close(lhs, rhs, 1e-13), "{lhs} vs {rhs}");
    }

    #[test]
    fn duality_of_grad_plambda_by_quadrature() {
        // ∫ ∇̃_u f dλ = ∫ f ⟨∇^G p^λ(e,m), u⟩ dλ on the dilation model, for
        // compactly supported f.
        let d = MarkSpace::Dilation;
        for (c, w, u) in [(1.0, 0.5, 1.0), (2.5, 1.2, -0.7), (0.8, 0.3, 2.0)] {
            let bump = move |m: &MarkJet| match m {
                MarkJet::Dilation(s) => {
                    let z = (*s - c) / w;
                    let r2 = z.square();
                    if r2.value() < 1.0 {
                        (-(1.0 - r2).recip()).exp()
                    } else {
                        Jet::constant(0.0)
                    }
                }
                _ => unreachable!(),
            };
            let lhs = integrate(
                |s| {
                    let g = d.tilde_grad(bump, &MarkPoint::Dilation(s)).unwrap();
                    g.as_slice()[0] * u
                },
                c - w,
                c + w,
                Tolerance::new(1e-12, 1e-12),
            )
            .unwrap();
            let rhs = integrate(|s| bump(&MarkJet::Dilation(Jet::constant(s))).value() * -u, c - w, c + w, Tolerance::new(1e-12, 1e-12))
                .unwrap();
            assert!(close(lhs, rhs, 1e-6), "{lhs} vs {rhs}");
        }
    }

    fn arb_mark(space: MarkSpace) -> BoxedStrategy<MarkPoint> {
        match space {
            MarkSpace::Circle => (0.0..TAU).prop_map(MarkPoint::Circle).boxed(),
            MarkSpace::Dilation => (0.01f64..50.0).prop_map(MarkPoint::Dilation).boxed(),
            MarkSpace::Sphere => (-1.0f64..1.0, 0.0..TAU)
                .prop_map(|(z, p)| {
                    let r = (1.0 - z * z).sqrt();
                    MarkPoint::sphere([r * p.cos(), r * p.sin(), z])
                })
                .boxed(),
        }
    }

    fn arb_algebra(space: MarkSpace) -> BoxedStrategy<AlgebraVector> {
        prop::collection::vec(-3.0f64..3.0, space.algebra_dim()).prop_map(|v| AlgebraVector::new(&v)).boxed()
    }

    fn marks_close(a: &MarkPoint, b: &MarkPoint, tol: f64) -> bool {
        match (a, b) {
            (MarkPoint::Circle(x), MarkPoint::Circle(y)) => {
                let d = (x - y).rem_euclid(TAU);
                d.min(TAU - d) <= tol
            }
            (MarkPoint::Dilation(x), MarkPoint::Dilation(y)) => (x - y).abs() <= tol * x.abs().max(1.0),
            (MarkPoint::Sphere(x), MarkPoint::Sphere(y)) => (0..3).all(|i| (x[i] - y[i]).abs() <= tol),
            _ => false,
        }
    }

    fn arb_case() -> impl Strategy<Value = (MarkSpace, AlgebraVector, AlgebraVector, MarkPoint)> {
        (0usize..3).prop_flat_map(|i| {
            let space = MarkSpace::ALL[i];
            (Just(space), arb_algebra(space), arb_algebra(space), arb_mark(space))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(3000))]

        #[test]
        fn action_axioms((space, u1, u2, m) in arb_case()) {
            let g1 = space.exp_map(&u1, 1.0).unwrap();
            let g2 = space.exp_map(&u2, 1.0).unwrap();
            prop_assert!(marks_close(&space.act(&space.identity(), &m).unwrap(), &m, 1e-12));
            let lhs = space.act(&g1, &space.act(&g2, &m).unwrap()).unwrap();
            let rhs = space.act(&space.compose(&g1, &g2).unwrap(), &m).unwrap();
            prop_assert!(marks_close(&lhs, &rhs, 1e-12), "{:?} vs {:?}", lhs, rhs);
            prop_assert_eq!(space.lambda_density(&space.identity(), &m).unwrap(), 1.0);
        }

        #[test]
        fn exp_map_one_parameter_subgroup((space, u, _w, _m) in arb_case(), s in -2.0f64..2.0, t in -2.0f64..2.0) {
            let prod = space.compose(&space.exp_map(&u, s).unwrap(), &space.exp_map(&u, t).unwrap()).unwrap();
            let direct = space.exp_map(&u, s + t).unwrap();
            let ok = match (prod, direct) {
                (GroupPoint::Rotation2(a), GroupPoint::Rotation2(b)) => (a - b).abs() <= 1e-10,
                (GroupPoint::Scale(a), GroupPoint::Scale(b)) => (a - b).abs() <= 1e-10 * b,
                (GroupPoint::Rotation3(a), GroupPoint::Rotation3(b)) =>
                    (0..3).all(|i| (0..3).all(|j| (a[i][j] - b[i][j]).abs() <= 1e-10)),
                _ => false,
            };
            prop_assert!(ok);
            prop_assert!(prod.validate().is_ok());
        }
    }
}
