//! Flat base space X = ℝ^d (d ∈ {1, 2}): windows, compactly supported vector
//! fields and 𝔤-valued currents, and their flows with Jacobians.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{next_generator, Jet};
use crate::mark_space::{AlgebraVector, MarkSpace};

/// A base point in ℝ^d, d ∈ {1, 2}.
#[derive(Clone, Copy, PartialEq)]
pub struct Point {
    c: [f64; 2],
    dim: u8,
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.as_slice())
    }
}

impl Point {
    pub fn new(coords: &[f64]) -> Self {
        assert!((1..=2).contains(&coords.len()), "base dimension is 1 or 2");
        let mut c = [0.0; 2];
        c[..coords.len()].copy_from_slice(coords);
        Point { c, dim: coords.len() as u8 }
    }

    pub fn origin(dim: usize) -> Self {
        Point { c: [0.0; 2], dim: dim as u8 }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.c[..self.dim()]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.as_slice()[i]
    }

    pub fn dist2(&self, other: &Point) -> f64 {
        self.as_slice().iter().zip(other.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn to_jets(&self) -> [Jet; 2] {
        [Jet::constant(self.c[0]), Jet::constant(self.c[1])]
    }
}

/// Axis-aligned box [a₁,b₁]×…×[a_d,b_d].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WindowSpec", into = "WindowSpec")]
pub struct Window {
    lo: Point,
    hi: Point,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowSpec {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl TryFrom<WindowSpec> for Window {
    type Error = Error;
    fn try_from(s: WindowSpec) -> Result<Self> {
        Window::new(&s.lo, &s.hi)
    }
}

impl From<Window> for WindowSpec {
    fn from(w: Window) -> Self {
        WindowSpec { lo: w.lo.as_slice().to_vec(), hi: w.hi.as_slice().to_vec() }
    }
}

impl Window {
    pub fn new(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() || !(1..=2).contains(&lo.len()) {
            return Err(Error::Config(format!("window bounds {lo:?}, {hi:?} must be 1- or 2-dimensional")));
        }
        for (a, b) in lo.iter().zip(hi) {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::Config(format!("window side [{a}, {b}] is empty or unbounded")));
            }
        }
        Ok(Window { lo: Point::new(lo), hi: Point::new(hi) })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Window::new(&[a], &[b])
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn lo(&self) -> &[f64] {
        self.lo.as_slice()
    }

    pub fn hi(&self) -> &[f64] {
        self.hi.as_slice()
    }

    pub fn volume(&self) -> f64 {
        self.lo().iter().zip(self.hi()).map(|(a, b)| b - a).product()
    }

    /// Closed-box membership.
    pub fn contains(&self, x: &Point) -> bool {
        x.dim() == self.dim() && x.as_slice().iter().enumerate().all(|(i, &v)| v >= self.lo()[i] && v <= self.hi()[i])
    }

    pub fn intersect(&self, other: &Window) -> Option<Window> {
        let lo: Vec<f64> = self.lo().iter().zip(other.lo()).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi().iter().zip(other.hi()).map(|(a, b)| a.min(*b)).collect();
        Window::new(&lo, &hi).ok()
    }

    pub fn hull(&self, other: &Window) -> Window {
        let lo: Vec<f64> = self.lo().iter().zip(other.lo()).map(|(a, b)| a.min(*b)).collect();
        let hi: Vec<f64> = self.hi().iter().zip(other.hi()).map(|(a, b)| a.max(*b)).collect();
        Window { lo: Point::new(&lo), hi: Point::new(&hi) }
    }

    pub(crate) fn ball_box(center: &Point, radius: f64) -> Window {
        let lo: Vec<f64> = center.as_slice().iter().map(|c| c - radius).collect();
        let hi: Vec<f64> = center.as_slice().iter().map(|c| c + radius).collect();
        Window { lo: Point::new(&lo), hi: Point::new(&hi) }
    }
}

/// Supremum of |β′| for the profile β(r) = exp(−1/(1−r²)), rounded up.
pub const BUMP_PROFILE_LIP: f64 = 0.798_43;
/// Supremum over r of the operator norm of the swirl Jacobian per unit rate, rounded up.
pub const SWIRL_PROFILE_LIP: f64 = 0.552_24;

/// Past this value of 1/(1 − s) the profile and its low-order derivatives
/// underflow to zero, and evaluating them would produce 0·∞.
const PROFILE_CUTOFF: f64 = 700.0;

/// The profile β(s) with s = r², as a jet: exp(−1/(1−s)) for s < 1, else 0.
pub(crate) fn profile_sq(s: Jet) -> Jet {
    if s.value() < 1.0 - 1.0 / PROFILE_CUTOFF {
        (-(1.0 - s).recip()).exp()
    } else {
        Jet::constant(0.0)
    }
}

fn profile_sq_f64(s: f64) -> (f64, f64) {
    if s < 1.0 - 1.0 / PROFILE_CUTOFF {
        let w = 1.0 / (1.0 - s);
        let b = (-w).exp();
        (b, -b * w * w)
    } else {
        (0.0, 0.0)
    }
}

/// Smooth step equal to 1 on [0, inner] and 0 on [outer, ∞) as a function of r.
fn plateau_profile(r2: Jet, inner: f64, outer: f64) -> Jet {
    let r = r2.value();
    if r <= inner * inner {
        return Jet::constant(1.0);
    }
    if r >= outer * outer {
        return Jet::constant(0.0);
    }
    let t = (r2.sqrt() - inner) / (outer - inner);
    let f = |z: Jet| if z.value() > 1.0 / PROFILE_CUTOFF { (-(z.recip())).exp() } else { Jet::constant(0.0) };
    let a = f(1.0 - t);
    a / (a + f(t))
}

fn scaled_sq_dist(x: &[Jet], center: &Point, radius: f64) -> Jet {
    (0..center.dim()).map(|i| ((x[i] - center.get(i)) / radius).square()).sum()
}

fn check_center(center: &Point, radius: f64) -> Result<()> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Config(format!("bump radius must be positive, got {radius}")));
    }
    if !center.as_slice().iter().all(|c| c.is_finite()) {
        return Err(Error::Config(format!("bump center {center:?} is not finite")));
    }
    Ok(())
}

/// Smooth compactly supported vector field on X.
#[derive(Clone, Debug, PartialEq)]
pub enum BaseField {
    Zero { dim: usize },
    /// amplitude · β(|x − c| / R).
    Bump { center: Point, radius: f64, amplitude: [f64; 2] },
    /// rate · β(|x − c| / R) · J(x − c) with J the quarter turn (d = 2, divergence-free).
    Swirl { center: Point, radius: f64, rate: f64 },
    Sum(Vec<BaseField>),
    Scaled(f64, Box<BaseField>),
    /// Lie bracket [v₁, v₂] = Dv₂·v₁ − Dv₁·v₂.
    Bracket(Box<BaseField>, Box<BaseField>),
}

impl BaseField {
    pub fn zero(dim: usize) -> Self {
        BaseField::Zero { dim }
    }

    /// Bump field with the amplitude cap |amp|·Lip(β)/R < 1.
    pub fn bump(center: &[f64], radius: f64, amplitude: &[f64]) -> Result<Self> {
        let center = Point::new(center);
        check_center(&center, radius)?;
        if amplitude.len() != center.dim() {
            return Err(Error::Config(format!("amplitude {amplitude:?} does not match dimension {}", center.dim())));
        }
        let norm = amplitude.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !norm.is_finite() || norm * BUMP_PROFILE_LIP / radius >= 1.0 {
            return Err(Error::Config(format!(
                "bump amplitude {norm} exceeds the cap {} for radius {radius}",
                radius / BUMP_PROFILE_LIP
            )));
        }
        let mut amp = [0.0; 2];
        amp[..amplitude.len()].copy_from_slice(amplitude);
        Ok(BaseField::Bump { center, radius, amplitude: amp })
    }

    pub fn swirl(center: &[f64], radius: f64, rate: f64) -> Result<Self> {
        let center = Point::new(center);
        check_center(&center, radius)?;
        if center.dim() != 2 {
            return Err(Error::Config("swirl fields need a 2-dimensional base".into()));
        }
        if !rate.is_finite() || rate.abs() * SWIRL_PROFILE_LIP >= 1.0 {
            return Err(Error::Config(format!("swirl rate {rate} exceeds the cap {}", 1.0 / SWIRL_PROFILE_LIP)));
        }
        Ok(BaseField::Swirl { center, radius, rate })
    }

    pub fn bracket(a: BaseField, b: BaseField) -> Self {
        BaseField::Bracket(Box::new(a), Box::new(b))
    }

    pub fn scaled(self, s: f64) -> Self {
        BaseField::Scaled(s, Box::new(self))
    }

    pub fn dim(&self) -> usize {
        match self {
            BaseField::Zero { dim } => *dim,
            BaseField::Bump { center, .. } | BaseField::Swirl { center, .. } => center.dim(),
            BaseField::Sum(parts) => parts.first().map_or(1, BaseField::dim),
            BaseField::Scaled(_, f) => f.dim(),
            BaseField::Bracket(a, _) => a.dim(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            BaseField::Zero { .. } => true,
            BaseField::Bump { amplitude, .. } => amplitude.iter().all(|a| *a == 0.0),
            BaseField::Swirl { rate, .. } => *rate == 0.0,
            BaseField::Sum(parts) => parts.iter().all(BaseField::is_zero),
            BaseField::Scaled(s, f) => *s == 0.0 || f.is_zero(),
            BaseField::Bracket(a, b) => a.is_zero() || b.is_zero(),
        }
    }

    /// Bounding box of the closed support, or `None` for the zero field.
    pub fn support(&self) -> Option<Window> {
        if self.is_zero() {
            return None;
        }
        match self {
            BaseField::Zero { .. } => None,
            BaseField::Bump { center, radius, .. } | BaseField::Swirl { center, radius, .. } => {
                Some(Window::ball_box(center, *radius))
            }
            BaseField::Sum(parts) => parts.iter().filter_map(BaseField::support).reduce(|a, b| a.hull(&b)),
            BaseField::Scaled(_, f) => f.support(),
            BaseField::Bracket(a, b) => a.support()?.intersect(&b.support()?),
        }
    }

    /// True when the field and all its derivatives vanish at x.
    pub fn outside_support(&self, x: &Point) -> bool {
        match self {
            BaseField::Zero { .. } => true,
            BaseField::Bump { center, radius, .. } | BaseField::Swirl { center, radius, .. } => {
                self.is_zero() || x.dist2(center) >= radius * radius
            }
            BaseField::Sum(parts) => parts.iter().all(|p| p.outside_support(x)),
            BaseField::Scaled(s, f) => *s == 0.0 || f.outside_support(x),
            BaseField::Bracket(a, b) => a.outside_support(x) || b.outside_support(x),
        }
    }

    pub fn eval(&self, x: &Point) -> [f64; 2] {
        let v = self.eval_jet(&x.to_jets()[..x.dim()]);
        [v[0].value(), v[1].value()]
    }

    /// Evaluates the field on jet coordinates.
    pub fn eval_jet(&self, x: &[Jet]) -> [Jet; 2] {
        let zero = [Jet::constant(0.0); 2];
        match self {
            BaseField::Zero { .. } => zero,
            BaseField::Bump { center, radius, amplitude } => {
                let b = profile_sq(scaled_sq_dist(x, center, *radius));
                [b * amplitude[0], b * amplitude[1]]
            }
            BaseField::Swirl { center, radius, rate } => {
                let b = profile_sq(scaled_sq_dist(x, center, *radius)) * *rate;
                [-(b * (x[1] - center.get(1))), b * (x[0] - center.get(0))]
            }
            BaseField::Sum(parts) => parts.iter().fold(zero, |acc, p| {
                let v = p.eval_jet(x);
                [acc[0] + v[0], acc[1] + v[1]]
            }),
            BaseField::Scaled(s, f) => f.eval_jet(x).map(|c| c * *s),
            BaseField::Bracket(a, b) => {
                let d = x.len();
                let k = next_generator(x.iter());
                let va = a.eval_jet(x);
                let vb = b.eval_jet(x);
                let eps = Jet::epsilon(k);
                let mut xa = [Jet::constant(0.0); 2];
                let mut xb = [Jet::constant(0.0); 2];
                for i in 0..d {
                    xa[i] = x[i] + eps * va[i];
                    xb[i] = x[i] + eps * vb[i];
                }
                let b_along_a = b.eval_jet(&xa[..d]);
                let a_along_b = a.eval_jet(&xb[..d]);
                let mut out = zero;
                for i in 0..d {
                    out[i] = (b_along_a[i] - a_along_b[i]).derivative(k);
                }
                out
            }
        }
    }

    /// div v on jet coordinates (w.r.t. Lebesgue measure).
    pub fn divergence_jet(&self, x: &[Jet]) -> Jet {
        let d = x.len();
        let k = next_generator(x.iter());
        let mut total = Jet::constant(0.0);
        for i in 0..d {
            let mut xi = [x[0], if d > 1 { x[1] } else { Jet::constant(0.0) }];
            xi[i] += Jet::epsilon(k);
            total += self.eval_jet(&xi[..d])[i].derivative(k);
        }
        total
    }

    pub fn divergence(&self, x: &Point) -> f64 {
        self.divergence_jet(&x.to_jets()[..x.dim()]).value()
    }

    /// Value and Jacobian Dv(x) (row i = ∇vᵢ).
    pub fn eval_with_jacobian(&self, x: &Point) -> ([f64; 2], [[f64; 2]; 2]) {
        match self {
            BaseField::Zero { .. } => ([0.0; 2], [[0.0; 2]; 2]),
            BaseField::Bump { center, radius, amplitude } => {
                let d = x.dim();
                let r2 = radius * radius;
                let s = x.dist2(center) / r2;
                let (b, db) = profile_sq_f64(s);
                let mut jac = [[0.0; 2]; 2];
                for (i, row) in jac.iter_mut().enumerate().take(d) {
                    for (j, slot) in row.iter_mut().enumerate().take(d) {
                        *slot = amplitude[i] * db * 2.0 * (x.get(j) - center.get(j)) / r2;
                    }
                }
                ([b * amplitude[0], b * amplitude[1]], jac)
            }
            BaseField::Swirl { center, radius, rate } => {
                let r2 = radius * radius;
                let dx = [x.get(0) - center.get(0), x.get(1) - center.get(1)];
                let (b, db) = profile_sq_f64(x.dist2(center) / r2);
                let g = [db * 2.0 * dx[0] / r2, db * 2.0 * dx[1] / r2];
                let v = [-rate * b * dx[1], rate * b * dx[0]];
                let jac = [
                    [-rate * g[0] * dx[1], -rate * (g[1] * dx[1] + b)],
                    [rate * (g[0] * dx[0] + b), rate * g[1] * dx[0]],
                ];
                (v, jac)
            }
            _ => {
                let d = x.dim();
                let mut xs = [Jet::constant(0.0); 2];
                for (i, slot) in xs.iter_mut().enumerate().take(d) {
                    *slot = Jet::variable(x.get(i), i);
                }
                let v = self.eval_jet(&xs[..d]);
                let mut jac = [[0.0; 2]; 2];
                for i in 0..d {
                    for j in 0..d {
                        jac[i][j] = v[i].coeff(1 << j);
                    }
                }
                ([v[0].value(), v[1].value()], jac)
            }
        }
    }

    /// Flow ψ_t^v(x) with its Jacobian.
    pub fn flow(&self, t: f64, x: &Point) -> Result<FlowResult> {
        flow(self, t, x)
    }

    pub fn inverse_flow(&self, t: f64, x: &Point) -> Result<FlowResult> {
        flow(self, -t, x)
    }
}

/// Smooth compactly supported 𝔤-valued function on X (a current).
#[derive(Clone, Debug, PartialEq)]
pub enum AlgebraField {
    Zero { dim: usize, algebra_dim: usize },
    /// amplitude · β(|x − c| / R).
    Bump { center: Point, radius: f64, amplitude: AlgebraVector },
    /// Equal to `amplitude` on the ball of radius `inner`, vanishing outside `outer`.
    Plateau { center: Point, inner: f64, outer: f64, amplitude: AlgebraVector },
    /// ∇^X_v u.
    DerivAlong(Box<BaseField>, Box<AlgebraField>),
    /// Pointwise bracket [u₁(x), u₂(x)] in 𝔤.
    GBracket(MarkSpace, Box<AlgebraField>, Box<AlgebraField>),
    Sum(Vec<AlgebraField>),
    Scaled(f64, Box<AlgebraField>),
}

impl AlgebraField {
    pub fn zero(dim: usize, algebra_dim: usize) -> Self {
        AlgebraField::Zero { dim, algebra_dim }
    }

    pub fn bump(center: &[f64], radius: f64, amplitude: AlgebraVector) -> Result<Self> {
        let center = Point::new(center);
        check_center(&center, radius)?;
        if !amplitude.is_finite() {
            return Err(Error::Config("current amplitude must be finite".into()));
        }
        Ok(AlgebraField::Bump { center, radius, amplitude })
    }

    pub fn plateau(center: &[f64], inner: f64, outer: f64, amplitude: AlgebraVector) -> Result<Self> {
        let center = Point::new(center);
        check_center(&center, outer)?;
        if !(inner > 0.0 && inner < outer) {
            return Err(Error::Config(format!("plateau radii must satisfy 0 < {inner} < {outer}")));
        }
        Ok(AlgebraField::Plateau { center, inner, outer, amplitude })
    }

    pub fn algebra_dim(&self) -> usize {
        match self {
            AlgebraField::Zero { algebra_dim, .. } => *algebra_dim,
            AlgebraField::Bump { amplitude, .. } | AlgebraField::Plateau { amplitude, .. } => amplitude.dim(),
            AlgebraField::DerivAlong(_, u) | AlgebraField::Scaled(_, u) => u.algebra_dim(),
            AlgebraField::GBracket(space, _, _) => space.algebra_dim(),
            AlgebraField::Sum(parts) => parts.first().map_or(1, AlgebraField::algebra_dim),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            AlgebraField::Zero { .. } => true,
            AlgebraField::Bump { amplitude, .. } | AlgebraField::Plateau { amplitude, .. } => {
                amplitude.as_slice().iter().all(|a| *a == 0.0)
            }
            AlgebraField::DerivAlong(v, u) => v.is_zero() || u.is_zero(),
            AlgebraField::GBracket(space, a, b) => space.is_abelian() || a.is_zero() || b.is_zero(),
            AlgebraField::Sum(parts) => parts.iter().all(AlgebraField::is_zero),
            AlgebraField::Scaled(s, u) => *s == 0.0 || u.is_zero(),
        }
    }

    pub fn support(&self) -> Option<Window> {
        if self.is_zero() {
            return None;
        }
        match self {
            AlgebraField::Zero { .. } => None,
            AlgebraField::Bump { center, radius, .. } => Some(Window::ball_box(center, *radius)),
            AlgebraField::Plateau { center, outer, .. } => Some(Window::ball_box(center, *outer)),
            AlgebraField::DerivAlong(v, u) => v.support()?.intersect(&u.support()?),
            AlgebraField::GBracket(_, a, b) => a.support()?.intersect(&b.support()?),
            AlgebraField::Sum(parts) => parts.iter().filter_map(AlgebraField::support).reduce(|a, b| a.hull(&b)),
            AlgebraField::Scaled(_, u) => u.support(),
        }
    }

    pub fn outside_support(&self, x: &Point) -> bool {
        match self {
            AlgebraField::Zero { .. } => true,
            AlgebraField::Bump { center, radius, .. } => self.is_zero() || x.dist2(center) >= radius * radius,
            AlgebraField::Plateau { center, outer, .. } => self.is_zero() || x.dist2(center) >= outer * outer,
            AlgebraField::DerivAlong(v, u) => v.outside_support(x) || u.outside_support(x),
            AlgebraField::GBracket(space, a, b) => space.is_abelian() || a.outside_support(x) || b.outside_support(x),
            AlgebraField::Sum(parts) => parts.iter().all(|p| p.outside_support(x)),
            AlgebraField::Scaled(s, u) => *s == 0.0 || u.outside_support(x),
        }
    }

    pub fn eval(&self, x: &Point) -> AlgebraVector {
        let u = self.eval_jet(&x.to_jets()[..x.dim()]);
        let vals: Vec<f64> = u[..self.algebra_dim()].iter().map(Jet::value).collect();
        AlgebraVector::new(&vals)
    }

    pub fn eval_jet(&self, x: &[Jet]) -> [Jet; 3] {
        let zero = [Jet::constant(0.0); 3];
        match self {
            AlgebraField::Zero { .. } => zero,
            AlgebraField::Bump { center, radius, amplitude } => {
                let b = profile_sq(scaled_sq_dist(x, center, *radius));
                let mut out = zero;
                for (o, a) in out.iter_mut().zip(amplitude.as_slice()) {
                    *o = b * *a;
                }
                out
            }
            AlgebraField::Plateau { center, inner, outer, amplitude } => {
                let r2: Jet = (0..center.dim()).map(|i| (x[i] - center.get(i)).square()).sum();
                let b = plateau_profile(r2, *inner, *outer);
                let mut out = zero;
                for (o, a) in out.iter_mut().zip(amplitude.as_slice()) {
                    *o = b * *a;
                }
                out
            }
            AlgebraField::DerivAlong(v, u) => {
                let d = x.len();
                let k = next_generator(x.iter());
                let vx = v.eval_jet(x);
                let mut moved = [Jet::constant(0.0); 2];
                for i in 0..d {
                    moved[i] = x[i] + Jet::epsilon(k) * vx[i];
                }
                u.eval_jet(&moved[..d]).map(|c| c.derivative(k))
            }
            AlgebraField::GBracket(space, a, b) => space.bracket_jet(&a.eval_jet(x), &b.eval_jet(x)),
            AlgebraField::Sum(parts) => parts.iter().fold(zero, |acc, p| {
                let v = p.eval_jet(x);
                [acc[0] + v[0], acc[1] + v[1], acc[2] + v[2]]
            }),
            AlgebraField::Scaled(s, u) => u.eval_jet(x).map(|c| c * *s),
        }
    }
}

/// Endpoint ψ_t(x) and Jacobian Dψ_t(x).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowResult {
    pub endpoint: Point,
    pub jacobian: [[f64; 2]; 2],
}

impl FlowResult {
    fn identity(x: &Point) -> Self {
        FlowResult { endpoint: *x, jacobian: [[1.0, 0.0], [0.0, 1.0]] }
    }

    pub fn det(&self) -> f64 {
        det(&self.jacobian, self.endpoint.dim())
    }
}

pub(crate) fn det(m: &[[f64; 2]; 2], d: usize) -> f64 {
    if d == 1 {
        m[0][0]
    } else {
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }
}

const FLOW_ABS_TOL: f64 = 1e-10;
const FLOW_REL_TOL: f64 = 1e-10;
const FLOW_MAX_STEPS: usize = 100_000;

// Dormand–Prince 5(4) tableau; the fields are autonomous so the nodes are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// State vector: x (d entries) followed by Dψ row-major (d² entries).
type State = [f64; 6];

fn rhs(v: &BaseField, d: usize, y: &State) -> State {
    let x = Point::new(&y[..d]);
    let (f, jac) = v.eval_with_jacobian(&x);
    let mut out = [0.0; 6];
    out[..d].copy_from_slice(&f[..d]);
    for i in 0..d {
        for j in 0..d {
            out[d + i * d + j] = (0..d).map(|k| jac[i][k] * y[d + k * d + j]).sum();
        }
    }
    out
}

/// Adaptive Dormand–Prince integration of the joint state and variational equation.
fn flow(v: &BaseField, t: f64, x: &Point) -> Result<FlowResult> {
    if !t.is_finite() {
        return Err(Error::Integrator { t, reason: "non-finite flow time".into() });
    }
    if x.dim() != v.dim() {
        return Err(Error::Usage(format!("point {x:?} does not match field dimension {}", v.dim())));
    }
    if t == 0.0 || v.outside_support(x) {
        return Ok(FlowResult::identity(x));
    }
    let d = x.dim();
    let n = d + d * d;
    let mut y: State = [0.0; 6];
    y[..d].copy_from_slice(x.as_slice());
    for i in 0..d {
        y[d + i * d + i] = 1.0;
    }
    let sign = t.signum();
    let total = t.abs();
    let mut s = 0.0;
    let mut h = (0.05f64).min(total);
    let mut k = [[0.0; 6]; 7];
    k[0] = rhs(v, d, &y);
    let mut steps = 0;
    while s < total {
        steps += 1;
        if steps > FLOW_MAX_STEPS {
            return Err(Error::Integrator { t: sign * s, reason: format!("step budget exhausted at x = {:?}", &y[..d]) });
        }
        if s + h > total {
            h = total - s;
        }
        let hs = sign * h;
        for stage in 1..7 {
            let mut ys = y;
            for (idx, yi) in ys.iter_mut().enumerate().take(n) {
                *yi += hs * (0..stage).map(|j| A[stage][j] * k[j][idx]).sum::<f64>();
            }
            k[stage] = rhs(v, d, &ys);
        }
        let mut y5 = y;
        let mut err: f64 = 0.0;
        for idx in 0..n {
            let inc5: f64 = (0..7).map(|j| B5[j] * k[j][idx]).sum();
            let inc4: f64 = (0..7).map(|j| B4[j] * k[j][idx]).sum();
            y5[idx] = y[idx] + hs * inc5;
            let scale = FLOW_ABS_TOL + FLOW_REL_TOL * y[idx].abs().max(y5[idx].abs());
            err = err.max((hs * (inc5 - inc4)).abs() / scale);
        }
        if !err.is_finite() {
            return Err(Error::Integrator { t: sign * s, reason: "non-finite error estimate".into() });
        }
        if err <= 1.0 {
            s += h;
            y = y5;
            // First-same-as-last: the seventh stage is the derivative at the new state.
            k[0] = k[6];
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < 1e-14 * total.max(1.0) && s < total {
            return Err(Error::Integrator { t: sign * s, reason: format!("step size underflow at x = {:?}", &y[..d]) });
        }
    }
    let mut jac = [[0.0; 2]; 2];
    for i in 0..d {
        for j in 0..d {
            jac[i][j] = y[d + i * d + j];
        }
    }
    let res = FlowResult { endpoint: Point::new(&y[..d]), jacobian: jac };
    if res.det() <= 0.0 {
        return Err(Error::Integrator { t, reason: format!("Jacobian determinant {} is not positive", res.det()) });
    }
    Ok(res)
}
