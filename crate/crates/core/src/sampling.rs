//! Marked Poisson measures π_σ̃ on a window, mixed measures μ_{κ,σ̃}, the
//! closed-form Laplace functional and Monte Carlo estimation.
//!
//! The intensity is σ̃(dx, dm) = ρ(x) p(x, m) dx λ(dm) with p(x, ·) a
//! probability density with respect to λ.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::base_space::{Point, Window};
use crate::configuration::MarkedConfiguration;
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::mark_space::{MarkJet, MarkPoint, MarkSpace};
use crate::quadrature::{integrate_box, Tolerance};

/// Base density ρ on X.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseDensity {
    Constant { value: f64 },
    /// amplitude · exp(−|x − center|² / (2 width²)).
    Gaussian { amplitude: f64, center: Vec<f64>, width: f64 },
    /// amplitude · exp(−1/(1 − |x − center|²/radius²)) inside the ball; zero outside.
    Bump { amplitude: f64, center: Vec<f64>, radius: f64 },
}

impl BaseDensity {
    fn validate(&self, dim: usize) -> Result<()> {
        let ok = match self {
            BaseDensity::Constant { value } => *value > 0.0 && value.is_finite(),
            BaseDensity::Gaussian { amplitude, center, width } => {
                *amplitude > 0.0 && *width > 0.0 && center.len() == dim && center.iter().all(|c| c.is_finite())
            }
            BaseDensity::Bump { amplitude, center, radius } => {
                *amplitude > 0.0 && *radius > 0.0 && center.len() == dim && center.iter().all(|c| c.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid base density {self:?} for dimension {dim}")))
        }
    }

    pub fn value(&self, x: &Point) -> f64 {
        match self {
            BaseDensity::Constant { value } => *value,
            BaseDensity::Gaussian { amplitude, center, width } => {
                let r2: f64 = x.as_slice().iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                amplitude * (-r2 / (2.0 * width * width)).exp()
            }
            BaseDensity::Bump { amplitude, center, radius } => {
                let s: f64 = x.as_slice().iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() / (radius * radius);
                if s < 1.0 {
                    amplitude * (-1.0 / (1.0 - s)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// log ρ on jets; only meaningful where ρ > 0.
    pub fn log_jet(&self, x: &[Jet]) -> Jet {
        match self {
            BaseDensity::Constant { value } => Jet::constant(value.ln()),
            BaseDensity::Gaussian { amplitude, center, width } => {
                let r2: Jet = x.iter().zip(center).map(|(a, c)| (*a - *c).square()).sum();
                r2 * (-0.5 / (width * width)) + amplitude.ln()
            }
            BaseDensity::Bump { amplitude, center, radius } => {
                let s: Jet = x.iter().zip(center).map(|(a, c)| ((*a - *c) / *radius).square()).sum();
                -(1.0 - s).recip() + amplitude.ln()
            }
        }
    }

    /// An upper bound of ρ on the whole space.
    pub fn sup(&self) -> f64 {
        match self {
            BaseDensity::Constant { value } => *value,
            BaseDensity::Gaussian { amplitude, .. } => *amplitude,
            BaseDensity::Bump { amplitude, .. } => amplitude * (-1f64).exp(),
        }
    }

    /// ∫ρ over all of ℝ^d when finite.
    pub fn full_mass(&self, dim: usize) -> Option<f64> {
        match self {
            BaseDensity::Constant { .. } => None,
            BaseDensity::Gaussian { amplitude, width, .. } => {
                Some(amplitude * (TAU * width * width).powf(dim as f64 / 2.0))
            }
            BaseDensity::Bump { .. } => None,
        }
    }

    /// Bounding box of {ρ > 0}, if bounded.
    pub fn support(&self) -> Option<Window> {
        match self {
            BaseDensity::Bump { center, radius, .. } => {
                let lo: Vec<f64> = center.iter().map(|c| c - radius).collect();
                let hi: Vec<f64> = center.iter().map(|c| c + radius).collect();
                Window::new(&lo, &hi).ok()
            }
            _ => None,
        }
    }
}

/// Mark density p(x, ·) with respect to λ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarkFamily {
    CircleUniform,
    /// exp(κ cos(m − μ(x))) / (2π I₀(κ)) with μ(x) = mean + slope·x₁.
    VonMises {
        kappa: f64,
        mean: f64,
        #[serde(default)]
        slope: f64,
    },
    /// Gamma(shape, r(x)) with r(x) = rate·exp(slope·x₁); shape ≥ 2.
    DilationGamma {
        shape: f64,
        rate: f64,
        #[serde(default)]
        slope: f64,
    },
    SphereUniform,
    /// κ/(4π sinh κ) · exp(κ⟨μ(x), m⟩) with μ(x) the mean direction turned by slope·x₁ about the z axis.
    VonMisesFisher {
        kappa: f64,
        mean: [f64; 3],
        #[serde(default)]
        slope: f64,
    },
}

/// I₀(κ) by its power series.
pub fn bessel_i0(k: f64) -> f64 {
    let q = 0.25 * k * k;
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..500 {
        term *= q / (j as f64 * j as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

fn ln_sinh(k: f64) -> f64 {
    if k > 20.0 {
        k - 2f64.ln() + (-2.0 * k).exp().ln_1p()
    } else {
        k.sinh().ln()
    }
}

impl MarkFamily {
    pub fn space(&self) -> MarkSpace {
        match self {
            MarkFamily::CircleUniform | MarkFamily::VonMises { .. } => MarkSpace::Circle,
            MarkFamily::DilationGamma { .. } => MarkSpace::Dilation,
            MarkFamily::SphereUniform | MarkFamily::VonMisesFisher { .. } => MarkSpace::Sphere,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            MarkFamily::CircleUniform | MarkFamily::SphereUniform => true,
            MarkFamily::VonMises { kappa, mean, slope } => {
                *kappa >= 0.0 && *kappa <= 50.0 && mean.is_finite() && slope.is_finite()
            }
            MarkFamily::DilationGamma { shape, rate, slope } => {
                *shape >= 2.0 && shape.is_finite() && *rate > 0.0 && rate.is_finite() && slope.is_finite()
            }
            MarkFamily::VonMisesFisher { kappa, mean, slope } => {
                let n = (mean[0] * mean[0] + mean[1] * mean[1] + mean[2] * mean[2]).sqrt();
                *kappa > 0.0 && *kappa <= 200.0 && (n - 1.0).abs() < 1e-12 && slope.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid mark family {self:?}")))
        }
    }

    fn gamma_rate(rate: f64, slope: f64, x0: f64) -> f64 {
        rate * (slope * x0).exp()
    }

    fn vmf_mean(mean: &[f64; 3], slope: f64, x0: f64) -> [f64; 3] {
        let (s, c) = (slope * x0).sin_cos();
        [c * mean[0] - s * mean[1], s * mean[0] + c * mean[1], mean[2]]
    }

    /// log p(x, m) on jets.
    pub fn log_jet(&self, x: &[Jet], m: &MarkJet) -> Jet {
        match (self, m) {
            (MarkFamily::CircleUniform, _) => Jet::constant(-TAU.ln()),
            (MarkFamily::SphereUniform, _) => Jet::constant(-(4.0 * PI).ln()),
            (MarkFamily::VonMises { kappa, mean, slope }, MarkJet::Circle(a)) => {
                let mu = x[0] * *slope + *mean;
                (*a - mu).cos() * *kappa - (TAU * bessel_i0(*kappa)).ln()
            }
            (MarkFamily::DilationGamma { shape, rate, slope }, MarkJet::Dilation(s)) => {
                let log_r = x[0] * *slope + rate.ln();
                let r = log_r.exp();
                log_r * *shape + s.ln() * (shape - 1.0) - r * *s - ln_gamma(*shape)
            }
            (MarkFamily::VonMisesFisher { kappa, mean, slope }, MarkJet::Sphere(v)) => {
                let ang = x[0] * *slope;
                let (s, c) = (ang.sin(), ang.cos());
                let mu = [c * mean[0] - s * mean[1], s * mean[0] + c * mean[1], Jet::constant(mean[2])];
                let dot = mu[0] * v[0] + mu[1] * v[1] + mu[2] * v[2];
                dot * *kappa + (kappa.ln() - (4.0 * PI).ln() - ln_sinh(*kappa))
            }
            _ => panic!("mark {m:?} does not match family {self:?}"),
        }
    }

    pub fn density(&self, x: &Point, m: &MarkPoint) -> f64 {
        let xs = x.to_jets();
        self.log_jet(&xs[..x.dim()], &m.to_jet()).value().exp()
    }

    /// Upper limit for mark quadrature on ℝ₊ beyond which p(x, ·) is negligible.
    pub fn dilation_upper(&self, x: &Point) -> f64 {
        match self {
            MarkFamily::DilationGamma { shape, rate, slope } => {
                (shape + 60.0 + 12.0 * shape.sqrt()) / Self::gamma_rate(*rate, *slope, x.get(0))
            }
            _ => 0.0,
        }
    }

    /// Draws m ~ p(x, ·).
    pub fn sample<R: Rng + ?Sized>(&self, x: &Point, rng: &mut R) -> Result<MarkPoint> {
        Ok(match self {
            MarkFamily::CircleUniform => MarkPoint::circle(rng.random::<f64>() * TAU),
            MarkFamily::VonMises { kappa, mean, slope } => {
                // Rejection from the uniform law with acceptance exp(κ(cos(θ − μ) − 1)).
                let mu = mean + slope * x.get(0);
                loop {
                    let th = rng.random::<f64>() * TAU;
                    if rng.random::<f64>() <= (kappa * ((th - mu).cos() - 1.0)).exp() {
                        break MarkPoint::circle(th);
                    }
                }
            }
            MarkFamily::DilationGamma { shape, rate, slope } => {
                let r = Self::gamma_rate(*rate, *slope, x.get(0));
                let g = Gamma::new(*shape, 1.0 / r).map_err(|e| Error::Config(format!("gamma marks: {e}")))?;
                loop {
                    let s: f64 = g.sample(rng);
                    if s > 0.0 {
                        break MarkPoint::Dilation(s);
                    }
                }
            }
            MarkFamily::SphereUniform => {
                let z = 2.0 * rng.random::<f64>() - 1.0;
                let phi = rng.random::<f64>() * TAU;
                let r = (1.0 - z * z).max(0.0).sqrt();
                MarkPoint::sphere([r * phi.cos(), r * phi.sin(), z])
            }
            MarkFamily::VonMisesFisher { kappa, mean, slope } => {
                let mu = Self::vmf_mean(mean, *slope, x.get(0));
                // Inversion of the law of w = ⟨μ, m⟩, density ∝ e^{κw} on [−1, 1].
                let u: f64 = rng.random();
                let w = (1.0 + (u + (1.0 - u) * (-2.0 * kappa).exp()).ln() / kappa).clamp(-1.0, 1.0);
                let phi = rng.random::<f64>() * TAU;
                let (e1, e2) = orthonormal_complement(&mu);
                let r = (1.0 - w * w).max(0.0).sqrt();
                let (s, c) = phi.sin_cos();
                MarkPoint::sphere([
                    w * mu[0] + r * (c * e1[0] + s * e2[0]),
                    w * mu[1] + r * (c * e1[1] + s * e2[1]),
                    w * mu[2] + r * (c * e1[2] + s * e2[2]),
                ])
            }
        })
    }
}

fn orthonormal_complement(mu: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let helper = if mu[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = helper[0] * mu[0] + helper[1] * mu[1] + helper[2] * mu[2];
    let mut e1 = [helper[0] - d * mu[0], helper[1] - d * mu[1], helper[2] - d * mu[2]];
    let n = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    e1 = e1.map(|c| c / n);
    let e2 = crate::mark_space::cross(*mu, e1);
    (e1, e2)
}

/// Mixing law κ on ℝ₊ for μ_{κ,σ̃} = ∫ π_{zσ̃} κ(dz).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MixingLaw {
    PointMass { z: f64 },
    Discrete { atoms: Vec<(f64, f64)> },
    Gamma { shape: f64, rate: f64 },
}

impl MixingLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            MixingLaw::PointMass { z } => *z >= 0.0 && z.is_finite(),
            MixingLaw::Discrete { atoms } => {
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                !atoms.is_empty()
                    && atoms.iter().all(|(z, w)| *z >= 0.0 && z.is_finite() && *w >= 0.0)
                    && (total - 1.0).abs() <= 1e-12
            }
            MixingLaw::Gamma { shape, rate } => *shape > 0.0 && *rate > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid mixing law {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            MixingLaw::PointMass { z } => *z,
            MixingLaw::Discrete { atoms } => atoms.iter().map(|(z, w)| z * w).sum(),
            MixingLaw::Gamma { shape, rate } => shape / rate,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(match self {
            MixingLaw::PointMass { z } => *z,
            MixingLaw::Discrete { atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = atoms[atoms.len() - 1].0;
                for (z, w) in atoms {
                    acc += w;
                    if u < acc {
                        chosen = *z;
                        break;
                    }
                }
                chosen
            }
            MixingLaw::Gamma { shape, rate } => {
                let g = Gamma::new(*shape, 1.0 / rate).map_err(|e| Error::Config(format!("gamma mixing: {e}")))?;
                g.sample(rng)
            }
        })
    }
}

/// σ̃ restricted to a window, with its sampling bound.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityModel {
    window: Window,
    rho: BaseDensity,
    marks: MarkFamily,
    rho_max: f64,
    mass: f64,
}

impl IntensityModel {
    /// Builds the model; `rho_max` defaults to the analytic supremum of ρ.
    pub fn new(window: Window, rho: BaseDensity, marks: MarkFamily, rho_max: Option<f64>) -> Result<Self> {
        rho.validate(window.dim())?;
        marks.validate()?;
        let rho_max = rho_max.unwrap_or_else(|| rho.sup());
        if !(rho_max > 0.0 && rho_max.is_finite()) {
            return Err(Error::Config(format!("rejection bound {rho_max} must be positive")));
        }
        let mut model = IntensityModel { window, rho, marks, rho_max, mass: 0.0 };
        model.mass = model.compute_mass()?;
        Ok(model)
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    pub fn space(&self) -> MarkSpace {
        self.marks.space()
    }

    pub fn rho(&self) -> &BaseDensity {
        &self.rho
    }

    pub fn marks(&self) -> &MarkFamily {
        &self.marks
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    /// σ̃(Λ × M) = ∫_Λ ρ dx.
    pub fn total_mass(&self) -> f64 {
        self.mass
    }

    /// Mass of ρ outside the window, when ρ has finite total mass.
    pub fn mass_defect(&self) -> Option<f64> {
        self.rho.full_mass(self.dim()).map(|m| m - self.mass)
    }

    fn compute_mass(&self) -> Result<f64> {
        let Some(region) = self.base_region() else {
            return Ok(0.0);
        };
        if let BaseDensity::Constant { value } = self.rho {
            return Ok(value * region.volume());
        }
        integrate_box(&|x: &[f64]| Ok(self.rho.value(&Point::new(x))), region.lo(), region.hi(), Tolerance::new(1e-11, 1e-12))
    }

    /// Window ∩ support of ρ.
    pub fn base_region(&self) -> Option<Window> {
        match self.rho.support() {
            Some(s) => self.window.intersect(&s),
            None => Some(self.window),
        }
    }

    pub fn q(&self, x: &Point, m: &MarkPoint) -> f64 {
        if !self.window.contains(x) {
            return 0.0;
        }
        self.rho.value(x) * self.marks.density(x, m)
    }

    /// log q(x, m) on jets.
    pub fn log_q_jet(&self, x: &[Jet], m: &MarkJet) -> Jet {
        self.rho.log_jet(x) + self.marks.log_jet(x, m)
    }

    /// ∫ f dσ̃ over (window ∩ region) × M.
    pub fn integrate<F>(&self, f: F, region: Option<&Window>, tol: Tolerance) -> Result<f64>
    where
        F: Fn(&Point, &MarkPoint) -> f64,
    {
        let f = &f;
        self.integrate_fibered(
            |x| {
                let x = *x;
                Ok(move |m: &MarkPoint| f(&x, m))
            },
            region,
            tol,
        )
    }

    /// ∫ f dσ̃ where `make(x)` builds the mark integrand m ↦ f(x, m), so work
    /// that depends only on x is done once per base node.
    pub fn integrate_fibered<G, H>(&self, make: G, region: Option<&Window>, tol: Tolerance) -> Result<f64>
    where
        G: Fn(&Point) -> Result<H>,
        H: Fn(&MarkPoint) -> f64,
    {
        let Some(mut base) = self.base_region() else {
            return Ok(0.0);
        };
        if let Some(r) = region {
            match base.intersect(r) {
                Some(b) => base = b,
                None => return Ok(0.0),
            }
        }
        let space = self.space();
        let inner_tol = Tolerance::new(tol.abs * 1e-2, tol.rel * 1e-2);
        integrate_box(
            &|xs: &[f64]| {
                let x = Point::new(xs);
                let r = self.rho.value(&x);
                if r == 0.0 {
                    return Ok(0.0);
                }
                let f = make(&x)?;
                let upper = self.marks.dilation_upper(&x);
                let inner = space.integrate_lambda(|m| f(m) * self.marks.density(&x, m), upper, inner_tol)?;
                Ok(r * inner)
            },
            base.lo(),
            base.hi(),
            tol,
        )
    }

    /// Draws one configuration from π_{zσ̃}.
    pub fn sample_scaled<R: Rng + ?Sized>(&self, z: f64, rng: &mut R, index: Option<u64>) -> Result<MarkedConfiguration> {
        let mean = z * self.mass;
        let n = if mean > 0.0 {
            let p = Poisson::new(mean).map_err(|e| Error::Config(format!("poisson count: {e}")))?;
            p.sample(rng) as usize
        } else {
            0
        };
        let region = self.window;
        let mut points = Vec::with_capacity(n);
        for _ in 0..n {
            let x = loop {
                let coords: Vec<f64> =
                    (0..region.dim()).map(|i| region.lo()[i] + rng.random::<f64>() * (region.hi()[i] - region.lo()[i])).collect();
                let x = Point::new(&coords);
                let r = self.rho.value(&x);
                if r > self.rho_max {
                    return Err(Error::Config(format!(
                        "rejection bound {} violated: ρ({:?}) = {r}",
                        self.rho_max,
                        x.as_slice()
                    )));
                }
                if rng.random::<f64>() * self.rho_max < r {
                    break x;
                }
            };
            let m = self.marks.sample(&x, rng)?;
            points.push((x, m));
        }
        MarkedConfiguration::new(self.dim(), self.space(), points).map_err(|e| match e {
            Error::DuplicateBasePoint { point, .. } => Error::DuplicateBasePoint { point, sample: index },
            other => other,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MarkedConfiguration> {
        self.sample_scaled(1.0, rng, None)
    }

    pub fn sample_mixed<R: Rng + ?Sized>(&self, kappa: &MixingLaw, rng: &mut R) -> Result<MarkedConfiguration> {
        let z = kappa.sample(rng)?;
        if z == 0.0 {
            return Ok(MarkedConfiguration::empty(self.dim(), self.space()));
        }
        self.sample_scaled(z, rng, None)
    }

    /// exp(∫(e^φ − 1) dσ̃).
    pub fn laplace_closed<F>(&self, phi: F, support: Option<&Window>) -> Result<f64>
    where
        F: Fn(&Point, &MarkPoint) -> f64,
    {
        let v = self.integrate(|x, m| phi(x, m).exp_m1(), support, Tolerance::new(1e-11, 1e-10))?;
        Ok(v.exp())
    }
}

/// The law sampled by Monte Carlo: π_σ̃ or μ_{κ,σ̃}.
#[derive(Clone, Debug)]
pub enum Measure<'a> {
    Poisson(&'a IntensityModel),
    Mixed(&'a IntensityModel, &'a MixingLaw),
}

impl Measure<'_> {
    pub fn model(&self) -> &IntensityModel {
        match self {
            Measure::Poisson(m) | Measure::Mixed(m, _) => m,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, index: u64) -> Result<MarkedConfiguration> {
        match self {
            Measure::Poisson(m) => m.sample_scaled(1.0, rng, Some(index)),
            Measure::Mixed(m, k) => {
                let z = k.sample(rng)?;
                if z == 0.0 {
                    Ok(MarkedConfiguration::empty(m.dim(), m.space()))
                } else {
                    m.sample_scaled(z, rng, Some(index))
                }
            }
        }
    }
}

/// Independent stream for sample `index` under `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: u64,
}

/// The pass rule |estimate − truth| ≤ max(4·SE, 1e-7).
pub fn within_tolerance(estimate: f64, truth: f64, se: f64) -> bool {
    (estimate - truth).abs() <= (4.0 * se).max(1e-7)
}

impl Estimate {
    pub fn passes(&self, truth: f64) -> bool {
        within_tolerance(self.mean, truth, self.std_error)
    }

    pub fn variance(&self) -> f64 {
        self.std_error * self.std_error * self.n as f64
    }
}

/// Samples per block in the parallel reduction.
pub const MC_BLOCK: u64 = 1024;

#[derive(Clone, Copy)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    const EMPTY: Moments = Moments { n: 0.0, mean: 0.0, m2: 0.0 };

    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if o.n == 0.0 {
            return self;
        }
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments { n, mean: self.mean + d * o.n / n, m2: self.m2 + o.m2 + d * d * self.n * o.n / n }
    }
}

/// Estimates E[f] for several components of a vector functional of the
/// per-sample stream. Sample i uses `sample_rng(seed, i)`; blocks of
/// `MC_BLOCK` samples are reduced in index order, so results do not depend on
/// the number of worker threads.
pub fn mc_estimate_streams<F>(n_samples: u64, seed: u64, components: usize, f: F) -> Result<Vec<Estimate>>
where
    F: Fn(&mut ChaCha8Rng, u64) -> Result<Vec<f64>> + Sync,
{
    if n_samples < 2 {
        return Err(Error::Usage(format!("Monte Carlo needs at least 2 samples, got {n_samples}")));
    }
    let blocks = n_samples.div_ceil(MC_BLOCK);
    let partial: Vec<Result<Vec<Moments>>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![Moments::EMPTY; components];
            for i in (b * MC_BLOCK)..((b + 1) * MC_BLOCK).min(n_samples) {
                let mut rng = sample_rng(seed, i);
                let vals = f(&mut rng, i)?;
                if vals.len() != components {
                    return Err(Error::Usage(format!("functional returned {} values, expected {components}", vals.len())));
                }
                for (a, v) in acc.iter_mut().zip(vals) {
                    if !v.is_finite() {
                        return Err(Error::Domain(format!("non-finite functional value at sample {i}")));
                    }
                    a.push(v);
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = vec![Moments::EMPTY; components];
    for block in partial {
        for (t, m) in total.iter_mut().zip(block?) {
            *t = t.merge(m);
        }
    }
    Ok(total
        .into_iter()
        .map(|m| Estimate { mean: m.mean, std_error: (m.m2 / (m.n - 1.0)).sqrt() / m.n.sqrt(), n: n_samples })
        .collect())
}

/// Estimates E[F_k(ω)] for a vector of functionals under `measure`.
pub fn mc_estimate_many<F>(measure: &Measure<'_>, n_samples: u64, seed: u64, components: usize, f: F) -> Result<Vec<Estimate>>
where
    F: Fn(&MarkedConfiguration) -> Result<Vec<f64>> + Sync,
{
    mc_estimate_streams(n_samples, seed, components, |rng, i| {
        let omega = measure.sample(rng, i)?;
        f(&omega)
    })
}

/// Estimates E[F(ω)] under `measure`.
pub fn mc_estimate<F>(measure: &Measure<'_>, n_samples: u64, seed: u64, f: F) -> Result<Estimate>
where
    F: Fn(&MarkedConfiguration) -> f64 + Sync,
{
    Ok(mc_estimate_many(measure, n_samples, seed, 1, |w| Ok(vec![f(w)]))?[0])
}

/// Reference scenarios used by the harness and the tests.
pub mod presets {
    use super::*;

    /// ρ = 2 on [0, 1] with uniform circle marks: σ̃(Λ × M) = 2.
    pub fn mass_two_circle() -> IntensityModel {
        IntensityModel::new(Window::interval(0.0, 1.0).unwrap(), BaseDensity::Constant { value: 2.0 }, MarkFamily::CircleUniform, None)
            .unwrap()
    }

    /// Gaussian base on [−3, 3] with x-dependent von Mises circle marks.
    pub fn von_mises_circle() -> IntensityModel {
        IntensityModel::new(
            Window::interval(-3.0, 3.0).unwrap(),
            BaseDensity::Gaussian { amplitude: 1.5, center: vec![0.0], width: 1.2 },
            MarkFamily::VonMises { kappa: 1.5, mean: 0.5, slope: 0.7 },
            None,
        )
        .unwrap()
    }

    /// Constant base on [0, 2] with Gamma(3, 1) dilation marks.
    pub fn gamma_dilation() -> IntensityModel {
        IntensityModel::new(
            Window::interval(0.0, 2.0).unwrap(),
            BaseDensity::Constant { value: 1.0 },
            MarkFamily::DilationGamma { shape: 3.0, rate: 1.0, slope: 0.0 },
            None,
        )
        .unwrap()
    }

    /// Gaussian base on [−2.5, 2.5] with Gamma marks whose rate depends on x.
    pub fn tilted_gamma_dilation() -> IntensityModel {
        IntensityModel::new(
            Window::interval(-2.5, 2.5).unwrap(),
            BaseDensity::Gaussian { amplitude: 1.2, center: vec![0.2], width: 1.0 },
            MarkFamily::DilationGamma { shape: 3.0, rate: 1.0, slope: 0.4 },
            None,
        )
        .unwrap()
    }

    /// Gaussian base on [−2, 2] with von Mises–Fisher sphere marks.
    pub fn vmf_sphere() -> IntensityModel {
        IntensityModel::new(
            Window::interval(-2.0, 2.0).unwrap(),
            BaseDensity::Gaussian { amplitude: 1.0, center: vec![0.0], width: 1.0 },
            MarkFamily::VonMisesFisher { kappa: 2.0, mean: [0.0, 0.0, 1.0], slope: 0.6 },
            None,
        )
        .unwrap()
    }

    /// Planar Gaussian base on [−2, 2]² with von Mises circle marks.
    pub fn plane_circle() -> IntensityModel {
        IntensityModel::new(
            Window::new(&[-2.0, -2.0], &[2.0, 2.0]).unwrap(),
            BaseDensity::Gaussian { amplitude: 0.8, center: vec![0.0, 0.0], width: 0.9 },
            MarkFamily::VonMises { kappa: 1.0, mean: 0.0, slope: 0.5 },
            None,
        )
        .unwrap()
    }

    /// ρ = e^{−x²/2} on [−8, 8] with uniform circle marks (the heat-kernel scenario).
    pub fn ou_circle() -> IntensityModel {
        IntensityModel::new(
            Window::interval(-8.0, 8.0).unwrap(),
            BaseDensity::Gaussian { amplitude: 1.0, center: vec![0.0], width: 1.0 },
            MarkFamily::CircleUniform,
            None,
        )
        .unwrap()
    }
}
