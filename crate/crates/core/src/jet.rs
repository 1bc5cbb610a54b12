//! Truncated multivariate Taylor numbers with nilpotent generators.
//!
//! A [`Jet`] with `k` generators ε₀ … ε_{k−1} (each εᵢ² = 0) stores one
//! coefficient per subset of generators, indexed by bitmask. Evaluating a
//! smooth expression on jets propagates exact derivative rules: the
//! coefficient of ε₀ε₁ after seeding `x + ε₀ a + ε₁ b` is the mixed second
//! directional derivative along `a` and `b`.
//!
//! Every derivative in the main computation path is produced this way. A
//! derivative operator allocates the next free generator, evaluates, and
//! then splits that generator off with [`Jet::split_top`], which leaves a
//! jet in the outer generators. Nested operators therefore compose.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Maximum number of simultaneously active generators.
pub const MAX_GENERATORS: usize = 4;
const CAP: usize = 1 << MAX_GENERATORS;

#[derive(Clone, Copy, Debug)]
pub struct Jet {
    gens: u8,
    c: [f64; CAP],
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        let n = 1usize << self.gens.max(other.gens);
        self.c[..n] == other.c[..n]
    }
}

impl Default for Jet {
    fn default() -> Self {
        Jet::constant(0.0)
    }
}

impl From<f64> for Jet {
    fn from(v: f64) -> Self {
        Jet::constant(v)
    }
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; CAP];
        c[0] = v;
        Jet { gens: 0, c }
    }

    /// `value + ε_gen`, with `gen + 1` generators active.
    pub fn variable(value: f64, gen: usize) -> Self {
        assert!(gen < MAX_GENERATORS, "jet generator budget exhausted");
        let mut j = Jet::constant(value);
        j.gens = gen as u8 + 1;
        j.c[1 << gen] = 1.0;
        j
    }

    /// The generator `ε_gen` itself.
    pub fn epsilon(gen: usize) -> Self {
        Jet::variable(0.0, gen)
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.c[0]
    }

    #[inline]
    pub fn generators(&self) -> usize {
        self.gens as usize
    }

    #[inline]
    fn len(&self) -> usize {
        1 << self.gens
    }

    /// Coefficient of the monomial Π_{i ∈ mask} εᵢ.
    pub fn coeff(&self, mask: usize) -> f64 {
        if mask < self.len() {
            self.c[mask]
        } else {
            0.0
        }
    }

    /// Splits `self = a + ε_top · b` where `top = gens − 1`, returning `(a, b)`
    /// expressed in the remaining generators. A jet with fewer generators
    /// than `top + 1` has `b = 0`.
    pub fn split_top(&self, top: usize) -> (Jet, Jet) {
        let mut a = Jet::constant(0.0);
        let mut b = Jet::constant(0.0);
        a.gens = top as u8;
        b.gens = top as u8;
        let half = 1usize << top;
        for s in 0..half {
            a.c[s] = self.coeff(s);
            b.c[s] = self.coeff(s | half);
        }
        (a.trim(), b.trim())
    }

    /// The ε_top-derivative part only.
    pub fn derivative(&self, top: usize) -> Jet {
        self.split_top(top).1
    }

    fn trim(mut self) -> Jet {
        while self.gens > 0 {
            let half = 1usize << (self.gens - 1);
            if self.c[half..2 * half].iter().all(|&v| v == 0.0) {
                self.gens -= 1;
            } else {
                break;
            }
        }
        self
    }

    /// Applies a scalar function given its derivatives at the real part:
    /// `derivs[j] = f⁽ʲ⁾(value)`. Orders beyond the active generator count
    /// are ignored (the nilpotent part vanishes there).
    pub fn compose(&self, derivs: &[f64]) -> Jet {
        let k = self.generators();
        let mut out = Jet::constant(derivs[0]);
        out.gens = self.gens;
        if k == 0 {
            return out;
        }
        let mut nil = *self;
        nil.c[0] = 0.0;
        let mut power = nil;
        let mut fact = 1.0;
        for (j, &d) in derivs.iter().enumerate().skip(1).take(k) {
            fact *= j as f64;
            let w = d / fact;
            if w != 0.0 {
                for s in 1..self.len() {
                    out.c[s] += w * power.c[s];
                }
            }
            power *= nil;
        }
        out
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose(&[e; MAX_GENERATORS + 1])
    }

    pub fn ln(&self) -> Jet {
        let v = self.value();
        let mut d = [0.0; MAX_GENERATORS + 1];
        d[0] = v.ln();
        let mut p = 1.0 / v;
        for (j, slot) in d.iter_mut().enumerate().skip(1) {
            *slot = p;
            p *= -(j as f64) / v;
        }
        self.compose(&d)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose(&[s, c, -s, -c, s])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose(&[c, -s, -c, s, c])
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn powf(&self, p: f64) -> Jet {
        let v = self.value();
        let mut d = [0.0; MAX_GENERATORS + 1];
        let mut coef = 1.0;
        for (j, slot) in d.iter_mut().enumerate() {
            *slot = coef * v.powf(p - j as f64);
            coef *= p - j as f64;
        }
        self.compose(&d)
    }

    pub fn powi(&self, n: i32) -> Jet {
        if n == 0 {
            return Jet::constant(1.0);
        }
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut acc = *self;
        for _ in 1..n {
            acc *= *self;
        }
        acc
    }

    pub fn recip(&self) -> Jet {
        let v = self.value();
        let mut d = [0.0; MAX_GENERATORS + 1];
        let mut p = 1.0 / v;
        for (j, slot) in d.iter_mut().enumerate() {
            *slot = p;
            p *= -((j + 1) as f64) / v;
        }
        self.compose(&d)
    }

    pub fn ln_1p(&self) -> Jet {
        let v = 1.0 + self.value();
        let mut d = [0.0; MAX_GENERATORS + 1];
        d[0] = self.value().ln_1p();
        let mut p = 1.0 / v;
        for (j, slot) in d.iter_mut().enumerate().skip(1) {
            *slot = p;
            p *= -(j as f64) / v;
        }
        self.compose(&d)
    }

    pub fn tanh(&self) -> Jet {
        let t = self.value().tanh();
        let s = 1.0 - t * t;
        // Successive derivatives of tanh as polynomials in t.
        self.compose(&[t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0), s * (16.0 * t - 24.0 * t * t * t)])
    }

    pub fn square(&self) -> Jet {
        *self * *self
    }

    pub fn scale(&self, s: f64) -> Jet {
        let mut out = *self;
        for v in out.c[..self.len()].iter_mut() {
            *v *= s;
        }
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let (mut out, other) = if self.gens >= rhs.gens { (self, rhs) } else { (rhs, self) };
        for s in 0..other.len() {
            out.c[s] += other.c[s];
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        if rhs.gens == 0 {
            return self.scale(rhs.c[0]);
        }
        if self.gens == 0 {
            return rhs.scale(self.c[0]);
        }
        let gens = self.gens.max(rhs.gens);
        let n = 1usize << gens;
        let mut out = Jet::constant(0.0);
        out.gens = gens;
        for s in 0..n {
            // Enumerate submasks a of s, including s and 0.
            let mut acc = 0.0;
            let mut a = s;
            loop {
                acc += self.coeff(a) * rhs.coeff(s ^ a);
                if a == 0 {
                    break;
                }
                a = (a - 1) & s;
            }
            out.c[s] = acc;
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        if rhs.gens == 0 {
            return self.scale(1.0 / rhs.c[0]);
        }
        self * rhs.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.c[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self.scale(1.0 / rhs)
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        rhs + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        (-rhs) + self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs.scale(self)
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self = *self + rhs;
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        *self = *self - rhs;
    }
}

impl MulAssign for Jet {
    fn mul_assign(&mut self, rhs: Jet) {
        *self = *self * rhs;
    }
}

impl std::iter::Sum for Jet {
    fn sum<I: Iterator<Item = Jet>>(iter: I) -> Jet {
        iter.fold(Jet::constant(0.0), |a, b| a + b)
    }
}

/// Highest generator count among a set of jets; the next free generator index.
pub fn next_generator<'a>(jets: impl IntoIterator<Item = &'a Jet>) -> usize {
    jets.into_iter().map(Jet::generators).max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d1(f: impl Fn(Jet) -> Jet, x: f64) -> f64 {
        f(Jet::variable(x, 0)).coeff(1)
    }

    fn d2(f: impl Fn(Jet) -> Jet, x: f64) -> f64 {
        f(Jet::variable(x, 0) + Jet::epsilon(1)).coeff(3)
    }

    #[test]
    fn elementary_first_derivatives() {
        let x = 0.7;
        assert!((d1(|t| t.exp(), x) - x.exp()).abs() < 1e-14);
        assert!((d1(|t| t.ln(), x) - 1.0 / x).abs() < 1e-14);
        assert!((d1(|t| t.sin(), x) - x.cos()).abs() < 1e-14);
        assert!((d1(|t| t.cos(), x) + x.sin()).abs() < 1e-14);
        assert!((d1(|t| t.sqrt(), x) - 0.5 / x.sqrt()).abs() < 1e-14);
        assert!((d1(|t| t.recip(), x) + 1.0 / (x * x)).abs() < 1e-13);
        assert!((d1(|t| t.ln_1p(), x) - 1.0 / (1.0 + x)).abs() < 1e-14);
        assert!((d1(|t| t.tanh(), x) - (1.0 - x.tanh().powi(2))).abs() < 1e-14);
    }

    #[test]
    fn second_derivatives_of_compositions() {
        let x: f64 = 0.3;
        // d²/dx² exp(sin x) = exp(sin x)(cos² x − sin x)
        let exact = x.sin().exp() * (x.cos().powi(2) - x.sin());
        assert!((d2(|t| t.sin().exp(), x) - exact).abs() < 1e-13);
        // d²/dx² x³/(1+x²)
        let f = |t: Jet| t.powi(3) / (t.square() + 1.0);
        let h = 1e-4;
        let g = |v: f64| v.powi(3) / (1.0 + v * v);
        let fd = (g(x + h) - 2.0 * g(x) + g(x - h)) / (h * h);
        assert!((d2(f, x) - fd).abs() < 1e-6);
    }

    #[test]
    fn fourth_order_coefficients() {
        let x: f64 = 0.4;
        let seed = Jet::variable(x, 0) + Jet::epsilon(1) + Jet::epsilon(2) + Jet::epsilon(3);
        let t = x.tanh();
        let s = 1.0 - t * t;
        assert!((seed.tanh().coeff(15) - s * (16.0 * t - 24.0 * t.powi(3))).abs() < 1e-13);
        // d⁴/dx⁴ x⁻¹ = 24 x⁻⁵ and d⁴/dx⁴ ln x = −6 x⁻⁴.
        assert!((seed.recip().coeff(15) - 24.0 / x.powi(5)).abs() < 1e-9);
        assert!((seed.ln().coeff(15) + 6.0 / x.powi(4)).abs() < 1e-10);
        assert!((seed.cos().coeff(15) - x.cos()).abs() < 1e-14);
    }

    #[test]
    fn split_top_recovers_outer_jet() {
        // f(x) = x², seeded with outer generator 0 and inner generator 1:
        // derivative along ε₁ is 2x as a jet in ε₀, i.e. 2·(x + ε₀).
        let x = Jet::variable(1.5, 0) + Jet::epsilon(1);
        let (val, der) = (x * x).split_top(1);
        assert_eq!(der.value(), 3.0);
        assert_eq!(der.coeff(1), 2.0);
        assert_eq!(val.value(), 2.25);
        assert_eq!(val.coeff(1), 3.0);
    }

    #[test]
    fn constants_carry_no_generators() {
        let c = Jet::constant(2.0);
        assert_eq!(c.generators(), 0);
        assert_eq!((c * c).value(), 4.0);
        let v = Jet::variable(1.0, 2);
        assert_eq!(v.generators(), 3);
        assert_eq!(next_generator([&c, &v]), 3);
    }
}
