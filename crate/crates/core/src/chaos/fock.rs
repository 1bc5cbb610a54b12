//! Symmetric Fock space over L²(σ̃) on finite chaos vectors.

use std::collections::HashMap;

use crate::calculus::TestFunction;
use crate::error::{Error, Result};
use crate::quadrature::Tolerance;
use crate::sampling::IntensityModel;

/// Σ c · ψ₁ ⊗̂ … ⊗̂ ψ_n, homogeneous of degree n.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricTensor {
    degree: usize,
    terms: Vec<(f64, Vec<TestFunction>)>,
}

impl SymmetricTensor {
    pub fn vacuum(c: f64) -> Self {
        SymmetricTensor { degree: 0, terms: vec![(c, Vec::new())] }
    }

    pub fn zero(degree: usize) -> Self {
        SymmetricTensor { degree, terms: Vec::new() }
    }

    /// φ^{⊗n}.
    pub fn power(phi: &TestFunction, n: usize) -> Self {
        SymmetricTensor { degree: n, terms: vec![(1.0, vec![phi.clone(); n])] }
    }

    pub fn elementary(c: f64, factors: Vec<TestFunction>) -> Self {
        SymmetricTensor { degree: factors.len(), terms: vec![(c, factors)] }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> &[(f64, Vec<TestFunction>)] {
        &self.terms
    }

    pub fn plus(&self, other: &SymmetricTensor) -> Result<Self> {
        if self.degree != other.degree {
            return Err(Error::Usage(format!("cannot add tensors of degree {} and {}", self.degree, other.degree)));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(SymmetricTensor { degree: self.degree, terms })
    }

    pub fn scaled(&self, s: f64) -> Self {
        SymmetricTensor { degree: self.degree, terms: self.terms.iter().map(|(c, f)| (c * s, f.clone())).collect() }
    }

    /// φ ⊗̂ T.
    pub fn prepend(&self, phi: &TestFunction) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(c, f)| {
                let mut g = vec![phi.clone()];
                g.extend(f.iter().cloned());
                (*c, g)
            })
            .collect();
        SymmetricTensor { degree: self.degree + 1, terms }
    }
}

/// Finite chaos vector (f⁽⁰⁾, f⁽¹⁾, …).
#[derive(Clone, Debug, PartialEq)]
pub struct ChaosVector {
    pub components: Vec<SymmetricTensor>,
}

impl ChaosVector {
    pub fn vacuum() -> Self {
        ChaosVector { components: vec![SymmetricTensor::vacuum(1.0)] }
    }

    /// Truncation of Exp φ = (1, φ, φ^{⊗2}/2!, …) to degrees ≤ n.
    pub fn exponential(phi: &TestFunction, n: usize) -> Self {
        let mut fact = 1.0;
        let components = (0..=n)
            .map(|k| {
                if k > 0 {
                    fact *= k as f64;
                }
                SymmetricTensor::power(phi, k).scaled(1.0 / fact)
            })
            .collect();
        ChaosVector { components }
    }

    pub fn single(t: SymmetricTensor) -> Self {
        let n = t.degree();
        let mut components: Vec<SymmetricTensor> = (0..n).map(SymmetricTensor::zero).collect();
        components.push(t);
        ChaosVector { components }
    }

    /// a⁺(φ): f⁽ⁿ⁾ ↦ φ ⊗̂ f⁽ⁿ⁾ in degree n + 1.
    pub fn creation(&self, phi: &TestFunction) -> Self {
        let mut components = vec![SymmetricTensor::zero(0)];
        components.extend(self.components.iter().map(|t| t.prepend(phi)));
        ChaosVector { components }
    }
}

/// Memoized Gram entries (φ, ψ)_{L²(σ̃)}.
pub struct FockSpace<'a> {
    model: &'a IntensityModel,
    tol: Tolerance,
    gram: HashMap<(String, String), f64>,
}

fn permanent(m: &[Vec<f64>]) -> f64 {
    // Ryser's formula
    let n = m.len();
    if n == 0 {
        return 1.0;
    }
    let mut total = 0.0;
    for set in 1u32..(1 << n) {
        let mut prod = 1.0;
        for row in m {
            prod *= (0..n).filter(|j| set & (1 << j) != 0).map(|j| row[j]).sum::<f64>();
        }
        let sign = if (n - set.count_ones() as usize).is_multiple_of(2) { 1.0 } else { -1.0 };
        total += sign * prod;
    }
    total
}

impl<'a> FockSpace<'a> {
    pub fn new(model: &'a IntensityModel, tol: Tolerance) -> Self {
        FockSpace { model, tol, gram: HashMap::new() }
    }

    /// (φ, ψ)_{L²(σ̃)}.
    pub fn l2(&mut self, phi: &TestFunction, psi: &TestFunction) -> Result<f64> {
        let (a, b) = (format!("{phi:?}"), format!("{psi:?}"));
        let key = if a <= b { (a, b) } else { (b, a) };
        if let Some(v) = self.gram.get(&key) {
            return Ok(*v);
        }
        let support = phi.support().intersect(psi.support());
        let v = if support == crate::calculus::Support::Empty {
            0.0
        } else {
            self.model.integrate(|x, m| phi.value(x, m) * psi.value(x, m), support.window(), self.tol)?
        };
        self.gram.insert(key, v);
        Ok(v)
    }

    /// ⟨S, T⟩ on the n-th symmetric power, with ⟨⊗̂φᵢ, ⊗̂ψⱼ⟩ = perm(φᵢ, ψⱼ)/n!.
    pub fn tensor_inner(&mut self, s: &SymmetricTensor, t: &SymmetricTensor) -> Result<f64> {
        if s.degree() != t.degree() {
            return Ok(0.0);
        }
        let n = s.degree();
        let fact: f64 = (1..=n).map(|i| i as f64).product();
        let mut total = 0.0;
        for (a, fs) in s.terms() {
            for (b, gs) in t.terms() {
                let mut m = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in 0..n {
                        m[i][j] = self.l2(&fs[i], &gs[j])?;
                    }
                }
                total += a * b * permanent(&m) / fact;
            }
        }
        Ok(total)
    }

    /// ⟨F, G⟩_Fock = Σ_n n!·⟨f⁽ⁿ⁾, g⁽ⁿ⁾⟩.
    pub fn fock_inner(&mut self, f: &ChaosVector, g: &ChaosVector) -> Result<f64> {
        let mut total = 0.0;
        let mut fact = 1.0;
        for (n, (s, t)) in f.components.iter().zip(&g.components).enumerate() {
            if n > 0 {
                fact *= n as f64;
            }
            total += fact * self.tensor_inner(s, t)?;
        }
        Ok(total)
    }

    /// a⁻(φ) on the Fock side: ⊗̂ψᵢ ↦ Σᵢ (φ, ψᵢ) ⊗̂_{j≠i} ψⱼ.
    pub fn annihilation(&mut self, phi: &TestFunction, f: &ChaosVector) -> Result<ChaosVector> {
        let mut components = Vec::new();
        for t in f.components.iter().skip(1) {
            let mut terms = Vec::new();
            for (c, fs) in t.terms() {
                for i in 0..fs.len() {
                    let w = self.l2(phi, &fs[i])?;
                    let rest: Vec<TestFunction> =
                        fs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, g)| g.clone()).collect();
                    terms.push((c * w, rest));
                }
            }
            components.push(SymmetricTensor { degree: t.degree() - 1, terms });
        }
        if components.is_empty() {
            components.push(SymmetricTensor::zero(0));
        }
        Ok(ChaosVector { components })
    }
}
