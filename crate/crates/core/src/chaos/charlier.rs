//! Charlier polynomials Q_n on the marked Poisson space.
//!
//! The diagonal recursion is unrolled once per tensor into a small expression
//! graph whose leaves are pairings ⟨f^α, ω⟩ of monomials in the atoms of the
//! tensor. Mixed terms φ^{⊗(n−1)} ⊗̂ ψ are the t-derivative of Q_n((φ+tψ)^{⊗n})
//! at t = 0, read off from a symmetric set of polynomial nodes.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::base_space::Point;
use crate::configuration::MarkedConfiguration;
use crate::error::{Error, Result};
use crate::mark_space::MarkPoint;
use crate::quadrature::Tolerance;
use crate::sampling::IntensityModel;

use super::fock::SymmetricTensor;
use crate::calculus::{Support, TestFunction};

/// Degree bound for Charlier evaluation.
pub const DEFAULT_MAX_DEGREE: usize = 6;

type Monomial = Vec<u16>;

/// Polynomial in the atoms with no constant term.
#[derive(Clone, Debug, PartialEq)]
struct Poly(BTreeMap<Monomial, f64>);

impl Poly {
    fn atom(i: usize, n_atoms: usize, c: f64) -> Poly {
        let mut e = vec![0u16; n_atoms];
        e[i] = 1;
        Poly(BTreeMap::from([(e, c)]))
    }

    fn key(&self) -> Vec<(Monomial, u64)> {
        self.0.iter().map(|(m, c)| (m.clone(), c.to_bits())).collect()
    }

    fn add_scaled(&self, other: &Poly, s: f64) -> Poly {
        let mut out = self.0.clone();
        for (m, c) in &other.0 {
            *out.entry(m.clone()).or_insert(0.0) += s * c;
        }
        out.retain(|_, c| *c != 0.0);
        Poly(out)
    }

    fn square(&self) -> Poly {
        let mut out: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (a, ca) in &self.0 {
            for (b, cb) in &self.0 {
                let m: Monomial = a.iter().zip(b).map(|(x, y)| x + y).collect();
                *out.entry(m).or_insert(0.0) += ca * cb;
            }
        }
        out.retain(|_, c| *c != 0.0);
        Poly(out)
    }
}

#[derive(Clone, Debug)]
enum Node {
    Const(f64),
    /// c + Σ w·⟨f^α, ω⟩.
    Affine { terms: Vec<(usize, f64)>, offset: f64 },
    /// Σ coef · Π children.
    Combo(Vec<(f64, Vec<usize>)>),
}

/// Weights w_j with p′(0) = Σ w_j p(t_j) for every polynomial of degree ≤ k,
/// on symmetric nodes t_j = h·(j − c).
fn derivative_stencil(k: usize, h: f64) -> Vec<(f64, f64)> {
    let n = if k.is_multiple_of(2) { k + 1 } else { k + 2 };
    let c = (n - 1) as f64 / 2.0;
    let t: Vec<f64> = (0..n).map(|j| h * (j as f64 - c)).collect();
    (0..n)
        .filter_map(|j| {
            let mut w = 0.0;
            for m in (0..n).filter(|&m| m != j) {
                let mut term = 1.0 / (t[j] - t[m]);
                for l in (0..n).filter(|&l| l != j && l != m) {
                    term *= -t[l] / (t[j] - t[l]);
                }
                w += term;
            }
            (w.abs() > 1e-14 / h).then_some((t[j], w))
        })
        .collect()
}

/// Compiled evaluator for Q_n(T; ·) of a fixed symmetric tensor T.
#[derive(Clone, Debug)]
pub struct CharlierPlan {
    degree: usize,
    atoms: Vec<TestFunction>,
    supports: Vec<Support>,
    monomials: Vec<Monomial>,
    nodes: Vec<Node>,
    root: usize,
}

struct Builder<'a> {
    model: &'a IntensityModel,
    tol: Tolerance,
    atoms: Vec<TestFunction>,
    supports: Vec<Support>,
    scales: Vec<f64>,
    monomials: Vec<Monomial>,
    monomial_index: HashMap<Monomial, usize>,
    moments: HashMap<Monomial, f64>,
    nodes: Vec<Node>,
    diag: HashMap<(usize, Vec<(Monomial, u64)>), usize>,
    affine: HashMap<Vec<(Monomial, u64)>, usize>,
}

impl<'a> Builder<'a> {
    fn push(&mut self, node: Node) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    fn moment(&mut self, m: &Monomial) -> Result<f64> {
        if let Some(v) = self.moments.get(m) {
            return Ok(*v);
        }
        let used: Vec<(usize, u16)> = m.iter().enumerate().filter(|(_, e)| **e > 0).map(|(i, e)| (i, *e)).collect();
        let consts: Option<f64> = used
            .iter()
            .map(|&(i, e)| match self.atoms[i] {
                TestFunction::Const(c) => Some(c.powi(e as i32)),
                _ => None,
            })
            .product();
        let value = if let Some(c) = consts {
            c * self.model.total_mass()
        } else {
            let support = used.iter().fold(Support::Everywhere, |s, &(i, _)| s.intersect(self.supports[i].clone()));
            if support == Support::Empty {
                0.0
            } else {
                let atoms = &self.atoms;
                self.model.integrate(
                    |x, mk| used.iter().map(|&(i, e)| atoms[i].value(x, mk).powi(e as i32)).product(),
                    support.window(),
                    self.tol,
                )?
            }
        };
        self.moments.insert(m.clone(), value);
        Ok(value)
    }

    fn monomial(&mut self, m: &Monomial) -> usize {
        if let Some(&i) = self.monomial_index.get(m) {
            return i;
        }
        self.monomials.push(m.clone());
        self.monomial_index.insert(m.clone(), self.monomials.len() - 1);
        self.monomials.len() - 1
    }

    fn mean(&mut self, p: &Poly) -> Result<f64> {
        let mut total = 0.0;
        for (m, c) in &p.0 {
            total += c * self.moment(m)?;
        }
        Ok(total)
    }

    /// Node for Q₁(P) = ⟨P, ω⟩ − ⟨P⟩_σ̃.
    fn centered(&mut self, p: &Poly) -> Result<usize> {
        let key = p.key();
        if let Some(&i) = self.affine.get(&key) {
            return Ok(i);
        }
        let offset = -self.mean(p)?;
        let terms = p.0.iter().map(|(m, c)| (self.monomial(m), *c)).collect();
        let id = self.push(Node::Affine { terms, offset });
        self.affine.insert(key, id);
        Ok(id)
    }

    /// Rough size of P under σ̃, used to keep polarization nodes well scaled.
    fn scale(&self, p: &Poly) -> f64 {
        p.0.iter()
            .map(|(m, c)| c.abs() * m.iter().zip(&self.scales).map(|(e, s)| s.powi(*e as i32)).product::<f64>())
            .sum::<f64>()
            .max(1e-300)
    }

    /// Node for Q_k(P^{⊗k}).
    fn diagonal(&mut self, k: usize, p: &Poly) -> Result<usize> {
        if k == 0 || p.0.is_empty() {
            let v = if k == 0 { 1.0 } else { 0.0 };
            return Ok(self.push(Node::Const(v)));
        }
        if k == 1 {
            return self.centered(p);
        }
        let key = (k, p.key());
        if let Some(&i) = self.diag.get(&key) {
            return Ok(i);
        }
        // Q_k = Q_{k−1}(P)·Q₁(P) − (k−1)·Q_{k−1}(P^{⊗(k−2)} ⊗̂ P²) − (k−1)·⟨P²⟩·Q_{k−2}(P)
        let n = k - 1;
        let sq = p.square();
        let prev = self.diagonal(n, p)?;
        let lin = self.centered(p)?;
        let mixed = self.mixed(n, p, &sq)?;
        let prev2 = self.diagonal(n - 1, p)?;
        let m2 = self.mean(&sq)?;
        let nf = n as f64;
        let id = self.push(Node::Combo(vec![(1.0, vec![prev, lin]), (-nf, vec![mixed]), (-nf * m2, vec![prev2])]));
        self.diag.insert(key, id);
        Ok(id)
    }

    /// Node for Q_n(P^{⊗(n−1)} ⊗̂ R) = (1/n)·d/dt Q_n((P + tR)^{⊗n}) at t = 0.
    fn mixed(&mut self, n: usize, p: &Poly, r: &Poly) -> Result<usize> {
        if n == 1 {
            return self.centered(r);
        }
        let h = 0.5 * self.scale(p) / (n as f64 * self.scale(r));
        let mut terms = Vec::new();
        for (t, w) in derivative_stencil(n, h) {
            let shifted = p.add_scaled(r, t);
            terms.push((w / n as f64, vec![self.diagonal(n, &shifted)?]));
        }
        Ok(self.push(Node::Combo(terms)))
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

impl CharlierPlan {
    /// Compiles Q_n(T; ·); all σ̃-moments are computed here by quadrature.
    pub fn compile(tensor: &SymmetricTensor, model: &IntensityModel, tol: Tolerance, max_degree: usize) -> Result<Self> {
        let n = tensor.degree();
        if n > max_degree {
            return Err(Error::Usage(format!("Charlier degree {n} exceeds the configured maximum {max_degree}")));
        }
        let mut atoms: Vec<TestFunction> = Vec::new();
        let mut elementary = Vec::new();
        for (c, factors) in tensor.terms() {
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for f in factors {
                let i = match atoms.iter().position(|a| a == f) {
                    Some(i) => i,
                    None => {
                        atoms.push(f.clone());
                        atoms.len() - 1
                    }
                };
                *counts.entry(i).or_insert(0) += 1;
            }
            elementary.push((*c, counts));
        }
        let supports: Vec<Support> = atoms.iter().map(TestFunction::support).collect();
        let mut b = Builder {
            model,
            tol,
            atoms,
            supports,
            scales: Vec::new(),
            monomials: Vec::new(),
            monomial_index: HashMap::new(),
            moments: HashMap::new(),
            nodes: Vec::new(),
            diag: HashMap::new(),
            affine: HashMap::new(),
        };
        let k = b.atoms.len();
        let mass = model.total_mass().max(1e-300);
        for i in 0..k {
            let mut e = vec![0u16; k];
            e[i] = 2;
            let rms = (b.moment(&e)? / mass).sqrt();
            b.scales.push(if rms > 0.0 { rms } else { 1.0 });
        }
        let mut root_terms = Vec::new();
        for (c, counts) in elementary {
            if c == 0.0 {
                continue;
            }
            let entries: Vec<(usize, usize)> = counts.into_iter().collect();
            if entries.len() == 1 {
                let p = Poly::atom(entries[0].0, k, 1.0);
                root_terms.push((c, vec![b.diagonal(n, &p)?]));
                continue;
            }
            // Q_n(⊗̂ᵢ ψᵢ^{⊗mᵢ}) = (1/n!) Σ_a Πᵢ C(mᵢ,aᵢ) (−1)^{n−|a|} Q_n((Σ aᵢψᵢ)^{⊗n})
            let mut a = vec![0usize; entries.len()];
            loop {
                let total: usize = a.iter().sum();
                if total > 0 {
                    let weight: f64 = entries.iter().zip(&a).map(|(&(_, m), &ai)| binomial(m, ai)).product::<f64>()
                        * if (n - total).is_multiple_of(2) { 1.0 } else { -1.0 }
                        / factorial(n);
                    let p = entries
                        .iter()
                        .zip(&a)
                        .filter(|(_, &ai)| ai > 0)
                        .fold(Poly(BTreeMap::new()), |acc, (&(i, _), &ai)| acc.add_scaled(&Poly::atom(i, k, 1.0), ai as f64));
                    root_terms.push((c * weight, vec![b.diagonal(n, &p)?]));
                }
                let mut j = 0;
                while j < a.len() && a[j] == entries[j].1 {
                    a[j] = 0;
                    j += 1;
                }
                if j == a.len() {
                    break;
                }
                a[j] += 1;
            }
        }
        let root = if root_terms.is_empty() {
            b.push(Node::Const(if n == 0 { 1.0 } else { 0.0 }))
        } else {
            b.push(Node::Combo(root_terms))
        };
        if n == 0 {
            let scale: f64 = tensor.terms().iter().map(|(c, _)| c).sum();
            b.nodes[root] = Node::Const(scale);
        }
        Ok(CharlierPlan { degree: n, atoms: b.atoms, supports: b.supports, monomials: b.monomials, nodes: b.nodes, root })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Q_n(T; ω).
    pub fn eval(&self, omega: &MarkedConfiguration) -> f64 {
        let mut pair = vec![0.0; self.monomials.len()];
        let mut values = vec![0.0; self.atoms.len()];
        for (x, m) in omega.iter() {
            self.atom_values(x, m, &mut values);
            for (slot, mono) in pair.iter_mut().zip(&self.monomials) {
                *slot += mono.iter().zip(&values).map(|(e, v)| v.powi(*e as i32)).product::<f64>();
            }
        }
        let mut out = vec![0.0; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            out[i] = match node {
                Node::Const(c) => *c,
                Node::Affine { terms, offset } => offset + terms.iter().map(|(j, w)| w * pair[*j]).sum::<f64>(),
                Node::Combo(terms) => terms.iter().map(|(c, ids)| c * ids.iter().map(|j| out[*j]).product::<f64>()).sum(),
            };
        }
        out[self.root]
    }

    fn atom_values(&self, x: &Point, m: &MarkPoint, values: &mut [f64]) {
        for ((v, a), s) in values.iter_mut().zip(&self.atoms).zip(&self.supports) {
            *v = if s.excludes(x) { 0.0 } else { a.value(x, m) };
        }
    }
}

/// Q_n(T; ω) with the default degree bound.
pub fn charlier(tensor: &SymmetricTensor, omega: &MarkedConfiguration, model: &Arc<IntensityModel>) -> Result<f64> {
    Ok(CharlierPlan::compile(tensor, model, Tolerance::default(), DEFAULT_MAX_DEGREE)?.eval(omega))
}
