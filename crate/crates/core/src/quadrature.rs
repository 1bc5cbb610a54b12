//! Adaptive Gauss–Kronrod (7/15) quadrature and nested product rules.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances for one adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::new(1e-10, 1e-10)
    }
}

const MAX_SUBDIVISIONS: usize = 2000;

fn kronrod_segment<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let est = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (est, err)
}

const MAX_PERIODIC_NODES: usize = 4096;

/// Error estimates below this multiple of ε·∫|f| are rounding noise.
const ROUNDING_FLOOR: f64 = 50.0 * f64::EPSILON;

/// Integrates `f` over `[a, b]` by global adaptive bisection.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature(format!("non-finite interval [{a}, {b}]")));
    }
    let (sign, lo, hi) = if a < b { (1.0, a, b) } else { (-1.0, b, a) };
    let (v, e) = kronrod_segment(&mut f, lo, hi);
    if !(v.is_finite() && e.is_finite()) {
        return Err(Error::Quadrature(format!("non-finite integrand on [{lo}, {hi}]")));
    }
    let mut segments = vec![(lo, hi, v, e)];
    let mut total = v;
    let mut total_err = e;
    let mut iterations = 0;
    let mut mag = v.abs();
    while total_err > tol.abs.max(tol.rel * total.abs()).max(ROUNDING_FLOOR * mag) {
        iterations += 1;
        if iterations > MAX_SUBDIVISIONS {
            return Err(Error::Quadrature(format!(
                "no convergence on [{lo}, {hi}]: estimate {total:e}, error {total_err:e}"
            )));
        }
        let (idx, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (sa, sb, sv, se) = segments.swap_remove(idx);
        let mid = 0.5 * (sa + sb);
        let (v1, e1) = kronrod_segment(&mut f, sa, mid);
        let (v2, e2) = kronrod_segment(&mut f, mid, sb);
        if !(v1.is_finite() && v2.is_finite() && e1.is_finite() && e2.is_finite()) {
            return Err(Error::Quadrature(format!("non-finite integrand near [{sa}, {sb}]")));
        }
        total += v1 + v2 - sv;
        mag += v1.abs() + v2.abs() - sv.abs();
        total_err += e1 + e2 - se;
        segments.push((sa, mid, v1, e1));
        segments.push((mid, sb, v2, e2));
        if (mid - sa).abs() < 1e-15 * (hi - lo).abs() {
            return Err(Error::Quadrature(format!("interval collapsed near {mid}")));
        }
    }
    // Recompute the sum to shed accumulated update rounding.
    let sum: f64 = segments.iter().map(|s| s.2).sum();
    Ok(sign * sum)
}

/// Integrates a `period`-periodic `f` over one period by trapezoidal sums
/// with doubling, which converge geometrically for smooth periodic integrands.
/// The stopping rule assumes smoothness; discontinuous integrands belong in [`integrate`].
/// Falls back to [`integrate`] when doubling stalls.
pub fn integrate_periodic<F: FnMut(f64) -> f64>(mut f: F, start: f64, period: f64, tol: Tolerance) -> Result<f64> {
    let mut n = 8usize;
    let mut sum = 0.0;
    let mut mag = 0.0;
    for j in 0..n {
        let v = f(start + period * j as f64 / n as f64);
        sum += v;
        mag += v.abs();
    }
    let mut prev = sum * period / n as f64;
    if !prev.is_finite() {
        return Err(Error::Quadrature(format!("non-finite periodic integrand near {start}")));
    }
    while n < MAX_PERIODIC_NODES {
        for j in 0..n {
            let v = f(start + period * (j as f64 + 0.5) / n as f64);
            sum += v;
            mag += v.abs();
        }
        n *= 2;
        let cur = sum * period / n as f64;
        if !cur.is_finite() {
            return Err(Error::Quadrature(format!("non-finite periodic integrand near {start}")));
        }
        let floor = ROUNDING_FLOOR * mag * period / n as f64;
        if (cur - prev).abs() <= tol.abs.max(tol.rel * cur.abs()).max(floor) {
            return Ok(cur);
        }
        prev = cur;
    }
    integrate(f, start, start + period, tol)
}

/// Nested adaptive integration over an axis-aligned box.
pub fn integrate_box<F>(f: &F, lo: &[f64], hi: &[f64], tol: Tolerance) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut x = vec![0.0; lo.len()];
    nested(f, lo, hi, &mut x, 0, tol)
}

fn nested<F>(f: &F, lo: &[f64], hi: &[f64], x: &mut Vec<f64>, axis: usize, tol: Tolerance) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if axis == lo.len() {
        return f(x);
    }
    // Inner integrals are resolved more tightly so their error does not
    // masquerade as integrand roughness for the outer rule.
    let inner_tol = Tolerance::new(tol.abs * 1e-2, tol.rel * 1e-2);
    let mut failure = None;
    let value = integrate(
        |t| {
            if failure.is_some() {
                return 0.0;
            }
            let mut xx = x.clone();
            xx[axis] = t;
            match nested(f, lo, hi, &mut xx, axis + 1, inner_tol) {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        lo[axis],
        hi[axis],
        tol,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(value),
    }
}
