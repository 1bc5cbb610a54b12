use std::f64::consts::TAU;

use markcfg_core::calculus::TestFunction;
use markcfg_core::chaos::{
    expvec_pairing_mc, poisson_exponential_with_mean, semigroup_mc_check, sigma_mean, CharlierPlan, EigenExpansion,
    FockSpace, HeatKernelModel, SymmetricTensor, DEFAULT_MAX_DEGREE,
};
use markcfg_core::configuration::MarkedConfiguration;
use markcfg_core::mark_space::MarkSpace;
use markcfg_core::sampling::mc_estimate_many;
use num_complex::Complex64;

use super::{Ctx, INNER_TOL};
use crate::error::{Context, HarnessError, Result};
use crate::report::CheckRecord;

const CONTOUR_NODES: usize = 128;

/// n!·[sⁿ] e(sφ; ω) by the trapezoidal rule on the circle |s| = r, with r
/// small enough that |sφ(x)| and |s⟨φ⟩| stay below ½.
fn contour_coefficient(values: &[f64], mean: f64, n: usize) -> f64 {
    let big = values.iter().fold(mean.abs().max(0.5), |a, v| a.max(v.abs()));
    let r = 0.5 / big;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..CONTOUR_NODES {
        let zeta = Complex64::from_polar(1.0, TAU * j as f64 / CONTOUR_NODES as f64);
        let s = zeta * r;
        let log_e: Complex64 = values.iter().map(|v| (1.0 + s * *v).ln()).sum::<Complex64>() - s * mean;
        acc += log_e.exp() * zeta.powi(-(n as i32));
    }
    let fact: f64 = (1..=n).map(|i| i as f64).product();
    fact * acc.re / (CONTOUR_NODES as f64 * r.powi(n as i32))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn power_plans(phi: &TestFunction, ctx: &Ctx<'_>, degree: usize) -> Result<Vec<CharlierPlan>> {
    (0..=degree)
        .map(|n| {
            CharlierPlan::compile(&SymmetricTensor::power(phi, n), &ctx.model, INNER_TOL, DEFAULT_MAX_DEGREE)
                .check(&format!("Charlier plan of degree {n}"))
        })
        .collect()
}

pub fn charlier_orthogonality(ctx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    let top = ctx.params().max_degree;
    if top > DEFAULT_MAX_DEGREE || ctx.params().generating_degree > DEFAULT_MAX_DEGREE {
        return Err(HarnessError::Config(format!("chaos degrees are limited to {DEFAULT_MAX_DEGREE}")));
    }
    let mut probes = ctx.probes(0);
    let (phi, psi) = probes.test_function_pair(0.8);
    let ip = FockSpace::new(&ctx.model, INNER_TOL).l2(&phi, &psi).check("(φ, ψ)")?;
    let (pp, qp) = (power_plans(&phi, ctx, top)?, power_plans(&psi, ctx, top)?);
    let target = |n: usize, m: usize| if n == m { factorial(n) * ip.powi(n as i32) } else { 0.0 };

    let mut table: Vec<(usize, usize)> = (0..=top).flat_map(|n| (n..=top).map(move |m| (n, m))).collect();
    table.retain(|&p| p != (top, top));
    let table_fn = |pairs: &[(usize, usize)], w: &MarkedConfiguration| {
        let a: Vec<f64> = pp.iter().map(|p| p.eval(w)).collect();
        let b: Vec<f64> = qp.iter().map(|p| p.eval(w)).collect();
        pairs.iter().map(|&(n, m)| a[n] * b[m]).collect::<Vec<f64>>()
    };
    let est = mc_estimate_many(&ctx.measure(), ctx.n(), ctx.seed(), table.len(), |w| Ok(table_fn(&table, w)))
        .check("charlier-orthogonality")?;
    let mut records: Vec<CheckRecord> =
        table.iter().zip(est).map(|(&(n, m), e)| ctx.mc(format!("E[Q{n} Q{m}]"), e, target(n, m))).collect();
    let top_n = ctx.params().top_samples.unwrap_or(10 * ctx.n());
    let diag = [(top, top)];
    let est = mc_estimate_many(&ctx.measure(), top_n, ctx.seed(), 1, |w| Ok(table_fn(&diag, w)))
        .check("charlier-orthogonality")?;
    records.push(ctx.mc(format!("E[Q{top} Q{top}]"), est[0], target(top, top)));

    let degree = ctx.params().generating_degree;
    let mean = sigma_mean(&phi, &ctx.model, INNER_TOL).check("⟨φ⟩")?;
    let gen_plans = power_plans(&phi, ctx, degree)?;
    let omegas = ctx.pointwise_samples(ctx.params().points.min(20), "generating function")?;
    let mut worst = 0.0f64;
    for w in &omegas {
        let values: Vec<f64> = w.iter().map(|(x, m)| phi.value(x, m)).collect();
        for (n, plan) in gen_plans.iter().enumerate() {
            worst = worst.max(ctx.rel_err(plan.eval(w), contour_coefficient(&values, mean, n)));
        }
    }
    records.push(CheckRecord::relative(
        format!("generating function, degrees ≤ {degree} at {} configurations", omegas.len()),
        worst,
        ctx.tol().relative,
    ));

    if ctx.model.total_mass() == 2.0 {
        let q2 = CharlierPlan::compile(&SymmetricTensor::power(&TestFunction::Const(1.0), 2), &ctx.model, INNER_TOL, 2)
            .check("hand value")?
            .eval(&ctx.three_points()?);
        records.push(CheckRecord::exact("Q2(1⊗1) at three points", q2, -2.0));
    }
    Ok(records)
}

fn eigen(triples: &Option<Vec<(u32, i32, f64)>>) -> EigenExpansion {
    EigenExpansion { terms: triples.clone().unwrap_or_else(|| vec![(1, 1, 0.1)]) }
}

pub fn expvec_pairing(ctx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    let mut probes = ctx.probes(0);
    let pairs: Vec<(TestFunction, TestFunction)> =
        (0..ctx.probe_count(10)).map(|_| probes.test_function_pair(0.9)).collect();
    let mut fock = FockSpace::new(&ctx.model, INNER_TOL);
    let mut prepared = Vec::new();
    for (j, (phi, psi)) in pairs.iter().enumerate() {
        let name = format!("pair {j}");
        let target = fock.l2(phi, psi).check(&name)?.exp();
        let ma = sigma_mean(phi, &ctx.model, INNER_TOL).check(&name)?;
        let mb = sigma_mean(psi, &ctx.model, INNER_TOL).check(&name)?;
        prepared.push((target, ma, mb));
    }
    let est = mc_estimate_many(&ctx.measure(), ctx.n(), ctx.seed(), 2 * pairs.len(), |w| {
        let mut out = Vec::with_capacity(2 * pairs.len());
        for ((phi, psi), (_, ma, mb)) in pairs.iter().zip(&prepared) {
            let a = poisson_exponential_with_mean(phi, *ma, w)?;
            out.push(a * poisson_exponential_with_mean(psi, *mb, w)?);
            out.push(a);
        }
        Ok(out)
    })
    .check("expvec-pairing")?;
    let mut records = Vec::new();
    for (j, (t, _, _)) in prepared.iter().enumerate() {
        records.push(ctx.mc(format!("pair {j}: E[e(φ)e(ψ)]"), est[2 * j], *t));
        records.push(ctx.mc(format!("pair {j}: E[e(φ)]"), est[2 * j + 1], 1.0));
    }
    if ctx.params().phi.is_some() || ctx.params().psi.is_some() {
        if ctx.model.space() != MarkSpace::Circle {
            return Err(HarnessError::Config("eigen-expansion test functions need circle marks".into()));
        }
        let (phi, psi) = (eigen(&ctx.params().phi).test_function(), eigen(&ctx.params().psi).test_function());
        let check = expvec_pairing_mc(&phi, &psi, &ctx.model, ctx.n(), ctx.seed(), INNER_TOL).check("eigen pair")?;
        records.push(ctx.mc("eigen pair: E[e(φ)e(ψ)]", check.estimate, check.target));
    }
    Ok(records)
}

pub fn semigroup(ctx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    let heat = HeatKernelModel::new(ctx.model.clone()).check("semigroup scenario")?;
    let (phi, psi) = (eigen(&ctx.params().phi), eigen(&ctx.params().psi));
    let free_mode = phi.terms.iter().map(|t| t.1.unsigned_abs()).max().unwrap_or(0) as i32 + 1;
    let orth = EigenExpansion { terms: psi.terms.iter().map(|&(n, _, c)| (n, free_mode, c)).collect() };
    let mut records = Vec::new();
    for &t in &ctx.params().times {
        let check = semigroup_mc_check(t, &phi, &psi, &heat, ctx.n(), ctx.seed(), INNER_TOL).check("semigroup")?;
        records.push(ctx.mc(format!("t = {t}"), check.estimate, check.target));
        if t == 0.0 {
            let direct = expvec_pairing_mc(&phi.test_function(), &psi.test_function(), &ctx.model, ctx.n(), ctx.seed(), INNER_TOL)
                .check("exponential pairing")?;
            records.push(CheckRecord::exact("t = 0 estimate equals the exponential pairing", check.estimate.mean, direct.estimate.mean));
            records.push(CheckRecord::exact(
                "t = 0 standard error equals the exponential pairing",
                check.estimate.std_error,
                direct.estimate.std_error,
            ));
        }
        let o = semigroup_mc_check(t, &phi, &orth, &heat, ctx.n(), ctx.seed(), INNER_TOL).check("semigroup")?;
        records.push(ctx.mc(format!("t = {t}, orthogonal pair"), o.estimate, o.target));
        records.push(CheckRecord::quadrature(format!("t = {t}, orthogonal pair target"), o.target, 1.0, 1e-12, INNER_TOL.abs));
    }
    Ok(records)
}
