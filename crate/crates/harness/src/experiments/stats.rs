use std::fs::File;
use std::io::BufWriter;

use markcfg_core::calculus::{CylinderFunction, TestFunction};
use markcfg_core::group_action::GroupElement;
use markcfg_core::sampling::{mc_estimate_many, sample_rng};
use statrs::distribution::{ChiSquared, ContinuousCDF, DiscreteCDF, Discrete, Poisson};

use super::Ctx;
use crate::error::{Context, HarnessError, Result};
use crate::probes::ElementKind;
use crate::report::CheckRecord;

/// Count bins [lo, hi] (hi = None for the tail) with expected frequency ≥ 5 where possible.
fn poisson_bins(mean: f64, n: u64) -> Result<Vec<(usize, Option<usize>, f64)>> {
    let law = Poisson::new(mean).map_err(|e| HarnessError::Config(format!("count law: {e}")))?;
    let n = n as f64;
    let mut bins = Vec::new();
    let (mut lo, mut acc) = (0usize, 0.0);
    for k in 0u64.. {
        acc += law.pmf(k);
        let tail = law.sf(k);
        if tail * n < 5.0 {
            bins.push((lo, None, acc + tail));
            break;
        }
        if acc * n >= 5.0 {
            bins.push((lo, Some(k as usize), acc));
            lo = k as usize + 1;
            acc = 0.0;
        }
    }
    Ok(bins)
}

pub fn sample_stats(ctx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    let lambda = ctx.model.total_mass();
    let n = ctx.n();
    let bins = poisson_bins(lambda, n)?;
    let est = mc_estimate_many(&ctx.measure(), n, ctx.seed(), 2 + bins.len(), |w| {
        let c = w.len();
        let mut v = vec![c as f64, (c as f64 - lambda).powi(2)];
        v.extend(bins.iter().map(|&(lo, hi, _)| f64::from(u8::from(c >= lo && hi.is_none_or(|h| c <= h)))));
        Ok(v)
    })
    .check("sample-stats")?;
    let mut records = vec![ctx.mc("mean count", est[0], lambda), ctx.mc("count variance", est[1], lambda)];
    let nf = n as f64;
    let stat: f64 = bins
        .iter()
        .zip(&est[2..])
        .map(|(&(_, _, p), e)| {
            let observed = (e.mean * nf).round();
            (observed - nf * p).powi(2) / (nf * p)
        })
        .sum();
    let df = (bins.len() - 1).max(1) as f64;
    let law = ChiSquared::new(df).map_err(|e| HarnessError::Config(format!("χ² law: {e}")))?;
    let critical = law.inverse_cdf(1.0 - ctx.tol().chi2_alpha);
    records.push(CheckRecord::upper(format!("chi-square over {} count bins", bins.len()), stat, df, critical));
    if let Some(prefix) = &ctx.params().dump_prefix {
        let measure = ctx.measure();
        for i in 0..ctx.params().dump_count as u64 {
            let omega = measure.sample(&mut sample_rng(ctx.seed(), i), i).check("sample dump")?;
            let file = File::create(format!("{prefix}{i}.csv"))?;
            omega.write_csv(BufWriter::new(file)).check("sample dump")?;
        }
    }
    Ok(records)
}

pub fn laplace(ctx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    let count = ctx.probe_count(10);
    let mut probes = ctx.probes(0);
    let mut phis: Vec<(String, TestFunction)> =
        (0..count).map(|j| (format!("random bump {j}"), probes.test_function(0.8))).collect();
    let mut targets = Vec::with_capacity(count + 1);
    for (name, phi) in &phis {
        let target = match phi.support().window() {
            Some(w) => ctx.model.laplace_closed(|x, m| phi.value(x, m), Some(w)),
            None => ctx.model.laplace_closed(|x, m| phi.value(x, m), None),
        }
        .check(name)?;
        targets.push(target);
    }
    if let Some(c) = ctx.params().constant {
        phis.push((format!("constant {c}"), TestFunction::Const(c)));
        targets.push((ctx.model.total_mass() * c.exp_m1()).exp());
    }
    let est = mc_estimate_many(&ctx.measure(), ctx.n(), ctx.seed(), phis.len(), |w| {
        Ok(phis.iter().map(|(_, phi)| phi.pair(w).exp()).collect())
    })
    .check("laplace")?;
    Ok(phis.iter().zip(est).zip(targets).map(|(((name, _), e), t)| ctx.mc(name.clone(), e, t)).collect())
}

pub fn quasiinvariance(ctx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    let count = ctx.probe_count(5);
    let mut probes = ctx.probes(0);
    let kinds = [ElementKind::Diffeo, ElementKind::Current, ElementKind::Mixed];
    let mut elements: Vec<(String, GroupElement)> = Vec::new();
    if ctx.params().identity {
        elements.push(("identity".into(), GroupElement::identity(ctx.model.dim(), ctx.model.space())));
    }
    for j in 0..count {
        let kind = kinds[j.min(kinds.len() - 1)];
        elements.push((format!("{kind:?} element {j}").to_lowercase(), probes.group_element(kind).check("group element")?));
    }
    let fs: Vec<CylinderFunction> = (0..count).map(|_| probes.cylinder()).collect();
    let model = &ctx.model;
    let width = 1 + fs.len();
    let est = mc_estimate_many(&ctx.measure(), ctx.n(), ctx.seed(), elements.len() * width, |w| {
        let base: Vec<f64> = fs.iter().map(|f| f.value(w)).collect();
        let mut out = Vec::with_capacity(elements.len() * width);
        for (_, a) in &elements {
            let density = a.rn_density_config(model, w)?;
            let moved = a.act_config(w)?;
            out.push(density);
            out.extend(fs.iter().zip(&base).map(|(f, b)| f.value(&moved) - b * density));
        }
        Ok(out)
    })
    .check("quasiinvariance")?;
    let mut records = Vec::new();
    for (i, (name, _)) in elements.iter().enumerate() {
        let row = &est[i * width..(i + 1) * width];
        records.push(ctx.mc(format!("{name}: density normalization"), row[0], 1.0));
        for (j, e) in row[1..].iter().enumerate() {
            records.push(ctx.mc(format!("{name}: change of variables, F{j}"), *e, 0.0));
        }
    }
    Ok(records)
}
