use markcfg_core::calculus::{
    divergence_cyl, field_pairing, ibp_base_residual, ibp_config_integrand, lie_bracket, ConfigVectorField,
    CylinderFunction, DirectionPair, Support, TestFunction,
};
use markcfg_core::quadrature::Tolerance;
use markcfg_core::sampling::{mc_estimate_many, Measure, MixingLaw};

use super::Ctx;
use crate::error::{Context, Result};
use crate::probes::Probes;
use crate::report::CheckRecord;

/// Requested tolerance for the base integration-by-parts quadrature.
const IBP_QUADRATURE: Tolerance = Tolerance::new(1e-9, 1e-9);

/// Smallest acceptable max |K_{[1,2]}F| over the configurations, so the commutator check is not vacuous.
const COMMUTATOR_FLOOR: f64 = 1e-3;

/// Re-draws φ₂ until its support meets that of φ₁, so the check is not vacuous.
fn overlapping_pair(probes: &mut Probes) -> (TestFunction, TestFunction) {
    let a = probes.test_function(1.0);
    loop {
        let b = probes.test_function(1.0);
        if a.support().intersect(b.support()) != Support::Empty {
            return (a, b);
        }
    }
}

pub fn ibp_base(ctx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    let mut probes = ctx.probes(0);
    (0..ctx.probe_count(20))
        .map(|j| {
            let (phi1, phi2) = overlapping_pair(&mut probes);
            let dir = probes.direction();
            let name = format!("triple {j}");
            let r = ibp_base_residual(&phi1, &phi2, &dir, &ctx.model, IBP_QUADRATURE).check(&name)?;
            Ok(CheckRecord::quadrature(name, r, 0.0, ctx.tol().quadrature, IBP_QUADRATURE.abs))
        })
        .collect()
}

pub fn ibp_config(ctx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    let mut probes = ctx.probes(0);
    let triples: Vec<(CylinderFunction, CylinderFunction, DirectionPair)> =
        (0..ctx.probe_count(10)).map(|_| (probes.cylinder(), probes.cylinder(), probes.direction())).collect();
    let kappa = ctx.cfg.scenario.mixing.clone().unwrap_or(MixingLaw::Discrete { atoms: vec![(1.0, 0.5), (2.0, 0.5)] });
    let model = &ctx.model;
    let mut records = Vec::new();
    for (label, measure) in [("π", Measure::Poisson(model)), ("μ", Measure::Mixed(model, &kappa))] {
        let est = mc_estimate_many(&measure, ctx.n(), ctx.seed(), triples.len(), |w| {
            Ok(triples.iter().map(|(f1, f2, dir)| ibp_config_integrand(f1, f2, dir, w, model)).collect())
        })
        .check("ibp-config")?;
        records.extend(est.into_iter().enumerate().map(|(j, e)| ctx.mc(format!("{label}: triple {j}"), e, 0.0)));
    }
    Ok(records)
}

pub fn dirichlet_form(ctx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    let mut probes = ctx.probes(0);
    let pairs: Vec<(CylinderFunction, CylinderFunction)> =
        (0..ctx.probe_count(10)).map(|_| (probes.cylinder(), probes.cylinder())).collect();
    let model = &ctx.model;
    let est = mc_estimate_many(&ctx.measure(), ctx.n(), ctx.seed(), pairs.len(), |w| {
        Ok(pairs.iter().map(|(f1, f2)| f1.gradient(w).inner(&f2.gradient(w)) - f1.h_omega(model, w) * f2.value(w)).collect())
    })
    .check("dirichlet-form")?;
    let mut records: Vec<CheckRecord> =
        est.into_iter().enumerate().map(|(j, e)| ctx.mc(format!("pair {j}"), e, 0.0)).collect();

    let omegas = ctx.pointwise_samples(ctx.params().points, "exponential identity")?;
    for j in 0..3 {
        let phi = probes.test_function(1.0);
        let f = CylinderFunction::exponential(phi.clone());
        let density = TestFunction::Sum(vec![phi.generator(model), phi.grad_dot(&phi).scaled(-1.0)]);
        let worst = omegas
            .iter()
            .map(|w| {
                let rhs = density.pair(w) * phi.pair(w).exp();
                ctx.rel_err(f.h_omega(model, w), rhs)
            })
            .fold(0.0, f64::max);
        records.push(CheckRecord::relative(
            format!("exponential identity {j} at {} configurations", omegas.len()),
            worst,
            ctx.tol().pointwise,
        ));
    }
    Ok(records)
}

pub fn divergence_duality(ctx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    let mut probes = ctx.probes(0);
    let cases: Vec<(CylinderFunction, ConfigVectorField)> = (0..ctx.probe_count(10))
        .map(|_| {
            let f = probes.cylinder();
            let field = (0..2).map(|_| (probes.cylinder(), probes.direction())).collect();
            (f, field)
        })
        .collect();
    let model = &ctx.model;
    let est = mc_estimate_many(&ctx.measure(), ctx.n(), ctx.seed(), cases.len(), |w| {
        Ok(cases.iter().map(|(f, v)| field_pairing(v, f, w) + f.value(w) * divergence_cyl(v, w, model)).collect())
    })
    .check("divergence-duality")?;
    Ok(est.into_iter().enumerate().map(|(j, e)| ctx.mc(format!("field {j}"), e, 0.0)).collect())
}

pub fn commutators(ctx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    let mut probes = ctx.probes(0);
    let mut cases: Vec<(String, DirectionPair, DirectionPair)> =
        (0..ctx.probe_count(5)).map(|j| (format!("pair {j}"), probes.direction(), probes.direction())).collect();
    cases.push(("diffeo-diffeo".into(), probes.base_direction(), probes.base_direction()));
    cases.push(("diffeo-current".into(), probes.base_direction(), probes.current_direction()));
    let omegas = ctx.pointwise_samples(ctx.params().points, "commutators")?;
    let model = &ctx.model;
    let mut records = Vec::new();
    for (name, a, b) in cases {
        let f = probes.cylinder();
        let k1k2 = f.k_operator(&b, model).k_operator(&a, model);
        let k2k1 = f.k_operator(&a, model).k_operator(&b, model);
        let k12 = f.k_operator(&lie_bracket(&a, &b).check(&name)?, model);
        let (mut worst, mut scale) = (0.0f64, 0.0f64);
        for w in &omegas {
            let rhs = k12.value(w);
            worst = worst.max(ctx.rel_err(k1k2.value(w) - k2k1.value(w), rhs));
            scale = scale.max(rhs.abs());
        }
        records.push(CheckRecord::relative(format!("{name} at {} configurations", omegas.len()), worst, ctx.tol().relative));
        records.push(CheckRecord::lower(format!("{name}: largest |K_[1,2]F|"), scale, COMMUTATOR_FLOOR));
    }
    Ok(records)
}
