use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{max_of, median, Check, Ensemble, Report, Table};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::norms::{phase_norm, NestedNorm, NormSpec};
use crate::packets::{Layout, PhaseSpaceField, WavePacketTransform};
use crate::par;
use crate::C64;

/// `||W*W f - Pi f|| / ||Pi f||` in the transform's field measure.
pub fn reconstruction_error<T: WavePacketTransform + ?Sized>(t: &T, f: &Field) -> Result<f64> {
    let pf = t.project(f)?;
    let norm = t.field_norm(&pf);
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let back = t.synthesize(&t.analyze(f)?)?;
    Ok(t.field_norm(&back.sub(&pf)?) / norm)
}

/// `| ||Wf||^2 - ||Pi f||^2 | / ||Pi f||^2`.
pub fn isometry_defect<T: WavePacketTransform + ?Sized>(t: &T, f: &Field) -> Result<f64> {
    let pf = t.project(f)?;
    let mass = t.field_norm(&pf).powi(2);
    if mass == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((t.analyze(f)?.mass() - mass).abs() / mass)
}

/// Settings of the duality-map ascent run after the ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AscentOptions {
    pub steps: usize,
}

impl Default for AscentOptions {
    fn default() -> Self {
        AscentOptions { steps: 20 }
    }
}

fn entry_weights(layout: &Layout) -> Vec<f64> {
    let mut w = vec![0.0; layout.len()];
    for c in 0..layout.channels().len() {
        for s in 0..layout.channels()[c].slots.len() {
            for (p, e) in layout.block_range(c, s).enumerate() {
                w[e] = layout.entry_weight(c, s, p);
            }
        }
    }
    w
}

fn is_hilbert(spec: &NormSpec) -> bool {
    match *spec {
        NormSpec::LpXL2Sigma { p, alpha } => p == 2.0 && alpha == 0.0,
        NormSpec::LqSigmaLpX { p, q, alpha } => p == 2.0 && q == 2.0 && alpha == 0.0,
        NormSpec::Modulation { p, q, s } => p == 2.0 && q == 2.0 && s == 0.0,
        NormSpec::Decoupling { q, p, s } => p == 2.0 && q == 2.0 && s == 0.0,
        NormSpec::CubeLplpl2 { p } => p == 2.0,
        _ => false,
    }
}

/// Boyd's power iteration for `||P||_{Y -> Y}` with `P = WW*` self-adjoint in
/// the phase-space mass pairing. Returns the ratio after every step.
fn ascent<T: WavePacketTransform + ?Sized>(t: &T, nested: &NestedNorm, start: &PhaseSpaceField, steps: usize) -> Result<Vec<f64>> {
    let layout = t.layout().clone();
    let pi = entry_weights(&layout);
    let ratio: Vec<f64> = (0..nested.len())
        .map(|e| {
            let nu = nested.measure(e);
            if pi[e] > 0.0 {
                nu / pi[e]
            } else {
                0.0
            }
        })
        .collect();
    let dual = nested.dual();
    let mut x = start.scaled(C64::new(1.0 / nested.eval(start.values()), 0.0));
    let mut history = Vec::with_capacity(steps);
    for _ in 0..steps {
        let y = t.reproduce(&x)?;
        let ny = nested.eval(y.values());
        history.push(ny / nested.eval(x.values()));
        if ny == 0.0 {
            break;
        }
        let z = nested.norming(y.values());
        let dz: Vec<C64> = z.iter().zip(&ratio).map(|(v, r)| v * r).collect();
        let pz = t.reproduce(&PhaseSpaceField::new(layout.clone(), dz)?)?;
        let w: Vec<C64> = pz.values().iter().zip(&ratio).map(|(v, r)| if *r > 0.0 { v / r } else { C64::new(0.0, 0.0) }).collect();
        let next = dual.norming(&w);
        if next.iter().all(|v| *v == C64::new(0.0, 0.0)) {
            break;
        }
        x = PhaseSpaceField::new(layout.clone(), next)?;
    }
    Ok(history)
}

/// Ensemble estimate of `||WW*||` on the phase-space norm `spec`, followed
/// by a duality-map ascent from the member with the largest ratio. Values
/// away from exponent 2 are lower estimates of the operator norm.
pub fn projection_bound_estimate<T: WavePacketTransform + ?Sized>(
    t: &T,
    spec: &NormSpec,
    ensemble: &Ensemble,
    options: AscentOptions,
) -> Result<Report> {
    spec.validate()?;
    let layout = t.layout().clone();
    let mut report = Report::new(
        "projection_bound",
        json!({ "family": layout.family(), "spec": spec, "ensemble": ensemble, "ascent": options }),
    );
    let samples = par::map(ensemble.count, |i| -> Result<(f64, PhaseSpaceField)> {
        let f = ensemble.phase(&layout, i);
        let nf = phase_norm(&f, spec)?;
        if nf == 0.0 {
            return Err(Error::ZeroNorm);
        }
        let pf = t.reproduce(&f)?;
        Ok((phase_norm(&pf, spec)? / nf, f))
    });
    let mut ratios = Vec::with_capacity(ensemble.count);
    let mut worst: Option<(f64, PhaseSpaceField)> = None;
    let mut table = Table::new("trials", &["trial", "ratio"]);
    for (i, s) in samples.into_iter().enumerate() {
        let (r, f) = s?;
        table.push(vec![i as f64, r]);
        ratios.push(r);
        if worst.as_ref().is_none_or(|(w, _)| r > *w) {
            worst = Some((r, f));
        }
    }
    report.tables.push(table);
    let ensemble_max = max_of(&ratios);
    report.metric("ensemble_max", ensemble_max);
    report.metric("ensemble_median", median(&ratios));
    let mut estimate = ensemble_max;
    let nested = match spec {
        NormSpec::Decoupling { s, .. } if *s != 0.0 => None,
        _ => spec.nested(&layout)?,
    };
    match (nested, worst) {
        (Some(nn), Some((_, start))) if options.steps > 0 && nn.exponents().iter().all(|&e| e > 1.0) => {
            let history = ascent(t, &nn, &start, options.steps)?;
            let mut trace = Table::new("ascent", &["step", "ratio"]);
            for (k, r) in history.iter().enumerate() {
                trace.push(vec![k as f64, *r]);
            }
            report.tables.push(trace);
            let best = max_of(&history);
            report.metric("ascent_best", best);
            estimate = estimate.max(best);
        }
        _ => report.note("no ascent for this norm; the estimate is the ensemble maximum"),
    }
    report.metric("estimate", estimate);
    if is_hilbert(spec) {
        report.check(Check::at_most("projection_norm", estimate, 1.0 + 1e-8));
    } else {
        report.note("lower estimate of the operator norm");
    }
    Ok(report)
}
