use rayon::prelude::*;
use serde_json::{json, Value};
use wavepacket::critical::{critical_radius, critical_radius_field};
use wavepacket::io::write_field_csv;
use wavepacket::norms::{field_norm, phase_norm, NormSpec};
use wavepacket::packets::{write_phase_field, Family, WavePacketTransform};
use wavepacket::spectral::Normalization;
use wavepacket::verify::{
    embedding_report, finite_speed_check, isometry_defect, kernel_envelope_check, offdiag_decay_check, projection_bound_estimate,
    propagator_invariance_report, reconstruction_error, remainder_lowerbound_probe, square_function_check, theorem_sweep, AscentOptions,
    Check, CriticalSetup, Report, SweepSetup, Table,
};
use wavepacket::{Error, Result};

use crate::build;
use crate::config::{FamilyKind, OperatorKind, RunConfig, Suite};

/// A finished run: the report plus any extra files, named by suffix.
pub struct Run {
    pub stem: String,
    pub report: Report,
    pub extras: Vec<(String, Vec<u8>)>,
}

impl Run {
    fn new(stem: impl Into<String>, report: Report) -> Self {
        Run { stem: stem.into(), report, extras: Vec::new() }
    }
}

fn spectrum_csv(lambdas: &[f64]) -> Vec<u8> {
    let mut t = Table::new("spectrum", &["index", "lambda"]);
    for (i, l) in lambdas.iter().enumerate() {
        t.push(vec![i as f64, *l]);
    }
    crate::artifacts::table_csv(&t).into_bytes()
}

pub fn decompose(c: &RunConfig) -> Result<Run> {
    let ctx = build::context(c)?;
    let t = ctx.transform.as_ref();
    let f = build::input(c, t.grid())?;
    let w = t.analyze(&f)?;
    let layout = w.layout().clone();
    let mut report = Report::new("decompose", Value::Null);
    let mut table = Table::new("channels", &["channel", "group", "weight", "points", "mass"]);
    for (k, ch) in layout.channels().iter().enumerate() {
        let mut mass = 0.0;
        for s in 0..ch.slots.len() {
            for (p, v) in w.block(k, s).iter().enumerate() {
                mass += layout.entry_weight(k, s, p) * v.norm_sqr();
            }
        }
        let group = ch.group.map_or(-1.0, |g| g as f64);
        table.push(vec![k as f64, group, ch.weight, layout.point_count(k) as f64, mass]);
    }
    let defect = isometry_defect(t, &f)?;
    report.metric("channels", layout.channels().len() as f64);
    report.metric("phase_mass", w.mass());
    report.metric("field_norm", t.field_norm(&t.project(&f)?));
    report.metric("isometry_defect", defect);
    report.tables.push(table);
    if c.sigma.normalization == Normalization::Discrete {
        report.check(Check::at_most("isometry_defect", defect, c.verify.tolerance));
    } else {
        report.note("raw normalization: the isometry defect is recorded, not checked");
    }
    let mut run = Run::new("decompose", report);
    let mut phase = Vec::new();
    write_phase_field(&w, &mut phase)?;
    run.extras.push(("phase.bin".into(), phase));
    if let Some(d) = &ctx.decomp {
        run.extras.push(("spectrum.csv".into(), spectrum_csv(d.lambdas())));
    }
    Ok(run)
}

pub fn reconstruct(c: &RunConfig) -> Result<Run> {
    let ctx = build::context(c)?;
    let t = ctx.transform.as_ref();
    let f = build::input(c, t.grid())?;
    let g = t.synthesize(&t.analyze(&f)?)?;
    let residual = reconstruction_error(t, &f)?;
    let mut report = Report::new("reconstruct", Value::Null);
    report.metric("residual", residual);
    report.check(Check::at_most("residual", residual, c.verify.tolerance));
    let mut run = Run::new("reconstruct", report);
    let mut out = Vec::new();
    write_field_csv(&g, &mut out)?;
    run.extras.push(("field.csv".into(), out));
    Ok(run)
}

pub fn norm(c: &RunConfig) -> Result<Run> {
    if c.norms.is_empty() {
        return Err(Error::InvalidArgument("no [[norms]] entries in the config".into()));
    }
    let ctx = build::context(c)?;
    let t = ctx.transform.as_ref();
    let f = build::input(c, t.grid())?;
    let w = t.analyze(&f)?;
    let mut report = Report::new("norm", Value::Null);
    let mut table = Table::new("norms", &["index", "value"]);
    for (i, spec) in c.norms.iter().enumerate() {
        let value = match spec {
            NormSpec::Sobolev { .. } => field_norm(&f, spec)?,
            _ => phase_norm(&w, spec)?,
        };
        report.metric(&spec.label(), value);
        table.push(vec![i as f64, value]);
    }
    report.metric("field_l2", f.l2_norm());
    report.tables.push(table);
    Ok(Run::new("norm", report))
}

pub fn partition(c: &RunConfig) -> Result<Run> {
    let v = build::potential(c)?;
    let field = critical_radius_field(&v);
    let p = build::partition(&v)?;
    let mut report = Report::new("partition", Value::Null);
    report.metric("cubes", p.len() as f64);
    report.metric("overlap", p.overlap() as f64);
    report.metric("r_sup", p.r_sup());
    report.metric("rho_min", field.min());
    report.metric("clamped_points", field.flagged.len() as f64);
    let mut run = Run::new("partition", report);
    run.extras.push(("cubes.csv".into(), format!("# wavepacket-table v1 cubes\n{}", p.to_csv()).into_bytes()));
    Ok(run)
}

pub fn critical_radius_map(c: &RunConfig) -> Result<Run> {
    let v = build::potential(c)?;
    let g = *v.grid();
    let field = critical_radius_field(&v);
    let mut columns: Vec<String> = (0..g.d()).map(|a| format!("x_{a}")).collect();
    columns.extend(["rho".to_string(), "clamped".to_string()]);
    let names: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = Table::new("radius", &names);
    for (i, rho) in field.rho.iter().enumerate() {
        let x = g.point(i);
        let mut row: Vec<f64> = x[..g.d()].to_vec();
        row.push(*rho);
        row.push(if field.flagged.binary_search(&i).is_ok() { 1.0 } else { 0.0 });
        table.push(row);
    }
    let mut report = Report::new("critical_radius", Value::Null);
    report.metric("rho_min", field.min());
    report.metric("rho_max", field.r_sup);
    report.metric("clamped_points", field.flagged.len() as f64);
    if let Some(b) = c.critical_radius {
        let rho0 = critical_radius(&v, &[0.0; 3]).value;
        let rho1 = critical_radius(&v, &[b.probe, 0.0, 0.0]).value;
        let ratio = rho0 / rho1;
        report.metric("rho_origin", rho0);
        report.metric("rho_probe", rho1);
        report.metric("ratio", ratio);
        report.check(Check::within("ratio", ratio, b.expected_ratio / b.factor, b.expected_ratio * b.factor));
    }
    report.tables.push(table);
    Ok(Run::new("critical-radius", report))
}

fn hilbert_spec(family: Family) -> NormSpec {
    match family {
        Family::Modulation => NormSpec::Modulation { p: 2.0, q: 2.0, s: 0.0 },
        Family::Directional => NormSpec::Decoupling { q: 2.0, p: 2.0, s: 0.0 },
        Family::Critical => NormSpec::CubeLplpl2 { p: 2.0 },
        _ => NormSpec::LpXL2Sigma { p: 2.0, alpha: 0.0 },
    }
}

fn identity_suite(c: &RunConfig, t: &dyn WavePacketTransform, with_residual: bool) -> Result<Report> {
    let e = build::ensemble(c);
    let rows: Vec<Result<(f64, f64)>> = (0..e.count)
        .into_par_iter()
        .map(|i| {
            let f = e.field(t.grid(), i);
            let r = if with_residual { reconstruction_error(t, &f)? } else { 0.0 };
            Ok((r, isometry_defect(t, &f)?))
        })
        .collect();
    let name = if with_residual { "reconstruction" } else { "isometry" };
    let mut report = Report::new(name, Value::Null);
    let mut table = if with_residual {
        Table::new("residuals", &["trial", "residual", "isometry_defect"])
    } else {
        Table::new("defects", &["trial", "isometry_defect"])
    };
    let (mut worst_r, mut worst_i) = (0.0f64, 0.0f64);
    for (i, row) in rows.into_iter().enumerate() {
        let (r, d) = row?;
        worst_r = worst_r.max(r);
        worst_i = worst_i.max(d);
        table.push(if with_residual { vec![i as f64, r, d] } else { vec![i as f64, d] });
    }
    let tol = c.verify.tolerance;
    if with_residual {
        report.metric("max_residual", worst_r);
        report.check(Check::at_most("max_residual", worst_r, tol));
    }
    report.metric("max_isometry_defect", worst_i);
    if with_residual && c.sigma.normalization == Normalization::Raw {
        report.note("raw normalization: the isometry defect is recorded, not checked");
    } else {
        report.check(Check::at_most("max_isometry_defect", worst_i, tol));
    }
    report.tables.push(table);
    Ok(report)
}

fn locality_inputs(c: &RunConfig) -> Result<(std::sync::Arc<wavepacket::spectral::SpectralDecomp>, wavepacket::critical::CriticalPartition)> {
    if c.operator.kind != OperatorKind::Schrodinger {
        return Err(Error::InvalidArgument("this suite needs operator.kind = schrodinger".into()));
    }
    if c.verify.sigmas.is_empty() {
        return Err(Error::InvalidArgument("verify.sigmas is empty".into()));
    }
    let v = build::potential(c)?;
    let p = build::partition(&v)?;
    Ok((build::decomposition(c)?, p))
}

pub fn sweep_setup(c: &RunConfig) -> Result<SweepSetup> {
    let potential = c
        .operator
        .potential
        .ok_or_else(|| Error::InvalidArgument("the theorem sweep needs a closed-form operator.potential".into()))?;
    let b = build::window(c)?
        .cosine_support()
        .ok_or_else(|| Error::InvalidArgument("the theorem sweep needs a finite_speed window".into()))?;
    Ok(SweepSetup {
        base: CriticalSetup {
            potential,
            d: c.grid.d,
            n: c.grid.n,
            half_extent: c.grid.half_extent,
            cosine_support: b,
            points_per_decade: c.sigma.points_per_decade,
            normalization: c.sigma.normalization,
        },
        sizes: c.sweep.sizes.clone(),
        exponents: c.sweep.exponents.clone(),
        ensemble: build::ensemble(c),
        ascent: AscentOptions { steps: c.verify.ascent_steps },
        stability: c.sweep.stability,
    })
}

pub fn verify(c: &RunConfig, suite: Suite) -> Result<Run> {
    let mut report = match suite {
        Suite::Reconstruction | Suite::Isometry => {
            let ctx = build::context(c)?;
            identity_suite(c, ctx.transform.as_ref(), suite == Suite::Reconstruction)?
        }
        Suite::Projection => {
            let ctx = build::context(c)?;
            let t = ctx.transform.as_ref();
            let spec = c.norms.first().copied().unwrap_or_else(|| hilbert_spec(t.family()));
            projection_bound_estimate(t, &spec, &build::ensemble(c), AscentOptions { steps: c.verify.ascent_steps })?
        }
        Suite::FiniteSpeed => {
            let (d, p) = locality_inputs(c)?;
            finite_speed_check(&d, &build::window(c)?, &p, &c.verify.sigmas)?
        }
        Suite::KernelEnvelope => {
            let (d, p) = locality_inputs(c)?;
            kernel_envelope_check(&d, &build::window(c)?, &p, &c.verify.sigmas)?
        }
        Suite::SquareFunction => {
            let ctx = build::context(c)?;
            square_function_check(ctx.transform.as_ref(), c.verify.p, &build::ensemble(c), c.verify.spread_bound)?
        }
        Suite::RemainderProbe => {
            if c.family.kind != FamilyKind::Critical {
                return Err(Error::InvalidArgument("remainder_probe needs family.kind = critical".into()));
            }
            remainder_lowerbound_probe(&build::critical(c)?, &build::ensemble(c))?
        }
        Suite::OffdiagDecay => {
            let setup = c.offdiag.as_ref().ok_or_else(|| Error::InvalidArgument("offdiag_decay needs an [offdiag] block".into()))?;
            offdiag_decay_check(build::decomposition(c)?.as_ref(), setup)?
        }
        Suite::Propagator => propagator_invariance_report(&c.propagator.clone().unwrap_or_default())?,
        Suite::Embedding => embedding_report(&c.embedding.clone().unwrap_or_default())?,
        Suite::TheoremSweep => theorem_sweep(&sweep_setup(c)?)?,
    };
    let setup = std::mem::take(&mut report.config);
    report.config = json!({ "suite": suite.name(), "setup": setup });
    let stem = if suite == Suite::TheoremSweep { "theorem-sweep".to_string() } else { format!("verify-{}", suite.name().replace('_', "-")) };
    Ok(Run::new(stem, report))
}
