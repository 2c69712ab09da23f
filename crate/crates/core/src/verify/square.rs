use serde_json::json;

use super::{max_of, median, min_of, Check, Ensemble, Report, Table};
use crate::error::{Error, Result};
use crate::grid::weighted_lp_norm;
use crate::norms::{phase_norm, NormSpec};
use crate::packets::{CriticalPackets, WavePacketTransform};
use crate::par;
use crate::C64;

/// Ratios `||Wf||_{L^p_x L^2_sigma} / ||Pi f||_p` over an ensemble, with the
/// spread `max/min` compared against `bound`. At `p = 2` every ratio must
/// be 1 in discrete normalization.
pub fn square_function_check<T: WavePacketTransform + ?Sized>(t: &T, p: f64, ensemble: &Ensemble, bound: f64) -> Result<Report> {
    let spec = NormSpec::LpXL2Sigma { p, alpha: 0.0 };
    spec.validate()?;
    let weights = t.layout().point_weights().to_vec();
    let mut report = Report::new("square_function", json!({ "family": t.family(), "p": p, "ensemble": ensemble, "bound": bound }));
    let samples = par::map(ensemble.count, |i| -> Result<Option<f64>> {
        let f = t.project(&ensemble.field(t.grid(), i))?;
        let nf = weighted_lp_norm(f.values(), p, |k| weights[k])?;
        if nf == 0.0 {
            return Ok(None);
        }
        Ok(Some(phase_norm(&t.analyze(&f)?, &spec)? / nf))
    });
    let mut table = Table::new("trials", &["trial", "ratio"]);
    let mut ratios = Vec::new();
    for (i, s) in samples.into_iter().enumerate() {
        if let Some(r) = s? {
            table.push(vec![i as f64, r]);
            ratios.push(r);
        }
    }
    if ratios.is_empty() {
        return Err(Error::ZeroNorm);
    }
    let (lo, hi) = (min_of(&ratios), max_of(&ratios));
    report.metric("min", lo);
    report.metric("max", hi);
    report.metric("median", median(&ratios));
    report.metric("spread", hi / lo);
    report.tables.push(table);
    report.check(Check::below("spread", hi / lo, bound));
    if p == 2.0 {
        let worst = ratios.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
        report.check(Check::at_most("isometry_at_two", worst, 1e-10));
    }
    Ok(report)
}

/// Probe of `<R_j f, f> / (Phi(R) ||1_{Q_j} f||^2)` over random fields and
/// cubes, with `Phi(R) = int_R^inf psi(sigma^2)^2 dsigma/sigma`. No lower
/// bound is asserted; the report records where the ratio falls below 1 and
/// the share of `1_{Q_j} f` in modes with `R^2 lambda <= 1`.
pub fn remainder_lowerbound_probe(t: &CriticalPackets, ensemble: &Ensemble) -> Result<Report> {
    let decomp = t.decomp();
    let partition = t.partition();
    let r = t.band_radius();
    let lambdas = decomp.spectral_lambdas().to_vec();
    let phi = t.frame().window.tail(r);
    if phi <= 0.0 {
        return Err(Error::InvalidArgument(format!("window tail at R = {r} vanishes")));
    }
    let mut report = Report::new("remainder_probe", json!({ "cubes": partition.len(), "band_radius": r, "phi": phi, "ensemble": ensemble }));
    let rows = par::map(ensemble.count, |i| {
        let f = ensemble.field(t.grid(), i);
        let mut out = Vec::new();
        for (j, op) in t.remainders().iter().enumerate() {
            let mut cut = vec![C64::new(0.0, 0.0); f.values().len()];
            for &k in op.members() {
                cut[k] = f.values()[k];
            }
            let mass: f64 = cut.iter().map(|v| v.norm_sqr()).sum();
            if mass == 0.0 {
                continue;
            }
            let coeffs = decomp.to_spectral(&cut);
            let total: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
            let low: f64 = coeffs.iter().zip(&lambdas).filter(|(_, l)| r * r * **l <= 1.0).fold(0.0, |a, (c, _)| a + c.norm_sqr());
            out.push(vec![i as f64, j as f64, op.form(&cut) / (phi * mass), low / total]);
        }
        out
    });
    let mut table = Table::new("probes", &["trial", "cube", "ratio", "low_share"]);
    for r in rows.into_iter().flatten() {
        table.push(r);
    }
    let ratios = table.column("ratio").unwrap();
    if ratios.is_empty() {
        return Err(Error::ZeroNorm);
    }
    report.metric("min_ratio", min_of(&ratios));
    report.metric("median_ratio", median(&ratios));
    report.metric("max_ratio", max_of(&ratios));
    report.metric("below_one", ratios.iter().filter(|r| **r < 1.0).count() as f64);
    let min_eig = t.remainders().iter().map(|op| op.min_eigenvalue()).fold(f64::INFINITY, f64::min);
    let max_eig = t.remainders().iter().map(|op| op.max_eigenvalue()).fold(0.0, f64::max);
    report.metric("min_eigenvalue", min_eig);
    report.metric("max_eigenvalue", max_eig);
    report.tables.push(table);
    report.check(Check::at_least("positive_semidefinite", min_eig, -1e-10 * max_eig.max(f64::MIN_POSITIVE)));
    report.note("probe only: no lower bound for the remainder is asserted");
    Ok(report)
}
