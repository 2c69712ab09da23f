use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{linear_fit, max_of, Check, Report, Table};
use crate::critical::CriticalPartition;
use crate::error::{Error, Result};
use crate::par;
use crate::spectral::{kernel_matrix, SpectralDecomp, Window};

/// Relative size of a block that counts as zero.
const ZERO_BLOCK: f64 = 1e-6;

fn block(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])])
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// Audits `1_{Q_k} psi(sigma^2 A) 1_{Q_j} = 0` whenever `dist(Q_k, Q_j) > b sigma`.
pub fn finite_speed_check(decomp: &SpectralDecomp, window: &Window, partition: &CriticalPartition, sigmas: &[f64]) -> Result<Report> {
    let b = window
        .cosine_support()
        .ok_or_else(|| Error::InvalidArgument("finite-speed checks need a finite_speed window".into()))?;
    if decomp.grid() != partition.grid() {
        return Err(Error::GridMismatch);
    }
    let mut report = Report::new("finite_speed", json!({ "b": b, "sigmas": sigmas, "cubes": partition.len() }));
    let mut table = Table::new("blocks", &["sigma", "target", "source", "distance", "predicted_zero", "relative_norm"]);
    let cubes = partition.len();
    let mut violations = 0usize;
    let mut worst_outside: f64 = 0.0;
    let mut min_diagonal = f64::INFINITY;
    let mut supports: Vec<(f64, BTreeSet<(usize, usize)>)> = Vec::new();
    for &sigma in sigmas {
        let m = decomp.operator_matrix(|l| window.eval(sigma * sigma * l))?;
        let scale = decomp.lambdas().iter().map(|l| window.eval(sigma * sigma * l).abs()).fold(0.0, f64::max);
        let rows = par::map(cubes * cubes, |idx| {
            let (k, j) = (idx / cubes, idx % cubes);
            let norm = spectral_norm(&block(&m, partition.members(k), partition.members(j)));
            (k, j, norm / scale)
        });
        let mut support = BTreeSet::new();
        for (k, j, rel) in rows {
            let dist = partition.distance(j, k);
            let predicted = dist > b * sigma;
            table.push(vec![sigma, k as f64, j as f64, dist, predicted as u8 as f64, rel]);
            if predicted {
                worst_outside = worst_outside.max(rel);
                if rel >= ZERO_BLOCK {
                    violations += 1;
                }
            }
            if j == k {
                min_diagonal = min_diagonal.min(rel);
            }
            if rel >= ZERO_BLOCK {
                support.insert((k, j));
            }
        }
        supports.push((sigma, support));
    }
    supports.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = supports.windows(2).all(|w| w[0].1.is_subset(&w[1].1));
    let mut sizes = Table::new("neighbor_sets", &["sigma", "pairs"]);
    for (s, set) in &supports {
        sizes.push(vec![*s, set.len() as f64]);
    }
    report.tables.push(table);
    report.tables.push(sizes);
    report.metric("violations", violations as f64);
    report.metric("worst_outside", worst_outside);
    report.metric("min_diagonal", min_diagonal);
    report.check(Check::at_most("violations", violations as f64, 0.0));
    report.check(Check::at_least("min_diagonal", min_diagonal, 1e-3));
    report.check(Check::flag("monotone_support", monotone));
    Ok(report)
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1])).sum()
}

/// Empirical envelopes `g(u)`, `h(v)` of `sigma^d |K_{sigma^2}(x, y)|` for
/// `y` in `Q_j`, `u = |x - y|/sigma` and `v = sigma/rho_j`, over the pairs
/// with `sigma >= rho_j`.
pub fn kernel_envelope_check(decomp: &SpectralDecomp, window: &Window, partition: &CriticalPartition, sigmas: &[f64]) -> Result<Report> {
    if decomp.grid() != partition.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = *decomp.grid();
    let d = grid.d() as i32;
    let bin = 0.25;
    let mut report = Report::new("kernel_envelope", json!({ "sigmas": sigmas, "bin_width": bin }));
    let mut g_hat: BTreeMap<usize, f64> = BTreeMap::new();
    let mut per_sigma: Vec<(f64, BTreeMap<usize, f64>)> = Vec::new();
    let mut h_table = Table::new("h_envelope", &["sigma", "cube", "v", "max_scaled_kernel"]);
    for &sigma in sigmas {
        let k = kernel_matrix(decomp, |l| window.eval(sigma * sigma * l))?;
        let mut profile: BTreeMap<usize, f64> = BTreeMap::new();
        for (j, cube) in partition.cubes().iter().enumerate() {
            if sigma < cube.rho {
                continue;
            }
            let mut peak: f64 = 0.0;
            for &y in partition.members(j) {
                let py = grid.point(y);
                for x in 0..grid.len() {
                    let val = sigma.powi(d) * k[(x, y)].abs();
                    let u = grid.distance(&grid.point(x), &py) / sigma;
                    let slot = (u / bin).floor() as usize;
                    let e = profile.entry(slot).or_insert(0.0);
                    *e = e.max(val);
                    peak = peak.max(val);
                }
            }
            h_table.push(vec![sigma, j as f64, sigma / cube.rho, peak]);
        }
        for (slot, v) in &profile {
            let e = g_hat.entry(*slot).or_insert(0.0);
            *e = e.max(*v);
        }
        per_sigma.push((sigma, profile));
    }
    if g_hat.is_empty() {
        return Err(Error::InvalidArgument("no sigma in the list reaches a critical radius".into()));
    }
    let mut g_table = Table::new("g_envelope", &["u", "max_scaled_kernel"]);
    for (slot, v) in &g_hat {
        g_table.push(vec![(*slot as f64 + 0.5) * bin, *v]);
    }
    let us = g_table.column("u").unwrap();
    let gs = g_table.column("max_scaled_kernel").unwrap();
    let top = max_of(&gs);
    let (fx, fy): (Vec<f64>, Vec<f64>) = us.iter().zip(&gs).filter(|(_, g)| **g > 1e-12 * top).map(|(u, g)| (*u, g.ln())).unzip();
    let (slope, _) = linear_fit(&fx, &fy)?;
    report.metric("g_log_slope", slope);
    report.metric("g_integral", trapezoid(&us, &gs));
    let mut hv: Vec<(f64, f64)> = h_table.rows.iter().map(|r| (r[2], r[3])).collect();
    hv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (vx, vy): (Vec<f64>, Vec<f64>) = hv.into_iter().unzip();
    report.metric("h_integral", trapezoid(&vx, &vy));
    report.metric("h_max", max_of(&vy));

    let mut doubling: f64 = 0.0;
    let mut compared = 0;
    for (s, a) in &per_sigma {
        if let Some((_, b)) = per_sigma.iter().find(|(t, _)| (t / s - 2.0).abs() < 1e-9) {
            let peak = a.values().copied().fold(0.0, f64::max).max(b.values().copied().fold(0.0, f64::max));
            for (slot, va) in a {
                if let Some(vb) = b.get(slot) {
                    if va.min(*vb) > 1e-2 * peak {
                        doubling = doubling.max((vb / va - 1.0).abs());
                        compared += 1;
                    }
                }
            }
        }
    }
    if compared > 0 {
        report.metric("doubling_deviation", doubling);
    }
    report.tables.push(g_table);
    report.tables.push(h_table);
    report.check(Check::below("g_log_slope", slope, 0.0));
    report.check(Check::flag("finite_integrals", report.metrics["g_integral"].is_finite() && report.metrics["h_integral"].is_finite()));
    Ok(report)
}

/// Geometry of the off-diagonal audit: `E` is the ball of radius `radius`
/// around the origin and `F_d` the complement of the ball of radius
/// `radius + d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffDiagonalSetup {
    pub radius: f64,
    pub distances: Vec<f64>,
    pub times: Vec<f64>,
}

/// `||1_E exp(-tA) 1_F||` against `exp(-c d^2 / t)` with a fitted `c`.
pub fn offdiag_decay_check(decomp: &SpectralDecomp, setup: &OffDiagonalSetup) -> Result<Report> {
    let grid = *decomp.grid();
    let origin = [0.0; 3];
    let norm = |i: usize| grid.distance(&grid.point(i), &origin);
    let e_set: Vec<usize> = (0..grid.len()).filter(|&i| norm(i) <= setup.radius).collect();
    let mut report = Report::new("offdiag_decay", serde_json::to_value(setup).expect("plain data"));
    let mut table = Table::new("ratios", &["distance", "time", "d2_over_t", "ratio"]);
    for &t in &setup.times {
        let m = decomp.operator_matrix(|l| (-t * l).exp())?;
        for &dist in &setup.distances {
            let f_set: Vec<usize> = (0..grid.len()).filter(|&i| norm(i) >= setup.radius + dist).collect();
            if f_set.is_empty() || e_set.is_empty() {
                return Err(Error::InvalidArgument(format!("distance {dist} leaves no room in the box")));
            }
            let ratio = spectral_norm(&block(&m, &e_set, &f_set));
            table.push(vec![dist, t, dist * dist / t, ratio]);
        }
    }
    let (fx, fy): (Vec<f64>, Vec<f64>) =
        table.rows.iter().filter(|r| r[0] > 0.0 && r[3] > 1e-13 && r[3] < 1e-1).map(|r| (r[2], r[3].ln())).unzip();
    let (slope, _) = linear_fit(&fx, &fy)?;
    let c = -slope;
    report.metric("fitted_c", c);
    report.metric("fit_points", fx.len() as f64);
    let contraction = table.rows.iter().map(|r| r[3]).fold(0.0, f64::max);
    report.metric("max_ratio", contraction);
    let mut monotone = true;
    for &dist in &setup.distances {
        let mut rows: Vec<(f64, f64)> = table.rows.iter().filter(|r| r[0] == dist).map(|r| (r[1], r[3])).collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        if dist > 0.0 && !rows.windows(2).all(|w| w[0].1 <= w[1].1 * (1.0 + 1e-9) + 1e-15) {
            monotone = false;
        }
    }
    report.tables.push(table);
    report.check(Check::within("fitted_c", c, 0.125, 0.5));
    report.check(Check::at_most("contraction", contraction, 1.0 + 1e-12));
    report.check(Check::flag("monotone_in_time", monotone));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::critical::{build_partition, critical_radius_field, Potential};
    use crate::grid::Grid;
    use crate::spectral::{eigendecompose, OperatorSpec, WindowVariant};

    fn v1() -> (SpectralDecomp, Arc<CriticalPartition>) {
        let grid = Grid::new(1, 64, 4.0).unwrap();
        let v = Potential::constant(&grid, 1.0).unwrap();
        let p = Arc::new(build_partition(&v, &critical_radius_field(&v)).unwrap());
        (eigendecompose(&v.operator()).unwrap(), p)
    }

    #[test]
    fn finite_speed_holds_for_a_constant_potential() {
        let (d, p) = v1();
        let w = Window::new(WindowVariant::FiniteSpeed { b: 1.0 }).unwrap();
        let r = finite_speed_check(&d, &w, &p, &[0.25, 0.5, 1.0]).unwrap();
        assert!(r.passed(), "{:?} {:?}", r.checks, r.metrics);
    }

    #[test]
    fn finite_speed_needs_the_right_window() {
        let (d, p) = v1();
        let w = Window::new(WindowVariant::default()).unwrap();
        assert!(finite_speed_check(&d, &w, &p, &[0.5]).is_err());
    }

    #[test]
    fn kernel_envelope_decays() {
        let (d, p) = v1();
        let w = Window::new(WindowVariant::FiniteSpeed { b: 1.0 }).unwrap();
        let r = kernel_envelope_check(&d, &w, &p, &[0.75, 1.5]).unwrap();
        assert!(r.passed(), "{:?}", r.metrics);
    }

    #[test]
    fn heat_kernel_constant_is_near_a_quarter() {
        let grid = Grid::new(1, 256, 16.0).unwrap();
        let d = eigendecompose(&OperatorSpec::laplacian(grid)).unwrap();
        let setup = OffDiagonalSetup { radius: 2.0, distances: vec![0.0, 1.0, 2.0, 3.0, 4.0, 6.0], times: vec![0.25, 0.5, 1.0, 2.0, 4.0] };
        let r = offdiag_decay_check(&d, &setup).unwrap();
        assert!(r.passed(), "{:?} {:?}", r.checks, r.metrics);
    }
}
