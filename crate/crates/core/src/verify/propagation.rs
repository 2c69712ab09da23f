use serde::{Deserialize, Serialize};

use super::{max_of, min_of, Check, Report, Table};
use crate::error::{Error, Result};
use crate::grid::{lp_norm, sample_function, Field, Grid};
use crate::norms::{phase_norm, s_p, sobolev_norm, NormSpec};
use crate::packets::{required_omegas, Directional, Modulation, ModulationParams, WavePacketTransform};
use crate::spectral::{eigendecompose, propagator, Normalization, OperatorSpec, Propagator, ScaleFrame, SigmaGrid, Window, WindowVariant};
use crate::C64;

/// Frequency sweep for the Schrodinger flow on a line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorSetup {
    pub n: usize,
    pub half_extent: f64,
    /// Eta lattice spacing in units of `pi/L`.
    pub multiple: usize,
    pub p: f64,
    pub q: f64,
    #[serde(default)]
    pub s: f64,
    pub time: f64,
    /// Probe `k` sits at frequency `k * unit`.
    pub unit: f64,
    pub ks: Vec<usize>,
    pub spread_bound: f64,
    pub growth_bound: f64,
}

impl Default for PropagatorSetup {
    fn default() -> Self {
        PropagatorSetup {
            n: 1024,
            half_extent: 48.0,
            multiple: 4,
            p: 1.0,
            q: 1.0,
            s: 0.0,
            time: 1.0,
            unit: 0.06,
            ks: vec![4, 8, 16, 32, 64],
            spread_bound: 2.0,
            growth_bound: 5.0,
        }
    }
}

fn gaussian_packet(grid: &Grid, xi: f64, width: f64) -> Field {
    sample_function(grid, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        C64::from_polar((-0.5 * r2 / (width * width)).exp(), xi * x[0])
    })
}

/// `||W U f_k|| / ||W f_k||` in the modulation norm for `U = exp(it Delta)`
/// on packets `exp(i xi_k x) exp(-x^2/2)`, against the `L^1` ratio on the
/// dispersive probes `exp(-a_k x^2)` with `a_k = xi_k^2 / 2`, whose
/// closed form is `(1 + 16 a^2 t^2)^{1/4}`.
pub fn propagator_invariance_report(setup: &PropagatorSetup) -> Result<Report> {
    let spec = NormSpec::Modulation { p: setup.p, q: setup.q, s: setup.s };
    spec.validate()?;
    if setup.ks.is_empty() {
        return Err(Error::InvalidArgument("the frequency sweep is empty".into()));
    }
    let grid = Grid::new(1, setup.n, setup.half_extent)?;
    let w = Modulation::new(&grid, ModulationParams::on_lattice(&grid, setup.multiple), Normalization::Discrete)?;
    let decomp = eigendecompose(&OperatorSpec::laplacian(grid))?;
    let flow = Propagator::SchrodingerFlow { t: setup.time };
    let mut report = Report::new("propagator_invariance", serde_json::to_value(setup).expect("plain data"));
    let mut table = Table::new("sweep", &["k", "xi", "modulation_ratio", "a", "l1_ratio", "l1_oracle"]);
    let mut oracle_error: f64 = 0.0;
    for &k in &setup.ks {
        let xi = k as f64 * setup.unit;
        let f = gaussian_packet(&grid, xi, 1.0);
        let before = phase_norm(&w.analyze(&f)?, &spec)?;
        let after = phase_norm(&w.analyze(&propagator(&decomp, flow, &f)?)?, &spec)?;
        let a = 0.5 * xi * xi;
        let g = sample_function(&grid, |x| C64::new((-a * x[0] * x[0]).exp(), 0.0));
        let l1 = lp_norm(&propagator(&decomp, flow, &g)?, 1.0)? / lp_norm(&g, 1.0)?;
        let oracle = (1.0 + 16.0 * a * a * setup.time * setup.time).powf(0.25);
        oracle_error = oracle_error.max((l1 - oracle).abs() / oracle);
        table.push(vec![k as f64, xi, after / before, a, l1, oracle]);
    }
    let m = table.column("modulation_ratio").unwrap();
    let l1 = table.column("l1_ratio").unwrap();
    let spread = max_of(&m) / min_of(&m);
    let growth = max_of(&l1) / min_of(&l1);
    report.metric("modulation_spread", spread);
    report.metric("l1_growth", growth);
    report.metric("l1_oracle_error", oracle_error);
    report.tables.push(table);
    report.check(Check::below("modulation_spread", spread, setup.spread_bound));
    report.check(Check::at_least("l1_growth", growth, setup.growth_bound));
    report.check(Check::at_most("l1_oracle_error", oracle_error, 1e-3));
    Ok(report)
}

/// Directional sweep on a planar grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSetup {
    pub n: usize,
    pub half_extent: f64,
    pub p: f64,
    pub q: f64,
    #[serde(default)]
    pub s: f64,
    pub unit: f64,
    /// Width of the Gaussian envelope of every probe.
    pub width: f64,
    pub ks: Vec<usize>,
    pub points_per_decade: usize,
    pub spread_bound: f64,
}

impl Default for EmbeddingSetup {
    fn default() -> Self {
        EmbeddingSetup {
            n: 64,
            half_extent: 8.0,
            p: 3.0,
            q: 3.0,
            s: 0.0,
            unit: 0.15,
            width: 1.5,
            ks: vec![4, 8, 16, 32, 64],
            points_per_decade: 12,
            spread_bound: 10.0,
        }
    }
}

/// Ratios `||f||_{dec,s} / ||f||_{W^{s+s(p),p}}` and
/// `||f||_{W^{s-s(p),p}} / ||f||_{dec,s}` on packets
/// `exp(i xi_k x_1) exp(-|x|^2 / (2 width^2))`.
pub fn embedding_report(setup: &EmbeddingSetup) -> Result<Report> {
    let spec = NormSpec::Decoupling { q: setup.q, p: setup.p, s: setup.s };
    spec.validate()?;
    if setup.ks.is_empty() {
        return Err(Error::InvalidArgument("the frequency sweep is empty".into()));
    }
    let grid = Grid::new(2, setup.n, setup.half_extent)?;
    let top = grid.max_frequency().powi(2);
    let window = Window::new(WindowVariant::default())?;
    let sigma = SigmaGrid::covering(&window, top, 1.0, setup.points_per_decade, 1e-12)?;
    let t = Directional::new(&grid, ScaleFrame::new(window, sigma, Normalization::Discrete), required_omegas(top.sqrt()))?;
    let shift = s_p(2, setup.p);
    let mut report = Report::new("embedding", serde_json::to_value(setup).expect("plain data"));
    report.metric("s_p", shift);
    report.metric("omegas", t.omega_count() as f64);
    let mut table = Table::new("sweep", &["k", "xi", "upper_ratio", "lower_ratio"]);
    for &k in &setup.ks {
        let xi = k as f64 * setup.unit;
        let f = gaussian_packet(&grid, xi, setup.width);
        let dec = phase_norm(&t.analyze(&f)?, &spec)?;
        let upper = dec / sobolev_norm(&f, setup.s + shift, setup.p)?;
        let lower = sobolev_norm(&f, setup.s - shift, setup.p)? / dec;
        table.push(vec![k as f64, xi, upper, lower]);
    }
    let up = table.column("upper_ratio").unwrap();
    let lo = table.column("lower_ratio").unwrap();
    let (su, sl) = (max_of(&up) / min_of(&up), max_of(&lo) / min_of(&lo));
    report.metric("upper_spread", su);
    report.metric("lower_spread", sl);
    report.tables.push(table);
    report.check(Check::below("upper_spread", su, setup.spread_bound));
    report.check(Check::below("lower_spread", sl, setup.spread_bound));
    Ok(report)
}
