//! Experiment harness: identity checks, operator-norm estimates, locality
//! audits and sweeps. Every check returns a [`Report`] that serializes
//! deterministically from its inputs.

mod identities;
mod locality;
mod propagation;
mod square;
mod theorem;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, FourierEngine, Grid};
use crate::packets::{Layout, PhaseSpaceField};
use crate::C64;

pub use identities::{isometry_defect, projection_bound_estimate, reconstruction_error, AscentOptions};
pub use locality::{finite_speed_check, kernel_envelope_check, offdiag_decay_check, OffDiagonalSetup};
pub use propagation::{embedding_report, propagator_invariance_report, EmbeddingSetup, PropagatorSetup};
pub use square::{remainder_lowerbound_probe, square_function_check};
pub use theorem::{proof_split, theorem_sweep, CriticalSetup, ProofSplit, SweepSetup};

/// How random test fields are shaped.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shaping {
    /// Independent complex uniform samples in `[-1, 1]^2` per point.
    White,
    /// White noise with every frequency above `max_frequency` removed.
    BandLimited { max_frequency: f64 },
    /// White noise times `exp(-|x - center|^2 / (2 width^2))`.
    Localized { center: [f64; 3], width: f64 },
}

/// Seeded family of random trials. Trial `i` draws from its own ChaCha
/// stream, so samples do not depend on evaluation order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ensemble {
    pub seed: u64,
    pub count: usize,
    pub shaping: Shaping,
}

impl Ensemble {
    pub fn new(seed: u64, count: usize, shaping: Shaping) -> Self {
        Ensemble { seed, count, shaping }
    }

    pub fn rng(&self, trial: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial as u64);
        rng
    }

    /// Random field number `trial`.
    pub fn field(&self, grid: &Grid, trial: usize) -> Field {
        let mut rng = self.rng(trial);
        let mut values: Vec<C64> =
            (0..grid.len()).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        match self.shaping {
            Shaping::White => {}
            Shaping::BandLimited { max_frequency } => {
                let engine = FourierEngine::new(grid);
                engine.forward(&mut values);
                let cut = max_frequency * max_frequency;
                for (i, v) in values.iter_mut().enumerate() {
                    if grid.frequency_norm_sq(i) > cut {
                        *v = C64::new(0.0, 0.0);
                    }
                }
                engine.inverse(&mut values);
            }
            Shaping::Localized { center, width } => {
                for (i, v) in values.iter_mut().enumerate() {
                    let r2: f64 = grid.displacement(&grid.point(i), &center)[..grid.d()].iter().map(|a| a * a).sum();
                    *v *= (-0.5 * r2 / (width * width)).exp();
                }
            }
        }
        Field::new(*grid, values).expect("sized to the grid")
    }

    /// Random phase-space field number `trial`: standard complex Gaussian
    /// entries with the layout's mask applied.
    pub fn phase(&self, layout: &std::sync::Arc<Layout>, trial: usize) -> PhaseSpaceField {
        let mut rng = self.rng(trial);
        let values = (0..layout.len())
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                C64::new(re, im)
            })
            .collect();
        let mut f = PhaseSpaceField::new(layout.clone(), values).expect("sized to the layout");
        f.apply_mask();
        f
    }
}

/// A named numeric table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// One pass/fail comparison of a measured value against a bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    /// `"<"`, `"<="`, `">"`, `">="` or `"in"` (with `bound` the lower and
    /// `upper` the upper end).
    pub relation: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub upper: Option<f64>,
    pub passed: bool,
}

impl Check {
    pub fn below(name: &str, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, bound, relation: "<".into(), upper: None, passed: value < bound }
    }

    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, bound, relation: "<=".into(), upper: None, passed: value <= bound }
    }

    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, bound, relation: ">=".into(), upper: None, passed: value >= bound }
    }

    pub fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Check { name: name.into(), value, bound: lo, relation: "in".into(), upper: Some(hi), passed: value >= lo && value <= hi }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Check { name: name.into(), value: ok as u8 as f64, bound: 1.0, relation: ">=".into(), upper: None, passed: ok }
    }
}

/// Result of one verification run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub config: serde_json::Value,
    pub metrics: BTreeMap<String, f64>,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(name: &str, config: serde_json::Value) -> Self {
        Report { name: name.into(), config, ..Default::default() }
    }

    pub fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.into(), value);
    }

    pub fn check(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports are plain data")
    }

    /// Merges `other` under a name prefix.
    pub fn absorb(&mut self, prefix: &str, other: Report) {
        for (k, v) in other.metrics {
            self.metrics.insert(format!("{prefix}.{k}"), v);
        }
        for mut t in other.tables {
            t.name = format!("{prefix}.{}", t.name);
            self.tables.push(t);
        }
        for mut c in other.checks {
            c.name = format!("{prefix}.{}", c.name);
            self.checks.push(c);
        }
        for n in other.notes {
            self.notes.push(format!("{prefix}: {n}"));
        }
    }
}

pub(crate) fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub(crate) fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub(crate) fn min_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Least-squares slope and intercept of `y` against `x`.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return Err(Error::InvalidArgument("a fit needs at least two points".into()));
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("degenerate fit abscissae".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ensembles_are_order_independent() {
        let grid = Grid::new(1, 32, 4.0).unwrap();
        let e = Ensemble::new(42, 5, Shaping::BandLimited { max_frequency: 3.0 });
        let forward: Vec<Field> = (0..5).map(|i| e.field(&grid, i)).collect();
        let backward: Vec<Field> = (0..5).rev().map(|i| e.field(&grid, i)).collect();
        for (a, b) in forward.iter().zip(backward.iter().rev()) {
            assert_eq!(a.values(), b.values());
        }
        assert_ne!(forward[0].values(), forward[1].values());
    }

    #[test]
    fn band_limited_samples_have_no_high_frequencies() {
        let grid = Grid::new(1, 64, 4.0).unwrap();
        let f = Ensemble::new(1, 1, Shaping::BandLimited { max_frequency: 5.0 }).field(&grid, 0);
        let mut spec = f.values().to_vec();
        FourierEngine::new(&grid).forward(&mut spec);
        for (i, v) in spec.iter().enumerate() {
            if grid.frequency_norm_sq(i) > 25.0 {
                assert!(v.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn fit_recovers_a_line() {
        let x = [0.0, 1.0, 2.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let (s, c) = linear_fit(&x, &y).unwrap();
        assert!((s + 0.5).abs() < 1e-14 && (c - 3.0).abs() < 1e-14);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn report_round_trips_through_json() {
        let mut r = Report::new("demo", serde_json::json!({"n": 64}));
        r.metric("max", 1.5);
        let mut t = Table::new("rows", &["a", "b"]);
        t.push(vec![1.0, 2.0]);
        r.tables.push(t);
        r.check(Check::below("max", 1.5, 2.0));
        let back: Report = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert!(back.passed());
        assert_eq!(r.table("rows").unwrap().to_csv(), "a,b\n1e0,2e0\n");
    }
}
