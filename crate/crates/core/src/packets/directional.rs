use std::f64::consts::PI;
use std::sync::Arc;

use super::{lift, lower, scale_slots, Basis, Channel, ChannelIndex, Family, Layout, PhaseSpaceField, WavePacketTransform, COVERAGE_TOLERANCE};
use crate::error::{Error, Result};
use crate::grid::{Field, FourierEngine, Grid};
use crate::spectral::{bump, GainTable, ScaleFrame};

const MIN_OMEGAS: usize = 8;

/// Smallest direction count whose half spacing, as a chord, stays below
/// `|xi|^{-1/2} / 2` up to `xi_max`.
pub fn required_omegas(xi_max: f64) -> usize {
    let mut k = MIN_OMEGAS;
    while 2.0 * (PI / (2.0 * k as f64)).sin() * xi_max.sqrt() > 0.5 {
        k += 1;
    }
    k
}

/// Parabolic directional lifting on a planar grid: channel `omega_k` holds
/// `psi(sigma |xi|) phi_k(xi)` applied to `f` for `sigma < 1`, with one shared
/// completion channel.
pub struct Directional {
    engine: FourierEngine,
    frame: ScaleFrame,
    table: GainTable,
    /// `phi_k` sampled in FFT order, one row per direction.
    angular: Vec<Vec<f64>>,
    layout: Arc<Layout>,
}

impl Directional {
    pub fn new(grid: &Grid, frame: ScaleFrame, omega_count: usize) -> Result<Self> {
        if grid.d() != 2 {
            return Err(Error::InvalidArgument("the directional family needs d = 2".into()));
        }
        if frame.sigma.sigma_max() > 1.0 + 1e-12 {
            return Err(Error::InvalidSigmaGrid("directional scales live on (0, 1]".into()));
        }
        let lambdas: Vec<f64> = (0..grid.len()).map(|i| grid.frequency_norm_sq(i)).collect();
        let top = lambdas.iter().copied().fold(0.0, f64::max);
        let required = required_omegas(top.sqrt());
        if omega_count < required {
            return Err(Error::OmegaCount { given: omega_count, required });
        }
        frame.check_coverage(top, COVERAGE_TOLERANCE)?;
        let table = frame.gains(&lambdas);
        let k = omega_count;
        let dirs: Vec<(f64, f64)> = (0..k).map(|j| {
            let t = 2.0 * PI * j as f64 / k as f64;
            (t.cos(), t.sin())
        }).collect();
        let mut angular = vec![vec![0.0; grid.len()]; k];
        for i in 0..grid.len() {
            let xi = grid.frequency(i);
            let r = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
            if r == 0.0 {
                for row in &mut angular {
                    row[i] = 1.0;
                }
                continue;
            }
            let (u, v) = (xi[0] / r, xi[1] / r);
            let raw: Vec<f64> = dirs.iter().map(|(a, b)| bump(r.sqrt() * ((u - a).powi(2) + (v - b).powi(2)).sqrt())).collect();
            let norm: f64 = raw.iter().map(|x| x * x).sum::<f64>() / k as f64;
            for (row, x) in angular.iter_mut().zip(&raw) {
                row[i] = x / norm.sqrt();
            }
        }
        let m = frame.sigma.len();
        let slots = scale_slots(&frame.sigma);
        let mut channels: Vec<Channel> = (0..k)
            .map(|j| {
                let (c, s) = dirs[j];
                Channel::new(ChannelIndex::Omega(j), Some(j), 1.0 / k as f64, (0..m).collect()).at([c, s, 0.0])
            })
            .collect();
        channels.push(Channel::new(ChannelIndex::Completion, None, 1.0, vec![m]));
        let layout = Arc::new(Layout::new(Family::Directional, *grid, vec![grid.cell_volume(); grid.len()], slots, channels)?);
        Ok(Directional { engine: FourierEngine::new(grid), frame, table, angular, layout })
    }

    pub fn omega_count(&self) -> usize {
        self.angular.len()
    }

    /// Angle of direction `k`.
    pub fn omega(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.angular.len() as f64
    }

    pub fn frame(&self) -> &ScaleFrame {
        &self.frame
    }

    /// Angular factor `phi_k` in FFT order.
    pub fn angular(&self, k: usize) -> &[f64] {
        &self.angular[k]
    }

    fn symbol(&self, b: usize, i: usize) -> f64 {
        let m = self.table.scales();
        let k = self.angular.len();
        if b < k * m {
            self.table.gain(i, b % m) * self.angular[b / m][i]
        } else {
            self.table.completion(i)
        }
    }
}

impl WavePacketTransform for Directional {
    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    fn analyze(&self, f: &Field) -> Result<PhaseSpaceField> {
        self.check_field(f)?;
        let spectrum = self.engine.to_coeffs(f.values());
        let blocks = self.angular.len() * self.table.scales() + 1;
        let values = lift(&self.engine, &spectrum, blocks, |b, i| self.symbol(b, i));
        PhaseSpaceField::new(self.layout.clone(), values)
    }

    fn synthesize(&self, field: &PhaseSpaceField) -> Result<Field> {
        self.check_phase(field)?;
        let main = self.angular.len() * self.table.scales();
        let w = self.frame.sigma.weight() / self.angular.len() as f64;
        let acc = lower(&self.engine, field.values(), self.grid().len(), |b, i| {
            let s = self.symbol(b, i);
            if b < main {
                w * s
            } else {
                s
            }
        });
        Field::new(*self.grid(), self.engine.to_values(&acc))
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::*;
    use crate::grid::sample_function;
    use crate::spectral::{Normalization, SigmaGrid, Window, WindowVariant};
    use crate::C64;

    fn frame(grid: &Grid, mode: Normalization, ppd: usize) -> ScaleFrame {
        let w = Window::new(WindowVariant::default()).unwrap();
        let top = grid.max_frequency().powi(2);
        ScaleFrame::new(w.clone(), SigmaGrid::covering(&w, top, 1.0, ppd, 1e-12).unwrap(), mode)
    }

    #[test]
    fn too_few_directions_report_the_minimum() {
        let grid = Grid::new(2, 32, 8.0).unwrap();
        let need = required_omegas(grid.max_frequency());
        match Directional::new(&grid, frame(&grid, Normalization::Discrete, 12), need - 1) {
            Err(Error::OmegaCount { required, .. }) => assert_eq!(required, need),
            _ => panic!("expected an omega count error"),
        }
    }

    #[test]
    fn identities_with_completion() {
        let grid = Grid::new(2, 32, 8.0).unwrap();
        let k = required_omegas(grid.max_frequency());
        let t = Directional::new(&grid, frame(&grid, Normalization::Discrete, 12), k).unwrap();
        check_identities(&t, 9, 1e-10);
    }

    #[test]
    fn sector_concentrates_near_its_direction() {
        let grid = Grid::new(2, 32, 8.0).unwrap();
        let t = Directional::new(&grid, frame(&grid, Normalization::Discrete, 12), 24).unwrap();
        let theta = t.omega(3);
        let step = grid.frequency_step();
        let (a, b) = ((4.0 * theta.cos()).round(), (4.0 * theta.sin()).round());
        let f = sample_function(&grid, |x| C64::from_polar(1.0, step * (a * x[0] + b * x[1])));
        let lifted = t.analyze(&f).unwrap();
        let masses: Vec<f64> = (0..24).map(|k| lifted.restricted(|c| c.index == ChannelIndex::Omega(k)).mass()).collect();
        let best = masses.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).unwrap().0;
        let target = b.atan2(a).rem_euclid(2.0 * PI);
        let nearest = (0..24).min_by(|&i, &j| {
            let di = (t.omega(i) - target).abs().min(2.0 * PI - (t.omega(i) - target).abs());
            let dj = (t.omega(j) - target).abs().min(2.0 * PI - (t.omega(j) - target).abs());
            di.total_cmp(&dj)
        });
        assert_eq!(Some(best), nearest);
        let opposite = (best + 12) % 24;
        assert!(masses[opposite] < 1e-20);
    }

    #[test]
    fn radial_input_is_symmetric_under_lattice_rotations() {
        let grid = Grid::new(2, 32, 8.0).unwrap();
        let t = Directional::new(&grid, frame(&grid, Normalization::Discrete, 12), 32).unwrap();
        let f = sample_function(&grid, |x| C64::new((-(x[0] * x[0] + x[1] * x[1]) / 4.0).exp(), 0.0));
        let lifted = t.analyze(&f).unwrap();
        let masses: Vec<f64> = (0..32).map(|k| lifted.restricted(|c| c.index == ChannelIndex::Omega(k)).mass()).collect();
        for k in 0..32 {
            let quarter = masses[(k + 8) % 32];
            let mirror = masses[(32 - k) % 32];
            assert!((masses[k] - quarter).abs() < 1e-8 * masses[k]);
            assert!((masses[k] - mirror).abs() < 1e-8 * masses[k]);
        }
        let (lo, hi) = masses.iter().fold((f64::MAX, 0.0f64), |(a, b), &m| (a.min(m), b.max(m)));
        assert!(hi / lo < 1.5, "spread {}", hi / lo);
    }
}
