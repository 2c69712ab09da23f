use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{Basis, Channel, ChannelIndex, Family, Layout, PhaseSpaceField, Slot, SlotKind, WavePacketTransform};
use crate::error::{Error, Result};
use crate::grid::{Field, FourierEngine, Grid};
use crate::par;
use crate::quad;
use crate::spectral::{bump, Normalization};

/// Spacing of the eta lattice and radius of the frequency window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationParams {
    pub eta_step: f64,
    pub radius: f64,
}

impl ModulationParams {
    /// `eta_step = multiple * pi / L` with a window radius of eight steps.
    pub fn on_lattice(grid: &Grid, multiple: usize) -> Self {
        let eta_step = multiple as f64 * grid.frequency_step();
        ModulationParams { eta_step, radius: 8.0 * eta_step }
    }
}

/// Modulation lifting `f -> psi(D + eta) f` over a sublattice of the
/// frequency lattice.
pub struct Modulation {
    engine: FourierEngine,
    params: ModulationParams,
    /// Per channel: `(fft index, symbol)` on the window's support.
    symbols: Vec<Vec<(usize, f64)>>,
    etas: Vec<[i64; 3]>,
    cell: f64,
    layout: Arc<Layout>,
}

fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

impl Modulation {
    pub fn new(grid: &Grid, params: ModulationParams, mode: Normalization) -> Result<Self> {
        let d = grid.d();
        let step = grid.frequency_step();
        let ratio = params.eta_step / step;
        if !(ratio >= 1.0 - 1e-9) || (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::LatticeIncompatible(format!(
                "eta step {} is not a positive multiple of pi/L = {step}",
                params.eta_step
            )));
        }
        if !(params.radius >= params.eta_step * (d as f64).sqrt()) {
            return Err(Error::InvalidArgument(format!(
                "window radius {} does not cover the eta lattice cell",
                params.radius
            )));
        }
        let r = params.radius;
        let radial = quad::integrate(|t| bump(t / r).powi(2) * t.powi(d as i32 - 1), 0.0, r, 1e-15 * r.powi(d as i32));
        let c = (sphere_area(d) * radial).sqrt().recip();
        let psi = |xi: &[f64], eta: &[f64]| {
            let q: f64 = xi.iter().zip(eta).map(|(a, b)| (a + b).powi(2)).sum();
            c * bump(q.sqrt() / r)
        };
        let cell = params.eta_step.powi(d as i32);
        let xi_top = grid.max_frequency();
        let lo = ((-xi_top - r) / params.eta_step).floor() as i64;
        let hi = ((xi_top + r) / params.eta_step).ceil() as i64;
        let span = (hi - lo + 1) as usize;
        let total = span.pow(d as u32);
        let frequencies: Vec<[f64; 3]> = (0..grid.len()).map(|i| grid.frequency(i)).collect();
        let candidates = par::map(total, |t| {
            let mut nu = [0i64; 3];
            let mut rest = t;
            for a in (0..d).rev() {
                nu[a] = lo + (rest % span) as i64;
                rest /= span;
            }
            let eta: Vec<f64> = (0..d).map(|a| nu[a] as f64 * params.eta_step).collect();
            let support: Vec<(usize, f64)> = frequencies
                .iter()
                .enumerate()
                .filter_map(|(i, xi)| {
                    let v = psi(&xi[..d], &eta);
                    (v > 0.0).then_some((i, v))
                })
                .collect();
            (nu, support)
        });
        let mut etas = Vec::new();
        let mut symbols = Vec::new();
        for (nu, support) in candidates {
            if !support.is_empty() {
                etas.push(nu);
                symbols.push(support);
            }
        }
        if mode == Normalization::Discrete {
            let mut s = vec![0.0; grid.len()];
            for sym in &symbols {
                for &(i, v) in sym {
                    s[i] += cell * v * v;
                }
            }
            for sym in &mut symbols {
                for (i, v) in sym.iter_mut() {
                    *v /= s[*i].sqrt();
                }
            }
        }
        let slots = vec![Slot { kind: SlotKind::Unit, sigma: 1.0, weight: 1.0 }];
        let channels = etas
            .iter()
            .enumerate()
            .map(|(k, nu)| {
                let eta = [nu[0] as f64 * params.eta_step, nu[1] as f64 * params.eta_step, nu[2] as f64 * params.eta_step];
                Channel::new(ChannelIndex::Eta(*nu), Some(k), cell, vec![0]).at(eta)
            })
            .collect();
        let layout = Arc::new(Layout::new(Family::Modulation, *grid, vec![grid.cell_volume(); grid.len()], slots, channels)?);
        Ok(Modulation { engine: FourierEngine::new(grid), params, symbols, etas, cell, layout })
    }

    pub fn params(&self) -> &ModulationParams {
        &self.params
    }

    /// Lattice coordinates of each channel; `eta = nu * eta_step`.
    pub fn etas(&self) -> &[[i64; 3]] {
        &self.etas
    }

    /// Quadrature weight `eta_step^d` of one channel.
    pub fn cell(&self) -> f64 {
        self.cell
    }

    /// `(fft index, symbol)` pairs of channel `c`.
    pub fn symbol(&self, c: usize) -> &[(usize, f64)] {
        &self.symbols[c]
    }

    /// `sum_eta cell * symbol^2` at each frequency.
    pub fn frame_sum(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.grid().len()];
        for sym in &self.symbols {
            for &(i, v) in sym {
                s[i] += self.cell * v * v;
            }
        }
        s
    }
}

impl WavePacketTransform for Modulation {
    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    fn analyze(&self, f: &Field) -> Result<PhaseSpaceField> {
        self.check_field(f)?;
        let spectrum = self.engine.to_coeffs(f.values());
        let len = spectrum.len();
        let blocks = par::map(self.symbols.len(), |c| {
            let mut work = vec![C64::new(0.0, 0.0); len];
            for &(i, v) in &self.symbols[c] {
                work[i] = spectrum[i] * v;
            }
            self.engine.to_values(&work)
        });
        PhaseSpaceField::new(self.layout.clone(), blocks.concat())
    }

    fn synthesize(&self, field: &PhaseSpaceField) -> Result<Field> {
        self.check_phase(field)?;
        let len = self.grid().len();
        let parts = par::map(self.symbols.len(), |c| {
            let spec = self.engine.to_coeffs(field.block(c, 0));
            self.symbols[c].iter().map(|&(i, v)| (i, spec[i] * v * self.cell)).collect::<Vec<_>>()
        });
        let mut acc = vec![C64::new(0.0, 0.0); len];
        for part in parts {
            for (i, v) in part {
                acc[i] += v;
            }
        }
        Field::new(*self.grid(), self.engine.to_values(&acc))
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::*;
    use crate::grid::sample_function;

    fn transform(mode: Normalization) -> Modulation {
        let grid = Grid::new(1, 128, 8.0).unwrap();
        Modulation::new(&grid, ModulationParams::on_lattice(&grid, 2), mode).unwrap()
    }

    #[test]
    fn discrete_identities_and_tight_frame() {
        let t = transform(Normalization::Discrete);
        check_identities(&t, 5, 1e-10);
        assert!(t.frame_sum().iter().all(|s| (s - 1.0).abs() < 1e-12));
    }

    #[test]
    fn raw_window_is_already_nearly_tight() {
        let t = transform(Normalization::Raw);
        let worst = t.frame_sum().iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-4, "frame sum defect {worst:e}");
    }

    #[test]
    fn incompatible_lattice_is_rejected() {
        let grid = Grid::new(1, 64, 4.0).unwrap();
        let p = ModulationParams { eta_step: 1.3 * grid.frequency_step(), radius: 8.0 };
        assert!(matches!(Modulation::new(&grid, p, Normalization::Discrete), Err(Error::LatticeIncompatible(_))));
    }

    #[test]
    fn single_frequency_hits_only_covering_channels() {
        let t = transform(Normalization::Discrete);
        let k = 7;
        let xi0 = k as f64 * t.grid().frequency_step();
        let f = sample_function(t.grid(), |x| C64::from_polar(1.0, xi0 * x[0]));
        let lifted = t.analyze(&f).unwrap();
        for (c, nu) in t.etas().iter().enumerate() {
            let eta = nu[0] as f64 * t.params().eta_step;
            let energy: f64 = lifted.block(c, 0).iter().map(|v| v.norm_sqr()).sum();
            if (xi0 + eta).abs() >= t.params().radius {
                assert!(energy < 1e-24);
            }
        }
    }

    #[test]
    fn distant_channels_have_disjoint_symbols() {
        let t = transform(Normalization::Discrete);
        let diam = 2.0 * t.params().radius;
        for a in 0..t.etas().len() {
            for b in 0..t.etas().len() {
                let gap = (t.etas()[a][0] - t.etas()[b][0]).abs() as f64 * t.params().eta_step;
                if gap > diam {
                    let sa: std::collections::HashSet<usize> = t.symbol(a).iter().map(|p| p.0).collect();
                    assert!(t.symbol(b).iter().all(|p| !sa.contains(&p.0)));
                }
            }
        }
    }
}
