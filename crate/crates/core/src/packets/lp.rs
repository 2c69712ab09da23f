use std::sync::Arc;

use super::{lift, lower, scalar_layout, scalar_symbol, ChannelIndex, Family, Layout, PhaseSpaceField, WavePacketTransform, COVERAGE_TOLERANCE};
use crate::error::Result;
use crate::grid::{Field, FourierEngine, Grid};
use crate::spectral::{GainTable, ScaleFrame};

/// Littlewood-Paley lifting `f -> psi(sigma |D|) f` with the low-frequency
/// completion `rho_0(D) f`.
pub struct LittlewoodPaley {
    engine: FourierEngine,
    frame: ScaleFrame,
    table: GainTable,
    layout: Arc<Layout>,
}

impl LittlewoodPaley {
    pub fn new(grid: &Grid, frame: ScaleFrame) -> Result<Self> {
        let lambdas: Vec<f64> = (0..grid.len()).map(|i| grid.frequency_norm_sq(i)).collect();
        let top = lambdas.iter().copied().fold(0.0, f64::max);
        frame.check_coverage(top, COVERAGE_TOLERANCE)?;
        let table = frame.gains(&lambdas);
        let weights = vec![grid.cell_volume(); grid.len()];
        let layout = scalar_layout(Family::LittlewoodPaley, grid, weights, &frame.sigma, ChannelIndex::Scalar)?;
        Ok(LittlewoodPaley { engine: FourierEngine::new(grid), frame, table, layout })
    }

    pub fn frame(&self) -> &ScaleFrame {
        &self.frame
    }

    /// Gains indexed by FFT position.
    pub fn gains(&self) -> &GainTable {
        &self.table
    }
}

impl WavePacketTransform for LittlewoodPaley {
    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    fn analyze(&self, f: &Field) -> Result<PhaseSpaceField> {
        self.check_field(f)?;
        let spectrum = super::Basis::to_coeffs(&self.engine, f.values());
        let blocks = self.table.scales() + 1;
        let values = lift(&self.engine, &spectrum, blocks, |b, i| scalar_symbol(&self.table, b, i));
        PhaseSpaceField::new(self.layout.clone(), values)
    }

    fn synthesize(&self, field: &PhaseSpaceField) -> Result<Field> {
        self.check_phase(field)?;
        let w = self.frame.sigma.weight();
        let m = self.table.scales();
        let acc = lower(&self.engine, field.values(), self.grid().len(), |b, i| {
            let g = scalar_symbol(&self.table, b, i);
            if b < m {
                w * g
            } else {
                g
            }
        });
        Field::new(*self.grid(), super::Basis::to_values(&self.engine, &acc))
    }
}
