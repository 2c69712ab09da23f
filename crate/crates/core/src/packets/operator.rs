use std::sync::Arc;

use super::{lift, lower, scalar_layout, scalar_symbol, Basis, ChannelIndex, Family, Layout, PhaseSpaceField, WavePacketTransform, COVERAGE_TOLERANCE};
use crate::error::Result;
use crate::grid::Field;
use crate::spectral::{GainTable, ScaleFrame, SpectralDecomp};

/// Calculus lifting `f -> psi(sigma^2 A) f` for any operator kind. Zero
/// modes land in the completion channel.
pub struct OperatorPackets {
    decomp: Arc<SpectralDecomp>,
    frame: ScaleFrame,
    table: GainTable,
    layout: Arc<Layout>,
}

impl OperatorPackets {
    pub fn new(decomp: Arc<SpectralDecomp>, frame: ScaleFrame) -> Result<Self> {
        frame.check_coverage(decomp.lambda_max(), COVERAGE_TOLERANCE)?;
        let table = frame.gains(decomp.spectral_lambdas());
        let layout = scalar_layout(Family::Operator, decomp.grid(), decomp.point_weights(), &frame.sigma, ChannelIndex::ScalarOp)?;
        Ok(OperatorPackets { decomp, frame, table, layout })
    }

    pub fn decomp(&self) -> &Arc<SpectralDecomp> {
        &self.decomp
    }

    pub fn frame(&self) -> &ScaleFrame {
        &self.frame
    }

    /// Gains indexed by spectral-coefficient position.
    pub fn gains(&self) -> &GainTable {
        &self.table
    }
}

impl WavePacketTransform for OperatorPackets {
    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    /// Projection onto the span of the retained eigenvectors (the identity for
    /// grid-based kinds).
    fn project(&self, f: &Field) -> Result<Field> {
        self.check_field(f)?;
        Field::new(*self.grid(), self.decomp.to_values(&self.decomp.to_coeffs(f.values())))
    }

    fn analyze(&self, f: &Field) -> Result<PhaseSpaceField> {
        self.check_field(f)?;
        let coeffs = self.decomp.to_coeffs(f.values());
        let values = lift(self.decomp.as_ref(), &coeffs, self.table.scales() + 1, |b, i| scalar_symbol(&self.table, b, i));
        PhaseSpaceField::new(self.layout.clone(), values)
    }

    fn synthesize(&self, field: &PhaseSpaceField) -> Result<Field> {
        self.check_phase(field)?;
        let w = self.frame.sigma.weight();
        let m = self.table.scales();
        let acc = lower(self.decomp.as_ref(), field.values(), self.grid().len(), |b, i| {
            let g = scalar_symbol(&self.table, b, i);
            if b < m {
                w * g
            } else {
                g
            }
        });
        Field::new(*self.grid(), self.decomp.to_values(&acc))
    }
}
