//! Analysis maps `W` from fields into phase space and their quadrature
//! adjoints `W*`, one per decomposition family.
//!
//! Every family satisfies `W*W = Pi` where `Pi` is the projection returned by
//! [`WavePacketTransform::project`] (the identity except for the Gaussian
//! family, which drops the zero mode). In discrete-normalized mode this holds
//! to rounding; in raw mode up to the sigma quadrature error.

mod crit;
mod directional;
mod gauss;
mod lp;
mod modulation;
mod operator;
mod phase;

use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::{Field, FourierEngine, Grid};
use crate::par;
use crate::spectral::{GainTable, SigmaGrid, SpectralDecomp};

pub use crit::{remainder_operator, CriticalPackets, RemainderOperator};
pub use directional::{required_omegas, Directional};
pub use gauss::GaussianPackets;
pub use lp::LittlewoodPaley;
pub use modulation::{Modulation, ModulationParams};
pub use operator::OperatorPackets;
pub use phase::{write_phase_field, Channel, ChannelIndex, Family, Layout, PhaseSpaceField, Slot, SlotKind};

/// Largest truncation defect accepted at the top eigenvalue.
pub const COVERAGE_TOLERANCE: f64 = 1e-10;

pub trait WavePacketTransform: Send + Sync {
    fn layout(&self) -> &Arc<Layout>;

    fn analyze(&self, f: &Field) -> Result<PhaseSpaceField>;

    fn synthesize(&self, field: &PhaseSpaceField) -> Result<Field>;

    /// Projection onto the range on which `W*W` is the identity.
    fn project(&self, f: &Field) -> Result<Field> {
        self.check_field(f)?;
        Ok(f.clone())
    }

    fn family(&self) -> Family {
        self.layout().family()
    }

    fn grid(&self) -> &Grid {
        self.layout().grid()
    }

    /// Inner product of fields in the measure used by the phase-space weights.
    fn field_inner(&self, f: &Field, g: &Field) -> C64 {
        f.values()
            .iter()
            .zip(g.values())
            .zip(self.layout().point_weights())
            .map(|((a, b), w)| a * b.conj() * w)
            .sum()
    }

    fn field_norm(&self, f: &Field) -> f64 {
        self.field_inner(f, f).re.max(0.0).sqrt()
    }

    fn check_field(&self, f: &Field) -> Result<()> {
        if f.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    fn check_phase(&self, field: &PhaseSpaceField) -> Result<()> {
        if !field.layout().same_shape(self.layout()) {
            return Err(Error::FamilyMismatch(format!(
                "{:?} field given to a {:?} transform",
                field.family(),
                self.family()
            )));
        }
        Ok(())
    }

    /// `W W* F`, the orthogonal projection onto the range of `W`.
    fn reproduce(&self, field: &PhaseSpaceField) -> Result<PhaseSpaceField> {
        self.analyze(&self.synthesize(field)?)
    }
}

/// Unitary change of basis shared by the multiplier-type families.
pub(crate) trait Basis: Sync {
    fn to_coeffs(&self, values: &[C64]) -> Vec<C64>;
    fn to_values(&self, coeffs: &[C64]) -> Vec<C64>;
}

impl Basis for FourierEngine {
    fn to_coeffs(&self, values: &[C64]) -> Vec<C64> {
        let mut w = values.to_vec();
        self.forward(&mut w);
        w
    }

    fn to_values(&self, coeffs: &[C64]) -> Vec<C64> {
        let mut w = coeffs.to_vec();
        self.inverse(&mut w);
        w
    }
}

impl Basis for SpectralDecomp {
    fn to_coeffs(&self, values: &[C64]) -> Vec<C64> {
        self.to_spectral(values)
    }

    fn to_values(&self, coeffs: &[C64]) -> Vec<C64> {
        self.from_spectral(coeffs)
    }
}

/// Concatenation over `b < blocks` of `B^{-1}(symbol(b, .) * coeffs)`.
pub(crate) fn lift<B, S>(basis: &B, coeffs: &[C64], blocks: usize, symbol: S) -> Vec<C64>
where
    B: Basis + ?Sized,
    S: Fn(usize, usize) -> f64 + Sync + Send,
{
    par::map(blocks, |b| {
        let c: Vec<C64> = coeffs.iter().enumerate().map(|(i, v)| v * symbol(b, i)).collect();
        basis.to_values(&c)
    })
    .concat()
}

/// `sum_b symbol(b, .) * B(values[b])`, summed in block order.
pub(crate) fn lower<B, S>(basis: &B, values: &[C64], block_len: usize, symbol: S) -> Vec<C64>
where
    B: Basis + ?Sized,
    S: Fn(usize, usize) -> f64 + Sync + Send,
{
    let blocks = values.len() / block_len;
    let parts = par::map(blocks, |b| {
        let mut c = basis.to_coeffs(&values[b * block_len..(b + 1) * block_len]);
        for (i, v) in c.iter_mut().enumerate() {
            *v *= symbol(b, i);
        }
        c
    });
    let width = parts.first().map_or(0, |p| p.len());
    let mut acc = vec![C64::new(0.0, 0.0); width];
    for part in parts {
        for (a, v) in acc.iter_mut().zip(part) {
            *a += v;
        }
    }
    acc
}

/// Slots for the sigma nodes followed by one completion slot on `[max, e max]`.
pub(crate) fn scale_slots(sigma: &SigmaGrid) -> Vec<Slot> {
    let mut slots: Vec<Slot> = sigma
        .nodes()
        .iter()
        .enumerate()
        .map(|(m, &s)| Slot { kind: SlotKind::Scale(m), sigma: s, weight: sigma.weight() })
        .collect();
    slots.push(Slot { kind: SlotKind::Completion, sigma: sigma.sigma_max() * 0.5f64.exp(), weight: 1.0 });
    slots
}

/// Layout with one main channel over all sigma nodes and a completion channel.
pub(crate) fn scalar_layout(
    family: Family,
    grid: &Grid,
    point_weights: Vec<f64>,
    sigma: &SigmaGrid,
    index: ChannelIndex,
) -> Result<Arc<Layout>> {
    let slots = scale_slots(sigma);
    let m = sigma.len();
    let channels = vec![
        Channel::new(index, Some(0), 1.0, (0..m).collect()),
        Channel::new(ChannelIndex::Completion, Some(0), 1.0, vec![m]),
    ];
    Ok(Arc::new(Layout::new(family, *grid, point_weights, slots, channels)?))
}

/// Symbol of block `b` for the scalar layout: node gains then the completion.
pub(crate) fn scalar_symbol(table: &GainTable, b: usize, i: usize) -> f64 {
    if b < table.scales() {
        table.gain(i, b)
    } else {
        table.completion(i)
    }
}
