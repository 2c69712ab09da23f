use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    LittlewoodPaley,
    Modulation,
    Directional,
    Operator,
    Gaussian,
    Critical,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::LittlewoodPaley,
        Family::Modulation,
        Family::Directional,
        Family::Operator,
        Family::Gaussian,
        Family::Critical,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelIndex {
    Scalar,
    Completion,
    Eta([i64; 3]),
    Omega(usize),
    ScalarOp,
    GaussMain,
    GaussRemainder,
    Cube(usize),
    CubeRemainder(usize),
}

impl ChannelIndex {
    pub fn is_remainder(&self) -> bool {
        matches!(self, ChannelIndex::GaussRemainder | ChannelIndex::CubeRemainder(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    /// Node `m` of the sigma grid.
    Scale(usize),
    /// Low-frequency completion beyond the top of the sigma grid.
    Completion,
    /// Remainder band.
    Remainder,
    /// Families without a scale variable.
    Unit,
}

/// One point of the scale variable with its quadrature weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub kind: SlotKind,
    pub sigma: f64,
    pub weight: f64,
}

/// A channel of phase space: a set of slots over a set of grid points.
///
/// Values are stored slot-major. `group` is the outermost index the mixed
/// norms iterate over; `None` marks a channel shared by every group.
/// `cutoff` masks entry `(slot, point)` whenever the slot's sigma exceeds
/// `cutoff[point]`. `coordinate` is the channel's phase-space label (`eta`,
/// the direction `omega`, or a cube centre) where one exists.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    pub index: ChannelIndex,
    pub group: Option<usize>,
    pub weight: f64,
    pub points: Option<Arc<[usize]>>,
    pub slots: Vec<usize>,
    pub cutoff: Option<Arc<[f64]>>,
    pub coordinate: Option<[f64; 3]>,
    offset: usize,
}

impl Channel {
    pub fn new(index: ChannelIndex, group: Option<usize>, weight: f64, slots: Vec<usize>) -> Self {
        Channel { index, group, weight, points: None, slots, cutoff: None, coordinate: None, offset: 0 }
    }

    pub fn at(mut self, coordinate: [f64; 3]) -> Self {
        self.coordinate = Some(coordinate);
        self
    }

    pub fn on_points(mut self, points: Arc<[usize]>) -> Self {
        self.points = Some(points);
        self
    }

    pub fn with_cutoff(mut self, cutoff: Arc<[f64]>) -> Self {
        self.cutoff = Some(cutoff);
        self
    }

    pub fn offset(&self) -> usize {
        self.offset
    }
}

/// Shape of a phase-space field: grid, slots, channels and quadrature weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    family: Family,
    grid: Grid,
    point_weights: Vec<f64>,
    slots: Vec<Slot>,
    channels: Vec<Channel>,
    groups: usize,
    len: usize,
}

impl Layout {
    pub fn new(family: Family, grid: Grid, point_weights: Vec<f64>, slots: Vec<Slot>, mut channels: Vec<Channel>) -> Result<Self> {
        if point_weights.len() != grid.len() {
            return Err(Error::InvalidArgument("one point weight per grid point is required".into()));
        }
        let mut offset = 0;
        let mut groups = 0;
        for c in &mut channels {
            if c.slots.iter().any(|&s| s >= slots.len()) {
                return Err(Error::InvalidArgument("channel refers to an unknown slot".into()));
            }
            if let Some(g) = c.group {
                groups = groups.max(g + 1);
            }
            if let Some(cut) = &c.cutoff {
                let count = c.points.as_ref().map_or(grid.len(), |p| p.len());
                if cut.len() != count {
                    return Err(Error::InvalidArgument("cutoff needs one value per channel point".into()));
                }
            }
            c.offset = offset;
            let points = c.points.as_ref().map_or(grid.len(), |p| p.len());
            offset += points * c.slots.len();
        }
        Ok(Layout { family, grid, point_weights, slots, channels, groups: groups.max(1), len: offset })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn point_weights(&self) -> &[f64] {
        &self.point_weights
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    /// Number of distinct non-shared groups.
    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn point_count(&self, c: usize) -> usize {
        self.channels[c].points.as_ref().map_or(self.grid.len(), |p| p.len())
    }

    /// Grid index of the `p`-th point of channel `c`.
    pub fn point(&self, c: usize, p: usize) -> usize {
        self.channels[c].points.as_ref().map_or(p, |pts| pts[p])
    }

    /// Index range of the block `(c, s)` in the value vector.
    pub fn block_range(&self, c: usize, s: usize) -> std::ops::Range<usize> {
        let n = self.point_count(c);
        let start = self.channels[c].offset + s * n;
        start..start + n
    }

    pub fn active(&self, c: usize, s: usize, p: usize) -> bool {
        let ch = &self.channels[c];
        match &ch.cutoff {
            Some(cut) => self.slots[ch.slots[s]].sigma <= cut[p],
            None => true,
        }
    }

    /// Product of channel, slot and point weights for one entry.
    pub fn entry_weight(&self, c: usize, s: usize, p: usize) -> f64 {
        let ch = &self.channels[c];
        ch.weight * self.slots[ch.slots[s]].weight * self.point_weights[self.point(c, p)]
    }

    pub(crate) fn same_shape(&self, other: &Layout) -> bool {
        std::ptr::eq(self, other) || self == other
    }
}

/// A complex function on the discretized phase space of a decomposition.
#[derive(Clone, Debug)]
pub struct PhaseSpaceField {
    layout: Arc<Layout>,
    values: Vec<C64>,
    excluded: f64,
}

impl PhaseSpaceField {
    pub fn new(layout: Arc<Layout>, values: Vec<C64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::InvalidArgument(format!(
                "layout holds {} entries, got {}",
                layout.len(),
                values.len()
            )));
        }
        Ok(PhaseSpaceField { layout, values, excluded: 0.0 })
    }

    pub fn zeros(layout: Arc<Layout>) -> Self {
        let len = layout.len();
        PhaseSpaceField { layout, values: vec![C64::new(0.0, 0.0); len], excluded: 0.0 }
    }

    pub(crate) fn with_excluded(mut self, excluded: f64) -> Self {
        self.excluded = excluded;
        self
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn family(&self) -> Family {
        self.layout.family
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    /// Squared norm of the input that analysis discarded (zero modes outside
    /// the admissible range).
    pub fn excluded_mass(&self) -> f64 {
        self.excluded
    }

    pub fn block(&self, c: usize, s: usize) -> &[C64] {
        &self.values[self.layout.block_range(c, s)]
    }

    pub fn block_mut(&mut self, c: usize, s: usize) -> &mut [C64] {
        let r = self.layout.block_range(c, s);
        &mut self.values[r]
    }

    /// Zero every entry excluded by a channel cutoff.
    pub fn apply_mask(&mut self) {
        let layout = self.layout.clone();
        for (c, ch) in layout.channels().iter().enumerate() {
            if ch.cutoff.is_none() {
                continue;
            }
            for s in 0..ch.slots.len() {
                let r = layout.block_range(c, s);
                for (p, v) in self.values[r].iter_mut().enumerate() {
                    if !layout.active(c, s, p) {
                        *v = C64::new(0.0, 0.0);
                    }
                }
            }
        }
    }

    /// Keep only the channels selected by `keep`.
    pub fn restricted<P: Fn(&Channel) -> bool>(&self, keep: P) -> Self {
        let mut out = self.clone();
        for (c, ch) in self.layout.channels().iter().enumerate() {
            if !keep(ch) {
                for s in 0..ch.slots.len() {
                    out.block_mut(c, s).fill(C64::new(0.0, 0.0));
                }
            }
        }
        out
    }

    /// Weighted inner product `sum weights F conj(G)`.
    pub fn inner(&self, other: &PhaseSpaceField) -> Result<C64> {
        self.check(other)?;
        let l = &self.layout;
        let mut total = C64::new(0.0, 0.0);
        for (c, ch) in l.channels().iter().enumerate() {
            let mut channel = C64::new(0.0, 0.0);
            for (s, &slot) in ch.slots.iter().enumerate() {
                let r = l.block_range(c, s);
                let mut block = C64::new(0.0, 0.0);
                for (p, (a, b)) in self.values[r.clone()].iter().zip(&other.values[r]).enumerate() {
                    block += a * b.conj() * l.point_weights[l.point(c, p)];
                }
                channel += block * l.slots[slot].weight;
            }
            total += channel * ch.weight;
        }
        Ok(total)
    }

    /// Weighted squared mass `sum weights |F|^2`.
    pub fn mass(&self) -> f64 {
        self.inner(self).map(|v| v.re).unwrap_or(0.0)
    }

    /// Weighted l^2 norm.
    pub fn norm(&self) -> f64 {
        self.mass().max(0.0).sqrt()
    }

    pub fn scaled(&self, a: C64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= a;
        }
        out
    }

    pub fn add(&self, other: &PhaseSpaceField) -> Result<Self> {
        self.check(other)?;
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &PhaseSpaceField) -> Result<Self> {
        self.check(other)?;
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a -= b;
        }
        Ok(out)
    }

    fn check(&self, other: &PhaseSpaceField) -> Result<()> {
        if !self.layout.same_shape(&other.layout) {
            return Err(Error::FamilyMismatch("phase-space layouts differ".into()));
        }
        Ok(())
    }
}

/// Writes a JSON header line (family, grid, slots, channels) followed by the
/// value tensor as little-endian `(re, im)` pairs.
pub fn write_phase_field<W: Write>(field: &PhaseSpaceField, mut out: W) -> Result<()> {
    let l = field.layout();
    let channels: Vec<serde_json::Value> = l
        .channels()
        .iter()
        .enumerate()
        .map(|(c, ch)| {
            serde_json::json!({
                "index": ch.index,
                "group": ch.group,
                "weight": ch.weight,
                "points": l.point_count(c),
                "slots": ch.slots,
                "offset": ch.offset,
                "masked": ch.cutoff.is_some(),
            })
        })
        .collect();
    let header = serde_json::json!({
        "format": "wavepacket-phase v1",
        "family": l.family(),
        "grid": { "d": l.grid().d(), "n": l.grid().n(), "half_extent": l.grid().half_extent() },
        "slots": l.slots(),
        "channels": channels,
        "values": field.values().len(),
    });
    serde_json::to_writer(&mut out, &header).map_err(|e| Error::Format(e.to_string()))?;
    out.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(16 * field.values().len());
    for v in field.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}
