use std::f64::consts::LN_2;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

use super::{Channel, ChannelIndex, Family, Layout, PhaseSpaceField, Slot, SlotKind, WavePacketTransform, COVERAGE_TOLERANCE};
use crate::critical::CriticalPartition;
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::par;
use crate::spectral::{GainTable, ScaleFrame, SpectralDecomp};

/// Cube-localized tail `R_j = 1_Q tau_j(A) 1_Q` with
/// `tau_j = sum_{sigma_m > rho_j} Delta g_m^2 + rho_0^2`, stored as a dense
/// block on the grid points of `Q_j` together with its PSD square root.
#[derive(Clone, Debug)]
pub struct RemainderOperator {
    label: usize,
    members: Arc<[usize]>,
    block: DMatrix<f64>,
    root: DMatrix<f64>,
    min_eigenvalue: f64,
    max_eigenvalue: f64,
}

impl RemainderOperator {
    pub fn label(&self) -> usize {
        self.label
    }

    /// Grid indices of `Q_j`, ascending.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn block(&self) -> &DMatrix<f64> {
        &self.block
    }

    pub fn root(&self) -> &DMatrix<f64> {
        &self.root
    }

    /// Smallest eigenvalue before clamping.
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    /// Operator norm `||R_j||`.
    pub fn max_eigenvalue(&self) -> f64 {
        self.max_eigenvalue
    }

    fn apply_block(&self, m: &DMatrix<f64>, f: &[C64]) -> Vec<C64> {
        let local: Vec<C64> = self.members.iter().map(|&i| f[i]).collect();
        let mut out = vec![C64::new(0.0, 0.0); f.len()];
        for (r, &i) in self.members.iter().enumerate() {
            out[i] = (0..local.len()).map(|k| local[k] * m[(r, k)]).sum();
        }
        out
    }

    /// `R_j f` on the whole grid.
    pub fn apply(&self, f: &[C64]) -> Vec<C64> {
        self.apply_block(&self.block, f)
    }

    /// `R_j^{1/2} f` on the whole grid.
    pub fn apply_root(&self, f: &[C64]) -> Vec<C64> {
        self.apply_block(&self.root, f)
    }

    /// `<R_j f, f>` in sample coordinates (multiply by `h^d` for `L^2`).
    pub fn form(&self, f: &[C64]) -> f64 {
        self.apply(f).iter().zip(f).map(|(a, b)| (a * b.conj()).re).sum()
    }

    /// CSV `row,col,value` of the block in grid indices.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,value\n");
        for (r, &i) in self.members.iter().enumerate() {
            for (c, &k) in self.members.iter().enumerate() {
                out.push_str(&format!("{i},{k},{}\n", self.block[(r, c)]));
            }
        }
        out
    }
}

/// Tail multiplier of cube `j` at each eigenvalue (ascending order).
fn cube_tail(table: &GainTable, frame: &ScaleFrame, rho: f64) -> Vec<f64> {
    (0..table.len()).map(|i| table.tail(i, &frame.sigma, rho)).collect()
}

fn build_remainder(
    decomp: &SpectralDecomp,
    frame: &ScaleFrame,
    table: &GainTable,
    partition: &CriticalPartition,
    j: usize,
) -> Result<RemainderOperator> {
    let vectors = decomp
        .basis_matrix()
        .ok_or_else(|| Error::BasisMismatch("remainder operators need a dense decomposition".into()))?;
    let members: Arc<[usize]> = partition.members(j).into();
    let tau = cube_tail(table, frame, partition.cubes()[j].rho);
    let modes = decomp.len();
    let rows = DMatrix::from_fn(members.len(), modes, |r, k| vectors[(members[r], k)]);
    let scaled = DMatrix::from_fn(members.len(), modes, |r, k| rows[(r, k)] * tau[k]);
    let block = scaled * rows.transpose();
    let block = (&block + block.transpose()) * 0.5;
    let eig = SymmetricEigen::new(block.clone());
    let max_eigenvalue = eig.eigenvalues.iter().copied().fold(0.0f64, |a, v| a.max(v.abs()));
    let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::MAX, f64::min);
    if min_eigenvalue < -1e-10 * max_eigenvalue.max(f64::MIN_POSITIVE) {
        return Err(Error::NegativeRemainder { label: j, value: min_eigenvalue, scale: max_eigenvalue });
    }
    let sqrt = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt) * eig.eigenvectors.transpose();
    Ok(RemainderOperator { label: j, members, block, root, min_eigenvalue, max_eigenvalue })
}

/// `R_j` for cube `j` of `partition`.
pub fn remainder_operator(
    decomp: &SpectralDecomp,
    frame: &ScaleFrame,
    partition: &CriticalPartition,
    j: usize,
) -> Result<RemainderOperator> {
    check_context(decomp, partition)?;
    if j >= partition.len() {
        return Err(Error::InvalidArgument(format!("cube {j} does not exist")));
    }
    build_remainder(decomp, frame, &frame.gains(decomp.lambdas()), partition, j)
}

fn check_context(decomp: &SpectralDecomp, partition: &CriticalPartition) -> Result<()> {
    if !decomp.is_dense() || decomp.basis_matrix().is_none() {
        return Err(Error::BasisMismatch("the critical family needs a dense decomposition".into()));
    }
    if decomp.grid() != partition.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// Critical-cube lifting
/// `Wf(j, ., sigma) = 1_{sigma <= rho_j} psi(sigma^2 A)(1_{Q_j} f)
/// + 1_{[R, 2R]}(sigma) ln(2)^{-1/2} R_j^{1/2} f`.
///
/// The cube indicator is applied before the window, which is what makes
/// `W*W = sum_j (1_Q int_0^{rho_j} psi^2 1_Q + R_j) = I` exact.
pub struct CriticalPackets {
    decomp: Arc<SpectralDecomp>,
    frame: ScaleFrame,
    table: GainTable,
    partition: Arc<CriticalPartition>,
    remainders: Vec<RemainderOperator>,
    layout: Arc<Layout>,
    /// Slot positions `(node m)` carried by the main channel of each cube.
    cube_slots: Vec<Vec<usize>>,
}

impl CriticalPackets {
    pub fn new(decomp: Arc<SpectralDecomp>, frame: ScaleFrame, partition: Arc<CriticalPartition>) -> Result<Self> {
        check_context(&decomp, &partition)?;
        frame.check_coverage(decomp.lambda_max(), COVERAGE_TOLERANCE)?;
        let table = frame.gains(decomp.lambdas());
        let remainders = par::map(partition.len(), |j| build_remainder(&decomp, &frame, &table, &partition, j))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let nodes = frame.sigma.nodes();
        let mut slots: Vec<Slot> = nodes
            .iter()
            .enumerate()
            .map(|(m, &s)| Slot { kind: SlotKind::Scale(m), sigma: s, weight: frame.sigma.weight() })
            .collect();
        let r = partition.r_sup();
        slots.push(Slot { kind: SlotKind::Remainder, sigma: r * 2f64.sqrt(), weight: LN_2 });
        let rem = nodes.len();
        let mut channels = Vec::with_capacity(2 * partition.len());
        let mut cube_slots = Vec::with_capacity(partition.len());
        for (j, cube) in partition.cubes().iter().enumerate() {
            let own: Vec<usize> = (0..nodes.len()).filter(|&m| nodes[m] <= cube.rho).collect();
            channels.push(Channel::new(ChannelIndex::Cube(j), Some(j), 1.0, own.clone()).at(cube.center));
            channels.push(
                Channel::new(ChannelIndex::CubeRemainder(j), Some(j), 1.0, vec![rem])
                    .on_points(remainders[j].members.clone())
                    .at(cube.center),
            );
            cube_slots.push(own);
        }
        let grid = *decomp.grid();
        let layout = Arc::new(Layout::new(Family::Critical, grid, decomp.point_weights(), slots, channels)?);
        Ok(CriticalPackets { decomp, frame, table, partition, remainders, layout, cube_slots })
    }

    pub fn decomp(&self) -> &Arc<SpectralDecomp> {
        &self.decomp
    }

    pub fn frame(&self) -> &ScaleFrame {
        &self.frame
    }

    pub fn partition(&self) -> &Arc<CriticalPartition> {
        &self.partition
    }

    pub fn remainders(&self) -> &[RemainderOperator] {
        &self.remainders
    }

    /// Gains in ascending eigenvalue order.
    pub fn gains(&self) -> &GainTable {
        &self.table
    }

    /// Supremum `R` of the critical radius; the remainder band is `[R, 2R]`.
    pub fn band_radius(&self) -> f64 {
        self.partition.r_sup()
    }

    fn vectors(&self) -> &DMatrix<f64> {
        self.decomp.basis_matrix().expect("checked at construction")
    }

    /// Main and remainder parts of `Wf` as separate fields of the same layout.
    pub fn analyze_parts(&self, f: &Field) -> Result<(PhaseSpaceField, PhaseSpaceField)> {
        self.check_field(f)?;
        let v = self.vectors();
        let modes = self.decomp.len();
        let size = self.grid().len();
        let mains = par::map(self.partition.len(), |j| {
            let members = self.partition.members(j);
            let slots = &self.cube_slots[j];
            let mut coeffs = vec![C64::new(0.0, 0.0); modes];
            for &i in members {
                for (k, c) in coeffs.iter_mut().enumerate() {
                    *c += f.values()[i] * v[(i, k)];
                }
            }
            let re = DMatrix::from_fn(modes, slots.len(), |k, s| coeffs[k].re * self.table.gain(k, slots[s]));
            let im = DMatrix::from_fn(modes, slots.len(), |k, s| coeffs[k].im * self.table.gain(k, slots[s]));
            let (re, im) = (v * re, v * im);
            let mut out = Vec::with_capacity(size * slots.len());
            for s in 0..slots.len() {
                out.extend((0..size).map(|i| C64::new(re[(i, s)], im[(i, s)])));
            }
            out
        });
        let scale = LN_2.sqrt().recip();
        let rems = par::map(self.partition.len(), |j| {
            let full = self.remainders[j].apply_root(f.values());
            self.remainders[j].members().iter().map(|&i| full[i] * scale).collect::<Vec<_>>()
        });
        let mut main = PhaseSpaceField::zeros(self.layout.clone());
        let mut rem = PhaseSpaceField::zeros(self.layout.clone());
        for j in 0..self.partition.len() {
            let r = self.layout.block_range(2 * j, 0).start;
            main.values_mut()[r..r + mains[j].len()].copy_from_slice(&mains[j]);
            rem.block_mut(2 * j + 1, 0).copy_from_slice(&rems[j]);
        }
        Ok((main, rem))
    }

    /// Synthesis of the main channels and of the remainder channels:
    /// `u = sum_k 1_{Q_k} int psi F(k)` and `v = ln(2)^{1/2} sum_k R_k^{1/2} F_rem(k)`.
    pub fn synthesize_parts(&self, field: &PhaseSpaceField) -> Result<(Field, Field)> {
        self.check_phase(field)?;
        let v = self.vectors();
        let modes = self.decomp.len();
        let size = self.grid().len();
        let delta = self.frame.sigma.weight();
        let mains = par::map(self.partition.len(), |j| {
            let slots = &self.cube_slots[j];
            let start = self.layout.block_range(2 * j, 0).start;
            let re = DMatrix::from_fn(size, slots.len(), |i, s| field.values()[start + s * size + i].re);
            let im = DMatrix::from_fn(size, slots.len(), |i, s| field.values()[start + s * size + i].im);
            let (cre, cim) = (v.tr_mul(&re), v.tr_mul(&im));
            let mut coeffs = vec![C64::new(0.0, 0.0); modes];
            for (k, c) in coeffs.iter_mut().enumerate() {
                for (s, &m) in slots.iter().enumerate() {
                    *c += C64::new(cre[(k, s)], cim[(k, s)]) * (delta * self.table.gain(k, m));
                }
            }
            self.partition
                .members(j)
                .iter()
                .map(|&i| (0..modes).map(|k| coeffs[k] * v[(i, k)]).sum::<C64>())
                .collect::<Vec<C64>>()
        });
        let scale = LN_2.sqrt();
        let rems = par::map(self.partition.len(), |j| {
            let op = &self.remainders[j];
            let mut full = vec![C64::new(0.0, 0.0); size];
            for (p, &i) in op.members().iter().enumerate() {
                full[i] = field.block(2 * j + 1, 0)[p];
            }
            let out = op.apply_root(&full);
            op.members().iter().map(|&i| out[i] * scale).collect::<Vec<_>>()
        });
        let mut u = vec![C64::new(0.0, 0.0); size];
        let mut w = vec![C64::new(0.0, 0.0); size];
        for j in 0..self.partition.len() {
            for (p, &i) in self.partition.members(j).iter().enumerate() {
                u[i] += mains[j][p];
                w[i] += rems[j][p];
            }
        }
        Ok((Field::new(*self.grid(), u)?, Field::new(*self.grid(), w)?))
    }

    /// `sum_j (main_j + R_j)` as a dense matrix on the grid.
    pub fn assembled_identity(&self) -> DMatrix<f64> {
        let v = self.vectors();
        let size = self.grid().len();
        let mut total = DMatrix::zeros(size, size);
        for j in 0..self.partition.len() {
            let members = self.partition.members(j);
            let slots = &self.cube_slots[j];
            let weights: Vec<f64> = (0..self.decomp.len())
                .map(|k| slots.iter().map(|&m| self.frame.sigma.weight() * self.table.gain(k, m).powi(2)).sum())
                .collect();
            let rows = DMatrix::from_fn(members.len(), self.decomp.len(), |r, k| v[(members[r], k)]);
            let scaled = DMatrix::from_fn(members.len(), self.decomp.len(), |r, k| rows[(r, k)] * weights[k]);
            let main = scaled * rows.transpose();
            let rem = self.remainders[j].block();
            for (a, &i) in members.iter().enumerate() {
                for (b, &k) in members.iter().enumerate() {
                    total[(i, k)] += main[(a, b)] + rem[(a, b)];
                }
            }
        }
        total
    }
}

impl WavePacketTransform for CriticalPackets {
    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    fn analyze(&self, f: &Field) -> Result<PhaseSpaceField> {
        let (main, rem) = self.analyze_parts(f)?;
        main.add(&rem)
    }

    fn synthesize(&self, field: &PhaseSpaceField) -> Result<Field> {
        let (u, v) = self.synthesize_parts(field)?;
        u.add(&v)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::*;
    use crate::critical::{build_partition, critical_radius_field, Potential};
    use crate::grid::Grid;
    use crate::spectral::{eigendecompose, Normalization, SigmaGrid, Window, WindowVariant};

    fn context(n: usize, mode: Normalization, ppd: usize) -> CriticalPackets {
        let grid = Grid::new(1, n, 4.0).unwrap();
        let v = Potential::constant(&grid, 1.0).unwrap();
        let partition = Arc::new(build_partition(&v, &critical_radius_field(&v)).unwrap());
        let decomp = Arc::new(eigendecompose(&v.operator()).unwrap());
        let w = Window::new(WindowVariant::FiniteSpeed { b: 1.0 }).unwrap();
        let sigma = SigmaGrid::covering(&w, decomp.lambda_max(), partition.r_sup(), ppd, 1e-12).unwrap();
        CriticalPackets::new(decomp, ScaleFrame::new(w, sigma, mode), partition).unwrap()
    }

    #[test]
    fn identities() {
        let t = context(64, Normalization::Discrete, 12);
        for seed in 0..3 {
            check_identities(&t, seed, 1e-10);
        }
    }

    #[test]
    fn assembled_identity_and_block_locality() {
        let t = context(64, Normalization::Discrete, 12);
        let total = t.assembled_identity();
        let defect = (total - DMatrix::<f64>::identity(64, 64)).abs().max();
        assert!(defect < 1e-10, "defect {defect}");
        for op in t.remainders() {
            assert!(op.min_eigenvalue() >= -1e-10 * op.max_eigenvalue());
            let sq = op.root() * op.root();
            assert!((sq - op.block()).abs().max() < 1e-10);
            let mut outside = vec![C64::new(0.0, 0.0); 64];
            for i in 0..64 {
                if !op.members().contains(&i) {
                    outside[i] = C64::new(1.0 + i as f64, -0.5);
                }
            }
            assert!(op.apply(&outside).iter().all(|v| *v == C64::new(0.0, 0.0)));
        }
    }

    #[test]
    fn remainder_form_matches_defining_quadrature() {
        let t = context(64, Normalization::Discrete, 12);
        let decomp = t.decomp().clone();
        let f = random_field(t.grid(), 21);
        for (j, op) in t.remainders().iter().enumerate() {
            let mut local = vec![C64::new(0.0, 0.0); 64];
            for &i in op.members() {
                local[i] = f.values()[i];
            }
            let local = Field::new(*t.grid(), local).unwrap();
            let rho = t.partition().cubes()[j].rho;
            let mut captured = 0.0;
            for (m, s) in t.frame().sigma.nodes().iter().enumerate() {
                if *s <= rho {
                    let g = crate::spectral::apply_calculus(&decomp, |l| {
                        let i = decomp.lambdas().partition_point(|x| *x < l);
                        t.gains().gain(i.min(decomp.len() - 1), m)
                    }, &local)
                    .unwrap();
                    captured += t.frame().sigma.weight() * g.values().iter().map(|v| v.norm_sqr()).sum::<f64>();
                }
            }
            let total: f64 = local.values().iter().map(|v| v.norm_sqr()).sum();
            let form = op.form(local.values());
            assert!((form - (total - captured)).abs() < 1e-8 * total, "cube {j}");
        }
    }

    #[test]
    fn phase_field_from_other_family_is_rejected() {
        let t = context(64, Normalization::Discrete, 12);
        let other = context(128, Normalization::Discrete, 12);
        let f = PhaseSpaceField::zeros(other.layout().clone());
        assert!(matches!(t.synthesize(&f), Err(Error::FamilyMismatch(_))));
    }
}
