use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

use super::{Basis, Channel, ChannelIndex, Family, Layout, PhaseSpaceField, Slot, SlotKind, WavePacketTransform, COVERAGE_TOLERANCE};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::par;
use crate::spectral::{GainTable, OperatorKind, ScaleFrame, SpectralDecomp, WindowVariant};

/// Smallest Hermite truncation accepted by the Gaussian family.
pub const MIN_MODES: usize = 16;

/// Ornstein-Uhlenbeck lifting truncated at `sigma <= rho(x) = min(1, 1/|x|)`.
///
/// The main channel holds `1_{sigma <= rho(x)} psi(sigma^2 A) f(x)`. The
/// remainder channel holds `R^{1/2} Pi f` where `R = Pi - M*M` is the part of
/// the resolution of identity the truncated main channel misses, so that
/// `W*W = Pi` exactly. `Pi` drops the zero mode.
pub struct GaussianPackets {
    decomp: Arc<SpectralDecomp>,
    frame: ScaleFrame,
    table: GainTable,
    rho: Arc<[f64]>,
    root: DMatrix<f64>,
    layout: Arc<Layout>,
}

impl GaussianPackets {
    pub fn new(decomp: Arc<SpectralDecomp>, frame: ScaleFrame) -> Result<Self> {
        if decomp.kind() != OperatorKind::OrnsteinUhlenbeck {
            return Err(Error::BasisMismatch("the Gaussian family needs an Ornstein-Uhlenbeck decomposition".into()));
        }
        if decomp.len() < MIN_MODES {
            return Err(Error::InvalidArgument(format!("at least {MIN_MODES} Hermite modes are required")));
        }
        if !matches!(frame.window.variant(), WindowVariant::GaussianPoly { .. }) {
            return Err(Error::InvalidWindow("the Gaussian family needs the gaussian_poly window".into()));
        }
        if frame.sigma.sigma_max() > 1.0 + 1e-12 {
            return Err(Error::InvalidSigmaGrid("Gaussian main scales live on (0, 1]".into()));
        }
        frame.check_coverage(decomp.lambda_max(), COVERAGE_TOLERANCE)?;
        let grid = *decomp.grid();
        let table = frame.gains(decomp.spectral_lambdas());
        let rho: Arc<[f64]> = (0..grid.len()).map(|i| (1.0 / grid.point(i)[0].abs()).min(1.0)).collect();
        let vectors = decomp.basis_matrix().expect("Hermite decomposition is dense");
        let modes = decomp.len();
        let nodes = frame.sigma.nodes().to_vec();
        let delta = frame.sigma.weight();
        let parts = par::map(nodes.len(), |m| {
            let active: Vec<usize> = (0..grid.len()).filter(|&i| nodes[m] <= rho[i]).collect();
            let rows = DMatrix::from_fn(active.len(), modes, |r, k| vectors[(active[r], k)] * table.gain(k, m));
            rows.tr_mul(&rows) * delta
        });
        let mut r = DMatrix::<f64>::zeros(modes, modes);
        for (k, lambda) in decomp.spectral_lambdas().iter().enumerate() {
            if *lambda > 0.0 {
                r[(k, k)] = 1.0;
            }
        }
        for p in parts {
            r -= p;
        }
        let r = (&r + r.transpose()) * 0.5;
        let eig = SymmetricEigen::new(r);
        let scale = eig.eigenvalues.iter().copied().fold(0.0f64, |a, v| a.max(v.abs()));
        let low = eig.eigenvalues.iter().copied().fold(f64::MAX, f64::min);
        if low < -1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NegativeRemainder { label: 0, value: low, scale });
        }
        let sqrt = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let root = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt) * eig.eigenvectors.transpose();
        let m = nodes.len();
        let mut slots: Vec<Slot> = nodes
            .iter()
            .enumerate()
            .map(|(k, &s)| Slot { kind: SlotKind::Scale(k), sigma: s, weight: delta })
            .collect();
        slots.push(Slot { kind: SlotKind::Remainder, sigma: frame.sigma.sigma_max() * 0.5f64.exp(), weight: 1.0 });
        let channels = vec![
            Channel::new(ChannelIndex::GaussMain, Some(0), 1.0, (0..m).collect()).with_cutoff(rho.clone()),
            Channel::new(ChannelIndex::GaussRemainder, Some(1), 1.0, vec![m]),
        ];
        let layout = Arc::new(Layout::new(Family::Gaussian, grid, decomp.point_weights(), slots, channels)?);
        Ok(GaussianPackets { decomp, frame, table, rho, root, layout })
    }

    pub fn decomp(&self) -> &Arc<SpectralDecomp> {
        &self.decomp
    }

    pub fn frame(&self) -> &ScaleFrame {
        &self.frame
    }

    /// `rho(x) = min(1, 1/|x|)` on the grid.
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    /// `R^{1/2}` in Hermite coefficients.
    pub fn remainder_root(&self) -> &DMatrix<f64> {
        &self.root
    }

    fn projected_coeffs(&self, f: &Field) -> (Vec<C64>, f64) {
        let mut c = self.decomp.to_coeffs(f.values());
        let mut excluded = 0.0;
        for (v, l) in c.iter_mut().zip(self.decomp.spectral_lambdas()) {
            if *l <= 0.0 {
                excluded += v.norm_sqr();
                *v = C64::new(0.0, 0.0);
            }
        }
        (c, excluded)
    }

    /// The untransformed tail, `sum_{sigma_m > rho(x)} Delta (g_m(A)^2 Pi f)(x)`
    /// plus `(rho_0(A)^2 Pi f)(x)`, kept as a diagnostic next to the remainder
    /// channel.
    pub fn literal_tail(&self, f: &Field) -> Result<Field> {
        self.check_field(f)?;
        let (c, _) = self.projected_coeffs(f);
        let nodes = self.frame.sigma.nodes();
        let delta = self.frame.sigma.weight();
        let pieces = par::map(nodes.len(), |m| {
            let d: Vec<C64> = c.iter().enumerate().map(|(k, v)| v * self.table.gain(k, m).powi(2)).collect();
            self.decomp.to_values(&d)
        });
        let d: Vec<C64> = c.iter().enumerate().map(|(k, v)| v * self.table.completion(k).powi(2)).collect();
        let mut out = self.decomp.to_values(&d);
        for (m, piece) in pieces.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate() {
                if nodes[m] > self.rho[i] {
                    *o += piece[i] * delta;
                }
            }
        }
        Field::new(*self.grid(), out)
    }
}

fn real_matvec(m: &DMatrix<f64>, c: &[C64]) -> Vec<C64> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|k| c[k] * m[(r, k)]).sum())
        .collect()
}

impl WavePacketTransform for GaussianPackets {
    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    fn project(&self, f: &Field) -> Result<Field> {
        self.check_field(f)?;
        let (c, _) = self.projected_coeffs(f);
        Field::new(*self.grid(), self.decomp.to_values(&c))
    }

    fn analyze(&self, f: &Field) -> Result<PhaseSpaceField> {
        self.check_field(f)?;
        let (c, excluded) = self.projected_coeffs(f);
        let m = self.table.scales();
        let mut blocks = par::map(m, |s| {
            let d: Vec<C64> = c.iter().enumerate().map(|(k, v)| v * self.table.gain(k, s)).collect();
            self.decomp.to_values(&d)
        });
        blocks.push(self.decomp.to_values(&real_matvec(&self.root, &c)));
        let mut out = PhaseSpaceField::new(self.layout.clone(), blocks.concat())?.with_excluded(excluded);
        out.apply_mask();
        Ok(out)
    }

    fn synthesize(&self, field: &PhaseSpaceField) -> Result<Field> {
        self.check_phase(field)?;
        let mut masked = field.clone();
        masked.apply_mask();
        let m = self.table.scales();
        let delta = self.frame.sigma.weight();
        let parts = par::map(m, |s| {
            let mut d = self.decomp.to_coeffs(masked.block(0, s));
            for (k, v) in d.iter_mut().enumerate() {
                *v *= delta * self.table.gain(k, s);
            }
            d
        });
        let rem = self.decomp.to_coeffs(masked.block(1, 0));
        let mut acc = real_matvec(&self.root, &rem);
        for part in parts {
            for (a, v) in acc.iter_mut().zip(part) {
                *a += v;
            }
        }
        Field::new(*self.grid(), self.decomp.to_values(&acc))
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::*;
    use crate::spectral::{eigendecompose, Normalization, OperatorSpec, SigmaGrid, Window};

    fn transform(modes: usize, mode: Normalization, ppd: usize) -> GaussianPackets {
        let d = Arc::new(eigendecompose(&OperatorSpec::ornstein_uhlenbeck(modes)).unwrap());
        let w = Window::new(WindowVariant::GaussianPoly { n: 2, a_g: 1.0, alpha: 4.0 }).unwrap();
        let sigma = SigmaGrid::covering(&w, d.lambda_max(), 1.0, ppd, 1e-12).unwrap();
        GaussianPackets::new(d, ScaleFrame::new(w, sigma, mode)).unwrap()
    }

    #[test]
    fn identities_on_the_range() {
        let t = transform(16, Normalization::Discrete, 12);
        check_identities(&t, 13, 1e-10);
    }

    #[test]
    fn first_mode_reconstructs() {
        let t = transform(16, Normalization::Discrete, 12);
        let u = t.decomp().mode(1);
        let back = t.synthesize(&t.analyze(&u).unwrap()).unwrap();
        assert!(t.field_norm(&back.sub(&u).unwrap()) < 1e-8);
    }

    #[test]
    fn zero_mode_is_excluded() {
        let t = transform(16, Normalization::Discrete, 12);
        let u = t.decomp().mode(0);
        let lifted = t.analyze(&u).unwrap();
        assert!(lifted.mass() < 1e-24);
        assert!((lifted.excluded_mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn literal_tail_follows_the_window_tail_at_the_origin() {
        let t = transform(32, Normalization::Raw, 48);
        let origin = (0..t.grid().len()).min_by(|&a, &b| t.grid().point(a)[0].abs().total_cmp(&t.grid().point(b)[0].abs())).unwrap();
        for a in [1usize, 2, 4] {
            let u = t.decomp().mode(a);
            let tail = t.literal_tail(&u).unwrap();
            let expected = t.frame().window.tail((a as f64).sqrt()) * u.values()[origin].re;
            let got = tail.values()[origin].re;
            assert!((got - expected).abs() < 1e-3 * u.values()[origin].re.abs().max(1e-3), "mode {a}: {got} vs {expected}");
        }
        let u = t.decomp().mode(30);
        let tail = t.literal_tail(&u).unwrap();
        assert!(tail.values()[origin].norm() < 1e-6);
    }

    #[test]
    fn rejects_wrong_window_and_short_truncations() {
        let d = Arc::new(eigendecompose(&OperatorSpec::ornstein_uhlenbeck(16)).unwrap());
        let w = Window::new(WindowVariant::default()).unwrap();
        let sigma = SigmaGrid::new(0.01, 1.0, 12).unwrap();
        assert!(matches!(GaussianPackets::new(d, ScaleFrame::new(w, sigma, Normalization::Discrete)), Err(Error::InvalidWindow(_))));
        let d = Arc::new(eigendecompose(&OperatorSpec::ornstein_uhlenbeck(8)).unwrap());
        let w = Window::new(WindowVariant::GaussianPoly { n: 2, a_g: 1.0, alpha: 4.0 }).unwrap();
        let sigma = SigmaGrid::new(0.01, 1.0, 12).unwrap();
        assert!(GaussianPackets::new(d, ScaleFrame::new(w, sigma, Normalization::Discrete)).is_err());
    }
}
