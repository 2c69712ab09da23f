use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, FourierEngine, Grid};

/// Largest point count admitted by dense eigensolves and kernel matrices.
pub const DENSE_LIMIT: usize = 4096;

#[derive(Clone, Debug)]
pub enum OperatorSpec {
    Laplacian { grid: Grid },
    Schrodinger { potential: Field },
    OrnsteinUhlenbeck { modes: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Laplacian,
    Schrodinger,
    OrnsteinUhlenbeck,
}

impl OperatorSpec {
    pub fn laplacian(grid: Grid) -> Self {
        OperatorSpec::Laplacian { grid }
    }

    pub fn schrodinger(potential: Field) -> Result<Self> {
        check_potential(&potential)?;
        Ok(OperatorSpec::Schrodinger { potential })
    }

    pub fn ornstein_uhlenbeck(modes: usize) -> Self {
        OperatorSpec::OrnsteinUhlenbeck { modes }
    }

    pub fn kind(&self) -> OperatorKind {
        match self {
            OperatorSpec::Laplacian { .. } => OperatorKind::Laplacian,
            OperatorSpec::Schrodinger { .. } => OperatorKind::Schrodinger,
            OperatorSpec::OrnsteinUhlenbeck { .. } => OperatorKind::OrnsteinUhlenbeck,
        }
    }
}

pub(crate) fn check_potential(v: &Field) -> Result<()> {
    for (index, z) in v.values().iter().enumerate() {
        if z.im != 0.0 {
            return Err(Error::InvalidPotential(format!("imaginary part {} at index {index}", z.im)));
        }
        if z.re < 0.0 || !z.re.is_finite() {
            return Err(Error::NegativePotential { index, value: z.re });
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
enum Basis {
    Fourier { engine: FourierEngine, order: Vec<usize> },
    /// Euclidean-orthonormal columns, ascending eigenvalues.
    Dense { vectors: DMatrix<f64> },
    /// Columns orthonormal after scaling samples by `sqrt(gamma_i h)`.
    Hermite { vectors: DMatrix<f64>, root_weight: Vec<f64> },
}

/// Eigenpairs of `A = -L >= 0`.
///
/// Coefficients are exchanged in a basis-specific "spectral order": FFT order
/// for the Laplacian and ascending eigenvalue order otherwise. For grid-based
/// kinds the map from samples to coefficients is Euclidean-unitary, so
/// `||f||^2 = h^d sum |c|^2`; for the Hermite kind `||f||^2_{L^2(gamma)} = sum |c|^2`.
#[derive(Clone, Debug)]
pub struct SpectralDecomp {
    kind: OperatorKind,
    grid: Grid,
    lambdas: Vec<f64>,
    spectral_lambdas: Vec<f64>,
    basis: Basis,
}

pub fn eigendecompose(spec: &OperatorSpec) -> Result<SpectralDecomp> {
    match spec {
        OperatorSpec::Laplacian { grid } => Ok(laplacian(grid)),
        OperatorSpec::Schrodinger { potential } => schrodinger(potential),
        OperatorSpec::OrnsteinUhlenbeck { modes } => ornstein_uhlenbeck(*modes),
    }
}

fn laplacian(grid: &Grid) -> SpectralDecomp {
    let spectral: Vec<f64> = (0..grid.len()).map(|i| grid.frequency_norm_sq(i)).collect();
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| spectral[a].total_cmp(&spectral[b]).then(a.cmp(&b)));
    let lambdas = order.iter().map(|&i| spectral[i]).collect();
    SpectralDecomp {
        kind: OperatorKind::Laplacian,
        grid: *grid,
        lambdas,
        spectral_lambdas: spectral,
        basis: Basis::Fourier { engine: FourierEngine::new(grid), order },
    }
}

/// Periodic second-order difference `-Delta_h + diag(V)`.
pub fn schrodinger_matrix(potential: &Field) -> Result<DMatrix<f64>> {
    let g = potential.grid();
    let size = g.len();
    if size > DENSE_LIMIT {
        return Err(Error::ResourceGuard(format!("dense eigensolve needs n^d <= {DENSE_LIMIT}, got {size}")));
    }
    let n = g.n();
    let inv_h2 = 1.0 / (g.spacing() * g.spacing());
    let mut a = DMatrix::zeros(size, size);
    for i in 0..size {
        a[(i, i)] = 2.0 * g.d() as f64 * inv_h2 + potential.values()[i].re;
        let m = g.multi_index(i);
        for axis in 0..g.d() {
            for step in [1, n - 1] {
                let mut nb = m;
                nb[axis] = (m[axis] + step) % n;
                let j = g.flat_index(&nb);
                a[(i, j)] -= inv_h2;
            }
        }
    }
    Ok(a)
}

fn sorted_eigen(a: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut lambdas = Vec::with_capacity(order.len());
    let mut vectors = DMatrix::zeros(eig.eigenvectors.nrows(), order.len());
    for (col, &k) in order.iter().enumerate() {
        let l = eig.eigenvalues[k];
        if l < -1e-10 * scale {
            return Err(Error::InvalidArgument(format!("operator has negative eigenvalue {l:e}")));
        }
        lambdas.push(l.max(0.0));
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    Ok((lambdas, vectors))
}

fn schrodinger(potential: &Field) -> Result<SpectralDecomp> {
    check_potential(potential)?;
    let a = schrodinger_matrix(potential)?;
    let (lambdas, vectors) = sorted_eigen(a)?;
    Ok(SpectralDecomp {
        kind: OperatorKind::Schrodinger,
        grid: *potential.grid(),
        spectral_lambdas: lambdas.clone(),
        lambdas,
        basis: Basis::Dense { vectors },
    })
}

/// Grid used for the Hermite representation with `modes` modes.
pub fn hermite_grid(modes: usize) -> Result<Grid> {
    let half = ((2.0 * modes as f64 + 1.0).sqrt() + 4.0).ceil();
    let mut n = 128;
    while 2.0 * half / (n as f64) > 0.125 {
        n *= 2;
    }
    Grid::new(1, n, half)
}

/// Hermite functions `phi_a(x) = H~_a(x) exp(-x^2/2)`, orthonormal in `L^2(dx)`.
pub fn hermite_functions(x: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let p0 = PI.powf(-0.25) * (-0.5 * x * x).exp();
    out.push(p0);
    if count > 1 {
        out.push(2f64.sqrt() * x * p0);
    }
    for a in 1..count.saturating_sub(1) {
        let af = a as f64;
        let next = (2.0 / (af + 1.0)).sqrt() * x * out[a] - (af / (af + 1.0)).sqrt() * out[a - 1];
        out.push(next);
    }
    out.truncate(count);
    out
}

fn ornstein_uhlenbeck(modes: usize) -> Result<SpectralDecomp> {
    if modes == 0 {
        return Err(Error::InvalidArgument("ornstein_uhlenbeck needs at least one mode".into()));
    }
    let grid = hermite_grid(modes)?;
    let h = grid.spacing();
    let n = grid.len();
    let mut raw = DMatrix::zeros(n, modes);
    for i in 0..n {
        let x = grid.point(i)[0];
        for (a, v) in hermite_functions(x, modes).into_iter().enumerate() {
            raw[(i, a)] = v * h.sqrt();
        }
    }
    // Loewdin orthonormalization keeps each column closest to its Hermite function.
    let gram = raw.transpose() * &raw;
    let eig = SymmetricEigen::new(gram);
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    let vectors = &raw * (&eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose());
    let root_weight = (0..n).map(|i| (-0.5 * grid.point(i)[0].powi(2)).exp() * h.sqrt()).collect();
    let lambdas: Vec<f64> = (0..modes).map(|a| a as f64).collect();
    Ok(SpectralDecomp {
        kind: OperatorKind::OrnsteinUhlenbeck,
        grid,
        spectral_lambdas: lambdas.clone(),
        lambdas,
        basis: Basis::Hermite { vectors, root_weight },
    })
}

fn real_mul(v: &DMatrix<f64>, transpose: bool, c: &[C64]) -> Vec<C64> {
    let re = DVector::from_iterator(c.len(), c.iter().map(|z| z.re));
    let im = DVector::from_iterator(c.len(), c.iter().map(|z| z.im));
    let (r, i) = if transpose { (v.tr_mul(&re), v.tr_mul(&im)) } else { (v * re, v * im) };
    r.iter().zip(i.iter()).map(|(a, b)| C64::new(*a, *b)).collect()
}

impl SpectralDecomp {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Eigenvalues of `A` in ascending order.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Eigenvalues in spectral-coefficient order.
    pub fn spectral_lambdas(&self) -> &[f64] {
        &self.spectral_lambdas
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambdas.last().copied().unwrap_or(0.0)
    }

    pub fn is_dense(&self) -> bool {
        !matches!(self.basis, Basis::Fourier { .. })
    }

    pub fn fourier_engine(&self) -> Option<&FourierEngine> {
        match &self.basis {
            Basis::Fourier { engine, .. } => Some(engine),
            _ => None,
        }
    }

    /// Orthonormal eigenvector columns (ascending eigenvalues) for the dense
    /// kinds. Hermite columns act on samples scaled by `sqrt(gamma_i h)`.
    pub fn basis_matrix(&self) -> Option<&DMatrix<f64>> {
        match &self.basis {
            Basis::Fourier { .. } => None,
            Basis::Dense { vectors } | Basis::Hermite { vectors, .. } => Some(vectors),
        }
    }

    /// Quadrature weight of each grid point in the operator's measure.
    pub fn point_weights(&self) -> Vec<f64> {
        match &self.basis {
            Basis::Hermite { root_weight, .. } => root_weight.iter().map(|r| r * r).collect(),
            _ => vec![self.grid.cell_volume(); self.grid.len()],
        }
    }

    /// Squared norm of one spectral coefficient in the operator's measure.
    pub fn coefficient_weight(&self) -> f64 {
        match &self.basis {
            Basis::Hermite { .. } => 1.0,
            _ => self.grid.cell_volume(),
        }
    }

    pub fn to_spectral(&self, f: &[C64]) -> Vec<C64> {
        match &self.basis {
            Basis::Fourier { engine, .. } => {
                let mut work = f.to_vec();
                engine.forward(&mut work);
                work
            }
            Basis::Dense { vectors } => real_mul(vectors, true, f),
            Basis::Hermite { vectors, root_weight } => {
                let scaled: Vec<C64> = f.iter().zip(root_weight).map(|(v, r)| v * r).collect();
                real_mul(vectors, true, &scaled)
            }
        }
    }

    pub fn from_spectral(&self, c: &[C64]) -> Vec<C64> {
        match &self.basis {
            Basis::Fourier { engine, .. } => {
                let mut work = c.to_vec();
                engine.inverse(&mut work);
                work
            }
            Basis::Dense { vectors } => real_mul(vectors, false, c),
            Basis::Hermite { vectors, root_weight } => {
                let mut v = real_mul(vectors, false, c);
                for (x, r) in v.iter_mut().zip(root_weight) {
                    *x /= r;
                }
                v
            }
        }
    }

    /// Eigenvector `i` (ascending order), normalized in the operator's measure.
    pub fn mode(&self, i: usize) -> Field {
        let mut c = vec![C64::new(0.0, 0.0); self.len()];
        let slot = match &self.basis {
            Basis::Fourier { order, .. } => order[i],
            _ => i,
        };
        c[slot] = C64::new(1.0 / self.coefficient_weight().sqrt(), 0.0);
        Field::new(self.grid, self.from_spectral(&c)).expect("mode length matches grid")
    }

    /// Inner product in the operator's measure.
    pub fn inner(&self, f: &[C64], g: &[C64]) -> C64 {
        match &self.basis {
            Basis::Hermite { root_weight, .. } => f
                .iter()
                .zip(g)
                .zip(root_weight)
                .map(|((a, b), r)| a * b.conj() * r * r)
                .sum(),
            _ => f.iter().zip(g).map(|(a, b)| a * b.conj()).sum::<C64>() * self.grid.cell_volume(),
        }
    }

    pub fn norm(&self, f: &[C64]) -> f64 {
        self.inner(f, f).re.max(0.0).sqrt()
    }

    /// Largest entry of `|G - I|` for the Gram matrix of the modes.
    pub fn gram_defect(&self) -> f64 {
        let m = match &self.basis {
            Basis::Fourier { .. } => return 0.0,
            Basis::Dense { vectors } | Basis::Hermite { vectors, .. } => vectors,
        };
        let g = m.tr_mul(m);
        let mut worst = 0.0f64;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    fn check_field(&self, f: &Field) -> Result<()> {
        if f.grid() != &self.grid {
            return Err(Error::BasisMismatch(format!(
                "field grid {:?} does not match decomposition grid {:?}",
                f.grid(),
                self.grid
            )));
        }
        Ok(())
    }

    /// Dense matrix of `g(A)` acting on sample vectors.
    pub fn operator_matrix<G: Fn(f64) -> f64>(&self, g: G) -> Result<DMatrix<f64>> {
        let size = self.grid.len();
        if size > DENSE_LIMIT {
            return Err(Error::ResourceGuard(format!("kernel matrix needs n^d <= {DENSE_LIMIT}, got {size}")));
        }
        match &self.basis {
            Basis::Fourier { .. } => {
                let mut m = DMatrix::zeros(size, size);
                let symbol: Vec<f64> = self.spectral_lambdas.iter().map(|l| g(*l)).collect();
                for j in 0..size {
                    let mut e = vec![C64::new(0.0, 0.0); size];
                    e[j] = C64::new(1.0, 0.0);
                    let mut c = self.to_spectral(&e);
                    for (v, s) in c.iter_mut().zip(&symbol) {
                        *v *= s;
                    }
                    let col = self.from_spectral(&c);
                    for i in 0..size {
                        m[(i, j)] = col[i].re;
                    }
                }
                Ok(m)
            }
            Basis::Dense { vectors } => {
                let scaled = DMatrix::from_fn(size, self.len(), |i, k| vectors[(i, k)] * g(self.lambdas[k]));
                Ok(scaled * vectors.transpose())
            }
            Basis::Hermite { vectors, root_weight } => {
                let n = self.len();
                let scaled = DMatrix::from_fn(size, n, |i, k| vectors[(i, k)] * g(self.lambdas[k]) / root_weight[i]);
                let right = DMatrix::from_fn(size, n, |j, k| vectors[(j, k)] * root_weight[j]);
                Ok(scaled * right.transpose())
            }
        }
    }
}

/// `g(A) f` for a real spectral function.
pub fn apply_calculus<G: Fn(f64) -> f64>(decomp: &SpectralDecomp, g: G, f: &Field) -> Result<Field> {
    apply_calculus_complex(decomp, |l| C64::new(g(l), 0.0), f)
}

pub fn apply_calculus_complex<G: Fn(f64) -> C64>(decomp: &SpectralDecomp, g: G, f: &Field) -> Result<Field> {
    decomp.check_field(f)?;
    let mut c = decomp.to_spectral(f.values());
    for (v, l) in c.iter_mut().zip(decomp.spectral_lambdas()) {
        *v *= g(*l);
    }
    Field::new(*f.grid(), decomp.from_spectral(&c))
}

/// Multiplication by `symbol(xi)` on the Fourier side.
pub fn fourier_multiplier<S: Fn(&[f64]) -> C64>(symbol: S, f: &Field) -> Field {
    let g = *f.grid();
    let engine = FourierEngine::new(&g);
    let sym: Vec<C64> = (0..g.len()).map(|i| symbol(&g.frequency(i)[..g.d()])).collect();
    Field::new(g, engine.multiply(f.values(), &sym)).expect("same grid")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Propagator {
    SchrodingerFlow { t: f64 },
    HalfWave { t: f64 },
    CosineWave { t: f64 },
    Heat { t: f64 },
}

impl Propagator {
    pub fn symbol(&self, lambda: f64) -> C64 {
        let l = lambda.max(0.0);
        match *self {
            Propagator::SchrodingerFlow { t } => C64::from_polar(1.0, -t * l),
            Propagator::HalfWave { t } => C64::from_polar(1.0, t * l.sqrt()),
            Propagator::CosineWave { t } => C64::new((t * l.sqrt()).cos(), 0.0),
            Propagator::Heat { t } => C64::new((-t * l).exp(), 0.0),
        }
    }
}

pub fn propagator(decomp: &SpectralDecomp, kind: Propagator, f: &Field) -> Result<Field> {
    if let Propagator::Heat { t } = kind {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
    }
    apply_calculus_complex(decomp, |l| kind.symbol(l), f)
}

/// Kernel `K(x, y)` with `(g(A) f)(x) = sum_y K(x, y) f(y) mu(y)`, where `mu`
/// is the operator's point measure.
pub fn kernel_matrix<G: Fn(f64) -> f64>(decomp: &SpectralDecomp, g: G) -> Result<DMatrix<f64>> {
    let m = decomp.operator_matrix(g)?;
    let weights = decomp.point_weights();
    Ok(DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] / weights[j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{inner_product, sample_function, sample_real};

    fn random_field(grid: &Grid, seed: u64) -> Field {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let values = (0..grid.len()).map(|_| C64::new(next(), next())).collect();
        Field::new(*grid, values).unwrap()
    }

    #[test]
    fn laplacian_spectrum_is_lattice() {
        let g = Grid::new(1, 8, PI).unwrap();
        let d = eigendecompose(&OperatorSpec::laplacian(g)).unwrap();
        assert_eq!(d.lambdas(), &[0.0, 1.0, 1.0, 4.0, 4.0, 9.0, 9.0, 16.0]);
    }

    #[test]
    fn ou_spectrum_counts() {
        let d = eigendecompose(&OperatorSpec::ornstein_uhlenbeck(5)).unwrap();
        assert_eq!(d.lambdas(), &[0.0, 1.0, 2.0, 3.0, 4.0]);
        assert!(d.gram_defect() < 1e-8);
        // The first mode is the constant function.
        let u0 = d.mode(0);
        let c = u0.values()[u0.values().len() / 2];
        for v in u0.values().iter().step_by(17) {
            assert!((v - c).norm() < 1e-8 * c.norm());
        }
    }

    #[test]
    fn harmonic_oscillator_levels() {
        let g = Grid::new(1, 512, 12.0).unwrap();
        let v = sample_real(&g, |x| x[0] * x[0]);
        let d = eigendecompose(&OperatorSpec::schrodinger(v).unwrap()).unwrap();
        for k in 0..6 {
            let exact = 2.0 * k as f64 + 1.0;
            assert!((d.lambdas()[k] - exact).abs() < 0.01 * exact, "{k}: {}", d.lambdas()[k]);
        }
        assert!(d.gram_defect() < 1e-8);
    }

    #[test]
    fn negative_potential_rejected() {
        let g = Grid::new(1, 16, 1.0).unwrap();
        let v = sample_real(&g, |x| x[0]);
        assert!(matches!(OperatorSpec::schrodinger(v), Err(Error::NegativePotential { .. })));
        let big = Grid::new(2, 128, 1.0).unwrap();
        let spec = OperatorSpec::Schrodinger { potential: sample_real(&big, |_| 1.0) };
        assert!(eigendecompose(&spec).unwrap_err().is_resource_guard());
    }

    #[test]
    fn calculus_identity_homomorphism_and_selfadjointness() {
        let g = Grid::new(1, 64, 4.0).unwrap();
        let v = sample_real(&g, |x| 1.0 + x[0] * x[0]);
        for d in [
            eigendecompose(&OperatorSpec::laplacian(g)).unwrap(),
            eigendecompose(&OperatorSpec::schrodinger(v.clone()).unwrap()).unwrap(),
        ] {
            let f = random_field(&g, 3);
            let h = random_field(&g, 5);
            let id = apply_calculus(&d, |_| 1.0, &f).unwrap();
            assert!(id.sub(&f).unwrap().l2_norm() < 1e-10 * f.l2_norm());
            let g1 = |l: f64| (-0.1 * l).exp();
            let g2 = |l: f64| 1.0 / (1.0 + l);
            let lhs = apply_calculus(&d, g1, &apply_calculus(&d, g2, &f).unwrap()).unwrap();
            let rhs = apply_calculus(&d, |l| g1(l) * g2(l), &f).unwrap();
            assert!(lhs.sub(&rhs).unwrap().l2_norm() < 1e-9 * f.l2_norm());
            let a = inner_product(&apply_calculus(&d, g2, &f).unwrap(), &h).unwrap();
            let b = inner_product(&f, &apply_calculus(&d, g2, &h).unwrap()).unwrap();
            assert!((a - b).norm() < 1e-10 * f.l2_norm() * h.l2_norm());
            let lo = apply_calculus(&d, |l| if l < 5.0 { 1.0 } else { 0.0 }, &f).unwrap();
            let hi = apply_calculus(&d, |l| if l >= 5.0 { 1.0 } else { 0.0 }, &lo).unwrap();
            assert!(hi.l2_norm() < 1e-12 * f.l2_norm());
        }
    }

    #[test]
    fn multiplier_matches_calculus_for_radial_symbols() {
        let g = Grid::new(2, 16, 3.0).unwrap();
        let d = eigendecompose(&OperatorSpec::laplacian(g)).unwrap();
        let f = random_field(&g, 11);
        let psi = |r: f64| (-(r - 2.0).powi(2)).exp();
        let a = fourier_multiplier(|xi| C64::new(psi(0.7 * (xi[0] * xi[0] + xi[1] * xi[1]).sqrt()), 0.0), &f);
        let b = apply_calculus(&d, |l| psi(0.7 * l.sqrt()), &f).unwrap();
        assert!(a.sub(&b).unwrap().l2_norm() < 1e-10 * f.l2_norm());
        let one = fourier_multiplier(|_| C64::new(1.0, 0.0), &f);
        assert!(one.sub(&f).unwrap().l2_norm() < 1e-12 * f.l2_norm());
    }

    #[test]
    fn heat_preserves_mean_and_matches_gaussian() {
        let g = Grid::new(1, 256, 8.0).unwrap();
        let d = eigendecompose(&OperatorSpec::laplacian(g)).unwrap();
        let mut delta = Field::zeros(g);
        delta.values_mut()[128] = C64::new(1.0 / g.spacing(), 0.0);
        let t = 0.5;
        let u = propagator(&d, Propagator::Heat { t }, &delta).unwrap();
        let mass: C64 = u.values().iter().sum::<C64>() * g.spacing();
        assert!((mass.re - 1.0).abs() < 1e-12);
        let exact = sample_real(&g, |x| (-x[0] * x[0] / (4.0 * t)).exp() / (4.0 * PI * t).sqrt());
        let err = u.sub(&exact).unwrap();
        assert!(crate::grid::lp_norm(&err, f64::INFINITY).unwrap() < 1e-10);
        assert!(matches!(propagator(&d, Propagator::Heat { t: -1.0 }, &delta), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn unitary_propagators_and_time_zero() {
        let g = Grid::new(1, 64, 4.0).unwrap();
        let d = eigendecompose(&OperatorSpec::schrodinger(sample_real(&g, |_| 1.0)).unwrap()).unwrap();
        let f = random_field(&g, 7);
        for kind in [Propagator::SchrodingerFlow { t: 0.7 }, Propagator::HalfWave { t: 1.3 }] {
            let u = propagator(&d, kind, &f).unwrap();
            assert!((u.l2_norm() - f.l2_norm()).abs() < 1e-10 * f.l2_norm());
        }
        for kind in [
            Propagator::SchrodingerFlow { t: 0.0 },
            Propagator::HalfWave { t: 0.0 },
            Propagator::CosineWave { t: 0.0 },
            Propagator::Heat { t: 0.0 },
        ] {
            let u = propagator(&d, kind, &f).unwrap();
            assert!(u.sub(&f).unwrap().l2_norm() < 1e-12 * f.l2_norm());
        }
    }

    #[test]
    fn cosine_wave_has_finite_speed() {
        let g = Grid::new(1, 512, 8.0).unwrap();
        let h = g.spacing();
        let v = sample_real(&g, |_| 1.0);
        let dd = eigendecompose(&OperatorSpec::schrodinger(v).unwrap()).unwrap();
        let mut f = Field::zeros(g);
        f.values_mut()[256] = C64::new(1.0, 0.0);
        let t = 2.0;
        let u = propagator(&dd, Propagator::CosineWave { t }, &f).unwrap();
        let outside: f64 = (0..g.len())
            .filter(|&i| g.point(i)[0].abs() > t + 40.0 * h)
            .map(|i| u.values()[i].norm_sqr())
            .sum();
        let total: f64 = u.values().iter().map(|v| v.norm_sqr()).sum();
        assert!(outside < 1e-8 * total, "{}", outside / total);
    }

    #[test]
    fn kernels_are_symmetric_and_consistent() {
        let g = Grid::new(1, 64, 4.0).unwrap();
        let lap = eigendecompose(&OperatorSpec::laplacian(g)).unwrap();
        let k = kernel_matrix(&lap, |l| (-0.3 * l).exp()).unwrap();
        for i in 0..64 {
            let row: f64 = k.row(i).iter().sum::<f64>() * g.spacing();
            assert!((row - 1.0).abs() < 1e-8);
        }
        let sch = eigendecompose(&OperatorSpec::schrodinger(sample_real(&g, |x| x[0] * x[0])).unwrap()).unwrap();
        let gfun = |l: f64| 1.0 / (1.0 + l);
        let k = kernel_matrix(&sch, gfun).unwrap();
        assert!((&k - k.transpose()).norm() <= 1e-10 * k.norm());
        let f = random_field(&g, 9);
        let direct = apply_calculus(&sch, gfun, &f).unwrap();
        for i in 0..64 {
            let v: C64 = (0..64).map(|j| f.values()[j] * k[(i, j)] * g.spacing()).sum();
            assert!((v - direct.values()[i]).norm() < 1e-8);
        }
        let id = kernel_matrix(&sch, |_| 1.0).unwrap();
        assert!((id[(3, 3)] - 1.0 / g.spacing()).abs() < 1e-8 / g.spacing());
        assert!(id[(3, 4)].abs() < 1e-8);
    }

    #[test]
    fn hermite_kernel_and_plane_wave_eigenvector() {
        let d = eigendecompose(&OperatorSpec::ornstein_uhlenbeck(16)).unwrap();
        let u3 = d.mode(3);
        let k = kernel_matrix(&d, |l| (-0.2 * l).exp()).unwrap();
        let w = d.point_weights();
        let applied = apply_calculus(&d, |l| (-0.2 * l).exp(), &u3).unwrap();
        let mid = d.grid().len() / 2;
        for i in [mid - 20, mid, mid + 13] {
            let v: C64 = (0..w.len()).map(|j| u3.values()[j] * k[(i, j)] * w[j]).sum();
            assert!((v - applied.values()[i]).norm() < 1e-8 * (1.0 + v.norm()));
            assert!((applied.values()[i] - u3.values()[i] * (-0.6f64).exp()).norm() < 1e-10 * (1.0 + v.norm()));
        }
        let g = Grid::new(1, 32, PI).unwrap();
        let lap = eigendecompose(&OperatorSpec::laplacian(g)).unwrap();
        let wave = sample_function(&g, |x| C64::from_polar(1.0, 3.0 * x[0]));
        let out = apply_calculus(&lap, |l| l, &wave).unwrap();
        assert!(out.sub(&wave.scaled(C64::new(9.0, 0.0))).unwrap().l2_norm() < 1e-10);
    }
}
