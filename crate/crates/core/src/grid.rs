//! Periodic box grids, sampled fields and the unitary Fourier transform.
//!
//! Points are `x_i = -L + i h` with `h = 2L/n` along every axis and are stored
//! row-major (axis 0 varies slowest). The frequency side uses FFT order: the
//! entry at index `k` carries `xi = (pi/L) k~` with `k~` the signed
//! representative of `k` in `[-n/2, n/2)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinates of a grid point or frequency, unused axes set to zero.
pub type Point = [f64; 3];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    d: usize,
    n: usize,
    half_extent: f64,
}

impl Grid {
    pub fn new(d: usize, n: usize, half_extent: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidGrid(format!("dimension {d} not in 1..=3")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("n = {n} must be a power of two >= 8")));
        }
        if !(half_extent.is_finite() && half_extent > 0.0) {
            return Err(Error::InvalidGrid(format!("half extent {half_extent} must be positive")));
        }
        match n.checked_pow(d as u32) {
            Some(total) if total <= (1usize << 31) => {}
            _ => return Err(Error::InvalidGrid(format!("n^d = {n}^{d} is too large"))),
        }
        Ok(Grid { d, n, half_extent })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_extent / self.n as f64
    }

    /// Number of points `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^d` of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    /// Volume `(2L)^d` of the box.
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_extent).powi(self.d as i32)
    }

    /// Spacing `pi/L` of the frequency lattice.
    pub fn frequency_step(&self) -> f64 {
        PI / self.half_extent
    }

    pub fn multi_index(&self, mut i: usize) -> [usize; 3] {
        let mut m = [0; 3];
        for a in (0..self.d).rev() {
            m[a] = i % self.n;
            i /= self.n;
        }
        m
    }

    pub fn flat_index(&self, m: &[usize]) -> usize {
        m[..self.d].iter().fold(0, |acc, &k| acc * self.n + k)
    }

    pub fn point(&self, i: usize) -> Point {
        let m = self.multi_index(i);
        let h = self.spacing();
        let mut x = [0.0; 3];
        for a in 0..self.d {
            x[a] = -self.half_extent + m[a] as f64 * h;
        }
        x
    }

    /// Signed lattice index of FFT-order entry `k` along one axis.
    pub fn signed(&self, k: usize) -> i64 {
        if k < self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    pub fn frequency(&self, i: usize) -> Point {
        let m = self.multi_index(i);
        let step = self.frequency_step();
        let mut xi = [0.0; 3];
        for a in 0..self.d {
            xi[a] = step * self.signed(m[a]) as f64;
        }
        xi
    }

    pub fn frequency_norm_sq(&self, i: usize) -> f64 {
        self.frequency(i).iter().map(|v| v * v).sum()
    }

    /// Largest `|xi|` on the frequency lattice.
    pub fn max_frequency(&self) -> f64 {
        self.frequency_step() * (self.n / 2) as f64 * (self.d as f64).sqrt()
    }

    /// Minimum-image displacement `x - y` on the torus, per axis.
    pub fn displacement(&self, x: &Point, y: &Point) -> Point {
        let period = 2.0 * self.half_extent;
        let mut r = [0.0; 3];
        for a in 0..self.d {
            let mut v = x[a] - y[a];
            v -= period * (v / period).round();
            r[a] = v;
        }
        r
    }

    pub fn distance(&self, x: &Point, y: &Point) -> f64 {
        self.displacement(x, y).iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Complex samples of a function on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<C64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Field { grid, values: vec![C64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_real(grid: Grid, values: Vec<f64>) -> Result<Self> {
        Field::new(grid, values.into_iter().map(|v| C64::new(v, 0.0)).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
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

    pub fn scaled(&self, c: C64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        check_same(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Field { grid: self.grid, values })
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        check_same(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Field { grid: self.grid, values })
    }

    /// `sqrt(sum |f|^2 h^d)`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }
}

pub(crate) fn check_same(a: &Grid, b: &Grid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Samples `rule` at every grid point.
pub fn sample_function<F: Fn(&[f64]) -> C64>(grid: &Grid, rule: F) -> Field {
    let values = (0..grid.len()).map(|i| rule(&grid.point(i)[..grid.d()])).collect();
    Field { grid: *grid, values }
}

/// Samples a real-valued rule.
pub fn sample_real<F: Fn(&[f64]) -> f64>(grid: &Grid, rule: F) -> Field {
    sample_function(grid, |x| C64::new(rule(x), 0.0))
}

/// Cached FFT plans for one grid.
#[derive(Clone)]
pub struct FourierEngine {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for FourierEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FourierEngine").field("grid", &self.grid).finish()
    }
}

impl FourierEngine {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        FourierEngine {
            grid: *grid,
            forward: planner.plan_fft_forward(grid.n()),
            inverse: planner.plan_fft_inverse(grid.n()),
            scale: 1.0 / (grid.len() as f64).sqrt(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn transform_axes(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n();
        let d = self.grid.d();
        let total = data.len();
        let mut scratch = vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        let mut line = vec![C64::new(0.0, 0.0); n];
        for axis in 0..d {
            let stride = n.pow((d - 1 - axis) as u32);
            if stride == 1 {
                plan.process_with_scratch(data, &mut scratch);
                continue;
            }
            let block = stride * n;
            for start in (0..total).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    for k in 0..n {
                        line[k] = data[base + k * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for k in 0..n {
                        data[base + k * stride] = line[k];
                    }
                }
            }
        }
    }

    fn apply_phase(&self, data: &mut [C64]) {
        let g = &self.grid;
        for (i, v) in data.iter_mut().enumerate() {
            let m = g.multi_index(i);
            let parity: usize = m[..g.d()].iter().sum();
            if parity % 2 == 1 {
                *v = -*v;
            }
        }
    }

    /// In-place unitary forward transform in FFT order.
    pub fn forward(&self, data: &mut [C64]) {
        self.transform_axes(data, &self.forward);
        for v in data.iter_mut() {
            *v *= self.scale;
        }
        self.apply_phase(data);
    }

    /// In-place inverse of [`FourierEngine::forward`].
    pub fn inverse(&self, data: &mut [C64]) {
        self.apply_phase(data);
        self.transform_axes(data, &self.inverse);
        for v in data.iter_mut() {
            *v *= self.scale;
        }
    }

    /// Applies a real or complex multiplier given per FFT-order index.
    pub fn multiply(&self, data: &[C64], symbol: &[C64]) -> Vec<C64> {
        let mut work = data.to_vec();
        self.forward(&mut work);
        for (v, s) in work.iter_mut().zip(symbol) {
            *v *= s;
        }
        self.inverse(&mut work);
        work
    }
}

/// Unitary forward transform: `F_k = N^{-1/2} sum_j f_j exp(-i xi_k . x_j)`.
pub fn fourier_forward(f: &Field) -> Field {
    let mut values = f.values.clone();
    FourierEngine::new(&f.grid).forward(&mut values);
    Field { grid: f.grid, values }
}

pub fn fourier_inverse(spectrum: &Field) -> Field {
    let mut values = spectrum.values.clone();
    FourierEngine::new(&spectrum.grid).inverse(&mut values);
    Field { grid: spectrum.grid, values }
}

/// `(sum |f|^p h^d)^{1/p}`, or the maximum modulus for `p = inf`.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    weighted_lp_norm(f.values(), p, |_| f.grid.cell_volume())
}

/// L^p norm with per-point quadrature weights.
pub fn weighted_lp_norm<W: Fn(usize) -> f64>(values: &[C64], p: f64, weight: W) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    if p.is_infinite() {
        return Ok(values.iter().map(|v| v.norm()).fold(0.0, f64::max));
    }
    let scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let s: f64 = values
        .iter()
        .enumerate()
        .map(|(i, v)| weight(i) * (v.norm() / scale).powf(p))
        .sum();
    Ok(scale * s.powf(1.0 / p))
}

/// `sum f conj(g) h^d`, linear in the first argument.
pub fn inner_product(f: &Field, g: &Field) -> Result<C64> {
    check_same(&f.grid, &g.grid)?;
    let s: C64 = f.values.iter().zip(&g.values).map(|(a, b)| a * b.conj()).sum();
    Ok(s * f.grid.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(n: usize, l: f64) -> Grid {
        Grid::new(1, n, l).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(1, 12, 1.0).is_err());
        assert!(Grid::new(1, 4, 1.0).is_err());
        assert!(Grid::new(4, 8, 1.0).is_err());
        assert!(Grid::new(2, 8, -1.0).is_err());
    }

    #[test]
    fn delta_has_flat_spectrum() {
        let g = grid1(16, 2.0);
        let mut f = Field::zeros(g);
        f.values_mut()[8] = C64::new(1.0 / g.spacing(), 0.0);
        let spec = fourier_forward(&f);
        let m0 = spec.values()[0].norm();
        for v in spec.values() {
            assert!((v.norm() - m0).abs() < 1e-12);
            assert!((v - spec.values()[0]).norm() < 1e-12);
        }
        let back = fourier_inverse(&spec);
        assert!(back.sub(&f).unwrap().l2_norm() < 1e-12);
    }

    #[test]
    fn plane_wave_concentrates() {
        let g = Grid::new(2, 16, 3.0).unwrap();
        let xi = [3.0 * g.frequency_step(), -2.0 * g.frequency_step()];
        let f = sample_function(&g, |x| C64::from_polar(1.0, xi[0] * x[0] + xi[1] * x[1]));
        let spec = fourier_forward(&f);
        let (imax, _) = spec
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
            .unwrap();
        assert_eq!(g.frequency(imax)[..2], xi);
        let rest: f64 = spec
            .values()
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != imax)
            .map(|(_, v)| v.norm())
            .sum();
        assert!(rest < 1e-10);
    }

    #[test]
    fn one_cell_l1_and_gaussian_l2() {
        let g = grid1(64, 4.0);
        let mut f = Field::zeros(g);
        f.values_mut()[3] = C64::new(1.0, 0.0);
        assert!((lp_norm(&f, 1.0).unwrap() - g.spacing()).abs() < 1e-15);
        assert!(lp_norm(&f, 0.5).is_err());
        assert_eq!(lp_norm(&f, f64::INFINITY).unwrap(), 1.0);

        let g = grid1(512, 16.0);
        let f = sample_real(&g, |x| (-x[0] * x[0] / 2.0).exp());
        assert!((lp_norm(&f, 2.0).unwrap() - PI.powf(0.25)).abs() < 1e-8);
    }

    #[test]
    fn gaussian_integral_in_two_dimensions() {
        let g = Grid::new(2, 64, 8.0).unwrap();
        let f = sample_real(&g, |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
        assert!((lp_norm(&f, 1.0).unwrap() - PI).abs() < 1e-6);
        let zero = sample_real(&g, |_| 0.0);
        assert_eq!(zero, Field::zeros(g));
    }

    #[test]
    fn parabola_samples_are_symmetric() {
        let g = grid1(32, 2.0);
        let f = sample_real(&g, |x| x[0] * x[0]);
        for i in 1..32 {
            assert_eq!(f.values()[i], f.values()[32 - i]);
        }
    }

    #[test]
    fn plane_waves_are_orthogonal() {
        let g = grid1(32, 2.0);
        let s = g.frequency_step();
        let a = sample_function(&g, |x| C64::from_polar(1.0, 3.0 * s * x[0]));
        let b = sample_function(&g, |x| C64::from_polar(1.0, 5.0 * s * x[0]));
        assert!(inner_product(&a, &b).unwrap().norm() < 1e-12);
        let other = Field::zeros(grid1(16, 2.0));
        assert!(matches!(inner_product(&a, &other), Err(Error::GridMismatch)));
    }

    #[test]
    fn frequency_lattice_in_fft_order() {
        let g = grid1(8, PI);
        let ks: Vec<f64> = (0..8).map(|i| g.frequency(i)[0]).collect();
        assert_eq!(ks, vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
    }

    #[test]
    fn minimum_image_distance() {
        let g = grid1(16, 2.0);
        assert!((g.distance(&[1.9, 0.0, 0.0], &[-1.9, 0.0, 0.0]) - 0.2).abs() < 1e-12);
    }
}
