//! Browser bindings: a Littlewood-Paley scalogram, the critical radius and
//! cube partition of a power potential, and finite-speed kernel rows.

use wasm_bindgen::prelude::*;
use wavepacket::critical::{build_partition, critical_radius_field, PotentialSpec};
use wavepacket::grid::{sample_function, Field, Grid};
use wavepacket::packets::{LittlewoodPaley, WavePacketTransform};
use wavepacket::spectral::{apply_calculus, eigendecompose, Normalization, ScaleFrame, SigmaGrid, SpectralDecomp, Window, WindowVariant};
use wavepacket::verify::reconstruction_error;
use wavepacket::C64;

fn js(e: String) -> JsError {
    JsError::new(&e)
}

fn signal(kind: &str, grid: &Grid) -> Result<Field, String> {
    let f = match kind {
        "chirp" => sample_function(grid, |x| {
            let t = x[0];
            C64::new((2.0 * t + 0.12 * t * t).cos() * (-t * t / 72.0).exp(), 0.0)
        }),
        "packets" => sample_function(grid, |x| {
            let t = x[0];
            let a = (-(t + 6.0).powi(2) / 2.0).exp() * (1.5 * t).cos();
            let b = (-(t - 5.0).powi(2) / 0.5).exp() * (7.0 * t).cos();
            C64::new(a + b, 0.0)
        }),
        "step" => sample_function(grid, |x| C64::new((x[0] / 0.3).tanh() * (-x[0] * x[0] / 50.0).exp(), 0.0)),
        other => return Err(format!("unknown signal '{other}', expected chirp, packets or step")),
    };
    Ok(f)
}

/// `|psi(sigma^2 |xi|^2) f|` over `(sigma, x)` for a test signal on a line.
#[wasm_bindgen]
pub struct Scalogram {
    xs: Vec<f64>,
    sigmas: Vec<f64>,
    signal: Vec<f64>,
    magnitudes: Vec<f64>,
    reconstruction_error: f64,
}

impl Scalogram {
    pub fn build(kind: &str, n: usize, half_extent: f64, points_per_decade: usize) -> Result<Scalogram, String> {
        let grid = Grid::new(1, n, half_extent).map_err(|e| e.to_string())?;
        let f = signal(kind, &grid)?;
        let window = Window::new(WindowVariant::default()).map_err(|e| e.to_string())?;
        let top = grid.max_frequency().powi(2);
        let sigma = SigmaGrid::covering(&window, top, half_extent, points_per_decade, 1e-12).map_err(|e| e.to_string())?;
        let t = LittlewoodPaley::new(&grid, ScaleFrame::new(window, sigma.clone(), Normalization::Discrete)).map_err(|e| e.to_string())?;
        let w = t.analyze(&f).map_err(|e| e.to_string())?;
        let mut magnitudes = Vec::with_capacity(sigma.len() * n);
        for s in 0..sigma.len() {
            magnitudes.extend(w.block(0, s).iter().map(|v| v.norm()));
        }
        Ok(Scalogram {
            xs: (0..n).map(|i| grid.point(i)[0]).collect(),
            sigmas: sigma.nodes().to_vec(),
            signal: f.values().iter().map(|v| v.re).collect(),
            magnitudes,
            reconstruction_error: reconstruction_error(&t, &f).map_err(|e| e.to_string())?,
        })
    }
}

#[wasm_bindgen]
impl Scalogram {
    /// `kind` is `chirp`, `packets` or `step`.
    #[wasm_bindgen(constructor)]
    pub fn new(kind: &str, n: usize, half_extent: f64, points_per_decade: usize) -> Result<Scalogram, JsError> {
        Scalogram::build(kind, n, half_extent, points_per_decade).map_err(js)
    }

    #[wasm_bindgen(getter)]
    pub fn xs(&self) -> Vec<f64> {
        self.xs.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn sigmas(&self) -> Vec<f64> {
        self.sigmas.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn signal(&self) -> Vec<f64> {
        self.signal.clone()
    }

    /// Row-major, one row of `xs.length` values per sigma.
    #[wasm_bindgen(getter)]
    pub fn magnitudes(&self) -> Vec<f64> {
        self.magnitudes.clone()
    }

    #[wasm_bindgen(getter, js_name = reconstructionError)]
    pub fn reconstruction_error(&self) -> f64 {
        self.reconstruction_error
    }
}

/// Critical radius and cube partition of `V = scale |x|^exponent` on a line.
#[wasm_bindgen]
pub struct CriticalMap {
    xs: Vec<f64>,
    rho: Vec<f64>,
    cube_left: Vec<f64>,
    cube_right: Vec<f64>,
    overlap: usize,
    r_sup: f64,
}

impl CriticalMap {
    pub fn build(scale: f64, exponent: f64, n: usize, half_extent: f64) -> Result<CriticalMap, String> {
        let grid = Grid::new(1, n, half_extent).map_err(|e| e.to_string())?;
        let v = PotentialSpec::Power { scale, exponent }.build(&grid).map_err(|e| e.to_string())?;
        let field = critical_radius_field(&v);
        let p = build_partition(&v, &field).map_err(|e| e.to_string())?;
        Ok(CriticalMap {
            xs: (0..n).map(|i| grid.point(i)[0]).collect(),
            rho: field.rho.clone(),
            cube_left: p.cubes().iter().map(|c| c.center[0] - 0.5 * c.side).collect(),
            cube_right: p.cubes().iter().map(|c| c.center[0] + 0.5 * c.side).collect(),
            overlap: p.overlap(),
            r_sup: p.r_sup(),
        })
    }
}

#[wasm_bindgen]
impl CriticalMap {
    #[wasm_bindgen(constructor)]
    pub fn new(scale: f64, exponent: f64, n: usize, half_extent: f64) -> Result<CriticalMap, JsError> {
        CriticalMap::build(scale, exponent, n, half_extent).map_err(js)
    }

    #[wasm_bindgen(getter)]
    pub fn xs(&self) -> Vec<f64> {
        self.xs.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn rho(&self) -> Vec<f64> {
        self.rho.clone()
    }

    #[wasm_bindgen(getter, js_name = cubeLeft)]
    pub fn cube_left(&self) -> Vec<f64> {
        self.cube_left.clone()
    }

    #[wasm_bindgen(getter, js_name = cubeRight)]
    pub fn cube_right(&self) -> Vec<f64> {
        self.cube_right.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn overlap(&self) -> usize {
        self.overlap
    }

    #[wasm_bindgen(getter, js_name = rSup)]
    pub fn r_sup(&self) -> f64 {
        self.r_sup
    }
}

/// Rows `K(x0, .)` of `psi(sigma^2 (-Delta + V))` for a constant `V` and
/// the finite-speed window, whose kernel vanishes beyond `b sigma`.
#[wasm_bindgen]
pub struct KernelExplorer {
    grid: Grid,
    decomp: SpectralDecomp,
    window: Window,
    b: f64,
}

impl KernelExplorer {
    pub fn build(n: usize, half_extent: f64, potential: f64, b: f64) -> Result<KernelExplorer, String> {
        let grid = Grid::new(1, n, half_extent).map_err(|e| e.to_string())?;
        let v = PotentialSpec::Constant { value: potential }.build(&grid).map_err(|e| e.to_string())?;
        let decomp = eigendecompose(&v.operator()).map_err(|e| e.to_string())?;
        let window = Window::new(WindowVariant::FiniteSpeed { b }).map_err(|e| e.to_string())?;
        Ok(KernelExplorer { grid, decomp, window, b })
    }

    pub fn kernel_row(&self, sigma: f64, center: usize) -> Result<Vec<f64>, String> {
        if center >= self.grid.len() {
            return Err(format!("center index {center} is outside the grid"));
        }
        if sigma.is_nan() || sigma <= 0.0 {
            return Err("sigma must be positive".into());
        }
        let mut delta = Field::zeros(self.grid);
        delta.values_mut()[center] = C64::new(1.0 / self.grid.spacing(), 0.0);
        let k = apply_calculus(&self.decomp, |l| self.window.eval(sigma * sigma * l), &delta).map_err(|e| e.to_string())?;
        Ok(k.values().iter().map(|v| v.re).collect())
    }
}

#[wasm_bindgen]
impl KernelExplorer {
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, half_extent: f64, potential: f64, b: f64) -> Result<KernelExplorer, JsError> {
        KernelExplorer::build(n, half_extent, potential, b).map_err(js)
    }

    #[wasm_bindgen(getter)]
    pub fn xs(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|i| self.grid.point(i)[0]).collect()
    }

    /// Finite-speed radius `b sigma`.
    pub fn radius(&self, sigma: f64) -> f64 {
        self.b * sigma
    }

    pub fn row(&self, sigma: f64, center: usize) -> Result<Vec<f64>, JsError> {
        self.kernel_row(sigma, center).map_err(js)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalogram_reconstructs_and_localizes_the_chirp() {
        let s = Scalogram::build("chirp", 256, 16.0, 12).unwrap();
        assert!(s.reconstruction_error < 1e-10);
        assert_eq!(s.magnitudes.len(), s.sigmas.len() * s.xs.len());
        let n = s.xs.len();
        let row_mass = |m: usize| s.magnitudes[m * n..(m + 1) * n].iter().map(|v| v * v).sum::<f64>();
        let best = (0..s.sigmas.len()).max_by(|a, b| row_mass(*a).total_cmp(&row_mass(*b))).unwrap();
        let sigma = s.sigmas[best];
        assert!((0.05..2.0).contains(&sigma), "dominant scale {sigma}");
        assert!(Scalogram::build("noise", 64, 8.0, 12).is_err());
        assert!(Scalogram::build("chirp", 100, 8.0, 12).is_err());
    }

    #[test]
    fn harmonic_map_tracks_one_over_x() {
        let m = CriticalMap::build(1.0, 2.0, 256, 2.0).unwrap();
        assert_eq!(m.cube_left.len(), m.cube_right.len());
        let covered: f64 = m.cube_left.iter().zip(&m.cube_right).map(|(l, r)| r - l).sum();
        assert!((covered - 4.0).abs() < 1e-9, "cubes tile the box: {covered}");
        let at = |x: f64| m.rho[m.xs.iter().position(|v| (*v - x).abs() < 1e-12).unwrap()];
        assert!(at(0.0) > at(1.5));
        assert!(m.overlap >= 1 && m.r_sup >= at(0.0));
    }

    #[test]
    fn kernel_rows_vanish_beyond_the_finite_speed_radius() {
        let k = KernelExplorer::build(128, 8.0, 1.0, 1.0).unwrap();
        let xs = k.xs();
        let center = 64;
        for sigma in [0.5, 1.0, 2.0] {
            let row = k.kernel_row(sigma, center).unwrap();
            let peak = row.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let outside = row
                .iter()
                .zip(&xs)
                .filter(|(_, x)| (*x - xs[center]).abs() > k.radius(sigma) + 0.5)
                .map(|(v, _)| v.abs())
                .fold(0.0, f64::max);
            assert!(outside < 1e-6 * peak, "sigma {sigma}: {outside:e} vs {peak:e}");
        }
        assert!(k.kernel_row(1.0, 128).is_err());
        assert!(k.kernel_row(0.0, 0).is_err());
    }
}
