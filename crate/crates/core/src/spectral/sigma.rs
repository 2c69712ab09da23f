use serde::{Deserialize, Serialize};

use super::window::Window;
use crate::error::{Error, Result};

/// Log-uniform discretization of `(sigma_min, sigma_max)` against `dsigma/sigma`.
///
/// The range is cut into `M = ceil(ppd * log10(max/min))` cells of equal
/// logarithmic width `Delta`; node `m` sits at the geometric midpoint of its
/// cell and carries weight `Delta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaGrid {
    sigma_min: f64,
    sigma_max: f64,
    points_per_decade: usize,
    nodes: Vec<f64>,
    log_step: f64,
}

impl SigmaGrid {
    pub fn new(sigma_min: f64, sigma_max: f64, points_per_decade: usize) -> Result<Self> {
        if !(sigma_min > 0.0 && sigma_max > sigma_min && sigma_max.is_finite()) {
            return Err(Error::InvalidSigmaGrid(format!(
                "need 0 < sigma_min < sigma_max, got [{sigma_min}, {sigma_max}]"
            )));
        }
        if points_per_decade == 0 {
            return Err(Error::InvalidSigmaGrid("points_per_decade must be positive".into()));
        }
        let ratio = (sigma_max / sigma_min).ln();
        let count = (points_per_decade as f64 * ratio / std::f64::consts::LN_10).ceil().max(1.0) as usize;
        let log_step = ratio / count as f64;
        let nodes = (0..count)
            .map(|m| sigma_min * ((m as f64 + 0.5) * log_step).exp())
            .collect();
        Ok(SigmaGrid { sigma_min, sigma_max, points_per_decade, nodes, log_step })
    }

    /// Grid whose lower end resolves `lambda_max` to the given defect.
    pub fn covering(window: &Window, lambda_max: f64, sigma_max: f64, ppd: usize, defect: f64) -> Result<Self> {
        let t = window.head_quantile(defect);
        let sigma_min = (t / lambda_max.max(1e-300).sqrt()).min(0.5 * sigma_max);
        SigmaGrid::new(sigma_min, sigma_max, ppd)
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn points_per_decade(&self) -> usize {
        self.points_per_decade
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Quadrature weight `ln(sigma_{m+1}/sigma_m)`, the same for every node.
    pub fn weight(&self) -> f64 {
        self.log_step
    }

    /// Cell edges of node `m`.
    pub fn cell(&self, m: usize) -> (f64, f64) {
        let lo = self.sigma_min * (m as f64 * self.log_step).exp();
        (lo, lo * self.log_step.exp())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Gains divided by `sqrt(s(lambda))` so the discrete identity is exact.
    #[default]
    Discrete,
    /// Gains left at their calibrated values.
    Raw,
}

/// Per-eigenvalue gains `w~(sigma_m^2 lambda)` together with the completion
/// gain `rho_0(lambda) = sqrt(max(0, 1 - sum_m Delta w~^2))`.
#[derive(Clone, Debug)]
pub struct GainTable {
    scales: usize,
    weight: f64,
    gains: Vec<f64>,
    completion: Vec<f64>,
    coverage: Vec<f64>,
}

impl GainTable {
    pub fn len(&self) -> usize {
        self.completion.len()
    }

    pub fn is_empty(&self) -> bool {
        self.completion.is_empty()
    }

    pub fn scales(&self) -> usize {
        self.scales
    }

    /// Gain of node `m` at spectral index `i`.
    pub fn gain(&self, i: usize, m: usize) -> f64 {
        self.gains[i * self.scales + m]
    }

    pub fn gains_at(&self, i: usize) -> &[f64] {
        &self.gains[i * self.scales..(i + 1) * self.scales]
    }

    pub fn completion(&self, i: usize) -> f64 {
        self.completion[i]
    }

    /// Raw coverage `s(lambda_i) = sum_m Delta w(sigma_m^2 lambda_i)^2`.
    pub fn coverage(&self, i: usize) -> f64 {
        self.coverage[i]
    }

    /// `sum_{m in nodes} Delta gain^2`, the discrete resolution of identity
    /// without the completion.
    pub fn resolved(&self, i: usize) -> f64 {
        self.gains_at(i).iter().map(|g| self.weight * g * g).sum()
    }

    /// Discrete tail above `rho`: `sum_{sigma_m > rho} Delta gain^2 + rho_0^2`.
    pub fn tail(&self, i: usize, sigma: &SigmaGrid, rho: f64) -> f64 {
        let mut t = self.completion[i].powi(2);
        for (m, s) in sigma.nodes().iter().enumerate() {
            if *s > rho {
                t += self.weight * self.gain(i, m).powi(2);
            }
        }
        t
    }
}

/// A window on a sigma grid with a normalization mode.
#[derive(Clone, Debug)]
pub struct ScaleFrame {
    pub window: Window,
    pub sigma: SigmaGrid,
    pub mode: Normalization,
}

impl ScaleFrame {
    pub fn new(window: Window, sigma: SigmaGrid, mode: Normalization) -> Self {
        ScaleFrame { window, sigma, mode }
    }

    /// Analytic mass of `sigma -> w(sigma^2 lambda)^2` below `sigma_min`.
    pub fn truncation_defect(&self, lambda: f64) -> f64 {
        if lambda <= 0.0 {
            return 0.0;
        }
        self.window.head(self.sigma.sigma_min() * lambda.sqrt())
    }

    /// Errors when the largest eigenvalue leaks below the grid.
    pub fn check_coverage(&self, lambda_max: f64, tolerance: f64) -> Result<()> {
        let defect = self.truncation_defect(lambda_max);
        if defect > tolerance {
            return Err(Error::CoverageDefect { defect, tolerance });
        }
        Ok(())
    }

    pub fn gains(&self, lambdas: &[f64]) -> GainTable {
        let m = self.sigma.len();
        let weight = self.sigma.weight();
        let mut gains = Vec::with_capacity(lambdas.len() * m);
        let mut completion = Vec::with_capacity(lambdas.len());
        let mut coverage = Vec::with_capacity(lambdas.len());
        for &lambda in lambdas {
            let start = gains.len();
            for s in self.sigma.nodes() {
                gains.push(self.window.eval(s * s * lambda.max(0.0)));
            }
            let cov: f64 = gains[start..].iter().map(|g| weight * g * g).sum();
            if self.mode == Normalization::Discrete && cov > 1.0 {
                let scale = cov.sqrt().recip();
                for g in &mut gains[start..] {
                    *g *= scale;
                }
            }
            let resolved: f64 = gains[start..].iter().map(|g| weight * g * g).sum();
            completion.push((1.0 - resolved).max(0.0).sqrt());
            coverage.push(cov);
        }
        GainTable { scales: m, weight, gains, completion, coverage }
    }
}
