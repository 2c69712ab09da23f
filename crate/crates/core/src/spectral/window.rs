use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{gauss_legendre, integrate};

const QUAD_TOL: f64 = 1e-14;

/// Shape of a window profile `w` on the spectral variable `z = sigma^2 lambda`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum WindowVariant {
    /// Smooth bump in `ln z` supported on `[a, b]`.
    CompactBump { a: f64, b: f64 },
    /// `w(z) = c z^{(n+1)/2} exp(-((1 + a_g^2)/alpha) z)`.
    GaussianPoly { n: u32, a_g: f64, alpha: f64 },
    /// `w(z) = c z k(sqrt z)^2` where `k` is the cosine transform of a bump
    /// supported in `[-b/2, b/2]`, so that `w(sigma^2 A)` has kernel support
    /// of radius `b sigma`.
    FiniteSpeed { b: f64 },
}

impl Default for WindowVariant {
    fn default() -> Self {
        WindowVariant::CompactBump { a: 0.25, b: 16.0 }
    }
}

pub(crate) fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

/// Quadrature rules for the cosine transform of the bump, one per frequency
/// bracket.
#[derive(Clone, Debug)]
struct CosineRules {
    half_width: f64,
    brackets: Vec<(f64, Vec<f64>, Vec<f64>)>,
    cutoff: f64,
}

impl CosineRules {
    fn new(b: f64) -> Self {
        let brackets = [(100.0, 64), (300.0, 128), (700.0, 256), (1500.0, 512)]
            .into_iter()
            .map(|(limit, order)| {
                let (x, w) = gauss_legendre(order);
                let nodes: Vec<f64> = x.iter().map(|x| 0.5 * (x + 1.0)).collect();
                let weights = nodes.iter().zip(&w).map(|(u, w)| 0.5 * w * bump(*u)).collect();
                (limit, nodes, weights)
            })
            .collect();
        let mut rules = CosineRules { half_width: 0.5 * b, brackets, cutoff: f64::INFINITY };
        let peak = (0..2000).map(|i| rules.profile(i as f64 * 0.01 / b)).fold(0.0, f64::max);
        let mut s = 1.0 / b;
        let mut last = s;
        while s * rules.half_width < 1500.0 {
            if rules.profile(s) > 1e-18 * peak {
                last = s;
            }
            s *= 1.02;
        }
        rules.cutoff = last * 1.02;
        rules
    }

    /// `k(s) = 2 int_0^{b/2} bump(2t/b) cos(t s) dt`.
    fn transform(&self, s: f64) -> f64 {
        let omega = s * self.half_width;
        for (limit, nodes, weights) in &self.brackets {
            if omega <= *limit {
                let sum: f64 = nodes.iter().zip(weights).map(|(u, w)| w * (omega * u).cos()).sum();
                return 2.0 * self.half_width * sum;
            }
        }
        0.0
    }

    /// Unnormalized profile `s^2 k(s)^2` as a function of `s = sqrt z`.
    fn profile(&self, s: f64) -> f64 {
        if s >= self.cutoff {
            return 0.0;
        }
        let k = self.transform(s);
        s * s * k * k
    }
}

/// A calibrated window: `int_0^inf w(sigma^2)^2 dsigma/sigma = 1`.
#[derive(Clone, Debug)]
pub struct Window {
    variant: WindowVariant,
    norm_constant: f64,
    cosine: Option<CosineRules>,
}

impl Window {
    /// Builds and calibrates a window.
    pub fn new(variant: WindowVariant) -> Result<Self> {
        let cosine = match &variant {
            WindowVariant::CompactBump { a, b } => {
                if !(a.is_finite() && b.is_finite() && *a > 0.0 && b > a) {
                    return Err(Error::InvalidWindow(format!("support [{a}, {b}] needs 0 < a < b")));
                }
                None
            }
            WindowVariant::GaussianPoly { n, a_g, alpha } => {
                if *n < 1 || !(*alpha > 0.0) || !a_g.is_finite() {
                    return Err(Error::InvalidWindow(format!(
                        "gaussian_poly needs n >= 1 and alpha > 0 (n = {n}, alpha = {alpha})"
                    )));
                }
                None
            }
            WindowVariant::FiniteSpeed { b } => {
                if !(b.is_finite() && *b > 0.0) {
                    return Err(Error::InvalidWindow(format!("cosine support radius {b} must be positive")));
                }
                Some(CosineRules::new(*b))
            }
        };
        let mut w = Window { variant, norm_constant: 1.0, cosine };
        let mass = w.tail_unnormalized(0.0);
        w.norm_constant = 1.0 / mass.sqrt();
        Ok(w)
    }

    pub fn variant(&self) -> &WindowVariant {
        &self.variant
    }

    pub fn norm_constant(&self) -> f64 {
        self.norm_constant
    }

    /// Radius `b` of the cosine support for finite-speed windows.
    pub fn cosine_support(&self) -> Option<f64> {
        match self.variant {
            WindowVariant::FiniteSpeed { b } => Some(b),
            _ => None,
        }
    }

    fn beta(&self) -> f64 {
        match self.variant {
            WindowVariant::GaussianPoly { a_g, alpha, .. } => (1.0 + a_g * a_g) / alpha,
            _ => 0.0,
        }
    }

    fn raw(&self, z: f64) -> f64 {
        if !(z > 0.0) {
            return 0.0;
        }
        match &self.variant {
            WindowVariant::CompactBump { a, b } => {
                let (la, lb) = (a.ln(), b.ln());
                bump((2.0 * z.ln() - la - lb) / (lb - la))
            }
            WindowVariant::GaussianPoly { n, .. } => {
                let e = 0.5 * (*n as f64 + 1.0);
                (e * z.ln() - self.beta() * z).exp()
            }
            WindowVariant::FiniteSpeed { .. } => self.cosine.as_ref().unwrap().profile(z.sqrt()),
        }
    }

    /// `w(z)`.
    pub fn eval(&self, z: f64) -> f64 {
        self.norm_constant * self.raw(z)
    }

    /// Upper end of the region where `w(z)^2/z` carries mass, in `z`.
    fn z_cut(&self) -> f64 {
        match &self.variant {
            WindowVariant::CompactBump { b, .. } => *b,
            WindowVariant::GaussianPoly { n, .. } => {
                let beta = self.beta();
                let n = *n as f64;
                let mut z = (n / (2.0 * beta)).max(1.0);
                while 2.0 * beta * z - n * z.ln() < 90.0 {
                    z *= 1.25;
                }
                z
            }
            WindowVariant::FiniteSpeed { .. } => {
                let c = self.cosine.as_ref().unwrap().cutoff;
                c * c
            }
        }
    }

    fn tail_unnormalized(&self, t: f64) -> f64 {
        let zt = t * t;
        let hi = self.z_cut();
        if zt >= hi {
            return 0.0;
        }
        match &self.variant {
            WindowVariant::CompactBump { a, b } => {
                let lo = zt.max(*a).ln();
                0.5 * integrate(|v| self.raw(v.exp()).powi(2), lo, b.ln(), QUAD_TOL)
            }
            WindowVariant::GaussianPoly { n, .. } => {
                let beta = self.beta();
                let n = *n as i32;
                let f = |z: f64| z.powi(n) * (-2.0 * beta * z).exp();
                let peak = n as f64 / (2.0 * beta);
                if zt < peak {
                    0.5 * (integrate(f, zt, peak, QUAD_TOL) + integrate(f, peak, hi, QUAD_TOL))
                } else {
                    0.5 * integrate(f, zt, hi, QUAD_TOL)
                }
            }
            WindowVariant::FiniteSpeed { .. } => {
                let rules = self.cosine.as_ref().unwrap();
                let f = |s: f64| if s > 0.0 { rules.profile(s).powi(2) / s } else { 0.0 };
                let top = rules.cutoff;
                // Integrate on panels that follow the decay of the profile.
                let mut total = 0.0;
                let mut lo = t;
                let mut hi = if t > 0.0 { t * 1.5 } else { 0.25 };
                while lo < top {
                    let end = hi.min(top);
                    total += integrate(f, lo, end, QUAD_TOL);
                    lo = end;
                    hi = (lo * 1.5).max(lo + 0.25);
                }
                total
            }
        }
    }

    /// `Phi(t) = int_t^inf w(u^2)^2 du/u`.
    pub fn tail(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        self.norm_constant.powi(2) * self.tail_unnormalized(t)
    }

    /// `int_0^t w(u^2)^2 du/u`, integrated directly rather than as `1 - Phi`.
    pub fn head(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let c2 = self.norm_constant.powi(2);
        match &self.variant {
            WindowVariant::CompactBump { a, b } => {
                let hi = (t * t).min(*b);
                if hi <= *a {
                    return 0.0;
                }
                c2 * 0.5 * integrate(|v| self.raw(v.exp()).powi(2), a.ln(), hi.ln(), QUAD_TOL)
            }
            WindowVariant::GaussianPoly { n, .. } => {
                let beta = self.beta();
                let n = *n as i32;
                let hi = (t * t).min(self.z_cut());
                c2 * 0.5 * integrate(|z| z.powi(n) * (-2.0 * beta * z).exp(), 0.0, hi, QUAD_TOL)
            }
            WindowVariant::FiniteSpeed { .. } => {
                let rules = self.cosine.as_ref().unwrap();
                let f = |s: f64| if s > 0.0 { rules.profile(s).powi(2) / s } else { 0.0 };
                let top = t.min(rules.cutoff);
                let mut total = 0.0;
                let mut lo = 0.0;
                while lo < top {
                    let end = (lo * 1.5).max(lo + 0.25).min(top);
                    total += integrate(f, lo, end, QUAD_TOL);
                    lo = end;
                }
                c2 * total
            }
        }
    }

    /// Smallest `t` with `head(t) >= defect`; used to place the lower end of
    /// sigma grids.
    pub fn head_quantile(&self, defect: f64) -> f64 {
        let mut hi = 1.0;
        while self.head(hi) < defect {
            hi *= 2.0;
        }
        let mut lo = hi;
        while self.head(lo) >= defect && lo > 1e-12 {
            lo *= 0.5;
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.head(mid) >= defect {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Largest `t` with `tail(t) >= defect`.
    pub fn tail_quantile(&self, defect: f64) -> f64 {
        let mut lo = 1.0;
        while self.tail(lo) < defect {
            lo *= 0.5;
        }
        let mut hi = lo;
        while self.tail(hi) >= defect {
            hi *= 2.0;
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.tail(mid) >= defect {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}
