//! Phase-space norms and their comparators.
//!
//! Every mixed norm except the tent-type ones is a three-level nested sum
//! `(sum_a A_a (sum_b B_ab (sum_c C_e |F_e|^r)^{p/r})^{q/p})^{1/q}`, held by
//! [`NestedNorm`]. The tent norms average over balls and are evaluated
//! separately.

use serde::{Deserialize, Serialize};

use crate::critical::{for_each_in_ball, unit_ball_volume};
use crate::error::{Error, Result};
use crate::grid::{lp_norm, weighted_lp_norm, Field, FourierEngine, Grid};
use crate::packets::{Family, Layout, PhaseSpaceField, SlotKind};
use crate::par;
use crate::C64;

/// Which norm to put on phase space, with its exponents and weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum NormSpec {
    /// `L^p_x(L^2(dsigma / sigma^{1 + 2 alpha}))`.
    LpXL2Sigma {
        p: f64,
        #[serde(default)]
        alpha: f64,
    },
    /// `L^q(dsigma / sigma^{1 + q alpha}; L^p_x)`.
    LqSigmaLpX {
        p: f64,
        q: f64,
        #[serde(default)]
        alpha: f64,
    },
    /// `L^q((1 + |eta|)^{sq} deta; L^p_x)`.
    Modulation {
        p: f64,
        q: f64,
        #[serde(default)]
        s: f64,
    },
    /// `L^q_omega(L^p_x(L^2_sigma))` of `(I - Delta)^{s/2} F`.
    Decoupling {
        q: f64,
        p: f64,
        #[serde(default)]
        s: f64,
    },
    Tent { p: f64 },
    LocalTentGaussian { p: f64 },
    /// `l^p_j(L^p_x(L^2_sigma))` over critical cubes.
    CubeLplpl2 { p: f64 },
    /// `||(I - Delta)^{s/2} f||_p` on fields.
    Sobolev { s: f64, p: f64 },
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

impl NormSpec {
    /// Exponents and weights are finite, exponents in `[1, inf)`.
    pub fn validate(&self) -> Result<()> {
        let (exps, params): (Vec<f64>, Vec<f64>) = match *self {
            NormSpec::LpXL2Sigma { p, alpha } => (vec![p], vec![alpha]),
            NormSpec::LqSigmaLpX { p, q, alpha } => (vec![p, q], vec![alpha]),
            NormSpec::Modulation { p, q, s } | NormSpec::Decoupling { q, p, s } => (vec![p, q], vec![s]),
            NormSpec::Tent { p } | NormSpec::LocalTentGaussian { p } | NormSpec::CubeLplpl2 { p } => (vec![p], vec![]),
            NormSpec::Sobolev { s, p } => (vec![p], vec![s]),
        };
        exps.into_iter().try_for_each(check_exponent)?;
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite weight parameter in {self:?}")));
        }
        Ok(())
    }

    /// Whether fields of `family` can be measured with this spec.
    pub fn accepts(&self, family: Family) -> bool {
        match self {
            NormSpec::LpXL2Sigma { .. } | NormSpec::LqSigmaLpX { .. } => true,
            NormSpec::Modulation { .. } => family == Family::Modulation,
            NormSpec::Decoupling { .. } => family == Family::Directional,
            NormSpec::Tent { .. } => matches!(family, Family::LittlewoodPaley | Family::Operator),
            NormSpec::LocalTentGaussian { .. } => family == Family::Gaussian,
            NormSpec::CubeLplpl2 { .. } => family == Family::Critical,
            NormSpec::Sobolev { .. } => false,
        }
    }

    /// Short tag used in report rows, e.g. `lq_sigma_lp_x(p=3,q=2,alpha=0)`.
    pub fn label(&self) -> String {
        match *self {
            NormSpec::LpXL2Sigma { p, alpha } => format!("lp_x_l2_sigma(p={p},alpha={alpha})"),
            NormSpec::LqSigmaLpX { p, q, alpha } => format!("lq_sigma_lp_x(p={p},q={q},alpha={alpha})"),
            NormSpec::Modulation { p, q, s } => format!("modulation(p={p},q={q},s={s})"),
            NormSpec::Decoupling { q, p, s } => format!("decoupling(q={q},p={p},s={s})"),
            NormSpec::Tent { p } => format!("tent(p={p})"),
            NormSpec::LocalTentGaussian { p } => format!("local_tent_gaussian(p={p})"),
            NormSpec::CubeLplpl2 { p } => format!("cube_lplpl2(p={p})"),
            NormSpec::Sobolev { s, p } => format!("sobolev(s={s},p={p})"),
        }
    }

    /// The nested structure of this spec on `layout`, if it has one.
    pub fn nested(&self, layout: &Layout) -> Result<Option<NestedNorm>> {
        self.validate()?;
        self.check_family(layout.family())?;
        Ok(match *self {
            NormSpec::LpXL2Sigma { p, alpha } => Some(NestedNorm::grouped(layout, [p, p, 2.0], alpha, |_| 1.0)),
            NormSpec::CubeLplpl2 { p } => Some(NestedNorm::grouped(layout, [p, p, 2.0], 0.0, |_| 1.0)),
            NormSpec::Decoupling { q, p, .. } => Some(NestedNorm::grouped(layout, [q, p, 2.0], 0.0, |_| 1.0)),
            NormSpec::Modulation { p, q, s } => Some(NestedNorm::grouped(layout, [q, p, 2.0], 0.0, |coord| {
                let eta = coord.map_or(0.0, |c| (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt());
                (1.0 + eta).powf(s * q)
            })),
            NormSpec::LqSigmaLpX { p, q, alpha } => Some(NestedNorm::besov(layout, p, q, alpha)),
            _ => None,
        })
    }

    fn check_family(&self, family: Family) -> Result<()> {
        if self.accepts(family) {
            Ok(())
        } else {
            Err(Error::FamilyMismatch(format!("{} cannot measure a {family:?} field", self.label())))
        }
    }
}

/// A three-level nested Lebesgue norm over the entries of one layout.
///
/// Entries are grouped into cells and cells into outer classes; `exps` holds
/// `[q, p, r]` for the outer, middle and inner sums.
#[derive(Clone, Debug)]
pub struct NestedNorm {
    exps: [f64; 3],
    outer_weight: Vec<f64>,
    cell_outer: Vec<usize>,
    cell_weight: Vec<f64>,
    entry_cell: Vec<usize>,
    entry_weight: Vec<f64>,
}

fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

fn sigma_weight(sigma: f64, power: f64) -> f64 {
    if power == 0.0 {
        1.0
    } else {
        sigma.powf(-power)
    }
}

impl NestedNorm {
    /// Triebel-order norm: outer over channel groups (shared channels form an
    /// extra class), middle over grid points, inner over channels and slots.
    fn grouped<G: Fn(Option<[f64; 3]>) -> f64>(layout: &Layout, exps: [f64; 3], alpha: f64, group_factor: G) -> Self {
        let groups = layout.groups();
        let classes = groups + 1;
        let points = layout.grid().len();
        let mut outer_weight = vec![0.0; classes];
        let mut seen = vec![false; classes];
        for ch in layout.channels() {
            let g = ch.group.unwrap_or(groups);
            if !seen[g] {
                seen[g] = true;
                outer_weight[g] = ch.weight * group_factor(ch.coordinate);
            }
        }
        let cell_outer: Vec<usize> = (0..classes * points).map(|k| k / points).collect();
        let cell_weight: Vec<f64> = (0..classes * points).map(|k| layout.point_weights()[k % points]).collect();
        let mut entry_cell = vec![0; layout.len()];
        let mut entry_weight = vec![0.0; layout.len()];
        for (c, ch) in layout.channels().iter().enumerate() {
            let g = ch.group.unwrap_or(groups);
            let base = ch.weight / layout.channels().iter().find(|o| o.group.unwrap_or(groups) == g).map_or(1.0, |o| o.weight);
            for (s, &slot) in ch.slots.iter().enumerate() {
                let sl = &layout.slots()[slot];
                let w = base * sl.weight * sigma_weight(sl.sigma, 2.0 * alpha);
                for (p, e) in layout.block_range(c, s).enumerate() {
                    entry_cell[e] = g * points + layout.point(c, p);
                    entry_weight[e] = w;
                }
            }
        }
        NestedNorm { exps, outer_weight, cell_outer, cell_weight, entry_cell, entry_weight }
    }

    /// Besov-order norm: outer over `(channel, slot)`, middle over points.
    fn besov(layout: &Layout, p: f64, q: f64, alpha: f64) -> Self {
        let mut outer_weight = Vec::new();
        let mut cell_outer = Vec::new();
        let mut cell_weight = Vec::new();
        let mut entry_cell = vec![0; layout.len()];
        for (c, ch) in layout.channels().iter().enumerate() {
            for (s, &slot) in ch.slots.iter().enumerate() {
                let sl = &layout.slots()[slot];
                let k = outer_weight.len();
                outer_weight.push(ch.weight * sl.weight * sigma_weight(sl.sigma, q * alpha));
                for (pt, e) in layout.block_range(c, s).enumerate() {
                    entry_cell[e] = cell_outer.len();
                    cell_outer.push(k);
                    cell_weight.push(layout.point_weights()[layout.point(c, pt)]);
                }
            }
        }
        NestedNorm { exps: [q, p, 2.0], outer_weight, cell_outer, cell_weight, entry_cell, entry_weight: vec![1.0; layout.len()] }
    }

    pub fn exponents(&self) -> [f64; 3] {
        self.exps
    }

    /// The dual norm under the pairing `sum_e measure(e) F_e conj(G_e)`.
    pub fn dual(&self) -> NestedNorm {
        let mut d = self.clone();
        d.exps = self.exps.map(conjugate);
        d
    }

    /// Product of the three level weights for entry `e`.
    pub fn measure(&self, e: usize) -> f64 {
        let cell = self.entry_cell[e];
        self.outer_weight[self.cell_outer[cell]] * self.cell_weight[cell] * self.entry_weight[e]
    }

    pub fn len(&self) -> usize {
        self.entry_cell.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entry_cell.is_empty()
    }

    /// Per-cell `(sum C |F|^r)^{1/r}` and per-class middle norms.
    fn levels(&self, values: &[C64], scale: f64) -> (Vec<f64>, Vec<f64>) {
        let [_, p, r] = self.exps;
        let mut inner = vec![0.0f64; self.cell_outer.len()];
        if r.is_infinite() {
            for (e, v) in values.iter().enumerate() {
                let c = self.entry_cell[e];
                if self.entry_weight[e] > 0.0 {
                    inner[c] = inner[c].max(v.norm() / scale);
                }
            }
        } else {
            for (e, v) in values.iter().enumerate() {
                inner[self.entry_cell[e]] += self.entry_weight[e] * (v.norm() / scale).powf(r);
            }
            inner.iter_mut().for_each(|s| *s = s.powf(1.0 / r));
        }
        let mut middle = vec![0.0f64; self.outer_weight.len()];
        if p.is_infinite() {
            for (c, v) in inner.iter().enumerate() {
                if self.cell_weight[c] > 0.0 {
                    let k = self.cell_outer[c];
                    middle[k] = middle[k].max(*v);
                }
            }
        } else {
            for (c, v) in inner.iter().enumerate() {
                middle[self.cell_outer[c]] += self.cell_weight[c] * v.powf(p);
            }
            middle.iter_mut().for_each(|s| *s = s.powf(1.0 / p));
        }
        (inner, middle)
    }

    fn outer(&self, middle: &[f64]) -> f64 {
        let q = self.exps[0];
        if q.is_infinite() {
            middle
                .iter()
                .zip(&self.outer_weight)
                .filter(|(_, w)| **w > 0.0)
                .map(|(m, _)| *m)
                .fold(0.0, f64::max)
        } else {
            middle.iter().zip(&self.outer_weight).map(|(m, w)| w * m.powf(q)).sum::<f64>().powf(1.0 / q)
        }
    }

    pub fn eval(&self, values: &[C64]) -> f64 {
        let scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let (_, middle) = self.levels(values, scale);
        scale * self.outer(&middle)
    }

    /// Norming functional of `values`: the `H` with `sum measure F conj(H)
    /// = ||F||` and unit dual norm. Requires finite exponents.
    pub fn norming(&self, values: &[C64]) -> Vec<C64> {
        let [q, p, r] = self.exps;
        let scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return vec![C64::new(0.0, 0.0); values.len()];
        }
        let (inner, middle) = self.levels(values, scale);
        let total = self.outer(&middle);
        values
            .iter()
            .enumerate()
            .map(|(e, v)| {
                let c = self.entry_cell[e];
                let k = self.cell_outer[c];
                let (i, m) = (inner[c], middle[k]);
                let a = v.norm() / scale;
                if a == 0.0 || i == 0.0 || m == 0.0 {
                    return C64::new(0.0, 0.0);
                }
                let phase = v / v.norm();
                phase * a.powf(r - 1.0) * i.powf(p - r) * m.powf(q - p) / total.powf(q - 1.0)
            })
            .collect()
    }
}

/// Norm of `field` under `spec`.
pub fn phase_norm(field: &PhaseSpaceField, spec: &NormSpec) -> Result<f64> {
    if let Some(nested) = spec.nested(field.layout())? {
        if let NormSpec::Decoupling { s, .. } = *spec {
            return Ok(nested.eval(bessel_blocks(field, s).values()));
        }
        return Ok(nested.eval(field.values()));
    }
    match *spec {
        NormSpec::Tent { p } => tent_norm(field, p),
        NormSpec::LocalTentGaussian { p } => local_tent_gaussian_norm(field, p),
        _ => Err(Error::FamilyMismatch(format!("{} applies to fields, not phase space", spec.label()))),
    }
}

/// Norm of a field under a field-space spec (currently only Sobolev).
pub fn field_norm(f: &Field, spec: &NormSpec) -> Result<f64> {
    match *spec {
        NormSpec::Sobolev { s, p } => sobolev_norm(f, s, p),
        _ => Err(Error::FamilyMismatch(format!("{} is a phase-space norm", spec.label()))),
    }
}

fn bessel_symbol(grid: &Grid, s: f64) -> Vec<C64> {
    (0..grid.len()).map(|i| C64::new((1.0 + grid.frequency_norm_sq(i)).powf(0.5 * s), 0.0)).collect()
}

/// `(I - Delta)^{s/2}` applied to every full-grid block of `field`.
pub fn bessel_blocks(field: &PhaseSpaceField, s: f64) -> PhaseSpaceField {
    if s == 0.0 {
        return field.clone();
    }
    let layout = field.layout().clone();
    let engine = FourierEngine::new(layout.grid());
    let symbol = bessel_symbol(layout.grid(), s);
    let mut out = field.clone();
    for (c, ch) in layout.channels().iter().enumerate() {
        if ch.points.is_some() {
            continue;
        }
        for s in 0..ch.slots.len() {
            let filtered = engine.multiply(field.block(c, s), &symbol);
            out.block_mut(c, s).copy_from_slice(&filtered);
        }
    }
    out
}

/// Circular convolution with a kernel given by its unitary transform.
fn convolve(engine: &FourierEngine, signs: &[f64], data: &[f64], kernel_hat: &[C64]) -> Vec<f64> {
    let mut work: Vec<C64> = data.iter().map(|&v| C64::new(v, 0.0)).collect();
    engine.forward(&mut work);
    let root = (data.len() as f64).sqrt();
    for ((v, k), s) in work.iter_mut().zip(kernel_hat).zip(signs) {
        *v *= k * root * s;
    }
    engine.inverse(&mut work);
    work.into_iter().map(|v| v.re).collect()
}

/// Normalized ramp-weighted indicator of the ball of radius `r` around index 0.
fn ball_kernel(grid: &Grid, r: f64) -> Vec<f64> {
    let mut k = vec![0.0; grid.len()];
    let origin = grid.point(0);
    for_each_in_ball(grid, &origin, r, |i, w| k[i] += w);
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Ball averages `avg_{B(x, r)} values` at every grid point.
pub fn ball_averages(grid: &Grid, values: &[f64], r: f64) -> Vec<f64> {
    let engine = FourierEngine::new(grid);
    let signs = parity_signs(grid);
    let mut kernel: Vec<C64> = ball_kernel(grid, r).into_iter().map(|v| C64::new(v, 0.0)).collect();
    engine.forward(&mut kernel);
    convolve(&engine, &signs, values, &kernel)
}

fn parity_signs(grid: &Grid) -> Vec<f64> {
    (0..grid.len())
        .map(|i| {
            let m = grid.multi_index(i);
            if m[..grid.d()].iter().sum::<usize>() % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

/// `(int (int sigma^{-d} int_{B(x, sigma)} |F|^2 dy dsigma/sigma)^{p/2} dx)^{1/p}`
/// plus the `L^p` norm of the completion channel.
pub fn tent_norm(field: &PhaseSpaceField, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let layout = field.layout().clone();
    if !(NormSpec::Tent { p }).accepts(layout.family()) {
        return Err(Error::FamilyMismatch(format!("tent norm of a {:?} field", layout.family())));
    }
    let grid = *layout.grid();
    let engine = FourierEngine::new(&grid);
    let signs = parity_signs(&grid);
    let cd = unit_ball_volume(grid.d());
    let mut density = vec![0.0; grid.len()];
    let mut extra = 0.0;
    for (c, ch) in layout.channels().iter().enumerate() {
        for (s, &slot) in ch.slots.iter().enumerate() {
            let sl = &layout.slots()[slot];
            if !matches!(sl.kind, SlotKind::Scale(_)) {
                extra += weighted_lp_norm(field.block(c, s), p, |i| ch.weight * sl.weight.powf(p / 2.0) * layout.point_weights()[layout.point(c, i)])?;
                continue;
            }
            if ch.points.is_some() {
                return Err(Error::FamilyMismatch("tent norm needs full-grid scale channels".into()));
            }
            let energy: Vec<f64> = field.block(c, s).iter().map(|v| v.norm_sqr()).collect();
            if energy.iter().all(|&v| v == 0.0) {
                continue;
            }
            let mut kernel: Vec<C64> = ball_kernel(&grid, sl.sigma).into_iter().map(|v| C64::new(v, 0.0)).collect();
            engine.forward(&mut kernel);
            let avg = convolve(&engine, &signs, &energy, &kernel);
            for (a, v) in density.iter_mut().zip(avg) {
                *a += cd * ch.weight * sl.weight * v.max(0.0);
            }
        }
    }
    let main: f64 = density.iter().zip(layout.point_weights()).map(|(a, w)| w * a.powf(p / 2.0)).sum::<f64>().powf(1.0 / p);
    Ok(main + extra)
}

/// `gamma(B(x, r))` for `d gamma = exp(-x^2) dx` in one dimension.
pub fn gaussian_ball_measure(x: f64, r: f64) -> f64 {
    let half = 0.5 * std::f64::consts::PI.sqrt();
    let (a, b) = (x - r, x + r);
    if a > 0.0 {
        half * (libm::erfc(a) - libm::erfc(b))
    } else if b < 0.0 {
        half * (libm::erfc(-b) - libm::erfc(-a))
    } else {
        half * (libm::erf(b) - libm::erf(a))
    }
}

/// Local Gaussian tent norm `t^{p,2}(gamma)` of the main channel plus the
/// `L^p(gamma)` norm of the remainder channel.
pub fn local_tent_gaussian_norm(field: &PhaseSpaceField, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let layout = field.layout().clone();
    if layout.family() != Family::Gaussian || layout.grid().d() != 1 {
        return Err(Error::FamilyMismatch(format!("local Gaussian tent norm of a {:?} field", layout.family())));
    }
    let grid = *layout.grid();
    let pw = layout.point_weights();
    let mut remainder = 0.0;
    let mut density = vec![0.0; grid.len()];
    for (c, ch) in layout.channels().iter().enumerate() {
        if ch.index.is_remainder() {
            for s in 0..ch.slots.len() {
                let sw = layout.slots()[ch.slots[s]].weight;
                remainder += weighted_lp_norm(field.block(c, s), p, |i| ch.weight * sw.powf(p / 2.0) * pw[layout.point(c, i)])?;
            }
            continue;
        }
        if ch.points.is_some() {
            return Err(Error::FamilyMismatch("Gaussian main channel must cover the grid".into()));
        }
        for (s, &slot) in ch.slots.iter().enumerate() {
            let sl = &layout.slots()[slot];
            if !(sl.sigma > 0.0 && sl.sigma < 1.0 + 1e-12) {
                return Err(Error::InvalidArgument(format!("sigma node {} lies outside (0, 1]", sl.sigma)));
            }
            let block = field.block(c, s);
            let row = par::map(grid.len(), |i| {
                let x = grid.point(i);
                let mut num = 0.0;
                for_each_in_ball(&grid, &x, sl.sigma, |k, w| num += w * pw[k] * block[k].norm_sqr());
                let den = gaussian_ball_measure(x[0], sl.sigma);
                if den > 0.0 {
                    num / den
                } else {
                    0.0
                }
            });
            for (a, v) in density.iter_mut().zip(row) {
                *a += ch.weight * sl.weight * v;
            }
        }
    }
    let main: f64 = density.iter().zip(pw).map(|(a, w)| w * a.powf(p / 2.0)).sum::<f64>().powf(1.0 / p);
    Ok(main + remainder)
}

/// `||(I - Delta)^{s/2} f||_p`.
pub fn sobolev_norm(f: &Field, s: f64, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if s == 0.0 {
        return lp_norm(f, p);
    }
    let engine = FourierEngine::new(f.grid());
    let g = Field::new(*f.grid(), engine.multiply(f.values(), &bessel_symbol(f.grid(), s)))?;
    lp_norm(&g, p)
}

/// `s(p) = ((d - 1)/2) |1/p - 1/2|`.
pub fn s_p(d: usize, p: f64) -> f64 {
    0.5 * (d as f64 - 1.0) * (1.0 / p - 0.5).abs()
}
