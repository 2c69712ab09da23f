//! Reverse Hölder constants, the critical radius of a potential and the
//! dyadic partition of the box into critical cubes.
//!
//! Balls are periodic (minimum-image distance). A cell whose centre lies at
//! distance `r'` from the ball centre enters ball sums with the ramp weight
//! `clamp((r - r')/h + 1/2, 0, 1)`, which is exact for intervals in one
//! dimension and makes every ball sum continuous in the radius. Integrals over
//! balls are the weighted average of the integrand times the exact ball
//! volume.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sample_real, Field, Grid, Point};
use crate::par;
use crate::spectral::OperatorSpec;

/// Nonnegative potential with the exponent used for reverse Hölder checks.
#[derive(Clone, Debug)]
pub struct Potential {
    field: Field,
    rh_exponent: f64,
}

impl Potential {
    pub fn new(field: Field, rh_exponent: f64) -> Result<Self> {
        crate::spectral::OperatorSpec::schrodinger(field.clone())?;
        if field.values().iter().all(|v| v.re == 0.0) {
            return Err(Error::InvalidPotential("identically zero".into()));
        }
        Ok(Potential { field, rh_exponent })
    }

    /// `V = c`.
    pub fn constant(grid: &Grid, c: f64) -> Result<Self> {
        Potential::new(sample_real(grid, |_| c), 2.0)
    }

    /// `V = c |x|^2`.
    pub fn harmonic(grid: &Grid, c: f64) -> Result<Self> {
        Potential::new(sample_real(grid, |x| c * x.iter().map(|v| v * v).sum::<f64>()), 2.0)
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    pub fn rh_exponent(&self) -> f64 {
        self.rh_exponent
    }

    pub fn value(&self, i: usize) -> f64 {
        self.field.values()[i].re
    }

    pub fn operator(&self) -> OperatorSpec {
        OperatorSpec::Schrodinger { potential: self.field.clone() }
    }
}

/// Closed-form potentials used by configs and sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `V = value`.
    Constant { value: f64 },
    /// `V = scale |x|^exponent`.
    Power { scale: f64, exponent: f64 },
}

impl PotentialSpec {
    pub fn build(&self, grid: &Grid) -> Result<Potential> {
        match *self {
            PotentialSpec::Constant { value } => Potential::constant(grid, value),
            PotentialSpec::Power { scale, exponent } => Potential::new(
                sample_real(grid, |x| scale * x.iter().map(|v| v * v).sum::<f64>().powf(0.5 * exponent)),
                2.0,
            ),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            PotentialSpec::Constant { value } => format!("V={value}"),
            PotentialSpec::Power { scale, exponent } => format!("V={scale}|x|^{exponent}"),
        }
    }
}

/// Volume of the unit ball in `d` dimensions.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => PI,
        _ => 4.0 * PI / 3.0,
    }
}

/// Ramp weight of a cell at distance `dist` from the centre of a ball of radius `r`.
pub fn cell_weight(dist: f64, r: f64, h: f64) -> f64 {
    ((r - dist) / h + 0.5).clamp(0.0, 1.0)
}

/// Calls `visit(index, weight)` for every cell with positive ramp weight in
/// the periodic ball `B(x, r)`.
pub fn for_each_in_ball<F: FnMut(usize, f64)>(grid: &Grid, x: &Point, r: f64, mut visit: F) {
    let n = grid.n() as i64;
    let h = grid.spacing();
    let l = grid.half_extent();
    let mut ranges = [(0i64, 0i64); 3];
    for a in 0..grid.d() {
        let lo = ((x[a] + l - r) / h).floor() as i64 - 1;
        let hi = ((x[a] + l + r) / h).ceil() as i64 + 1;
        ranges[a] = if hi - lo + 1 >= n { (0, n - 1) } else { (lo, hi) };
    }
    let wrap = |k: i64| k.rem_euclid(n) as usize;
    let mut m = [0usize; 3];
    let (r0, r1, r2) = (ranges[0], ranges[1], ranges[2]);
    for k0 in r0.0..=r0.1 {
        m[0] = wrap(k0);
        for k1 in r1.0..=r1.1 {
            m[1] = wrap(k1);
            for k2 in r2.0..=r2.1 {
                m[2] = wrap(k2);
                let i = grid.flat_index(&m);
                let w = cell_weight(grid.distance(x, &grid.point(i)), r, h);
                if w > 0.0 {
                    visit(i, w);
                }
            }
        }
    }
}

/// Ramp-weighted average of `f` over `B(x, r)`.
pub fn ball_average<F: Fn(usize) -> f64>(grid: &Grid, x: &Point, r: f64, f: F) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for_each_in_ball(grid, x, r, |i, w| {
        num += w * f(i);
        den += w;
    });
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// `int_{B(x, r)} V`.
pub fn ball_integral(v: &Potential, x: &Point, r: f64) -> f64 {
    let g = v.grid();
    unit_ball_volume(g.d()) * r.powi(g.d() as i32) * ball_average(g, x, r, |i| v.value(i))
}

/// Largest sampled `(avg V^q)^{1/q} / avg V` over all `(centre, radius)` pairs.
pub fn reverse_holder_constant(v: &Potential, q: f64, centers: &[Point], radii: &[f64]) -> Result<f64> {
    let g = v.grid();
    if !(q >= 1.0) {
        return Err(Error::InvalidExponent(q));
    }
    let mut best: f64 = 0.0;
    for x in centers {
        for &r in radii {
            if (0..g.d()).any(|a| x[a].abs() + r > g.half_extent() + 1e-12) {
                return Err(Error::BallExitsBox { center: x[..g.d()].to_vec(), radius: r });
            }
            let avg = ball_average(g, x, r, |i| v.value(i));
            if avg <= 0.0 {
                return Err(Error::ZeroAverage);
            }
            let avg_q = ball_average(g, x, r, |i| v.value(i).powf(q));
            best = best.max(avg_q.powf(1.0 / q) / avg);
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusFlag {
    /// The crossing was found inside `[h, L]`.
    Resolved,
    /// Already above 1 at `r = h`; the value is clamped to `h`.
    ClampedLow,
    /// Still below 1 at `r = L`; the value is clamped to `L`.
    ClampedHigh,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalRadius {
    pub value: f64,
    pub flag: RadiusFlag,
}

fn mass_profile(v: &Potential, x: &Point, r: f64) -> f64 {
    r.powi(2 - v.grid().d() as i32) * ball_integral(v, x, r)
}

/// Crossing of `r -> r^{2-d} int_{B(x,r)} V = 1` by bisection on `[h, L]`.
pub fn critical_radius(v: &Potential, x: &Point) -> CriticalRadius {
    let g = v.grid();
    let (mut lo, mut hi) = (g.spacing(), g.half_extent());
    if mass_profile(v, x, lo) >= 1.0 {
        return CriticalRadius { value: lo, flag: RadiusFlag::ClampedLow };
    }
    if mass_profile(v, x, hi) < 1.0 {
        return CriticalRadius { value: hi, flag: RadiusFlag::ClampedHigh };
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass_profile(v, x, mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    CriticalRadius { value: 0.5 * (lo + hi), flag: RadiusFlag::Resolved }
}

#[derive(Clone, Debug)]
pub struct CriticalRadiusField {
    pub rho: Vec<f64>,
    pub r_sup: f64,
    pub flagged: Vec<usize>,
}

impl CriticalRadiusField {
    pub fn min(&self) -> f64 {
        self.rho.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn critical_radius_field(v: &Potential) -> CriticalRadiusField {
    let g = *v.grid();
    let radii = par::map(g.len(), |i| critical_radius(v, &g.point(i)));
    let rho: Vec<f64> = radii.iter().map(|c| c.value).collect();
    let flagged = radii
        .iter()
        .enumerate()
        .filter(|(_, c)| c.flag != RadiusFlag::Resolved)
        .map(|(i, _)| i)
        .collect();
    let r_sup = rho.iter().copied().fold(0.0, f64::max);
    CriticalRadiusField { rho, r_sup, flagged }
}

/// A dyadic cube of the box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub label: usize,
    pub level: u32,
    pub address: [usize; 3],
    pub center: Point,
    pub side: f64,
    pub rho: f64,
}

#[derive(Clone, Debug)]
pub struct CriticalPartition {
    grid: Grid,
    cubes: Vec<Cube>,
    members: Vec<Vec<usize>>,
    overlap: usize,
    r_sup: f64,
}

type Node = (u32, [usize; 3]);

fn node_geometry(grid: &Grid, node: &Node) -> (Point, f64) {
    let side = 2.0 * grid.half_extent() / (1u64 << node.0) as f64;
    let mut c = [0.0; 3];
    for a in 0..grid.d() {
        c[a] = -grid.half_extent() + (node.1[a] as f64 + 0.5) * side;
    }
    (c, side)
}

fn children(d: usize, node: &Node) -> Vec<Node> {
    (0..1usize << d)
        .map(|bits| {
            let mut addr = [0; 3];
            for a in 0..d {
                let bit = (bits >> (d - 1 - a)) & 1;
                addr[a] = 2 * node.1[a] + bit;
            }
            (node.0 + 1, addr)
        })
        .collect()
}

fn parent(d: usize, node: &Node) -> Node {
    let mut addr = [0; 3];
    for a in 0..d {
        addr[a] = node.1[a] / 2;
    }
    (node.0 - 1, addr)
}

fn is_descendant(d: usize, node: &Node, ancestor: &Node) -> bool {
    if node.0 < ancestor.0 {
        return false;
    }
    let shift = node.0 - ancestor.0;
    (0..d).all(|a| node.1[a] >> shift == ancestor.1[a])
}

fn critical(side: f64, rho: f64) -> bool {
    side <= 2.0 * rho * (1.0 + 1e-12) && side >= 0.5 * rho * (1.0 - 1e-12)
}

/// Stopping-time partition: split while `side > 2 rho(centre)`, then merge
/// leaves that violate `side >= rho/2` into their parents.
pub fn build_partition(v: &Potential, field: &CriticalRadiusField) -> Result<CriticalPartition> {
    let grid = *v.grid();
    let d = grid.d();
    let limit = 4.0 * grid.spacing();
    let rho_min = field.min();
    if rho_min < limit * (1.0 - 1e-12) {
        return Err(Error::ResolutionGuard { rho_min, limit });
    }
    let max_level = grid.n().trailing_zeros();
    let rho_at = |node: &Node| critical_radius(v, &node_geometry(&grid, node).0).value;

    let mut leaves: HashSet<Node> = HashSet::new();
    let mut stack: Vec<Node> = vec![(0, [0; 3])];
    while let Some(node) = stack.pop() {
        let side = node_geometry(&grid, &node).1;
        if side > 2.0 * rho_at(&node) && node.0 < max_level {
            stack.extend(children(d, &node));
        } else {
            leaves.insert(node);
        }
    }

    for _ in 0..=max_level * 4 {
        let mut violations: Vec<Node> = leaves
            .iter()
            .filter(|n| n.0 > 0 && node_geometry(&grid, n).1 < 0.5 * rho_at(n) * (1.0 - 1e-12))
            .copied()
            .collect();
        if violations.is_empty() {
            break;
        }
        violations.sort();
        for node in violations {
            if !leaves.contains(&node) {
                continue;
            }
            let up = parent(d, &node);
            leaves.retain(|n| !is_descendant(d, n, &up));
            leaves.insert(up);
        }
    }

    let mut ordered = Vec::with_capacity(leaves.len());
    let mut stack: Vec<Node> = vec![(0, [0; 3])];
    while let Some(node) = stack.pop() {
        if leaves.contains(&node) {
            ordered.push(node);
        } else if node.0 < max_level {
            let mut kids = children(d, &node);
            kids.reverse();
            stack.extend(kids);
        }
    }

    let cubes: Vec<Cube> = ordered
        .iter()
        .enumerate()
        .map(|(label, node)| {
            let (center, side) = node_geometry(&grid, node);
            Cube { label, level: node.0, address: node.1, center, side, rho: rho_at(node) }
        })
        .collect();
    let bad: Vec<usize> = cubes.iter().filter(|c| !critical(c.side, c.rho)).map(|c| c.label).collect();
    if !bad.is_empty() {
        return Err(Error::CriticalityUnattainable(bad));
    }
    let members = cubes.iter().map(|c| cube_members(&grid, c)).collect();
    let mut partition = CriticalPartition { grid, cubes, members, overlap: 0, r_sup: field.r_sup };
    partition.overlap = overlap_constant(&partition);
    Ok(partition)
}

fn cube_members(grid: &Grid, cube: &Cube) -> Vec<usize> {
    let per = grid.n() >> cube.level;
    let d = grid.d();
    let mut out = Vec::with_capacity(per.pow(d as u32));
    let count = per.pow(d as u32);
    for k in 0..count {
        let mut m = [0usize; 3];
        let mut rest = k;
        for a in (0..d).rev() {
            m[a] = cube.address[a] * per + rest % per;
            rest /= per;
        }
        out.push(grid.flat_index(&m));
    }
    out.sort_unstable();
    out
}

/// Number of cubes meeting the doubled cube `2Q_j`, maximized over `j`.
pub fn overlap_constant(p: &CriticalPartition) -> usize {
    (0..p.cubes.len())
        .map(|j| (0..p.cubes.len()).filter(|&k| p.doubled_meets(j, k)).count())
        .max()
        .unwrap_or(0)
}

impl CriticalPartition {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn cubes(&self) -> &[Cube] {
        &self.cubes
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// Grid indices inside cube `j`, ascending.
    pub fn members(&self, j: usize) -> &[usize] {
        &self.members[j]
    }

    pub fn overlap(&self) -> usize {
        self.overlap
    }

    /// Supremum `R` of the critical radius over the box.
    pub fn r_sup(&self) -> f64 {
        self.r_sup
    }

    /// Label of the cube containing grid point `i`.
    pub fn cube_of(&self, i: usize) -> usize {
        let m = self.grid.multi_index(i);
        self.cubes
            .iter()
            .position(|c| {
                let per = self.grid.n() >> c.level;
                (0..self.grid.d()).all(|a| m[a] / per == c.address[a])
            })
            .expect("cubes tile the grid")
    }

    fn axis_offset(&self, j: usize, k: usize, a: usize) -> f64 {
        let period = 2.0 * self.grid.half_extent();
        let mut v = self.cubes[j].center[a] - self.cubes[k].center[a];
        v -= period * (v / period).round();
        v.abs()
    }

    /// Whether `2Q_j` and `Q_k` share interior points.
    pub fn doubled_meets(&self, j: usize, k: usize) -> bool {
        let tol = 1e-9 * self.grid.spacing();
        (0..self.grid.d()).all(|a| {
            let reach = self.cubes[j].side + 0.5 * self.cubes[k].side;
            self.axis_offset(j, k, a) < reach - tol
        })
    }

    /// Euclidean gap between `Q_j` and `Q_k` on the torus.
    pub fn distance(&self, j: usize, k: usize) -> f64 {
        (0..self.grid.d())
            .map(|a| {
                let gap = self.axis_offset(j, k, a) - 0.5 * (self.cubes[j].side + self.cubes[k].side);
                gap.max(0.0).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// CSV with columns `label,center_0..,side,rho,level`.
    pub fn to_csv(&self) -> String {
        let d = self.grid.d();
        let mut out = String::from("label");
        for a in 0..d {
            let _ = write!(out, ",center_{a}");
        }
        out.push_str(",side,rho,level\n");
        for c in &self.cubes {
            let _ = write!(out, "{}", c.label);
            for a in 0..d {
                let _ = write!(out, ",{}", c.center[a]);
            }
            let _ = writeln!(out, ",{},{},{}", c.side, c.rho, c.level);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_weights_measure_intervals_exactly() {
        let g = Grid::new(1, 64, 4.0).unwrap();
        for (x, r) in [(0.0, 1.0), (0.0371, 0.77), (3.9, 0.5)] {
            let mut total = 0.0;
            for_each_in_ball(&g, &[x, 0.0, 0.0], r, |_, w| total += w);
            assert!((total * g.spacing() - 2.0 * r).abs() < 1e-12, "x={x} r={r}");
        }
    }

    #[test]
    fn constant_potential_has_unit_rh_constant() {
        let g = Grid::new(2, 32, 2.0).unwrap();
        let v = Potential::constant(&g, 3.0).unwrap();
        let c = reverse_holder_constant(&v, 4.0, &[[0.0; 3], [0.5, -0.2, 0.0]], &[0.3, 1.0]).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
        assert!(matches!(
            reverse_holder_constant(&v, 2.0, &[[1.5, 0.0, 0.0]], &[1.0]),
            Err(Error::BallExitsBox { .. })
        ));
    }

    #[test]
    fn harmonic_moment_ratio() {
        let g = Grid::new(1, 1024, 2.0).unwrap();
        let v = Potential::harmonic(&g, 1.0).unwrap();
        let c = reverse_holder_constant(&v, 2.0, &[[0.0; 3]], &[1.0]).unwrap();
        assert!((c - 3.0 / 5f64.sqrt()).abs() < 1e-3, "{c}");
    }

    #[test]
    fn constant_potential_radius_closed_form() {
        for d in 1..=3 {
            let n = if d == 3 { 16 } else { 64 };
            let g = Grid::new(d, n, 2.0).unwrap();
            let v = Potential::constant(&g, 1.0).unwrap();
            let expect = match d {
                1 => 0.5f64.sqrt(),
                2 => 1.0 / PI.sqrt(),
                _ => (3.0 / (4.0 * PI)).sqrt(),
            };
            let a = critical_radius(&v, &[0.0; 3]);
            let b = critical_radius(&v, &g.point(g.len() / 3 + 1));
            assert_eq!(a.flag, RadiusFlag::Resolved);
            assert!((a.value - expect).abs() < 1e-9, "d={d}: {}", a.value);
            assert!((a.value - b.value).abs() < 1e-10);
            let m = mass_profile(&v, &[0.0; 3], a.value);
            assert!((m - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn radius_scales_with_constant() {
        let g = Grid::new(3, 16, 2.0).unwrap();
        let x = [0.1, 0.0, -0.2];
        let r1 = critical_radius(&Potential::constant(&g, 0.25).unwrap(), &x).value;
        let r4 = critical_radius(&Potential::constant(&g, 1.0).unwrap(), &x).value;
        assert!((r4 / r1 - 0.5).abs() < 1e-6);
    }

    #[test]
    fn enlarging_potential_shrinks_radius() {
        let g = Grid::new(1, 256, 4.0).unwrap();
        let v = Potential::harmonic(&g, 1.0).unwrap();
        let v2 = Potential::harmonic(&g, 2.0).unwrap();
        for i in (0..256).step_by(9) {
            let x = g.point(i);
            assert!(critical_radius(&v2, &x).value <= critical_radius(&v, &x).value + 1e-12);
        }
    }

    #[test]
    fn flags_at_the_clamps() {
        let g = Grid::new(1, 64, 2.0).unwrap();
        let tiny = Potential::constant(&g, 1e-6).unwrap();
        assert_eq!(critical_radius(&tiny, &[0.0; 3]).flag, RadiusFlag::ClampedHigh);
        let huge = Potential::constant(&g, 1e6).unwrap();
        let c = critical_radius(&huge, &[0.0; 3]);
        assert_eq!(c.flag, RadiusFlag::ClampedLow);
        assert_eq!(c.value, g.spacing());
    }

    #[test]
    fn uniform_partitions() {
        // rho = 1/sqrt(2) on a box of side 8 gives cubes of side 1.
        let g = Grid::new(1, 64, 4.0).unwrap();
        let v = Potential::constant(&g, 1.0).unwrap();
        let p = build_partition(&v, &critical_radius_field(&v)).unwrap();
        assert_eq!(p.len(), 8);
        assert!(p.cubes().iter().all(|c| c.side == 1.0));
        assert_eq!(p.overlap(), 3);
        for w in p.cubes().windows(2) {
            assert!(w[0].center[0] < w[1].center[0]);
        }

        let g = Grid::new(2, 64, 4.0).unwrap();
        let v = Potential::constant(&g, 1.0).unwrap();
        let field = critical_radius_field(&v);
        let p = build_partition(&v, &field).unwrap();
        assert_eq!(p.len(), 64);
        assert_eq!(p.overlap(), 9);
        let area: f64 = p.cubes().iter().map(|c| c.side * c.side).sum();
        assert_eq!(area, 64.0);
    }

    #[test]
    fn harmonic_partition_sides_shrink_outwards() {
        let g = Grid::new(1, 1024, 8.0).unwrap();
        let v = Potential::harmonic(&g, 1.0).unwrap();
        let p = build_partition(&v, &critical_radius_field(&v)).unwrap();
        let total: f64 = p.cubes().iter().map(|c| c.side).sum();
        assert_eq!(total, 16.0);
        let mut cubes = p.cubes().to_vec();
        cubes.sort_by(|a, b| a.center[0].abs().total_cmp(&b.center[0].abs()));
        for w in cubes.windows(2) {
            assert!(w[1].side <= w[0].side);
        }
        for c in p.cubes() {
            assert!(c.side / c.rho >= 0.5 && c.side / c.rho <= 2.0);
        }
        let mut seen = vec![0; g.len()];
        for j in 0..p.len() {
            for &i in p.members(j) {
                seen[i] += 1;
                assert_eq!(p.cube_of(i), j);
            }
        }
        assert!(seen.iter().all(|&s| s == 1));
    }

    #[test]
    fn resolution_guard() {
        let g = Grid::new(1, 32, 8.0).unwrap();
        let v = Potential::harmonic(&g, 1.0).unwrap();
        assert!(matches!(build_partition(&v, &critical_radius_field(&v)), Err(Error::ResolutionGuard { .. })));
    }

    #[test]
    fn csv_has_one_row_per_cube() {
        let g = Grid::new(1, 64, 4.0).unwrap();
        let v = Potential::constant(&g, 1.0).unwrap();
        let p = build_partition(&v, &critical_radius_field(&v)).unwrap();
        let csv = p.to_csv();
        assert_eq!(csv.lines().count(), 9);
        assert!(csv.starts_with("label,center_0,side,rho,level"));
    }
}
