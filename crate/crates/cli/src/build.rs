use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use wavepacket::critical::{build_partition, critical_radius_field, CriticalPartition, Potential};
use wavepacket::grid::{Field, Grid};
use wavepacket::io::{read_field_binary, read_field_csv};
use wavepacket::packets::{
    required_omegas, CriticalPackets, Directional, GaussianPackets, LittlewoodPaley, Modulation, ModulationParams, OperatorPackets,
    WavePacketTransform,
};
use wavepacket::spectral::{eigendecompose, OperatorSpec, ScaleFrame, SigmaGrid, SpectralDecomp, Window};
use wavepacket::verify::Ensemble;
use wavepacket::{Error, Result};

use crate::config::{FamilyKind, OperatorKind, RunConfig};

pub fn grid(c: &RunConfig) -> Result<Grid> {
    Grid::new(c.grid.d, c.grid.n, c.grid.half_extent)
}

pub fn read_field(path: &Path) -> Result<Field> {
    let file = File::open(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_field_csv(BufReader::new(file))
    } else {
        read_field_binary(BufReader::new(file))
    }
}

pub fn potential(c: &RunConfig) -> Result<Potential> {
    let g = grid(c)?;
    match (&c.operator.potential_file, &c.operator.potential) {
        (Some(path), _) => {
            let f = read_field(path)?;
            if f.grid() != &g {
                return Err(Error::GridMismatch);
            }
            Potential::new(f, 2.0)
        }
        (None, Some(spec)) => spec.build(&g),
        (None, None) => Err(Error::InvalidArgument("operator.potential or operator.potential_file is required".into())),
    }
}

pub fn partition(v: &Potential) -> Result<CriticalPartition> {
    build_partition(v, &critical_radius_field(v))
}

pub fn operator(c: &RunConfig) -> Result<OperatorSpec> {
    match c.operator.kind {
        OperatorKind::Laplacian => Ok(OperatorSpec::laplacian(grid(c)?)),
        OperatorKind::Schrodinger => Ok(potential(c)?.operator()),
        OperatorKind::OrnsteinUhlenbeck => Ok(OperatorSpec::ornstein_uhlenbeck(c.operator.modes)),
    }
}

pub fn decomposition(c: &RunConfig) -> Result<Arc<SpectralDecomp>> {
    Ok(Arc::new(eigendecompose(&operator(c)?)?))
}

pub fn window(c: &RunConfig) -> Result<Window> {
    Window::new(c.window.clone())
}

fn frame(c: &RunConfig, top: f64, default_max: f64) -> Result<ScaleFrame> {
    let w = window(c)?;
    let s = &c.sigma;
    let sigma = SigmaGrid::covering(&w, top, s.max.unwrap_or(default_max), s.points_per_decade, s.coverage_defect)?;
    Ok(ScaleFrame::new(w, sigma, s.normalization))
}

/// The decomposition named by `[family]`, with its spectral decomposition
/// when it has one.
pub struct Context {
    pub transform: Arc<dyn WavePacketTransform>,
    pub decomp: Option<Arc<SpectralDecomp>>,
}

pub fn context(c: &RunConfig) -> Result<Context> {
    let simple = |t: Arc<dyn WavePacketTransform>| Context { transform: t, decomp: None };
    match c.family.kind {
        FamilyKind::LittlewoodPaley => {
            let g = grid(c)?;
            Ok(simple(Arc::new(LittlewoodPaley::new(&g, frame(c, g.max_frequency().powi(2), 4.0)?)?)))
        }
        FamilyKind::Modulation => {
            let g = grid(c)?;
            let params = ModulationParams::on_lattice(&g, c.family.lattice_multiple);
            Ok(simple(Arc::new(Modulation::new(&g, params, c.sigma.normalization)?)))
        }
        FamilyKind::Directional => {
            let g = grid(c)?;
            let top = g.max_frequency().powi(2);
            let omegas = if c.family.omegas == 0 { required_omegas(top.sqrt()) } else { c.family.omegas };
            Ok(simple(Arc::new(Directional::new(&g, frame(c, top, 1.0)?, omegas)?)))
        }
        FamilyKind::Operator => {
            let d = decomposition(c)?;
            let t = OperatorPackets::new(d.clone(), frame(c, d.lambda_max(), 4.0)?)?;
            Ok(Context { transform: Arc::new(t), decomp: Some(d) })
        }
        FamilyKind::Gaussian => {
            let d = decomposition(c)?;
            let t = GaussianPackets::new(d.clone(), frame(c, d.lambda_max(), 1.0)?)?;
            Ok(Context { transform: Arc::new(t), decomp: Some(d) })
        }
        FamilyKind::Critical => {
            let t = critical(c)?;
            let d = t.decomp().clone();
            Ok(Context { transform: Arc::new(t), decomp: Some(d) })
        }
    }
}

pub fn critical(c: &RunConfig) -> Result<CriticalPackets> {
    let v = potential(c)?;
    let p = Arc::new(partition(&v)?);
    let d = Arc::new(eigendecompose(&v.operator())?);
    let fr = frame(c, d.lambda_max(), p.r_sup())?;
    CriticalPackets::new(d, fr, p)
}

/// The input field of `decompose`, `reconstruct` and `norm`.
pub fn input(c: &RunConfig, grid: &Grid) -> Result<Field> {
    match &c.input.field {
        Some(path) => {
            let f = read_field(path)?;
            if f.grid() != grid {
                return Err(Error::GridMismatch);
            }
            Ok(f)
        }
        None => Ok(Ensemble::new(c.seed, 1, c.input.shaping).field(grid, 0)),
    }
}

pub fn ensemble(c: &RunConfig) -> Ensemble {
    Ensemble::new(c.seed, c.verify.trials, c.verify.shaping)
}
