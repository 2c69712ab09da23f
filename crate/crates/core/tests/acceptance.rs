//! Acceptance suite: one line per criterion, non-zero exit on any failure.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use wavepacket::critical::{build_partition, critical_radius, critical_radius_field, Potential, PotentialSpec, RadiusFlag};
use wavepacket::grid::{sample_real, Grid};
use wavepacket::norms::NormSpec;
use wavepacket::packets::{
    required_omegas, CriticalPackets, Directional, GaussianPackets, LittlewoodPaley, Modulation, ModulationParams, OperatorPackets,
    WavePacketTransform,
};
use wavepacket::spectral::{eigendecompose, Normalization, OperatorSpec, ScaleFrame, SigmaGrid, Window, WindowVariant};
use wavepacket::verify::{
    finite_speed_check, isometry_defect, offdiag_decay_check, projection_bound_estimate, propagator_invariance_report, reconstruction_error,
    square_function_check, theorem_sweep, AscentOptions, CriticalSetup, Ensemble, OffDiagonalSetup, PropagatorSetup, Report, Shaping,
    SweepSetup,
};

type Outcome = Result<String, String>;

const PPD: usize = 48;

fn frame(variant: WindowVariant, top: f64, sigma_max: f64, mode: Normalization) -> ScaleFrame {
    let w = Window::new(variant).expect("window");
    let sigma = SigmaGrid::covering(&w, top, sigma_max, PPD, 1e-12).expect("sigma grid");
    ScaleFrame::new(w, sigma, mode)
}

fn critical_context(v: &Potential, mode: Normalization) -> CriticalPackets {
    let partition = Arc::new(build_partition(v, &critical_radius_field(v)).expect("partition"));
    let d = Arc::new(eigendecompose(&v.operator()).expect("eigendecomposition"));
    let fr = frame(WindowVariant::FiniteSpeed { b: 1.0 }, d.lambda_max(), partition.r_sup(), mode);
    CriticalPackets::new(d, fr, partition).expect("critical packets")
}

/// One transform per family, all at 48 points per decade.
fn families(mode: Normalization) -> Vec<(&'static str, Box<dyn WavePacketTransform>)> {
    let line = Grid::new(1, 128, 8.0).unwrap();
    let plane = Grid::new(2, 32, 6.0).unwrap();
    let small = Grid::new(1, 64, 4.0).unwrap();
    let top = line.max_frequency().powi(2);
    let lp = LittlewoodPaley::new(&line, frame(WindowVariant::default(), top, 4.0, mode)).unwrap();
    let modulation = Modulation::new(&line, ModulationParams::on_lattice(&line, 2), mode).unwrap();
    let ptop = plane.max_frequency().powi(2);
    let directional = Directional::new(&plane, frame(WindowVariant::default(), ptop, 1.0, mode), required_omegas(ptop.sqrt())).unwrap();
    let heat = Arc::new(eigendecompose(&OperatorSpec::laplacian(line)).unwrap());
    let heat = OperatorPackets::new(heat.clone(), frame(WindowVariant::default(), heat.lambda_max(), 4.0, mode)).unwrap();
    let schr = Arc::new(eigendecompose(&OperatorSpec::schrodinger(sample_real(&small, |x| x[0] * x[0])).unwrap()).unwrap());
    let schr = OperatorPackets::new(schr.clone(), frame(WindowVariant::default(), schr.lambda_max(), 4.0, mode)).unwrap();
    let ou = Arc::new(eigendecompose(&OperatorSpec::ornstein_uhlenbeck(32)).unwrap());
    let gauss = GaussianPackets::new(ou.clone(), frame(WindowVariant::GaussianPoly { n: 2, a_g: 1.0, alpha: 4.0 }, ou.lambda_max(), 1.0, mode))
        .unwrap();
    let crit = critical_context(&Potential::constant(&small, 1.0).unwrap(), mode);
    vec![
        ("littlewood_paley", Box::new(lp)),
        ("modulation", Box::new(modulation)),
        ("directional", Box::new(directional)),
        ("heat_calculus", Box::new(heat)),
        ("schrodinger_calculus", Box::new(schr)),
        ("gaussian", Box::new(gauss)),
        ("critical", Box::new(crit)),
    ]
}

fn hilbert_spec(name: &str) -> NormSpec {
    match name {
        "modulation" => NormSpec::Modulation { p: 2.0, q: 2.0, s: 0.0 },
        "directional" => NormSpec::Decoupling { q: 2.0, p: 2.0, s: 0.0 },
        "critical" => NormSpec::CubeLplpl2 { p: 2.0 },
        _ => NormSpec::LpXL2Sigma { p: 2.0, alpha: 0.0 },
    }
}

fn worst_over<F: Fn(&dyn WavePacketTransform, usize) -> f64>(t: &dyn WavePacketTransform, probes: usize, f: F) -> f64 {
    (0..probes).map(|i| f(t, i)).fold(0.0, f64::max)
}

fn reproducing_formulas() -> Outcome {
    let probes = Ensemble::new(101, 20, Shaping::White);
    let mut lines = Vec::new();
    let mut ok = true;
    for (mode, tol) in [(Normalization::Discrete, 1e-8), (Normalization::Raw, 1e-4)] {
        for (name, t) in families(mode) {
            let worst = worst_over(t.as_ref(), probes.count, |t, i| reconstruction_error(t, &probes.field(t.grid(), i)).unwrap());
            ok &= worst < tol;
            lines.push(format!("{name}/{mode:?}={worst:.1e}"));
        }
    }
    let detail = lines.join(" ");
    if ok { Ok(detail) } else { Err(detail) }
}

fn isometry() -> Outcome {
    let probes = Ensemble::new(101, 20, Shaping::White);
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, t) in families(Normalization::Discrete) {
        let worst = worst_over(t.as_ref(), probes.count, |t, i| isometry_defect(t, &probes.field(t.grid(), i)).unwrap());
        ok &= worst < 1e-8;
        lines.push(format!("{name}={worst:.1e}"));
    }
    let detail = lines.join(" ");
    if ok { Ok(detail) } else { Err(detail) }
}

fn projection_at_two() -> Outcome {
    let ensemble = Ensemble::new(202, 50, Shaping::White);
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, t) in families(Normalization::Discrete) {
        let r = projection_bound_estimate(t.as_ref(), &hilbert_spec(name), &ensemble, AscentOptions { steps: 0 }).unwrap();
        let max = r.metrics["ensemble_max"];
        ok &= r.passed() && max <= 1.0 + 1e-8;
        lines.push(format!("{name}={max:.10}"));
    }
    let detail = lines.join(" ");
    if ok { Ok(detail) } else { Err(detail) }
}

fn sweep(potential: PotentialSpec, half_extent: f64) -> SweepSetup {
    SweepSetup {
        base: CriticalSetup {
            potential,
            d: 1,
            n: 64,
            half_extent,
            cosine_support: 1.0,
            points_per_decade: 12,
            normalization: Normalization::Discrete,
        },
        sizes: vec![64, 128, 256],
        exponents: vec![1.25, 1.5, 2.0],
        ensemble: Ensemble::new(7, 20, Shaping::White),
        ascent: AscentOptions { steps: 20 },
        stability: 0.2,
    }
}

fn theorem_signature() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (label, potential, l) in
        [("V=1", PotentialSpec::Constant { value: 1.0 }, 4.0), ("V=|x|^2", PotentialSpec::Power { scale: 1.0, exponent: 2.0 }, 2.0)]
    {
        let r = theorem_sweep(&sweep(potential, l)).map_err(|e| e.to_string())?;
        ok &= r.passed();
        let defect = r.table("sweep").unwrap().column("split_defect").unwrap().into_iter().fold(0.0, f64::max);
        lines.push(format!(
            "{label}: spread(1.25)={:.3} spread(1.5)={:.3} max(2)={:.10} split={defect:.1e}",
            r.metrics["spread.p1.25"], r.metrics["spread.p1.5"], r.metrics["max_estimate.p2"]
        ));
    }
    let detail = lines.join("; ");
    if ok { Ok(detail) } else { Err(detail) }
}

fn finite_speed() -> Outcome {
    let grid = Grid::new(1, 128, 4.0).unwrap();
    let v = Potential::constant(&grid, 1.0).unwrap();
    let partition = build_partition(&v, &critical_radius_field(&v)).unwrap();
    let d = eigendecompose(&v.operator()).unwrap();
    let w = Window::new(WindowVariant::FiniteSpeed { b: 1.0 }).unwrap();
    let r = finite_speed_check(&d, &w, &partition, &[0.125, 0.25, 0.5, 1.0, 2.0]).map_err(|e| e.to_string())?;
    let detail = format!(
        "cubes={} violations={} worst_outside={:.1e} min_diagonal={:.3}",
        partition.len(),
        r.metrics["violations"],
        r.metrics["worst_outside"],
        r.metrics["min_diagonal"]
    );
    if r.passed() { Ok(detail) } else { Err(detail) }
}

fn remainder_operators() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (label, v) in [
        ("V=1", Potential::constant(&Grid::new(1, 128, 4.0).unwrap(), 1.0).unwrap()),
        ("V=|x|^2", Potential::harmonic(&Grid::new(1, 128, 2.0).unwrap(), 1.0).unwrap()),
    ] {
        let t = critical_context(&v, Normalization::Discrete);
        let probe = Ensemble::new(5, 1, Shaping::White).field(v.grid(), 0);
        let mut min_ratio = f64::INFINITY;
        let mut leak = 0.0f64;
        for op in t.remainders() {
            min_ratio = min_ratio.min(op.min_eigenvalue() / op.max_eigenvalue());
            let out = op.apply(probe.values());
            for (i, v) in out.iter().enumerate() {
                if !op.members().contains(&i) {
                    leak = leak.max(v.norm());
                }
            }
        }
        let m = t.assembled_identity();
        let id = nalgebra::DMatrix::<f64>::identity(m.nrows(), m.ncols());
        let defect = (m - id).singular_values().iter().copied().fold(0.0, f64::max);
        ok &= min_ratio >= -1e-10 && leak == 0.0 && defect < 1e-8;
        lines.push(format!("{label}: min_eig/norm={min_ratio:.1e} outside_cube={leak:e} identity={defect:.1e}"));
    }
    let detail = lines.join("; ");
    if ok { Ok(detail) } else { Err(detail) }
}

fn critical_radius_profiles() -> Outcome {
    let cube = Grid::new(3, 32, 2.0).unwrap();
    let v = Potential::constant(&cube, 1.0).unwrap();
    let rho = critical_radius(&v, &[0.0; 3]);
    let exact = (3.0 / (4.0 * std::f64::consts::PI)).sqrt();
    let constant_ok = rho.flag == RadiusFlag::Resolved && (rho.value - exact).abs() <= 2.0 * cube.spacing();

    let line = Grid::new(1, 1024, 12.0).unwrap();
    let v = Potential::harmonic(&line, 1.0).unwrap();
    let mut products = Vec::new();
    for i in 0..line.len() {
        let x = line.point(i);
        if (0.5..=10.0).contains(&x[0].abs()) {
            let r = critical_radius(&v, &x);
            products.push(r.value * x[0].abs().max(1.0));
        }
    }
    let lo = products.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = products.iter().copied().fold(0.0, f64::max);
    let band_ok = lo >= 0.5 && hi <= 2.0 && hi / lo <= 2.0;
    let detail = format!("d=3 rho={:.4} exact={exact:.4} 2h={:.4}; rho*max(1,|x|) in [{lo:.3}, {hi:.3}]", rho.value, 2.0 * cube.spacing());
    if constant_ok && band_ok { Ok(detail) } else { Err(detail) }
}

fn square_function() -> Outcome {
    let line = Grid::new(1, 128, 8.0).unwrap();
    let ensemble = Ensemble::new(303, 100, Shaping::BandLimited { max_frequency: 10.0 });
    let mut lines = Vec::new();
    let mut ok = true;
    for (label, spec) in
        [("laplacian", OperatorSpec::laplacian(line)), ("schrodinger(V=1)", OperatorSpec::schrodinger(sample_real(&line, |_| 1.0)).unwrap())]
    {
        let d = Arc::new(eigendecompose(&spec).unwrap());
        let w = Window::new(WindowVariant::default()).unwrap();
        let sigma = SigmaGrid::covering(&w, d.lambda_max(), 8.0, 12, 1e-12).unwrap();
        let t = OperatorPackets::new(d, ScaleFrame::new(w, sigma, Normalization::Discrete)).unwrap();
        let r = square_function_check(&t, 1.5, &ensemble, 3.0).map_err(|e| e.to_string())?;
        ok &= r.passed();
        lines.push(format!("{label}: ratio in [{:.3}, {:.3}] spread={:.3}", r.metrics["min"], r.metrics["max"], r.metrics["spread"]));
    }
    let detail = lines.join("; ");
    if ok { Ok(detail) } else { Err(detail) }
}

fn off_diagonal() -> Outcome {
    let grid = Grid::new(1, 256, 16.0).unwrap();
    let d = eigendecompose(&OperatorSpec::laplacian(grid)).unwrap();
    let setup = OffDiagonalSetup { radius: 2.0, distances: vec![0.0, 1.0, 2.0, 3.0, 4.0, 6.0], times: vec![0.25, 0.5, 1.0, 2.0, 4.0] };
    let r = offdiag_decay_check(&d, &setup).map_err(|e| e.to_string())?;
    let detail = format!("c={:.4} from {} points, max ratio {:.4}", r.metrics["fitted_c"], r.metrics["fit_points"], r.metrics["max_ratio"]);
    if r.passed() { Ok(detail) } else { Err(detail) }
}

fn propagator_contrast() -> Outcome {
    let r = propagator_invariance_report(&PropagatorSetup::default()).map_err(|e| e.to_string())?;
    let detail = format!(
        "modulation spread={:.5} l1 growth={:.3} oracle error={:.1e}",
        r.metrics["modulation_spread"], r.metrics["l1_growth"], r.metrics["l1_oracle_error"]
    );
    if r.passed() { Ok(detail) } else { Err(detail) }
}

type Run = Box<dyn Fn() -> Report + Send + Sync>;

fn determinism() -> Outcome {
    let runs: Vec<(&str, Run)> = vec![
        (
            "projection",
            Box::new(|| {
                let grid = Grid::new(1, 64, 4.0).unwrap();
                let t = LittlewoodPaley::new(&grid, frame(WindowVariant::default(), grid.max_frequency().powi(2), 4.0, Normalization::Discrete))
                    .unwrap();
                projection_bound_estimate(&t, &NormSpec::LpXL2Sigma { p: 1.5, alpha: 0.0 }, &Ensemble::new(11, 16, Shaping::White), AscentOptions::default())
                    .unwrap()
            }),
        ),
        (
            "sweep",
            Box::new(|| {
                let mut s = sweep(PotentialSpec::Constant { value: 1.0 }, 4.0);
                s.sizes = vec![64];
                s.ensemble.count = 8;
                theorem_sweep(&s).unwrap()
            }),
        ),
        (
            "square",
            Box::new(|| {
                let grid = Grid::new(1, 64, 4.0).unwrap();
                let t = LittlewoodPaley::new(&grid, frame(WindowVariant::default(), grid.max_frequency().powi(2), 4.0, Normalization::Discrete))
                    .unwrap();
                square_function_check(&t, 1.5, &Ensemble::new(3, 24, Shaping::BandLimited { max_frequency: 6.0 }), 3.0).unwrap()
            }),
        ),
    ];
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, run) in runs {
        let (a, b) = (run().to_json(), run().to_json());
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("pool").install(|| run().to_json());
        let same = a == b && a == single;
        ok &= same;
        lines.push(format!("{name}: {} bytes {}", a.len(), if same { "identical across reruns and thread counts" } else { "differ" }));
    }
    let detail = lines.join("; ");
    if ok { Ok(detail) } else { Err(detail) }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("reproducing formulas", reproducing_formulas),
        ("isometry", isometry),
        ("projection at p=2", projection_at_two),
        ("critical-cube theorem signature", theorem_signature),
        ("finite speed", finite_speed),
        ("remainder operators", remainder_operators),
        ("critical radius", critical_radius_profiles),
        ("square-function equivalence", square_function),
        ("off-diagonal decay", off_diagonal),
        ("propagator contrast", propagator_contrast),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        if outcome.is_err() {
            failures += 1;
        }
        println!("criterion {:>2} {tag} {name} ({secs:.1}s): {detail}", k + 1);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
