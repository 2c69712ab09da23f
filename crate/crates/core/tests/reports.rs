use wavepacket::critical::{build_partition, critical_radius_field, Potential, PotentialSpec};
use wavepacket::grid::Grid;
use wavepacket::packets::{ChannelIndex, WavePacketTransform};
use wavepacket::spectral::{eigendecompose, Normalization, Window, WindowVariant};
use wavepacket::verify::{
    embedding_report, kernel_envelope_check, proof_split, remainder_lowerbound_probe, CriticalSetup, EmbeddingSetup, Ensemble, OffDiagonalSetup,
    PropagatorSetup, Report, Shaping, SweepSetup,
};
use wavepacket::Error;

fn harmonic() -> CriticalSetup {
    CriticalSetup {
        potential: PotentialSpec::Power { scale: 1.0, exponent: 2.0 },
        d: 1,
        n: 128,
        half_extent: 2.0,
        cosine_support: 1.0,
        points_per_decade: 12,
        normalization: Normalization::Discrete,
    }
}

#[test]
fn kernel_envelopes_decay_for_both_model_potentials() {
    let cases = [
        (Potential::constant(&Grid::new(1, 128, 8.0).unwrap(), 1.0).unwrap(), [0.75, 1.5, 3.0]),
        (Potential::harmonic(&Grid::new(1, 128, 2.0).unwrap(), 1.0).unwrap(), [0.5, 1.0, 2.0]),
    ];
    for (v, sigmas) in cases {
        let p = build_partition(&v, &critical_radius_field(&v)).unwrap();
        let d = eigendecompose(&v.operator()).unwrap();
        let w = Window::new(WindowVariant::FiniteSpeed { b: 1.0 }).unwrap();
        let r = kernel_envelope_check(&d, &w, &p, &sigmas).unwrap();
        assert!(r.passed(), "{:?}", r.metrics);
        assert!(r.metrics["g_log_slope"] < -1.0);
        assert!(r.metrics.contains_key("doubling_deviation"));
        let g = r.table("g_envelope").unwrap();
        let beyond: f64 = g.rows.iter().filter(|row| row[0] > 2.5).map(|row| row[1]).fold(0.0, f64::max);
        assert!(beyond < 1e-9 * r.metrics["h_max"], "kernel mass past the finite-speed radius: {beyond:e}");
    }
}

#[test]
fn kernel_envelope_needs_a_scale_above_the_critical_radius() {
    let v = Potential::constant(&Grid::new(1, 64, 8.0).unwrap(), 0.01).unwrap();
    let p = build_partition(&v, &critical_radius_field(&v)).unwrap();
    let d = eigendecompose(&v.operator()).unwrap();
    let w = Window::new(WindowVariant::FiniteSpeed { b: 1.0 }).unwrap();
    assert!(matches!(kernel_envelope_check(&d, &w, &p, &[0.25, 0.5]), Err(Error::InvalidArgument(_))));
}

#[test]
fn decoupling_embedding_spread_is_bounded() {
    let r = embedding_report(&EmbeddingSetup::default()).unwrap();
    assert!(r.passed(), "{:?}", r.metrics);
    assert!((r.metrics["s_p"] - 1.0 / 12.0).abs() < 1e-15);
}

#[test]
fn remainder_probe_records_its_spectral_content() {
    let t = harmonic().build().unwrap();
    let r = remainder_lowerbound_probe(&t, &Ensemble::new(4, 6, Shaping::Localized { center: [0.0; 3], width: 0.5 })).unwrap();
    assert!(r.passed());
    let table = r.table("probes").unwrap();
    assert_eq!(table.rows.len(), 6 * t.partition().len());
    for share in table.column("low_share").unwrap() {
        assert!((0.0..=1.0 + 1e-12).contains(&share));
    }
}

#[test]
fn proof_split_is_exact_for_a_growing_potential() {
    let t = harmonic().build().unwrap();
    for seed in 0..3 {
        let f = Ensemble::new(seed, 1, Shaping::White).phase(t.layout(), 0);
        let s = proof_split(&t, &f, 1.25).unwrap();
        assert!(s.report.passed(), "{:?}", s.report.metrics);
        let total = t.reproduce(&f).unwrap();
        let sum = s.g.add(&s.h1).unwrap().add(&s.h2).unwrap().add(&s.h3).unwrap();
        assert!(sum.sub(&total).unwrap().norm() <= 1e-10 * total.norm());
    }
}

#[test]
fn main_channel_carries_no_mass_outside_its_cube() {
    let t = harmonic().build().unwrap();
    let f = Ensemble::new(9, 1, Shaping::White).phase(t.layout(), 0).restricted(|c| c.index == ChannelIndex::Cube(1));
    let (u, v) = t.synthesize_parts(&f).unwrap();
    assert!(v.values().iter().all(|x| x.norm() == 0.0));
    let members = t.partition().members(1);
    for (i, x) in u.values().iter().enumerate() {
        if !members.contains(&i) {
            assert_eq!(x.norm(), 0.0);
        }
    }
}

fn round_trip<T: serde::Serialize + serde::de::DeserializeOwned + PartialEq + std::fmt::Debug>(value: &T) {
    let text = serde_json::to_string(value).unwrap();
    let back: T = serde_json::from_str(&text).unwrap();
    assert_eq!(&back, value);
}

#[test]
fn setups_round_trip_and_reject_unknown_keys() {
    round_trip(&harmonic());
    round_trip(&PropagatorSetup::default());
    round_trip(&EmbeddingSetup::default());
    round_trip(&OffDiagonalSetup { radius: 1.0, distances: vec![1.0], times: vec![0.5] });
    round_trip(&SweepSetup {
        base: harmonic(),
        sizes: vec![64],
        exponents: vec![1.5],
        ensemble: Ensemble::new(1, 2, Shaping::White),
        ascent: Default::default(),
        stability: 0.2,
    });
    let bad = r#"{"potential":{"kind":"constant","value":1.0},"n":64,"half_extent":4.0,"colour":"red"}"#;
    assert!(serde_json::from_str::<CriticalSetup>(bad).is_err());
    let defaults: CriticalSetup = serde_json::from_str(r#"{"potential":{"kind":"constant","value":1.0},"n":64,"half_extent":4.0}"#).unwrap();
    assert_eq!(defaults.d, 1);
    assert_eq!(defaults.cosine_support, 1.0);
}

#[test]
fn reports_round_trip_through_json() {
    let t = harmonic().build().unwrap();
    let r = remainder_lowerbound_probe(&t, &Ensemble::new(1, 2, Shaping::White)).unwrap();
    let back: Report = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(back, r);
}
