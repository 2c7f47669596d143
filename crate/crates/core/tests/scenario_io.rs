use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use proptest::prelude::*;
use sfcosim::error::{Error, ParseErrorKind};
use sfcosim::report::spectrum_report;
use sfcosim::results::*;
use sfcosim::scenario::*;
use sfcosim::spectral::WindowConfig;
use sfcosim::wave_link::{ConverterConfig, ConverterMode};

fn minimal(r: f64, amp: f64, phase: f64) -> String {
    format!(
        "sfcosim-scenario 1
[simulation]
dt_micro = 1e-5
dt_macro = 1e-5
t_end = 1e-3

[area a]
solver = emt
nodes = 2

[branch a.src]
kind = voltage_source
from = 1
to = 0
tones = 50:{amp}:{phase}

[branch a.r]
kind = resistor
from = 1
to = 2
value = {r}

[branch a.l]
kind = inductor
from = 2
to = 0
value = 0.01

[recorder i]
probe = branch_current
target = a.l
"
    )
}

proptest! {
    #[test]
    fn serialize_is_canonical(r in 1e-3f64..1e3, amp in 0.0f64..1e4, phase in -PI..PI) {
        let s = parse(&minimal(r, amp, phase)).unwrap();
        let text = serialize(&s);
        let again = parse(&text).unwrap();
        prop_assert_eq!(&again, &s);
        prop_assert_eq!(serialize(&again), text);
    }

    #[test]
    fn compare_rmse_is_symmetric(a in proptest::collection::vec(-5.0f64..5.0, 2..50), shift in -1.0f64..1.0) {
        let t: Vec<f64> = (0..a.len()).map(|k| k as f64 * 0.1).collect();
        let b: Vec<f64> = a.iter().enumerate().map(|(k, x)| x + shift * (k as f64).sin()).collect();
        let sa = Series::real("x", t.clone(), a);
        let sb = Series::real("x", t, b);
        let ab = compare_series(&sa, &sb).unwrap();
        let ba = compare_series(&sb, &sa).unwrap();
        prop_assert!((ab.rmse - ba.rmse).abs() <= 1e-15 * (1.0 + ab.rmse));
        prop_assert_eq!(ab.max_abs_error, ba.max_abs_error);
    }
}

#[test]
fn negative_resistance_names_the_branch() {
    match parse(&minimal(-1.0, 1.0, 0.0)) {
        Err(Error::Parse(e)) => {
            assert!(matches!(e.kind, ParseErrorKind::NonPositive(_)));
            assert!(e.to_string().contains("a.r"), "{e}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn surrogate_parses() {
    let s = parse_file(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/two_area.scn")).unwrap();
    assert_eq!(s.links.len(), 1);
    assert_eq!(s.schedule.ratio, 25);
    assert_eq!(s.links[0].tau, 612.13e-6);
    assert!(s.links[0].tau >= s.schedule.dt_macro);
    assert_eq!(s.init, Initialization::SteadyState);
}

#[test]
fn csv_layouts() {
    let dir = tempfile::tempdir().unwrap();
    let rs = ResultSet {
        series: vec![
            Series::real("empty", vec![], vec![]),
            Series::real("one", vec![0.0], vec![1.0]),
            Series { name: "z".into(), t: vec![0.0], data: SeriesData::Complex(vec![Complex64::new(1.0, -2.0)]) },
        ],
        metadata: vec![],
    };
    let paths = write_results(&rs, dir.path()).unwrap();
    assert_eq!(fs::read_to_string(&paths[0]).unwrap(), "t,empty\n");
    assert_eq!(fs::read_to_string(&paths[1]).unwrap().lines().count(), 2);
    let z = fs::read_to_string(&paths[2]).unwrap();
    assert_eq!(z.lines().next().unwrap(), "t,z_re,z_im");
    assert_eq!(z.lines().nth(1).unwrap().split(',').count(), 3);
}

#[test]
fn results_round_trip_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let t: Vec<f64> = (0..100).map(|k| k as f64 * 2e-5).collect();
    let v: Vec<f64> = t.iter().map(|x| (314.159 * x).sin() / 3.0).collect();
    let rs = ResultSet { series: vec![Series::real("v", t, v)], metadata: vec![] };
    write_results(&rs, dir.path()).unwrap();
    let back = read_csv(&dir.path().join("v.csv")).unwrap();
    assert_eq!(back.get("v").unwrap(), rs.get("v").unwrap());
}

#[test]
fn compare_examples() {
    let t: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
    let a = Series::real("x", t.clone(), t.iter().map(|x| 2.0 * x).collect());
    let m = compare_series(&a, &a).unwrap();
    assert_eq!((m.rmse, m.rmse_relative, m.max_abs_error), (0.0, 0.0, 0.0));
    // Test on a coarser base is interpolated onto the reference times.
    let coarse = Series::real("x", vec![0.0, 1.0], vec![0.0, 2.0]);
    assert!(compare_series(&a, &coarse).unwrap().rmse < 1e-12);
    let late = Series::real("x", vec![5.0, 6.0], vec![0.0, 0.0]);
    assert!(matches!(compare_series(&a, &late), Err(Error::EmptyOverlap)));
}

#[test]
fn spectrum_report_examples() {
    let dt = 500e-6;
    let ws = 2.0 * PI * 50.0;
    let x: Vec<f64> = (0..2000).map(|k| (ws * k as f64 * dt + 0.3).cos() + 0.2 * (2.0 * PI * 13.0 * k as f64 * dt - 1.0).cos()).collect();
    let window = WindowConfig { len: 101, dt };
    let esprit = spectrum_report(&x, dt, &ConverterConfig::new(ConverterMode::Esprit, window, ws), 1).unwrap();
    let delay = spectrum_report(&x, dt, &ConverterConfig::new(ConverterMode::Delay, window, ws), 1).unwrap();
    assert_eq!(esprit.estimate.components.len(), 2);
    assert!(esprit.neg_pos_ratio < 1e-3 && delay.neg_pos_ratio > 1e-1);
    let text = esprit.to_string();
    assert!(text.contains("50.000000") && text.contains("13.000000"), "{text}");
}
