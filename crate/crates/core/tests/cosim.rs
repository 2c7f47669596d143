use std::path::Path;

use num_complex::Complex64;
use sfcosim::orchestrator::*;
use sfcosim::results::{compare, ResultSet};
use sfcosim::scenario::{parse, parse_file, Initialization, Scenario};
use sfcosim::spectral::EnvelopeSeries;
use sfcosim::wave_link::ConverterMode;

fn surrogate() -> Scenario {
    parse_file(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/two_area.scn")).unwrap()
}

fn without_interharmonic(s: &Scenario) -> Scenario {
    let mut s = s.clone();
    let grid = s.area_index("grid").unwrap();
    let net = &mut s.areas[grid].network;
    let k = net.branch_index("ssr").unwrap();
    net.branches.remove(k);
    s
}

/// Two EMT areas split across a line of travel time `tau`.
fn emt_split(dt_macro: f64, tau: f64) -> Scenario {
    parse(&format!(
        "sfcosim-scenario 1
[simulation]
dt_micro = 2e-5
dt_macro = {dt_macro}
t_end = 0.1

[area west]
solver = emt
nodes = 3

[branch west.src]
kind = voltage_source
from = 1
to = 0
tones = 50:100:0.3, 13:10:0

[branch west.r]
kind = resistor
from = 1
to = 2
value = 2

[branch west.l]
kind = inductor
from = 2
to = 3
value = 0.01

[area east]
solver = emt
nodes = 2

[branch east.load]
kind = resistor
from = 1
to = 0
value = 80

[branch east.c]
kind = capacitor
from = 1
to = 2
value = 2e-5

[branch east.rc]
kind = resistor
from = 2
to = 0
value = 5

[link tie]
a = west:3
b = east:1
z_c = 200
tau = {tau}

[recorder i_west]
probe = link_current
target = tie:a

[recorder v_east]
probe = node_voltage
target = east:1
"
    ))
    .unwrap()
}

fn max_diff(a: &ResultSet, b: &ResultSet, name: &str) -> f64 {
    let (x, y) = (a.get(name).unwrap(), b.get(name).unwrap());
    assert_eq!(x.t.len(), y.t.len());
    let (x, y) = (x.as_real().unwrap(), y.as_real().unwrap());
    x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

#[test]
fn emt_split_is_transparent() {
    for (dt_macro, tau) in [(2e-5, 6e-4), (5e-4, 6e-4), (5e-4, 612.13e-6)] {
        let s = emt_split(dt_macro, tau);
        let mono = run_monolithic(&s).unwrap();
        let split = run(&s, &RunOptions::default()).unwrap();
        for name in ["i_west", "v_east"] {
            let d = max_diff(&mono, &split, name);
            assert!(d < 1e-9, "{name} dt_macro={dt_macro} tau={tau}: {d}");
        }
    }
}

#[test]
fn unit_ratio_passthrough_equals_monolithic() {
    let s = surrogate().with_steps(None, Some(2e-5)).unwrap();
    let mono = run_monolithic(&s).unwrap();
    let rs = run(&s, &RunOptions::with_interface(ConverterMode::Passthrough(None))).unwrap();
    for name in ["i_tie", "v_grid", "v_load_inst", "i_tie_load_inst"] {
        let d = max_diff(&mono, &rs, name);
        assert!(d < 1e-9, "{name}: {d}");
    }
}

#[test]
fn pure_fundamental_within_half_percent() {
    let s = without_interharmonic(&surrogate());
    let mono = run_monolithic(&s).unwrap();
    for mode in [ConverterMode::Esprit, ConverterMode::Delay] {
        let rs = run(&s, &RunOptions::with_interface(mode.clone())).unwrap();
        let m = compare(&mono, &rs, "i_tie").unwrap();
        assert!(m.rmse_relative < 5e-3, "{}: {}", mode.name(), m.rmse_relative);
    }
}

#[test]
fn interharmonic_esprit_beats_delay() {
    let s = surrogate();
    let mono = run_monolithic(&s).unwrap();
    let err = |mode| compare(&mono, &run(&s, &RunOptions::with_interface(mode)).unwrap(), "i_tie").unwrap().rmse_relative;
    let (e, d) = (err(ConverterMode::Esprit), err(ConverterMode::Delay));
    assert!(e < d && e < 1e-2, "esprit {e} delay {d}");
}

#[test]
fn runs_are_deterministic_and_thread_independent() {
    let s = surrogate();
    let a = run(&s, &RunOptions::default()).unwrap();
    let b = run(&s, &RunOptions::default()).unwrap();
    let c = run(&s, &RunOptions { parallel: true, ..RunOptions::default() }).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.series, c.series);
}

#[test]
fn rest_start_also_runs() {
    let mut s = surrogate();
    s.init = Initialization::Rest;
    s.schedule.t_end = 0.05;
    let rs = run(&s, &RunOptions::default()).unwrap();
    let i = rs.get("i_tie").unwrap();
    assert!(i.as_real().unwrap().iter().all(|x| x.is_finite()));
}

#[test]
fn stepping_matches_batch_run() {
    let mut s = surrogate();
    s.schedule.t_end = 0.02;
    let batch = run(&s, &RunOptions::default()).unwrap();
    let mut r = CosimRun::new(&s, &RunOptions::default()).unwrap();
    let mut intervals = 0;
    while !r.is_finished() {
        r.step_interval().unwrap();
        intervals += 1;
    }
    assert_eq!(intervals, 40);
    assert_eq!(r.results().series, batch.series);
}

fn series(values: Vec<Complex64>, dt: f64) -> EnvelopeSeries {
    EnvelopeSeries { values, dt, t0: 0.0, omega_s: 314.0 }
}

#[test]
fn envelope_reconstruction_examples() {
    let c = Complex64::new(0.3, -0.7);
    let constant = series(vec![c; 4], 5e-4);
    let ramp = series((0..4).map(|k| Complex64::new(k as f64, -2.0 * k as f64)).collect(), 5e-4);
    for j in 0..=75 {
        let t = j as f64 * 2e-5;
        for rule in [Reconstruction::Hold, Reconstruction::Linear] {
            assert_eq!(interpolate_envelope(&constant, t, rule).unwrap(), c);
        }
        let want = Complex64::new(t / 5e-4, -2.0 * t / 5e-4);
        assert!((interpolate_envelope(&ramp, t, Reconstruction::Linear).unwrap() - want).norm() < 1e-12);
    }
    // exp(j dw t) with dw = 2 pi 5: hold error stays under dw * dt_macro.
    let dw = 2.0 * std::f64::consts::PI * 5.0;
    let spin = series((0..10).map(|k| Complex64::from_polar(1.0, dw * k as f64 * 5e-4)).collect(), 5e-4);
    for j in 0..200 {
        let t = j as f64 * 2e-5;
        let e = (interpolate_envelope(&spin, t, Reconstruction::Hold).unwrap() - Complex64::from_polar(1.0, dw * t)).norm();
        assert!(e <= dw * 5e-4 + 1e-12);
    }
    assert!(interpolate_envelope(&spin, 10.0 * 5e-4, Reconstruction::Linear).is_err());
}
