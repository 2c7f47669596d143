use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use sfcosim::circuit::CompanionKind;
use sfcosim::emt::{discretize_emt, EmtSolver};
use sfcosim::network::{BranchKind, Network, Waveform};
use sfcosim::sfemt::{demodulate, discretize_sf, SfemtSolver};
use sfcosim::spectral::EnvelopeSeries;
use sfcosim::steady::steady_state;

const WS: f64 = 2.0 * PI * 50.0;

#[derive(Debug, Clone, Copy)]
enum Part {
    R(f64),
    L(f64),
    C(f64),
}

fn part() -> impl Strategy<Value = Part> {
    prop_oneof![
        (0.5f64..50.0).prop_map(Part::R),
        (1e-3f64..0.2).prop_map(Part::L),
        (1e-6f64..1e-4).prop_map(Part::C),
    ]
}

/// Random ladder: every node has a resistor to ground (so nothing floats),
/// plus random parts between consecutive nodes and to ground.
fn ladder() -> impl Strategy<Value = Network> {
    (2usize..6).prop_flat_map(|nodes| {
        (
            Just(nodes),
            proptest::collection::vec(part(), nodes - 1),
            proptest::collection::vec(part(), nodes),
            proptest::collection::vec(1.0f64..100.0, nodes),
        )
    })
    .prop_map(|(nodes, series, shunt, ground)| {
        let mut n = Network::new(nodes + 1);
        let add = |n: &mut Network, name: String, a: usize, b: usize, p: Part| match p {
            Part::R(v) => n.resistor(&name, a, b, v),
            Part::L(v) => n.inductor(&name, a, b, v),
            Part::C(v) => n.capacitor(&name, a, b, v),
        };
        for (k, p) in series.into_iter().enumerate() {
            add(&mut n, format!("s{k}"), k + 1, k + 2, p);
        }
        for (k, p) in shunt.into_iter().enumerate() {
            add(&mut n, format!("p{k}"), k + 1, 0, p);
        }
        for (k, g) in ground.into_iter().enumerate() {
            n.resistor(&format!("g{k}"), k + 1, 0, g);
        }
        n
    })
}

fn with_source(mut n: Network, w: Waveform) -> Network {
    let top = n.node_count;
    n.node_count += 1;
    n.voltage_source("e", top, 0, w);
    n.resistor("rs", top, 1, 1.0);
    n
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn admittance_matrix_is_symmetric(net in ladder(), dt in 1e-6f64..1e-3, ws in 0.0f64..400.0) {
        let (_, real) = discretize_emt(&net, dt).unwrap();
        let m = real.matrix();
        prop_assert_eq!(m, &m.transpose());
        let (_, cx) = discretize_sf(&net, dt, ws).unwrap();
        let m = cx.matrix();
        prop_assert_eq!(m, &m.transpose());
    }

    #[test]
    fn source_free_energy_never_grows(net in ladder(), seed in proptest::collection::vec(-1.0f64..1.0, 8)) {
        let mut s = EmtSolver::new(&net, 20e-6).unwrap();
        let v: Vec<f64> = (0..net.node_count).map(|k| if k == 0 { 0.0 } else { seed[k % 8] }).collect();
        let i: Vec<f64> = (0..net.branches.len()).map(|k| 0.1 * seed[(k + 3) % 8]).collect();
        s.set_initial_state(&v, &i).unwrap();
        // The arbitrary start is not KCL-consistent; the first solve makes it so.
        s.step().unwrap();
        let mut prev = s.stored_energy();
        for _ in 0..500 {
            s.step().unwrap();
            let e = s.stored_energy();
            prop_assert!(e <= prev * (1.0 + 1e-9) + 1e-300, "{} > {}", e, prev);
            prev = e;
        }
    }

    #[test]
    fn zero_shift_sfemt_equals_emt(net in ladder(), a in 0.1f64..10.0, phase in -PI..PI) {
        let net = with_source(net, Waveform::tone(50.0, a, phase).with_tone(13.0, 0.3 * a, 0.5));
        let mut re = EmtSolver::new(&net, 50e-6).unwrap();
        let mut cx = SfemtSolver::new(&net, 50e-6, 0.0).unwrap();
        for _ in 0..400 {
            re.step().unwrap();
            cx.step().unwrap();
            for k in 1..net.node_count {
                let (x, z) = (re.node_voltage(k), cx.node_voltage(k));
                prop_assert!((x - z.re).abs() <= 1e-12 * (1.0 + x.abs()), "{} vs {}", x, z);
            }
        }
    }

    #[test]
    fn history_rotator_is_unimodular(l in 1e-4f64..1.0, dt in 1e-6f64..5e-3, ws in 0.0f64..2000.0) {
        let mut n = Network::new(2);
        n.inductor("l", 1, 0, l);
        n.resistor("r", 1, 0, 1.0);
        let (c, _) = discretize_sf(&n, dt, ws).unwrap();
        let CompanionKind::Inductor { rotor } = c[0].kind else { panic!("inductor companion") };
        prop_assert!((rotor.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn demodulated_sfemt_matches_emt_steady_state(net in ladder(), phase in -PI..PI) {
        // Both solvers start on the phasor solution; the 20 us EMT run is the
        // reference for the 500 us shifted-frequency run.
        let net = with_source(net, Waveform::tone(50.0, 1.0, phase));
        let tones = steady_state(&net).unwrap();
        let node = 1;
        let mut emt = EmtSolver::new(&net, 20e-6).unwrap();
        emt.set_steady_state(&tones).unwrap();
        let mut sf = SfemtSolver::new(&net, 500e-6, WS).unwrap();
        sf.set_steady_state(&tones).unwrap();
        let mut env = Vec::new();
        for _ in 0..40 {
            sf.step().unwrap();
            env.push(sf.node_voltage(node));
        }
        let demod = demodulate(&EnvelopeSeries { values: env, dt: 500e-6, t0: 500e-6, omega_s: WS });
        let (mut c, mut s, mut cs, mut ss) = (0.0, 0.0, 0.0, 0.0);
        for k in 1..=1000 {
            emt.step().unwrap();
            let t = k as f64 * 20e-6;
            c += emt.node_voltage(node) * (WS * t).cos();
            s += emt.node_voltage(node) * (WS * t).sin();
        }
        for (k, x) in demod.iter().enumerate() {
            let t = (k + 1) as f64 * 500e-6;
            cs += x * (WS * t).cos();
            ss += x * (WS * t).sin();
        }
        let a = Complex64::new(c / 500.0, -s / 500.0);
        let b = Complex64::new(cs / 20.0, -ss / 20.0);
        prop_assume!(a.norm() > 1e-6);
        prop_assert!((a.norm() - b.norm()).abs() < 1e-3 * a.norm(), "{} vs {}", a, b);
        prop_assert!((a / b).arg().abs() < 1e-3, "{} vs {}", a, b);
    }
}

fn series_rl(w: Waveform) -> (Network, usize) {
    let mut n = Network::new(3);
    n.voltage_source("e", 1, 0, w);
    n.resistor("r", 1, 2, 1.0);
    let l = n.inductor("l", 2, 0, 0.01);
    (n, l)
}

#[test]
fn companion_conductances() {
    let mut n = Network::new(2);
    n.resistor("r", 1, 0, 2.0);
    n.inductor("l", 1, 0, 0.1);
    n.capacitor("c", 1, 0, 1e-6);
    let (c, _) = discretize_emt(&n, 20e-6).unwrap();
    assert_eq!(c[0].admittance, 0.5);
    assert!((c[1].admittance - 1e-4).abs() < 1e-18);
    assert!((c[2].admittance - 0.1).abs() < 1e-15);
}

#[test]
fn divider_midpoint() {
    let mut n = Network::new(3);
    n.voltage_source("e", 1, 0, Waveform::dc(10.0));
    n.resistor("a", 1, 2, 1.0);
    n.resistor("b", 2, 0, 1.0);
    let mut s = EmtSolver::new(&n, 1e-4).unwrap();
    s.step().unwrap();
    assert!((s.node_voltage(2) - 5.0).abs() < 1e-5);
}

#[test]
fn rl_sinusoid_from_rest_reaches_phasor_amplitude() {
    let (n, l) = series_rl(Waveform::tone(50.0, 1.0, 0.0));
    let mut s = EmtSolver::new(&n, 20e-6).unwrap();
    s.run_steps(25_000).unwrap();
    let mut peak: f64 = 0.0;
    for _ in 0..1000 {
        s.step().unwrap();
        peak = peak.max(s.branch_current(l).abs());
    }
    let want = 1.0 / Complex64::new(1.0, WS * 0.01).norm();
    assert!((peak - want).abs() / want < 1e-4);
}

#[test]
fn boundary_injection_is_one_shot() {
    let mut n = Network::new(2);
    n.resistor("g", 1, 0, 4.0);
    let mut s = EmtSolver::new(&n, 1e-3).unwrap();
    s.inject_boundary(1, 0.0);
    s.step().unwrap();
    assert_eq!(s.node_voltage(1), 0.0);
    s.inject_boundary(1, 0.5);
    s.step().unwrap();
    assert!((s.node_voltage(1) - 2.0).abs() < 1e-12);
}

#[test]
fn sfemt_envelope_equals_phasor_and_is_step_independent() {
    let (n, l) = series_rl(Waveform::tone(50.0, 1.0, 0.2));
    let phasor = Complex64::from_polar(1.0, 0.2) / Complex64::new(1.0, WS * 0.01);
    let mut finals = Vec::new();
    for dt in [50e-6, 500e-6, 2e-3] {
        let mut s = SfemtSolver::new(&n, dt, WS).unwrap();
        s.run_steps((1.0 / dt) as usize).unwrap();
        assert!((s.branch_current(l) - phasor).norm() < 1e-6 * phasor.norm());
        finals.push(s.branch_current(l));
    }
    assert!((finals[1] - finals[0]).norm() < 1e-9 && (finals[2] - finals[0]).norm() < 1e-9);
}

#[test]
fn sfemt_energization_follows_envelope_ode() {
    // dX/dt = -(R/L + j ws) X + V/L, X(0) = 0.
    let (n, l) = series_rl(Waveform::tone(50.0, 1.0, 0.0));
    let mut s = SfemtSolver::new(&n, 500e-6, WS).unwrap();
    let a = Complex64::new(100.0, WS);
    let x_inf = Complex64::new(100.0, 0.0) / a;
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        s.step().unwrap();
        let exact = x_inf * (1.0 - (-a * s.time()).exp());
        worst = worst.max((s.branch_current(l) - exact).norm() / x_inf.norm());
    }
    assert!(worst < 1e-2, "{worst}");
}

#[test]
fn zero_sources_zero_solution() {
    let mut n = Network::new(3);
    n.voltage_source("e", 1, 0, Waveform::dc(0.0));
    n.resistor("r", 1, 2, 1.0);
    n.inductor("l", 2, 0, 0.1);
    let mut s = SfemtSolver::new(&n, 500e-6, WS).unwrap();
    s.run_steps(10).unwrap();
    assert_eq!(s.node_voltage(2), Complex64::new(0.0, 0.0));
}

#[test]
fn demodulate_examples() {
    let one = Complex64::new(1.0, 0.0);
    let x = demodulate(&EnvelopeSeries { values: vec![one; 4], dt: 1e-3, t0: 0.0, omega_s: WS });
    for (k, v) in x.iter().enumerate() {
        assert!((v - (WS * k as f64 * 1e-3).cos()).abs() < 1e-12);
    }
    let dw = 2.0 * PI * 5.0;
    let values = (0..20).map(|k| Complex64::from_polar(1.0, dw * k as f64 * 1e-3)).collect();
    let x = demodulate(&EnvelopeSeries { values, dt: 1e-3, t0: 0.0, omega_s: WS });
    for (k, v) in x.iter().enumerate() {
        assert!((v - ((WS + dw) * k as f64 * 1e-3).cos()).abs() < 1e-12);
    }
}

#[test]
fn floating_network_is_rejected() {
    let mut n = Network::new(3);
    n.resistor("r", 1, 0, 1.0);
    n.resistor("f", 2, 2, 1.0);
    assert!(EmtSolver::new(&n, 1e-5).is_err());
    assert!(SfemtSolver::new(&n, 1e-5, WS).is_err());
}

#[test]
fn set_branch_kinds_visible() {
    let (n, _) = series_rl(Waveform::dc(1.0));
    assert!(matches!(n.branches[0].kind, BranchKind::VoltageSource { .. }));
}
