//! Shifted-frequency solver on complex envelopes around a carrier `omega_s`.

use num_complex::Complex64;

use crate::circuit::{discretize, Companion, Solver};
use crate::error::Result;
use crate::network::Network;
use crate::nodal::NodalSystem;
use crate::spectral::EnvelopeSeries;
use crate::wave_link::envelope_to_emt;

pub type ComplexCompanionBranch = Companion<Complex64>;
pub type ComplexNodalSystem = NodalSystem<Complex64>;
pub type SfemtSolver = Solver<Complex64>;

pub fn discretize_sf(
    network: &Network,
    dt: f64,
    omega_s: f64,
) -> Result<(Vec<ComplexCompanionBranch>, ComplexNodalSystem)> {
    discretize(network, dt, omega_s)
}

impl Solver<Complex64> {
    pub fn new(network: &Network, dt: f64, omega_s: f64) -> Result<Self> {
        Self::with_ports(network, dt, omega_s, &[])
    }
}

/// Instantaneous values `Re(X e^{j omega_s t})` of every envelope sample.
pub fn demodulate(env: &EnvelopeSeries) -> Vec<f64> {
    env.values
        .iter()
        .enumerate()
        .map(|(i, &x)| envelope_to_emt(x, env.omega_s, env.time(i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::CompanionKind;
    use crate::emt::{discretize_emt, EmtSolver};
    use crate::network::Waveform;
    use std::f64::consts::PI;

    const WS: f64 = 2.0 * PI * 50.0;

    #[test]
    fn zero_shift_matches_real_coefficients() {
        let mut n = Network::new(2);
        n.resistor("r", 1, 0, 2.0);
        n.inductor("l", 1, 0, 0.1);
        n.capacitor("c", 1, 0, 1e-6);
        let (re, _) = discretize_emt(&n, 20e-6).unwrap();
        let (cx, _) = discretize_sf(&n, 20e-6, 0.0).unwrap();
        for (a, b) in re.iter().zip(&cx) {
            assert_eq!(Complex64::new(a.admittance, 0.0), b.admittance);
        }
    }

    #[test]
    fn rotor_is_unimodular() {
        let mut n = Network::new(2);
        n.inductor("l", 1, 0, 0.1);
        let (c, _) = discretize_sf(&n, 500e-6, WS).unwrap();
        let CompanionKind::Inductor { rotor } = c[0].kind else { panic!() };
        assert!((rotor.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn demodulation() {
        let env = EnvelopeSeries { values: vec![Complex64::new(1.0, 0.0); 50], dt: 1e-3, t0: 0.0, omega_s: WS };
        let x = demodulate(&env);
        assert_eq!(x[0], 1.0);
        for (i, v) in x.iter().enumerate() {
            assert!((v - (WS * i as f64 * 1e-3).cos()).abs() < 1e-12);
        }
        let dw = 2.0 * PI * 3.0;
        let env = EnvelopeSeries {
            values: (0..50).map(|i| Complex64::from_polar(1.0, dw * (0.01 + i as f64 * 1e-3))).collect(),
            dt: 1e-3,
            t0: 0.01,
            omega_s: WS,
        };
        for (i, v) in demodulate(&env).iter().enumerate() {
            let t = 0.01 + i as f64 * 1e-3;
            assert!((v - ((WS + dw) * t).cos()).abs() < 1e-12);
        }
    }

    fn series_rl(wave: Waveform) -> Network {
        let mut n = Network::new(3);
        n.voltage_source("e", 1, 0, wave);
        n.resistor("r", 1, 2, 1.0);
        n.inductor("l", 2, 0, 0.01);
        n
    }

    #[test]
    fn steady_envelope_equals_phasor() {
        let n = series_rl(Waveform::tone(50.0, 1.0, 0.2));
        let phasor = Complex64::from_polar(1.0, 0.2) / Complex64::new(1.0, WS * 0.01);
        let mut s = SfemtSolver::new(&n, 500e-6, WS).unwrap();
        s.run_steps(2000).unwrap();
        assert!((s.branch_current(2) - phasor).norm() < 1e-6 * phasor.norm());
    }

    #[test]
    fn constant_envelope_step_independent() {
        let n = series_rl(Waveform::tone(50.0, 1.0, 0.0));
        let finals: Vec<Complex64> = [50e-6, 500e-6, 2e-3]
            .iter()
            .map(|&dt| {
                let mut s = SfemtSolver::new(&n, dt, WS).unwrap();
                s.run_steps((2.0 / dt) as usize).unwrap();
                s.branch_current(2)
            })
            .collect();
        for f in &finals[1..] {
            assert!((f - finals[0]).norm() < 1e-9, "{f} vs {}", finals[0]);
        }
    }

    #[test]
    fn rl_envelope_energization() {
        // dX/dt = -(R/L + j ws) X + V/L with X(0) = 0 and V = 1 from t = 0.
        let n = series_rl(Waveform::tone(50.0, 1.0, 0.0));
        let dt = 500e-6;
        let mut s = SfemtSolver::new(&n, dt, WS).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        s.set_initial_state(&[zero, one, one], &[zero; 3]).unwrap();
        let a = Complex64::new(1.0 / 0.01, WS);
        let x_inf = Complex64::new(1.0 / 0.01, 0.0) / a;
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            s.step().unwrap();
            let t = s.time();
            let exact = x_inf * (Complex64::new(1.0, 0.0) - (-a * t).exp());
            worst = worst.max((s.branch_current(2) - exact).norm() / x_inf.norm());
        }
        assert!(worst < 1e-2, "{worst}");
    }

    #[test]
    fn zero_shift_real_input_stays_real() {
        let mut n = Network::new(3);
        n.voltage_source("e", 1, 0, Waveform::dc(2.0));
        n.resistor("r", 1, 2, 0.5);
        n.capacitor("c", 2, 0, 1e-4);
        let mut re = EmtSolver::new(&n, 50e-6).unwrap();
        let mut cx = SfemtSolver::new(&n, 50e-6, 0.0).unwrap();
        for _ in 0..500 {
            re.step().unwrap();
            cx.step().unwrap();
            let (a, b) = (re.node_voltage(2), cx.node_voltage(2));
            assert!((a - b.re).abs() <= 1e-12 * (1.0 + a.abs()) && b.im == 0.0);
        }
    }

    #[test]
    fn zero_shift_trajectory_equals_emt() {
        let mut n = Network::new(4);
        n.voltage_source("e", 1, 0, Waveform::tone(50.0, 1.0, 0.3).with_tone(13.0, 0.2, -1.0));
        n.resistor("r", 1, 2, 0.5);
        n.inductor("l", 2, 3, 0.02);
        n.capacitor("c", 3, 0, 1e-4);
        n.resistor("rl", 3, 0, 20.0);
        let mut re = EmtSolver::new(&n, 50e-6).unwrap();
        let mut cx = SfemtSolver::new(&n, 50e-6, 0.0).unwrap();
        for _ in 0..2000 {
            re.step().unwrap();
            cx.step().unwrap();
            for node in 1..4 {
                let a = re.node_voltage(node);
                let b = cx.node_voltage(node);
                // Real coefficients: the real part evolves independently.
                assert!((a - b.re).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
    }
}
