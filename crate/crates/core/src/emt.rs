//! Real-valued EMT solver.

use crate::circuit::{discretize, Companion, CompanionKind, Solver};
use crate::error::Result;
use crate::network::{BranchKind, Network};
use crate::nodal::NodalSystem;

pub type CompanionBranch = Companion<f64>;
pub type EmtSolver = Solver<f64>;

/// Companion models and admittance matrix for step `dt`.
pub fn discretize_emt(network: &Network, dt: f64) -> Result<(Vec<CompanionBranch>, NodalSystem<f64>)> {
    discretize(network, dt, 0.0)
}

impl Solver<f64> {
    pub fn new(network: &Network, dt: f64) -> Result<Self> {
        Self::with_ports(network, dt, 0.0, &[])
    }

    /// Energy held in inductors and capacitors.
    pub fn stored_energy(&self) -> f64 {
        let v = &self.state().node_voltages;
        self.network()
            .branches
            .iter()
            .zip(self.companions())
            .enumerate()
            .map(|(k, (b, c))| match (&b.kind, c.kind) {
                (BranchKind::Inductor(l), CompanionKind::Inductor { .. }) => 0.5 * l * self.branch_current(k).powi(2),
                (BranchKind::Capacitor(cap), CompanionKind::Capacitor { .. }) => 0.5 * cap * (v[b.from] - v[b.to]).powi(2),
                _ => 0.0,
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Waveform;
    use std::f64::consts::PI;

    #[test]
    fn companion_conductances() {
        let mut n = Network::new(2);
        n.resistor("r", 1, 0, 2.0);
        n.inductor("l", 1, 0, 0.1);
        n.capacitor("c", 1, 0, 1e-6);
        let (c, sys) = discretize_emt(&n, 20e-6).unwrap();
        assert_eq!(c[0].admittance, 0.5);
        assert!((c[1].admittance - 1e-4).abs() < 1e-18);
        assert!((c[2].admittance - 0.1).abs() < 1e-15);
        assert!((sys.matrix()[(0, 0)] - 0.6001).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut n = Network::new(2);
        n.inductor("l0", 1, 0, 0.0);
        assert!(discretize_emt(&n, 1e-5).is_err());
        let mut n = Network::new(2);
        n.resistor("r", 1, 0, 1.0);
        assert!(discretize_emt(&n, 0.0).is_err());
    }

    #[test]
    fn resistive_divider() {
        let mut n = Network::new(3);
        n.voltage_source("e", 1, 0, Waveform::dc(10.0));
        n.resistor("r1", 1, 2, 1.0);
        n.resistor("r2", 2, 0, 1.0);
        let mut s = EmtSolver::new(&n, 1e-3).unwrap();
        s.step().unwrap();
        assert!((s.node_voltage(2) - 5.0).abs() < 1e-5);
    }

    #[test]
    fn rl_step_response() {
        let mut n = Network::new(3);
        n.voltage_source("e", 1, 0, Waveform::dc(1.0));
        n.resistor("r", 1, 2, 1.0);
        let l = n.inductor("l", 2, 0, 0.1);
        let mut s = EmtSolver::new(&n, 20e-6).unwrap();
        s.run_steps(15_000).unwrap();
        let t = s.time();
        assert!((t - 0.3).abs() < 1e-12);
        let exact = 1.0 - (-t / 0.1f64).exp();
        assert!((s.branch_current(l) - exact).abs() / exact < 1e-4);
    }

    #[test]
    fn rl_sinusoidal_steady_state() {
        let w = 2.0 * PI * 50.0;
        let mut n = Network::new(3);
        n.voltage_source("e", 1, 0, Waveform::tone(50.0, 1.0, 0.0));
        n.resistor("r", 1, 2, 1.0);
        let l = n.inductor("l", 2, 0, 0.01);
        let mut s = EmtSolver::new(&n, 20e-6).unwrap();
        s.run_steps(25_000).unwrap();
        let mut peak: f64 = 0.0;
        for _ in 0..1000 {
            s.step().unwrap();
            peak = peak.max(s.branch_current(l).abs());
        }
        let expected = 1.0 / (1.0f64 + (w * 0.01).powi(2)).sqrt();
        assert!((peak - expected).abs() / expected < 1e-4, "{peak} vs {expected}");
    }

    #[test]
    fn boundary_injection() {
        let mut n = Network::new(2);
        n.resistor("g", 1, 0, 4.0);
        let mut s = EmtSolver::new(&n, 1e-3).unwrap();
        s.inject_boundary(1, 0.0);
        s.step().unwrap();
        assert_eq!(s.node_voltage(1), 0.0);
        s.inject_boundary(1, 2.0);
        s.step().unwrap();
        assert!((s.node_voltage(1) - 8.0).abs() < 1e-12);
        s.step().unwrap();
        assert_eq!(s.node_voltage(1), 0.0);
    }

    #[test]
    fn lc_energy_conserved() {
        let mut n = Network::new(2);
        n.inductor("l", 1, 0, 1e-3);
        n.capacitor("c", 1, 0, 1e-6);
        let mut s = EmtSolver::new(&n, 1e-6).unwrap();
        s.set_initial_state(&[0.0, 1.0], &[0.0, 0.0]).unwrap();
        let e0 = s.stored_energy();
        // Period 2 pi sqrt(LC) ~ 199 us.
        for _ in 0..2000 {
            s.step().unwrap();
            assert!((s.stored_energy() - e0).abs() <= 1e-9 * e0);
        }
    }

    #[test]
    fn rc_energy_decays() {
        let mut n = Network::new(2);
        n.resistor("r", 1, 0, 10.0);
        n.capacitor("c", 1, 0, 1e-4);
        n.inductor("l", 1, 0, 1e-2);
        let mut s = EmtSolver::new(&n, 1e-5).unwrap();
        s.set_initial_state(&[0.0, 1.0], &[0.1, -0.1, 0.0]).unwrap();
        let mut prev = s.stored_energy();
        for _ in 0..5000 {
            s.step().unwrap();
            let e = s.stored_energy();
            assert!(e <= prev * (1.0 + 1e-9));
            prev = e;
        }
    }

    #[test]
    fn floating_subnetwork_rejected() {
        let mut n = Network::new(3);
        n.resistor("r", 1, 0, 1.0);
        n.resistor("r2", 2, 2, 1.0);
        assert!(EmtSolver::new(&n, 1e-3).is_err());
    }
}
