//! Sinusoidal steady state of a network, for starting runs away from rest.
//!
//! Every source active at `t = 0` is split into its frequencies; each
//! frequency is solved as a complex nodal problem with lines as lossless
//! two-ports. At zero frequency inductors and lines become stiff
//! conductances, in the same spirit as the voltage-source Norton model.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::network::{BranchKind, LineSpec, Network, Waveform};
use crate::nodal::NodalSystem;

/// Conductance standing in for a short circuit at zero frequency.
const DC_SHORT: f64 = 1e6;

/// Node-voltage phasors at one angular frequency; `x(t) = Re(X e^{j omega t})`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyTone {
    pub omega: f64,
    /// Indexed by node; entry 0 is ground.
    pub nodes: Vec<Complex64>,
    /// Current into each external port (see [`crate::circuit::Solver::with_ports`]).
    pub ports: Vec<Complex64>,
}

/// Phasor of `waveform` at `omega`, or zero if it is off at `t = 0`.
fn source_phasor(waveform: &Waveform, omega: f64) -> Complex64 {
    if !waveform.is_active(0.0) {
        return Complex64::new(0.0, 0.0);
    }
    let mut p = Complex64::new(0.0, 0.0);
    if omega == 0.0 {
        p.re += waveform.dc;
    }
    for t in &waveform.tones {
        if 2.0 * PI * t.freq == omega {
            p += if t.freq == 0.0 {
                Complex64::new(t.amplitude * t.phase.cos(), 0.0)
            } else {
                Complex64::from_polar(t.amplitude, t.phase)
            };
        }
    }
    p
}

fn sources(network: &Network) -> impl Iterator<Item = &Waveform> {
    network.branches.iter().filter_map(|b| match &b.kind {
        BranchKind::VoltageSource { waveform, .. } | BranchKind::CurrentSource(waveform) => Some(waveform),
        _ => None,
    })
}

/// Distinct angular frequencies excited at `t = 0`, ascending.
pub fn excited_frequencies(network: &Network) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for w in sources(network).filter(|w| w.is_active(0.0)) {
        if w.dc != 0.0 {
            out.push(0.0);
        }
        out.extend(w.tones.iter().filter(|t| t.amplitude != 0.0).map(|t| 2.0 * PI * t.freq));
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Admittance of a passive branch at `omega`.
fn branch_admittance(kind: &BranchKind, omega: f64) -> Complex64 {
    match *kind {
        BranchKind::Resistor(r) => Complex64::new(1.0 / r, 0.0),
        BranchKind::Inductor(_) if omega == 0.0 => Complex64::new(DC_SHORT, 0.0),
        BranchKind::Inductor(l) => Complex64::new(0.0, -1.0 / (omega * l)),
        BranchKind::Capacitor(c) => Complex64::new(0.0, omega * c),
        BranchKind::VoltageSource { r_internal, .. } => Complex64::new(1.0 / r_internal, 0.0),
        BranchKind::CurrentSource(_) => Complex64::new(0.0, 0.0),
    }
}

/// Branch current phasor (from `from` to `to`) given node phasors.
pub fn branch_current(kind: &BranchKind, from: Complex64, to: Complex64, omega: f64) -> Complex64 {
    match kind {
        BranchKind::VoltageSource { waveform, r_internal } => (from - to - source_phasor(waveform, omega)) / r_internal,
        BranchKind::CurrentSource(waveform) => source_phasor(waveform, omega),
        other => branch_admittance(other, omega) * (from - to),
    }
}

/// Currents entering a lossless line at its `from` and `to` ends.
pub fn line_currents(line: &LineSpec, v_from: Complex64, v_to: Complex64, omega: f64) -> Result<[Complex64; 2]> {
    let theta = omega * line.tau;
    if omega == 0.0 {
        let i = (v_from - v_to) * DC_SHORT;
        return Ok([i, -i]);
    }
    let s = theta.sin();
    if s.abs() < 1e-9 {
        return Err(Error::InvalidParameter {
            name: line.name.clone(),
            reason: format!("line is a half-wave multiple at {:e} Hz; no unique steady state", omega / (2.0 * PI)),
        });
    }
    let d = Complex64::new(0.0, line.z_c * s);
    let c = theta.cos();
    Ok([(v_from * c - v_to) / d, (v_to * c - v_from) / d])
}

/// Steady-state node phasors of a self-contained network, one entry per
/// excited frequency. Port lists are left empty.
pub fn steady_state(network: &Network) -> Result<Vec<SteadyTone>> {
    network.validate(&[])?;
    let mut out = Vec::new();
    for omega in excited_frequencies(network) {
        let mut sys = NodalSystem::<Complex64>::new(network.node_count);
        for b in &network.branches {
            sys.stamp_admittance(b.from, b.to, branch_admittance(&b.kind, omega));
        }
        for l in &network.lines {
            if omega == 0.0 {
                sys.stamp_admittance(l.from, l.to, Complex64::new(DC_SHORT, 0.0));
                continue;
            }
            // Lossless two-port: self term on each end, mutual term between.
            let s = (omega * l.tau).sin();
            if s.abs() < 1e-9 {
                return Err(Error::InvalidParameter {
                    name: l.name.clone(),
                    reason: format!("line is a half-wave multiple at {:e} Hz", omega / (2.0 * PI)),
                });
            }
            let mutual = Complex64::new(0.0, 1.0 / (l.z_c * s));
            let own = Complex64::new(0.0, -(omega * l.tau).cos() / (l.z_c * s));
            // stamp_admittance(a, b, y) adds y to (a,a), (b,b), -y to (a,b), (b,a).
            sys.stamp_admittance(l.from, l.to, -mutual);
            sys.stamp_admittance(l.from, 0, own + mutual);
            sys.stamp_admittance(l.to, 0, own + mutual);
        }
        sys.factorize()?;
        sys.clear_rhs();
        for b in &network.branches {
            match &b.kind {
                BranchKind::VoltageSource { waveform, r_internal } => {
                    let i = source_phasor(waveform, omega) / r_internal;
                    sys.inject(b.from, i);
                    sys.inject(b.to, -i);
                }
                BranchKind::CurrentSource(waveform) => {
                    let i = source_phasor(waveform, omega);
                    sys.inject(b.from, -i);
                    sys.inject(b.to, i);
                }
                _ => {}
            }
        }
        let nodes = sys.solve()?;
        out.push(SteadyTone { omega, nodes, ports: Vec::new() });
    }
    Ok(out)
}

/// Analytic value `sum X e^{j omega t}` of per-tone phasors.
pub fn analytic(parts: impl IntoIterator<Item = (f64, Complex64)>, t: f64) -> Complex64 {
    parts
        .into_iter()
        .map(|(omega, x)| if omega == 0.0 { Complex64::new(x.re, 0.0) } else { x * Complex64::from_polar(1.0, omega * t) })
        .sum()
}
