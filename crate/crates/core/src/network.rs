//! Linear circuit description shared by the EMT and shifted-frequency solvers.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Node 0 is ground.
pub const GROUND: usize = 0;

/// Internal resistance of the Norton equivalent used for voltage sources.
pub const DEFAULT_SOURCE_RESISTANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone {
    pub freq: f64,
    pub amplitude: f64,
    pub phase: f64,
}

/// Sum of cosines plus a DC offset, switched on at `t_on`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Waveform {
    pub tones: Vec<Tone>,
    pub dc: f64,
    pub t_on: f64,
}

impl Waveform {
    pub fn dc(value: f64) -> Self {
        Self { tones: Vec::new(), dc: value, t_on: 0.0 }
    }

    pub fn tone(freq: f64, amplitude: f64, phase: f64) -> Self {
        Self { tones: vec![Tone { freq, amplitude, phase }], dc: 0.0, t_on: 0.0 }
    }

    pub fn with_tone(mut self, freq: f64, amplitude: f64, phase: f64) -> Self {
        self.tones.push(Tone { freq, amplitude, phase });
        self
    }

    pub fn starting_at(mut self, t_on: f64) -> Self {
        self.t_on = t_on;
        self
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.t_on
    }

    /// Instantaneous value.
    pub fn real(&self, t: f64) -> f64 {
        if !self.is_active(t) {
            return 0.0;
        }
        self.dc
            + self
                .tones
                .iter()
                .map(|c| c.amplitude * (2.0 * PI * c.freq * t + c.phase).cos())
                .sum::<f64>()
    }

    /// Analytic signal: each cosine becomes a positive-frequency phasor; the
    /// DC offset (and any zero-frequency tone) has no quadrature part.
    pub fn analytic(&self, t: f64) -> Complex64 {
        if !self.is_active(t) {
            return Complex64::new(0.0, 0.0);
        }
        let mut acc = Complex64::new(self.dc, 0.0);
        for c in &self.tones {
            let theta = 2.0 * PI * c.freq * t + c.phase;
            if c.freq == 0.0 {
                acc.re += c.amplitude * theta.cos();
            } else {
                acc += Complex64::from_polar(c.amplitude, theta);
            }
        }
        acc
    }

    /// Complex envelope around `omega_s`.
    pub fn envelope(&self, t: f64, omega_s: f64) -> Complex64 {
        self.analytic(t) * Complex64::from_polar(1.0, -omega_s * t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BranchKind {
    Resistor(f64),
    Inductor(f64),
    Capacitor(f64),
    /// Enforces `v(from) - v(to) = e(t)` through a small series resistance.
    VoltageSource { waveform: Waveform, r_internal: f64 },
    /// Drives `i(t)` from `from` to `to` through the source, i.e. it is
    /// injected into `to`.
    CurrentSource(Waveform),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub name: String,
    pub kind: BranchKind,
    pub from: usize,
    pub to: usize,
}

/// Lossless distributed line fully inside one network.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSpec {
    pub name: String,
    pub from: usize,
    pub to: usize,
    pub z_c: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Network {
    /// Including ground.
    pub node_count: usize,
    pub branches: Vec<Branch>,
    pub lines: Vec<LineSpec>,
}

impl Network {
    pub fn new(node_count: usize) -> Self {
        Self { node_count, branches: Vec::new(), lines: Vec::new() }
    }

    fn push(&mut self, name: &str, kind: BranchKind, from: usize, to: usize) -> usize {
        self.branches.push(Branch { name: name.to_string(), kind, from, to });
        self.branches.len() - 1
    }

    pub fn resistor(&mut self, name: &str, from: usize, to: usize, ohms: f64) -> usize {
        self.push(name, BranchKind::Resistor(ohms), from, to)
    }

    pub fn inductor(&mut self, name: &str, from: usize, to: usize, henry: f64) -> usize {
        self.push(name, BranchKind::Inductor(henry), from, to)
    }

    pub fn capacitor(&mut self, name: &str, from: usize, to: usize, farad: f64) -> usize {
        self.push(name, BranchKind::Capacitor(farad), from, to)
    }

    pub fn voltage_source(&mut self, name: &str, from: usize, to: usize, waveform: Waveform) -> usize {
        let kind = BranchKind::VoltageSource { waveform, r_internal: DEFAULT_SOURCE_RESISTANCE };
        self.push(name, kind, from, to)
    }

    pub fn current_source(&mut self, name: &str, from: usize, to: usize, waveform: Waveform) -> usize {
        self.push(name, BranchKind::CurrentSource(waveform), from, to)
    }

    pub fn line(&mut self, name: &str, from: usize, to: usize, z_c: f64, tau: f64) -> usize {
        self.lines.push(LineSpec { name: name.to_string(), from, to, z_c, tau });
        self.lines.len() - 1
    }

    pub fn branch_index(&self, name: &str) -> Option<usize> {
        self.branches.iter().position(|b| b.name == name)
    }

    pub fn line_index(&self, name: &str) -> Option<usize> {
        self.lines.iter().position(|l| l.name == name)
    }

    /// Checks parameter signs, node ranges and that every node has a
    /// conductive path to ground. `extra_grounded` lists nodes that receive
    /// an external shunt (e.g. a link port).
    pub fn validate(&self, extra_grounded: &[usize]) -> Result<()> {
        if self.node_count < 2 {
            return Err(Error::Network("network needs at least one node besides ground".into()));
        }
        let check_node = |what: &str, n: usize| {
            if n >= self.node_count {
                Err(Error::Network(format!(
                    "{what}: node {n} out of range (node_count = {})",
                    self.node_count
                )))
            } else {
                Ok(())
            }
        };
        let positive = |what: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Network(format!("{what}: parameter must be positive, got {v}")))
            }
        };

        let mut dsu = DisjointSet::new(self.node_count);
        for b in &self.branches {
            check_node(&b.name, b.from)?;
            check_node(&b.name, b.to)?;
            match &b.kind {
                BranchKind::Resistor(v) | BranchKind::Inductor(v) | BranchKind::Capacitor(v) => {
                    positive(&b.name, *v)?;
                    dsu.union(b.from, b.to);
                }
                BranchKind::VoltageSource { r_internal, .. } => {
                    positive(&b.name, *r_internal)?;
                    dsu.union(b.from, b.to);
                }
                BranchKind::CurrentSource(_) => {}
            }
        }
        for l in &self.lines {
            check_node(&l.name, l.from)?;
            check_node(&l.name, l.to)?;
            positive(&l.name, l.z_c)?;
            positive(&l.name, l.tau)?;
            dsu.union(l.from, GROUND);
            dsu.union(l.to, GROUND);
        }
        for &n in extra_grounded {
            check_node("port", n)?;
            dsu.union(n, GROUND);
        }
        let root = dsu.find(GROUND);
        for n in 1..self.node_count {
            if dsu.find(n) != root {
                return Err(Error::Network(format!("node {n} has no conductive path to ground")));
            }
        }
        Ok(())
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn waveform_views_agree() {
        let w = Waveform::tone(50.0, 2.0, 0.4).with_tone(13.0, 0.5, -1.0);
        for &t in &[0.0, 0.0031, 0.017] {
            assert!((w.analytic(t).re - w.real(t)).abs() < 1e-12);
            let ws = 2.0 * PI * 50.0;
            let back = (w.envelope(t, ws) * Complex64::from_polar(1.0, ws * t)).re;
            assert!((back - w.real(t)).abs() < 1e-12);
        }
        let dc = Waveform::dc(3.0);
        assert_eq!(dc.analytic(0.2), Complex64::new(3.0, 0.0));
        let late = Waveform::dc(1.0).starting_at(0.1);
        assert_eq!(late.real(0.05), 0.0);
        assert_eq!(late.real(0.1), 1.0);
    }

    #[test]
    fn validation() {
        let mut n = Network::new(3);
        n.resistor("r1", 1, 0, 1.0);
        n.resistor("r2", 1, 2, 1.0);
        assert!(n.validate(&[]).is_ok());

        let mut bad = n.clone();
        bad.resistor("neg", 1, 2, -1.0);
        let err = bad.validate(&[]).unwrap_err().to_string();
        assert!(err.contains("neg"), "{err}");

        let mut floating = Network::new(4);
        floating.resistor("r", 1, 0, 1.0);
        floating.resistor("island", 2, 3, 1.0);
        assert!(floating.validate(&[]).is_err());
        floating.current_source("i", 0, 2, Waveform::dc(1.0));
        assert!(floating.validate(&[]).is_err());
        assert!(floating.validate(&[3]).is_ok());

        let mut range = Network::new(2);
        range.resistor("r", 1, 5, 1.0);
        assert!(range.validate(&[]).is_err());
    }
}
