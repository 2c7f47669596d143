//! Fixed-step trapezoidal nodal solver, generic over the value type.
//!
//! With `T = f64` this is a conventional EMT solver on instantaneous values.
//! With `T = Complex64` it integrates complex envelopes around a carrier
//! `omega_s`: every branch equation `dx/dt = a x + u` becomes
//! `dX/dt = (a - j omega_s) X + U`, and the trapezoidal rule is applied to the
//! whole right-hand side, rotation term included.

use std::fmt::Debug;

use nalgebra::ComplexField;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::network::{BranchKind, Network, Waveform};
use crate::nodal::NodalSystem;
use crate::steady::{self, analytic, SteadyTone};
use crate::wave_link::TravelingWaveLink;

/// Scalar types a [`Solver`] can march.
pub trait CircuitValue: ComplexField<RealField = f64> + Copy + Send + Sync + Debug + 'static {
    /// `j * x`. Real values only admit `x == 0`.
    fn j_times(x: f64) -> Self;
    /// `exp(j angle)`. Real values only admit `angle == 0`.
    fn rotation(angle: f64) -> Self;
    /// Value of a source waveform in this domain at `t`.
    fn source(waveform: &Waveform, t: f64, omega_s: f64) -> Self;
    /// This domain's view of an analytic signal value at `t`.
    fn from_analytic(z: Complex64, t: f64, omega_s: f64) -> Self;
    fn to_complex(self) -> Complex64;
    /// Real values drop `im`.
    fn from_parts(re: f64, im: f64) -> Self;
}

impl CircuitValue for f64 {
    fn j_times(x: f64) -> Self {
        debug_assert!(x == 0.0, "real solver cannot carry a frequency shift");
        0.0
    }

    fn rotation(angle: f64) -> Self {
        debug_assert!(angle == 0.0, "real solver cannot carry a frequency shift");
        1.0
    }

    fn source(waveform: &Waveform, t: f64, _omega_s: f64) -> Self {
        waveform.real(t)
    }

    fn from_analytic(z: Complex64, _t: f64, _omega_s: f64) -> Self {
        z.re
    }

    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }

    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }
}

impl CircuitValue for Complex64 {
    fn j_times(x: f64) -> Self {
        Complex64::new(0.0, x)
    }

    fn rotation(angle: f64) -> Self {
        Complex64::from_polar(1.0, angle)
    }

    fn source(waveform: &Waveform, t: f64, omega_s: f64) -> Self {
        waveform.envelope(t, omega_s)
    }

    fn from_analytic(z: Complex64, t: f64, omega_s: f64) -> Self {
        z * Complex64::from_polar(1.0, -omega_s * t)
    }

    fn to_complex(self) -> Complex64 {
        self
    }

    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CompanionKind<T> {
    Resistor,
    /// History update `i_h <- rotor * i + Y * v`.
    Inductor { rotor: T },
    /// History update `i_h <- -i - back * v`.
    Capacitor { back: T },
    VoltageSource,
    CurrentSource,
}

/// Discretized branch: `i = Y v + i_h`, with `v = v(from) - v(to)` and `i`
/// flowing from `from` to `to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Companion<T> {
    pub admittance: T,
    pub history_current: T,
    pub from: usize,
    pub to: usize,
    pub kind: CompanionKind<T>,
}

/// Trapezoidal companion models of every branch plus the assembled (not yet
/// factorized) admittance matrix.
pub fn discretize<T: CircuitValue>(
    network: &Network,
    dt: f64,
    omega_s: f64,
) -> Result<(Vec<Companion<T>>, NodalSystem<T>)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter { name: "dt".into(), reason: format!("must be positive, got {dt}") });
    }
    if !(omega_s >= 0.0 && omega_s.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "omega_s".into(),
            reason: format!("must be nonnegative, got {omega_s}"),
        });
    }
    network.validate(&[])?;

    let one = T::one();
    let half_rot = T::j_times(omega_s * dt / 2.0);
    let mut system = NodalSystem::new(network.node_count);
    let mut out = Vec::with_capacity(network.branches.len());
    for b in &network.branches {
        let (admittance, kind) = match &b.kind {
            BranchKind::Resistor(r) => (T::from_real(1.0 / r), CompanionKind::Resistor),
            BranchKind::Inductor(l) => {
                let y = T::from_real(dt / (2.0 * l)) / (one + half_rot);
                let rotor = (one - half_rot) / (one + half_rot);
                (y, CompanionKind::Inductor { rotor })
            }
            BranchKind::Capacitor(c) => {
                let g = T::from_real(2.0 * c / dt);
                (g * (one + half_rot), CompanionKind::Capacitor { back: g * (one - half_rot) })
            }
            BranchKind::VoltageSource { r_internal, .. } => {
                (T::from_real(1.0 / r_internal), CompanionKind::VoltageSource)
            }
            BranchKind::CurrentSource(_) => (T::zero(), CompanionKind::CurrentSource),
        };
        if !matches!(kind, CompanionKind::CurrentSource) {
            system.stamp_admittance(b.from, b.to, admittance);
        }
        out.push(Companion { admittance, history_current: T::zero(), from: b.from, to: b.to, kind });
    }
    for line in &network.lines {
        let g = T::from_real(1.0 / line.z_c);
        system.stamp_admittance(line.from, 0, g);
        system.stamp_admittance(line.to, 0, g);
    }
    Ok((out, system))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState<T> {
    pub t: f64,
    pub dt: f64,
    /// Indexed by node number; entry 0 (ground) is always zero.
    pub node_voltages: Vec<T>,
    pub branch_currents: Vec<T>,
}

/// External connection point of a link: a shunt `1/z_c` to ground plus a
/// history current set from outside before every step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Port<T> {
    pub node: usize,
    pub z_c: f64,
    /// Bergeron history `i_h`; the port draws `v / z_c + i_h` from the node.
    pub history: T,
    /// Current into the link after the last step.
    pub current: T,
}

#[derive(Debug, Clone)]
pub struct Solver<T: CircuitValue> {
    network: Network,
    omega_s: f64,
    steps: u64,
    companions: Vec<Companion<T>>,
    system: NodalSystem<T>,
    state: SolverState<T>,
    pending: Vec<(usize, T)>,
    lines: Vec<TravelingWaveLink<T>>,
    line_currents: Vec<[T; 2]>,
    ports: Vec<Port<T>>,
}

impl<T: CircuitValue> Solver<T> {
    /// Solver whose `ports` (node, z_c) are driven from outside through
    /// [`Solver::set_port_history`].
    pub fn with_ports(network: &Network, dt: f64, omega_s: f64, ports: &[(usize, f64)]) -> Result<Self> {
        let port_nodes: Vec<usize> = ports.iter().map(|p| p.0).collect();
        network.validate(&port_nodes)?;
        let mut net_for_discretize = network.clone();
        // Ports ground their node; validate() above already accounted for it.
        for &(node, z_c) in ports {
            if !(z_c > 0.0) {
                return Err(Error::InvalidParameter { name: "z_c".into(), reason: format!("{z_c}") });
            }
            net_for_discretize.resistor("", node, 0, z_c);
        }
        let (mut companions, system) = discretize::<T>(&net_for_discretize, dt, omega_s)?;
        companions.truncate(network.branches.len());

        let lines = network
            .lines
            .iter()
            .map(|l| {
                if l.tau < dt {
                    return Err(Error::Schedule(format!(
                        "line {}: travel time {:e} s shorter than the step {:e} s",
                        l.name, l.tau, dt
                    )));
                }
                Ok(TravelingWaveLink::new(l.z_c, l.tau, [dt, dt], 0.0))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut solver = Self {
            network: network.clone(),
            omega_s,
            steps: 0,
            companions,
            system,
            state: SolverState {
                t: 0.0,
                dt,
                node_voltages: vec![T::zero(); network.node_count],
                branch_currents: vec![T::zero(); network.branches.len()],
            },
            pending: Vec::new(),
            line_currents: vec![[T::zero(); 2]; lines.len()],
            lines,
            ports: ports
                .iter()
                .map(|&(node, z_c)| Port { node, z_c, history: T::zero(), current: T::zero() })
                .collect(),
        };
        solver.system.factorize()?;
        solver.start(&net_for_discretize)?;
        Ok(solver)
    }

    /// Consistent state at `t = 0+`: sources switched on, inductor currents
    /// and capacitor voltages still zero, link and port histories zero.
    /// Solved as the same network discretized with a vanishing step, so
    /// inductors open and capacitors short.
    fn start(&mut self, net: &Network) -> Result<()> {
        // Inductors open, capacitors shorted: the same at every carrier, so
        // the real and imaginary parts are solved on the real network.
        let (tiny, mut system) = discretize::<f64>(net, self.state.dt * 1e-9, 0.0)?;
        system.factorize()?;
        let src: Vec<Option<Complex64>> = self
            .network
            .branches
            .iter()
            .map(|b| match &b.kind {
                BranchKind::VoltageSource { waveform, .. } | BranchKind::CurrentSource(waveform) => {
                    Some(T::source(waveform, 0.0, self.omega_s).to_complex())
                }
                _ => None,
            })
            .collect();
        let mut solve_part = |part: fn(Complex64) -> f64| -> Result<Option<Vec<f64>>> {
            system.clear_rhs();
            let mut any = false;
            for ((c, b), e) in tiny.iter().zip(&self.network.branches).zip(&src) {
                let Some(e) = e else { continue };
                let h = match b.kind {
                    BranchKind::VoltageSource { .. } => -c.admittance * part(*e),
                    _ => part(*e),
                };
                if h != 0.0 {
                    any = true;
                    system.inject(c.from, -h);
                    system.inject(c.to, h);
                }
            }
            if any { system.solve().map(Some) } else { Ok(None) }
        };
        let re = solve_part(|z| z.re)?;
        let im = solve_part(|z| z.im)?;
        if re.is_none() && im.is_none() {
            return Ok(());
        }
        let n = self.network.node_count;
        let v: Vec<T> = (0..n)
            .map(|k| T::from_parts(re.as_ref().map_or(0.0, |x| x[k]), im.as_ref().map_or(0.0, |x| x[k])))
            .collect();
        let currents: Vec<T> = tiny
            .iter()
            .zip(&self.network.branches)
            .zip(&src)
            .map(|((c, b), e)| {
                let vb = v[c.from] - v[c.to];
                let e = e.map(|z| T::from_parts(z.re, z.im));
                match (&b.kind, e) {
                    (BranchKind::Inductor(_), _) => T::zero(),
                    (BranchKind::VoltageSource { .. }, Some(e)) => T::from_real(c.admittance) * (vb - e),
                    (BranchKind::CurrentSource(_), Some(e)) => e,
                    _ => T::from_real(c.admittance) * vb,
                }
            })
            .collect();
        self.set_initial_state(&v, &currents)?;
        for (k, (line, spec)) in self.lines.iter_mut().zip(&self.network.lines).enumerate() {
            let g = T::from_real(1.0 / spec.z_c);
            let i = [g * v[spec.from], g * v[spec.to]];
            line.set_initial(0, v[spec.from], i[0]);
            line.set_initial(1, v[spec.to], i[1]);
            self.line_currents[k] = i;
        }
        for p in &mut self.ports {
            p.current = v[p.node] * T::from_real(1.0 / p.z_c);
        }
        Ok(())
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn dt(&self) -> f64 {
        self.state.dt
    }

    pub fn omega_s(&self) -> f64 {
        self.omega_s
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn state(&self) -> &SolverState<T> {
        &self.state
    }

    pub fn companions(&self) -> &[Companion<T>] {
        &self.companions
    }

    pub fn system(&self) -> &NodalSystem<T> {
        &self.system
    }

    pub fn node_voltage(&self, node: usize) -> T {
        self.state.node_voltages[node]
    }

    pub fn branch_current(&self, branch: usize) -> T {
        self.state.branch_currents[branch]
    }

    /// Current entering line `line` at `end` (0 = `from`, 1 = `to`).
    pub fn line_current(&self, line: usize, end: usize) -> T {
        self.line_currents[line][end]
    }

    pub fn ports(&self) -> &[Port<T>] {
        &self.ports
    }

    pub fn set_port_history(&mut self, port: usize, history: T) {
        self.ports[port].history = history;
    }

    /// Adds `current` flowing into `node` for the next solve only.
    pub fn inject_boundary(&mut self, node: usize, current: T) {
        self.pending.push((node, current));
    }

    /// Sets node voltages and branch currents at t = 0 and derives the
    /// matching companion histories. Branch currents of voltage/current
    /// sources and resistors are recomputed on the first step anyway.
    pub fn set_initial_state(&mut self, node_voltages: &[T], branch_currents: &[T]) -> Result<()> {
        if self.steps != 0 {
            return Err(Error::Schedule("initial state can only be set before the first step".into()));
        }
        if node_voltages.len() != self.network.node_count || branch_currents.len() != self.companions.len() {
            return Err(Error::InvalidParameter {
                name: "initial state".into(),
                reason: "length does not match the network".into(),
            });
        }
        self.state.node_voltages.copy_from_slice(node_voltages);
        self.state.node_voltages[0] = T::zero();
        self.state.branch_currents.copy_from_slice(branch_currents);
        for (k, c) in self.companions.iter_mut().enumerate() {
            let v = self.state.node_voltages[c.from] - self.state.node_voltages[c.to];
            let i = self.state.branch_currents[k];
            match c.kind {
                CompanionKind::Inductor { rotor } => c.history_current = rotor * i + c.admittance * v,
                CompanionKind::Capacitor { back } => c.history_current = -i - back * v,
                _ => {}
            }
        }
        Ok(())
    }

    /// Starts from a sinusoidal steady state instead of rest: node voltages,
    /// branch currents, line prehistory and port currents all follow the
    /// given phasors (one entry per frequency, `ports` in port order).
    pub fn set_steady_state(&mut self, tones: &[SteadyTone]) -> Result<()> {
        if self.steps != 0 {
            return Err(Error::Schedule("initial state can only be set before the first step".into()));
        }
        let n = self.network.node_count;
        if tones.iter().any(|t| t.nodes.len() != n || t.ports.len() != self.ports.len()) {
            return Err(Error::InvalidParameter {
                name: "steady state".into(),
                reason: "phasor count does not match the network".into(),
            });
        }
        let ws = self.omega_s;
        let at0 = |parts: &mut dyn Iterator<Item = (f64, Complex64)>| T::from_analytic(analytic(parts, 0.0), 0.0, ws);
        let v: Vec<T> = (0..n).map(|k| at0(&mut tones.iter().map(|t| (t.omega, t.nodes[k])))).collect();
        let i: Vec<T> = self
            .network
            .branches
            .iter()
            .map(|b| {
                at0(&mut tones
                    .iter()
                    .map(|t| (t.omega, steady::branch_current(&b.kind, t.nodes[b.from], t.nodes[b.to], t.omega))))
            })
            .collect();
        self.set_initial_state(&v, &i)?;

        for (k, (line, spec)) in self.lines.iter_mut().zip(&self.network.lines).enumerate() {
            let mut parts = Vec::with_capacity(tones.len());
            for t in tones {
                let i = steady::line_currents(spec, t.nodes[spec.from], t.nodes[spec.to], t.omega)?;
                parts.push((t.omega, [t.nodes[spec.from], t.nodes[spec.to]], i));
            }
            for end in 0..2 {
                line.set_history(end, |tt| {
                    let v = analytic(parts.iter().map(|p| (p.0, p.1[end])), tt);
                    let i = analytic(parts.iter().map(|p| (p.0, p.2[end])), tt);
                    (T::from_analytic(v, tt, ws), T::from_analytic(i, tt, ws))
                });
            }
            self.line_currents[k] =
                [0, 1].map(|end| T::from_analytic(analytic(parts.iter().map(|p| (p.0, p.2[end])), 0.0), 0.0, ws));
        }
        for (k, p) in self.ports.iter_mut().enumerate() {
            p.current = at0(&mut tones.iter().map(|t| (t.omega, t.ports[k])));
        }
        Ok(())
    }

    /// Advances one step to `t + dt`.
    pub fn step(&mut self) -> Result<&SolverState<T>> {
        let t_next = (self.steps + 1) as f64 * self.state.dt;
        self.system.clear_rhs();

        for (c, b) in self.companions.iter_mut().zip(&self.network.branches) {
            match (&b.kind, c.kind) {
                (BranchKind::VoltageSource { waveform, .. }, _) => {
                    c.history_current = -c.admittance * T::source(waveform, t_next, self.omega_s);
                }
                (BranchKind::CurrentSource(waveform), _) => {
                    c.history_current = T::source(waveform, t_next, self.omega_s);
                }
                _ => {}
            }
            if !matches!(c.kind, CompanionKind::Resistor) {
                self.system.inject(c.from, -c.history_current);
                self.system.inject(c.to, c.history_current);
            }
        }

        let mut line_hist = Vec::with_capacity(self.lines.len());
        for (line, spec) in self.lines.iter().zip(&self.network.lines) {
            let rot = T::rotation(-self.omega_s * spec.tau);
            let h0 = line.history_current(0, t_next, rot)?;
            let h1 = line.history_current(1, t_next, rot)?;
            self.system.inject(spec.from, -h0);
            self.system.inject(spec.to, -h1);
            line_hist.push([h0, h1]);
        }
        for p in &self.ports {
            self.system.inject(p.node, -p.history);
        }
        for (node, current) in self.pending.drain(..) {
            self.system.inject(node, current);
        }

        let v = self.system.solve()?;

        for (k, c) in self.companions.iter_mut().enumerate() {
            let vb = v[c.from] - v[c.to];
            let i = match c.kind {
                CompanionKind::Resistor => c.admittance * vb,
                CompanionKind::CurrentSource => c.history_current,
                _ => c.admittance * vb + c.history_current,
            };
            self.state.branch_currents[k] = i;
            match c.kind {
                CompanionKind::Inductor { rotor } => c.history_current = rotor * i + c.admittance * vb,
                CompanionKind::Capacitor { back } => c.history_current = -i - back * vb,
                _ => {}
            }
        }
        for (k, (line, spec)) in self.lines.iter_mut().zip(&self.network.lines).enumerate() {
            let g = T::from_real(1.0 / spec.z_c);
            let i0 = g * v[spec.from] + line_hist[k][0];
            let i1 = g * v[spec.to] + line_hist[k][1];
            line.record(0, v[spec.from], i0);
            line.record(1, v[spec.to], i1);
            self.line_currents[k] = [i0, i1];
        }
        for p in &mut self.ports {
            p.current = v[p.node] * T::from_real(1.0 / p.z_c) + p.history;
        }

        self.state.node_voltages = v;
        self.steps += 1;
        self.state.t = t_next;
        Ok(&self.state)
    }

    /// Runs `n` steps.
    pub fn run_steps(&mut self, n: usize) -> Result<()> {
        for _ in 0..n {
            self.step()?;
        }
        Ok(())
    }
}
