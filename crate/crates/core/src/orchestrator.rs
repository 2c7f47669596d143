//! Multi-rate co-simulation: EMT areas step at `dt_micro`, shifted-frequency
//! areas at `dt_macro`, and cross links exchange boundary waves at every
//! macro instant.
//!
//! Exchange is Gauss–Jacobi: at the barrier `T_k` every area receives the
//! incoming waves for all of its steps in `(T_k, T_k + dt_macro]`. Those only
//! depend on far-end data at or before `T_k + dt_macro - tau <= T_k`, so the
//! areas then advance independently (optionally on separate threads).

use std::thread;

use num_complex::Complex64;

use crate::circuit::{CircuitValue, Solver};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::results::{ResultSet, Series, SeriesData};
use crate::scenario::{digest, AreaKind, Initialization, Probe, Scenario};
use crate::steady::{self, analytic, SteadyTone};
use crate::spectral::EnvelopeSeries;
use crate::wave_link::{BoundaryConverter, ConverterMode, SampleBuffer};

/// How envelope samples are read between macro instants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reconstruction {
    /// Newest sample at or before the requested time.
    Hold,
    /// Straight line between the bracketing samples.
    #[default]
    Linear,
}

/// Envelope value at `t` from macro-step samples.
pub fn interpolate_envelope(series: &EnvelopeSeries, t: f64, rule: Reconstruction) -> Result<Complex64> {
    let pos = (t - series.t0) / series.dt;
    let last = series.values.len() as f64 - 1.0;
    if series.values.is_empty() || pos > last + 1e-9 {
        return Err(Error::Lookahead { requested: t, newest: series.time(series.values.len().saturating_sub(1)) });
    }
    if pos < -1e-9 {
        return Err(Error::InsufficientHistory { needed: t, oldest: series.t0 });
    }
    let pos = pos.clamp(0.0, last);
    let k = (pos + 1e-9).floor().min(last) as usize;
    let frac = pos - k as f64;
    match rule {
        Reconstruction::Hold => Ok(series.values[k]),
        Reconstruction::Linear if frac <= 1e-9 || k as f64 >= last => Ok(series.values[k]),
        Reconstruction::Linear => Ok(series.values[k] + (series.values[k + 1] - series.values[k]) * frac),
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides every link's converter mode. `Passthrough(None)` runs every
    /// area as EMT at `dt_micro` and exchanges real waves directly.
    pub interface: Option<ConverterMode>,
    pub reconstruction: Option<Reconstruction>,
    /// Advance areas on separate threads between barriers.
    pub parallel: bool,
}

impl RunOptions {
    pub fn with_interface(mode: ConverterMode) -> Self {
        Self { interface: Some(mode), ..Self::default() }
    }
}

#[derive(Debug, Clone)]
struct PortBinding {
    link: usize,
    end: usize,
    z_c: f64,
}

#[derive(Debug, Clone)]
struct AreaRun<T: CircuitValue> {
    solver: Solver<T>,
    steps_per_interval: usize,
    ports: Vec<PortBinding>,
    /// Incoming wave per port for each step of the current interval.
    incoming: Vec<Vec<T>>,
    /// Outgoing wave `v + z_c i` per port for each step of the interval.
    outgoing: Vec<Vec<T>>,
    probes: Vec<Probe>,
    records: Vec<Vec<T>>,
}

impl<T: CircuitValue> AreaRun<T> {
    fn new(solver: Solver<T>, steps_per_interval: usize, ports: Vec<PortBinding>, probes: Vec<Probe>) -> Self {
        let n = ports.len();
        let mut run = Self {
            solver,
            steps_per_interval,
            ports,
            incoming: vec![Vec::new(); n],
            outgoing: vec![Vec::new(); n],
            records: vec![Vec::new(); probes.len()],
            probes,
        };
        run.record();
        run
    }

    fn probe(&self, probe: &Probe) -> T {
        match *probe {
            Probe::NodeVoltage { node, .. } => self.solver.node_voltage(node),
            Probe::BranchCurrent { branch, .. } => self.solver.branch_current(branch),
            Probe::LineCurrent { line, end, .. } => self.solver.line_current(line, end),
            Probe::LinkCurrent { link, end } => {
                let p = self.ports.iter().position(|b| b.link == link && b.end == end).expect("probe bound to port");
                self.solver.ports()[p].current
            }
        }
    }

    fn record(&mut self) {
        for k in 0..self.probes.len() {
            let v = self.probe(&self.probes[k]);
            self.records[k].push(v);
        }
    }

    fn start_steady(&mut self, tones: &[SteadyTone]) -> Result<()> {
        self.solver.set_steady_state(tones)?;
        self.records.iter_mut().for_each(Vec::clear);
        self.record();
        Ok(())
    }

    fn initial_wave(&self, p: usize) -> T {
        let port = self.solver.ports()[p];
        self.solver.node_voltage(port.node) + port.current * T::from_real(self.ports[p].z_c)
    }

    fn advance(&mut self) -> Result<()> {
        for o in &mut self.outgoing {
            o.clear();
        }
        for s in 0..self.steps_per_interval {
            for (p, b) in self.ports.iter().enumerate() {
                self.solver.set_port_history(p, -self.incoming[p][s] * T::from_real(1.0 / b.z_c));
            }
            self.solver.step()?;
            for (p, b) in self.ports.iter().enumerate() {
                let port = self.solver.ports()[p];
                let wave = self.solver.node_voltage(port.node) + port.current * T::from_real(b.z_c);
                self.outgoing[p].push(wave);
            }
            self.record();
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Area {
    Real(AreaRun<f64>),
    Envelope { run: AreaRun<Complex64>, omega_s: f64 },
}

impl Area {
    fn advance(&mut self) -> Result<()> {
        match self {
            Area::Real(r) => r.advance(),
            Area::Envelope { run, .. } => run.advance(),
        }
    }

    fn dt(&self) -> f64 {
        match self {
            Area::Real(r) => r.solver.dt(),
            Area::Envelope { run, .. } => run.solver.dt(),
        }
    }

    fn ports(&self) -> &[PortBinding] {
        match self {
            Area::Real(r) => &r.ports,
            Area::Envelope { run, .. } => &run.ports,
        }
    }
}

/// Outgoing-wave history of one link end, in that end's domain.
#[derive(Debug, Clone)]
enum EndHistory {
    Real(SampleBuffer<f64>),
    /// Real wave with an analytic-signal converter (far end is an envelope).
    Converted(BoundaryConverter),
    Envelope { buffer: SampleBuffer<Complex64>, omega_s: f64 },
}

impl EndHistory {
    /// Incoming wave for a real-valued end solving at `t`.
    fn real_at(&self, t: f64, tau: f64, rule: Reconstruction) -> Result<f64> {
        let ts = t - tau;
        match self {
            EndHistory::Real(b) => b.value_at(ts),
            EndHistory::Converted(c) => c.buffer().value_at(ts),
            EndHistory::Envelope { buffer, omega_s } => {
                let w = read_envelope(buffer, ts, rule)?;
                Ok((w * Complex64::from_polar(1.0, omega_s * ts)).re)
            }
        }
    }

    /// Incoming wave for an envelope end at carrier `omega_n` solving at `t`.
    fn envelope_at(&self, t: f64, tau: f64, omega_n: f64, rule: Reconstruction) -> Result<Complex64> {
        let ts = t - tau;
        let analytic = match self {
            EndHistory::Real(b) => Complex64::new(b.value_at(ts)?, 0.0),
            EndHistory::Converted(c) => c.analytic_at(ts)?,
            EndHistory::Envelope { buffer, omega_s } => {
                read_envelope(buffer, ts, rule)? * Complex64::from_polar(1.0, omega_s * ts)
            }
        };
        Ok(analytic * Complex64::from_polar(1.0, -omega_n * t))
    }
}

fn read_envelope(buffer: &SampleBuffer<Complex64>, t: f64, rule: Reconstruction) -> Result<Complex64> {
    match rule {
        Reconstruction::Hold => buffer.held_at(t),
        Reconstruction::Linear => buffer.value_at(t),
    }
}

/// A co-simulation in progress.
#[derive(Debug, Clone)]
pub struct CosimRun {
    scenario: Scenario,
    areas: Vec<Area>,
    history: Vec<[EndHistory; 2]>,
    reconstruction: Reconstruction,
    parallel: bool,
    interface: String,
    demoted: bool,
    interval: usize,
}

impl CosimRun {
    pub fn new(scenario: &Scenario, options: &RunOptions) -> Result<Self> {
        scenario.validate()?;
        let mut scenario = scenario.clone();
        if let Some(mode) = &options.interface {
            for l in &mut scenario.links {
                l.converter.mode = mode.clone();
            }
        }
        let mixed = |l: &crate::scenario::LinkSpec| {
            l.ends.iter().filter(|e| scenario.areas[e.area].kind.is_emt()).count() == 1
        };
        let demoted = scenario
            .links
            .iter()
            .any(|l| mixed(l) && matches!(l.converter.mode, ConverterMode::Passthrough(None)));
        let interface = match &options.interface {
            Some(m) => m.name().to_string(),
            None => {
                let names: Vec<&str> = scenario.links.iter().filter(|l| mixed(l)).map(|l| l.converter.mode.name()).collect();
                if names.is_empty() { "none".to_string() } else { names.join(",") }
            }
        };
        let sched = scenario.schedule;
        let reconstruction = options.reconstruction.unwrap_or(scenario.reconstruction);
        let is_real = |a: usize| demoted || scenario.areas[a].kind.is_emt();

        let mut areas = Vec::with_capacity(scenario.areas.len());
        for (ai, spec) in scenario.areas.iter().enumerate() {
            let mut bindings = Vec::new();
            for (li, l) in scenario.links.iter().enumerate() {
                for (e, end) in l.ends.iter().enumerate() {
                    if end.area == ai {
                        bindings.push(PortBinding { link: li, end: e, z_c: l.z_c });
                    }
                }
            }
            let ports = scenario.ports(ai);
            let probes: Vec<Probe> = scenario
                .recorders
                .iter()
                .filter(|r| scenario.probe_area(&r.probe) == ai)
                .map(|r| r.probe)
                .collect();
            let area = if is_real(ai) {
                let solver = Solver::<f64>::with_ports(&spec.network, sched.dt_micro, 0.0, &ports)?;
                Area::Real(AreaRun::new(solver, sched.ratio, bindings, probes))
            } else {
                let omega_s = spec.kind.omega_s();
                let solver = Solver::<Complex64>::with_ports(&spec.network, sched.dt_macro, omega_s, &ports)?;
                Area::Envelope { run: AreaRun::new(solver, 1, bindings, probes), omega_s }
            };
            areas.push(area);
        }

        let mut history = Vec::with_capacity(scenario.links.len());
        for l in &scenario.links {
            let span = l.tau + 2.0 * sched.dt_macro;
            let make = |e: usize| -> Result<EndHistory> {
                let near = l.ends[e].area;
                let far = l.ends[1 - e].area;
                Ok(if !is_real(near) {
                    EndHistory::Envelope {
                        buffer: SampleBuffer::new(sched.dt_macro, span, Complex64::new(0.0, 0.0)),
                        omega_s: scenario.areas[near].kind.omega_s(),
                    }
                } else if is_real(far) {
                    EndHistory::Real(SampleBuffer::new(sched.dt_micro, span, 0.0))
                } else {
                    let mut cfg = l.converter.clone();
                    cfg.omega_s = scenario.areas[far].kind.omega_s();
                    EndHistory::Converted(BoundaryConverter::new(cfg, sched.dt_micro, span)?)
                })
            };
            history.push([make(0)?, make(1)?]);
        }

        if scenario.init == Initialization::SteadyState {
            start_steady(&scenario, &mut areas, &mut history)?;
        } else {
            for area in &areas {
                match area {
                    Area::Real(run) => {
                        for (p, b) in run.ports.iter().enumerate() {
                            let w = run.initial_wave(p);
                            match &mut history[b.link][b.end] {
                                EndHistory::Real(buf) => buf.set_initial(w),
                                EndHistory::Converted(c) => c.reset_initial(w),
                                EndHistory::Envelope { .. } => unreachable!("real area owns a real history"),
                            }
                        }
                    }
                    Area::Envelope { run, .. } => {
                        for (p, b) in run.ports.iter().enumerate() {
                            let w = run.initial_wave(p);
                            match &mut history[b.link][b.end] {
                                EndHistory::Envelope { buffer, .. } => buffer.set_initial(w),
                                _ => unreachable!("envelope area owns an envelope history"),
                            }
                        }
                    }
                }
            }
        }

        let mut run = Self {
            scenario,
            areas,
            history,
            reconstruction,
            parallel: options.parallel,
            interface,
            demoted,
            interval: 0,
        };
        run.prepare_interval()?;
        Ok(run)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Time of the last completed barrier.
    pub fn time(&self) -> f64 {
        self.scenario.schedule.macro_time(self.interval)
    }

    pub fn is_finished(&self) -> bool {
        self.interval >= self.scenario.schedule.macro_steps()
    }

    /// True when every area runs as EMT (passthrough without an oracle).
    pub fn is_all_emt(&self) -> bool {
        self.demoted || self.scenario.areas.iter().all(|a| a.kind.is_emt())
    }

    /// Converter of the real end of `link`, if it has one.
    pub fn converter(&self, link: usize) -> Option<&BoundaryConverter> {
        self.history[link].iter().find_map(|h| match h {
            EndHistory::Converted(c) => Some(c),
            _ => None,
        })
    }

    /// Fills every port's incoming waves for the interval starting at the
    /// current barrier.
    fn prepare_interval(&mut self) -> Result<()> {
        let t_k = self.time();
        for h in self.history.iter_mut().flatten() {
            if let EndHistory::Converted(c) = h {
                c.refresh(t_k)?;
            }
        }
        let rule = self.reconstruction;
        for area in &mut self.areas {
            let dt = area.dt();
            let ports = area.ports().to_vec();
            match area {
                Area::Real(run) => {
                    let first = self.interval * run.steps_per_interval;
                    for (p, b) in ports.iter().enumerate() {
                        let far = &self.history[b.link][1 - b.end];
                        let tau = self.scenario.links[b.link].tau;
                        run.incoming[p] = (1..=run.steps_per_interval)
                            .map(|s| far.real_at((first + s) as f64 * dt, tau, rule))
                            .collect::<Result<_>>()?;
                    }
                }
                Area::Envelope { run, omega_s } => {
                    let first = self.interval * run.steps_per_interval;
                    for (p, b) in ports.iter().enumerate() {
                        let far = &self.history[b.link][1 - b.end];
                        let tau = self.scenario.links[b.link].tau;
                        run.incoming[p] = (1..=run.steps_per_interval)
                            .map(|s| far.envelope_at((first + s) as f64 * dt, tau, *omega_s, rule))
                            .collect::<Result<_>>()?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Advances every area by one exchange interval.
    pub fn step_interval(&mut self) -> Result<()> {
        if self.parallel && self.areas.len() > 1 {
            thread::scope(|s| {
                let handles: Vec<_> = self.areas.iter_mut().map(|a| s.spawn(move || a.advance())).collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|_| Err(Error::Schedule("area thread panicked".into()))))
                    .collect::<Result<Vec<()>>>()
            })?;
        } else {
            for a in &mut self.areas {
                a.advance()?;
            }
        }
        for area in &self.areas {
            match area {
                Area::Real(run) => {
                    for (p, b) in run.ports.iter().enumerate() {
                        match &mut self.history[b.link][b.end] {
                            EndHistory::Real(buf) => run.outgoing[p].iter().for_each(|&w| buf.push(w)),
                            EndHistory::Converted(c) => run.outgoing[p].iter().for_each(|&w| c.push(w)),
                            EndHistory::Envelope { .. } => unreachable!("real area owns a real history"),
                        }
                    }
                }
                Area::Envelope { run, .. } => {
                    for (p, b) in run.ports.iter().enumerate() {
                        match &mut self.history[b.link][b.end] {
                            EndHistory::Envelope { buffer, .. } => run.outgoing[p].iter().for_each(|&w| buffer.push(w)),
                            _ => unreachable!("envelope area owns an envelope history"),
                        }
                    }
                }
            }
        }
        self.interval += 1;
        if !self.is_finished() {
            self.prepare_interval()?;
        }
        Ok(())
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        while !self.is_finished() {
            self.step_interval()?;
        }
        Ok(())
    }

    /// Recorded series. EMT-area probes give `name` at `dt_micro`;
    /// envelope-area probes give complex `name` at `dt_macro` plus the
    /// demodulated `name_inst` at `dt_micro`.
    pub fn results(&self) -> ResultSet {
        let sched = self.scenario.schedule;
        let mut series: Vec<Series> = Vec::new();
        for r in &self.scenario.recorders {
            let ai = self.scenario.probe_area(&r.probe);
            let envelope_area = !self.scenario.areas[ai].kind.is_emt();
            let area = &self.areas[ai];
            let k = match area {
                Area::Real(run) => run.probes.iter().position(|p| *p == r.probe),
                Area::Envelope { run, .. } => run.probes.iter().position(|p| *p == r.probe),
            }
            .expect("recorder bound to its area");
            match area {
                Area::Real(run) => {
                    let values = run.records[k].clone();
                    let t = (0..values.len()).map(|i| i as f64 * sched.dt_micro).collect();
                    let name = if envelope_area { format!("{}_inst", r.name) } else { r.name.clone() };
                    series.push(Series { name, t, data: SeriesData::Real(values) });
                }
                Area::Envelope { run, omega_s } => {
                    let env = EnvelopeSeries { values: run.records[k].clone(), dt: sched.dt_macro, t0: 0.0, omega_s: *omega_s };
                    let n_micro = (env.values.len() - 1) * sched.ratio + 1;
                    let t_micro: Vec<f64> = (0..n_micro).map(|i| i as f64 * sched.dt_micro).collect();
                    let inst = t_micro
                        .iter()
                        .map(|&t| {
                            let x = interpolate_envelope(&env, t, self.reconstruction).expect("inside record");
                            (x * Complex64::from_polar(1.0, omega_s * t)).re
                        })
                        .collect();
                    let t_macro = (0..env.values.len()).map(|i| i as f64 * sched.dt_macro).collect();
                    series.push(Series { name: r.name.clone(), t: t_macro, data: SeriesData::Complex(env.values) });
                    series.push(Series { name: format!("{}_inst", r.name), t: t_micro, data: SeriesData::Real(inst) });
                }
            }
        }
        ResultSet { series, metadata: self.metadata() }
    }

    fn metadata(&self) -> Vec<(String, String)> {
        let s = &self.scenario.schedule;
        vec![
            ("scenario_digest".into(), digest(&self.scenario)),
            ("mode".into(), if self.demoted { "all-emt".into() } else { "cosim".into() }),
            ("interface".into(), self.interface.clone()),
            ("dt_micro".into(), format!("{:?}", s.dt_micro)),
            ("dt_macro".into(), format!("{:?}", s.dt_macro)),
            ("ratio".into(), s.ratio.to_string()),
            ("t_end".into(), format!("{:?}", s.t_end)),
            ("envelope_interp".into(), format!("{:?}", self.reconstruction).to_lowercase()),
        ]
    }
}

/// Runs a scenario to `t_end`.
pub fn run(scenario: &Scenario, options: &RunOptions) -> Result<ResultSet> {
    let mut r = CosimRun::new(scenario, options)?;
    r.run_to_end()?;
    Ok(r.results())
}

/// Merges every area into one EMT network (cross links become in-network
/// lines) and solves it at `dt_micro`: the reference for co-simulation runs.
/// Series are named as [`CosimRun::results`] names its `dt_micro` views.
pub fn run_monolithic(scenario: &Scenario) -> Result<ResultSet> {
    scenario.validate()?;
    let sched = scenario.schedule;
    let merged = Merged::new(scenario);
    let Merged { net, branch_base, line_base, link_base, .. } = &merged;
    let map = |area: usize, node: usize| merged.node(area, node);

    let mut solver = Solver::<f64>::with_ports(net, sched.dt_micro, 0.0, &[])?;
    if scenario.init == Initialization::SteadyState {
        solver.set_steady_state(&steady::steady_state(net)?)?;
    }
    let probe = |s: &Solver<f64>, p: &Probe| match *p {
        Probe::NodeVoltage { area, node } => s.node_voltage(map(area, node)),
        Probe::BranchCurrent { area, branch } => s.branch_current(branch_base[area] + branch),
        Probe::LineCurrent { area, line, end } => s.line_current(line_base[area] + line, end),
        Probe::LinkCurrent { link, end } => s.line_current(link_base + link, end),
    };
    let steps = sched.macro_steps() * sched.ratio;
    let mut records: Vec<Vec<f64>> = vec![Vec::with_capacity(steps + 1); scenario.recorders.len()];
    let record = |s: &Solver<f64>, records: &mut Vec<Vec<f64>>| {
        for (k, r) in scenario.recorders.iter().enumerate() {
            records[k].push(probe(s, &r.probe));
        }
    };
    record(&solver, &mut records);
    for _ in 0..steps {
        solver.step()?;
        record(&solver, &mut records);
    }
    let t: Vec<f64> = (0..=steps).map(|i| i as f64 * sched.dt_micro).collect();
    let series = scenario
        .recorders
        .iter()
        .zip(records)
        .map(|(r, values)| {
            let area = scenario.probe_area(&r.probe);
            let name = match scenario.areas[area].kind {
                AreaKind::Emt => r.name.clone(),
                AreaKind::Sfemt { .. } => format!("{}_inst", r.name),
            };
            Series { name, t: t.clone(), data: SeriesData::Real(values) }
        })
        .collect();
    let metadata = vec![
        ("scenario_digest".into(), digest(scenario)),
        ("mode".into(), "monolithic".into()),
        ("dt_micro".into(), format!("{:?}", sched.dt_micro)),
        ("t_end".into(), format!("{:?}", sched.t_end)),
    ];
    Ok(ResultSet { series, metadata })
}

/// Every area joined into one network; cross links become lines after the
/// areas' own lines.
struct Merged {
    net: Network,
    offsets: Vec<usize>,
    branch_base: Vec<usize>,
    line_base: Vec<usize>,
    link_base: usize,
}

impl Merged {
    fn new(scenario: &Scenario) -> Self {
        let mut offsets = Vec::with_capacity(scenario.areas.len());
        let mut total = 1;
        for a in &scenario.areas {
            offsets.push(total - 1);
            total += a.network.node_count - 1;
        }
        let map = |area: usize, node: usize| if node == 0 { 0 } else { node + offsets[area] };
        let mut net = Network::new(total);
        let mut branch_base = Vec::new();
        let mut line_base = Vec::new();
        for (ai, a) in scenario.areas.iter().enumerate() {
            branch_base.push(net.branches.len());
            line_base.push(net.lines.len());
            for b in &a.network.branches {
                let mut b = b.clone();
                b.name = format!("{}.{}", a.name, b.name);
                b.from = map(ai, b.from);
                b.to = map(ai, b.to);
                net.branches.push(b);
            }
            for l in &a.network.lines {
                net.line(&format!("{}.{}", a.name, l.name), map(ai, l.from), map(ai, l.to), l.z_c, l.tau);
            }
        }
        let link_base = net.lines.len();
        for l in &scenario.links {
            let [a, b] = l.ends;
            net.line(&l.name, map(a.area, a.node), map(b.area, b.node), l.z_c, l.tau);
        }
        Self { net, offsets, branch_base, line_base, link_base }
    }

    fn node(&self, area: usize, node: usize) -> usize {
        if node == 0 { 0 } else { node + self.offsets[area] }
    }
}

/// Puts every area and every link history into the steady state of the
/// merged network.
fn start_steady(scenario: &Scenario, areas: &mut [Area], history: &mut [[EndHistory; 2]]) -> Result<()> {
    let merged = Merged::new(scenario);
    let tones = steady::steady_state(&merged.net)?;
    // Per link, per tone: (omega, end voltages, end currents).
    let mut links = Vec::with_capacity(scenario.links.len());
    for li in 0..scenario.links.len() {
        let spec = &merged.net.lines[merged.link_base + li];
        let parts = tones
            .iter()
            .map(|t| {
                let v = [t.nodes[spec.from], t.nodes[spec.to]];
                Ok((t.omega, v, steady::line_currents(spec, v[0], v[1], t.omega)?))
            })
            .collect::<Result<Vec<_>>>()?;
        links.push(parts);
    }
    for (ai, area) in areas.iter_mut().enumerate() {
        let nodes = scenario.areas[ai].network.node_count;
        let bindings = area.ports().to_vec();
        let local: Vec<SteadyTone> = tones
            .iter()
            .enumerate()
            .map(|(k, t)| SteadyTone {
                omega: t.omega,
                nodes: (0..nodes).map(|n| t.nodes[merged.node(ai, n)]).collect(),
                ports: bindings.iter().map(|b| links[b.link][k].2[b.end]).collect(),
            })
            .collect();
        match area {
            Area::Real(run) => run.start_steady(&local)?,
            Area::Envelope { run, .. } => run.start_steady(&local)?,
        }
    }
    for (li, ends) in history.iter_mut().enumerate() {
        let z_c = scenario.links[li].z_c;
        let parts = &links[li];
        for (e, h) in ends.iter_mut().enumerate() {
            let wave = |t: f64| analytic(parts.iter().map(|p| (p.0, p.1[e] + p.2[e] * z_c)), t);
            match h {
                EndHistory::Real(buf) => buf.set_history(|t| wave(t).re),
                EndHistory::Converted(c) => c.set_history(|t| wave(t).re),
                EndHistory::Envelope { buffer, omega_s } => {
                    let ws = *omega_s;
                    buffer.set_history(|t| wave(t) * Complex64::from_polar(1.0, -ws * t));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn series(values: Vec<Complex64>, dt: f64) -> EnvelopeSeries {
        EnvelopeSeries { values, dt, t0: 0.0, omega_s: 2.0 * PI * 50.0 }
    }

    #[test]
    fn constant_envelope_reconstructs_exactly() {
        let c = Complex64::new(0.3, -1.2);
        let env = series(vec![c; 10], 500e-6);
        for rule in [Reconstruction::Hold, Reconstruction::Linear] {
            for i in 0..200 {
                assert_eq!(interpolate_envelope(&env, i as f64 * 20e-6, rule).unwrap(), c);
            }
        }
    }

    #[test]
    fn linear_ramp_reconstructs_exactly() {
        let dt = 500e-6;
        let f = |t: f64| Complex64::new(1.0 + 40.0 * t, -3.0 * t);
        let env = series((0..10).map(|i| f(i as f64 * dt)).collect(), dt);
        for i in 0..=225 {
            let t = i as f64 * 20e-6;
            assert!((interpolate_envelope(&env, t, Reconstruction::Linear).unwrap() - f(t)).norm() < 1e-12);
        }
    }

    #[test]
    fn hold_error_bounded_by_rotation() {
        let dt = 500e-6;
        let dw = 2.0 * PI * 5.0;
        let f = |t: f64| Complex64::from_polar(1.0, dw * t);
        let env = series((0..200).map(|i| f(i as f64 * dt)).collect(), dt);
        let mut worst: f64 = 0.0;
        for i in 0..(199 * 25) {
            let t = i as f64 * 20e-6;
            worst = worst.max((interpolate_envelope(&env, t, Reconstruction::Hold).unwrap() - f(t)).norm());
        }
        assert!(worst <= dw * dt && worst > 0.5 * dw * dt, "{worst}");
    }

    #[test]
    fn no_lookahead() {
        let env = series(vec![Complex64::new(1.0, 0.0); 3], 1e-3);
        assert!(interpolate_envelope(&env, 2.5e-3, Reconstruction::Linear).is_err());
        assert!(interpolate_envelope(&env, -1e-3, Reconstruction::Hold).is_err());
    }
}
