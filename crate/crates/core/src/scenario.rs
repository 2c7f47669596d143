//! Co-simulation scenarios and their plain-text file format.
//!
//! ```text
//! sfcosim-scenario 1
//!
//! [simulation]
//! dt_micro = 2e-5
//! dt_macro = 0.0005
//! t_end = 0.5
//!
//! [area grid]
//! solver = emt
//! nodes = 2
//!
//! [branch grid.src]
//! kind = voltage_source
//! from = 1
//! to = 0
//! tones = 50:1000:0
//! ...
//! ```
//!
//! Sections: `[simulation]`, `[area NAME]`, `[branch AREA.NAME]`,
//! `[line AREA.NAME]`, `[link NAME]`, `[converter LINK]`,
//! `[recorder NAME]`. `#` starts a comment. Nodes are numbered `1..=nodes`
//! within each area, `0` is ground.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, ParseError, ParseErrorKind, Result};
use crate::network::{BranchKind, Network, Tone, Waveform, DEFAULT_SOURCE_RESISTANCE};
use crate::orchestrator::Reconstruction;
use crate::spectral::WindowConfig;
use crate::wave_link::{ConverterConfig, ConverterMode};

pub const FORMAT_HEADER: &str = "sfcosim-scenario 1";

/// Relative tolerance on `dt_macro / dt_micro` being an integer.
const RATIO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub dt_micro: f64,
    /// Always `ratio * dt_micro`.
    pub dt_macro: f64,
    pub ratio: usize,
    pub t_end: f64,
}

/// `Some(k)` when `dt_macro = k dt_micro` for an integer `k >= 1`.
pub fn step_ratio(dt_micro: f64, dt_macro: f64) -> Option<usize> {
    let r = dt_macro / dt_micro;
    let k = r.round();
    (k >= 1.0 && (r - k).abs() <= RATIO_TOL * k).then_some(k as usize)
}

impl Schedule {
    pub fn new(dt_micro: f64, dt_macro: f64, t_end: f64) -> Result<Self> {
        for (name, v) in [("dt_micro", dt_micro), ("dt_macro", dt_macro), ("t_end", t_end)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Schedule(format!("{name} must be positive, got {v}")));
            }
        }
        let ratio = step_ratio(dt_micro, dt_macro).ok_or_else(|| {
            Error::Schedule(format!("dt_macro {dt_macro:e} is not an integer multiple of dt_micro {dt_micro:e}"))
        })?;
        Ok(Self { dt_micro, dt_macro: ratio as f64 * dt_micro, ratio, t_end })
    }

    /// Number of exchange intervals covering `[0, t_end]`.
    pub fn macro_steps(&self) -> usize {
        (self.t_end / self.dt_macro - RATIO_TOL).ceil() as usize
    }

    pub fn macro_time(&self, k: usize) -> f64 {
        (k * self.ratio) as f64 * self.dt_micro
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AreaKind {
    Emt,
    Sfemt { omega_s: f64 },
}

impl AreaKind {
    pub fn omega_s(&self) -> f64 {
        match self {
            AreaKind::Emt => 0.0,
            AreaKind::Sfemt { omega_s } => *omega_s,
        }
    }

    pub fn is_emt(&self) -> bool {
        matches!(self, AreaKind::Emt)
    }
}

/// One subsystem with its own solver.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaSpec {
    pub name: String,
    pub kind: AreaKind,
    pub network: Network,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Endpoint {
    pub area: usize,
    pub node: usize,
}

/// Line whose two ends sit in different areas.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub name: String,
    pub ends: [Endpoint; 2],
    pub z_c: f64,
    pub tau: f64,
    /// Used when one end is EMT and the other is not.
    pub converter: ConverterConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    NodeVoltage { area: usize, node: usize },
    BranchCurrent { area: usize, branch: usize },
    /// Current into an in-area line at end 0 (`from`) or 1 (`to`).
    LineCurrent { area: usize, line: usize, end: usize },
    /// Current into a cross link at end 0 (`a`) or 1 (`b`).
    LinkCurrent { link: usize, end: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecorderSpec {
    pub name: String,
    pub probe: Probe,
}

/// State every run starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Initialization {
    /// All storage empty; sources switch on at `t = 0`.
    #[default]
    Rest,
    /// Sinusoidal steady state of the sources active at `t = 0`, including
    /// the prehistory of every line and link.
    SteadyState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub schedule: Schedule,
    pub seed: u64,
    pub init: Initialization,
    pub reconstruction: Reconstruction,
    pub areas: Vec<AreaSpec>,
    pub links: Vec<LinkSpec>,
    pub recorders: Vec<RecorderSpec>,
}

impl Scenario {
    pub fn area_index(&self, name: &str) -> Option<usize> {
        self.areas.iter().position(|a| a.name == name)
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    pub fn recorder(&self, name: &str) -> Option<&RecorderSpec> {
        self.recorders.iter().find(|r| r.name == name)
    }

    /// Area that owns a probe.
    pub fn probe_area(&self, probe: &Probe) -> usize {
        match *probe {
            Probe::NodeVoltage { area, .. } | Probe::BranchCurrent { area, .. } | Probe::LineCurrent { area, .. } => area,
            Probe::LinkCurrent { link, end } => self.links[link].ends[end].area,
        }
    }

    /// Nodes of `area` bound to cross links, with their impedances.
    pub fn ports(&self, area: usize) -> Vec<(usize, f64)> {
        self.links
            .iter()
            .flat_map(|l| l.ends.iter().map(move |e| (e, l.z_c)))
            .filter(|(e, _)| e.area == area)
            .map(|(e, z)| (e.node, z))
            .collect()
    }

    /// Same scenario on a different step pair.
    pub fn with_steps(&self, dt_micro: Option<f64>, dt_macro: Option<f64>) -> Result<Self> {
        let mut s = self.clone();
        s.schedule = Schedule::new(
            dt_micro.unwrap_or(self.schedule.dt_micro),
            dt_macro.unwrap_or(self.schedule.dt_macro),
            self.schedule.t_end,
        )?;
        s.validate()?;
        Ok(s)
    }

    /// Structural checks shared by programmatic construction and parsing.
    pub fn validate(&self) -> Result<()> {
        if self.areas.is_empty() {
            return Err(Error::Schedule("scenario has no areas".into()));
        }
        for (k, area) in self.areas.iter().enumerate() {
            let ports: Vec<usize> = self.ports(k).iter().map(|p| p.0).collect();
            area.network.validate(&ports).map_err(|e| Error::Network(format!("area {}: {e}", area.name)))?;
            if !(area.kind.omega_s() >= 0.0 && area.kind.omega_s().is_finite()) {
                return Err(Error::InvalidParameter {
                    name: format!("{}.omega_s", area.name),
                    reason: "must be nonnegative".into(),
                });
            }
        }
        for link in &self.links {
            for e in &link.ends {
                let Some(area) = self.areas.get(e.area) else {
                    return Err(Error::Network(format!("link {}: area index {} out of range", link.name, e.area)));
                };
                if e.node == 0 || e.node >= area.network.node_count {
                    return Err(Error::Network(format!(
                        "link {}: node {} does not exist in area {}",
                        link.name, e.node, area.name
                    )));
                }
            }
            if link.ends[0].area == link.ends[1].area {
                return Err(Error::Network(format!("link {} connects an area to itself; use a line", link.name)));
            }
            if !(link.z_c > 0.0 && link.tau > 0.0) {
                return Err(Error::InvalidParameter {
                    name: link.name.clone(),
                    reason: "z_c and tau must be positive".into(),
                });
            }
            if link.tau < self.schedule.dt_macro * (1.0 - RATIO_TOL) {
                return Err(Error::Schedule(format!(
                    "link {}: travel time {:e} s is shorter than the exchange interval {:e} s",
                    link.name, link.tau, self.schedule.dt_macro
                )));
            }
        }
        for r in &self.recorders {
            let ok = match r.probe {
                Probe::NodeVoltage { area, node } => self.areas.get(area).is_some_and(|a| node < a.network.node_count),
                Probe::BranchCurrent { area, branch } => {
                    self.areas.get(area).is_some_and(|a| branch < a.network.branches.len())
                }
                Probe::LineCurrent { area, line, end } => {
                    end < 2 && self.areas.get(area).is_some_and(|a| line < a.network.lines.len())
                }
                Probe::LinkCurrent { link, end } => end < 2 && link < self.links.len(),
            };
            if !ok {
                return Err(Error::MissingSignal(format!("recorder {} target", r.name)));
            }
        }
        Ok(())
    }

    /// Default converter for a link between `ends`.
    pub fn default_converter(areas: &[AreaSpec], ends: [Endpoint; 2], dt_macro: f64) -> ConverterConfig {
        let omega_s = ends.iter().map(|e| areas[e.area].kind.omega_s()).fold(0.0, f64::max);
        let f0 = if omega_s > 0.0 { omega_s / (2.0 * PI) } else { 50.0 };
        let mut cfg = ConverterConfig::new(ConverterMode::Esprit, WindowConfig::one_period(f0, dt_macro), omega_s);
        cfg.f0 = f0;
        cfg
    }
}

// ---------------------------------------------------------------------------
// Parsing

struct Entry {
    key: String,
    value: String,
    line: usize,
    used: bool,
}

struct Section {
    kind: String,
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

impl Section {
    fn label(&self) -> String {
        if self.name.is_empty() {
            format!("[{}]", self.kind)
        } else {
            format!("[{} {}]", self.kind, self.name)
        }
    }

    fn field(&self, key: &str) -> String {
        format!("{} {key}", self.label())
    }

    fn err(&self, key: &str, line: usize, kind: ParseErrorKind) -> ParseError {
        ParseError::new(line, self.field(key), kind)
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        let e = self.entries.iter_mut().find(|e| e.key == key)?;
        e.used = true;
        Some((e.value.clone(), e.line))
    }

    fn require(&mut self, key: &str) -> std::result::Result<(String, usize), ParseError> {
        let line = self.line;
        self.take(key).ok_or_else(|| self.err(key, line, ParseErrorKind::MissingKey))
    }

    fn float(&mut self, key: &str) -> std::result::Result<Option<(f64, usize)>, ParseError> {
        let Some((v, line)) = self.take(key) else { return Ok(None) };
        let x = parse_f64(&v).ok_or_else(|| self.err(key, line, ParseErrorKind::InvalidValue(v)))?;
        Ok(Some((x, line)))
    }

    fn positive(&mut self, key: &str) -> std::result::Result<Option<f64>, ParseError> {
        match self.float(key)? {
            Some((x, line)) if x <= 0.0 => Err(self.err(key, line, ParseErrorKind::NonPositive(x))),
            Some((x, _)) => Ok(Some(x)),
            None => Ok(None),
        }
    }

    fn required_positive(&mut self, key: &str) -> std::result::Result<f64, ParseError> {
        let line = self.line;
        self.positive(key)?.ok_or_else(|| self.err(key, line, ParseErrorKind::MissingKey))
    }

    fn nonnegative(&mut self, key: &str) -> std::result::Result<Option<f64>, ParseError> {
        match self.float(key)? {
            Some((x, line)) if x < 0.0 => Err(self.err(key, line, ParseErrorKind::InvalidValue(format!("{x}")))),
            Some((x, _)) => Ok(Some(x)),
            None => Ok(None),
        }
    }

    fn integer(&mut self, key: &str) -> std::result::Result<Option<(u64, usize)>, ParseError> {
        let Some((v, line)) = self.take(key) else { return Ok(None) };
        let x = v.parse::<u64>().map_err(|_| self.err(key, line, ParseErrorKind::InvalidValue(v)))?;
        Ok(Some((x, line)))
    }

    fn finish(&self) -> std::result::Result<(), ParseError> {
        match self.entries.iter().find(|e| !e.used) {
            Some(e) => Err(self.err(&e.key, e.line, ParseErrorKind::UnknownKey)),
            None => Ok(()),
        }
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

fn valid_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn split_sections(text: &str) -> std::result::Result<Vec<Section>, ParseError> {
    let mut sections: Vec<Section> = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if !saw_header {
            if line.split_whitespace().collect::<Vec<_>>() != FORMAT_HEADER.split(' ').collect::<Vec<_>>() {
                return Err(ParseError::new(line_no, "header", ParseErrorKind::BadHeader));
            }
            saw_header = true;
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let inner = inner
                .strip_suffix(']')
                .ok_or_else(|| ParseError::new(line_no, line, ParseErrorKind::Malformed))?;
            let mut parts = inner.split_whitespace();
            let kind = parts.next().unwrap_or("").to_string();
            let name = parts.next().unwrap_or("").to_string();
            if parts.next().is_some() {
                return Err(ParseError::new(line_no, line, ParseErrorKind::Malformed));
            }
            let needs_name = kind != "simulation";
            if !matches!(kind.as_str(), "simulation" | "area" | "branch" | "line" | "link" | "converter" | "recorder") {
                return Err(ParseError::new(line_no, format!("[{kind}]"), ParseErrorKind::UnknownSection));
            }
            if needs_name == name.is_empty() {
                return Err(ParseError::new(line_no, line, ParseErrorKind::Malformed));
            }
            if sections.iter().any(|s| s.kind == kind && s.name == name) {
                return Err(ParseError::new(line_no, line, ParseErrorKind::Duplicate));
            }
            sections.push(Section { kind, name, line: line_no, entries: Vec::new() });
            continue;
        }
        let Some(section) = sections.last_mut() else {
            return Err(ParseError::new(line_no, line, ParseErrorKind::Malformed));
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ParseError::new(line_no, section.field(line), ParseErrorKind::Malformed))?;
        let key = key.trim().to_string();
        if section.entries.iter().any(|e| e.key == key) {
            return Err(ParseError::new(line_no, section.field(&key), ParseErrorKind::Duplicate));
        }
        section.entries.push(Entry { key, value: value.trim().to_string(), line: line_no, used: false });
    }
    if !saw_header {
        return Err(ParseError::new(1, "header", ParseErrorKind::BadHeader));
    }
    Ok(sections)
}

fn parse_tones(section: &Section, value: &str, line: usize) -> std::result::Result<Vec<Tone>, ParseError> {
    let bad = || section.err("tones", line, ParseErrorKind::InvalidValue(value.to_string()));
    value
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let parts: Vec<&str> = t.split(':').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(bad());
            }
            let nums: Vec<f64> = parts.iter().map(|p| parse_f64(p)).collect::<Option<_>>().ok_or_else(bad)?;
            if nums[0] < 0.0 || nums[1] < 0.0 {
                return Err(bad());
            }
            Ok(Tone { freq: nums[0], amplitude: nums[1], phase: nums[2] })
        })
        .collect()
}

/// Splits `A.NAME` or `A:X`.
fn split_ref<'a>(s: &'a str, sep: char) -> Option<(&'a str, &'a str)> {
    let (a, b) = s.split_once(sep)?;
    (valid_ident(a) && !b.is_empty()).then_some((a, b))
}

fn parse_end(value: &str) -> Option<usize> {
    match value {
        "a" | "from" => Some(0),
        "b" | "to" => Some(1),
        _ => None,
    }
}

/// Parses and validates a scenario.
pub fn parse(text: &str) -> Result<Scenario> {
    Ok(parse_inner(text)?)
}

fn parse_inner(text: &str) -> std::result::Result<Scenario, Error> {
    let mut sections = split_sections(text)?;
    let by_kind = |kind: &str, sections: &[Section]| -> Vec<usize> {
        sections.iter().enumerate().filter(|(_, s)| s.kind == kind).map(|(i, _)| i).collect()
    };

    // [simulation]
    let sim_idx = by_kind("simulation", &sections);
    let Some(&sim_idx) = sim_idx.first() else {
        return Err(ParseError::new(0, "[simulation]", ParseErrorKind::MissingKey).into());
    };
    let sim = &mut sections[sim_idx];
    let dt_micro = sim.required_positive("dt_micro")?;
    let dt_macro_line = sim.entries.iter().find(|e| e.key == "dt_macro").map_or(sim.line, |e| e.line);
    let dt_macro = sim.required_positive("dt_macro")?;
    let t_end = sim.required_positive("t_end")?;
    let seed = sim.integer("seed")?.map_or(0, |x| x.0);
    let reconstruction = match sim.take("envelope_interp") {
        None => Reconstruction::default(),
        Some((v, line)) => match v.as_str() {
            "linear" => Reconstruction::Linear,
            "hold" => Reconstruction::Hold,
            _ => return Err(sim.err("envelope_interp", line, ParseErrorKind::InvalidValue(v)).into()),
        },
    };
    let init = match sim.take("init") {
        None => Initialization::default(),
        Some((v, line)) => match v.as_str() {
            "rest" => Initialization::Rest,
            "steady_state" => Initialization::SteadyState,
            _ => return Err(sim.err("init", line, ParseErrorKind::InvalidValue(v)).into()),
        },
    };
    sim.finish()?;
    if step_ratio(dt_micro, dt_macro).is_none() {
        return Err(ParseError::new(
            dt_macro_line,
            "[simulation] dt_macro",
            ParseErrorKind::NonIntegerRatio { micro_dt: dt_micro, macro_dt: dt_macro },
        )
        .into());
    }
    let schedule = Schedule::new(dt_micro, dt_macro, t_end)?;

    // [area NAME]
    let mut areas: Vec<AreaSpec> = Vec::new();
    for i in by_kind("area", &sections) {
        let s = &mut sections[i];
        if !valid_ident(&s.name) {
            return Err(ParseError::new(s.line, s.label(), ParseErrorKind::InvalidValue(s.name.clone())).into());
        }
        let (solver, line) = s.require("solver")?;
        let nodes = match s.integer("nodes")? {
            Some((0, line)) => return Err(s.err("nodes", line, ParseErrorKind::NonPositive(0.0)).into()),
            Some((n, _)) => n as usize,
            None => return Err(s.err("nodes", s.line, ParseErrorKind::MissingKey).into()),
        };
        let kind = match solver.as_str() {
            "emt" => AreaKind::Emt,
            "sfemt" => AreaKind::Sfemt { omega_s: s.nonnegative("omega_s")?.unwrap_or(2.0 * PI * 50.0) },
            _ => return Err(s.err("solver", line, ParseErrorKind::InvalidValue(solver)).into()),
        };
        s.finish()?;
        areas.push(AreaSpec { name: s.name.clone(), kind, network: Network::new(nodes + 1) });
    }
    let area_of = |s: &Section, areas: &[AreaSpec]| -> std::result::Result<(usize, String), ParseError> {
        let (a, name) = split_ref(&s.name, '.')
            .filter(|(_, n)| valid_ident(n))
            .ok_or_else(|| ParseError::new(s.line, s.label(), ParseErrorKind::Malformed))?;
        let idx = areas
            .iter()
            .position(|x| x.name == a)
            .ok_or_else(|| ParseError::new(s.line, s.label(), ParseErrorKind::DanglingReference(a.to_string())))?;
        Ok((idx, name.to_string()))
    };
    let node_key = |s: &mut Section, key: &str, node_count: usize| -> std::result::Result<usize, ParseError> {
        let line = s.line;
        let (n, line) = s.integer(key)?.ok_or_else(|| s.err(key, line, ParseErrorKind::MissingKey))?;
        if n as usize >= node_count {
            return Err(s.err(key, line, ParseErrorKind::DanglingNode { node: n as usize, node_count: node_count - 1 }));
        }
        Ok(n as usize)
    };

    // [branch AREA.NAME]
    for i in by_kind("branch", &sections) {
        let s = &mut sections[i];
        let (a, name) = area_of(s, &areas)?;
        let nc = areas[a].network.node_count;
        let (kind_str, kind_line) = s.require("kind")?;
        let from = node_key(s, "from", nc)?;
        let to = node_key(s, "to", nc)?;
        if from == to {
            return Err(s.err("to", s.line, ParseErrorKind::InvalidValue(format!("{to} (same as from)"))).into());
        }
        let waveform = |s: &mut Section| -> std::result::Result<Waveform, ParseError> {
            let tones = match s.take("tones") {
                Some((v, line)) => parse_tones(s, &v, line)?,
                None => Vec::new(),
            };
            let dc = s.float("dc")?.map_or(0.0, |x| x.0);
            let t_on = s.nonnegative("t_on")?.unwrap_or(0.0);
            Ok(Waveform { tones, dc, t_on })
        };
        let kind = match kind_str.as_str() {
            "resistor" => BranchKind::Resistor(s.required_positive("value")?),
            "inductor" => BranchKind::Inductor(s.required_positive("value")?),
            "capacitor" => BranchKind::Capacitor(s.required_positive("value")?),
            "voltage_source" => {
                let waveform = waveform(s)?;
                let r_internal = s.positive("r_internal")?.unwrap_or(DEFAULT_SOURCE_RESISTANCE);
                BranchKind::VoltageSource { waveform, r_internal }
            }
            "current_source" => BranchKind::CurrentSource(waveform(s)?),
            _ => return Err(s.err("kind", kind_line, ParseErrorKind::InvalidValue(kind_str)).into()),
        };
        s.finish()?;
        let net = &mut areas[a].network;
        if net.branch_index(&name).is_some() {
            return Err(ParseError::new(s.line, s.label(), ParseErrorKind::Duplicate).into());
        }
        net.branches.push(crate::network::Branch { name, kind, from, to });
    }

    // [line AREA.NAME]
    for i in by_kind("line", &sections) {
        let s = &mut sections[i];
        let (a, name) = area_of(s, &areas)?;
        let nc = areas[a].network.node_count;
        let from = node_key(s, "from", nc)?;
        let to = node_key(s, "to", nc)?;
        let z_c = s.required_positive("z_c")?;
        let tau = s.required_positive("tau")?;
        s.finish()?;
        if tau < schedule.dt_micro {
            return Err(s.err("tau", s.line, ParseErrorKind::TauTooShort { tau, dt_macro: schedule.dt_micro }).into());
        }
        areas[a].network.line(&name, from, to, z_c, tau);
    }

    // [link NAME]
    let mut links: Vec<LinkSpec> = Vec::new();
    for i in by_kind("link", &sections) {
        let s = &mut sections[i];
        if !valid_ident(&s.name) {
            return Err(ParseError::new(s.line, s.label(), ParseErrorKind::InvalidValue(s.name.clone())).into());
        }
        let mut ends = [Endpoint { area: 0, node: 0 }; 2];
        for (k, key) in ["a", "b"].iter().enumerate() {
            let (v, line) = s.require(key)?;
            let (area_name, node) =
                split_ref(&v, ':').ok_or_else(|| s.err(key, line, ParseErrorKind::InvalidValue(v.clone())))?;
            let area = areas
                .iter()
                .position(|x| x.name == area_name)
                .ok_or_else(|| s.err(key, line, ParseErrorKind::DanglingReference(area_name.to_string())))?;
            let node: usize = node.parse().map_err(|_| s.err(key, line, ParseErrorKind::InvalidValue(v.clone())))?;
            let nc = areas[area].network.node_count;
            if node == 0 || node >= nc {
                return Err(s.err(key, line, ParseErrorKind::DanglingNode { node, node_count: nc - 1 }).into());
            }
            ends[k] = Endpoint { area, node };
        }
        if ends[0].area == ends[1].area {
            return Err(s.err("b", s.line, ParseErrorKind::InvalidValue("both ends in the same area".into())).into());
        }
        let z_c = s.required_positive("z_c")?;
        let tau_line = s.entries.iter().find(|e| e.key == "tau").map_or(s.line, |e| e.line);
        let tau = s.required_positive("tau")?;
        s.finish()?;
        if tau < schedule.dt_macro * (1.0 - RATIO_TOL) {
            return Err(s.err("tau", tau_line, ParseErrorKind::TauTooShort { tau, dt_macro: schedule.dt_macro }).into());
        }
        let mut converter = Scenario::default_converter(&areas, ends, schedule.dt_macro);
        converter.seed = seed.wrapping_add(links.len() as u64);
        links.push(LinkSpec { name: s.name.clone(), ends, z_c, tau, converter });
    }

    // [converter LINK]
    for i in by_kind("converter", &sections) {
        let s = &mut sections[i];
        let li = links
            .iter()
            .position(|l| l.name == s.name)
            .ok_or_else(|| ParseError::new(s.line, s.label(), ParseErrorKind::DanglingReference(s.name.clone())))?;
        let cfg = &mut links[li].converter;
        if let Some((v, line)) = s.take("mode") {
            cfg.mode = match v.as_str() {
                "esprit" => ConverterMode::Esprit,
                "delay" => ConverterMode::Delay,
                "passthrough" => ConverterMode::Passthrough(None),
                _ => return Err(s.err("mode", line, ParseErrorKind::InvalidValue(v)).into()),
            };
        }
        if let Some(dt) = s.positive("window_dt")? {
            cfg.window.dt = dt;
        }
        if let Some(f0) = s.positive("f0")? {
            cfg.f0 = f0;
        }
        cfg.window = match s.integer("window")? {
            Some((n, line)) if n < 3 || n % 2 == 0 => {
                return Err(s.err("window", line, ParseErrorKind::InvalidValue(format!("{n} (odd, >= 3)"))).into())
            }
            Some((n, _)) => WindowConfig { len: n as usize, dt: cfg.window.dt },
            None => WindowConfig::one_period(cfg.f0, cfg.window.dt),
        };
        if let Some((x, line)) = s.float("threshold")? {
            if !(x > 0.0 && x < 1.0) {
                return Err(s.err("threshold", line, ParseErrorKind::InvalidValue(format!("{x}"))).into());
            }
            cfg.spectral.rel_threshold = x;
        }
        if let Some((n, line)) = s.integer("max_order")? {
            if n == 0 {
                return Err(s.err("max_order", line, ParseErrorKind::NonPositive(0.0)).into());
            }
            cfg.spectral.max_sinusoids = n as usize;
        }
        if let Some(f) = s.nonnegative("f_min")? {
            cfg.spectral.f_min = f;
        }
        if let Some(x) = s.nonnegative("noise_std")? {
            cfg.noise_std = x;
        }
        if let Some((x, _)) = s.integer("seed")? {
            cfg.seed = x;
        }
        s.finish()?;
    }

    // [recorder NAME]
    let mut recorders = Vec::new();
    for i in by_kind("recorder", &sections) {
        let s = &mut sections[i];
        if !valid_ident(&s.name) {
            return Err(ParseError::new(s.line, s.label(), ParseErrorKind::InvalidValue(s.name.clone())).into());
        }
        let (kind, kind_line) = s.require("probe")?;
        let (target, line) = s.require("target")?;
        let dangling = |s: &Section| s.err("target", line, ParseErrorKind::DanglingReference(target.clone()));
        let find_area = |name: &str| areas.iter().position(|a| a.name == name);
        let probe = match kind.as_str() {
            "node_voltage" => {
                let (a, n) = split_ref(&target, ':').ok_or_else(|| dangling(s))?;
                let area = find_area(a).ok_or_else(|| dangling(s))?;
                let node: usize = n.parse().map_err(|_| dangling(s))?;
                let nc = areas[area].network.node_count;
                if node >= nc {
                    return Err(s.err("target", line, ParseErrorKind::DanglingNode { node, node_count: nc - 1 }).into());
                }
                Probe::NodeVoltage { area, node }
            }
            "branch_current" => {
                let (a, b) = split_ref(&target, '.').ok_or_else(|| dangling(s))?;
                let area = find_area(a).ok_or_else(|| dangling(s))?;
                let branch = areas[area].network.branch_index(b).ok_or_else(|| dangling(s))?;
                Probe::BranchCurrent { area, branch }
            }
            "line_current" => {
                let (path, end) = target.rsplit_once(':').ok_or_else(|| dangling(s))?;
                let (a, l) = split_ref(path, '.').ok_or_else(|| dangling(s))?;
                let area = find_area(a).ok_or_else(|| dangling(s))?;
                let line_idx = areas[area].network.line_index(l).ok_or_else(|| dangling(s))?;
                let end = parse_end(end).ok_or_else(|| dangling(s))?;
                Probe::LineCurrent { area, line: line_idx, end }
            }
            "link_current" => {
                let (l, end) = target.rsplit_once(':').ok_or_else(|| dangling(s))?;
                let link = links.iter().position(|x| x.name == l).ok_or_else(|| dangling(s))?;
                let end = parse_end(end).ok_or_else(|| dangling(s))?;
                Probe::LinkCurrent { link, end }
            }
            _ => return Err(s.err("probe", kind_line, ParseErrorKind::InvalidValue(kind)).into()),
        };
        s.finish()?;
        recorders.push(RecorderSpec { name: s.name.clone(), probe });
    }

    let scenario = Scenario { schedule, seed, init, reconstruction, areas, links, recorders };
    for (k, area) in scenario.areas.iter().enumerate() {
        let ports: Vec<usize> = scenario.ports(k).iter().map(|p| p.0).collect();
        if let Err(e) = area.network.validate(&ports) {
            let line = sections.iter().find(|s| s.kind == "area" && s.name == area.name).map_or(0, |s| s.line);
            return Err(ParseError::new(line, format!("[area {}]", area.name), ParseErrorKind::InvalidValue(e.to_string()))
                .into());
        }
    }
    scenario.validate()?;
    Ok(scenario)
}

// ---------------------------------------------------------------------------
// Serialization

fn fmt_tones(tones: &[Tone]) -> String {
    tones.iter().map(|t| format!("{:?}:{:?}:{:?}", t.freq, t.amplitude, t.phase)).collect::<Vec<_>>().join(", ")
}

/// Canonical text form; `parse(&serialize(s))` reproduces `s`.
pub fn serialize(s: &Scenario) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "{FORMAT_HEADER}\n");
    let _ = writeln!(w, "[simulation]");
    let _ = writeln!(w, "dt_micro = {:?}", s.schedule.dt_micro);
    let _ = writeln!(w, "dt_macro = {:?}", s.schedule.dt_macro);
    let _ = writeln!(w, "t_end = {:?}", s.schedule.t_end);
    let _ = writeln!(w, "seed = {}", s.seed);
    let interp = match s.reconstruction {
        Reconstruction::Linear => "linear",
        Reconstruction::Hold => "hold",
    };
    let _ = writeln!(w, "envelope_interp = {interp}");
    if s.init == Initialization::SteadyState {
        let _ = writeln!(w, "init = steady_state");
    }

    for area in &s.areas {
        let _ = writeln!(w, "\n[area {}]", area.name);
        match area.kind {
            AreaKind::Emt => {
                let _ = writeln!(w, "solver = emt");
                let _ = writeln!(w, "nodes = {}", area.network.node_count - 1);
            }
            AreaKind::Sfemt { omega_s } => {
                let _ = writeln!(w, "solver = sfemt");
                let _ = writeln!(w, "nodes = {}", area.network.node_count - 1);
                let _ = writeln!(w, "omega_s = {omega_s:?}");
            }
        }
        for b in &area.network.branches {
            let _ = writeln!(w, "\n[branch {}.{}]", area.name, b.name);
            let (kind, value) = match &b.kind {
                BranchKind::Resistor(v) => ("resistor", Some(*v)),
                BranchKind::Inductor(v) => ("inductor", Some(*v)),
                BranchKind::Capacitor(v) => ("capacitor", Some(*v)),
                BranchKind::VoltageSource { .. } => ("voltage_source", None),
                BranchKind::CurrentSource(_) => ("current_source", None),
            };
            let _ = writeln!(w, "kind = {kind}\nfrom = {}\nto = {}", b.from, b.to);
            if let Some(v) = value {
                let _ = writeln!(w, "value = {v:?}");
            }
            let wave = match &b.kind {
                BranchKind::VoltageSource { waveform, .. } | BranchKind::CurrentSource(waveform) => Some(waveform),
                _ => None,
            };
            if let Some(wf) = wave {
                let _ = writeln!(w, "tones = {}", fmt_tones(&wf.tones));
                let _ = writeln!(w, "dc = {:?}\nt_on = {:?}", wf.dc, wf.t_on);
            }
            if let BranchKind::VoltageSource { r_internal, .. } = &b.kind {
                let _ = writeln!(w, "r_internal = {r_internal:?}");
            }
        }
        for l in &area.network.lines {
            let _ = writeln!(w, "\n[line {}.{}]", area.name, l.name);
            let _ = writeln!(w, "from = {}\nto = {}\nz_c = {:?}\ntau = {:?}", l.from, l.to, l.z_c, l.tau);
        }
    }
    for l in &s.links {
        let end = |e: &Endpoint| format!("{}:{}", s.areas[e.area].name, e.node);
        let _ = writeln!(w, "\n[link {}]", l.name);
        let _ = writeln!(w, "a = {}\nb = {}\nz_c = {:?}\ntau = {:?}", end(&l.ends[0]), end(&l.ends[1]), l.z_c, l.tau);
        let c = &l.converter;
        let _ = writeln!(w, "\n[converter {}]", l.name);
        let _ = writeln!(w, "mode = {}", c.mode.name());
        let _ = writeln!(w, "window = {}\nwindow_dt = {:?}", c.window.len, c.window.dt);
        let _ = writeln!(w, "threshold = {:?}\nmax_order = {}", c.spectral.rel_threshold, c.spectral.max_sinusoids);
        let _ = writeln!(w, "f_min = {:?}\nf0 = {:?}", c.spectral.f_min, c.f0);
        let _ = writeln!(w, "noise_std = {:?}\nseed = {}", c.noise_std, c.seed);
    }
    for r in &s.recorders {
        let _ = writeln!(w, "\n[recorder {}]", r.name);
        let end_name = |e: usize| if e == 0 { "a" } else { "b" };
        let (probe, target) = match r.probe {
            Probe::NodeVoltage { area, node } => ("node_voltage", format!("{}:{node}", s.areas[area].name)),
            Probe::BranchCurrent { area, branch } => {
                ("branch_current", format!("{}.{}", s.areas[area].name, s.areas[area].network.branches[branch].name))
            }
            Probe::LineCurrent { area, line, end } => (
                "line_current",
                format!("{}.{}:{}", s.areas[area].name, s.areas[area].network.lines[line].name, end_name(end)),
            ),
            Probe::LinkCurrent { link, end } => ("link_current", format!("{}:{}", s.links[link].name, end_name(end))),
        };
        let _ = writeln!(w, "probe = {probe}\ntarget = {target}");
    }
    out
}

/// Stable FNV-1a digest of the canonical form, for run metadata.
pub fn digest(s: &Scenario) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in serialize(s).bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

pub fn parse_file(path: &std::path::Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "sfcosim-scenario 1
[simulation]
dt_micro = 1e-5
dt_macro = 1e-5
t_end = 1e-3

[area a]
solver = emt
nodes = 1

[branch a.src]
kind = voltage_source
from = 1
to = 0
tones = 50:1:0

[branch a.r]
kind = resistor
from = 1
to = 0
value = 10
";

    fn kind_of(text: &str) -> ParseError {
        match parse(text) {
            Err(Error::Parse(e)) => e,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_round_trip() {
        let s = parse(MINIMAL).unwrap();
        assert_eq!(s.areas.len(), 1);
        assert_eq!(s.areas[0].network.branches.len(), 2);
        let text = serialize(&s);
        let again = parse(&text).unwrap();
        assert_eq!(again, s);
        assert_eq!(serialize(&again), text);
    }

    #[test]
    fn negative_resistance_names_branch() {
        let e = kind_of(&MINIMAL.replace("value = 10", "value = -1"));
        assert!(matches!(e.kind, ParseErrorKind::NonPositive(x) if x == -1.0));
        assert!(e.field.contains("a.r"), "{e}");
        assert_eq!(e.line, 21);
    }

    #[test]
    fn distinct_diagnostics() {
        assert!(matches!(kind_of("nope").kind, ParseErrorKind::BadHeader));
        assert!(matches!(kind_of(&format!("{MINIMAL}\n[bogus x]\n")).kind, ParseErrorKind::UnknownSection));
        assert!(matches!(kind_of(&MINIMAL.replace("value = 10", "value = 10\ncolour = red")).kind, ParseErrorKind::UnknownKey));
        assert!(matches!(kind_of(&MINIMAL.replace("to = 0\nvalue", "to = 7\nvalue")).kind, ParseErrorKind::DanglingNode { node: 7, .. }));
        assert!(matches!(
            kind_of(&MINIMAL.replace("dt_macro = 1e-5", "dt_macro = 2.5e-5")).kind,
            ParseErrorKind::NonIntegerRatio { .. }
        ));
        assert!(matches!(kind_of(&MINIMAL.replace("t_end = 1e-3\n", "")).kind, ParseErrorKind::MissingKey));
        assert!(matches!(kind_of(&MINIMAL.replace("value = 10", "value = ten")).kind, ParseErrorKind::InvalidValue(_)));
        assert!(matches!(kind_of(&format!("{MINIMAL}\n[branch a.r]\nkind = resistor\n")).kind, ParseErrorKind::Duplicate));
        assert!(matches!(
            kind_of(&format!("{MINIMAL}\n[recorder v]\nprobe = node_voltage\ntarget = zz:1\n")).kind,
            ParseErrorKind::DanglingReference(_)
        ));
    }

    #[test]
    fn link_travel_time_checked() {
        let text = format!(
            "{}\n[area b]\nsolver = sfemt\nnodes = 1\n\n[branch b.r]\nkind = resistor\nfrom = 1\nto = 0\nvalue = 5\n\n[link t]\na = a:1\nb = b:1\nz_c = 100\ntau = 5e-6\n",
            MINIMAL
        );
        assert!(matches!(kind_of(&text).kind, ParseErrorKind::TauTooShort { .. }));
        let ok = parse(&text.replace("tau = 5e-6", "tau = 1e-4")).unwrap();
        assert_eq!(ok.links.len(), 1);
        assert_eq!(ok.links[0].converter.omega_s, 2.0 * PI * 50.0);
    }

    #[test]
    fn schedule_ratio() {
        assert_eq!(step_ratio(20e-6, 500e-6), Some(25));
        assert_eq!(step_ratio(20e-6, 510e-6), None);
        let s = Schedule::new(20e-6, 500e-6, 0.5).unwrap();
        assert_eq!(s.macro_steps(), 1000);
        assert_eq!(s.macro_time(3), 75.0 * 20e-6);
    }
}
