//! Lossless Bergeron line between two solvers, and the converters that turn
//! the real boundary waveform of an EMT solver into complex envelopes.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::ComplexField;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::spectral::{analyze, synthesize_imaginary, SampleWindow, SpectralConfig, SpectralEstimate, WindowConfig};

/// Grid positions closer than this (in samples) to an integer are read
/// without interpolation.
const GRID_SNAP: f64 = 1e-9;

/// Uniformly sampled history, sample `k` at `t = k * dt`. Values before
/// `t = 0` read as zero unless a prehistory was set; only the newest
/// `capacity` samples are retained.
#[derive(Debug, Clone)]
pub struct SampleBuffer<T> {
    dt: f64,
    first: u64,
    values: VecDeque<T>,
    capacity: usize,
    /// `past[j]` is sample `-(j + 1)`.
    past: Vec<T>,
}

impl<T: ComplexField<RealField = f64> + Copy> SampleBuffer<T> {
    /// Buffer retaining at least `span` seconds, starting with `initial` at
    /// `t = 0`.
    pub fn new(dt: f64, span: f64, initial: T) -> Self {
        let capacity = (span / dt).ceil() as usize + 4;
        let mut values = VecDeque::with_capacity(capacity + 1);
        values.push_back(initial);
        Self { dt, first: 0, values, capacity, past: Vec::new() }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Index of the newest sample.
    pub fn newest_index(&self) -> u64 {
        self.first + self.values.len() as u64 - 1
    }

    pub fn newest_time(&self) -> f64 {
        self.newest_index() as f64 * self.dt
    }

    /// Replaces the `t = 0` sample; only valid before the first push.
    pub fn set_initial(&mut self, value: T) {
        debug_assert!(self.first == 0 && self.values.len() == 1, "buffer already advanced");
        self.values[0] = value;
    }

    /// Sets the `t = 0` sample and `capacity` samples before it from `f(t)`.
    /// Only valid before the first push.
    pub fn set_history(&mut self, f: impl Fn(f64) -> T) {
        self.set_initial(f(0.0));
        self.past = (1..=self.capacity).map(|j| f(-(j as f64) * self.dt)).collect();
    }

    pub fn push(&mut self, value: T) {
        self.values.push_back(value);
        if self.values.len() > self.capacity {
            self.values.pop_front();
            self.first += 1;
        }
    }

    pub fn at_index(&self, k: i64) -> Result<T> {
        if k < 0 {
            return Ok(self.past.get((-k - 1) as usize).copied().unwrap_or_else(T::zero));
        }
        let k = k as u64;
        if k > self.newest_index() {
            return Err(Error::Lookahead { requested: k as f64 * self.dt, newest: self.newest_time() });
        }
        if k < self.first {
            return Err(Error::InsufficientHistory {
                needed: k as f64 * self.dt,
                oldest: self.first as f64 * self.dt,
            });
        }
        Ok(self.values[(k - self.first) as usize])
    }

    /// Linear interpolation between the two bracketing samples.
    pub fn value_at(&self, t: f64) -> Result<T> {
        let pos = t / self.dt;
        let nearest = pos.round();
        if (pos - nearest).abs() < GRID_SNAP {
            return self.at_index(nearest as i64);
        }
        let lo = pos.floor();
        let frac = pos - lo;
        let a = self.at_index(lo as i64)?;
        let b = self.at_index(lo as i64 + 1)?;
        Ok(a + (b - a) * T::from_real(frac))
    }

    /// Newest sample at or before `t` (zero-order hold).
    pub fn held_at(&self, t: f64) -> Result<T> {
        let pos = t / self.dt;
        let k = (pos + GRID_SNAP).floor() as i64;
        self.at_index(k)
    }
}

/// Per-end voltage/current history of a line.
#[derive(Debug, Clone)]
pub struct EndRecord<T> {
    pub voltage: SampleBuffer<T>,
    pub current: SampleBuffer<T>,
}

/// Lossless distributed line: `z_c`, travel time `tau`, one history record
/// per end (each at its own step size). Current is positive into the line.
#[derive(Debug, Clone)]
pub struct TravelingWaveLink<T> {
    pub z_c: f64,
    pub tau: f64,
    ends: [EndRecord<T>; 2],
}

impl<T: ComplexField<RealField = f64> + Copy> TravelingWaveLink<T> {
    /// `extra_span` is retained on top of `tau` plus two steps.
    pub fn new(z_c: f64, tau: f64, end_dt: [f64; 2], extra_span: f64) -> Self {
        let rec = |dt: f64| {
            let span = tau + 2.0 * dt + extra_span;
            EndRecord { voltage: SampleBuffer::new(dt, span, T::zero()), current: SampleBuffer::new(dt, span, T::zero()) }
        };
        Self { z_c, tau, ends: [rec(end_dt[0]), rec(end_dt[1])] }
    }

    pub fn end(&self, end: usize) -> &EndRecord<T> {
        &self.ends[end]
    }

    /// Appends the newest (voltage, current) sample at `end`.
    /// Sets the voltage and current of `end` for `t <= 0` from `f(t)`.
    pub fn set_history(&mut self, end: usize, f: impl Fn(f64) -> (T, T)) {
        self.ends[end].voltage.set_history(|t| f(t).0);
        self.ends[end].current.set_history(|t| f(t).1);
    }

    /// Sets the `t = 0` voltage and current of `end`.
    pub fn set_initial(&mut self, end: usize, voltage: T, current: T) {
        self.ends[end].voltage.set_initial(voltage);
        self.ends[end].current.set_initial(current);
    }

    pub fn record(&mut self, end: usize, voltage: T, current: T) {
        self.ends[end].voltage.push(voltage);
        self.ends[end].current.push(current);
    }

    /// Wave `v + z_c i` leaving the far side of `end`, delayed to arrive at `t`.
    pub fn incoming_wave(&self, end: usize, t: f64) -> Result<T> {
        let far = &self.ends[1 - end];
        let ts = t - self.tau;
        let v = far.voltage.value_at(ts)?;
        let i = far.current.value_at(ts)?;
        Ok(v + i * T::from_real(self.z_c))
    }

    /// Norton history seen at `end` for a solve at `t`:
    /// `i_h = -(v_far(t - tau) / z_c + i_far(t - tau))`, times `rotation`
    /// (`exp(-j omega_s tau)` on envelope ends, 1 on real ones).
    pub fn history_current(&self, end: usize, t: f64, rotation: T) -> Result<T> {
        Ok(-self.incoming_wave(end, t)? * T::from_real(1.0 / self.z_c) * rotation)
    }
}

/// How the quadrature part of the EMT boundary signal is produced.
#[derive(Clone, Default)]
pub enum ConverterMode {
    /// Subspace fit of the recent window; quadrature from the fitted model.
    #[default]
    Esprit,
    /// Quadrature taken as the signal delayed by a quarter fundamental period.
    Delay,
    /// The analytic signal is supplied by an oracle (test harness only).
    Passthrough(Option<AnalyticOracle>),
}

pub type AnalyticOracle = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

impl fmt::Debug for ConverterMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConverterMode::Esprit => write!(f, "Esprit"),
            ConverterMode::Delay => write!(f, "Delay"),
            ConverterMode::Passthrough(o) => write!(f, "Passthrough(oracle: {})", o.is_some()),
        }
    }
}

impl PartialEq for ConverterMode {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ConverterMode::Esprit, ConverterMode::Esprit) | (ConverterMode::Delay, ConverterMode::Delay) => true,
            (ConverterMode::Passthrough(None), ConverterMode::Passthrough(None)) => true,
            (ConverterMode::Passthrough(Some(a)), ConverterMode::Passthrough(Some(b))) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl ConverterMode {
    pub fn name(&self) -> &'static str {
        match self {
            ConverterMode::Esprit => "esprit",
            ConverterMode::Delay => "delay",
            ConverterMode::Passthrough(_) => "passthrough",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConverterConfig {
    pub mode: ConverterMode,
    pub window: WindowConfig,
    pub spectral: SpectralConfig,
    pub omega_s: f64,
    /// Fundamental frequency (Hz) used by the delay mode.
    pub f0: f64,
    /// Standard deviation of white noise added to incoming samples.
    pub noise_std: f64,
    pub seed: u64,
}

impl ConverterConfig {
    pub fn new(mode: ConverterMode, window: WindowConfig, omega_s: f64) -> Self {
        Self {
            mode,
            window,
            // Boundary waves carry solver noise; a tight threshold turns it
            // into spurious poles.
            spectral: SpectralConfig::noisy(),
            omega_s,
            f0: omega_s / (2.0 * PI),
            noise_std: 0.0,
            seed: 0,
        }
    }

    pub fn quarter_period(&self) -> f64 {
        0.25 / self.f0
    }

    /// History the converter must keep to answer queries down to
    /// `lag` seconds before the newest sample.
    pub fn required_span(&self, lag: f64) -> f64 {
        let quarter = if matches!(self.mode, ConverterMode::Delay) { self.quarter_period() } else { 0.0 };
        let window = (self.window.len.saturating_sub(1)) as f64 * self.window.dt;
        lag + window.max(quarter)
    }
}

/// Real-to-envelope converter fed with the EMT-side boundary samples.
#[derive(Debug, Clone)]
pub struct BoundaryConverter {
    config: ConverterConfig,
    buffer: SampleBuffer<f64>,
    estimate: Option<SpectralEstimate>,
    noise: Option<(Normal<f64>, ChaCha8Rng)>,
}

impl BoundaryConverter {
    /// `input_dt` is the step of the samples pushed in; `lag` is how far
    /// behind the newest sample queries may reach.
    pub fn new(config: ConverterConfig, input_dt: f64, lag: f64) -> Result<Self> {
        if !(config.omega_s >= 0.0) {
            return Err(Error::InvalidParameter { name: "omega_s".into(), reason: format!("{}", config.omega_s) });
        }
        match &config.mode {
            ConverterMode::Esprit => {
                if config.window.len < 3 || config.window.len % 2 == 0 || !(config.window.dt > 0.0) {
                    return Err(Error::InvalidWindow(format!(
                        "converter window must have odd length >= 3 and positive dt, got {} x {:e}",
                        config.window.len, config.window.dt
                    )));
                }
            }
            ConverterMode::Delay => {
                if !(config.f0 > 0.0) {
                    return Err(Error::InvalidParameter {
                        name: "f0".into(),
                        reason: "delay mode needs a positive fundamental".into(),
                    });
                }
            }
            ConverterMode::Passthrough(None) => {
                return Err(Error::InvalidParameter {
                    name: "mode".into(),
                    reason: "passthrough needs an analytic oracle".into(),
                })
            }
            ConverterMode::Passthrough(Some(_)) => {}
        }
        let noise = if config.noise_std > 0.0 {
            let normal = Normal::new(0.0, config.noise_std).map_err(|e| Error::InvalidParameter {
                name: "noise_std".into(),
                reason: e.to_string(),
            })?;
            Some((normal, ChaCha8Rng::seed_from_u64(config.seed)))
        } else {
            None
        };
        let span = config.required_span(lag) + 2.0 * input_dt;
        Ok(Self { buffer: SampleBuffer::new(input_dt, span, 0.0), config, estimate: None, noise })
    }

    pub fn config(&self) -> &ConverterConfig {
        &self.config
    }

    pub fn buffer(&self) -> &SampleBuffer<f64> {
        &self.buffer
    }

    pub fn estimate(&self) -> Option<&SpectralEstimate> {
        self.estimate.as_ref()
    }

    /// Noise-free input for `t <= 0`; see [`SampleBuffer::set_history`].
    pub fn set_history(&mut self, f: impl Fn(f64) -> f64) {
        self.buffer.set_history(f);
        self.estimate = None;
    }

    /// Appends the next sample (at `t = newest + input_dt`).
    pub fn push(&mut self, x: f64) {
        let noisy = match &mut self.noise {
            Some((normal, rng)) => x + normal.sample(rng),
            None => x,
        };
        self.buffer.push(noisy);
    }

    /// Replaces the sample at `t = 0` (the initial state).
    pub fn reset_initial(&mut self, x: f64) {
        self.buffer.set_initial(x);
    }

    /// The analysis window ending at `t_ref`.
    pub fn window(&self, t_ref: f64) -> Result<SampleWindow> {
        let WindowConfig { len, dt } = self.config.window;
        let samples = (0..len)
            .map(|j| self.buffer.value_at(t_ref - (len - 1 - j) as f64 * dt))
            .collect::<Result<Vec<_>>>()?;
        SampleWindow::new(samples, dt, t_ref)
    }

    /// Re-estimates the spectrum from the window ending at `t_ref` (esprit
    /// mode; a no-op otherwise).
    pub fn refresh(&mut self, t_ref: f64) -> Result<()> {
        if matches!(self.config.mode, ConverterMode::Esprit) {
            let window = self.window(t_ref)?;
            self.estimate = Some(analyze(&window, &self.config.spectral)?);
        }
        Ok(())
    }

    /// Quadrature value at `t`.
    pub fn quadrature_at(&self, t: f64) -> Result<f64> {
        match &self.config.mode {
            ConverterMode::Esprit => {
                let est = self.estimate.as_ref().ok_or_else(|| Error::InvalidParameter {
                    name: "converter".into(),
                    reason: "no spectral estimate yet; call refresh first".into(),
                })?;
                Ok(synthesize_imaginary(est, t))
            }
            ConverterMode::Delay => self.buffer.value_at(t - self.config.quarter_period()),
            ConverterMode::Passthrough(Some(oracle)) => Ok(oracle(t).im),
            ConverterMode::Passthrough(None) => unreachable!("rejected in new()"),
        }
    }

    /// Analytic signal `x(t) + j x_hat(t)`.
    pub fn analytic_at(&self, t: f64) -> Result<Complex64> {
        if let ConverterMode::Passthrough(Some(oracle)) = &self.config.mode {
            return Ok(oracle(t));
        }
        Ok(Complex64::new(self.buffer.value_at(t)?, self.quadrature_at(t)?))
    }

    /// Complex envelope `X(t) = (x(t) + j x_hat(t)) exp(-j omega_s t)`.
    pub fn emt_to_envelope(&self, t: f64) -> Result<Complex64> {
        Ok(self.analytic_at(t)? * Complex64::from_polar(1.0, -self.config.omega_s * t))
    }
}

/// `Re(X exp(j omega_s t))`.
pub fn envelope_to_emt(x: Complex64, omega_s: f64, t: f64) -> f64 {
    (x * Complex64::from_polar(1.0, omega_s * t)).re
}

/// Analytic record of a sampled signal (sample `k` at `t = k * dt`) as the
/// converter would build it. Returns `(first_index, values)`: records start
/// once a full history is available. In esprit mode the spectrum is
/// re-estimated every `hop` samples from the window ending at the last
/// sample of each block, so every quadrature value is synthesized inside the
/// window it was fitted on.
pub fn analytic_record(
    signal: &[f64],
    dt: f64,
    config: &ConverterConfig,
    hop: usize,
) -> Result<(usize, Vec<Complex64>)> {
    let hop = hop.max(1);
    let lead = (config.required_span(0.0) / dt - GRID_SNAP).ceil() as usize;
    if signal.len() <= lead {
        return Err(Error::InvalidWindow(format!(
            "signal of {} samples is shorter than the {} samples of history the converter needs",
            signal.len(),
            lead + 1
        )));
    }
    let mut conv = BoundaryConverter::new(config.clone(), dt, 0.0)?;
    // The buffer must hold the whole signal for offline use.
    conv.buffer = SampleBuffer::new(dt, signal.len() as f64 * dt, signal[0]);
    for &x in &signal[1..] {
        conv.buffer.push(x);
    }
    let mut out = Vec::with_capacity(signal.len() - lead);
    let mut k = lead;
    while k < signal.len() {
        let block_end = (k + hop - 1).min(signal.len() - 1);
        conv.refresh(block_end as f64 * dt)?;
        for j in k..=block_end {
            out.push(conv.analytic_at(j as f64 * dt)?);
        }
        k = block_end + 1;
    }
    Ok((lead, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buffer_interpolation_and_bounds() {
        let mut b = SampleBuffer::<f64>::new(1.0, 3.0, 0.0);
        for k in 1..=10 {
            b.push(k as f64 * 2.0);
        }
        assert_eq!(b.value_at(10.0).unwrap(), 20.0);
        assert!((b.value_at(9.25).unwrap() - 18.5).abs() < 1e-12);
        assert_eq!(b.held_at(9.75).unwrap(), 18.0);
        assert!(matches!(b.value_at(10.5), Err(Error::Lookahead { .. })));
        assert!(matches!(b.value_at(2.0), Err(Error::InsufficientHistory { .. })));
        assert_eq!(b.value_at(-3.0).unwrap(), 0.0);
    }

    #[test]
    fn integer_delay_reads_exact_entries() {
        let dt = 20e-6;
        let mut link = TravelingWaveLink::<f64>::new(100.0, 30.0 * dt, [dt, dt], 0.0);
        for k in 1..=100 {
            link.record(0, k as f64, 0.01 * k as f64);
            link.record(1, 0.0, 0.0);
        }
        let t = 100.0 * dt;
        let w = link.incoming_wave(1, t).unwrap();
        assert_eq!(w, 70.0 + 100.0 * 0.7000000000000001);
        let h = link.history_current(1, t, 1.0).unwrap();
        assert!((h + (70.0 / 100.0 + 0.7)).abs() < 1e-12);
    }

    #[test]
    fn quiescent_link_has_no_history() {
        let link = TravelingWaveLink::<Complex64>::new(300.0, 1e-3, [20e-6, 500e-6], 0.0);
        let h = link.history_current(0, 5e-4, Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(h, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn envelope_back_to_real() {
        assert_eq!(envelope_to_emt(Complex64::new(1.0, 0.0), 314.0, 0.0), 1.0);
        let ws = 2.0 * PI * 50.0;
        let t = (PI / 2.0) / ws;
        assert!((envelope_to_emt(Complex64::new(0.0, 1.0), ws, t) + 1.0).abs() < 1e-12);
    }

    fn feed(conv: &mut BoundaryConverter, dt: f64, n: usize, f: impl Fn(f64) -> f64) {
        conv.reset_initial(f(0.0));
        for k in 1..=n {
            conv.push(f(k as f64 * dt));
        }
    }

    #[test]
    fn pure_carrier_maps_to_unit_envelope() {
        let ws = 2.0 * PI * 50.0;
        let dt = 20e-6;
        let signal = |t: f64| (ws * t).cos();
        let window = WindowConfig { len: 41, dt: 500e-6 };

        let mut esprit = BoundaryConverter::new(ConverterConfig::new(ConverterMode::Esprit, window, ws), dt, 1e-3).unwrap();
        feed(&mut esprit, dt, 5000, signal);
        esprit.refresh(0.1).unwrap();
        let x = esprit.emt_to_envelope(0.0995).unwrap();
        assert!((x - Complex64::new(1.0, 0.0)).norm() < 1e-6, "{x}");

        let mut delay = BoundaryConverter::new(ConverterConfig::new(ConverterMode::Delay, window, ws), dt, 1e-3).unwrap();
        feed(&mut delay, dt, 5000, signal);
        let x = delay.emt_to_envelope(0.0995).unwrap();
        assert!((x - Complex64::new(1.0, 0.0)).norm() < 1e-9, "{x}");
    }

    #[test]
    fn passthrough_requires_oracle() {
        let window = WindowConfig { len: 41, dt: 500e-6 };
        let cfg = ConverterConfig::new(ConverterMode::Passthrough(None), window, 314.0);
        assert!(BoundaryConverter::new(cfg, 20e-6, 0.0).is_err());
        let oracle: AnalyticOracle = Arc::new(|t| Complex64::from_polar(1.0, 314.0 * t));
        let cfg = ConverterConfig::new(ConverterMode::Passthrough(Some(oracle)), window, 314.0);
        let conv = BoundaryConverter::new(cfg, 20e-6, 0.0).unwrap();
        assert!((conv.emt_to_envelope(0.37).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }
}
