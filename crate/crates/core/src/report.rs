//! Spectrum report: ESPRIT components of a record's trailing window plus the
//! negative-frequency content of its constructed analytic record.

use std::fmt;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::spectral::{analyze, SampleWindow, SpectralEstimate};
use crate::wave_link::{analytic_record, ConverterConfig};

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub mode: &'static str,
    pub estimate: SpectralEstimate,
    /// Largest negative-frequency DFT magnitude over the largest
    /// positive-frequency one (Hann-windowed analytic record).
    pub neg_pos_ratio: f64,
    /// Samples in the analytic record.
    pub record_len: usize,
}

/// Max |X(f<0)| / max |X(f>0)| of a Hann-windowed DFT; DC and the Nyquist
/// bin are excluded. Zero records give 0.
pub fn negative_frequency_ratio(record: &[Complex64]) -> f64 {
    let n = record.len();
    if n < 4 {
        return 0.0;
    }
    let mut buf: Vec<Complex64> = record
        .iter()
        .enumerate()
        .map(|(i, &x)| x * (0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n.div_ceil(2);
    let pos = buf[1..half].iter().map(|x| x.norm()).fold(0.0, f64::max);
    let neg = buf[n - half + 1..].iter().map(|x| x.norm()).fold(0.0, f64::max);
    if pos == 0.0 {
        if neg == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        neg / pos
    }
}

/// `signal[k]` is sampled at `k * dt`. The converter window is taken at the
/// record's own step; `hop` is the re-estimation stride of the analytic
/// record (esprit mode).
pub fn spectrum_report(signal: &[f64], dt: f64, config: &ConverterConfig, hop: usize) -> Result<SpectrumReport> {
    let mut cfg = config.clone();
    cfg.window.dt = dt;
    let n = cfg.window.len;
    if signal.len() < n {
        return Err(Error::InvalidWindow(format!("record has {} samples, window needs {n}", signal.len())));
    }
    let t_ref = (signal.len() - 1) as f64 * dt;
    let window = SampleWindow::new(signal[signal.len() - n..].to_vec(), dt, t_ref)?;
    let estimate = analyze(&window, &cfg.spectral)?;
    let (_, record) = analytic_record(signal, dt, &cfg, hop)?;
    Ok(SpectrumReport {
        mode: cfg.mode.name(),
        estimate,
        neg_pos_ratio: negative_frequency_ratio(&record),
        record_len: record.len(),
    })
}

impl fmt::Display for SpectrumReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>14} {:>14} {:>12}", "freq_hz", "amplitude", "phase_rad")?;
        for c in &self.estimate.components {
            writeln!(f, "{:>14.6} {:>14.6e} {:>12.6}", c.freq, c.amplitude, c.phase)?;
        }
        writeln!(f, "phase reference t = {:e} s", self.estimate.t_ref)?;
        write!(f, "analytic record ({} mode, {} samples): neg/pos ratio = {:.3e}", self.mode, self.record_len, self.neg_pos_ratio)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::WindowConfig;
    use crate::wave_link::ConverterMode;
    use std::f64::consts::PI;

    const WS: f64 = 2.0 * PI * 50.0;

    fn record(f: impl Fn(f64) -> f64, dt: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| f(k as f64 * dt)).collect()
    }

    #[test]
    fn pure_tone() {
        let dt = 500e-6;
        let x = record(|t| (WS * t).cos(), dt, 1200);
        let cfg = ConverterConfig::new(ConverterMode::Esprit, WindowConfig::one_period(50.0, dt), WS);
        let r = spectrum_report(&x, dt, &cfg, 8).unwrap();
        assert_eq!(r.estimate.components.len(), 1);
        assert!((r.estimate.components[0].freq - 50.0).abs() < 1e-6);
        assert!(r.neg_pos_ratio < 1e-3, "{}", r.neg_pos_ratio);
    }

    #[test]
    fn zero_record() {
        let dt = 500e-6;
        let cfg = ConverterConfig::new(ConverterMode::Esprit, WindowConfig::one_period(50.0, dt), WS);
        let r = spectrum_report(&vec![0.0; 300], dt, &cfg, 1).unwrap();
        assert!(r.estimate.components.is_empty());
        assert_eq!(r.neg_pos_ratio, 0.0);
    }

    #[test]
    fn delay_mode_two_tone() {
        let dt = 500e-6;
        let x = record(|t| (WS * t).cos() + 0.2 * (2.0 * PI * 13.0 * t).cos(), dt, 2200);
        let cfg = ConverterConfig::new(ConverterMode::Delay, WindowConfig::one_period(50.0, dt), WS);
        let r = spectrum_report(&x, dt, &cfg, 1).unwrap();
        assert!(r.neg_pos_ratio > 0.1, "{}", r.neg_pos_ratio);
    }

    #[test]
    fn too_short() {
        let cfg = ConverterConfig::new(ConverterMode::Esprit, WindowConfig { len: 41, dt: 1e-3 }, WS);
        assert!(spectrum_report(&[1.0; 10], 1e-3, &cfg, 1).is_err());
    }
}
