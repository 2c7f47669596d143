// Analytic record of a 50 + 13 Hz signal built two ways. ESPRIT synthesizes
// the quadrature from the fitted model; the delay method uses the sample a
// quarter period back, which is only a true quadrature at 50 Hz.

use std::f64::consts::PI;

use sfcosim::report::spectrum_report;
use sfcosim::spectral::{analyze, synthesize_imaginary, SampleWindow, SpectralConfig, WindowConfig};
use sfcosim::wave_link::{ConverterConfig, ConverterMode};

const DT: f64 = 500e-6;
const WS: f64 = 2.0 * PI * 50.0;

fn signal(t: f64) -> f64 {
    (WS * t + 0.3).cos() + 0.2 * (2.0 * PI * 13.0 * t - 1.0).cos()
}

pub struct Outcome {
    /// Negative/positive DFT peak ratio of the analytic record.
    pub esprit_ratio: f64,
    pub delay_ratio: f64,
    /// `sum x * x_hat / sum x^2` over one second (whole periods of both tones).
    pub orthogonality: f64,
}

fn signal_record() -> Vec<f64> {
    (0..2000).map(|k| signal(k as f64 * DT)).collect()
}

/// Negative/positive DFT peak ratios, `(esprit, delay)`.
pub fn ratios() -> sfcosim::Result<(f64, f64)> {
    let x = signal_record();
    let window = WindowConfig { len: 101, dt: DT };
    let ratio = |mode| -> sfcosim::Result<f64> {
        let mut cfg = ConverterConfig::new(mode, window, WS);
        cfg.spectral = SpectralConfig::default();
        Ok(spectrum_report(&x, DT, &cfg, 1)?.neg_pos_ratio)
    };
    Ok((ratio(ConverterMode::Esprit)?, ratio(ConverterMode::Delay)?))
}

/// `|sum x * x_hat| / sum x^2` over one second, with `x_hat` synthesized
/// from one window's estimate.
pub fn orthogonality() -> sfcosim::Result<f64> {
    let w = SampleWindow::from_fn(101, DT, 0.0, signal)?;
    let est = analyze(&w, &SpectralConfig::default())?;
    let (mut cross, mut power) = (0.0, 0.0);
    for (k, xk) in signal_record().into_iter().enumerate() {
        cross += xk * synthesize_imaginary(&est, k as f64 * DT);
        power += xk * xk;
    }
    Ok((cross / power).abs())
}

pub fn run() -> sfcosim::Result<Outcome> {
    let (esprit_ratio, delay_ratio) = ratios()?;
    Ok(Outcome { esprit_ratio, delay_ratio, orthogonality: orthogonality()? })
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let o = run()?;
    println!("neg/pos ratio  esprit {:.3e}  delay {:.3e}", o.esprit_ratio, o.delay_ratio);
    println!("orthogonality  {:.3e}", o.orthogonality);
    Ok(())
}
