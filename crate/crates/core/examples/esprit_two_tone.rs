// Recover a two-tone signal with ESPRIT: frequencies, amplitudes, phases.

use std::f64::consts::PI;

use sfcosim::spectral::{analyze, SampleWindow, SpectralComponent, SpectralConfig};

pub fn signal(t: f64) -> f64 {
    (2.0 * PI * 50.0 * t + 0.3).cos() + 0.2 * (2.0 * PI * 13.0 * t - 1.0).cos()
}

/// Components of a 101-sample window at 500 us, phases referenced to `t = 0`
/// (the newest sample).
pub fn run() -> sfcosim::Result<Vec<SpectralComponent>> {
    let window = SampleWindow::from_fn(101, 500e-6, 0.0, signal)?;
    let mut est = analyze(&window, &SpectralConfig::default())?;
    est.components.sort_by(|a, b| b.freq.total_cmp(&a.freq));
    Ok(est.components)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for c in run()? {
        println!("{:9.6} Hz  amplitude {:.9}  phase {:+.9} rad", c.freq, c.amplitude, c.phase);
    }
    Ok(())
}
