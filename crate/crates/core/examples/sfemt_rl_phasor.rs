// Shifted-frequency solve of a 50 Hz series RL circuit at a 500 us step,
// compared with the phasor solution after demodulation.

use std::f64::consts::PI;

use num_complex::Complex64;
use sfcosim::network::{Network, Waveform};
use sfcosim::sfemt::{demodulate, SfemtSolver};
use sfcosim::spectral::EnvelopeSeries;

const WS: f64 = 2.0 * PI * 50.0;

pub struct Outcome {
    pub phasor: Complex64,
    /// Amplitude and phase fitted to the demodulated current over the last period.
    pub amplitude: f64,
    pub phase: f64,
}

pub fn run() -> sfcosim::Result<Outcome> {
    let (r, l, dt) = (1.0, 0.01, 500e-6);
    let mut net = Network::new(3);
    net.voltage_source("e", 1, 0, Waveform::tone(50.0, 1.0, 0.2));
    net.resistor("r", 1, 2, r);
    let il = net.inductor("l", 2, 0, l);
    let mut solver = SfemtSolver::new(&net, dt, WS)?;
    solver.run_steps(2000)?;

    let per_period = (1.0 / (50.0 * dt)).round() as usize;
    let t0 = solver.time() + dt;
    let mut values = Vec::with_capacity(per_period);
    for _ in 0..per_period {
        solver.step()?;
        values.push(solver.branch_current(il));
    }
    let i = demodulate(&EnvelopeSeries { values, dt, t0, omega_s: WS });

    // i(t) = A cos(wt + phi): project onto cos and sin over one period.
    let (mut c, mut s) = (0.0, 0.0);
    for (k, x) in i.iter().enumerate() {
        let t = t0 + k as f64 * dt;
        c += x * (WS * t).cos();
        s += x * (WS * t).sin();
    }
    let n = per_period as f64;
    let fitted = Complex64::new(2.0 * c / n, -2.0 * s / n);
    Ok(Outcome {
        phasor: Complex64::from_polar(1.0, 0.2) / Complex64::new(r, WS * l),
        amplitude: fitted.norm(),
        phase: fitted.arg(),
    })
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let o = run()?;
    println!("phasor     |I| = {:.9}  arg = {:+.9}", o.phasor.norm(), o.phasor.arg());
    println!("simulated  |I| = {:.9}  arg = {:+.9}", o.amplitude, o.phase);
    Ok(())
}
