// Step into a matched lossless line: the far end stays at zero until the
// travel time, then settles at half the source voltage.

use sfcosim::emt::EmtSolver;
use sfcosim::network::{Network, Waveform};

pub const TAU: f64 = 612.13e-6;
pub const DT: f64 = 20e-6;

/// Far-end voltage samples `(t, v)` over 2 ms for a 1 V step.
pub fn run() -> sfcosim::Result<Vec<(f64, f64)>> {
    let z_c = 300.0;
    let mut net = Network::new(4);
    net.voltage_source("e", 1, 0, Waveform::dc(1.0));
    net.resistor("rs", 1, 2, z_c);
    net.line("ln", 2, 3, z_c, TAU);
    net.resistor("load", 3, 0, z_c);
    let mut solver = EmtSolver::new(&net, DT)?;
    let mut out = vec![(0.0, solver.node_voltage(3))];
    for _ in 0..100 {
        solver.step()?;
        out.push((solver.time(), solver.node_voltage(3)));
    }
    Ok(out)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let v = run()?;
    let arrival = v.iter().find(|s| s.1.abs() > 1e-12).map(|s| s.0);
    println!("travel time {:.2} us, first nonzero far-end sample at {:.2} us", TAU * 1e6, arrival.unwrap_or(f64::NAN) * 1e6);
    println!("settled far-end voltage {:.9} V", v.last().map(|s| s.1).unwrap_or(f64::NAN));
    Ok(())
}
