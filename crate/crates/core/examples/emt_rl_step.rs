// EMT solve of a series RL circuit energized by a 1 V step.

use sfcosim::emt::EmtSolver;
use sfcosim::network::{Network, Waveform};

/// `(t, i_simulated, i_exact)` at 0.3 s with R = 1, L = 0.1, dt = 20 us.
pub fn run() -> sfcosim::Result<(f64, f64, f64)> {
    let mut net = Network::new(3);
    net.voltage_source("e", 1, 0, Waveform::dc(1.0));
    net.resistor("r", 1, 2, 1.0);
    let l = net.inductor("l", 2, 0, 0.1);
    let mut solver = EmtSolver::new(&net, 20e-6)?;
    solver.run_steps(15_000)?;
    let t = solver.time();
    Ok((t, solver.branch_current(l), 1.0 - (-t / 0.1f64).exp()))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (t, i, exact) = run()?;
    println!("t = {t:.3} s  i = {i:.9} A  exact = {exact:.9} A  rel error {:.2e}", (i - exact).abs() / exact);
    Ok(())
}
