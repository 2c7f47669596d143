// Two-area co-simulation (EMT grid at 20 us, shifted-frequency load at
// 500 us) with a 13 Hz interharmonic, run with both boundary converters and
// scored against a monolithic 20 us EMT reference.

use std::path::Path;

use sfcosim::orchestrator::{run as cosim, run_monolithic, RunOptions};
use sfcosim::results::compare;
use sfcosim::scenario::{parse_file, Scenario};
use sfcosim::wave_link::ConverterMode;

pub fn scenario() -> sfcosim::Result<Scenario> {
    parse_file(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/two_area.scn"))
}

/// Relative RMS error of the tie-line current, `(esprit, delay)`.
pub fn run() -> sfcosim::Result<(f64, f64)> {
    let sc = scenario()?;
    let reference = run_monolithic(&sc)?;
    let err = |mode| -> sfcosim::Result<f64> {
        let rs = cosim(&sc, &RunOptions::with_interface(mode))?;
        Ok(compare(&reference, &rs, "i_tie")?.rmse_relative)
    };
    Ok((err(ConverterMode::Esprit)?, err(ConverterMode::Delay)?))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (esprit, delay) = run()?;
    println!("tie current rmse_relative  esprit {esprit:.3e}  delay {delay:.3e}");
    Ok(())
}
