use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sfcosim::orchestrator::{run, run_monolithic, RunOptions};
use sfcosim::report::spectrum_report;
use sfcosim::results::{compare_series, read_csv, write_results, Series};
use sfcosim::scenario::parse_file;
use sfcosim::spectral::{analyze, SampleWindow, SpectralConfig, WindowConfig};
use sfcosim::wave_link::{ConverterConfig, ConverterMode};
use sfcosim::{Error, Result};

#[derive(Parser)]
#[command(name = "sfcosim", version, about = "Multi-rate EMT / shifted-frequency EMT co-simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Interface {
    Esprit,
    Delay,
    /// Run every area as EMT at dt_micro.
    Passthrough,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Esprit,
    Delay,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write one CSV per recorder.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the converter mode of every link.
        #[arg(long, value_enum)]
        interface: Option<Interface>,
        #[arg(long = "dt-micro")]
        dt_micro: Option<f64>,
        #[arg(long = "dt-macro")]
        dt_macro: Option<f64>,
        /// Solve the merged network at dt_micro instead (the reference run).
        #[arg(long)]
        monolithic: bool,
        /// Advance areas on separate threads.
        #[arg(long)]
        parallel: bool,
    },
    /// ESPRIT components of the trailing window of a CSV column.
    Analyze {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        column: String,
        /// Window length in samples (odd).
        #[arg(long)]
        window: usize,
        #[arg(long, default_value_t = 1e-8)]
        threshold: f64,
    },
    /// Error metrics of a test column against a reference column.
    Compare {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        column: String,
    },
    /// Spectrum report: trailing-window components plus the negative-frequency
    /// content of the constructed analytic record.
    Report {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        column: String,
        #[arg(long, value_enum, default_value_t = Method::Esprit)]
        mode: Method,
        /// Window length in samples; one fundamental period by default.
        #[arg(long)]
        window: Option<usize>,
        /// Fundamental (Hz): carrier and delay-mode quarter period.
        #[arg(long, default_value_t = 50.0)]
        f0: f64,
        /// Samples between re-estimations of the analytic record.
        #[arg(long, default_value_t = 1)]
        hop: usize,
        #[arg(long, default_value_t = 1e-8)]
        threshold: f64,
    },
}

fn column(path: &PathBuf, name: &str) -> Result<Series> {
    let rs = read_csv(path)?;
    Ok(rs.get(name)?.clone())
}

/// Step of a uniformly sampled series.
fn uniform_dt(s: &Series) -> Result<f64> {
    let bad = |reason: &str| Error::InvalidParameter { name: s.name.clone(), reason: reason.into() };
    if s.t.len() < 2 {
        return Err(bad("needs at least two samples"));
    }
    let dt = (s.t[s.t.len() - 1] - s.t[0]) / (s.t.len() - 1) as f64;
    if s.t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        return Err(bad("time stamps are not uniformly spaced"));
    }
    Ok(dt)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { scenario, out, interface, dt_micro, dt_macro, monolithic, parallel } => {
            let sc = parse_file(&scenario)?.with_steps(dt_micro, dt_macro)?;
            let rs = if monolithic {
                run_monolithic(&sc)?
            } else {
                let interface = interface.map(|i| match i {
                    Interface::Esprit => ConverterMode::Esprit,
                    Interface::Delay => ConverterMode::Delay,
                    Interface::Passthrough => ConverterMode::Passthrough(None),
                });
                run(&sc, &RunOptions { interface, reconstruction: None, parallel })?
            };
            let paths = write_results(&rs, &out)?;
            for p in paths {
                println!("{}", p.display());
            }
        }
        Command::Analyze { csv, column: name, window, threshold } => {
            let s = column(&csv, &name)?;
            let dt = uniform_dt(&s)?;
            let x = s.as_real().expect("csv columns are real");
            if x.len() < window {
                return Err(Error::InvalidWindow(format!("{} samples, window needs {window}", x.len())));
            }
            let w = SampleWindow::new(x[x.len() - window..].to_vec(), dt, s.t[s.t.len() - 1])?;
            let est = analyze(&w, &SpectralConfig { rel_threshold: threshold, ..SpectralConfig::default() })?;
            println!("{:>14} {:>14} {:>12}", "freq_hz", "amplitude", "phase_rad");
            for c in &est.components {
                println!("{:>14.6} {:>14.6e} {:>12.6}", c.freq, c.amplitude, c.phase);
            }
            println!("phase reference t = {:e} s", est.t_ref);
        }
        Command::Compare { reference, test, column: name } => {
            let m = compare_series(&column(&reference, &name)?, &column(&test, &name)?)?;
            println!("rmse = {:e}", m.rmse);
            println!("rmse_relative = {:e}", m.rmse_relative);
            println!("max_abs_error = {:e}", m.max_abs_error);
            println!("samples = {}", m.samples);
        }
        Command::Report { csv, column: name, mode, window, f0, hop, threshold } => {
            let s = column(&csv, &name)?;
            let dt = uniform_dt(&s)?;
            let mode = match mode {
                Method::Esprit => ConverterMode::Esprit,
                Method::Delay => ConverterMode::Delay,
            };
            let win = match window {
                Some(len) => WindowConfig { len, dt },
                None => WindowConfig::one_period(f0, dt),
            };
            let mut cfg = ConverterConfig::new(mode, win, 2.0 * PI * f0);
            cfg.spectral.rel_threshold = threshold;
            if hop == 0 {
                return Err(Error::InvalidParameter { name: "hop".into(), reason: "must be at least 1".into() });
            }
            let report = spectrum_report(s.as_real().expect("csv columns are real"), dt, &cfg, hop)?;
            println!("{report}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
