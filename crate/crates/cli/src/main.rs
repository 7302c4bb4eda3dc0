//! `ponderomotive`: simulate, fit and reconstruct ponderomotively squeezed
//! light from the command line.

mod config;
mod files;
mod fit;
mod patterns;
mod simulate;
mod tomography;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ponderomotive::io::Report;
use ponderomotive::model::rad_to_hz;
use ponderomotive::Error;

use config::{Overrides, Resolved};

#[derive(Debug, Clone)]
struct Angles(Vec<f64>);

fn angles_arg(s: &str) -> Result<Angles, String> {
    config::parse_angles(s).map(Angles)
}

#[derive(Parser, Debug)]
#[command(name = "ponderomotive", version, about = "Ponderomotive squeezing: simulation, spectral fitting and tomography")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Parameter preset (paper-2021).
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated homodyne angles in rad; `0.25pi` and `pi/4` also work.
    #[arg(long, global = true, value_parser = angles_arg)]
    angles: Option<Angles>,
    /// Output directory (default ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Time-series format.
    #[arg(long, global = true, value_parser = ["csv", "binary"])]
    format: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Photocurrent records at each angle plus a shot-noise reference.
    Simulate,
    /// Joint fit of spectra or photocurrent records (files or directories).
    Fit {
        inputs: Vec<PathBuf>,
        /// Shot-noise reference; otherwise picked from the inputs by role.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Wigner functions of the configured temporal modes.
    Tomography {
        inputs: Vec<PathBuf>,
        /// Vacuum reference record; otherwise picked from the inputs by role.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Radiation patterns and measurement limits.
    Patterns,
    /// simulate, then calibrate and fit, then tomography.
    Pipeline,
}

/// Exit code for each failure class.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Usage(_) => 2,
        Error::Configuration(_) | Error::ParameterDomain(_) => 3,
        Error::Calibration(_) | Error::Fit { .. } | Error::Reconstruction(_) => 4,
        Error::Parse(_) | Error::Io(_) => 5,
    }
}

fn run(cli: Cli) -> ponderomotive::Result<()> {
    let r = Resolved::load(
        cli.config.as_deref(),
        Overrides {
            preset: cli.preset,
            seed: cli.seed,
            angles: cli.angles.map(|a| a.0),
            out: cli.out,
            format: cli.format,
        },
    )?;
    let out = r.out.clone();
    match cli.command {
        Command::Simulate => {
            let rec = simulate::run(&r, &out)?;
            println!(
                "wrote {} records and {}",
                rec.photocurrents.len() + rec.reference.iter().count(),
                rec.report.display()
            );
        }
        Command::Fit { inputs, reference } => {
            let fit = fit::run(&r, &inputs, reference.as_deref(), &out)?;
            println!(
                "gamma_m/2π = {:.2} Hz, Γ_tot/2π = {:.1} Hz, Γ_meas/2π = {:.1} Hz, η_meas = {:.4}",
                rad_to_hz(fit.gamma_m.value),
                rad_to_hz(fit.gamma_tot.value),
                rad_to_hz(fit.gamma_meas.value),
                fit.eta_meas
            );
        }
        Command::Tomography { inputs, reference } => {
            for m in tomography::run(&r, &inputs, reference.as_deref(), &out)? {
                let (minor, major) = m.ellipse.eigenvalues();
                println!(
                    "{:.1} kHz: variances {minor:.4}, {major:.4} (vacuum {:.4})",
                    m.freq_hz / 1e3,
                    m.vacuum.var_x
                );
            }
        }
        Command::Patterns => {
            patterns::run(&r, &out)?;
            println!("wrote patterns to {}", out.display());
        }
        Command::Pipeline => pipeline(&r)?,
    }
    Ok(())
}

fn pipeline(r: &Resolved) -> ponderomotive::Result<()> {
    let out = &r.out;
    let records = simulate::run(r, &out.join("records"))?;
    let inputs = [out.join("records")];
    let fit = fit::run(r, &inputs, None, out)?;
    let modes = tomography::run(r, &inputs, None, out)?;
    let mut report = Report::new(r.header());
    report
        .section("pipeline")
        .value("records", records.photocurrents.len())
        .value("eta_meas", fit.eta_meas)
        .value("gamma_m_hz", rad_to_hz(fit.gamma_m.value))
        .value("gamma_tot_hz", rad_to_hz(fit.gamma_tot.value))
        .value("gamma_meas_hz", rad_to_hz(fit.gamma_meas.value));
    for m in &modes {
        let (minor, major) = m.ellipse.eigenvalues();
        report
            .value(&format!("minor_variance_{}", files::mode_tag(m.freq_hz)), minor)
            .value(&format!("major_variance_{}", files::mode_tag(m.freq_hz)), major);
    }
    files::write_text(&out.join("pipeline_report.txt"), &report.render())?;
    println!("η_meas = {:.4}; reports in {}", fit.eta_meas, out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
