use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ponderomotive::io::{write_spectrum, Header, Report};
use ponderomotive::model::{hz_to_rad, optimal_squeezing, rad_to_hz, SpectralParams, TWO_PI};
use ponderomotive::spectral::{
    fit_multi, normalize_to_shot_noise, subtract_classical_noise, FitGuess, FitOptions, FitResult, Spectrum,
    WelchConfig, WelchEstimator,
};
use ponderomotive::{Error, Result};

use crate::config::Resolved;
use crate::files::{create, ensure_dir, expand, file_name, file_stem, load, record_angle, write_text, Input};

fn welch(series: &ponderomotive::io::TimeSeries, resolution_hz: f64) -> Result<Spectrum> {
    let mut est = WelchEstimator::new(WelchConfig::for_resolution(series.dt, resolution_hz), series.dt)?;
    est.push(&series.values);
    est.spectrum()
}

struct Prepared {
    source: PathBuf,
    header: Header,
    spectrum: Spectrum,
}

/// Turns every input into a calibrated spectrum in shot-noise units.
fn prepare(r: &Resolved, inputs: &[PathBuf], reference: Option<&Path>, out: &Path) -> Result<(Vec<Prepared>, Vec<String>)> {
    let paths = expand(inputs)?;
    if paths.is_empty() {
        return Err(Error::Usage("fit needs input spectra or photocurrent records".into()));
    }
    let fcfg = &r.config.fit;
    let calib = r.calibration()?;
    let mut notes = Vec::new();
    let mut loaded = Vec::new();
    let mut reference_input = None;
    for p in &paths {
        if Some(p.as_path()) == reference {
            continue;
        }
        let input = load(p)?;
        if input.is_reference() && reference.is_none() {
            if reference_input.is_some() {
                return Err(Error::Usage("more than one shot-noise reference among the inputs".into()));
            }
            reference_input = Some((p.clone(), input));
        } else {
            loaded.push((p.clone(), input));
        }
    }
    if let Some(p) = reference {
        reference_input = Some((p.to_path_buf(), load(p)?));
    }
    let reference_spectrum = match reference_input {
        Some((p, Input::Series(s))) => {
            notes.push(format!("shot-noise reference {}", file_name(&p)));
            Some(welch(&s, fcfg.resolution_hz)?)
        }
        Some((p, Input::Spectrum(_, s))) => {
            notes.push(format!("shot-noise reference {}", file_name(&p)));
            Some(s)
        }
        None => None,
    };
    let band = (fcfg.reference_band_hz[0], fcfg.reference_band_hz[1]);

    let mut prepared = Vec::new();
    for (path, input) in loaded {
        let theta = record_angle(input.header(), calib.as_ref(), &path)?;
        let unbalance = input.header().get_f64("v_dc").ok().zip(calib.as_ref()).map(|(v, c)| v - c.v_off);
        let header = input.header().clone();
        let (mut spectrum, from_series) = match input {
            Input::Series(s) => (welch(&s, fcfg.resolution_hz)?, true),
            Input::Spectrum(_, s) => (s, false),
        };
        if let Some(reference) = &reference_spectrum {
            spectrum = normalize_to_shot_noise(&spectrum, reference, band)?;
        }
        if let (Some(c), Some(u)) = (&calib, unbalance) {
            let corrected = subtract_classical_noise(&spectrum, c, u)?;
            if corrected.extrapolated {
                notes.push(format!("{}: unbalance {u:.4} V outside the calibrated range", file_name(&path)));
            }
            if corrected.floored > 0 {
                notes.push(format!("{}: {} bins clipped at zero", file_name(&path), corrected.floored));
            }
            spectrum = corrected.spectrum;
        }
        spectrum = spectrum.with_theta(theta);
        if from_series {
            let mut h = r.header();
            h.set("source", file_name(&path));
            let name = out.join(format!("spectrum_{}.csv", file_stem(&path)));
            let span = spectrum.band(fcfg.export_band_hz[0], fcfg.export_band_hz[1]);
            let export = Spectrum {
                freqs: spectrum.freqs[span.clone()].to_vec(),
                values: spectrum.values[span].to_vec(),
                ..spectrum.clone()
            };
            let mut w = create(&name)?;
            write_spectrum(&mut w, &h, &export)?;
        }
        prepared.push(Prepared {
            source: path,
            header,
            spectrum,
        });
    }
    if prepared.len() < 3 {
        return Err(Error::Usage(format!("fit needs at least 3 spectra, got {}", prepared.len())));
    }
    Ok((prepared, notes))
}

/// Joint fit of all inputs. Writes `fit_report.txt` and `predicted_psd.csv`,
/// or `fit_diagnostics.txt` when the fit does not converge.
pub fn run(r: &Resolved, inputs: &[PathBuf], reference: Option<&Path>, out: &Path) -> Result<FitResult> {
    ensure_dir(out)?;
    let (prepared, notes) = prepare(r, inputs, reference, out)?;
    let fcfg = &r.config.fit;
    let guess = FitGuess {
        gamma_m: hz_to_rad(fcfg.guess_gamma_m_hz),
        gamma_tot: hz_to_rad(fcfg.guess_gamma_tot_hz),
        gamma_meas: hz_to_rad(fcfg.guess_gamma_meas_hz),
        omega_m: None,
        thetas: None,
    };
    let options = FitOptions {
        band_hz: fcfg.band_hz.map(|b| (b[0], b[1])),
        max_iterations: fcfg.max_iterations,
        ..FitOptions::default()
    };
    let spectra: Vec<Spectrum> = prepared.iter().map(|p| p.spectrum.clone()).collect();
    let fit = match fit_multi(&spectra, &guess, &options) {
        Ok(f) => f,
        Err(e) => {
            let mut report = Report::new(r.header());
            report.section("failure").value("error", &e);
            if let Error::Fit { iterations, cost, reason } = &e {
                report
                    .value("iterations", iterations)
                    .value("cost", cost)
                    .value("reason", reason);
            }
            report.section("inputs");
            for p in &prepared {
                report.value(&file_stem(&p.source), p.spectrum.theta_inferred.unwrap_or(f64::NAN));
            }
            write_text(&out.join("fit_diagnostics.txt"), &report.render())?;
            return Err(e);
        }
    };

    let mut report = Report::new(r.header());
    report
        .section("fit")
        .estimate("gamma_m_hz", rad_to_hz(fit.gamma_m.value), rad_to_hz(fit.gamma_m.stderr))
        .estimate("gamma_tot_hz", rad_to_hz(fit.gamma_tot.value), rad_to_hz(fit.gamma_tot.stderr))
        .estimate("gamma_meas_hz", rad_to_hz(fit.gamma_meas.value), rad_to_hz(fit.gamma_meas.stderr))
        .value("eta_meas", fit.eta_meas)
        .value("eta_clamped", fit.eta_clamped)
        .value("omega_m_mean_hz", rad_to_hz(fit.mean_omega_m()))
        .value("cost", fit.cost)
        .value("residual_rms", fit.residual_rms)
        .value("points", fit.points)
        .value("iterations", fit.iterations);
    if let Some(rel) = fit.angle_relation {
        report
            .section("angle_relation")
            .estimate("slope", rel.slope.value, rel.slope.stderr)
            .estimate("offset_rad", rel.offset.value, rel.offset.stderr)
            .value("offset_pi", rel.offset.value / PI);
    }
    let mean = SpectralParams {
        omega_m: fit.mean_omega_m(),
        ..fit.spectral_params(0)
    };
    let opt = optimal_squeezing(&mean, 0.5 * mean.omega_m, 1.5 * mean.omega_m);
    report
        .section("squeezing")
        .value("min_psd", opt.min_psd)
        .value("freq_hz", rad_to_hz(opt.omega))
        .value("theta_rad", opt.theta);
    for (k, (p, s)) in prepared.iter().zip(&fit.spectra).enumerate() {
        report
            .section(&format!("spectrum_{k:02}"))
            .value("source", file_name(&p.source))
            .estimate("omega_m_hz", rad_to_hz(s.omega_m.value), rad_to_hz(s.omega_m.stderr))
            .estimate("theta_rad", s.theta.value, s.theta.stderr)
            .value("theta_inferred_rad", s.theta_inferred.unwrap_or(f64::NAN));
    }
    let h = &prepared[0].header;
    if let (Ok(g), Ok(tot), Ok(meas)) = (h.get_f64("gamma_m_hz"), h.get_f64("gamma_tot_hz"), h.get_f64("gamma_meas_hz")) {
        report
            .section("simulated")
            .value("gamma_m_hz", g)
            .value("gamma_tot_hz", tot)
            .value("gamma_meas_hz", meas)
            .value("eta_meas", meas / tot);
    }
    if !notes.is_empty() {
        report.section("notes");
        for n in &notes {
            report.value("note", n);
        }
    }
    write_text(&out.join("fit_report.txt"), &report.render())?;
    write_predicted(r, &fit, out)?;
    Ok(fit)
}

/// PSD from the fitted parameters on a (θ, Ω) grid.
fn write_predicted(r: &Resolved, fit: &FitResult, out: &Path) -> Result<()> {
    let fcfg = &r.config.fit;
    let p = SpectralParams {
        omega_m: fit.mean_omega_m(),
        ..fit.spectral_params(0)
    };
    let centre = rad_to_hz(p.omega_m);
    let (lo, hi) = fcfg.band_hz.map_or((centre - 25e3, centre + 25e3), |b| (b[0], b[1]));
    let na = fcfg.grid_angles.max(2);
    let nf = fcfg.grid_points.max(2);
    let mut text = r.header().render();
    text.push_str("theta_rad,freq_hz,psd_sn_units\n");
    for i in 0..na {
        let theta = PI * i as f64 / (na - 1) as f64;
        for j in 0..nf {
            let f = lo + (hi - lo) * j as f64 / (nf - 1) as f64;
            let _ = writeln!(text, "{theta},{f},{}", p.psd(TWO_PI * f, theta));
        }
    }
    write_text(&out.join("predicted_psd.csv"), &text)
}
