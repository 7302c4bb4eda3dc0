use std::path::{Path, PathBuf};

use ponderomotive::io::{write_sinogram, write_wigner, Header, Report, TimeSeries};
use ponderomotive::model::{hz_to_rad, SpectralParams};
use ponderomotive::spectral::Window;
use ponderomotive::tomography::{
    build_sinogram, covariance_from_cuts, extract_modes, sart_reconstruct, theoretical_covariance,
    CovarianceEllipse, ModeConfig, SartOptions, VACUUM_VARIANCE,
};
use ponderomotive::{Error, Result};

use crate::config::Resolved;
use crate::files::{create, ensure_dir, expand, load, mode_tag, record_angle, write_text, Input};

#[derive(Debug, Clone)]
pub struct ModeOutcome {
    pub freq_hz: f64,
    pub ellipse: CovarianceEllipse,
    pub vacuum: CovarianceEllipse,
}

fn ellipse_lines(report: &mut Report, e: &CovarianceEllipse) {
    let (minor, major) = e.eigenvalues();
    report
        .value("var_x", e.var_x)
        .value("var_y", e.var_y)
        .value("cov_xy", e.cov_xy)
        .value("minor_variance", minor)
        .value("major_variance", major)
        .value("tilt_rad", e.tilt());
}

/// Model rates recorded in a simulated record's header, if any.
fn header_model(h: &Header) -> Option<SpectralParams> {
    let get = |k: &str| h.get_f64(k).ok().map(hz_to_rad);
    Some(SpectralParams {
        omega_m: get("omega_m_hz")?,
        gamma_m: get("gamma_m_hz")?,
        gamma_tot: get("gamma_tot_hz")?,
        gamma_meas: get("gamma_meas_hz")?,
    })
}

/// Reconstructs the Wigner function of each configured temporal mode from
/// photocurrents at ≥ 5 angles. Writes one sinogram and one grid per mode
/// and `tomography_report.txt`.
pub fn run(r: &Resolved, inputs: &[PathBuf], reference: Option<&Path>, out: &Path) -> Result<Vec<ModeOutcome>> {
    let paths = expand(inputs)?;
    if paths.is_empty() {
        return Err(Error::Usage("tomography needs photocurrent records".into()));
    }
    let tcfg = &r.config.tomography;
    let pooling = tcfg.pooling()?;
    let calib = r.calibration()?;
    let mut records: Vec<(f64, TimeSeries)> = Vec::new();
    let mut vacuum_record: Option<TimeSeries> = None;
    for p in &paths {
        let series = match load(p)? {
            Input::Series(s) => s,
            Input::Spectrum(..) => {
                return Err(Error::Usage(format!("{}: tomography needs time series, not spectra", p.display())))
            }
        };
        let is_reference = Some(p.as_path()) == reference
            || (reference.is_none() && series.header.get("role") == Some(crate::files::ROLE_REFERENCE));
        if is_reference {
            vacuum_record = Some(series);
        } else {
            let theta = record_angle(&series.header, calib.as_ref(), p)?;
            records.push((theta, series));
        }
    }
    if let (Some(p), None) = (reference, &vacuum_record) {
        match load(p)? {
            Input::Series(s) => vacuum_record = Some(s),
            Input::Spectrum(..) => return Err(Error::Usage(format!("{}: reference must be a time series", p.display()))),
        }
    }
    let mut distinct: Vec<f64> = records.iter().map(|(t, _)| *t).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if distinct.len() < 5 {
        return Err(Error::Usage(format!(
            "tomography needs records at ≥ 5 distinct angles, got {}",
            distinct.len()
        )));
    }
    ensure_dir(out)?;
    let theory_params = header_model(&records[0].1.header);
    let correlation_time = theory_params.map(|p| 1.0 / p.gamma_m);
    let options = SartOptions {
        grid_size: tcfg.grid,
        iterations: tcfg.iterations,
        relaxation: tcfg.relaxation,
        nonnegative: tcfg.nonnegative,
    };

    let mut report = Report::new(r.header());
    report
        .section("tomography")
        .value("records", records.len())
        .value("angles", distinct.len())
        .value("chunk_duration_s", tcfg.chunk_duration)
        .value("bins", tcfg.bins)
        .value("grid", tcfg.grid)
        .value("pooling", &tcfg.pooling)
        .value("vacuum_variance", VACUUM_VARIANCE);

    let mut outcomes = Vec::new();
    for &freq in &tcfg.modes_hz {
        let mode_cfg = ModeConfig {
            chunk_duration: tcfg.chunk_duration,
            center_freq_hz: freq,
            window: Window::Hann,
            correlation_time,
        };
        let modes = records
            .iter()
            .map(|(theta, s)| extract_modes(&s.values, s.dt, *theta, &mode_cfg))
            .collect::<Result<Vec<_>>>()?;
        let largest = modes.iter().map(|m| m.pooled_variance()).fold(0.0, f64::max);
        let sino = build_sinogram(&modes, tcfg.bins, tcfg.range_sd * largest.sqrt(), pooling)?;
        let sart = sart_reconstruct(&sino, &options)?;
        let ellipse = sart.grid.covariance();
        let (v1, v2, v3) = sino.cut_variances()?;
        let cuts = covariance_from_cuts(v1, v2, v3)?;
        let tag = mode_tag(freq);
        let h = r.header().with("mode_hz", freq);
        write_sinogram(&mut create(&out.join(format!("sinogram_{tag}.csv")))?, &h, &sino)?;
        write_wigner(&mut create(&out.join(format!("wigner_{tag}.csv")))?, &h, &sart.grid)?;

        report.section(&format!("mode_{tag}"));
        report.value("freq_hz", freq).value("chunks", modes[0].samples.len());
        ellipse_lines(&mut report, &ellipse);
        report
            .value("below_vacuum", ellipse.eigenvalues().0 < VACUUM_VARIANCE)
            .value("cut_var_x", cuts.var_x)
            .value("cut_var_y", cuts.var_y)
            .value("cut_cov_xy", cuts.cov_xy)
            .value("sart_residual", sart.residuals.last().copied().unwrap_or(f64::NAN))
            .value("grid_mass", sart.grid.mass())
            .value("outside_samples", sino.outside.iter().sum::<usize>());
        let mut warnings: Vec<String> = modes[0].warnings.iter().map(|w| w.to_string()).collect();
        warnings.dedup();
        for w in warnings {
            report.value("warning", w);
        }
        if let Some(p) = theory_params {
            let t = theoretical_covariance(freq, &p)?;
            let (minor, major) = t.eigenvalues();
            report
                .section(&format!("theory_{tag}"))
                .value("var_x", t.var_x)
                .value("var_y", t.var_y)
                .value("cov_xy", t.cov_xy)
                .value("minor_variance", minor)
                .value("major_variance", major)
                .value("tilt_rad", t.tilt());
        }

        report.section(&format!("vacuum_{tag}"));
        let vacuum = match &vacuum_record {
            Some(s) => {
                let m = extract_modes(&s.values, s.dt, 0.0, &mode_cfg)?;
                let v = m.pooled_variance();
                report.value("source", "reference record");
                CovarianceEllipse {
                    var_x: v,
                    var_y: v,
                    cov_xy: 0.0,
                }
            }
            None => {
                report.value("source", "nominal");
                CovarianceEllipse::vacuum()
            }
        };
        ellipse_lines(&mut report, &vacuum);
        outcomes.push(ModeOutcome { freq_hz: freq, ellipse, vacuum });
    }
    write_text(&out.join("tomography_report.txt"), &report.render())?;
    Ok(outcomes)
}
