use std::path::{Path, PathBuf};

use ponderomotive::io::{Header, Report, TimeSeries};
use ponderomotive::langevin::{PhotocurrentStream, SimConfig, Synthesis};
use ponderomotive::model::{rad_to_hz, ModelParams};
use ponderomotive::rng::{Channel, GaussianStream};
use ponderomotive::{Error, Result};

use crate::config::Resolved;
use crate::files::{create, ensure_dir, io_error, write_text, ROLE_PHOTOCURRENT, ROLE_REFERENCE};

#[derive(Debug, Clone)]
pub struct Records {
    pub photocurrents: Vec<PathBuf>,
    pub reference: Option<PathBuf>,
    pub report: PathBuf,
}

fn params_header(h: &mut Header, p: &ModelParams) {
    let rates = p.rates();
    h.set("omega_m_hz", rad_to_hz(p.omega_m))
        .set("gamma_m_hz", rad_to_hz(p.gamma_m))
        .set("gamma_qba_hz", rad_to_hz(p.gamma_qba))
        .set("n_bar", p.n_bar)
        .set("eta_d", p.eta_d)
        .set("gamma_tot_hz", rad_to_hz(rates.gamma_tot))
        .set("gamma_meas_hz", rad_to_hz(rates.gamma_meas))
        .set("eta_meas", rates.eta_meas);
}

/// One record per angle on independent trajectories, plus a record with
/// the measurement backaction switched off as shot-noise reference.
pub fn run(r: &Resolved, dir: &Path) -> Result<Records> {
    let params = r.params()?;
    let sim = &r.config.sim;
    let dt = sim.dt(&params);
    let integrator = sim.integrator()?;
    let calib = r.calibration()?;
    let angles = r.angles();
    if angles.is_empty() {
        return Err(Error::Usage("no angles to simulate".into()));
    }
    let base = SimConfig::new(params, dt, sim.samples, r.seed).with_integrator(integrator);
    base.validate()?;
    ensure_dir(dir)?;
    let ext = r.format.extension();

    let record = |cfg: &SimConfig, synthesis: Synthesis, excess: f64, header: Header, path: &Path| -> Result<()> {
        let mut stream = PhotocurrentStream::new(cfg, &[synthesis])?;
        let mut bufs = vec![vec![0.0; cfg.n_samples]];
        stream.fill(&mut bufs);
        let mut values = bufs.pop().unwrap_or_default();
        if excess > 0.0 {
            let mut noise = GaussianStream::new(cfg.seed, cfg.trajectory, Channel::Excess, (excess * 0.5 / dt).sqrt());
            values.iter_mut().for_each(|v| *v += noise.next());
        }
        let series = TimeSeries::new(header, dt, values);
        let mut w = create(path)?;
        series.write(&mut w, r.format).map_err(|e| match e {
            Error::Io(e) => io_error(path, e),
            other => other,
        })
    };

    let mut report = Report::new(r.header());
    report
        .section("run")
        .value("samples", sim.samples)
        .value("dt", dt)
        .value("duration_s", sim.samples as f64 * dt)
        .value("integrator", &sim.integrator)
        .value("theta_offset", sim.theta_offset)
        .value("format", ext);
    report.section("params");
    let mut ph = Header::default();
    params_header(&mut ph, &params);
    for (k, v) in ph.entries() {
        report.value(k, v);
    }
    report.section("records");

    let mut photocurrents = Vec::new();
    for (i, &theta) in angles.iter().enumerate() {
        let cfg = base.clone().with_trajectory(i as u64);
        let mut h = r.header();
        h.set("role", ROLE_PHOTOCURRENT)
            .set("theta", theta)
            .set("theta_offset", sim.theta_offset)
            .set("trajectory", i)
            .set("integrator", &sim.integrator);
        params_header(&mut h, &params);
        let mut excess = 0.0;
        if let Some(c) = &calib {
            let v_dc = c.v_dc(theta);
            let u = v_dc - c.v_off;
            excess = c.excess(u);
            if excess < 0.0 {
                return Err(Error::Configuration(format!(
                    "calibration background {:.4} at unbalance {u:.4} V lies below shot noise",
                    c.background(u)
                )));
            }
            h.set("v_dc", v_dc).set("unbalance", u).set("excess", excess);
        }
        let name = format!("photocurrent_{i:02}.{ext}");
        let path = dir.join(&name);
        record(
            &cfg,
            Synthesis::new(theta, params.eta_d).with_offset(sim.theta_offset),
            excess,
            h,
            &path,
        )?;
        report.value(&name, theta);
        photocurrents.push(path);
    }

    let reference = if sim.reference {
        let quiet = ModelParams::new(params.omega_m, params.gamma_m, 0.0, params.eta_d, params.n_bar)?;
        let cfg = SimConfig { params: quiet, ..base.clone() }.with_trajectory(angles.len() as u64);
        let mut h = r.header();
        h.set("role", ROLE_REFERENCE)
            .set("theta", 0.0)
            .set("trajectory", angles.len())
            .set("integrator", &sim.integrator);
        params_header(&mut h, &quiet);
        let name = format!("shot_reference.{ext}");
        let path = dir.join(&name);
        record(&cfg, Synthesis::new(0.0, params.eta_d), 0.0, h, &path)?;
        report.value(&name, "reference");
        Some(path)
    } else {
        None
    };

    let report_path = dir.join("simulation_report.txt");
    write_text(&report_path, &report.render())?;
    Ok(Records {
        photocurrents,
        reference,
        report: report_path,
    })
}
