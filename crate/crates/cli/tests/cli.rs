use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ponderomotive::io::{read_spectrum, write_spectrum, Header, Report, TimeSeries};
use ponderomotive::model::HBAR;
use ponderomotive::spectral::Spectrum;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ponderomotive"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn report_value(file: &Path, key: &str) -> f64 {
    let text = std::fs::read_to_string(file).unwrap();
    Report::parse_value(&text, key)
        .unwrap_or_else(|| panic!("{key} missing from {}", file.display()))
        .0
}

fn files_in(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(files_in(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

/// Header lines of a text output, or the embedded header of a binary one.
fn header_text(file: &Path) -> String {
    let bytes = std::fs::read(file).unwrap();
    if bytes.starts_with(b"PSQTS001") {
        let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        return String::from_utf8(bytes[12..12 + n].to_vec()).unwrap();
    }
    String::from_utf8_lossy(&bytes)
        .lines()
        .take_while(|l| l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

fn assert_provenance(dir: &Path, seed: u64) {
    let files = files_in(dir);
    assert!(!files.is_empty());
    for f in files {
        if f.extension().is_some_and(|e| e == "toml") {
            continue;
        }
        let h = header_text(&f);
        assert!(h.contains(&format!("# version = {}", env!("CARGO_PKG_VERSION"))), "{}", f.display());
        assert!(h.contains("# config_hash = "), "{}", f.display());
        assert!(h.contains(&format!("# seed = {seed}")), "{}", f.display());
    }
}

#[test]
fn simulate_one_angle_csv() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sim");
    let cfg = write_config(dir.path(), "[sim]\nsamples = 100000\n");
    let o = run(&[
        "simulate", "--preset", "paper-2021", "--config", path(&cfg), "--angles", "0.9pi", "--format", "csv",
        "--seed", "17", "--out", path(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let record = out.join("photocurrent_00.csv");
    let series = TimeSeries::read(std::fs::File::open(&record).unwrap()).unwrap();
    assert_eq!(series.values.len(), 100_000);
    assert!((series.header.get_f64("theta").unwrap() - 0.9 * PI).abs() < 1e-12);
    assert!(series.header.get_f64("dt").unwrap() > 0.0);
    assert!(out.join("shot_reference.csv").exists());
    let report = out.join("simulation_report.txt");
    assert_eq!(report_value(&report, "params.omega_m_hz"), 73.25e3);
    assert_eq!(report_value(&report, "params.gamma_m_hz"), 40.0);
    assert!((report_value(&report, "params.gamma_tot_hz") - 5.0e3).abs() < 1e-9);
    assert!((report_value(&report, "params.gamma_meas_hz") - 1.4e3).abs() < 1e-9);
    assert_eq!(report_value(&report, "run.samples"), 1e5);
    assert_provenance(&out, 17);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[sim]\nsamples = 20000\n");
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = run(&[
            "simulate", "--preset", "paper-2021", "--config", path(&cfg), "--angles", "0,pi/2,pi", "--seed", "5",
            "--out", path(&out),
        ]);
        assert_eq!(code(&o), 0);
        outputs.push(out);
    }
    let a = files_in(&outputs[0]);
    let b = files_in(&outputs[1]);
    assert_eq!(a.len(), 5);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
    }
    let other = dir.path().join("c");
    run(&[
        "simulate", "--preset", "paper-2021", "--config", path(&cfg), "--angles", "0,pi/2,pi", "--seed", "6",
        "--out", path(&other),
    ]);
    assert_ne!(
        std::fs::read(other.join("photocurrent_01.bin")).unwrap(),
        std::fs::read(outputs[0].join("photocurrent_01.bin")).unwrap()
    );
}

#[test]
fn pipeline_recovers_preset() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    let o = run(&["pipeline", "--preset", "paper-2021", "--seed", "3", "--out", path(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fit = out.join("fit_report.txt");
    let eta = report_value(&fit, "fit.eta_meas");
    assert!((eta - 0.28).abs() < 0.015, "η_meas = {eta}");
    for (key, truth) in [("gamma_m_hz", 40.0), ("gamma_tot_hz", 5e3), ("gamma_meas_hz", 1.4e3)] {
        let v = report_value(&fit, &format!("fit.{key}"));
        assert!((v / truth - 1.0).abs() < 0.05, "{key} = {v}");
    }
    let tomo = out.join("tomography_report.txt");
    let minor = report_value(&tomo, "mode_70.1khz.minor_variance");
    let theory = report_value(&tomo, "theory_70.1khz.minor_variance");
    assert!(minor < 0.5 && theory < 0.5, "{minor} vs theory {theory}");
    let vacuum = report_value(&tomo, "vacuum_70.1khz.var_x");
    assert!((vacuum / 0.5 - 1.0).abs() < 0.1, "{vacuum}");
    for tag in ["70.1khz", "77.1khz"] {
        assert!(out.join(format!("sinogram_{tag}.csv")).exists());
        assert!(out.join(format!("wigner_{tag}.csv")).exists());
    }
    let predicted = std::fs::read_to_string(out.join("predicted_psd.csv")).unwrap();
    assert!(predicted.lines().any(|l| l == "theta_rad,freq_hz,psd_sn_units"));
    assert_eq!(predicted.lines().filter(|l| !l.starts_with('#')).count(), 1 + 37 * 501);
    assert_provenance(&out, 3);
}

#[test]
fn vacuum_tomography_is_isotropic() {
    let dir = TempDir::new().unwrap();
    let sim = dir.path().join("sim");
    let cfg = write_config(
        dir.path(),
        "[params]\nomega_m_hz = 73.25e3\ngamma_m_hz = 40.0\neta_d = 0.3\ngamma_qba_hz = 0.0\nn_bar = 5.0\n\
         [sim]\nsamples = 2000000\nreference = false\n[tomography]\nchunk_duration = 0.001\n",
    );
    let common = ["--config", path(&cfg), "--seed", "9", "--angles", "0,0.2pi,0.4pi,0.6pi,0.8pi,pi"];
    let o = run(&[&["simulate", "--out", path(&sim)][..], &common].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("tomo");
    let o = run(&[&["tomography", path(&sim), "--out", path(&out)][..], &common].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = out.join("tomography_report.txt");
    for tag in ["70.1khz", "77.1khz"] {
        let minor = report_value(&report, &format!("mode_{tag}.minor_variance"));
        let major = report_value(&report, &format!("mode_{tag}.major_variance"));
        assert!(minor > 0.8 * major, "{tag}: {minor} vs {major}");
        assert!((minor / 0.5 - 1.0).abs() < 0.15 && (major / 0.5 - 1.0).abs() < 0.15, "{minor}, {major}");
        assert_eq!(report_value(&report, &format!("vacuum_{tag}.var_x")), 0.5);
    }
}

#[test]
fn tomography_needs_five_angles() {
    let dir = TempDir::new().unwrap();
    let sim = dir.path().join("sim");
    let cfg = write_config(dir.path(), "[sim]\nsamples = 20000\n");
    let o = run(&[
        "simulate", "--preset", "paper-2021", "--config", path(&cfg), "--angles", "0,0.25pi,0.5pi,0.75pi",
        "--out", path(&sim),
    ]);
    assert_eq!(code(&o), 0);
    let o = run(&["tomography", path(&sim), "--out", path(&dir.path().join("t"))]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

/// Exact model spectra with the angle in the header.
fn spectrum_files(dir: &Path, count: usize) -> Vec<PathBuf> {
    let p = ponderomotive::model::paper_2021().spectral();
    (0..count)
        .map(|k| {
            let theta = 0.2 * PI + 0.15 * PI * k as f64;
            let freqs: Vec<f64> = (0..4000).map(|i| 55e3 + 10.0 * i as f64).collect();
            let values = freqs.iter().map(|f| p.psd(2.0 * PI * f, theta)).collect();
            let s = Spectrum::new(freqs, values).unwrap().with_theta(theta);
            let f = dir.join(format!("s{k}.csv"));
            write_spectrum(&mut std::fs::File::create(&f).unwrap(), &Header::default(), &s).unwrap();
            f
        })
        .collect()
}

#[test]
fn fit_of_model_spectra_reports_eta() {
    let dir = TempDir::new().unwrap();
    let files = spectrum_files(dir.path(), 4);
    let out = dir.path().join("fit");
    let mut args = vec!["fit", "--out", path(&out)];
    args.extend(files.iter().map(|f| path(f)));
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = out.join("fit_report.txt");
    assert!((report_value(&report, "fit.eta_meas") - 0.28).abs() < 1e-6);
    assert!((report_value(&report, "fit.gamma_tot_hz") / 5e3 - 1.0).abs() < 1e-6);
    let (_, back) = read_spectrum(std::fs::File::open(&files[0]).unwrap()).unwrap();
    assert!(back.theta_inferred.is_some());
}

#[test]
fn fit_error_classes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("fit");
    let o = run(&["fit", "--out", path(&out)]);
    assert_eq!(code(&o), 2);

    let files = spectrum_files(dir.path(), 3);
    let o = run(&["fit", "--out", path(&out), path(&files[0]), path(&files[1])]);
    assert_eq!(code(&o), 2);

    let cfg = write_config(dir.path(), "[fit]\nmax_iterations = 1\n");
    let mut args = vec!["fit", "--config", path(&cfg), "--out", path(&out)];
    args.extend(files.iter().map(|f| path(f)));
    let o = run(&args);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    let diag = std::fs::read_to_string(out.join("fit_diagnostics.txt")).unwrap();
    assert!(diag.contains("iterations = 1"));

    let o = run(&["fit", "--out", path(&out), path(&dir.path().join("missing.csv"))]);
    assert_eq!(code(&o), 5);
    let junk = dir.path().join("junk.csv");
    std::fs::write(&junk, "a,b\n1,2\n").unwrap();
    let o = run(&["fit", "--out", path(&out), path(&junk)]);
    assert_eq!(code(&o), 5);
}

#[test]
fn configuration_and_usage_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    assert_eq!(code(&run(&["simulate", "--preset", "paper-2021", "--angles", "4", "--out", path(&out)])), 3);
    assert_eq!(code(&run(&["simulate", "--preset", "paper-1999", "--out", path(&out)])), 3);
    assert_eq!(code(&run(&["simulate", "--out", path(&out)])), 3);
    let cfg = write_config(dir.path(), "[sim]\nunknown_key = 1\n");
    assert_eq!(code(&run(&["patterns", "--config", path(&cfg), "--out", path(&out)])), 3);
    assert_eq!(code(&run(&["simulate", "--format", "xml"])), 2);
    assert_eq!(code(&run(&["nonsense"])), 2);
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn patterns_and_limits() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("p");
    let o = run(&["patterns", "--out", path(&out), "--seed", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let limits = out.join("limits_report.txt");
    let target = HBAR * HBAR / (16.0 * PI * PI);
    for axis in ["x", "y", "z"] {
        let v = report_value(&limits, &format!("heisenberg.{axis}"));
        assert!((v / target - 1.0).abs() < 1e-12, "{axis}: {v}");
    }
    for kind in ["x", "y", "z", "dipole"] {
        assert!((report_value(&limits, &format!("integrals.{kind}")) - 1.0).abs() < 1e-6);
    }
    assert!((report_value(&limits, "trap_frequencies_hz.z") / 73.4e3 - 1.0).abs() < 0.01);
    assert_provenance(&out, 2);

    // Bare A = 0: ρ_z(θ) = ρ_z(π − θ).
    let cfg = write_config(dir.path(), "[patterns]\ngeometric_factor = 0.0\nbeta_sq = 2.5\ntheta_points = 31\nphi_points = 12\n");
    let bare = dir.path().join("bare");
    assert_eq!(code(&run(&["patterns", "--config", path(&cfg), "--out", path(&bare)])), 0);
    let text = std::fs::read_to_string(bare.join("patterns.csv")).unwrap();
    let z: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| l.starts_with("z,"))
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(z.len(), 31 * 12);
    for i in 0..31 {
        for j in 0..12 {
            let a = z[i * 12 + j][2];
            let b = z[(30 - i) * 12 + j][2];
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300), "θ index {i}: {a} vs {b}");
        }
    }
    let report = bare.join("limits_report.txt");
    assert!((report_value(&report, "integrals.z") - 2.5).abs() < 1e-6);
    assert!(Report::parse_value(&std::fs::read_to_string(report).unwrap(), "heisenberg.x").is_none());
}
