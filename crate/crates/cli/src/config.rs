//! TOML run configuration, presets and the provenance hash.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use ponderomotive::io::{Format, Header};
use ponderomotive::langevin::{Integrator, MAX_STEP_PHASE};
use ponderomotive::model::{hz_to_rad, ModelParams, PhysicalParams, PAPER_2021_ETA_D, PAPER_2021_RATES_HZ};
use ponderomotive::spectral::{CalibrationModel, SHOT_NOISE_BAND_HZ};
use ponderomotive::tomography::{angle_grid, Pooling};
use ponderomotive::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const PRESET_PAPER_2021: &str = "paper-2021";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    /// Homodyne angles in rad, each in [0, π].
    pub angles: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    /// "csv" or "binary"; applies to time series.
    pub format: Option<String>,
    pub params: Option<ParamsConfig>,
    pub physical: Option<PhysicalConfig>,
    pub calibration: Option<CalibrationConfig>,
    pub sim: SimSection,
    pub fit: FitSection,
    pub tomography: TomographySection,
    pub patterns: PatternsSection,
}

/// Oscillator and measurement rates, in Hz (divided by 2π).
///
/// Either `gamma_tot_hz` and `gamma_meas_hz` (fit-style) or `gamma_qba_hz`
/// and `n_bar` must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub omega_m_hz: f64,
    pub gamma_m_hz: f64,
    pub eta_d: f64,
    pub gamma_tot_hz: Option<f64>,
    pub gamma_meas_hz: Option<f64>,
    pub gamma_qba_hz: Option<f64>,
    pub n_bar: Option<f64>,
    #[serde(default)]
    pub gamma_rp_hz: f64,
}

impl ParamsConfig {
    pub fn paper_2021() -> Self {
        let (om, g, tot, meas) = PAPER_2021_RATES_HZ;
        Self {
            omega_m_hz: om,
            gamma_m_hz: g,
            eta_d: PAPER_2021_ETA_D,
            gamma_tot_hz: Some(tot),
            gamma_meas_hz: Some(meas),
            gamma_qba_hz: None,
            n_bar: None,
            gamma_rp_hz: 0.0,
        }
    }

    pub fn to_model(&self) -> Result<ModelParams> {
        let om = hz_to_rad(self.omega_m_hz);
        let g = hz_to_rad(self.gamma_m_hz);
        let p = match (self.gamma_tot_hz, self.gamma_meas_hz, self.gamma_qba_hz, self.n_bar) {
            (Some(tot), Some(meas), None, None) => {
                ModelParams::from_fit_rates(om, g, hz_to_rad(tot), hz_to_rad(meas), self.eta_d)?
            }
            (None, None, Some(qba), Some(n)) => ModelParams::new(om, g, hz_to_rad(qba), self.eta_d, n)?,
            _ => {
                return Err(Error::Configuration(
                    "[params] needs either gamma_tot_hz and gamma_meas_hz, or gamma_qba_hz and n_bar".into(),
                ))
            }
        };
        if self.gamma_rp_hz != 0.0 {
            return p.with_radiation_pressure(hz_to_rad(self.gamma_rp_hz));
        }
        Ok(p)
    }
}

/// Particle and beam, SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConfig {
    pub mass: f64,
    pub polarizability: f64,
    pub field_amplitude: f64,
    pub waist_x: f64,
    pub waist_y: f64,
    pub rayleigh_range: f64,
    pub wavelength: f64,
}

impl PhysicalConfig {
    pub fn to_physical(&self) -> Result<PhysicalParams> {
        PhysicalParams::from_geometry(
            self.mass,
            self.polarizability,
            self.field_amplitude,
            self.waist_x,
            self.waist_y,
            self.rayleigh_range,
            self.wavelength,
        )
    }
}

/// Detector background versus unbalance and the DC angle monitor. When
/// present, simulated records carry the monitor voltage and the matching
/// excess noise; fit and tomography infer angles from the voltage and
/// subtract the background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub coefficients: [f64; 3],
    pub v_off: f64,
    pub v_amp: f64,
    pub range: [f64; 2],
}

impl CalibrationConfig {
    pub fn to_model(&self) -> Result<CalibrationModel> {
        CalibrationModel::new(self.coefficients, self.v_off, self.v_amp, (self.range[0], self.range[1]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub samples: usize,
    /// Seconds; defaults to the largest step allowed, 0.05/Ω_m.
    pub dt: Option<f64>,
    /// "exact" or "euler-maruyama".
    pub integrator: String,
    /// Constant angle error added at detection (rad).
    pub theta_offset: f64,
    pub reference: bool,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            samples: 8_000_000,
            dt: None,
            integrator: "exact".into(),
            theta_offset: 0.0,
            reference: true,
        }
    }
}

impl SimSection {
    pub fn integrator(&self) -> Result<Integrator> {
        match self.integrator.as_str() {
            "exact" => Ok(Integrator::Exact),
            "euler-maruyama" => Ok(Integrator::EulerMaruyama),
            other => Err(Error::Configuration(format!(
                "unknown integrator '{other}' (expected exact or euler-maruyama)"
            ))),
        }
    }

    pub fn dt(&self, params: &ModelParams) -> f64 {
        self.dt.unwrap_or(MAX_STEP_PHASE / params.omega_m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    /// Welch bin width for time-series inputs.
    pub resolution_hz: f64,
    pub band_hz: Option<[f64; 2]>,
    pub reference_band_hz: [f64; 2],
    /// Frequency span of the calibrated spectra written alongside the fit.
    pub export_band_hz: [f64; 2],
    pub max_iterations: usize,
    pub guess_gamma_m_hz: f64,
    pub guess_gamma_tot_hz: f64,
    pub guess_gamma_meas_hz: f64,
    /// Predicted-PSD grid size.
    pub grid_angles: usize,
    pub grid_points: usize,
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            resolution_hz: 10.0,
            band_hz: None,
            reference_band_hz: [SHOT_NOISE_BAND_HZ.0, SHOT_NOISE_BAND_HZ.1],
            export_band_hz: [0.0, 200e3],
            max_iterations: 200,
            guess_gamma_m_hz: 60.0,
            guess_gamma_tot_hz: 3e3,
            guess_gamma_meas_hz: 0.8e3,
            grid_angles: 37,
            grid_points: 501,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomographySection {
    pub modes_hz: Vec<f64>,
    pub chunk_duration: f64,
    pub bins: usize,
    /// Histogram half-range in units of the largest quadrature s.d.
    pub range_sd: f64,
    pub grid: usize,
    pub iterations: usize,
    pub relaxation: f64,
    pub nonnegative: bool,
    /// "both", "real" or "imaginary".
    pub pooling: String,
}

impl Default for TomographySection {
    fn default() -> Self {
        Self {
            modes_hz: vec![70.1e3, 77.1e3],
            chunk_duration: 1.0 / 121.0,
            bins: 80,
            range_sd: 4.0,
            grid: 128,
            iterations: 10,
            relaxation: 0.3,
            nonnegative: false,
            pooling: "both".into(),
        }
    }
}

impl TomographySection {
    pub fn pooling(&self) -> Result<Pooling> {
        match self.pooling.as_str() {
            "both" => Ok(Pooling::Both),
            "real" => Ok(Pooling::Real),
            "imaginary" => Ok(Pooling::Imaginary),
            other => Err(Error::Configuration(format!(
                "unknown pooling '{other}' (expected both, real or imaginary)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatternsSection {
    pub beta_sq: f64,
    /// Bare geometric factor A; overrides the value derived from [physical].
    pub geometric_factor: Option<f64>,
    pub theta_points: usize,
    pub phi_points: usize,
    /// Quadrature resolution of the solid-angle integrals.
    pub resolution: usize,
}

impl Default for PatternsSection {
    fn default() -> Self {
        Self {
            beta_sq: 1.0,
            geometric_factor: None,
            theta_points: 91,
            phi_points: 180,
            resolution: 512,
        }
    }
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub angles: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
}

/// Configuration after presets, overrides and defaults are applied.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub hash: String,
    pub seed: u64,
    pub out: PathBuf,
    pub format: Format,
}

impl Resolved {
    pub fn load(path: Option<&Path>, overrides: Overrides) -> Result<Self> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display()))))?;
                toml::from_str(&text).map_err(|e| Error::Configuration(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if overrides.preset.is_some() {
            config.preset = overrides.preset;
        }
        if overrides.seed.is_some() {
            config.seed = overrides.seed;
        }
        if overrides.angles.is_some() {
            config.angles = overrides.angles;
        }
        if overrides.out.is_some() {
            config.out = overrides.out;
        }
        if overrides.format.is_some() {
            config.format = overrides.format;
        }
        Self::resolve(config)
    }

    pub fn resolve(mut config: RunConfig) -> Result<Self> {
        match config.preset.as_deref() {
            None => {}
            Some(PRESET_PAPER_2021) => {
                if config.params.is_none() {
                    config.params = Some(ParamsConfig::paper_2021());
                }
            }
            Some(other) => {
                return Err(Error::Configuration(format!(
                    "unknown preset '{other}' (available: {PRESET_PAPER_2021})"
                )))
            }
        }
        if let Some(angles) = &config.angles {
            if let Some(a) = angles.iter().find(|a| !(0.0..=PI).contains(*a)) {
                return Err(Error::Configuration(format!("angle {a} rad lies outside [0, π]")));
            }
        }
        if let Some(p) = &config.params {
            p.to_model()?;
        }
        if let Some(p) = &config.physical {
            p.to_physical()?;
        }
        if let Some(c) = &config.calibration {
            c.to_model()?;
        }
        config.sim.integrator()?;
        config.tomography.pooling()?;
        let format: Format = match config.format.as_deref() {
            None => Format::default(),
            Some(f) => f.parse().map_err(|_| {
                Error::Configuration(format!("unknown format '{f}' (expected csv or binary)"))
            })?,
        };
        let seed = config.seed.unwrap_or(1);
        config.seed = Some(seed);
        let out = config.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        let hash = config_hash(&config)?;
        Ok(Self {
            config,
            hash,
            seed,
            out,
            format,
        })
    }

    pub fn header(&self) -> Header {
        Header::new(VERSION, &self.hash, self.seed)
    }

    /// Model parameters, required by simulation.
    pub fn params(&self) -> Result<ModelParams> {
        self.config
            .params
            .as_ref()
            .ok_or_else(|| Error::Configuration("no model parameters: give [params] or --preset paper-2021".into()))?
            .to_model()
    }

    /// Angles to simulate; ten evenly spaced over [0, π] unless given.
    pub fn angles(&self) -> Vec<f64> {
        self.config.angles.clone().unwrap_or_else(|| angle_grid(10))
    }

    pub fn calibration(&self) -> Result<Option<CalibrationModel>> {
        self.config.calibration.as_ref().map(CalibrationConfig::to_model).transpose()
    }
}

/// SHA-256 of the resolved configuration in canonical TOML. The output
/// directory is left out so identical runs in different places match.
fn config_hash(config: &RunConfig) -> Result<String> {
    let mut c = config.clone();
    c.out = None;
    let text = toml::to_string(&c).map_err(|e| Error::Configuration(format!("cannot serialize config: {e}")))?;
    let digest = Sha256::digest(text.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Parses a comma-separated angle list. Entries are radians, optionally
/// written as multiples of π: `0.25pi`, `pi/4`, `pi`.
pub fn parse_angles(text: &str) -> std::result::Result<Vec<f64>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_angle)
        .collect()
}

fn parse_angle(s: &str) -> std::result::Result<f64, String> {
    let bad = || format!("cannot read angle '{s}'");
    let lower = s.to_ascii_lowercase();
    if let Some(rest) = lower.strip_prefix("pi") {
        return match rest.strip_prefix('/') {
            Some(d) => d.parse::<f64>().map(|d| PI / d).map_err(|_| bad()),
            None if rest.is_empty() => Ok(PI),
            None => Err(bad()),
        };
    }
    if let Some(k) = lower.strip_suffix("pi") {
        return k.trim_end_matches('*').parse::<f64>().map(|k| k * PI).map_err(|_| bad());
    }
    lower.parse().map_err(|_| bad())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_syntax() {
        let a = parse_angles("0, 0.25pi, pi/2, pi, 1.5").unwrap();
        assert_eq!(a, vec![0.0, 0.25 * PI, PI / 2.0, PI, 1.5]);
        assert!(parse_angles("x").is_err());
        assert!(parse_angles("pix").is_err());
    }

    #[test]
    fn preset_fills_params() {
        let r = Resolved::resolve(RunConfig {
            preset: Some(PRESET_PAPER_2021.into()),
            ..Default::default()
        })
        .unwrap();
        let rates = r.params().unwrap().rates();
        assert!((rates.eta_meas - 0.28).abs() < 1e-12);
    }

    #[test]
    fn hash_ignores_output_directory() {
        let a = Resolved::resolve(RunConfig {
            out: Some("a".into()),
            ..Default::default()
        })
        .unwrap();
        let b = Resolved::resolve(RunConfig {
            out: Some("b".into()),
            ..Default::default()
        })
        .unwrap();
        let c = Resolved::resolve(RunConfig {
            seed: Some(7),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(a.hash, b.hash);
        assert_ne!(a.hash, c.hash);
    }

    #[test]
    fn rejects_bad_values() {
        let angles = RunConfig {
            angles: Some(vec![4.0]),
            ..Default::default()
        };
        assert!(matches!(Resolved::resolve(angles), Err(Error::Configuration(_))));
        let preset = RunConfig {
            preset: Some("nope".into()),
            ..Default::default()
        };
        assert!(matches!(Resolved::resolve(preset), Err(Error::Configuration(_))));
        let text = "[params]\nomega_m_hz = 1e4\ngamma_m_hz = 10\neta_d = 0.5\n";
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert!(Resolved::resolve(cfg).is_err());
    }
}
