use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::Complex64;
use crate::spectral::Window;

/// Below this many chunks the histograms are too sparse to be trusted.
pub const MIN_CHUNKS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeConfig {
    /// Chunk duration T (s).
    pub chunk_duration: f64,
    pub center_freq_hz: f64,
    pub window: Window,
    /// Mechanical correlation time 1/γ_m (s); chunks shorter than this are
    /// flagged as correlated.
    pub correlation_time: Option<f64>,
}

impl ModeConfig {
    /// Hann window, T = 1/121 s.
    pub fn new(center_freq_hz: f64) -> Self {
        Self {
            chunk_duration: 1.0 / 121.0,
            center_freq_hz,
            window: Window::Hann,
            correlation_time: None,
        }
    }

    pub fn with_correlation_time(mut self, tau: f64) -> Self {
        self.correlation_time = Some(tau);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeWarning {
    /// T < 1/γ_m: consecutive samples are not independent.
    CorrelatedChunks { chunk_duration: f64, correlation_time: f64 },
    /// Fewer than [`MIN_CHUNKS`] chunks.
    FewChunks(usize),
}

impl fmt::Display for ModeWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeWarning::CorrelatedChunks {
                chunk_duration,
                correlation_time,
            } => write!(
                f,
                "chunk duration {chunk_duration:.3e} s is shorter than the correlation time {correlation_time:.3e} s; samples are correlated"
            ),
            ModeWarning::FewChunks(n) => write!(f, "only {n} chunks (< {MIN_CHUNKS}); statistics are poor"),
        }
    }
}

/// Complex amplitudes of one temporal mode, one per chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalModeSamples {
    /// Normalized so that unit-PSD white input gives variance 1/2 per component.
    pub samples: Vec<Complex64>,
    pub center_freq_hz: f64,
    pub chunk_duration: f64,
    pub theta: f64,
    pub warnings: Vec<ModeWarning>,
}

impl TemporalModeSamples {
    /// Sample variance of the pooled real and imaginary parts.
    pub fn pooled_variance(&self) -> f64 {
        let n = 2.0 * self.samples.len() as f64;
        let mean = self.samples.iter().map(|r| r.re + r.im).sum::<f64>() / n;
        self.samples
            .iter()
            .map(|r| (r.re - mean).powi(2) + (r.im - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0)
    }
}

/// Chunks a photocurrent as it arrives and emits one mode sample per
/// complete chunk.
#[derive(Debug, Clone)]
pub struct ModeExtractor {
    config: ModeConfig,
    /// w_k·e^{iΩt_k}·√(2dt/Σw²), t measured from the chunk centre.
    kernel: Vec<Complex64>,
    acc: Complex64,
    pos: usize,
    samples: Vec<Complex64>,
}

impl ModeExtractor {
    pub fn new(config: ModeConfig, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Usage(format!("dt must be positive, got {dt}")));
        }
        let nyquist = 0.5 / dt;
        if !(config.center_freq_hz > 0.0 && config.center_freq_hz < nyquist) {
            return Err(Error::Usage(format!(
                "mode frequency {} Hz must lie in (0, {nyquist}) Hz",
                config.center_freq_hz
            )));
        }
        let len = (config.chunk_duration / dt).round() as usize;
        if len < 2 {
            return Err(Error::Usage(format!(
                "chunk duration {} s spans fewer than two samples",
                config.chunk_duration
            )));
        }
        let window = config.window.coefficients(len);
        let norm = (2.0 * dt / window.iter().map(|w| w * w).sum::<f64>()).sqrt();
        let omega = 2.0 * PI * config.center_freq_hz;
        let center = 0.5 * (len - 1) as f64;
        let kernel = window
            .iter()
            .enumerate()
            .map(|(k, w)| Complex64::from_polar(norm * w, omega * (k as f64 - center) * dt))
            .collect();
        Ok(Self {
            config,
            kernel,
            acc: Complex64::new(0.0, 0.0),
            pos: 0,
            samples: Vec::new(),
        })
    }

    pub fn chunk_len(&self) -> usize {
        self.kernel.len()
    }

    #[inline]
    pub fn push_one(&mut self, x: f64) {
        self.acc += self.kernel[self.pos] * x;
        self.pos += 1;
        if self.pos == self.kernel.len() {
            self.samples.push(self.acc);
            self.acc = Complex64::new(0.0, 0.0);
            self.pos = 0;
        }
    }

    pub fn push(&mut self, data: &[f64]) {
        for x in data {
            self.push_one(*x);
        }
    }

    pub fn chunks(&self) -> usize {
        self.samples.len()
    }

    /// Completed samples; a trailing partial chunk is discarded.
    pub fn finish(self, theta: f64) -> TemporalModeSamples {
        let mut warnings = Vec::new();
        if let Some(tau) = self.config.correlation_time {
            if self.config.chunk_duration < tau {
                warnings.push(ModeWarning::CorrelatedChunks {
                    chunk_duration: self.config.chunk_duration,
                    correlation_time: tau,
                });
            }
        }
        if self.samples.len() < MIN_CHUNKS {
            warnings.push(ModeWarning::FewChunks(self.samples.len()));
        }
        TemporalModeSamples {
            samples: self.samples,
            center_freq_hz: self.config.center_freq_hz,
            chunk_duration: self.config.chunk_duration,
            theta,
            warnings,
        }
    }
}

/// Several modes of several simultaneous photocurrents, sharing one kernel
/// per mode frequency.
#[derive(Debug, Clone)]
pub struct ModeBank {
    extractors: Vec<ModeExtractor>,
    /// acc[mode][channel]
    acc: Vec<Vec<Complex64>>,
    samples: Vec<Vec<Vec<Complex64>>>,
    pos: usize,
    len: usize,
}

impl ModeBank {
    /// All `configs` must share the chunk duration.
    pub fn new(configs: &[ModeConfig], channels: usize, dt: f64) -> Result<Self> {
        let extractors = configs
            .iter()
            .map(|c| ModeExtractor::new(*c, dt))
            .collect::<Result<Vec<_>>>()?;
        let len = extractors.first().map(|e| e.chunk_len()).ok_or_else(|| {
            Error::Usage("at least one mode is required".into())
        })?;
        if extractors.iter().any(|e| e.chunk_len() != len) {
            return Err(Error::Usage("all modes in a bank must share the chunk duration".into()));
        }
        Ok(Self {
            acc: vec![vec![Complex64::new(0.0, 0.0); channels]; extractors.len()],
            samples: vec![vec![Vec::new(); channels]; extractors.len()],
            extractors,
            pos: 0,
            len,
        })
    }

    /// One sample from every channel at the same instant.
    #[inline]
    pub fn push_row(&mut self, row: &[f64]) {
        for (ex, acc) in self.extractors.iter().zip(self.acc.iter_mut()) {
            let k = ex.kernel[self.pos];
            for (a, x) in acc.iter_mut().zip(row) {
                *a += k * *x;
            }
        }
        self.pos += 1;
        if self.pos == self.len {
            for (acc, out) in self.acc.iter_mut().zip(self.samples.iter_mut()) {
                for (a, o) in acc.iter_mut().zip(out.iter_mut()) {
                    o.push(*a);
                    *a = Complex64::new(0.0, 0.0);
                }
            }
            self.pos = 0;
        }
    }

    pub fn chunk_len(&self) -> usize {
        self.len
    }

    pub fn chunks(&self) -> usize {
        self.samples.first().and_then(|m| m.first()).map_or(0, Vec::len)
    }

    /// result[mode][channel], with channel c labelled by `thetas[c]`.
    pub fn finish(self, thetas: &[f64]) -> Vec<Vec<TemporalModeSamples>> {
        self.extractors
            .into_iter()
            .zip(self.samples)
            .map(|(ex, per_channel)| {
                per_channel
                    .into_iter()
                    .zip(thetas)
                    .map(|(samples, theta)| {
                        let mut single = ex.clone();
                        single.samples = samples;
                        single.finish(*theta)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Splits `series` into chunks of duration T and projects each on the mode.
pub fn extract_modes(series: &[f64], dt: f64, theta: f64, config: &ModeConfig) -> Result<TemporalModeSamples> {
    let mut ex = ModeExtractor::new(*config, dt)?;
    if series.len() < ex.chunk_len() {
        return Err(Error::Usage(format!(
            "record of {} samples is shorter than one chunk ({} samples)",
            series.len(),
            ex.chunk_len()
        )));
    }
    ex.push(series);
    Ok(ex.finish(theta))
}
