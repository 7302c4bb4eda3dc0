use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use realfft::{RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;

use super::Spectrum;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    /// Periodic window of length `n`.
    pub fn coefficients(&self, n: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..n)
                .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos())
                .collect(),
            Window::Rectangular => vec![1.0; n],
        }
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hann" | "hanning" => Ok(Window::Hann),
            "rect" | "rectangular" | "boxcar" => Ok(Window::Rectangular),
            other => Err(Error::Usage(format!("unknown window '{other}'"))),
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Window::Hann => "hann",
            Window::Rectangular => "rectangular",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchConfig {
    pub segment_length: usize,
    /// Fractional overlap in [0, 1).
    pub overlap: f64,
    pub window: Window,
}

impl WelchConfig {
    pub fn new(segment_length: usize) -> Self {
        Self {
            segment_length,
            overlap: 0.5,
            window: Window::Hann,
        }
    }

    /// Smallest power-of-two segment whose bin width is ≤ `resolution_hz`.
    pub fn for_resolution(dt: f64, resolution_hz: f64) -> Self {
        let needed = (1.0 / (dt * resolution_hz)).ceil() as usize;
        Self::new(needed.max(2).next_power_of_two())
    }

    pub fn hop(&self) -> usize {
        let hop = (self.segment_length as f64 * (1.0 - self.overlap)).round() as usize;
        hop.clamp(1, self.segment_length)
    }

    fn validate(&self) -> Result<()> {
        if self.segment_length < 2 {
            return Err(Error::Usage("Welch segment length must be at least 2".into()));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::Usage(format!("overlap must lie in [0, 1), got {}", self.overlap)));
        }
        Ok(())
    }
}

/// Averaged periodogram that accepts data incrementally.
///
/// Each segment has its mean removed and is windowed before the transform.
/// Output is the one-sided PSD per Hz, so white noise of variance σ²
/// sampled at `dt` reads 2σ²dt.
pub struct WelchEstimator {
    config: WelchConfig,
    dt: f64,
    window: Vec<f64>,
    window_power: f64,
    fft: Arc<dyn RealToComplex<f64>>,
    pending: Vec<f64>,
    scratch_in: Vec<f64>,
    scratch_out: Vec<Complex64>,
    scratch_fft: Vec<Complex64>,
    accum: Vec<f64>,
    segments: usize,
}

impl fmt::Debug for WelchEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WelchEstimator")
            .field("config", &self.config)
            .field("dt", &self.dt)
            .field("segments", &self.segments)
            .finish()
    }
}

impl WelchEstimator {
    pub fn new(config: WelchConfig, dt: f64) -> Result<Self> {
        config.validate()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Usage(format!("dt must be positive, got {dt}")));
        }
        let n = config.segment_length;
        let window = config.window.coefficients(n);
        let window_power = window.iter().map(|w| w * w).sum();
        let fft = RealFftPlanner::<f64>::new().plan_fft_forward(n);
        let scratch_out = fft.make_output_vec();
        let scratch_fft = fft.make_scratch_vec();
        Ok(Self {
            config,
            dt,
            window,
            window_power,
            fft,
            pending: Vec::with_capacity(2 * n),
            scratch_in: vec![0.0; n],
            accum: vec![0.0; scratch_out.len()],
            scratch_out,
            scratch_fft,
            segments: 0,
        })
    }

    pub fn config(&self) -> &WelchConfig {
        &self.config
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn push(&mut self, data: &[f64]) {
        let n = self.config.segment_length;
        let mut rest = data;
        while !rest.is_empty() {
            let take = (n - self.pending.len()).min(rest.len());
            self.pending.extend_from_slice(&rest[..take]);
            rest = &rest[take..];
            if self.pending.len() == n {
                self.process_front();
                self.pending.drain(..self.config.hop());
            }
        }
    }

    #[inline]
    pub fn push_one(&mut self, x: f64) {
        self.pending.push(x);
        if self.pending.len() == self.config.segment_length {
            self.process_front();
            self.pending.drain(..self.config.hop());
        }
    }

    fn process_front(&mut self) {
        let n = self.config.segment_length;
        let seg = &self.pending[..n];
        let mean = seg.iter().sum::<f64>() / n as f64;
        for ((dst, x), w) in self.scratch_in.iter_mut().zip(seg).zip(&self.window) {
            *dst = (x - mean) * w;
        }
        self.fft
            .process_with_scratch(&mut self.scratch_in, &mut self.scratch_out, &mut self.scratch_fft)
            .expect("buffer sizes fixed at construction");
        for (a, z) in self.accum.iter_mut().zip(&self.scratch_out) {
            *a += z.norm_sqr();
        }
        self.segments += 1;
    }

    /// Averaged spectrum of all complete segments seen so far.
    pub fn spectrum(&self) -> Result<Spectrum> {
        if self.segments == 0 {
            return Err(Error::Usage(format!(
                "no complete segment of length {} was accumulated",
                self.config.segment_length
            )));
        }
        let n = self.config.segment_length;
        let df = 1.0 / (n as f64 * self.dt);
        let scale = 2.0 * self.dt / (self.window_power * self.segments as f64);
        let last = self.accum.len() - 1;
        let values = self
            .accum
            .iter()
            .enumerate()
            .map(|(k, a)| {
                // DC and (even-length) Nyquist bins are not folded.
                let fold = if k == 0 || (k == last && n % 2 == 0) { 0.5 } else { 1.0 };
                a * scale * fold
            })
            .collect();
        let freqs = (0..self.accum.len()).map(|k| k as f64 * df).collect();
        let mut spectrum = Spectrum::new(freqs, values)?;
        spectrum.averages = Some(self.segments);
        Ok(spectrum)
    }
}

/// One-sided Welch PSD of a complete series.
pub fn welch_psd(series: &[f64], dt: f64, segment_length: usize, overlap: f64, window: Window) -> Result<Spectrum> {
    if series.is_empty() {
        return Err(Error::Usage("cannot estimate the spectrum of an empty series".into()));
    }
    if segment_length > series.len() {
        return Err(Error::Usage(format!(
            "segment length {segment_length} exceeds series length {}",
            series.len()
        )));
    }
    let mut est = WelchEstimator::new(
        WelchConfig {
            segment_length,
            overlap,
            window,
        },
        dt,
    )?;
    est.push(series);
    est.spectrum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Channel, GaussianStream};

    fn white(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
        let mut g = GaussianStream::new(seed, 0, Channel::Loss, sigma);
        (0..n).map(|_| g.next()).collect()
    }

    #[test]
    fn white_noise_level_and_parseval() {
        let dt = 1e-6;
        let x = white(1 << 20, (0.5f64 / dt).sqrt(), 1);
        let s = welch_psd(&x, dt, 4096, 0.5, Window::Hann).unwrap();
        let inner = &s.values[10..s.values.len() - 10];
        let mean = inner.iter().sum::<f64>() / inner.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        let power: f64 = s.values.iter().sum::<f64>() * s.resolution();
        assert!((power / var - 1.0).abs() < 0.01, "{power} {var}");
    }

    #[test]
    fn sinusoid_power() {
        let dt = 1e-5;
        let a = 3.0;
        let n = 1 << 16;
        let f0 = 1234.5;
        let x: Vec<f64> = (0..n).map(|k| a * (2.0 * PI * f0 * k as f64 * dt).cos()).collect();
        let s = welch_psd(&x, dt, 8192, 0.5, Window::Hann).unwrap();
        let power: f64 = s.values.iter().sum::<f64>() * s.resolution();
        assert!((power / (a * a / 2.0) - 1.0).abs() < 1e-3, "{power}");
        let peak = s.values.iter().cloned().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        assert!((s.freqs[peak] - f0).abs() <= s.resolution());
    }

    #[test]
    fn streaming_matches_batch() {
        let x = white(50_000, 1.0, 2);
        let batch = welch_psd(&x, 1.0, 1000, 0.5, Window::Hann).unwrap();
        let mut est = WelchEstimator::new(WelchConfig::new(1000), 1.0).unwrap();
        for chunk in x.chunks(777) {
            est.push(chunk);
        }
        let mut one = WelchEstimator::new(WelchConfig::new(1000), 1.0).unwrap();
        for v in &x {
            one.push_one(*v);
        }
        assert_eq!(est.segments(), batch.averages.unwrap());
        assert_eq!(est.spectrum().unwrap(), batch);
        assert_eq!(one.spectrum().unwrap(), batch);
    }

    #[test]
    fn segment_count() {
        let x = vec![0.0; 10_000];
        let s = welch_psd(&x, 1.0, 1000, 0.5, Window::Rectangular).unwrap();
        assert_eq!(s.averages, Some(19));
        assert!(s.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(welch_psd(&[], 1.0, 8, 0.5, Window::Hann), Err(Error::Usage(_))));
        assert!(matches!(welch_psd(&[1.0; 4], 1.0, 8, 0.5, Window::Hann), Err(Error::Usage(_))));
        assert!(welch_psd(&[1.0; 16], 1.0, 8, 1.0, Window::Hann).is_err());
        assert!("kaiser".parse::<Window>().is_err());
    }

    #[test]
    fn resolution_rule() {
        let c = WelchConfig::for_resolution(1e-7, 50.0);
        assert_eq!(c.segment_length, 1 << 18);
        assert!(1.0 / (c.segment_length as f64 * 1e-7) <= 50.0);
    }
}
