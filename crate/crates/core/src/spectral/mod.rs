//! Spectral estimation, shot-noise calibration and fitting of homodyne spectra.

mod fit;
mod welch;

pub use fit::{fit_multi, AngleRelation, Estimate, FitGuess, FitOptions, FitResult, SpectrumFit};
pub use welch::{welch_psd, WelchConfig, WelchEstimator, Window};

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::Range;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Band used for the shot-noise reference, in Hz.
pub const SHOT_NOISE_BAND_HZ: (f64, f64) = (75e3, 85e3);

/// PSD on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Hz, strictly increasing.
    pub freqs: Vec<f64>,
    /// One-sided PSD per Hz; shot-noise units once calibrated.
    pub values: Vec<f64>,
    /// Homodyne angle inferred from the DC monitor (rad).
    pub theta_inferred: Option<f64>,
    /// Detector unbalance at acquisition (V).
    pub unbalance_voltage: Option<f64>,
    /// Number of averaged segments, when known.
    pub averages: Option<usize>,
}

impl Spectrum {
    pub fn new(freqs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if freqs.len() != values.len() {
            return Err(Error::Usage(format!(
                "spectrum has {} frequencies but {} values",
                freqs.len(),
                values.len()
            )));
        }
        if freqs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Usage("spectrum frequencies must be strictly increasing".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Usage(format!("spectrum values must be finite and non-negative, found {v}")));
        }
        Ok(Self {
            freqs,
            values,
            theta_inferred: None,
            unbalance_voltage: None,
            averages: None,
        })
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta_inferred = Some(theta);
        self
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Spacing of the first two bins (Hz); zero for a single bin.
    pub fn resolution(&self) -> f64 {
        if self.freqs.len() < 2 {
            0.0
        } else {
            self.freqs[1] - self.freqs[0]
        }
    }

    /// Indices with lo ≤ f ≤ hi.
    pub fn band(&self, lo_hz: f64, hi_hz: f64) -> Range<usize> {
        let start = self.freqs.partition_point(|f| *f < lo_hz);
        let end = self.freqs.partition_point(|f| *f <= hi_hz);
        start..end.max(start)
    }

    pub fn band_mean(&self, lo_hz: f64, hi_hz: f64) -> Option<f64> {
        let r = self.band(lo_hz, hi_hz);
        if r.is_empty() {
            return None;
        }
        let n = r.len() as f64;
        Some(self.values[r].iter().sum::<f64>() / n)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut s = self.clone();
        s.values.iter_mut().for_each(|v| *v *= factor);
        s
    }

    fn same_grid(&self, other: &Spectrum) -> bool {
        self.freqs.len() == other.freqs.len()
            && self
                .freqs
                .iter()
                .zip(&other.freqs)
                .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0))
    }
}

/// Divides `spectrum` by the mean of `reference` over `band_hz`.
pub fn normalize_to_shot_noise(spectrum: &Spectrum, reference: &Spectrum, band_hz: (f64, f64)) -> Result<Spectrum> {
    if !spectrum.same_grid(reference) {
        return Err(Error::Usage("spectrum and shot-noise reference use different frequency grids".into()));
    }
    let level = reference.band_mean(band_hz.0, band_hz.1).ok_or_else(|| {
        Error::Usage(format!(
            "normalization band {}–{} Hz contains no bins",
            band_hz.0, band_hz.1
        ))
    })?;
    if !(level.is_finite() && level > 0.0) {
        return Err(Error::Calibration(format!("shot-noise reference level is {level}")));
    }
    let mut out = spectrum.clone();
    out.values.iter_mut().for_each(|v| *v /= level);
    Ok(out)
}

/// Relative background versus detector unbalance, plus the DC-monitor model
/// V_DC = V_off − V_amp·cos θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationModel {
    /// Background = c0 + c1·u + c2·u².
    pub coefficients: [f64; 3],
    pub v_off: f64,
    pub v_amp: f64,
    /// Unbalance interval covered by the calibration data (V).
    pub range: (f64, f64),
}

impl CalibrationModel {
    pub fn new(coefficients: [f64; 3], v_off: f64, v_amp: f64, range: (f64, f64)) -> Result<Self> {
        let model = Self {
            coefficients,
            v_off,
            v_amp,
            range,
        };
        model.validate()?;
        Ok(model)
    }

    /// Least-squares parabola through measured relative backgrounds.
    pub fn fit(unbalance: &[f64], background: &[f64], v_off: f64, v_amp: f64) -> Result<Self> {
        if unbalance.len() != background.len() {
            return Err(Error::Usage("unbalance and background lengths differ".into()));
        }
        let mut distinct: Vec<f64> = unbalance.to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < 3 {
            return Err(Error::Calibration("parabola fit needs at least three distinct unbalance values".into()));
        }
        let mut ata = Matrix3::zeros();
        let mut atb = Vector3::zeros();
        for (u, b) in unbalance.iter().zip(background) {
            let row = Vector3::new(1.0, *u, u * u);
            ata += row * row.transpose();
            atb += row * *b;
        }
        let c = ata
            .cholesky()
            .ok_or_else(|| Error::Calibration("parabola normal equations are singular".into()))?
            .solve(&atb);
        Self::new([c[0], c[1], c[2]], v_off, v_amp, (distinct[0], distinct[distinct.len() - 1]))
    }

    pub fn validate(&self) -> Result<()> {
        if self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Calibration("parabola coefficients must be finite".into()));
        }
        if !(self.v_amp.is_finite() && self.v_amp > 0.0 && self.v_off.is_finite()) {
            return Err(Error::Calibration(format!(
                "DC monitor needs finite v_off and positive v_amp, got {} and {}",
                self.v_off, self.v_amp
            )));
        }
        if !(self.range.0 <= self.range.1) {
            return Err(Error::Calibration("calibration range is empty".into()));
        }
        Ok(())
    }

    pub fn background(&self, unbalance: f64) -> f64 {
        let [c0, c1, c2] = self.coefficients;
        c0 + unbalance * (c1 + unbalance * c2)
    }

    /// Excess background relative to shot noise.
    pub fn excess(&self, unbalance: f64) -> f64 {
        self.background(unbalance) - 1.0
    }

    /// Largest |excess| over the calibrated range.
    pub fn max_correction(&self) -> f64 {
        let (lo, hi) = self.range;
        let mut worst = self.excess(lo).abs().max(self.excess(hi).abs());
        let c2 = self.coefficients[2];
        if c2 != 0.0 {
            let vertex = -self.coefficients[1] / (2.0 * c2);
            if (lo..=hi).contains(&vertex) {
                worst = worst.max(self.excess(vertex).abs());
            }
        }
        worst
    }

    pub fn in_range(&self, unbalance: f64) -> bool {
        (self.range.0..=self.range.1).contains(&unbalance)
    }

    /// DC monitor voltage expected at angle θ.
    pub fn v_dc(&self, theta: f64) -> f64 {
        self.v_off - self.v_amp * theta.cos()
    }
}

/// Outcome of a background correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Corrected {
    pub spectrum: Spectrum,
    /// Bins clipped at zero.
    pub floored: usize,
    /// The unbalance lay outside the calibrated range.
    pub extrapolated: bool,
}

/// Removes the excess background predicted by `calib` at `unbalance`.
pub fn subtract_classical_noise(spectrum: &Spectrum, calib: &CalibrationModel, unbalance: f64) -> Result<Corrected> {
    if !unbalance.is_finite() {
        return Err(Error::Usage(format!("unbalance voltage must be finite, got {unbalance}")));
    }
    let excess = calib.excess(unbalance);
    let mut out = spectrum.clone();
    let mut floored = 0;
    for v in out.values.iter_mut() {
        *v -= excess;
        if *v < 0.0 {
            *v = 0.0;
            floored += 1;
        }
    }
    out.unbalance_voltage = Some(unbalance);
    Ok(Corrected {
        spectrum: out,
        floored,
        extrapolated: !calib.in_range(unbalance),
    })
}

/// θ = arccos((v_off − v_dc)/v_amp) ∈ [0, π].
pub fn infer_angle(v_dc: f64, calib: &CalibrationModel) -> Result<f64> {
    calib.validate()?;
    let c = (calib.v_off - v_dc) / calib.v_amp;
    if !(c.abs() <= 1.0 + 1e-12) {
        return Err(Error::ParameterDomain(format!(
            "DC monitor reading {v_dc} V lies outside v_off ± v_amp = {} ± {}",
            calib.v_off, calib.v_amp
        )));
    }
    Ok(c.clamp(-1.0, 1.0).acos())
}

/// Amplitude A and zero θ₀ of amplitude(θ) = A·|sin(θ − θ₀)|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityFit {
    pub amplitude: f64,
    /// In (−π/2, π/2].
    pub theta_offset: f64,
    pub residual_rms: f64,
}

impl SensitivityFit {
    /// Angle of minimum response nearest π.
    pub fn minimum_near_pi(&self) -> f64 {
        PI + self.theta_offset
    }
}

pub fn sensitivity_curve(responses: &[(f64, f64)]) -> Result<SensitivityFit> {
    let degenerate = |reason: &str| Error::Fit {
        iterations: 0,
        cost: f64::NAN,
        reason: reason.to_string(),
    };
    if responses.len() < 4 {
        return Err(degenerate("sensitivity fit needs at least four angles"));
    }
    if responses.iter().any(|(t, a)| !(t.is_finite() && a.is_finite())) {
        return Err(degenerate("non-finite response data"));
    }
    if responses.iter().all(|(_, a)| *a == 0.0) {
        return Err(degenerate("all responses vanish"));
    }
    // For fixed θ₀ the best amplitude is linear; θ₀ is profiled.
    let profile = |theta0: f64| -> (f64, f64) {
        let (mut sy, mut ss) = (0.0, 0.0);
        for (t, a) in responses {
            let s = (t - theta0).sin().abs();
            sy += a * s;
            ss += s * s;
        }
        if ss == 0.0 {
            return (0.0, f64::INFINITY);
        }
        let amp = sy / ss;
        let cost = responses
            .iter()
            .map(|(t, a)| (a - amp * (t - theta0).sin().abs()).powi(2))
            .sum();
        (amp, cost)
    };
    let scan = 3600;
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..scan {
        let t0 = -FRAC_PI_2 + PI * (k as f64 + 0.5) / scan as f64;
        let c = profile(t0).1;
        if c < best.0 {
            best = (c, t0);
        }
    }
    let h = PI / scan as f64;
    let (mut lo, mut hi) = (best.1 - h, best.1 + h);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let m1 = hi - inv_phi * (hi - lo);
        let m2 = lo + inv_phi * (hi - lo);
        if profile(m1).1 < profile(m2).1 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let mut theta0 = 0.5 * (lo + hi);
    if theta0 <= -FRAC_PI_2 {
        theta0 += PI;
    } else if theta0 > FRAC_PI_2 {
        theta0 -= PI;
    }
    let (amplitude, cost) = profile(theta0);
    if !(amplitude > 0.0) {
        return Err(degenerate("responses do not determine an amplitude"));
    }
    Ok(SensitivityFit {
        amplitude,
        theta_offset: theta0,
        residual_rms: (cost / responses.len() as f64).sqrt(),
    })
}

/// Amplitude of the component of `series` at `freq_hz`, by projection onto
/// cos and sin over the whole record.
pub fn tone_amplitude(series: &[f64], dt: f64, freq_hz: f64) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::Usage("empty series".into()));
    }
    let w = 2.0 * PI * freq_hz * dt;
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    // Rotate a phasor instead of calling sin/cos per sample, renormalizing
    // periodically to keep it on the unit circle.
    let (s1, c1) = w.sin_cos();
    let (mut s, mut c) = (0.0f64, 1.0f64);
    for (k, x) in series.iter().enumerate() {
        let v = x - mean;
        re += v * c;
        im += v * s;
        let (ns, nc) = (s * c1 + c * s1, c * c1 - s * s1);
        s = ns;
        c = nc;
        if k % 4096 == 4095 {
            let r = (s * s + c * c).sqrt();
            s /= r;
            c /= r;
        }
    }
    Ok(2.0 * (re * re + im * im).sqrt() / series.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(level: f64) -> Spectrum {
        let freqs: Vec<f64> = (0..2000).map(|k| k as f64 * 100.0).collect();
        Spectrum::new(freqs, vec![level; 2000]).unwrap()
    }

    #[test]
    fn spectrum_invariants() {
        assert!(Spectrum::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(Spectrum::new(vec![1.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(Spectrum::new(vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
        let s = flat(2.0);
        assert_eq!(s.band(75e3, 85e3), 750..851);
        assert_eq!(s.band_mean(75e3, 85e3), Some(2.0));
        assert_eq!(s.band_mean(1e9, 2e9), None);
    }

    #[test]
    fn self_normalization_is_unity() {
        let mut s = flat(3.0);
        s.values[800] = 4.0;
        let n = normalize_to_shot_noise(&s, &s, SHOT_NOISE_BAND_HZ).unwrap();
        assert!((n.band_mean(75e3, 85e3).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn normalization_errors() {
        let s = flat(1.0);
        let zero = flat(0.0);
        assert!(matches!(
            normalize_to_shot_noise(&s, &zero, SHOT_NOISE_BAND_HZ),
            Err(Error::Calibration(_))
        ));
        assert!(matches!(normalize_to_shot_noise(&s, &s, (1e9, 2e9)), Err(Error::Usage(_))));
        let other = Spectrum::new(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(normalize_to_shot_noise(&s, &other, (0.0, 1.0)), Err(Error::Usage(_))));
    }

    #[test]
    fn balanced_correction_is_identity() {
        let calib = CalibrationModel::new([1.0, 0.0, 0.2], 1.0, 2.0, (-0.5, 0.5)).unwrap();
        let s = flat(0.8);
        let c = subtract_classical_noise(&s, &calib, 0.0).unwrap();
        assert_eq!(c.spectrum.values, s.values);
        assert_eq!(c.floored, 0);
        assert!(!c.extrapolated);
    }

    #[test]
    fn injected_excess_recovered() {
        let truth = CalibrationModel::new([1.0, 0.02, 0.15], 0.0, 1.0, (-0.5, 0.5)).unwrap();
        let us: Vec<f64> = (0..11).map(|k| -0.5 + 0.1 * k as f64).collect();
        let bg: Vec<f64> = us.iter().map(|u| truth.background(*u)).collect();
        let fitted = CalibrationModel::fit(&us, &bg, 0.0, 1.0).unwrap();
        for (a, b) in fitted.coefficients.iter().zip(truth.coefficients) {
            assert!((a - b).abs() < 1e-12);
        }
        let u = 0.5;
        let raw = flat(truth.background(u));
        let c = subtract_classical_noise(&raw, &fitted, u).unwrap();
        assert!(c.spectrum.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(truth.max_correction() <= 0.05);
    }

    #[test]
    fn floor_and_extrapolation_are_reported() {
        let calib = CalibrationModel::new([1.0, 0.0, 1.0], 0.0, 1.0, (-0.5, 0.5)).unwrap();
        let c = subtract_classical_noise(&flat(0.5), &calib, 0.9).unwrap();
        assert_eq!(c.floored, 2000);
        assert!(c.extrapolated);
        assert!(c.spectrum.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn parabola_needs_three_points() {
        assert!(CalibrationModel::fit(&[0.0, 0.0, 1.0], &[1.0, 1.0, 1.1], 0.0, 1.0).is_err());
    }

    #[test]
    fn angle_inference_examples() {
        let calib = CalibrationModel::new([1.0, 0.0, 0.0], 0.3, 1.2, (0.0, 0.0)).unwrap();
        assert!((infer_angle(0.3, &calib).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(infer_angle(0.3 - 1.2, &calib).unwrap(), 0.0);
        assert!((infer_angle(0.3 + 0.6, &calib).unwrap() - 2.0 * PI / 3.0).abs() < 1e-12);
        assert!(matches!(infer_angle(2.0, &calib), Err(Error::ParameterDomain(_))));
    }

    #[test]
    fn sensitivity_exact_samples() {
        let pts: Vec<(f64, f64)> = (0..12).map(|k| {
            let t = PI * k as f64 / 11.0;
            (t, 2.5 * t.sin().abs())
        }).collect();
        let fit = sensitivity_curve(&pts).unwrap();
        assert!(fit.theta_offset.abs() < 1e-7);
        assert!((fit.amplitude - 2.5).abs() < 1e-6);
        let peak = FRAC_PI_2 + fit.theta_offset;
        assert!((peak - FRAC_PI_2).abs() < 1e-6);
    }

    #[test]
    fn sensitivity_shifted_minimum() {
        let shift = -0.05 * PI;
        let pts: Vec<(f64, f64)> = (0..19).map(|k| {
            let t = PI * k as f64 / 18.0;
            (t, (t - shift).sin().abs())
        }).collect();
        let fit = sensitivity_curve(&pts).unwrap();
        assert!((fit.minimum_near_pi() - 0.95 * PI).abs() < 1e-6);
        assert!(sensitivity_curve(&pts[..3]).is_err());
        assert!(sensitivity_curve(&[(0.0, 0.0); 5]).is_err());
    }

    #[test]
    fn tone_projection() {
        let dt = 1e-6;
        let x: Vec<f64> = (0..200_000).map(|k| 0.7 * (2.0 * PI * 9e3 * k as f64 * dt + 0.4).cos() + 5.0).collect();
        let a = tone_amplitude(&x, dt, 9e3).unwrap();
        assert!((a - 0.7).abs() < 1e-6, "{a}");
    }
}
