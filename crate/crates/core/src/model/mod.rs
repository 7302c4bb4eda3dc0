//! Closed-form description of the levitated-particle measurement.
//!
//! Rates are angular (rad/s) throughout. Spectra are in shot-noise units:
//! the one-sided power spectral density of the homodyne photocurrent
//! divided by its vacuum floor.

mod patterns;
mod physical;

pub use patterns::{pattern_solid_angle_integral, radiation_pattern, PatternKind};
pub use physical::{
    heisenberg_product, imprecision_backaction, trap_frequencies, AxisTriplet, NoiseLimits,
    PhysicalParams, TrapFrequencies, EPSILON_0, HBAR, SPEED_OF_LIGHT,
};

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{ensure_domain, Result};

pub use rustfft::num_complex::Complex64;

/// Complex mechanical response, in units of the dimensionless oscillator.
pub type ComplexResponse = Complex64;

pub const TWO_PI: f64 = 2.0 * PI;

/// Converts a frequency in Hz to an angular frequency in rad/s.
#[inline]
pub fn hz_to_rad(hz: f64) -> f64 {
    TWO_PI * hz
}

#[inline]
pub fn rad_to_hz(rad: f64) -> f64 {
    rad / TWO_PI
}

/// Dimensionless dynamical model of the measured axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Mechanical resonance (rad/s).
    pub omega_m: f64,
    /// Mechanical damping, gas plus feedback (rad/s).
    pub gamma_m: f64,
    /// Quantum backaction decoherence rate (rad/s).
    pub gamma_qba: f64,
    /// Detection efficiency in [0, 1].
    pub eta_d: f64,
    /// Mean phonon occupancy of the effective bath.
    pub n_bar: f64,
    /// Scattering rate behind the static radiation-pressure offset (rad/s).
    pub gamma_rp: f64,
}

/// Derived decoherence and measurement rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementRates {
    pub gamma_tot: f64,
    pub gamma_meas: f64,
    pub eta_meas: f64,
}

impl ModelParams {
    pub fn new(omega_m: f64, gamma_m: f64, gamma_qba: f64, eta_d: f64, n_bar: f64) -> Result<Self> {
        let params = Self {
            omega_m,
            gamma_m,
            gamma_qba,
            eta_d,
            n_bar,
            gamma_rp: 0.0,
        };
        params.validate()?;
        Ok(params)
    }

    /// Builds a model reproducing the identifiable pair (Γ_tot, Γ_meas) for a
    /// chosen detection efficiency. The remaining freedom goes into n̄.
    pub fn from_fit_rates(
        omega_m: f64,
        gamma_m: f64,
        gamma_tot: f64,
        gamma_meas: f64,
        eta_d: f64,
    ) -> Result<Self> {
        ensure_domain(eta_d > 0.0 && eta_d <= 1.0, || {
            format!("eta_d must lie in (0, 1] to invert gamma_meas, got {eta_d}")
        })?;
        ensure_domain(gamma_m > 0.0, || format!("gamma_m must be positive, got {gamma_m}"))?;
        let gamma_qba = gamma_meas / eta_d;
        let n_bar = (gamma_tot - gamma_qba) / gamma_m - 0.5;
        ensure_domain(n_bar >= 0.0, || {
            format!(
                "gamma_tot = {gamma_tot} too small for gamma_meas = {gamma_meas} at eta_d = {eta_d} (n_bar = {n_bar})"
            )
        })?;
        Self::new(omega_m, gamma_m, gamma_qba, eta_d, n_bar)
    }

    pub fn with_radiation_pressure(mut self, gamma_rp: f64) -> Result<Self> {
        self.gamma_rp = gamma_rp;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_domain(self.omega_m.is_finite() && self.omega_m > 0.0, || {
            format!("omega_m must be positive, got {}", self.omega_m)
        })?;
        ensure_domain(self.gamma_m.is_finite() && self.gamma_m > 0.0, || {
            format!("gamma_m must be positive, got {}", self.gamma_m)
        })?;
        ensure_domain(self.gamma_qba.is_finite() && self.gamma_qba >= 0.0, || {
            format!("gamma_qba must be non-negative, got {}", self.gamma_qba)
        })?;
        ensure_domain((0.0..=1.0).contains(&self.eta_d), || {
            format!("eta_d must lie in [0, 1], got {}", self.eta_d)
        })?;
        ensure_domain(self.n_bar.is_finite() && self.n_bar >= 0.0, || {
            format!("n_bar must be non-negative, got {}", self.n_bar)
        })?;
        ensure_domain(self.gamma_rp.is_finite() && self.gamma_rp >= 0.0, || {
            format!("gamma_rp must be non-negative, got {}", self.gamma_rp)
        })
    }

    pub fn rates(&self) -> MeasurementRates {
        let gamma_tot = self.gamma_qba + self.gamma_m * (self.n_bar + 0.5);
        let gamma_meas = self.eta_d * self.gamma_qba;
        MeasurementRates {
            gamma_tot,
            gamma_meas,
            eta_meas: gamma_meas / gamma_tot,
        }
    }

    /// Reduces the model to the parameters the homodyne spectrum depends on.
    pub fn spectral(&self) -> SpectralParams {
        let rates = self.rates();
        SpectralParams {
            omega_m: self.omega_m,
            gamma_m: self.gamma_m,
            gamma_tot: rates.gamma_tot,
            gamma_meas: rates.gamma_meas,
        }
    }

    /// Static displacement produced by radiation pressure, q_eq = √(2Γ_qbaΓ_R)/Ω.
    pub fn equilibrium_shift(&self) -> f64 {
        (2.0 * self.gamma_qba * self.gamma_rp).sqrt() / self.omega_m
    }

    /// Steady-state variance of q (and of p): Γ_tot/γ_m.
    pub fn stationary_variance(&self) -> f64 {
        self.rates().gamma_tot / self.gamma_m
    }
}

/// The identifiable parameter set of the homodyne spectrum.
///
/// η_d and Γ_qba enter the spectrum only through Γ_meas = η_dΓ_qba, so fits
/// work on this reduced set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralParams {
    pub omega_m: f64,
    pub gamma_m: f64,
    pub gamma_tot: f64,
    pub gamma_meas: f64,
}

impl SpectralParams {
    pub fn validate(&self) -> Result<()> {
        ensure_domain(self.omega_m.is_finite() && self.omega_m > 0.0, || {
            format!("omega_m must be positive, got {}", self.omega_m)
        })?;
        ensure_domain(self.gamma_m.is_finite() && self.gamma_m > 0.0, || {
            format!("gamma_m must be positive, got {}", self.gamma_m)
        })?;
        ensure_domain(self.gamma_tot.is_finite() && self.gamma_tot > 0.0, || {
            format!("gamma_tot must be positive, got {}", self.gamma_tot)
        })?;
        ensure_domain(self.gamma_meas.is_finite() && self.gamma_meas >= 0.0, || {
            format!("gamma_meas must be non-negative, got {}", self.gamma_meas)
        })
    }

    pub fn eta_meas(&self) -> f64 {
        self.gamma_meas / self.gamma_tot
    }

    pub fn susceptibility(&self, omega: f64) -> ComplexResponse {
        chi(omega, self.omega_m, self.gamma_m)
    }

    /// Homodyne PSD in shot-noise units at angular frequency `omega` and
    /// local-oscillator phase `theta`.
    pub fn psd(&self, omega: f64, theta: f64) -> f64 {
        let chi = self.susceptibility(omega);
        let (s, c) = theta.sin_cos();
        1.0 + 16.0 * self.gamma_meas * self.gamma_tot * s * s * chi.norm_sqr()
            + 4.0 * self.gamma_meas * chi.re * (2.0 * s * c)
    }

    /// Imprecision and correlation parts of [`Self::psd`] separately.
    pub fn psd_terms(&self, omega: f64, theta: f64) -> (f64, f64) {
        let chi = self.susceptibility(omega);
        let (s, c) = theta.sin_cos();
        (
            16.0 * self.gamma_meas * self.gamma_tot * s * s * chi.norm_sqr(),
            4.0 * self.gamma_meas * chi.re * (2.0 * s * c),
        )
    }

    /// Minimum of the PSD over the LO phase at fixed `omega`, with the
    /// minimizing phase in [0, π).
    ///
    /// Writing S − 1 = a sin²θ + b sinθ cosθ gives the closed form
    /// min = 1 + (a − √(a² + b²))/2.
    pub fn min_over_theta(&self, omega: f64) -> (f64, f64) {
        let chi = self.susceptibility(omega);
        let a = 16.0 * self.gamma_meas * self.gamma_tot * chi.norm_sqr();
        let b = 8.0 * self.gamma_meas * chi.re;
        let value = 1.0 + 0.5 * (a - a.hypot(b));
        // (a/2)(1 − cos2θ) + (b/2) sin2θ is minimal where (cos2θ, sin2θ) ∥ (a, −b).
        let theta = 0.5 * (-b).atan2(a);
        (value, theta.rem_euclid(PI))
    }
}

#[inline]
fn chi(omega: f64, omega_m: f64, gamma_m: f64) -> ComplexResponse {
    let denom = Complex64::new(omega_m * omega_m - omega * omega, -gamma_m * omega);
    Complex64::new(omega_m, 0.0) / denom
}

/// χ(Ω) = Ω_m / (Ω_m² − Ω² − iγ_mΩ).
pub fn susceptibility(omega: f64, params: &ModelParams) -> Result<ComplexResponse> {
    params.validate()?;
    Ok(chi(omega, params.omega_m, params.gamma_m))
}

pub fn homodyne_psd(omega: f64, theta: f64, params: &ModelParams) -> Result<f64> {
    params.validate()?;
    Ok(params.spectral().psd(omega, theta))
}

pub fn measurement_rates(params: &ModelParams) -> Result<MeasurementRates> {
    params.validate()?;
    Ok(params.rates())
}

/// Global minimum of the homodyne PSD over frequency and phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezingOptimum {
    pub min_psd: f64,
    pub omega: f64,
    pub theta: f64,
}

/// Locates the deepest squeezing in `[omega_lo, omega_hi]`.
///
/// The phase is minimized in closed form; the frequency by a dense scan
/// followed by golden-section refinement.
pub fn optimal_squeezing(params: &SpectralParams, omega_lo: f64, omega_hi: f64) -> SqueezingOptimum {
    let scan = 20_000usize;
    let step = (omega_hi - omega_lo) / scan as f64;
    let f = |w: f64| params.min_over_theta(w).0;
    let mut best = (f64::INFINITY, omega_lo);
    for k in 0..=scan {
        let w = omega_lo + k as f64 * step;
        let v = f(w);
        if v < best.0 {
            best = (v, w);
        }
    }
    let (mut lo, mut hi) = ((best.1 - step).max(omega_lo), (best.1 + step).min(omega_hi));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let m1 = hi - inv_phi * (hi - lo);
        let m2 = lo + inv_phi * (hi - lo);
        if f(m1) < f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let omega = 0.5 * (lo + hi);
    let (min_psd, theta) = params.min_over_theta(omega);
    SqueezingOptimum {
        min_psd,
        omega,
        theta,
    }
}

/// Contiguous frequency interval around `omega_center` where the PSD at
/// fixed `theta` stays below shot noise, searched on a grid of `points`
/// within `[omega_lo, omega_hi]`. Returns `None` when the center itself is
/// not squeezed.
pub fn sub_shot_noise_band(
    params: &SpectralParams,
    theta: f64,
    omega_center: f64,
    omega_lo: f64,
    omega_hi: f64,
    points: usize,
) -> Option<(f64, f64)> {
    if params.psd(omega_center, theta) >= 1.0 {
        return None;
    }
    let step = (omega_hi - omega_lo) / (points - 1) as f64;
    let below = |w: f64| params.psd(w, theta) < 1.0;
    let start = ((omega_center - omega_lo) / step).round() as usize;
    let mut lo_idx = start.min(points - 1);
    while lo_idx > 0 && below(omega_lo + (lo_idx - 1) as f64 * step) {
        lo_idx -= 1;
    }
    let mut hi_idx = start.min(points - 1);
    while hi_idx + 1 < points && below(omega_lo + (hi_idx + 1) as f64 * step) {
        hi_idx += 1;
    }
    Some((omega_lo + lo_idx as f64 * step, omega_lo + hi_idx as f64 * step))
}

/// Phase-quadrature peak height 1 + 16Γ_measΓ_tot/γ_m² on resonance.
pub fn resonant_peak(params: &SpectralParams) -> f64 {
    params.psd(params.omega_m, FRAC_PI_2)
}

/// Published fit of the z-axis spectra, in Hz: (Ω_m, γ_m, Γ_tot, Γ_meas)/2π.
pub const PAPER_2021_RATES_HZ: (f64, f64, f64, f64) = (73.25e3, 40.0, 5.0e3, 1.4e3);

/// Detection efficiency assumed when splitting Γ_meas into η_d·Γ_qba.
pub const PAPER_2021_ETA_D: f64 = 0.30;

/// The `paper-2021` preset.
pub fn paper_2021() -> ModelParams {
    let (w, g, t, m) = PAPER_2021_RATES_HZ;
    ModelParams::from_fit_rates(hz_to_rad(w), hz_to_rad(g), hz_to_rad(t), hz_to_rad(m), PAPER_2021_ETA_D)
        .expect("preset rates are consistent")
}
