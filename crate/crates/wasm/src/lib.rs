//! Browser bindings for the demo page in `www/`.
//!
//! Rates are passed in Hz (divided by 2π) and angles in rad. The plain
//! functions in [`demo`] carry the logic and are what the native tests
//! exercise; the `#[wasm_bindgen]` wrappers only convert errors.

use wasm_bindgen::prelude::*;

pub mod demo {
    use std::f64::consts::PI;

    use ponderomotive::model::{hz_to_rad, optimal_squeezing, radiation_pattern, PatternKind, SpectralParams};
    use ponderomotive::tomography::theoretical_covariance;

    pub fn params(omega_m_hz: f64, gamma_m_hz: f64, gamma_tot_hz: f64, gamma_meas_hz: f64) -> Result<SpectralParams, String> {
        let p = SpectralParams {
            omega_m: hz_to_rad(omega_m_hz),
            gamma_m: hz_to_rad(gamma_m_hz),
            gamma_tot: hz_to_rad(gamma_tot_hz),
            gamma_meas: hz_to_rad(gamma_meas_hz),
        };
        p.validate().map_err(|e| e.to_string())?;
        Ok(p)
    }

    /// PSD in shot-noise units at `points` frequencies from `f_lo` to `f_hi` Hz.
    pub fn homodyne_spectrum(p: &SpectralParams, theta: f64, f_lo: f64, f_hi: f64, points: usize) -> Vec<f64> {
        let n = points.max(2);
        (0..n)
            .map(|k| {
                let f = f_lo + (f_hi - f_lo) * k as f64 / (n - 1) as f64;
                p.psd(2.0 * PI * f, theta)
            })
            .collect()
    }

    /// [min PSD, frequency (Hz), angle (rad)] over Ω_m/2 … 3Ω_m/2.
    pub fn squeezing_optimum(p: &SpectralParams) -> [f64; 3] {
        let o = optimal_squeezing(p, 0.5 * p.omega_m, 1.5 * p.omega_m);
        [o.min_psd, o.omega / (2.0 * PI), o.theta]
    }

    /// [var_x, var_y, cov_xy, minor, major, tilt] of the mode at `mode_hz`.
    pub fn covariance_ellipse(p: &SpectralParams, mode_hz: f64) -> Result<[f64; 6], String> {
        let e = theoretical_covariance(mode_hz, p).map_err(|e| e.to_string())?;
        let (minor, major) = e.eigenvalues();
        Ok([e.var_x, e.var_y, e.cov_xy, minor, major, e.tilt()])
    }

    /// ρ along a full turn in the plane of azimuth φ: sample k sits at
    /// angle 2πk/points from the beam axis, with the second half of the turn
    /// on the opposite side (azimuth φ + π).
    pub fn radiation_pattern_polar(kind: &str, phi: f64, beta_sq: f64, a: f64, points: usize) -> Result<Vec<f64>, String> {
        let kind: PatternKind = kind.parse().map_err(|e: ponderomotive::Error| e.to_string())?;
        let n = points.max(4);
        Ok((0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                if t <= PI {
                    radiation_pattern(kind, t, phi, beta_sq, a)
                } else {
                    radiation_pattern(kind, 2.0 * PI - t, phi + PI, beta_sq, a)
                }
            })
            .collect())
    }
}

fn js_err(msg: String) -> JsError {
    JsError::new(&msg)
}

#[wasm_bindgen]
pub fn homodyne_spectrum(
    omega_m_hz: f64,
    gamma_m_hz: f64,
    gamma_tot_hz: f64,
    gamma_meas_hz: f64,
    theta: f64,
    f_lo: f64,
    f_hi: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    let p = demo::params(omega_m_hz, gamma_m_hz, gamma_tot_hz, gamma_meas_hz).map_err(js_err)?;
    Ok(demo::homodyne_spectrum(&p, theta, f_lo, f_hi, points))
}

#[wasm_bindgen]
pub fn squeezing_optimum(
    omega_m_hz: f64,
    gamma_m_hz: f64,
    gamma_tot_hz: f64,
    gamma_meas_hz: f64,
) -> Result<Vec<f64>, JsError> {
    let p = demo::params(omega_m_hz, gamma_m_hz, gamma_tot_hz, gamma_meas_hz).map_err(js_err)?;
    Ok(demo::squeezing_optimum(&p).to_vec())
}

#[wasm_bindgen]
pub fn covariance_ellipse(
    omega_m_hz: f64,
    gamma_m_hz: f64,
    gamma_tot_hz: f64,
    gamma_meas_hz: f64,
    mode_hz: f64,
) -> Result<Vec<f64>, JsError> {
    let p = demo::params(omega_m_hz, gamma_m_hz, gamma_tot_hz, gamma_meas_hz).map_err(js_err)?;
    demo::covariance_ellipse(&p, mode_hz).map(|e| e.to_vec()).map_err(js_err)
}

#[wasm_bindgen]
pub fn radiation_pattern_polar(kind: &str, phi: f64, beta_sq: f64, a: f64, points: usize) -> Result<Vec<f64>, JsError> {
    demo::radiation_pattern_polar(kind, phi, beta_sq, a, points).map_err(js_err)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::demo::*;

    fn paper() -> ponderomotive::model::SpectralParams {
        params(73.25e3, 40.0, 5e3, 1.4e3).unwrap()
    }

    #[test]
    fn spectrum_dips_below_shot_noise() {
        let s = homodyne_spectrum(&paper(), 0.9 * PI, 50e3, 100e3, 501);
        assert_eq!(s.len(), 501);
        assert!(s.iter().cloned().fold(f64::INFINITY, f64::min) < 1.0);
        let amplitude = homodyne_spectrum(&paper(), 0.0, 50e3, 100e3, 11);
        assert!(amplitude.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let [min, f, _] = squeezing_optimum(&paper());
        assert!((0.70..0.75).contains(&min) && f < 73.25e3, "{min} at {f}");
    }

    #[test]
    fn ellipse_is_squeezed_at_70_khz() {
        let e = covariance_ellipse(&paper(), 70.1e3).unwrap();
        assert!((e[0] - 0.5).abs() < 1e-12);
        assert!(e[3] < 0.5 && e[4] > 0.5);
        assert!(e[5] < 0.0);
        assert!(covariance_ellipse(&paper(), 77.1e3).unwrap()[5] > 0.0);
    }

    #[test]
    fn polar_pattern_is_continuous_and_symmetric() {
        let rho = radiation_pattern_polar("z", 0.3, 1.0, 0.0, 360).unwrap();
        assert_eq!(rho.len(), 360);
        // A = 0: forward and backward lobes match.
        for k in 1..180 {
            assert!((rho[k] - rho[180 - k]).abs() < 1e-12);
        }
        assert!(radiation_pattern_polar("w", 0.0, 1.0, 0.0, 8).is_err());
        assert!(params(73e3, -1.0, 5e3, 1e3).is_err());
    }
}
