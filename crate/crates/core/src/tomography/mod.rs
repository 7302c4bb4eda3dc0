//! Temporal-mode tomography of the detected light.
//!
//! A chunk of photocurrent of duration T, Hann-windowed and projected on
//! e^{iΩt}, gives one complex sample of the mode centred at Ω. Its real and
//! imaginary parts are two independent draws of the quadrature selected by
//! the homodyne angle. Histograms of those draws against angle form the
//! sinogram, which is inverted to a Wigner function.

mod modes;
mod reconstruct;

pub use modes::{extract_modes, ModeBank, ModeConfig, ModeExtractor, ModeWarning, TemporalModeSamples, MIN_CHUNKS};
pub use reconstruct::{fbp_reconstruct, forward_project, sart_reconstruct, SartOptions, SartReport, WignerGrid};

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::error::{Error, Result};
use crate::model::{SpectralParams, TWO_PI};

/// Vacuum variance of one quadrature.
pub const VACUUM_VARIANCE: f64 = 0.5;

/// Which components of the complex mode samples enter the histograms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pooling {
    #[default]
    Both,
    Real,
    Imaginary,
}

/// Quadrature histograms versus homodyne angle.
///
/// The column at angle θ is the marginal of the Wigner function along
/// s = x·cos θ − y·sin θ. With this orientation the paper-style cut formula
/// ⟨XY⟩ = (V(0) + V(π/2))/2 − V(π/4) holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    /// rad
    pub angles: Vec<f64>,
    /// bin_count + 1 edges, symmetric about zero.
    pub edges: Vec<f64>,
    /// density[angle][bin]; each column integrates to one.
    pub density: Vec<Vec<f64>>,
    /// Samples per column that fell outside the binned range.
    pub outside: Vec<usize>,
    /// Samples per column inside the range.
    pub counts: Vec<usize>,
}

impl Sinogram {
    pub fn bin_count(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    /// Half-width of the binned range.
    pub fn half_range(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    /// Empty-histogram layout with `bin_count` equal bins over ±`half_range`.
    pub fn layout(angles: Vec<f64>, bin_count: usize, half_range: f64) -> Result<Self> {
        if bin_count < 2 {
            return Err(Error::Usage("a sinogram needs at least two bins".into()));
        }
        if !(half_range.is_finite() && half_range > 0.0) {
            return Err(Error::Usage(format!("bin range must be positive, got {half_range}")));
        }
        let w = 2.0 * half_range / bin_count as f64;
        let edges = (0..=bin_count).map(|k| -half_range + k as f64 * w).collect();
        let m = angles.len();
        Ok(Self {
            angles,
            edges,
            density: vec![vec![0.0; bin_count]; m],
            outside: vec![0; m],
            counts: vec![0; m],
        })
    }

    /// Mean and variance of each column.
    pub fn column_moments(&self) -> Vec<(f64, f64)> {
        let centers = self.bin_centers();
        let w = self.bin_width();
        self.density
            .iter()
            .map(|col| {
                let mass: f64 = col.iter().sum::<f64>() * w;
                let mean = col.iter().zip(&centers).map(|(p, s)| p * s).sum::<f64>() * w / mass;
                let var = col
                    .iter()
                    .zip(&centers)
                    .map(|(p, s)| p * (s - mean) * (s - mean))
                    .sum::<f64>()
                    * w
                    / mass;
                (mean, var)
            })
            .collect()
    }

    /// Cut variances at 0, π/4 and π/2 from a least-squares fit of
    /// V(θ) = a + b·cos 2θ + c·sin 2θ over all columns.
    pub fn cut_variances(&self) -> Result<(f64, f64, f64)> {
        let vars: Vec<f64> = self.column_moments().into_iter().map(|m| m.1).collect();
        cut_variances_from(&self.angles, &vars)
    }
}

/// Least-squares harmonic fit of quadrature variances against angle,
/// evaluated at 0, π/4 and π/2.
pub fn cut_variances_from(angles: &[f64], variances: &[f64]) -> Result<(f64, f64, f64)> {
    if angles.len() != variances.len() || angles.len() < 3 {
        return Err(Error::Usage("need at least three (angle, variance) pairs".into()));
    }
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut atb = nalgebra::Vector3::<f64>::zeros();
    for (t, v) in angles.iter().zip(variances) {
        // Sign of the sin term follows the s = x cos θ − y sin θ orientation.
        let row = nalgebra::Vector3::new(1.0, (2.0 * t).cos(), -(2.0 * t).sin());
        ata += row * row.transpose();
        atb += row * *v;
    }
    let c = ata
        .cholesky()
        .ok_or_else(|| Error::Usage("angles do not determine the variance harmonics".into()))?
        .solve(&atb);
    let at = |t: f64| c[0] + c[1] * (2.0 * t).cos() - c[2] * (2.0 * t).sin();
    Ok((at(0.0), at(FRAC_PI_4), at(FRAC_PI_2)))
}

/// Histograms the samples of every angle into a common sinogram.
pub fn build_sinogram(
    modes: &[TemporalModeSamples],
    bin_count: usize,
    half_range: f64,
    pooling: Pooling,
) -> Result<Sinogram> {
    if modes.len() < 5 {
        return Err(Error::Usage(format!(
            "tomography needs at least 5 angles, got {}",
            modes.len()
        )));
    }
    let mut sino = Sinogram::layout(modes.iter().map(|m| m.theta).collect(), bin_count, half_range)?;
    let w = sino.bin_width();
    for (j, m) in modes.iter().enumerate() {
        let mut hist = vec![0usize; bin_count];
        let mut outside = 0;
        let mut add = |x: f64| {
            let u = (x + half_range) / w;
            if u >= 0.0 && u < bin_count as f64 {
                hist[u as usize] += 1;
            } else {
                outside += 1;
            }
        };
        for r in &m.samples {
            match pooling {
                Pooling::Both => {
                    add(r.re);
                    add(r.im);
                }
                Pooling::Real => add(r.re),
                Pooling::Imaginary => add(r.im),
            }
        }
        let inside: usize = hist.iter().sum();
        if inside == 0 {
            return Err(Error::Usage(format!(
                "no samples inside the binned range at angle {:.4} rad",
                m.theta
            )));
        }
        sino.density[j] = hist.iter().map(|c| *c as f64 / (inside as f64 * w)).collect();
        sino.counts[j] = inside;
        sino.outside[j] = outside;
    }
    Ok(sino)
}

/// Second moments of a Gaussian quasi-distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceEllipse {
    pub var_x: f64,
    pub var_y: f64,
    pub cov_xy: f64,
}

impl CovarianceEllipse {
    pub fn vacuum() -> Self {
        Self {
            var_x: VACUUM_VARIANCE,
            var_y: VACUUM_VARIANCE,
            cov_xy: 0.0,
        }
    }

    /// |cov| ≤ √(var_x·var_y) with positive diagonal.
    pub fn is_physical(&self) -> bool {
        self.var_x > 0.0 && self.var_y > 0.0 && self.cov_xy.abs() <= (self.var_x * self.var_y).sqrt()
    }

    /// (minor, major) principal variances.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.var_x + self.var_y);
        let half = (0.25 * (self.var_x - self.var_y).powi(2) + self.cov_xy * self.cov_xy).sqrt();
        (mean - half, mean + half)
    }

    /// Angle of the major axis from the x axis, in (−π/2, π/2].
    pub fn tilt(&self) -> f64 {
        0.5 * (2.0 * self.cov_xy).atan2(self.var_x - self.var_y)
    }

    /// Variance of the marginal along s = x cos θ − y sin θ.
    pub fn marginal_variance(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        c * c * self.var_x + s * s * self.var_y - 2.0 * s * c * self.cov_xy
    }
}

/// ⟨X²⟩ = V1, ⟨Y²⟩ = V3, ⟨XY⟩ = (V1 + V3)/2 − V2.
pub fn covariance_from_cuts(v1: f64, v2: f64, v3: f64) -> Result<CovarianceEllipse> {
    for (name, v) in [("V1", v1), ("V2", v2), ("V3", v3)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Usage(format!("{name} must be a positive variance, got {v}")));
        }
    }
    Ok(CovarianceEllipse {
        var_x: v1,
        var_y: v3,
        cov_xy: 0.5 * (v1 + v3) - v2,
    })
}

/// Ellipse predicted by the PSD model for the mode at `center_freq_hz`:
/// each cut variance is S(Ω, θ)/2.
pub fn theoretical_covariance(center_freq_hz: f64, params: &SpectralParams) -> Result<CovarianceEllipse> {
    params.validate()?;
    let w = TWO_PI * center_freq_hz;
    let v = |theta: f64| 0.5 * params.psd(w, theta);
    covariance_from_cuts(v(0.0), v(FRAC_PI_4), v(FRAC_PI_2))
}

/// `count` angles evenly spaced over [0, π], both ends included.
pub fn angle_grid(count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count).map(|k| PI * k as f64 / (count - 1) as f64).collect(),
    }
}
