//! Angular photon densities of the interacting modes and of the dipole mode.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Which emission pattern to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PatternKind {
    /// Mode coupled to motion along x (the polarization axis).
    X,
    Y,
    /// Mode coupled to motion along the beam axis.
    Z,
    /// x-oriented dipole (Rayleigh scattering) mode.
    Dipole,
}

impl PatternKind {
    pub const ALL: [PatternKind; 4] = [Self::X, Self::Y, Self::Z, Self::Dipole];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::X => "x",
            Self::Y => "y",
            Self::Z => "z",
            Self::Dipole => "dipole",
        }
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PatternKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(Self::X),
            "y" => Ok(Self::Y),
            "z" => Ok(Self::Z),
            "dipole" | "0" | "rayleigh" => Ok(Self::Dipole),
            other => Err(Error::Usage(format!(
                "unknown pattern axis '{other}' (expected x, y, z or dipole)"
            ))),
        }
    }
}

/// Photon density per steradian along polar angle `theta` (from the beam
/// axis) and azimuth `phi`, for a mode holding `beta_sq` photons.
pub fn radiation_pattern(kind: PatternKind, theta: f64, phi: f64, beta_sq: f64, a: f64) -> f64 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let along_x = cp * cp * st * st;
    // Transverse projection of the x polarization.
    let polarization = (1.0 - along_x).max(0.0);
    let density = match kind {
        PatternKind::X => 15.0 / (8.0 * PI) * polarization * along_x,
        PatternKind::Y => 15.0 / (16.0 * PI) * polarization * sp * sp * st * st,
        PatternKind::Z => {
            15.0 / (8.0 * PI * (2.0 + 5.0 * a * a)) * polarization * (ct - a) * (ct - a)
        }
        PatternKind::Dipole => 3.0 / (8.0 * PI) * polarization,
    };
    beta_sq * density
}

/// Integrates a pattern over the full sphere.
///
/// Composite Simpson in the polar angle (`resolution` intervals, rounded up
/// to even) and the periodic trapezoid rule in azimuth (`resolution`
/// points), which is exact for the trigonometric polynomials involved.
pub fn pattern_solid_angle_integral(kind: PatternKind, beta_sq: f64, a: f64, resolution: usize) -> f64 {
    let n_phi = resolution.max(16);
    let n_theta = {
        let n = resolution.max(16);
        n + n % 2
    };
    let h_theta = PI / n_theta as f64;
    let h_phi = 2.0 * PI / n_phi as f64;
    let ring = |theta: f64| -> f64 {
        let s: f64 = (0..n_phi)
            .map(|j| radiation_pattern(kind, theta, j as f64 * h_phi, beta_sq, a))
            .sum();
        s * h_phi * theta.sin()
    };
    let mut total = ring(0.0) + ring(PI);
    for i in 1..n_theta {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        total += w * ring(i as f64 * h_theta);
    }
    total * h_theta / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn vanishes_along_polarization() {
        for kind in PatternKind::ALL {
            for a in [0.0, 0.4, 1.0] {
                assert!(radiation_pattern(kind, FRAC_PI_2, 0.0, 1.0, a).abs() < 1e-30);
            }
        }
    }

    #[test]
    fn closed_form_points() {
        let y = radiation_pattern(PatternKind::Y, FRAC_PI_2, FRAC_PI_2, 1.0, 0.3);
        assert!((y - 15.0 / (16.0 * PI)).abs() < 1e-15);
        for a in [0.0, 0.5, 0.9] {
            let z = radiation_pattern(PatternKind::Z, PI, 0.0, 1.0, a);
            let expected = 15.0 * (1.0 + a) * (1.0 + a) / (8.0 * PI * (2.0 + 5.0 * a * a));
            assert!((z - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn z_pattern_fore_aft_symmetric_without_gouy_factor() {
        for k in 0..20 {
            let theta = 0.05 + 0.07 * k as f64;
            let phi = 0.3 * k as f64;
            let fwd = radiation_pattern(PatternKind::Z, theta, phi, 1.0, 0.0);
            let back = radiation_pattern(PatternKind::Z, PI - theta, phi, 1.0, 0.0);
            assert!((fwd - back).abs() < 1e-15);
        }
    }

    #[test]
    fn non_negative() {
        for kind in PatternKind::ALL {
            for i in 0..40 {
                for j in 0..40 {
                    let v = radiation_pattern(kind, PI * i as f64 / 39.0, 2.0 * PI * j as f64 / 40.0, 2.0, 0.7);
                    assert!(v >= 0.0);
                }
            }
        }
    }

    #[test]
    fn empty_mode_integrates_to_zero() {
        assert_eq!(pattern_solid_angle_integral(PatternKind::Z, 0.0, 0.5, 64), 0.0);
    }

    #[test]
    fn unknown_axis_is_usage_error() {
        assert!(matches!("w".parse::<PatternKind>(), Err(Error::Usage(_))));
        assert_eq!("Dipole".parse::<PatternKind>().unwrap(), PatternKind::Dipole);
    }

    #[test]
    fn normalization_converges() {
        for kind in PatternKind::ALL {
            for a in [0.0, 0.5, 1.0] {
                let coarse = pattern_solid_angle_integral(kind, 1.0, a, 16);
                let fine = pattern_solid_angle_integral(kind, 1.0, a, 128);
                assert!((fine - 1.0).abs() <= (coarse - 1.0).abs() + 1e-12);
                assert!((fine - 1.0).abs() < 1e-6, "{kind} {a}: {fine}");
            }
        }
    }
}
