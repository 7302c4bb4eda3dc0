use std::f64::consts::PI;

use crate::error::{ensure_domain, Result};

/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Vacuum permittivity (F/m).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Laboratory description of the particle and the focused trapping beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// kg
    pub mass: f64,
    /// C·m²/V
    pub polarizability: f64,
    /// Field amplitude at the focus (V/m).
    pub field_amplitude: f64,
    /// Beam radii at the focus (m).
    pub waist_x: f64,
    pub waist_y: f64,
    /// Effective Rayleigh range (m).
    pub rayleigh_range: f64,
    /// Wave number k₀ = 2π/λ₀ (1/m).
    pub wavenumber: f64,
    /// Power radiated by the induced dipole (W).
    pub scattered_power: f64,
    /// Gouy-phase geometric factor A.
    pub geometric_factor: f64,
}

impl PhysicalParams {
    /// Builds parameters from the beam geometry, deriving A = 1 − 1/(k₀z_R)
    /// and the dipole power P = ω₀⁴α²E₀²/(12πε₀c³).
    pub fn from_geometry(
        mass: f64,
        polarizability: f64,
        field_amplitude: f64,
        waist_x: f64,
        waist_y: f64,
        rayleigh_range: f64,
        wavelength: f64,
    ) -> Result<Self> {
        ensure_domain(wavelength > 0.0, || format!("wavelength must be positive, got {wavelength}"))?;
        let wavenumber = 2.0 * PI / wavelength;
        let omega0 = SPEED_OF_LIGHT * wavenumber;
        let scattered_power = omega0.powi(4) * polarizability.powi(2) * field_amplitude.powi(2)
            / (12.0 * PI * EPSILON_0 * SPEED_OF_LIGHT.powi(3));
        let params = Self {
            mass,
            polarizability,
            field_amplitude,
            waist_x,
            waist_y,
            rayleigh_range,
            wavenumber,
            scattered_power,
            geometric_factor: 1.0 - 1.0 / (wavenumber * rayleigh_range),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("polarizability", self.polarizability),
            ("field_amplitude", self.field_amplitude),
            ("waist_x", self.waist_x),
            ("waist_y", self.waist_y),
            ("rayleigh_range", self.rayleigh_range),
            ("wavenumber", self.wavenumber),
            ("scattered_power", self.scattered_power),
        ];
        for (name, value) in positive {
            ensure_domain(value.is_finite() && value > 0.0, || {
                format!("{name} must be strictly positive, got {value}")
            })?;
        }
        ensure_domain(self.geometric_factor.is_finite(), || {
            "geometric factor must be finite".to_string()
        })
    }

    /// A 100 nm silica sphere (ρ = 2200 kg/m³, ε_r = 2.1) in a 1550 nm
    /// tweezer with E₀ chosen so that Ω_z/2π ≈ 73 kHz. A self-consistent
    /// construction for examples, not a measured parameter set.
    pub fn silica_sphere_example() -> Self {
        let radius: f64 = 50e-9;
        let mass = 2200.0 * 4.0 / 3.0 * PI * radius.powi(3);
        let eps_r = 2.1;
        let alpha = 4.0 * PI * EPSILON_0 * radius.powi(3) * (eps_r - 1.0) / (eps_r + 2.0);
        Self::from_geometry(mass, alpha, 1.72e7, 0.8e-6, 0.9e-6, 1.5e-6, 1550e-9)
            .expect("example geometry is valid")
    }

    /// Laser angular frequency ω₀ = c·k₀.
    pub fn laser_angular_frequency(&self) -> f64 {
        SPEED_OF_LIGHT * self.wavenumber
    }
}

/// Per-axis values in (x, y, z) order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisTriplet {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl AxisTriplet {
    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Trap angular frequencies (rad/s).
pub type TrapFrequencies = AxisTriplet;

/// Ω_x² = αE₀²/(m w_x²), Ω_y² = αE₀²/(m w_y²), Ω_z² = αE₀²/(2m z_R²).
pub fn trap_frequencies(phys: &PhysicalParams) -> Result<TrapFrequencies> {
    phys.validate()?;
    let stiffness = phys.polarizability * phys.field_amplitude * phys.field_amplitude / phys.mass;
    Ok(AxisTriplet {
        x: (stiffness / (phys.waist_x * phys.waist_x)).sqrt(),
        y: (stiffness / (phys.waist_y * phys.waist_y)).sqrt(),
        z: (stiffness / (2.0 * phys.rayleigh_range * phys.rayleigh_range)).sqrt(),
    })
}

/// Symmetrized imprecision (m²/Hz) and photon-recoil (N²/Hz) spectral
/// densities for the three axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseLimits {
    pub imprecision: AxisTriplet,
    pub backaction: AxisTriplet,
}

/// Relative coupling strengths of the three interacting modes, (1, 2, 2+5A²).
fn coupling_weights(a: f64) -> [f64; 3] {
    [1.0, 2.0, 2.0 + 5.0 * a * a]
}

pub fn imprecision_backaction(phys: &PhysicalParams) -> Result<NoiseLimits> {
    phys.validate()?;
    let k0 = phys.wavenumber;
    let photon_rate = phys.scattered_power / (HBAR * phys.laser_angular_frequency());
    let imp_scale = 5.0 / (8.0 * PI) / (k0 * k0) / photon_rate;
    let ba_scale = 0.2 * HBAR * HBAR * k0 * k0 / (2.0 * PI) * photon_rate;
    let w = coupling_weights(phys.geometric_factor);
    // Imprecision scales inversely with the coupling, backaction directly.
    Ok(NoiseLimits {
        imprecision: AxisTriplet {
            x: imp_scale / w[0],
            y: imp_scale / w[1],
            z: imp_scale / w[2],
        },
        backaction: AxisTriplet {
            x: ba_scale * w[0],
            y: ba_scale * w[1],
            z: ba_scale * w[2],
        },
    })
}

/// S_imp·S_FF per axis; equals ħ²/(16π²) on every axis.
pub fn heisenberg_product(phys: &PhysicalParams) -> Result<AxisTriplet> {
    let limits = imprecision_backaction(phys)?;
    Ok(AxisTriplet {
        x: limits.imprecision.x * limits.backaction.x,
        y: limits.imprecision.y * limits.backaction.y,
        z: limits.imprecision.z * limits.backaction.z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn representative() -> PhysicalParams {
        PhysicalParams::silica_sphere_example()
    }

    #[test]
    fn trap_frequencies_representative() {
        let phys = representative();
        let f = trap_frequencies(&phys).unwrap();
        // Hand arithmetic: m = 1.1519e-18 kg, α = 3.7314e-33 C·m²/V,
        // Ω_z² = αE₀²/(2m z_R²) = 2.1296e11 → Ω_z/2π = 73.446 kHz.
        let fz = f.z / (2.0 * PI);
        assert!((fz - 73_446.38).abs() < 0.1, "fz = {fz}");
        assert!(f.x > f.y && f.y > f.z);
    }

    #[test]
    fn symmetric_beam_and_field_scaling() {
        let mut phys = representative();
        phys.waist_y = phys.waist_x;
        let f = trap_frequencies(&phys).unwrap();
        assert_eq!(f.x, f.y);
        let mut doubled = phys;
        doubled.field_amplitude *= 2.0;
        let g = trap_frequencies(&doubled).unwrap();
        for (a, b) in f.as_array().iter().zip(g.as_array()) {
            assert!((b / a - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn nonpositive_geometry_rejected() {
        let mut phys = representative();
        phys.rayleigh_range = 0.0;
        assert!(trap_frequencies(&phys).is_err());
        phys = representative();
        phys.mass = -1.0;
        assert!(imprecision_backaction(&phys).is_err());
    }

    #[test]
    fn power_scaling_of_limits() {
        let phys = representative();
        let mut twice = phys;
        twice.scattered_power *= 2.0;
        let a = imprecision_backaction(&phys).unwrap();
        let b = imprecision_backaction(&twice).unwrap();
        for (lo, hi) in a.imprecision.as_array().iter().zip(b.imprecision.as_array()) {
            assert!((hi / lo - 0.5).abs() < 1e-14);
        }
        for (lo, hi) in a.backaction.as_array().iter().zip(b.backaction.as_array()) {
            assert!((hi / lo - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn backaction_axis_ratios() {
        let phys = representative();
        let l = imprecision_backaction(&phys).unwrap();
        let a = phys.geometric_factor;
        assert!((l.backaction.y / l.backaction.x - 2.0).abs() < 1e-14);
        assert!((l.backaction.z / l.backaction.x - (2.0 + 5.0 * a * a)).abs() < 1e-13);
    }

    #[test]
    fn limits_representative_values() {
        // Independent evaluation of the x-axis formulas with the same inputs:
        // S_imp = 5/(8π k₀²) · ħω₀/P, S_FF = ħ²k₀²/(10π) · P/(ħω₀).
        let phys = representative();
        let l = imprecision_backaction(&phys).unwrap();
        let k0 = 2.0 * PI / 1550e-9;
        let w0 = SPEED_OF_LIGHT * k0;
        let n = phys.scattered_power / (HBAR * w0);
        let imp = 5.0 / (8.0 * PI * k0 * k0 * n);
        let ba = HBAR * HBAR * k0 * k0 * n / (10.0 * PI);
        assert!((l.imprecision.x / imp - 1.0).abs() < 1e-12);
        assert!((l.backaction.x / ba - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heisenberg_identity() {
        let target = HBAR * HBAR / (16.0 * PI * PI);
        let mut phys = representative();
        for a in [0.0, 0.3, 0.9] {
            phys.geometric_factor = a;
            let prod = heisenberg_product(&phys).unwrap();
            for v in prod.as_array() {
                assert!((v / target - 1.0).abs() < 1e-12);
            }
        }
    }
}
