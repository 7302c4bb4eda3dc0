use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use ponderomotive::io::Report;
use ponderomotive::model::{
    heisenberg_product, imprecision_backaction, pattern_solid_angle_integral, rad_to_hz, radiation_pattern,
    trap_frequencies, PatternKind, PhysicalParams, HBAR,
};
use ponderomotive::{Error, Result};

use crate::config::Resolved;
use crate::files::{ensure_dir, write_text};

/// Writes `patterns.csv` (ρ_j on a θ × φ grid for every axis) and
/// `limits_report.txt`.
pub fn run(r: &Resolved, out: &Path) -> Result<()> {
    let pc = &r.config.patterns;
    if pc.theta_points < 2 || pc.phi_points < 1 {
        return Err(Error::Configuration("pattern grid needs ≥ 2 polar and ≥ 1 azimuthal points".into()));
    }
    if !(pc.beta_sq.is_finite() && pc.beta_sq >= 0.0) {
        return Err(Error::Configuration(format!("beta_sq must be non-negative, got {}", pc.beta_sq)));
    }
    // A bare A without [physical] describes patterns only.
    let physical = match (&r.config.physical, pc.geometric_factor) {
        (Some(p), _) => Some(p.to_physical()?),
        (None, Some(_)) => None,
        (None, None) => Some(PhysicalParams::silica_sphere_example()),
    };
    let a = pc
        .geometric_factor
        .or(physical.map(|p| p.geometric_factor))
        .unwrap_or_default();
    if !a.is_finite() {
        return Err(Error::Configuration("geometric factor must be finite".into()));
    }
    ensure_dir(out)?;

    let mut text = r.header().with("geometric_factor", a).with("beta_sq", pc.beta_sq).render();
    text.push_str("axis,theta_rad,phi_rad,density\n");
    for kind in PatternKind::ALL {
        for i in 0..pc.theta_points {
            let theta = PI * i as f64 / (pc.theta_points - 1) as f64;
            for j in 0..pc.phi_points {
                let phi = 2.0 * PI * j as f64 / pc.phi_points as f64;
                let rho = radiation_pattern(kind, theta, phi, pc.beta_sq, a);
                let _ = writeln!(text, "{kind},{theta},{phi},{rho}");
            }
        }
    }
    write_text(&out.join("patterns.csv"), &text)?;

    let mut report = Report::new(r.header());
    report
        .section("geometry")
        .value("geometric_factor", a)
        .value("beta_sq", pc.beta_sq)
        .value("source", if physical.is_some() && pc.geometric_factor.is_none() { "physical" } else { "bare" });
    report.section("integrals");
    for kind in PatternKind::ALL {
        report.value(kind.as_str(), pattern_solid_angle_integral(kind, pc.beta_sq, a, pc.resolution));
    }
    if let Some(mut phys) = physical {
        phys.geometric_factor = a;
        let trap = trap_frequencies(&phys)?;
        let limits = imprecision_backaction(&phys)?;
        let product = heisenberg_product(&phys)?;
        let target = HBAR * HBAR / (16.0 * PI * PI);
        report
            .section("physical")
            .value("mass_kg", phys.mass)
            .value("polarizability", phys.polarizability)
            .value("field_amplitude", phys.field_amplitude)
            .value("scattered_power_w", phys.scattered_power);
        report
            .section("trap_frequencies_hz")
            .value("x", rad_to_hz(trap.x))
            .value("y", rad_to_hz(trap.y))
            .value("z", rad_to_hz(trap.z));
        report
            .section("imprecision_m2_per_hz")
            .value("x", limits.imprecision.x)
            .value("y", limits.imprecision.y)
            .value("z", limits.imprecision.z);
        report
            .section("backaction_n2_per_hz")
            .value("x", limits.backaction.x)
            .value("y", limits.backaction.y)
            .value("z", limits.backaction.z);
        let worst = product
            .as_array()
            .iter()
            .map(|v| (v / target - 1.0).abs())
            .fold(0.0, f64::max);
        report
            .section("heisenberg")
            .value("x", product.x)
            .value("y", product.y)
            .value("z", product.z)
            .value("target", target)
            .value("max_relative_deviation", worst);
    }
    write_text(&out.join("limits_report.txt"), &report.render())
}
