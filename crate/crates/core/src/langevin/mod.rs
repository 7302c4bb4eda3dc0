//! Time-domain simulation of the measured oscillator and of the homodyne
//! photocurrent it imprints on the scattered light.
//!
//! Vacuum quadratures and the thermal force are real white Gaussian
//! processes with symmetrized strengths 1/2 and 2γ_m(n̄ + 1/2). A sample
//! on a grid of step `dt` is the average of the process over the step, so
//! its variance is strength/dt and its one-sided PSD in Hz is 2·strength.
//! With that convention the photocurrent PSD comes out directly in
//! shot-noise units.

mod stream;

pub use stream::{synthesize_photocurrent, PhotocurrentStream, Synthesis};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rng::{Channel, GaussianStream};

/// Largest admissible dt·Ω_m.
pub const MAX_STEP_PHASE: f64 = 0.05;

/// Sinusoidal force a·cos(ωt) added to the momentum equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drive {
    /// Dimensionless force amplitude.
    pub amplitude: f64,
    /// Angular frequency (rad/s).
    pub frequency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// Exact propagation of the damped oscillator with the force held
    /// constant over each step.
    #[default]
    Exact,
    /// Semi-implicit Euler–Maruyama (momentum first, then position).
    EulerMaruyama,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialState {
    /// Draw (q, p) from the stationary Gaussian of variance Γ_tot/γ_m.
    #[default]
    SteadyState,
    /// Start at rest and discard the first 5/γ_m of evolution.
    BurnIn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: ModelParams,
    /// Sample interval (s).
    pub dt: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Trajectory index within an ensemble; part of the RNG key.
    pub trajectory: u64,
    pub drive: Option<Drive>,
    pub integrator: Integrator,
    pub initial: InitialState,
}

impl SimConfig {
    pub fn new(params: ModelParams, dt: f64, n_samples: usize, seed: u64) -> Self {
        Self {
            params,
            dt,
            n_samples,
            seed,
            trajectory: 0,
            drive: None,
            integrator: Integrator::default(),
            initial: InitialState::default(),
        }
    }

    /// Uses the largest step allowed by the resolution guard.
    pub fn at_max_step(params: ModelParams, n_samples: usize, seed: u64) -> Self {
        Self::new(params, MAX_STEP_PHASE / params.omega_m, n_samples, seed)
    }

    pub fn with_drive(mut self, drive: Drive) -> Self {
        self.drive = Some(drive);
        self
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn with_trajectory(mut self, trajectory: u64) -> Self {
        self.trajectory = trajectory;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Configuration(format!("dt must be positive, got {}", self.dt)));
        }
        // Relative slack absorbs rounding in dt = 0.05/Ω_m.
        if self.dt * self.params.omega_m > MAX_STEP_PHASE * (1.0 + 1e-12) {
            return Err(Error::Configuration(format!(
                "dt·Ω_m = {:.4} exceeds the resolution guard {MAX_STEP_PHASE}",
                self.dt * self.params.omega_m
            )));
        }
        if self.n_samples == 0 {
            return Err(Error::Configuration("n_samples must be positive".into()));
        }
        if let Some(d) = self.drive {
            if !(d.amplitude.is_finite() && d.frequency.is_finite()) {
                return Err(Error::Configuration("drive must be finite".into()));
            }
        }
        Ok(())
    }

    /// Records meant for spectral estimation must span ≥ 10 correlation times.
    pub fn validate_for_spectra(&self) -> Result<()> {
        self.validate()?;
        let span = self.n_samples as f64 * self.dt;
        let needed = 10.0 / self.params.gamma_m;
        if span < needed {
            return Err(Error::Configuration(format!(
                "record spans {span:.4e} s, spectral estimation needs ≥ 10/γ_m = {needed:.4e} s"
            )));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.n_samples as f64 * self.dt
    }
}

/// State of one integration step: the state at the start of the step,
/// the step-averaged position, and the noise samples applied during it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSample {
    pub q: f64,
    pub p: f64,
    /// (q_k + q_{k+1})/2, aligned with the step-averaged noise.
    pub q_mid: f64,
    pub x_in: f64,
    pub y_in: f64,
    pub x_nu: f64,
}

/// Discrete propagator for (q, p) over one step.
#[derive(Debug, Clone, Copy)]
struct Propagator {
    phi: [[f64; 2]; 2],
    /// Response of (q, p) to a unit force held over the step.
    psi: [f64; 2],
    scheme: Integrator,
    omega: f64,
    gamma: f64,
    dt: f64,
}

impl Propagator {
    fn new(omega: f64, gamma: f64, dt: f64, scheme: Integrator) -> Self {
        let disc = omega * omega - 0.25 * gamma * gamma;
        let (c, s) = if disc > 0.0 {
            let wd = disc.sqrt();
            ((wd * dt).cos(), (wd * dt).sin() / wd)
        } else if disc < 0.0 {
            let k = (-disc).sqrt();
            ((k * dt).cosh(), (k * dt).sinh() / k)
        } else {
            (1.0, dt)
        };
        let e = (-0.5 * gamma * dt).exp();
        let phi = [
            [e * (c + 0.5 * gamma * s), e * s * omega],
            [-e * s * omega, e * (c - 0.5 * gamma * s)],
        ];
        // Ψ = M⁻¹(Φ − I)e_p with M = [[0, Ω], [−Ω, −γ]].
        let psi = [
            (-gamma * phi[0][1] - omega * (phi[1][1] - 1.0)) / (omega * omega),
            phi[0][1] / omega,
        ];
        Self {
            phi,
            psi,
            scheme,
            omega,
            gamma,
            dt,
        }
    }

    #[inline]
    fn advance(&self, q: f64, p: f64, force: f64) -> (f64, f64) {
        match self.scheme {
            Integrator::Exact => (
                self.phi[0][0] * q + self.phi[0][1] * p + self.psi[0] * force,
                self.phi[1][0] * q + self.phi[1][1] * p + self.psi[1] * force,
            ),
            Integrator::EulerMaruyama => {
                let p1 = p + self.dt * (-self.omega * q - self.gamma * p + force);
                (q + self.dt * self.omega * p1, p1)
            }
        }
    }
}

/// Step-by-step generator of the oscillator and its noise inputs.
#[derive(Debug, Clone)]
pub struct Simulator {
    prop: Propagator,
    q: f64,
    p: f64,
    step: u64,
    backaction: f64,
    drive: Option<Drive>,
    amplitude_in: GaussianStream,
    phase_in: GaussianStream,
    loss: GaussianStream,
    thermal: GaussianStream,
    scale_thermal: bool,
}

impl Simulator {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let params = &config.params;
        let dt = config.dt;
        let vacuum_sigma = (0.5 / dt).sqrt();
        let thermal_sigma = (2.0 * params.gamma_m * (params.n_bar + 0.5) / dt).sqrt();
        let key = (config.seed, config.trajectory);
        let mut sim = Self {
            prop: Propagator::new(params.omega_m, params.gamma_m, dt, config.integrator),
            q: 0.0,
            p: 0.0,
            step: 0,
            backaction: (4.0 * params.gamma_qba).sqrt(),
            drive: config.drive,
            amplitude_in: GaussianStream::new(key.0, key.1, Channel::AmplitudeIn, vacuum_sigma),
            phase_in: GaussianStream::new(key.0, key.1, Channel::PhaseIn, vacuum_sigma),
            loss: GaussianStream::new(key.0, key.1, Channel::Loss, vacuum_sigma),
            thermal: GaussianStream::new(key.0, key.1, Channel::Thermal, thermal_sigma),
            scale_thermal: thermal_sigma > 0.0,
        };
        match config.initial {
            InitialState::SteadyState => {
                let sd = params.stationary_variance().sqrt();
                let mut init = GaussianStream::new(key.0, key.1, Channel::Initial, sd);
                sim.q = init.next();
                sim.p = init.next();
            }
            InitialState::BurnIn => {
                let burn = (5.0 / (params.gamma_m * dt)).ceil() as u64;
                for _ in 0..burn {
                    sim.step();
                }
                sim.step = 0;
            }
        }
        Ok(sim)
    }

    /// Advances one step and reports what happened during it.
    #[inline]
    pub fn step(&mut self) -> StepSample {
        let x_in = self.amplitude_in.next();
        let y_in = self.phase_in.next();
        let x_nu = self.loss.next();
        let xi = if self.scale_thermal { self.thermal.next() } else { 0.0 };
        let mut force = xi + self.backaction * x_in;
        if let Some(d) = self.drive {
            let t = self.step as f64 * self.prop.dt;
            force += d.amplitude * (d.frequency * t).cos();
        }
        let (q0, p0) = (self.q, self.p);
        let (q1, p1) = self.prop.advance(q0, p0, force);
        self.q = q1;
        self.p = p1;
        self.step += 1;
        StepSample {
            q: q0,
            p: p0,
            q_mid: 0.5 * (q0 + q1),
            x_in,
            y_in,
            x_nu,
        }
    }

    pub fn position(&self) -> f64 {
        self.q
    }

    pub fn momentum(&self) -> f64 {
        self.p
    }
}

/// Full record of one simulated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBundle {
    /// Position at the start of each step.
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub x_in: Vec<f64>,
    pub y_in: Vec<f64>,
    pub x_nu: Vec<f64>,
    /// Position after the final step.
    pub q_end: f64,
    pub dt: f64,
    pub seed: u64,
    pub params: ModelParams,
}

impl TrajectoryBundle {
    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Step-averaged positions (q_k + q_{k+1})/2.
    pub fn q_mid(&self) -> Vec<f64> {
        let n = self.q.len();
        (0..n)
            .map(|k| {
                let next = if k + 1 < n { self.q[k + 1] } else { self.q_end };
                0.5 * (self.q[k] + next)
            })
            .collect()
    }
}

pub fn simulate(config: &SimConfig) -> Result<TrajectoryBundle> {
    let mut sim = Simulator::new(config)?;
    let n = config.n_samples;
    let mut bundle = TrajectoryBundle {
        q: Vec::with_capacity(n),
        p: Vec::with_capacity(n),
        x_in: Vec::with_capacity(n),
        y_in: Vec::with_capacity(n),
        x_nu: Vec::with_capacity(n),
        q_end: 0.0,
        dt: config.dt,
        seed: config.seed,
        params: config.params,
    };
    for _ in 0..n {
        let s = sim.step();
        bundle.q.push(s.q);
        bundle.p.push(s.p);
        bundle.x_in.push(s.x_in);
        bundle.y_in.push(s.y_in);
        bundle.x_nu.push(s.x_nu);
    }
    bundle.q_end = sim.position();
    Ok(bundle)
}

/// Simulates `count` trajectories in parallel; trajectory k uses RNG key
/// (seed, k), so the result does not depend on the thread count.
pub fn simulate_ensemble(config: &SimConfig, count: usize) -> Result<Vec<TrajectoryBundle>> {
    (0..count as u64)
        .into_par_iter()
        .map(|k| simulate(&config.clone().with_trajectory(k)))
        .collect()
}

/// Output field quadratures.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputQuadratures {
    pub x_out: Vec<f64>,
    pub y_out: Vec<f64>,
}

/// X_out = X_in + √(2Γ_R), Y_out = Y_in + √(4Γ_qba)·q.
pub fn output_quadratures(bundle: &TrajectoryBundle, params: &ModelParams) -> Result<OutputQuadratures> {
    if bundle.params != *params {
        return Err(Error::Usage(
            "output quadratures requested with parameters differing from the simulation".into(),
        ));
    }
    let offset = (2.0 * params.gamma_rp).sqrt();
    let coupling = (4.0 * params.gamma_qba).sqrt();
    let x_out = bundle.x_in.iter().map(|x| x + offset).collect();
    let y_out = if coupling == 0.0 {
        bundle.y_in.clone()
    } else {
        bundle
            .y_in
            .iter()
            .zip(bundle.q_mid())
            .map(|(y, q)| y + coupling * q)
            .collect()
    };
    Ok(OutputQuadratures { x_out, y_out })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhotocurrentRecord {
    pub i_theta: Vec<f64>,
    pub theta: f64,
    pub eta_d: f64,
    pub dt: f64,
}

/// i_θ = √η_d (cos θ X_out + sin θ Y_out) + √(1 − η_d) X_ν.
pub fn photocurrent(
    quadratures: &OutputQuadratures,
    theta: f64,
    eta_d: f64,
    x_nu: &[f64],
    dt: f64,
) -> Result<PhotocurrentRecord> {
    if !(0.0..=1.0).contains(&eta_d) {
        return Err(Error::ParameterDomain(format!("eta_d must lie in [0, 1], got {eta_d}")));
    }
    let n = quadratures.x_out.len();
    if quadratures.y_out.len() != n || x_nu.len() != n {
        return Err(Error::Usage(format!(
            "series lengths differ: x_out {}, y_out {}, x_nu {}",
            n,
            quadratures.y_out.len(),
            x_nu.len()
        )));
    }
    let (s, c) = theta.sin_cos();
    let signal = eta_d.sqrt();
    let loss = (1.0 - eta_d).sqrt();
    let i_theta = (0..n)
        .map(|k| signal * (c * quadratures.x_out[k] + s * quadratures.y_out[k]) + loss * x_nu[k])
        .collect();
    Ok(PhotocurrentRecord {
        i_theta,
        theta,
        eta_d,
        dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::hz_to_rad;

    fn small_params() -> ModelParams {
        ModelParams::new(hz_to_rad(10e3), hz_to_rad(100.0), hz_to_rad(300.0), 0.4, 2.0).unwrap()
    }

    #[test]
    fn resolution_guard() {
        let p = small_params();
        let ok = SimConfig::at_max_step(p, 10, 1);
        assert!(ok.validate().is_ok());
        let bad = SimConfig::new(p, 2.0 * ok.dt, 10, 1);
        assert!(matches!(bad.validate(), Err(Error::Configuration(_))));
        assert!(matches!(SimConfig::new(p, ok.dt, 0, 1).validate(), Err(Error::Configuration(_))));
        assert!(ok.validate_for_spectra().is_err());
    }

    #[test]
    fn exact_propagator_matches_small_step_limit() {
        let prop = Propagator::new(3.0, 0.2, 1e-4, Integrator::Exact);
        // Taylor: Ψ ≈ (Ω dt²/2, dt − γ dt²/2)
        assert!((prop.psi[1] - (1e-4 - 0.1 * 1e-8)).abs() < 1e-11);
        assert!((prop.psi[0] - 1.5e-8).abs() < 1e-11);
        // det Φ = e^{−γ dt}
        let det = prop.phi[0][0] * prop.phi[1][1] - prop.phi[0][1] * prop.phi[1][0];
        assert!((det - (-0.2f64 * 1e-4).exp()).abs() < 1e-14);
    }

    #[test]
    fn propagator_handles_overdamping() {
        let prop = Propagator::new(1.0, 5.0, 0.01, Integrator::Exact);
        let det = prop.phi[0][0] * prop.phi[1][1] - prop.phi[0][1] * prop.phi[1][0];
        assert!((det - (-0.05f64).exp()).abs() < 1e-13);
        let crit = Propagator::new(1.0, 2.0, 0.01, Integrator::Exact);
        assert!(crit.phi.iter().flatten().all(|v| v.is_finite()));
    }

    #[test]
    fn determinism() {
        let cfg = SimConfig::at_max_step(small_params(), 5_000, 42);
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate(&SimConfig { seed: 43, ..cfg.clone() }).unwrap();
        assert_ne!(a.q, c.q);
    }

    #[test]
    fn ensemble_independent_of_thread_count() {
        let cfg = SimConfig::at_max_step(small_params(), 2_000, 9);
        let par = simulate_ensemble(&cfg, 6).unwrap();
        let seq: Vec<_> = (0..6)
            .map(|k| simulate(&cfg.clone().with_trajectory(k)).unwrap())
            .collect();
        assert_eq!(par, seq);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let single = one.install(|| simulate_ensemble(&cfg, 6).unwrap());
        assert_eq!(par, single);
    }

    #[test]
    fn series_share_length() {
        let b = simulate(&SimConfig::at_max_step(small_params(), 1234, 3)).unwrap();
        for len in [b.p.len(), b.x_in.len(), b.y_in.len(), b.x_nu.len(), b.q_mid().len()] {
            assert_eq!(len, 1234);
        }
    }

    #[test]
    fn no_backaction_leaves_phase_quadrature_untouched() {
        let mut p = small_params();
        p.gamma_qba = 0.0;
        let b = simulate(&SimConfig::at_max_step(p, 4000, 5)).unwrap();
        let out = output_quadratures(&b, &p).unwrap();
        assert_eq!(out.y_out, b.y_in);
        assert_eq!(out.x_out, b.x_in);
    }

    #[test]
    fn radiation_pressure_offsets_amplitude_quadrature() {
        let p = small_params().with_radiation_pressure(50.0).unwrap();
        let b = simulate(&SimConfig::at_max_step(p, 200_000, 5)).unwrap();
        let out = output_quadratures(&b, &p).unwrap();
        let mean = out.x_out.iter().sum::<f64>() / out.x_out.len() as f64;
        let sd_mean = (0.5 / b.dt / out.x_out.len() as f64).sqrt();
        assert!((mean - 10.0).abs() < 5.0 * sd_mean);
        assert!(p.equilibrium_shift() > 0.0);
    }

    #[test]
    fn mismatched_params_rejected() {
        let p = small_params();
        let b = simulate(&SimConfig::at_max_step(p, 10, 5)).unwrap();
        let mut other = p;
        other.n_bar += 1.0;
        assert!(matches!(output_quadratures(&b, &other), Err(Error::Usage(_))));
    }

    #[test]
    fn photocurrent_limits() {
        let p = small_params();
        let b = simulate(&SimConfig::at_max_step(p, 1000, 8)).unwrap();
        let out = output_quadratures(&b, &p).unwrap();
        let amp = photocurrent(&out, 0.0, 1.0, &b.x_nu, b.dt).unwrap();
        assert_eq!(amp.i_theta, out.x_out);
        let lossy = photocurrent(&out, 1.1, 0.0, &b.x_nu, b.dt).unwrap();
        assert_eq!(lossy.i_theta, b.x_nu);
        assert!(matches!(
            photocurrent(&out, 0.0, 1.2, &b.x_nu, b.dt),
            Err(Error::ParameterDomain(_))
        ));
        assert!(matches!(
            photocurrent(&out, 0.0, 0.5, &b.x_nu[..10], b.dt),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn burn_in_start_is_supported() {
        let mut cfg = SimConfig::at_max_step(small_params(), 100, 1);
        cfg.initial = InitialState::BurnIn;
        let b = simulate(&cfg).unwrap();
        assert!(b.q[0] != 0.0);
    }
}
