//! Photocurrent synthesis without storing the underlying trajectory.

use super::{PhotocurrentRecord, SimConfig, Simulator, StepSample};
use crate::error::{Error, Result};
use crate::rng::{Channel, GaussianStream};

/// One homodyne detection channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Synthesis {
    /// Nominal local-oscillator angle (rad).
    pub theta: f64,
    pub eta_d: f64,
    /// Constant phase error added to `theta`, modelling a weak reflected field.
    pub theta_offset: f64,
    /// Replace X_in in X_out by an independent realization. Removes the
    /// amplitude/phase correlation; used as a control.
    pub decorrelate: bool,
}

impl Synthesis {
    pub fn new(theta: f64, eta_d: f64) -> Self {
        Self {
            theta,
            eta_d,
            theta_offset: 0.0,
            decorrelate: false,
        }
    }

    pub fn with_offset(mut self, theta_offset: f64) -> Self {
        self.theta_offset = theta_offset;
        self
    }

    pub fn decorrelated(mut self) -> Self {
        self.decorrelate = true;
        self
    }

    pub fn effective_theta(&self) -> f64 {
        self.theta + self.theta_offset
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta_d) {
            return Err(Error::ParameterDomain(format!(
                "eta_d must lie in [0, 1], got {}",
                self.eta_d
            )));
        }
        if !(self.theta.is_finite() && self.theta_offset.is_finite()) {
            return Err(Error::ParameterDomain("homodyne angle must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Detector {
    cos: f64,
    sin: f64,
    signal: f64,
    loss: f64,
    decorrelate: bool,
}

/// Simulates the oscillator and emits one photocurrent sample per channel
/// per step. All channels see the same motion, the same input vacuum and
/// the same loss vacuum.
#[derive(Debug, Clone)]
pub struct PhotocurrentStream {
    sim: Simulator,
    channels: Vec<Detector>,
    offset: f64,
    coupling: f64,
    independent: Option<GaussianStream>,
    dt: f64,
}

impl PhotocurrentStream {
    pub fn new(config: &SimConfig, synthesis: &[Synthesis]) -> Result<Self> {
        if synthesis.is_empty() {
            return Err(Error::Usage("at least one detection channel is required".into()));
        }
        for s in synthesis {
            s.validate()?;
        }
        let sim = Simulator::new(config)?;
        let channels = synthesis
            .iter()
            .map(|s| {
                let (sin, cos) = s.effective_theta().sin_cos();
                Detector {
                    cos,
                    sin,
                    signal: s.eta_d.sqrt(),
                    loss: (1.0 - s.eta_d).sqrt(),
                    decorrelate: s.decorrelate,
                }
            })
            .collect();
        let independent = synthesis.iter().any(|s| s.decorrelate).then(|| {
            GaussianStream::new(
                config.seed,
                config.trajectory,
                Channel::Decorrelated,
                (0.5 / config.dt).sqrt(),
            )
        });
        Ok(Self {
            sim,
            channels,
            offset: (2.0 * config.params.gamma_rp).sqrt(),
            coupling: (4.0 * config.params.gamma_qba).sqrt(),
            independent,
            dt: config.dt,
        })
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances one step, writing one sample per channel into `out`.
    #[inline]
    pub fn next_into(&mut self, out: &mut [f64]) -> StepSample {
        let s = self.sim.step();
        let y_out = s.y_in + self.coupling * s.q_mid;
        let x_out = s.x_in + self.offset;
        let x_other = match self.independent.as_mut() {
            Some(g) => g.next() + self.offset,
            None => x_out,
        };
        for (o, c) in out.iter_mut().zip(&self.channels) {
            let x = if c.decorrelate { x_other } else { x_out };
            *o = c.signal * (c.cos * x + c.sin * y_out) + c.loss * s.x_nu;
        }
        s
    }

    /// Fills `out[c]` with the next `out[c].len()` samples of channel c.
    /// All buffers must have the same length.
    pub fn fill(&mut self, out: &mut [Vec<f64>]) {
        let n = out.first().map_or(0, Vec::len);
        debug_assert!(out.iter().all(|v| v.len() == n));
        let mut row = vec![0.0; self.channels.len()];
        for k in 0..n {
            self.next_into(&mut row);
            for (buf, v) in out.iter_mut().zip(&row) {
                buf[k] = *v;
            }
        }
    }
}

/// Simulates `config.n_samples` steps and returns one record per channel.
pub fn synthesize_photocurrent(config: &SimConfig, synthesis: &[Synthesis]) -> Result<Vec<PhotocurrentRecord>> {
    let mut stream = PhotocurrentStream::new(config, synthesis)?;
    let mut out = vec![vec![0.0; config.n_samples]; synthesis.len()];
    stream.fill(&mut out);
    Ok(out
        .into_iter()
        .zip(synthesis)
        .map(|(i_theta, s)| PhotocurrentRecord {
            i_theta,
            theta: s.theta,
            eta_d: s.eta_d,
            dt: config.dt,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::langevin::{output_quadratures, photocurrent, simulate};
    use crate::model::{hz_to_rad, ModelParams};
    use std::f64::consts::FRAC_PI_2;

    fn params() -> ModelParams {
        ModelParams::new(hz_to_rad(10e3), hz_to_rad(100.0), hz_to_rad(300.0), 0.4, 2.0)
            .unwrap()
            .with_radiation_pressure(3.0)
            .unwrap()
    }

    #[test]
    fn stream_matches_batch_pipeline() {
        let cfg = SimConfig::at_max_step(params(), 3000, 11);
        let b = simulate(&cfg).unwrap();
        let quads = output_quadratures(&b, &cfg.params).unwrap();
        for theta in [0.0, 0.7, 2.0] {
            let batch = photocurrent(&quads, theta, 0.6, &b.x_nu, b.dt).unwrap();
            let streamed = synthesize_photocurrent(&cfg, &[Synthesis::new(theta, 0.6)]).unwrap();
            for (a, s) in batch.i_theta.iter().zip(&streamed[0].i_theta) {
                assert!((a - s).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn offset_shifts_angle() {
        let cfg = SimConfig::at_max_step(params(), 500, 2);
        let a = synthesize_photocurrent(&cfg, &[Synthesis::new(1.0, 0.5).with_offset(0.2)]).unwrap();
        let b = synthesize_photocurrent(&cfg, &[Synthesis::new(1.2, 0.5)]).unwrap();
        for (x, y) in a[0].i_theta.iter().zip(&b[0].i_theta) {
            assert!((x - y).abs() < 1e-9 * x.abs().max(1.0));
        }
        assert_eq!(a[0].theta, 1.0);
    }

    #[test]
    fn decorrelated_channel_leaves_motion_unchanged() {
        let cfg = SimConfig::at_max_step(params(), 500, 2);
        let plain = Synthesis::new(FRAC_PI_2, 1.0);
        let r = synthesize_photocurrent(&cfg, &[plain, plain.decorrelated()]).unwrap();
        // At θ = π/2 the amplitude quadrature does not enter.
        for (x, y) in r[0].i_theta.iter().zip(&r[1].i_theta) {
            assert!((x - y).abs() < 1e-9 * x.abs().max(1.0));
        }
        let r0 = synthesize_photocurrent(&cfg, &[Synthesis::new(0.0, 1.0).decorrelated()]).unwrap();
        let b = simulate(&cfg).unwrap();
        assert!(r0[0].i_theta.iter().zip(&b.x_in).all(|(i, x)| (i - x).abs() > 0.0));
    }

    #[test]
    fn invalid_channels_rejected() {
        let cfg = SimConfig::at_max_step(params(), 10, 2);
        assert!(matches!(
            PhotocurrentStream::new(&cfg, &[Synthesis::new(0.0, 1.5)]),
            Err(Error::ParameterDomain(_))
        ));
        assert!(matches!(PhotocurrentStream::new(&cfg, &[]), Err(Error::Usage(_))));
    }
}
