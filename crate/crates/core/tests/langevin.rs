use std::f64::consts::PI;

use ponderomotive::langevin::{
    simulate, simulate_ensemble, synthesize_photocurrent, Drive, Integrator, SimConfig, Simulator, Synthesis,
};
use ponderomotive::model::{hz_to_rad, paper_2021, ModelParams, PAPER_2021_ETA_D};
use ponderomotive::spectral::{sensitivity_curve, tone_amplitude};

/// Time-averaged q² over `count` independent trajectories of `n` steps.
fn mean_square_position(cfg: &SimConfig, count: u64) -> (f64, f64) {
    let per: Vec<f64> = (0..count)
        .map(|k| {
            let mut sim = Simulator::new(&cfg.clone().with_trajectory(k)).unwrap();
            (0..cfg.n_samples).map(|_| sim.step().q.powi(2)).sum::<f64>() / cfg.n_samples as f64
        })
        .collect();
    let mean = per.iter().sum::<f64>() / count as f64;
    let var = per.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
    (mean, (var / count as f64).sqrt())
}

#[test]
fn stationary_variance_matches_total_decoherence() {
    let p = paper_2021();
    let n = (40.0 / p.gamma_m / (0.05 / p.omega_m)) as usize;
    let cfg = SimConfig::at_max_step(p, n, 11);
    let (mean, err) = mean_square_position(&cfg, 50);
    let expected = p.rates().gamma_tot / p.gamma_m;
    assert!((mean / expected - 1.0).abs() < 0.05, "{mean} ± {err} vs {expected}");
}

#[test]
fn euler_maruyama_agrees_on_variance() {
    let p = paper_2021();
    let n = (40.0 / p.gamma_m / (0.05 / p.omega_m)) as usize;
    let cfg = SimConfig::at_max_step(p, n, 12).with_integrator(Integrator::EulerMaruyama);
    let (mean, err) = mean_square_position(&cfg, 30);
    let expected = p.rates().gamma_tot / p.gamma_m;
    assert!((mean / expected - 1.0).abs() < 0.05, "{mean} ± {err} vs {expected}");
}

#[test]
fn ground_state_without_backaction() {
    let p = ModelParams::new(hz_to_rad(20e3), hz_to_rad(200.0), 0.0, 0.5, 0.0).unwrap();
    let n = (40.0 / p.gamma_m / (0.05 / p.omega_m)) as usize;
    let cfg = SimConfig::at_max_step(p, n, 3);
    let (mean, err) = mean_square_position(&cfg, 40);
    assert!((mean / 0.5 - 1.0).abs() < 0.05, "{mean} ± {err}");
}

#[test]
fn driven_response_follows_susceptibility() {
    let p = paper_2021();
    let w = hz_to_rad(70e3);
    let a = 2e6;
    let n = 400_000;
    let cfg = SimConfig::at_max_step(p, n, 5).with_drive(Drive { amplitude: a, frequency: w });
    let bundle = simulate(&cfg).unwrap();
    let measured = tone_amplitude(&bundle.q_mid(), cfg.dt, 70e3).unwrap();
    let expected = p.spectral().susceptibility(w).norm() * a;
    assert!((measured / expected - 1.0).abs() < 0.01, "{measured} vs {expected}");
}

#[test]
fn tone_sensitivity_follows_abs_sine() {
    let p = paper_2021();
    let w = hz_to_rad(70e3);
    let a = 2e6;
    let offset = 0.05 * PI;
    let cfg = SimConfig::at_max_step(p, 400_000, 6).with_drive(Drive { amplitude: a, frequency: w });
    let thetas: Vec<f64> = (0..12).map(|k| k as f64 * PI / 12.0).collect();
    let channels: Vec<Synthesis> =
        thetas.iter().map(|t| Synthesis::new(*t, PAPER_2021_ETA_D).with_offset(offset)).collect();
    let records = synthesize_photocurrent(&cfg, &channels).unwrap();
    let peak = PAPER_2021_ETA_D.sqrt() * (4.0 * p.gamma_qba).sqrt() * p.spectral().susceptibility(w).norm() * a;
    let mut responses = Vec::new();
    for (t, r) in thetas.iter().zip(&records) {
        let amp = tone_amplitude(&r.i_theta, cfg.dt, 70e3).unwrap();
        let expected = peak * (t + offset).sin().abs();
        assert!((amp - expected).abs() < 0.01 * peak, "θ={t}: {amp} vs {expected}");
        responses.push((*t, amp));
    }
    let fit = sensitivity_curve(&responses).unwrap();
    assert!((fit.theta_offset + offset).abs() < 0.005 * PI, "{}", fit.theta_offset / PI);
    assert!((fit.amplitude / peak - 1.0).abs() < 0.01);
}

#[test]
fn ensemble_is_reproducible() {
    let p = paper_2021();
    let cfg = SimConfig::at_max_step(p, 2000, 99);
    let a = simulate_ensemble(&cfg, 6).unwrap();
    let b = simulate_ensemble(&cfg, 6).unwrap();
    assert_eq!(a, b);
    assert_ne!(a[0].q, a[1].q);
    let single = simulate(&cfg.clone().with_trajectory(4)).unwrap();
    assert_eq!(single, a[4]);
}
