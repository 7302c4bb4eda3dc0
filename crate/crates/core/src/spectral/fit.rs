//! Joint fit of the homodyne PSD model to spectra taken at several angles.
//!
//! Shared parameters: ln γ_m, ln Γ_tot, ln Γ_meas. Per spectrum: Ω_m and θ.
//! Residuals are (data − model)/model, so every bin carries the same
//! relative weight. The weights 1/model are held fixed within each
//! Gauss–Newton step (iteratively reweighted least squares), which makes
//! the fixed point that of the Whittle likelihood Σ(data/model + ln model).
//! Letting the weights vary inside the step biases the model upward by
//! about one part in the number of averaged segments.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::Spectrum;
use crate::error::{Error, Result};
use crate::model::{SpectralParams, TWO_PI};

const SHARED: usize = 3;

/// Starting point of the fit. Rates in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct FitGuess {
    pub gamma_m: f64,
    pub gamma_tot: f64,
    pub gamma_meas: f64,
    /// Initial resonance for every spectrum; located from the data when absent.
    pub omega_m: Option<f64>,
    /// Initial angles; taken from each spectrum's `theta_inferred` when absent.
    pub thetas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Fitted interval in Hz; defaults to the initial resonance ± 25 kHz.
    pub band_hz: Option<(f64, f64)>,
    pub max_iterations: usize,
    /// Relative cost change and scaled step size regarded as converged.
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            band_hz: None,
            max_iterations: 200,
            tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    fn new(value: f64, stderr: f64) -> Self {
        Self { value, stderr }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumFit {
    /// rad/s
    pub omega_m: Estimate,
    /// rad
    pub theta: Estimate,
    pub theta_inferred: Option<f64>,
}

/// Linear relation θ_fit = slope·θ_inferred + offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleRelation {
    pub slope: Estimate,
    pub offset: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub gamma_m: Estimate,
    pub gamma_tot: Estimate,
    pub gamma_meas: Estimate,
    pub spectra: Vec<SpectrumFit>,
    pub eta_meas: f64,
    /// Γ_meas exceeded Γ_tot at the optimum and was clamped to it.
    pub eta_clamped: bool,
    /// Sum of squared relative residuals.
    pub cost: f64,
    pub residual_rms: f64,
    pub points: usize,
    pub iterations: usize,
    pub angle_relation: Option<AngleRelation>,
}

impl FitResult {
    /// Model parameters of spectrum `index`.
    pub fn spectral_params(&self, index: usize) -> SpectralParams {
        SpectralParams {
            omega_m: self.spectra[index].omega_m.value,
            gamma_m: self.gamma_m.value,
            gamma_tot: self.gamma_tot.value,
            gamma_meas: self.gamma_meas.value,
        }
    }

    /// Mean fitted resonance (rad/s).
    pub fn mean_omega_m(&self) -> f64 {
        self.spectra.iter().map(|s| s.omega_m.value).sum::<f64>() / self.spectra.len() as f64
    }

    /// As a starting guess for another fit.
    pub fn as_guess(&self) -> FitGuess {
        FitGuess {
            gamma_m: self.gamma_m.value,
            gamma_tot: self.gamma_tot.value,
            gamma_meas: self.gamma_meas.value,
            omega_m: None,
            thetas: Some(self.spectra.iter().map(|s| s.theta.value).collect()),
        }
    }
}

/// Model value and gradient with respect to
/// (ln γ, ln Γ_tot, ln Γ_meas, Ω_m, θ) at angular frequency `w`.
#[inline]
fn model_and_gradient(p: &[f64; 5], w: f64) -> (f64, [f64; 5]) {
    let gamma = p[0].exp();
    let g_tot = p[1].exp();
    let g_meas = p[2].exp();
    let om = p[3];
    let (s, c) = p[4].sin_cos();
    let u = om * om - w * w;
    let v = gamma * w;
    let d = u * u + v * v;
    let chi_sq = om * om / d;
    let re_chi = om * u / d;
    let a = 16.0 * g_meas * g_tot * s * s * chi_sq;
    let b = 8.0 * g_meas * s * c * re_chi;
    let value = 1.0 + a + b;
    let damping = -2.0 * v * v / d;
    let d_om_a = a * (2.0 / om - 4.0 * u * om / d);
    let d_om_b = 8.0 * g_meas * s * c * ((u + 2.0 * om * om) / d - 4.0 * om * om * u * u / (d * d));
    let grad = [
        (a + b) * damping,
        a,
        a + b,
        d_om_a + d_om_b,
        16.0 * g_meas * g_tot * 2.0 * s * c * chi_sq + 8.0 * g_meas * (c * c - s * s) * re_chi,
    ];
    (value, grad)
}

struct Problem<'a> {
    /// Per spectrum: (angular frequencies, data) inside the band.
    data: Vec<(Vec<f64>, &'a [f64])>,
}

struct Evaluation {
    /// Σ r², r = data/model − 1.
    cost: f64,
    /// Whittle objective Σ(data/model + ln model).
    objective: f64,
    jtj: DMatrix<f64>,
    jtr: DVector<f64>,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        SHARED + 2 * self.data.len()
    }

    fn local(&self, x: &DVector<f64>, i: usize) -> [f64; 5] {
        [x[0], x[1], x[2], x[SHARED + 2 * i], x[SHARED + 2 * i + 1]]
    }

    fn objective(&self, x: &DVector<f64>) -> f64 {
        let mut total = 0.0;
        for (i, (ws, ys)) in self.data.iter().enumerate() {
            let p = self.local(x, i);
            for (w, y) in ws.iter().zip(ys.iter()) {
                let (m, _) = model_and_gradient(&p, *w);
                total += y / m + m.ln();
            }
        }
        total
    }

    fn evaluate(&self, x: &DVector<f64>) -> Evaluation {
        let n = self.dim();
        let mut jtj = DMatrix::zeros(n, n);
        let mut jtr = DVector::zeros(n);
        let mut cost = 0.0;
        let mut objective = 0.0;
        for (i, (ws, ys)) in self.data.iter().enumerate() {
            let p = self.local(x, i);
            let idx = [0, 1, 2, SHARED + 2 * i, SHARED + 2 * i + 1];
            let mut block = [[0.0; 5]; 5];
            let mut grad_r = [0.0; 5];
            for (w, y) in ws.iter().zip(ys.iter()) {
                let (m, g) = model_and_gradient(&p, *w);
                let r = y / m - 1.0;
                let scale = -1.0 / m;
                let j: [f64; 5] = std::array::from_fn(|k| scale * g[k]);
                cost += r * r;
                objective += y / m + m.ln();
                for a in 0..5 {
                    grad_r[a] += j[a] * r;
                    for b in a..5 {
                        block[a][b] += j[a] * j[b];
                    }
                }
            }
            for a in 0..5 {
                jtr[idx[a]] += grad_r[a];
                for b in a..5 {
                    jtj[(idx[a], idx[b])] += block[a][b];
                    if a != b {
                        jtj[(idx[b], idx[a])] += block[a][b];
                    }
                }
            }
        }
        Evaluation {
            cost,
            objective,
            jtj,
            jtr,
        }
    }
}

fn wrap_angle_near(theta: f64, target: f64) -> f64 {
    theta - PI * ((theta - target) / PI).round()
}

/// Index of the largest value inside the band, as an angular frequency.
fn peak_omega(s: &Spectrum, lo: f64, hi: f64) -> Option<(f64, f64)> {
    s.band(lo, hi)
        .map(|k| (s.values[k], s.freqs[k]))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(v, f)| (v, TWO_PI * f))
}

pub fn fit_multi(spectra: &[Spectrum], guess: &FitGuess, options: &FitOptions) -> Result<FitResult> {
    if spectra.len() < 3 {
        return Err(Error::Usage(format!(
            "joint fit needs at least 3 spectra, got {}",
            spectra.len()
        )));
    }
    for (name, v) in [
        ("gamma_m", guess.gamma_m),
        ("gamma_tot", guess.gamma_tot),
        ("gamma_meas", guess.gamma_meas),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Usage(format!("initial {name} must be positive, got {v}")));
        }
    }
    let thetas: Vec<f64> = match &guess.thetas {
        Some(t) if t.len() == spectra.len() => t.clone(),
        Some(t) => {
            return Err(Error::Usage(format!(
                "{} initial angles for {} spectra",
                t.len(),
                spectra.len()
            )))
        }
        None => spectra
            .iter()
            .map(|s| {
                s.theta_inferred
                    .ok_or_else(|| Error::Usage("spectrum lacks an angle and no initial angle was given".into()))
            })
            .collect::<Result<_>>()?,
    };
    let omega0 = match guess.omega_m {
        Some(w) => w,
        None => {
            // Largest peak over all spectra, searched across the full grid
            // or the requested band.
            let (lo, hi) = options.band_hz.unwrap_or((f64::MIN_POSITIVE, f64::INFINITY));
            spectra
                .iter()
                .filter_map(|s| peak_omega(s, lo.max(f64::MIN_POSITIVE), hi))
                .max_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, w)| w)
                .ok_or_else(|| Error::Usage("no data inside the fit band".into()))?
        }
    };
    let (lo_hz, hi_hz) = options
        .band_hz
        .unwrap_or((omega0 / TWO_PI - 25e3, omega0 / TWO_PI + 25e3));
    let data: Vec<(Vec<f64>, &[f64])> = spectra
        .iter()
        .map(|s| {
            let r = s.band(lo_hz.max(f64::MIN_POSITIVE), hi_hz);
            let ws = s.freqs[r.clone()].iter().map(|f| TWO_PI * f).collect();
            (ws, &s.values[r])
        })
        .collect();
    if data.iter().any(|(w, _)| w.len() < 3) {
        return Err(Error::Usage(format!(
            "fit band {lo_hz}–{hi_hz} Hz holds fewer than 3 bins of some spectrum"
        )));
    }
    if !(lo_hz * TWO_PI < omega0 && omega0 < hi_hz * TWO_PI) {
        return Err(Error::Usage("fit band does not contain the resonance".into()));
    }
    let points: usize = data.iter().map(|(w, _)| w.len()).sum();
    let problem = Problem { data };
    let n = problem.dim();

    let mut x = DVector::zeros(n);
    x[0] = guess.gamma_m.ln();
    x[1] = guess.gamma_tot.ln();
    x[2] = guess.gamma_meas.ln();
    for (i, t) in thetas.iter().enumerate() {
        x[SHARED + 2 * i] = omega0;
        x[SHARED + 2 * i + 1] = *t;
    }

    let mut eval = problem.evaluate(&x);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iterations {
        iterations += 1;
        if eval.cost == 0.0 {
            converged = true;
            break;
        }
        let max_diag = (0..n).map(|k| eval.jtj[(k, k)]).fold(0.0, f64::max);
        let floor = 1e-12 * max_diag.max(f64::MIN_POSITIVE);
        let mut accepted = false;
        while lambda < 1e20 {
            let mut a = eval.jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * eval.jtj[(k, k)].max(floor);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&eval.jtr));
            let trial = &x + &step;
            let trial_objective = problem.objective(&trial);
            if trial_objective.is_finite() && trial_objective <= eval.objective {
                let decrease = eval.objective - trial_objective;
                // Step size measured relative to each parameter's own scale:
                // logs and angles are O(1), Ω_m is relative.
                let scaled_step = (0..n)
                    .map(|k| {
                        if k >= SHARED && (k - SHARED) % 2 == 0 {
                            step[k].abs() / x[k].abs()
                        } else {
                            step[k].abs()
                        }
                    })
                    .fold(0.0, f64::max);
                x = trial;
                eval = problem.evaluate(&x);
                lambda = (lambda / 3.0).max(1e-15);
                accepted = true;
                // Each bin contributes O(1) to the objective.
                if decrease <= options.tolerance * points as f64 || scaled_step <= options.tolerance {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if converged {
            break;
        }
        if !accepted {
            // No downhill step at any damping: stationary to working precision.
            let grad = eval.jtr.amax();
            let scale = eval.cost.sqrt() * max_diag.sqrt();
            if grad <= 1e-8 * scale.max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
            return Err(Error::Fit {
                iterations,
                cost: eval.cost,
                reason: format!("no descent direction; gradient norm {grad:.3e}"),
            });
        }
    }
    if !converged {
        return Err(Error::Fit {
            iterations,
            cost: eval.cost,
            reason: format!(
                "not converged after {iterations} iterations; rms relative residual {:.3e}",
                (eval.cost / points as f64).sqrt()
            ),
        });
    }

    let dof = points.saturating_sub(n).max(1) as f64;
    let s2 = eval.cost / dof;
    let covariance = eval.jtj.clone().try_inverse().map(|inv| inv * s2);
    let sd = |k: usize| -> f64 {
        covariance
            .as_ref()
            .map(|c| c[(k, k)].max(0.0).sqrt())
            .unwrap_or(f64::NAN)
    };

    let gamma_m = x[0].exp();
    let gamma_tot = x[1].exp();
    let mut gamma_meas = x[2].exp();
    let eta_clamped = gamma_meas > gamma_tot;
    if eta_clamped {
        gamma_meas = gamma_tot;
    }
    let spectra_fit: Vec<SpectrumFit> = (0..spectra.len())
        .map(|i| {
            let t = x[SHARED + 2 * i + 1];
            let reference = spectra[i].theta_inferred.unwrap_or(thetas[i]);
            SpectrumFit {
                omega_m: Estimate::new(x[SHARED + 2 * i], sd(SHARED + 2 * i)),
                theta: Estimate::new(wrap_angle_near(t, reference), sd(SHARED + 2 * i + 1)),
                theta_inferred: spectra[i].theta_inferred,
            }
        })
        .collect();
    let angle_relation = angle_regression(&spectra_fit);
    Ok(FitResult {
        gamma_m: Estimate::new(gamma_m, gamma_m * sd(0)),
        gamma_tot: Estimate::new(gamma_tot, gamma_tot * sd(1)),
        gamma_meas: Estimate::new(gamma_meas, x[2].exp() * sd(2)),
        eta_meas: gamma_meas / gamma_tot,
        eta_clamped,
        cost: eval.cost,
        residual_rms: (eval.cost / points as f64).sqrt(),
        points,
        iterations,
        spectra: spectra_fit,
        angle_relation,
    })
}

/// Ordinary least squares of fitted against inferred angles.
fn angle_regression(fits: &[SpectrumFit]) -> Option<AngleRelation> {
    let pts: Vec<(f64, f64)> = fits
        .iter()
        .filter_map(|f| f.theta_inferred.map(|t| (t, f.theta.value)))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let offset = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - offset - slope * p.0).powi(2)).sum();
    let s2 = rss / (n - 2.0);
    Some(AngleRelation {
        slope: Estimate::new(slope, (s2 / sxx).sqrt()),
        offset: Estimate::new(offset, (s2 * (1.0 / n + mx * mx / sxx)).sqrt()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::hz_to_rad;

    fn truth() -> SpectralParams {
        SpectralParams {
            omega_m: hz_to_rad(73.25e3),
            gamma_m: hz_to_rad(40.0),
            gamma_tot: hz_to_rad(5.0e3),
            gamma_meas: hz_to_rad(1.4e3),
        }
    }

    fn exact_spectra(p: &SpectralParams, thetas: &[f64], offset: f64) -> Vec<Spectrum> {
        let freqs: Vec<f64> = (0..20_000).map(|k| 48e3 + 2.5 * k as f64).collect();
        thetas
            .iter()
            .map(|t| {
                let vals = freqs.iter().map(|f| p.psd(TWO_PI * f, t + offset)).collect();
                Spectrum::new(freqs.clone(), vals).unwrap().with_theta(*t)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = truth();
        let x = [p.gamma_m.ln(), p.gamma_tot.ln(), p.gamma_meas.ln(), p.omega_m, 2.3];
        for f in [60e3, 72e3, 73.2e3, 73.26e3, 80e3] {
            let w = TWO_PI * f;
            let (m, g) = model_and_gradient(&x, w);
            assert!((m - p.psd(w, 2.3)).abs() < 1e-9 * m);
            for k in 0..5 {
                let h = if k == 3 { 1e-3 } else { 1e-7 };
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let fd = (model_and_gradient(&xp, w).0 - model_and_gradient(&xm, w).0) / (2.0 * h);
                assert!((fd - g[k]).abs() <= 1e-5 * g[k].abs().max(1e-3 * m), "k={k} f={f}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn exact_recovery() {
        let p = truth();
        let thetas: Vec<f64> = (0..6).map(|k| 0.15 * PI + 0.14 * PI * k as f64).collect();
        let spectra = exact_spectra(&p, &thetas, 0.05 * PI);
        let guess = FitGuess {
            gamma_m: p.gamma_m * 1.3,
            gamma_tot: p.gamma_tot * 0.7,
            gamma_meas: p.gamma_meas * 1.4,
            omega_m: None,
            thetas: None,
        };
        let fit = fit_multi(&spectra, &guess, &FitOptions::default()).unwrap();
        assert!((fit.gamma_m.value / p.gamma_m - 1.0).abs() < 1e-8);
        assert!((fit.gamma_tot.value / p.gamma_tot - 1.0).abs() < 1e-8);
        assert!((fit.gamma_meas.value / p.gamma_meas - 1.0).abs() < 1e-8);
        assert!((fit.eta_meas - 0.28).abs() < 1e-8);
        assert!(!fit.eta_clamped);
        for (s, t) in fit.spectra.iter().zip(&thetas) {
            assert!((s.omega_m.value / p.omega_m - 1.0).abs() < 1e-10);
            assert!((s.theta.value - t - 0.05 * PI).abs() < 1e-8);
        }
        let rel = fit.angle_relation.unwrap();
        assert!((rel.slope.value - 1.0).abs() < 1e-8);
        assert!((rel.offset.value - 0.05 * PI).abs() < 1e-8);

        let again = fit_multi(&spectra, &fit.as_guess(), &FitOptions::default()).unwrap();
        assert!((again.gamma_tot.value / fit.gamma_tot.value - 1.0).abs() < 1e-9);
        assert!((again.gamma_meas.value / fit.gamma_meas.value - 1.0).abs() < 1e-9);
        assert!((again.gamma_m.value / fit.gamma_m.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn needs_three_spectra() {
        let p = truth();
        let spectra = exact_spectra(&p, &[0.5, 1.0], 0.0);
        let guess = FitGuess {
            gamma_m: 1.0,
            gamma_tot: 1.0,
            gamma_meas: 1.0,
            omega_m: None,
            thetas: None,
        };
        assert!(matches!(fit_multi(&spectra, &guess, &FitOptions::default()), Err(Error::Usage(_))));
        assert!(matches!(fit_multi(&[], &guess, &FitOptions::default()), Err(Error::Usage(_))));
    }

    #[test]
    fn iteration_cap_is_a_fit_error() {
        let p = truth();
        let spectra = exact_spectra(&p, &[0.5, 1.0, 2.0], 0.0);
        let guess = FitGuess {
            gamma_m: p.gamma_m * 3.0,
            gamma_tot: p.gamma_tot * 0.3,
            gamma_meas: p.gamma_meas,
            omega_m: None,
            thetas: None,
        };
        let opts = FitOptions {
            max_iterations: 1,
            ..FitOptions::default()
        };
        assert!(matches!(fit_multi(&spectra, &guess, &opts), Err(Error::Fit { .. })));
    }

    #[test]
    fn clamps_unphysical_efficiency() {
        let p = SpectralParams {
            gamma_meas: hz_to_rad(6.0e3),
            ..truth()
        };
        let spectra = exact_spectra(&p, &[0.6, 1.2, 1.8, 2.4], 0.0);
        let guess = FitGuess {
            gamma_m: p.gamma_m,
            gamma_tot: p.gamma_tot,
            gamma_meas: p.gamma_meas,
            omega_m: Some(p.omega_m),
            thetas: None,
        };
        let fit = fit_multi(&spectra, &guess, &FitOptions::default()).unwrap();
        assert!(fit.eta_clamped);
        assert_eq!(fit.eta_meas, 1.0);
    }
}
