use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix4, Vector4};

use super::SpectrumEstimate;
use crate::{Error, Result};

/// Result of fitting `A / [(f_r^2 - f^2)^2 + (f f_r / Q)^2] + offset`.
///
/// The fit is parameterized by the peak height above the offset,
/// `peak_amplitude = A Q^2 / f_r^4`, which is the model value at `f_r`
/// minus `noise_offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzianFit {
    pub f_r: f64,
    pub q_factor: f64,
    pub peak_amplitude: f64,
    pub noise_offset: f64,
    /// Parameter order: f_r, Q, peak_amplitude, noise_offset.
    pub covariance: [[f64; 4]; 4],
    pub residual_norm: f64,
    pub iterations: usize,
    pub n_points: usize,
}

impl LorentzianFit {
    pub fn sigma_f_r(&self) -> f64 {
        self.covariance[0][0].sqrt()
    }

    pub fn sigma_q(&self) -> f64 {
        self.covariance[1][1].sqrt()
    }

    /// The `A` of the textbook form.
    pub fn numerator(&self) -> f64 {
        self.peak_amplitude * self.f_r.powi(4) / (self.q_factor * self.q_factor)
    }

    pub fn eval(&self, f: f64) -> f64 {
        lorentzian_model(f, self.f_r, self.q_factor, self.peak_amplitude) + self.noise_offset
    }

    /// `key = value` lines followed by the covariance matrix.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "f_r = {:.17e}", self.f_r);
        let _ = writeln!(s, "q_factor = {:.17e}", self.q_factor);
        let _ = writeln!(s, "peak_amplitude = {:.17e}", self.peak_amplitude);
        let _ = writeln!(s, "noise_offset = {:.17e}", self.noise_offset);
        let _ = writeln!(s, "sigma_f_r = {:.17e}", self.sigma_f_r());
        let _ = writeln!(s, "sigma_q = {:.17e}", self.sigma_q());
        let _ = writeln!(s, "residual_norm = {:.17e}", self.residual_norm);
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "n_points = {}", self.n_points);
        let _ = writeln!(
            s,
            "covariance_order = [\"f_r\", \"q_factor\", \"peak_amplitude\", \"noise_offset\"]"
        );
        let _ = writeln!(s, "covariance = [");
        for row in &self.covariance {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            let _ = writeln!(s, "  [{}],", cells.join(", "));
        }
        let _ = writeln!(s, "]");
        s
    }

    pub fn write_text(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Peak-normalized Lorentzian without offset: equals `height` at `f_r`.
pub fn lorentzian_model(f: f64, f_r: f64, q: f64, height: f64) -> f64 {
    let d = f_r * f_r - f * f;
    let w = f * f_r / q;
    height * f_r.powi(4) / (q * q) / (d * d + w * w)
}

/// Model value and gradient with respect to (f_r, Q, height, offset).
fn model_and_grad(f: f64, p: &Vector4<f64>) -> (f64, Vector4<f64>) {
    let (fr, q, h, c) = (p[0], p[1], p[2], p[3]);
    let d = fr * fr - f * f;
    let w2 = f * f * fr * fr / (q * q);
    let den = d * d + w2;
    let num = fr.powi(4) / (q * q);
    let g = num / den;
    let num_fr = 4.0 * fr.powi(3) / (q * q);
    let den_fr = 4.0 * fr * d + 2.0 * f * f * fr / (q * q);
    let g_fr = (num_fr * den - num * den_fr) / (den * den);
    let g_q = -2.0 * fr.powi(4) / q.powi(3) * d * d / (den * den);
    (h * g + c, Vector4::new(h * g_fr, h * g_q, g, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stop when the relative decrease of the cost falls below this.
    pub cost_tolerance: f64,
    /// Require the data to cover `f_r +- coverage * f_r / Q`.
    pub coverage: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            cost_tolerance: 1e-14,
            coverage: 3.0,
        }
    }
}

fn initial_guess(freqs: &[f64], y: &[f64]) -> Vector4<f64> {
    let (k, &peak) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let floor = y.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    let height = peak - floor;
    let half = floor + height / 2.0;
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = k;
        for j in range {
            if y[j] < half {
                // linear interpolation between prev and j
                let t = (y[prev] - half) / (y[prev] - y[j]);
                return Some(freqs[prev] + t * (freqs[j] - freqs[prev]));
            }
            prev = j;
        }
        None
    };
    let left = crossing(&mut (0..k).rev());
    let right = crossing(&mut (k + 1..y.len()));
    let fr = freqs[k];
    let width = match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => 2.0 * (fr - l),
        (None, Some(r)) => 2.0 * (r - fr),
        (None, None) => (freqs[freqs.len() - 1] - freqs[0]) / 4.0,
    };
    let q = (fr / width.max(1e-12)).max(0.5);
    Vector4::new(fr, q, height.max(f64::MIN_POSITIVE), floor)
}

/// Levenberg-Marquardt fit of the Lorentzian plus constant offset.
///
/// `sigmas`, when given, weights each point by `1 / sigma^2`. The
/// covariance is scaled by the reduced chi-square.
pub fn fit_lorentzian(
    freqs: &[f64],
    values: &[f64],
    sigmas: Option<&[f64]>,
    opts: FitOptions,
) -> Result<LorentzianFit> {
    let n = freqs.len();
    if n != values.len() || sigmas.is_some_and(|s| s.len() != n) {
        return Err(Error::Precondition("fit inputs differ in length".into()));
    }
    if n < 8 {
        return Err(Error::Precondition(format!(
            "{n} points are too few for a 4-parameter fit"
        )));
    }
    if freqs.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::Precondition("fit inputs must be finite".into()));
    }
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(scale > 0.0) {
        return Err(Error::Precondition("all data are zero".into()));
    }
    let y: Vec<f64> = values.iter().map(|v| v / scale).collect();
    let wts: Vec<f64> = match sigmas {
        Some(s) => s
            .iter()
            .map(|&si| {
                let si = si / scale;
                if si > 0.0 {
                    1.0 / (si * si)
                } else {
                    0.0
                }
            })
            .collect(),
        None => vec![1.0; n],
    };

    let cost_of = |p: &Vector4<f64>| -> f64 {
        freqs
            .iter()
            .zip(&y)
            .zip(&wts)
            .map(|((&f, &yi), &w)| {
                let r = model_and_grad(f, p).0 - yi;
                w * r * r
            })
            .sum::<f64>()
    };
    let normal = |p: &Vector4<f64>| -> (Matrix4<f64>, Vector4<f64>) {
        let mut a = Matrix4::zeros();
        let mut g = Vector4::zeros();
        for ((&f, &yi), &w) in freqs.iter().zip(&y).zip(&wts) {
            let (m, j) = model_and_grad(f, p);
            a += w * j * j.transpose();
            g += w * (m - yi) * j;
        }
        (a, g)
    };

    let mut p = initial_guess(freqs, &y);
    let mut cost = cost_of(&p);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let (a, g) = normal(&p);
        let mut stepped = false;
        for _ in 0..40 {
            let mut damped = a;
            for i in 0..4 {
                damped[(i, i)] += lambda * a[(i, i)].max(1e-300);
            }
            let Some(delta) = damped.cholesky().map(|c| c.solve(&(-g))) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + delta;
            if trial[0] > 0.0 && trial[1] > 0.0 {
                let c = cost_of(&trial);
                if c.is_finite() && c <= cost {
                    let rel = (cost - c) / cost.max(f64::MIN_POSITIVE);
                    let small_step = (0..4).all(|i| delta[i].abs() <= 1e-12 * (p[i].abs() + 1e-12));
                    p = trial;
                    cost = c;
                    lambda = (lambda / 3.0).max(1e-12);
                    stepped = true;
                    if rel < opts.cost_tolerance || small_step {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= 4.0;
        }
        if !stepped {
            // no downhill step at any damping: at a minimum to precision
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged || !(p[0] > 0.0 && p[1] > 0.0) {
        return Err(Error::FitNotConverged {
            iterations,
            residual_norm: cost.sqrt() * scale,
            damping: lambda,
        });
    }

    let (a, _) = normal(&p);
    let dof = (n - 4) as f64;
    let s2 = if sigmas.is_some() {
        (cost / dof).max(0.0)
    } else {
        cost / dof
    };
    let inv = a
        .try_inverse()
        .unwrap_or_else(|| Matrix4::from_element(f64::NAN));
    let unit = [1.0, 1.0, scale, scale];
    // symmetrized against round-off
    let cov: [[f64; 4]; 4] = std::array::from_fn(|i| {
        std::array::from_fn(|j| s2 * 0.5 * (inv[(i, j)] + inv[(j, i)]) * unit[i] * unit[j])
    });

    let fit = LorentzianFit {
        f_r: p[0],
        q_factor: p[1],
        peak_amplitude: p[2] * scale,
        noise_offset: p[3] * scale,
        covariance: cov,
        residual_norm: cost.sqrt() * scale,
        iterations,
        n_points: n,
    };
    let span = opts.coverage * fit.f_r / fit.q_factor;
    let (lo, hi) = (
        freqs.iter().copied().fold(f64::INFINITY, f64::min),
        freqs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    if lo > fit.f_r - span || hi < fit.f_r + span {
        return Err(Error::Precondition(format!(
            "data [{lo:.4}, {hi:.4}] Hz do not cover f_r +- {} f_r/Q = [{:.4}, {:.4}] Hz",
            opts.coverage,
            fit.f_r - span,
            fit.f_r + span
        )));
    }
    Ok(fit)
}

/// Fits the part of a spectrum between `lo` and `hi` Hz. An averaged PSD
/// bin has relative scatter `1/sqrt(n_segments)`, so the points are
/// weighted by the model at the unweighted solution.
pub fn fit_spectrum(
    spectrum: &SpectrumEstimate,
    lo: f64,
    hi: f64,
    opts: FitOptions,
) -> Result<LorentzianFit> {
    let (f, p) = spectrum.band(lo, hi);
    let first = fit_lorentzian(&f, &p, None, opts)?;
    let m = (spectrum.n_segments_used().max(1)) as f64;
    let sig: Vec<f64> = f.iter().map(|&x| first.eval(x).abs() / m.sqrt()).collect();
    fit_lorentzian(&f, &p, Some(&sig), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let p = Vector4::new(4.99, 39.0, 2.5, 0.1);
        for f in [0.3, 4.8, 4.99, 5.1, 9.0] {
            let (_, g) = model_and_grad(f, &p);
            for i in 0..4 {
                let h = 1e-6 * p[i].abs().max(1e-3);
                let mut a = p;
                let mut b = p;
                a[i] += h;
                b[i] -= h;
                let fd = (model_and_grad(f, &a).0 - model_and_grad(f, &b).0) / (2.0 * h);
                let tol = 1e-6 * (g[i].abs() + 1e-8);
                assert!(
                    (fd - g[i]).abs() < tol.max(1e-9),
                    "f={f} i={i}: {fd} vs {}",
                    g[i]
                );
            }
        }
    }

    #[test]
    fn recovers_noiseless_susceptibility() {
        let f = grid(4.0, 6.0, 201);
        let y: Vec<f64> = f
            .iter()
            .map(|&x| lorentzian_model(x, 4.99, 39.0, 3.3e-5))
            .collect();
        let fit = fit_lorentzian(&f, &y, None, FitOptions::default()).unwrap();
        assert!((fit.f_r / 4.99 - 1.0).abs() < 1e-3);
        assert!((fit.q_factor / 39.0 - 1.0).abs() < 1e-3);
        assert!((fit.peak_amplitude / 3.3e-5 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn noisy_fit_reports_covariance_and_offset_robustness() {
        let f = grid(4.5, 5.5, 101);
        let truth: Vec<f64> = f
            .iter()
            .map(|&x| lorentzian_model(x, 4.99, 39.0, 1.0))
            .collect();
        let noise = Normal::new(0.0, 0.02).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let y: Vec<f64> = truth.iter().map(|t| t + noise.sample(&mut rng)).collect();
        let a = fit_lorentzian(&f, &y, None, FitOptions::default()).unwrap();
        assert!(a.sigma_q() > 0.0 && a.sigma_q() < 2.0);
        assert!((a.q_factor - 39.0).abs() < 4.0 * a.sigma_q());
        let shifted: Vec<f64> = y.iter().map(|v| v + 0.5).collect();
        let b = fit_lorentzian(&f, &shifted, None, FitOptions::default()).unwrap();
        assert!((a.f_r - b.f_r).abs() < a.sigma_f_r());
        assert!((a.q_factor - b.q_factor).abs() < a.sigma_q());
        assert!((b.noise_offset - a.noise_offset - 0.5).abs() < 1e-6);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(a.covariance[i][j], a.covariance[j][i]);
            }
            assert!(a.covariance[i][i] >= 0.0);
        }
    }

    #[test]
    fn scale_equivariance() {
        let f = grid(4.5, 5.5, 81);
        let y: Vec<f64> = f
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                lorentzian_model(x, 4.99, 39.0, 1.0)
                    * (1.0 + 0.01 * ((i * 7919) % 13) as f64 / 13.0)
                    + 0.05
            })
            .collect();
        let a = fit_lorentzian(&f, &y, None, FitOptions::default()).unwrap();
        let ys: Vec<f64> = y.iter().map(|v| v * 1e-9).collect();
        let b = fit_lorentzian(&f, &ys, None, FitOptions::default()).unwrap();
        assert!((a.f_r / b.f_r - 1.0).abs() < 1e-9);
        assert!((a.q_factor / b.q_factor - 1.0).abs() < 1e-8);
        assert!((b.peak_amplitude / a.peak_amplitude / 1e-9 - 1.0).abs() < 1e-8);
        assert!((b.noise_offset / a.noise_offset / 1e-9 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn narrow_data_fails_coverage() {
        let f = grid(4.95, 5.03, 30);
        let y: Vec<f64> = f
            .iter()
            .map(|&x| lorentzian_model(x, 4.99, 39.0, 1.0))
            .collect();
        assert!(matches!(
            fit_lorentzian(&f, &y, None, FitOptions::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn non_convergence_is_reported() {
        let f = grid(4.0, 6.0, 50);
        let y: Vec<f64> = f
            .iter()
            .map(|&x| lorentzian_model(x, 4.99, 39.0, 1.0))
            .collect();
        let opts = FitOptions {
            max_iterations: 1,
            cost_tolerance: 0.0,
            ..FitOptions::default()
        };
        assert!(matches!(
            fit_lorentzian(&f, &y, None, opts),
            Err(Error::FitNotConverged { .. })
        ));
    }

    #[test]
    fn text_export_lists_covariance() {
        let f = grid(4.0, 6.0, 101);
        let y: Vec<f64> = f
            .iter()
            .map(|&x| lorentzian_model(x, 4.99, 39.0, 1.0) + 1e-3)
            .collect();
        let fit = fit_lorentzian(&f, &y, None, FitOptions::default()).unwrap();
        let text = fit.to_text();
        assert!(text.contains("q_factor = "));
        assert_eq!(text.matches("  [").count(), 4);
        let parsed: toml::Table = text.parse().unwrap();
        assert!((parsed["q_factor"].as_float().unwrap() - fit.q_factor).abs() < 1e-12);
    }
}
