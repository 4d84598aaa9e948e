//! Post-processing lock-in detection on timestamped tracks and simulated
//! frequency sweeps.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::optics::{render_and_track, Jitter, ReadoutGeometry, TrackerSettings};
use crate::spectral::{fit_lorentzian, FitOptions, LorentzianFit};
use crate::{DriveSignal, Error, OscillatorParams, Result, SimulationConfig, SpotTrack};

/// Minimum record length, in reference periods.
pub const MIN_PERIODS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockInResult {
    pub frequency: f64,
    pub in_phase: f64,
    pub quadrature: f64,
    pub amplitude: f64,
    /// Phase of the signal relative to `cos(2 pi f t)`, in (-pi, pi].
    pub phase: f64,
    pub integration_time: f64,
}

/// Demodulates `values` sampled at `times` against `cos` and `sin` of
/// `2 pi f_ref t` over the longest whole number of reference periods.
///
/// The signal is modeled as `X cos(wt) - Y sin(wt) + c`, so that
/// `amplitude = hypot(X, Y)` and the signal is `amplitude cos(wt + phase)`.
/// The three coefficients come from a least-squares fit in which each
/// sample is weighted by its local time gap (trapezoid rule). For uniform
/// sampling this reduces to the classic block-average demodulator; for
/// jittered timestamps it keeps the estimate unbiased.
pub fn lock_in_series(times: &[f64], values: &[f64], f_ref: f64) -> Result<LockInResult> {
    if times.len() != values.len() {
        return Err(Error::Precondition(
            "times and values differ in length".into(),
        ));
    }
    if !(f_ref > 0.0) {
        return Err(Error::domain("f_ref", f_ref, "must be > 0"));
    }
    let n = times.len();
    if n < 4 {
        return Err(Error::Precondition(
            "lock-in needs at least four samples".into(),
        ));
    }
    let t0 = times[0];
    let span = times[n - 1] - t0;
    let mean_dt = span / (n - 1) as f64;
    if f_ref >= 0.5 / mean_dt {
        return Err(Error::Precondition(format!(
            "f_ref = {f_ref} Hz is not below the Nyquist frequency {} Hz",
            0.5 / mean_dt
        )));
    }
    let periods = (span * f_ref + 1e-9).floor();
    if periods < MIN_PERIODS {
        return Err(Error::Precondition(format!(
            "record spans {:.2} periods of {f_ref} Hz; need at least {MIN_PERIODS}",
            span * f_ref
        )));
    }
    let t_end = t0 + periods / f_ref;
    let m = times.partition_point(|&t| t <= t_end + 1e-9 * mean_dt);
    let t = &times[..m];
    let y = &values[..m];
    let omega = std::f64::consts::TAU * f_ref;

    let mut a = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for i in 0..m {
        let left = if i > 0 { t[i] - t[i - 1] } else { 0.0 };
        let right = if i + 1 < m { t[i + 1] - t[i] } else { 0.0 };
        let w = 0.5 * (left + right);
        // reduce the phase in f64 before the trig call
        let (s, c) = (omega * (t[i] - t0)).sin_cos();
        let (s0, c0) = (omega * t0).sin_cos();
        let cos_t = c * c0 - s * s0;
        let sin_t = s * c0 + c * s0;
        let basis = Vector3::new(cos_t, -sin_t, 1.0);
        a += w * basis * basis.transpose();
        b += w * y[i] * basis;
    }
    let coef = a
        .cholesky()
        .map(|ch| ch.solve(&b))
        .ok_or_else(|| Error::Precondition("degenerate lock-in design".into()))?;
    let (x, q) = (coef[0], coef[1]);
    let mut phase = q.atan2(x);
    if phase <= -std::f64::consts::PI {
        phase += std::f64::consts::TAU;
    }
    Ok(LockInResult {
        frequency: f_ref,
        in_phase: x,
        quadrature: q,
        amplitude: x.hypot(q),
        phase,
        integration_time: periods / f_ref,
    })
}

/// Lock-in on a spot track using its actual (`true`) or nominal frame
/// times.
pub fn lock_in(track: &SpotTrack, f_ref: f64, use_actual_timestamps: bool) -> Result<LockInResult> {
    let t = if use_actual_timestamps {
        track.timestamps()
    } else {
        track.nominal_timestamps()
    };
    lock_in_series(t, track.positions(), f_ref)
}

/// How each sweep point is read out.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SweepReadout {
    /// Lock-in directly on the simulated angle (rad).
    #[default]
    Angle,
    /// Angle times the lever gain (px), no camera model.
    Lever { geometry: ReadoutGeometry },
    /// Full render and centroid tracking (px).
    Camera {
        geometry: ReadoutGeometry,
        #[serde(default)]
        jitter: Jitter,
        #[serde(default)]
        photon_noise: bool,
        #[serde(default)]
        tracker: TrackerSettings,
        #[serde(default = "default_true")]
        use_actual_timestamps: bool,
    },
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub temperature: f64,
    /// Integration step, s.
    pub dt: f64,
    /// Settling time discarded before measuring; `None` means `10 Q / f_r`.
    pub settle_time: Option<f64>,
    /// Measurement time per point, s.
    pub measure_time: f64,
    pub seed: u64,
    pub readout: SweepReadout,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            temperature: 300.0,
            dt: 1e-3,
            settle_time: None,
            measure_time: 40.0,
            seed: 0,
            readout: SweepReadout::Angle,
        }
    }
}

/// SplitMix64 step, used to derive independent per-point seeds.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    frequencies: Vec<f64>,
    amplitudes: Vec<f64>,
    phases: Vec<f64>,
}

impl SweepResult {
    pub fn new(frequencies: Vec<f64>, amplitudes: Vec<f64>, phases: Vec<f64>) -> Result<Self> {
        if frequencies.len() != amplitudes.len() || amplitudes.len() != phases.len() {
            return Err(Error::Precondition("sweep columns differ in length".into()));
        }
        if frequencies.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition(
                "sweep frequencies must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            frequencies,
            amplitudes,
            phases,
        })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn squared_amplitudes(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a * a).collect()
    }

    /// Lorentzian fit of the squared amplitudes.
    ///
    /// Thermal noise in the lock-in output scales with `|chi|`, and it
    /// enters `A^2` multiplied by `A`, so the scatter of each point follows
    /// the line shape itself. The points are weighted by the model at the
    /// unweighted solution; without that the covariance understates the
    /// spread of `Q` by about half.
    pub fn fit(&self, opts: FitOptions) -> Result<LorentzianFit> {
        let y = self.squared_amplitudes();
        let first = fit_lorentzian(&self.frequencies, &y, None, opts)?;
        let floor = 1e-3 * first.peak_amplitude.abs();
        let sig: Vec<f64> = self
            .frequencies
            .iter()
            .map(|&f| first.eval(f).abs().max(floor))
            .collect();
        fit_lorentzian(&self.frequencies, &y, Some(&sig), opts)
    }

    /// Grid frequency of the largest amplitude.
    pub fn peak_frequency(&self) -> Option<f64> {
        self.amplitudes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| self.frequencies[i])
    }

    /// Columns `freq_hz,amp,phase_rad`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["freq_hz", "amp", "phase_rad"])?;
        for i in 0..self.len() {
            w.write_record([
                format!("{:.17e}", self.frequencies[i]),
                format!("{:.17e}", self.amplitudes[i]),
                format!("{:.17e}", self.phases[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Simulates the oscillator driven by `drive_amplitude cos(2 pi f t)` (T)
/// at every grid frequency, discards the settling transient and locks in on
/// the response. Points run in parallel, each with its own derived seed.
pub fn frequency_sweep(
    params: &OscillatorParams<f64>,
    drive_amplitude: f64,
    f_grid: &[f64],
    settings: &SweepSettings,
) -> Result<SweepResult> {
    if f_grid.is_empty() {
        return Err(Error::Precondition("empty frequency grid".into()));
    }
    if f_grid.windows(2).any(|w| !(w[1] > w[0])) || !(f_grid[0] > 0.0) {
        return Err(Error::Precondition(
            "frequency grid must be positive and strictly increasing".into(),
        ));
    }
    if !(settings.measure_time > 0.0) {
        return Err(Error::domain(
            "measure_time",
            settings.measure_time,
            "must be > 0",
        ));
    }
    let settle = settings
        .settle_time
        .unwrap_or(10.0 * params.q_factor() / params.f_res());
    let points = f_grid
        .par_iter()
        .enumerate()
        .map(|(i, &f)| {
            sweep_point(
                params,
                drive_amplitude,
                f,
                settle,
                settings,
                derive_seed(settings.seed, i as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    SweepResult::new(
        f_grid.to_vec(),
        points.iter().map(|r| r.amplitude).collect(),
        points.iter().map(|r| r.phase).collect(),
    )
}

fn sweep_point(
    params: &OscillatorParams<f64>,
    drive_amplitude: f64,
    f: f64,
    settle: f64,
    settings: &SweepSettings,
    seed: u64,
) -> Result<LockInResult> {
    let rendered = matches!(settings.readout, SweepReadout::Camera { .. });
    let series = SimulationConfig::new(*params, settings.dt, settle + settings.measure_time)
        .drive(DriveSignal::sinusoid(drive_amplitude, f, 0.0))
        .temperature(settings.temperature)
        .seed(seed)
        .record_rates(rendered)
        .run()?
        .drop_before(settle);
    match &settings.readout {
        SweepReadout::Angle => lock_in_series(series.timestamps(), series.angles(), f),
        SweepReadout::Lever { geometry } => {
            let gain = geometry.lever_gain();
            let px: Vec<f64> = series.angles().iter().map(|a| a * gain).collect();
            lock_in_series(series.timestamps(), &px, f)
        }
        SweepReadout::Camera {
            geometry,
            jitter,
            photon_noise,
            tracker,
            use_actual_timestamps,
        } => {
            let track =
                render_and_track(&series, geometry, *jitter, *photon_noise, seed, *tracker)?;
            lock_in(&track, f, *use_actual_timestamps)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::susceptibility;
    use std::f64::consts::{PI, TAU};

    fn tone(n: usize, fs: f64, f: f64, a: f64, phi: f64) -> (Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..n).map(|i| i as f64 / fs).collect();
        let y = t
            .iter()
            .map(|&x| a * (TAU * f * x + phi).cos() + 0.3)
            .collect();
        (t, y)
    }

    #[test]
    fn pure_tone_amplitude_and_phase() {
        let (t, y) = tone(50 * 30, 50.0, 4.99, 2.5, -0.7);
        let r = lock_in_series(&t, &y, 4.99).unwrap();
        assert!((r.amplitude / 2.5 - 1.0).abs() < 1e-3);
        assert!((r.phase + 0.7).abs() < 1e-3);
        assert!((r.amplitude - r.in_phase.hypot(r.quadrature)).abs() < 1e-15);
        assert!(
            (r.integration_time * 4.99).fract() < 1e-9
                || (r.integration_time * 4.99).fract() > 1.0 - 1e-9
        );
    }

    #[test]
    fn phase_range_includes_pi() {
        let (t, y) = tone(5000, 50.0, 1.0, 1.0, PI);
        let r = lock_in_series(&t, &y, 1.0).unwrap();
        assert!(r.phase > 0.0 && (r.phase - PI).abs() < 1e-9);
    }

    #[test]
    fn harmonic_rejection() {
        let (t, y) = tone(50 * 100, 50.0, 2.0 * 4.99, 1.0, 0.2);
        let r = lock_in_series(&t, &y, 4.99).unwrap();
        assert!(r.amplitude < 0.01);
    }

    #[test]
    fn too_short_and_aliased_are_rejected() {
        let (t, y) = tone(50 * 2, 50.0, 4.99, 1.0, 0.0);
        assert!(matches!(
            lock_in_series(&t, &y, 4.99),
            Err(Error::Precondition(_))
        ));
        let (t, y) = tone(5000, 50.0, 1.0, 1.0, 0.0);
        assert!(lock_in_series(&t, &y, 30.0).is_err());
    }

    #[test]
    fn jittered_timestamps_are_unbiased_when_used() {
        let (nom, act) =
            crate::optics::frame_schedule(0.0, 400.0, 50.0, Jitter::gaussian(2e-3), 7).unwrap();
        let y: Vec<f64> = act.iter().map(|&x| (TAU * 4.99 * x).cos()).collect();
        let actual = lock_in_series(&act, &y, 4.99).unwrap();
        let nominal = lock_in_series(&nom, &y, 4.99).unwrap();
        assert!((actual.amplitude - 1.0).abs() < 1e-6);
        assert!(nominal.amplitude < 1.0);
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..100).map(|i| derive_seed(7, i)).collect();
        let mut b = a.clone();
        b.sort();
        b.dedup();
        assert_eq!(b.len(), 100);
        assert_eq!(derive_seed(7, 3), a[3]);
    }

    #[test]
    fn noiseless_sweep_follows_susceptibility() {
        let p = OscillatorParams::reference();
        let grid: Vec<f64> = (0..5).map(|i| 4.97 + 0.01 * i as f64).collect();
        let settings = SweepSettings {
            temperature: 0.0,
            measure_time: 20.0,
            ..Default::default()
        };
        let r = frequency_sweep(&p, 1e-9, &grid, &settings).unwrap();
        for (i, &f) in grid.iter().enumerate() {
            let chi = susceptibility(f, &p);
            let expected = p.moment() * 1e-9 * chi.norm();
            assert!((r.amplitudes()[i] / expected - 1.0).abs() < 1e-3);
            assert!((r.phases()[i] - chi.arg()).abs() < 1e-3);
        }
        assert!((r.peak_frequency().unwrap() - 4.99).abs() < 0.011);
    }

    #[test]
    fn sweep_result_csv() {
        let r = SweepResult::new(vec![1.0, 2.0], vec![0.1, 0.2], vec![-0.1, -1.5]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sweep.csv");
        r.write_csv(&p).unwrap();
        assert!(std::fs::read_to_string(&p)
            .unwrap()
            .starts_with("freq_hz,amp,phase_rad\n"));
        assert!(SweepResult::new(vec![2.0, 1.0], vec![0.0; 2], vec![0.0; 2]).is_err());
    }
}
