//! Time-domain Langevin integration of the torsional mode:
//!
//! `I theta'' + I gamma theta' + k theta = moment * B_sig(t) + tau_th(t)`
//!
//! with `gamma = 2 pi f_r / Q` and `tau_th` white Gaussian torque whose
//! one-sided PSD is [`thermal_torque_psd`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::response::{susceptibility, thermal_torque_psd};
use super::{AngleSeries, DriveSignal};
use crate::linalg::Mat2;
use crate::{Error, OscillatorParams, PhysicalConstants, Result};

/// Coarsest step allowed, as a fraction of the resonance period.
pub const MAX_STEP_PER_PERIOD: f64 = 1.0 / 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// Exact discretization of the linear stochastic system: closed-form
    /// state transition, exactly sampled Gaussian increments, tones handled
    /// through their analytic steady state and tabulated drives through an
    /// exact first-order hold.
    #[default]
    Exact,
    /// Semi-implicit Euler-Maruyama (velocity first). Cross-check only; it
    /// carries O(dt) bias in damping and frequency.
    EulerMaruyama,
}

/// Full set of inputs for one simulation run.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub params: OscillatorParams<f64>,
    pub drive: DriveSignal<f64>,
    /// K.
    pub temperature: f64,
    /// s.
    pub dt: f64,
    /// s.
    pub duration: f64,
    pub seed: u64,
    pub integrator: Integrator,
    /// rad.
    pub initial_angle: f64,
    /// rad/s.
    pub initial_rate: f64,
    /// Keep angular rates in the output (needed for Hermite resampling).
    pub record_rates: bool,
}

impl SimulationConfig {
    pub fn new(params: OscillatorParams<f64>, dt: f64, duration: f64) -> Self {
        Self {
            params,
            drive: DriveSignal::None,
            temperature: 0.0,
            dt,
            duration,
            seed: 0,
            integrator: Integrator::Exact,
            initial_angle: 0.0,
            initial_rate: 0.0,
            record_rates: true,
        }
    }

    pub fn drive(mut self, drive: DriveSignal<f64>) -> Self {
        self.drive = drive;
        self
    }

    pub fn temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn initial_state(mut self, angle: f64, rate: f64) -> Self {
        self.initial_angle = angle;
        self.initial_rate = rate;
        self
    }

    pub fn record_rates(mut self, yes: bool) -> Self {
        self.record_rates = yes;
        self
    }

    /// Number of samples produced: `round(duration / dt)`.
    pub fn n_samples(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    fn validate(&self) -> Result<()> {
        let p = &self.params;
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::domain("dt", self.dt, "must be > 0"));
        }
        let max_dt = MAX_STEP_PER_PERIOD / p.f_res();
        if self.dt > max_dt * (1.0 + 1e-9) {
            return Err(Error::Precondition(format!(
                "dt = {:.4e} s exceeds 1/(50 f_res) = {:.4e} s",
                self.dt, max_dt
            )));
        }
        if !(self.duration >= 10.0 * self.dt) || !self.duration.is_finite() {
            return Err(Error::Precondition(format!(
                "duration {} s is shorter than 10 steps of {} s",
                self.duration, self.dt
            )));
        }
        if !(self.temperature >= 0.0) || !self.temperature.is_finite() {
            return Err(Error::domain(
                "temperature",
                self.temperature,
                "must be >= 0",
            ));
        }
        Ok(())
    }

    pub fn run(&self) -> Result<AngleSeries> {
        self.validate()?;
        match self.integrator {
            Integrator::Exact => run_exact(self),
            Integrator::EulerMaruyama => run_euler_maruyama(self),
        }
    }
}

/// Simulates with the exact integrator, starting at rest.
pub fn simulate(
    params: &OscillatorParams<f64>,
    drive: &DriveSignal<f64>,
    temperature: f64,
    dt: f64,
    duration: f64,
    seed: u64,
) -> Result<AngleSeries> {
    SimulationConfig::new(*params, dt, duration)
        .drive(drive.clone())
        .temperature(temperature)
        .seed(seed)
        .run()
}

/// Closed-form `exp(A dt)` for `A = [[0, 1], [-w0^2, -gamma]]`.
pub(crate) fn transition_matrix(w0: f64, gamma: f64, dt: f64) -> Mat2 {
    let a = 0.5 * gamma;
    let disc = w0 * w0 - a * a;
    let (c, s) = if disc > 0.0 {
        let wd = disc.sqrt();
        ((wd * dt).cos(), (wd * dt).sin() / wd)
    } else if disc < 0.0 {
        let wd = (-disc).sqrt();
        ((wd * dt).cosh(), (wd * dt).sinh() / wd)
    } else {
        (1.0, dt)
    };
    let e = (-a * dt).exp();
    Mat2::new(c + a * s, s, -w0 * w0 * s, c - a * s).scale(e)
}

/// Per-step noise covariance, from the stationary covariance
/// `P = k_B T diag(1/k, 1/I)` via `Q_d = P - Phi P Phi^T`.
fn step_noise_factor(params: &OscillatorParams<f64>, temperature: f64, phi: Mat2) -> Mat2 {
    if temperature == 0.0 {
        return Mat2::diag(0.0, 0.0);
    }
    let kt = PhysicalConstants::<f64>::codata().k_b() * temperature;
    let p = Mat2::diag(kt / params.stiffness(), kt / params.inertia());
    let q = p - phi * p * phi.transpose();
    // symmetrize against round-off
    let off = 0.5 * (q.b + q.c);
    Mat2::new(q.a, off, off, q.d).cholesky_lower()
}

/// Analytic steady-state response `(theta_p, omega_p)` to the tone part of
/// the drive.
struct ToneResponse {
    // (angular frequency, angle amplitude, total phase)
    parts: Vec<(f64, f64, f64)>,
}

impl ToneResponse {
    fn new(params: &OscillatorParams<f64>, drive: &DriveSignal<f64>) -> Self {
        let parts = drive
            .tones()
            .iter()
            .map(|t| {
                let chi = susceptibility(t.frequency, params);
                (
                    std::f64::consts::TAU * t.frequency,
                    params.moment() * t.amplitude * chi.norm(),
                    t.phase + chi.arg(),
                )
            })
            .collect();
        Self { parts }
    }

    fn at(&self, t: f64) -> [f64; 2] {
        let mut th = 0.0;
        let mut om = 0.0;
        for &(w, a, ph) in &self.parts {
            let x = w * t + ph;
            th += a * x.cos();
            om -= a * w * x.sin();
        }
        [th, om]
    }
}

/// Exact first-order-hold input coefficients for an acceleration input.
struct HoldGains {
    m0: [f64; 2],
    m1: [f64; 2],
}

impl HoldGains {
    fn new(w0: f64, gamma: f64, dt: f64, phi: Mat2) -> Self {
        let a_inv = Mat2::new(-gamma / (w0 * w0), -1.0 / (w0 * w0), 1.0, 0.0);
        let b = [0.0, 1.0];
        let int0 = a_inv * (phi - Mat2::IDENTITY);
        let m0 = int0.apply(b);
        let int1 = a_inv * (phi.scale(dt) - a_inv * (phi - Mat2::IDENTITY));
        let t1 = int1.apply(b);
        let m1 = [m0[0] - t1[0] / dt, m0[1] - t1[1] / dt];
        Self { m0, m1 }
    }
}

fn run_exact(cfg: &SimulationConfig) -> Result<AngleSeries> {
    let p = &cfg.params;
    let n = cfg.n_samples();
    let dt = cfg.dt;
    let w0 = p.omega_res();
    let gamma = p.dissipation_rate();
    let phi = transition_matrix(w0, gamma, dt);
    let noise = step_noise_factor(p, cfg.temperature, phi);
    let tones = ToneResponse::new(p, &cfg.drive);
    let has_table = matches!(cfg.drive, DriveSignal::Tabulated { .. });
    let hold = HoldGains::new(w0, gamma, dt, phi);
    let accel = |t: f64| p.moment() * cfg.drive.table_value_at(t) / p.inertia();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noisy = cfg.temperature > 0.0;

    let p0 = tones.at(0.0);
    let mut x = [cfg.initial_angle - p0[0], cfg.initial_rate - p0[1]];
    let mut angles = Vec::with_capacity(n);
    let mut rates = cfg.record_rates.then(|| Vec::with_capacity(n));
    let mut u_prev = if has_table { accel(0.0) } else { 0.0 };

    for i in 0..n {
        let t = i as f64 * dt;
        let part = tones.at(t);
        angles.push(x[0] + part[0]);
        if let Some(r) = rates.as_mut() {
            r.push(x[1] + part[1]);
        }
        let mut next = phi.apply(x);
        if has_table {
            let u_next = accel((i + 1) as f64 * dt);
            let du = u_next - u_prev;
            next[0] += hold.m0[0] * u_prev + hold.m1[0] * du;
            next[1] += hold.m0[1] * u_prev + hold.m1[1] * du;
            u_prev = u_next;
        }
        if noisy {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            let dz = noise.apply([z1, z2]);
            next[0] += dz[0];
            next[1] += dz[1];
        }
        x = next;
    }

    Ok(AngleSeries::from_parts(
        dt,
        angles,
        rates,
        Some(cfg.seed),
        Some(*p),
    ))
}

fn run_euler_maruyama(cfg: &SimulationConfig) -> Result<AngleSeries> {
    let p = &cfg.params;
    let n = cfg.n_samples();
    let dt = cfg.dt;
    let w0sq = p.omega_res().powi(2);
    let gamma = p.dissipation_rate();
    let s_tau = thermal_torque_psd(p, cfg.temperature)?;
    // one-sided torque PSD S -> two-sided S/2 -> rate increment variance
    let sigma = (0.5 * s_tau * dt).sqrt() / p.inertia();
    let gain = p.moment() / p.inertia();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut theta = cfg.initial_angle;
    let mut omega = cfg.initial_rate;
    let mut angles = Vec::with_capacity(n);
    let mut rates = cfg.record_rates.then(|| Vec::with_capacity(n));
    for i in 0..n {
        let t = i as f64 * dt;
        angles.push(theta);
        if let Some(r) = rates.as_mut() {
            r.push(omega);
        }
        let acc = -w0sq * theta - gamma * omega + gain * cfg.drive.value_at(t);
        omega += acc * dt;
        if sigma > 0.0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            omega += sigma * z;
        }
        theta += omega * dt;
    }
    Ok(AngleSeries::from_parts(
        dt,
        angles,
        rates,
        Some(cfg.seed),
        Some(*p),
    ))
}
