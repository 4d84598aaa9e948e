//! Frequency-domain response of the torsional mode.

use num_complex::Complex;

use super::DriveSignal;
use crate::{Error, OscillatorParams, PhysicalConstants, Result, Scalar};

/// Complex mechanical susceptibility, rad per N m:
///
/// `chi(f) = 1 / [4 pi^2 I (f_r^2 - f^2 + i f f_r / Q)]`
///
/// With a drive `cos(2 pi f t)` the angle responds as
/// `|chi| cos(2 pi f t + arg chi)`, so `arg chi` runs from 0 at DC through
/// `-pi/2` at resonance.
pub fn susceptibility<T: Scalar>(f: T, params: &OscillatorParams<T>) -> Complex<T> {
    let fr = params.f_res();
    let scale = T::lit(4.0) * T::PI() * T::PI() * params.inertia();
    let den = Complex::new(
        scale * (fr * fr - f * f),
        scale * f * fr / params.q_factor(),
    );
    Complex::new(T::one(), T::zero()) / den
}

/// `|chi(f)|^2` without forming the complex value.
pub fn susceptibility_sq<T: Scalar>(f: T, params: &OscillatorParams<T>) -> T {
    let fr = params.f_res();
    let scale = T::lit(4.0) * T::PI() * T::PI() * params.inertia();
    let re = fr * fr - f * f;
    let im = f * fr / params.q_factor();
    T::one() / (scale * scale * (re * re + im * im))
}

/// One-sided thermal torque PSD `8 pi k_B T I f_r / Q`, (N m)^2/Hz.
///
/// Equals `4 k_B T I gamma` with `gamma = 2 pi f_r / Q` the
/// inertia-normalized dissipation rate.
pub fn thermal_torque_psd<T: Scalar>(params: &OscillatorParams<T>, temperature: T) -> Result<T> {
    if !(temperature >= T::zero()) || !temperature.is_finite() {
        return Err(Error::domain(
            "temperature",
            temperature.to_f64_lossy(),
            "must be >= 0",
        ));
    }
    let k = PhysicalConstants::<T>::codata();
    Ok(
        T::lit(8.0) * T::PI() * k.k_b() * temperature * params.inertia() * params.f_res()
            / params.q_factor(),
    )
}

/// Discrete spectral line of a drive tone in the angle spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralLine<T> {
    pub frequency: T,
    /// Mean-square angle carried by the line, rad^2.
    pub mean_square: T,
}

/// Predicted angle spectrum at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct AnglePsd<T> {
    /// One-sided continuous part `|chi(f)|^2 S_tau`, rad^2/Hz.
    pub continuous: T,
    /// One line per drive tone.
    pub lines: Vec<SpectralLine<T>>,
}

/// One-sided angle PSD at `f` plus the discrete tone powers of `drive`.
///
/// Tabulated drives have no closed-form line spectrum and contribute no
/// lines.
pub fn analytic_angle_psd<T: Scalar>(
    f: T,
    params: &OscillatorParams<T>,
    temperature: T,
    drive: &DriveSignal<T>,
) -> Result<AnglePsd<T>> {
    if !(f >= T::zero()) {
        return Err(Error::domain("f", f.to_f64_lossy(), "must be >= 0"));
    }
    let s_tau = thermal_torque_psd(params, temperature)?;
    let lines = drive
        .tones()
        .iter()
        .map(|tone| {
            let amp =
                params.moment() * tone.amplitude * susceptibility_sq(tone.frequency, params).sqrt();
            SpectralLine {
                frequency: tone.frequency,
                mean_square: amp * amp / T::lit(2.0),
            }
        })
        .collect();
    Ok(AnglePsd {
        continuous: susceptibility_sq(f, params) * s_tau,
        lines,
    })
}

/// Continuous part of [`analytic_angle_psd`] on a frequency grid.
pub fn thermal_angle_psd<T: Scalar>(
    freqs: &[T],
    params: &OscillatorParams<T>,
    temperature: T,
) -> Result<Vec<T>> {
    let s_tau = thermal_torque_psd(params, temperature)?;
    Ok(freqs
        .iter()
        .map(|&f| susceptibility_sq(f, params) * s_tau)
        .collect())
}
