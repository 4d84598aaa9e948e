//! Field-to-pixel transfer function and magnetic sensitivity.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::dynamics::{susceptibility_sq, thermal_torque_psd};
use crate::oscillator::{sphere_oscillator, sphere_resonant_frequency};
use crate::spectral::SpectrumEstimate;
use crate::{Error, MaterialProperties, OscillatorParams, PhysicalConstants, Result, Scalar};

/// `C_T(f) = c_at_cal |chi(f)| / |chi(f_cal)|`, px/T.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferFunction<T> {
    c_at_cal: T,
    f_cal: T,
    params: OscillatorParams<T>,
    uncertainty: T,
    q_sigma: T,
}

impl<T: Scalar> TransferFunction<T> {
    /// `uncertainty` is the relative 1-sigma error of `c_at_cal`.
    pub fn new(c_at_cal: T, f_cal: T, params: OscillatorParams<T>, uncertainty: T) -> Result<Self> {
        if !(c_at_cal > T::zero()) || !c_at_cal.is_finite() {
            return Err(Error::domain(
                "c_at_cal",
                c_at_cal.to_f64_lossy(),
                "must be > 0",
            ));
        }
        if !(f_cal >= T::zero()) || !f_cal.is_finite() {
            return Err(Error::domain("f_cal", f_cal.to_f64_lossy(), "must be >= 0"));
        }
        if !(uncertainty >= T::zero()) {
            return Err(Error::domain(
                "uncertainty",
                uncertainty.to_f64_lossy(),
                "must be >= 0",
            ));
        }
        Ok(Self {
            c_at_cal,
            f_cal,
            params,
            uncertainty,
            q_sigma: T::zero(),
        })
    }

    /// Builds the transfer function from a calibration peak of mean-square
    /// area `a_cal` (px^2) produced by a field of amplitude `b_cal` (T).
    pub fn from_calibration(
        a_cal: T,
        rel_a: T,
        b_cal: T,
        rel_b: T,
        f_cal: T,
        params: OscillatorParams<T>,
    ) -> Result<Self> {
        let c = transfer_from_calibration(a_cal, b_cal)?;
        Self::new(c, f_cal, params, transfer_uncertainty(rel_a, rel_b))
    }

    /// Carries a 1-sigma uncertainty on Q into [`Self::relative_uncertainty_at`].
    pub fn with_q_sigma(mut self, q_sigma: T) -> Self {
        self.q_sigma = q_sigma.abs();
        self
    }

    pub fn c_at_cal(&self) -> T {
        self.c_at_cal
    }

    pub fn f_cal(&self) -> T {
        self.f_cal
    }

    pub fn params(&self) -> &OscillatorParams<T> {
        &self.params
    }

    pub fn uncertainty(&self) -> T {
        self.uncertainty
    }

    pub fn q_sigma(&self) -> T {
        self.q_sigma
    }

    /// Same as [`extend_transfer`].
    pub fn at(&self, f: T) -> T {
        extend_transfer(self, f)
    }

    /// Relative 1-sigma error of `C_T(f)`: the anchor error plus the change
    /// in the `|chi|` shape ratio caused by the Q error, in quadrature.
    pub fn relative_uncertainty_at(&self, f: T) -> T {
        let g = |x: T| {
            let fr = self.params.f_res();
            let q = self.params.q_factor();
            let re = fr * fr - x * x;
            let im = x * fr / q;
            // d ln|chi| / dQ
            im * im / (q * (re * re + im * im))
        };
        let shape = self.q_sigma * (g(f) - g(self.f_cal)).abs();
        (self.uncertainty * self.uncertainty + shape * shape).sqrt()
    }
}

/// `sqrt(2 a_cal) / b_cal`: transfer coefficient from a calibration peak of
/// mean-square area `a_cal` and field amplitude `b_cal`.
pub fn transfer_from_calibration<T: Scalar>(a_cal: T, b_cal: T) -> Result<T> {
    if !(a_cal > T::zero()) || !a_cal.is_finite() {
        return Err(Error::domain("a_cal", a_cal.to_f64_lossy(), "must be > 0"));
    }
    if !(b_cal > T::zero()) || !b_cal.is_finite() {
        return Err(Error::domain("b_cal", b_cal.to_f64_lossy(), "must be > 0"));
    }
    Ok((T::lit(2.0) * a_cal).sqrt() / b_cal)
}

/// Relative error of `sqrt(2 A) / B` from the relative errors of `A` and `B`.
pub fn transfer_uncertainty<T: Scalar>(rel_a: T, rel_b: T) -> T {
    let half = rel_a / T::lit(2.0);
    (half * half + rel_b * rel_b).sqrt()
}

/// `c_at_cal |chi(f)| / |chi(f_cal)|`.
pub fn extend_transfer<T: Scalar>(tf: &TransferFunction<T>, f: T) -> T {
    let ratio = susceptibility_sq(f, &tf.params) / susceptibility_sq(tf.f_cal, &tf.params);
    tf.c_at_cal * ratio.sqrt()
}

/// Transfer function predicted from the optics: `lever_gain mu |chi(f)|`,
/// px/T, where `lever_gain = 2 L / l_c` in px/rad.
pub fn theoretical_transfer<T: Scalar>(params: &OscillatorParams<T>, lever_gain: T, f: T) -> T {
    lever_gain * params.moment() * susceptibility_sq(f, params).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensitivityProvenance {
    /// Noise of a free-running sensor divided by its transfer function.
    Measured,
    /// Thermal torque noise alone.
    ThermalLimit,
    /// Readout noise with the rotor clamped, divided by the same transfer
    /// function.
    MeasurementFloor,
}

impl SensitivityProvenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Measured => "measured",
            Self::ThermalLimit => "thermal-limit",
            Self::MeasurementFloor => "measurement-floor",
        }
    }
}

impl fmt::Display for SensitivityProvenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SensitivityProvenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "measured" => Ok(Self::Measured),
            "thermal-limit" => Ok(Self::ThermalLimit),
            "measurement-floor" => Ok(Self::MeasurementFloor),
            other => Err(Error::Config(format!("unknown provenance '{other}'"))),
        }
    }
}

/// Magnetic sensitivity on a frequency grid, T/sqrt(Hz).
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityCurve {
    frequencies: Vec<f64>,
    eta: Vec<f64>,
    relative_uncertainty: Vec<f64>,
    provenance: SensitivityProvenance,
}

impl SensitivityCurve {
    pub fn new(
        frequencies: Vec<f64>,
        eta: Vec<f64>,
        provenance: SensitivityProvenance,
    ) -> Result<Self> {
        let n = eta.len();
        Self::with_uncertainty(frequencies, eta, vec![0.0; n], provenance)
    }

    pub fn with_uncertainty(
        frequencies: Vec<f64>,
        eta: Vec<f64>,
        relative_uncertainty: Vec<f64>,
        provenance: SensitivityProvenance,
    ) -> Result<Self> {
        if frequencies.len() != eta.len() || eta.len() != relative_uncertainty.len() {
            return Err(Error::Precondition(
                "sensitivity curve columns differ in length".into(),
            ));
        }
        if let Some(i) = eta.iter().position(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::Precondition(format!(
                "eta must be positive and finite; got {} at {} Hz",
                eta[i], frequencies[i]
            )));
        }
        Ok(Self {
            frequencies,
            eta,
            relative_uncertainty,
            provenance,
        })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn relative_uncertainty(&self) -> &[f64] {
        &self.relative_uncertainty
    }

    pub fn provenance(&self) -> SensitivityProvenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    /// Value at the grid point nearest to `f`.
    pub fn nearest(&self, f: f64) -> Option<(f64, f64)> {
        let i = self
            .frequencies
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - f).abs().total_cmp(&(b.1 - f).abs()))?
            .0;
        Some((self.frequencies[i], self.eta[i]))
    }

    /// Columns `freq_hz,eta_T_per_rtHz,provenance`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["freq_hz", "eta_T_per_rtHz", "provenance"])?;
        for (f, e) in self.frequencies.iter().zip(&self.eta) {
            w.write_record([
                format!("{f:.17e}"),
                format!("{e:.17e}"),
                self.provenance.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bad = |reason: String| Error::Format {
            kind: "sensitivity csv",
            path: path.to_path_buf(),
            reason,
        };
        let mut r = csv::Reader::from_path(path)?;
        if r.headers()?.iter().collect::<Vec<_>>() != ["freq_hz", "eta_T_per_rtHz", "provenance"] {
            return Err(bad("unexpected header".into()));
        }
        let (mut f, mut e) = (Vec::new(), Vec::new());
        let mut prov = None;
        for rec in r.records() {
            let rec = rec?;
            let p: SensitivityProvenance = rec[2].parse()?;
            if prov.is_some_and(|q| q != p) {
                return Err(bad("mixed provenance".into()));
            }
            prov = Some(p);
            f.push(
                rec[0]
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("bad frequency '{}'", &rec[0])))?,
            );
            e.push(
                rec[1]
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("bad eta '{}'", &rec[1])))?,
            );
        }
        Self::new(f, e, prov.unwrap_or(SensitivityProvenance::Measured))
    }
}

/// `eta(f) = sqrt(S_y(f)) / C_T(f)` on every bin strictly between 0 and
/// Nyquist. `spectrum` is the one-sided PSD of the spot track, px^2/Hz.
pub fn sensitivity_from_noise(
    spectrum: &SpectrumEstimate,
    tf: &TransferFunction<f64>,
    provenance: SensitivityProvenance,
) -> Result<SensitivityCurve> {
    let nyquist = spectrum.nyquist();
    let mut freqs = Vec::new();
    let mut eta = Vec::new();
    let mut unc = Vec::new();
    for (&f, &s) in spectrum.frequencies().iter().zip(spectrum.psd()) {
        if f <= 0.0 || f >= nyquist {
            continue;
        }
        if !(s > 0.0) {
            return Err(Error::Precondition(format!(
                "PSD is not positive at {f} Hz"
            )));
        }
        freqs.push(f);
        eta.push(s.sqrt() / tf.at(f));
        unc.push(tf.relative_uncertainty_at(f));
    }
    SensitivityCurve::with_uncertainty(freqs, eta, unc, provenance)
}

/// Thermal-limit sensitivity of a given oscillator, `sqrt(S_tau) / mu`,
/// T/sqrt(Hz). It is the same at every frequency.
pub fn oscillator_thermal_sensitivity<T: Scalar>(
    params: &OscillatorParams<T>,
    temperature: T,
) -> Result<T> {
    Ok(thermal_torque_psd(params, temperature)?.sqrt() / params.moment())
}

/// [`oscillator_thermal_sensitivity`] on a frequency grid.
pub fn thermal_limit_curve(
    params: &OscillatorParams<f64>,
    temperature: f64,
    freqs: &[f64],
) -> Result<SensitivityCurve> {
    let eta = oscillator_thermal_sensitivity(params, temperature)?;
    SensitivityCurve::new(
        freqs.to_vec(),
        vec![eta; freqs.len()],
        SensitivityProvenance::ThermalLimit,
    )
}

/// `F0 = (3/pi)^(1/2) (2/5)^(1/4)`.
pub fn f0_constant<T: Scalar>() -> T {
    (T::lit(3.0) / T::PI()).sqrt() * T::lit(0.4).powf(T::lit(0.25))
}

/// `F1 = (2^7 3^2 pi^2 / 5^3)^(1/4)`.
pub fn f1_constant<T: Scalar>() -> T {
    (T::lit(128.0 * 9.0) * T::PI() * T::PI() / T::lit(125.0)).powf(T::lit(0.25))
}

fn check_positive<T: Scalar>(name: &'static str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(name, v.to_f64_lossy(), "must be > 0"))
    }
}

/// Thermal-limit sensitivity of a free sphere of radius `radius`,
/// T/sqrt(Hz):
///
/// `eta = F0 (k_B T)^(1/2) M^(-3/4) rho_m^(1/4) Q^(-1/2) B^(1/4) / R`
pub fn thermal_limit_sensitivity<T: Scalar>(
    material: &MaterialProperties<T>,
    radius: T,
    bias_field: T,
    temperature: T,
    q_factor: T,
) -> Result<T> {
    check_positive("radius", radius)?;
    check_positive("bias_field", bias_field)?;
    check_positive("temperature", temperature)?;
    check_positive("q_factor", q_factor)?;
    let m = material.magnetization();
    check_positive("magnetization", m)?;
    let kt = PhysicalConstants::<T>::codata().k_b() * temperature;
    let q4 = T::lit(0.25);
    Ok(
        f0_constant::<T>() * kt.sqrt() * m.powf(-T::lit(0.75)) * material.rho_m().powf(q4)
            / q_factor.sqrt()
            * bias_field.powf(q4)
            / radius,
    )
}

/// Same limit written in terms of the resonant frequency instead of the
/// radius:
///
/// `eta = F1 (k_B T)^(1/2) M^(-5/4) rho_m^(3/4) Q^(-1/2) B^(-1/4) f_r`
pub fn thermal_limit_sensitivity_fr<T: Scalar>(
    material: &MaterialProperties<T>,
    f_res: T,
    bias_field: T,
    temperature: T,
    q_factor: T,
) -> Result<T> {
    check_positive("f_res", f_res)?;
    check_positive("bias_field", bias_field)?;
    check_positive("temperature", temperature)?;
    check_positive("q_factor", q_factor)?;
    let m = material.magnetization();
    check_positive("magnetization", m)?;
    let kt = PhysicalConstants::<T>::codata().k_b() * temperature;
    let q4 = T::lit(0.25);
    Ok(
        f1_constant::<T>()
            * kt.sqrt()
            * m.powf(-T::lit(1.25))
            * material.rho_m().powf(T::lit(0.75))
            / q_factor.sqrt()
            / bias_field.powf(q4)
            * f_res,
    )
}

/// Thermal limit of a sphere evaluated by building the oscillator and
/// dividing the thermal torque by the moment.
pub fn sphere_thermal_sensitivity<T: Scalar>(
    material: &MaterialProperties<T>,
    radius: T,
    bias_field: T,
    temperature: T,
    q_factor: T,
) -> Result<T> {
    let osc = sphere_oscillator(radius, material, bias_field, q_factor)?;
    oscillator_thermal_sensitivity(&osc, temperature)
}

/// One row of a thermal-limit parameter scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalScanPoint {
    pub radius: f64,
    pub bias_field: f64,
    pub f_res: f64,
    pub eta: f64,
}

/// Thermal-limit sensitivity over every (radius, bias field) pair.
pub fn thermal_limit_scan(
    material: &MaterialProperties<f64>,
    radii: &[f64],
    bias_fields: &[f64],
    temperature: f64,
    q_factor: f64,
) -> Result<Vec<ThermalScanPoint>> {
    let mut out = Vec::with_capacity(radii.len() * bias_fields.len());
    for &r in radii {
        for &b in bias_fields {
            out.push(ThermalScanPoint {
                radius: r,
                bias_field: b,
                f_res: sphere_resonant_frequency(r, material, b)?,
                eta: thermal_limit_sensitivity(material, r, b, temperature, q_factor)?,
            });
        }
    }
    Ok(out)
}
