//! Torsional-mode parameters and the geometry helpers that produce them.

use crate::{Error, MaterialProperties, Result, Scalar};

/// Physical identity of one torsional oscillator.
///
/// The resonant frequency is always derived from stiffness and inertia, so
/// `f_res = sqrt(stiffness / inertia) / 2 pi` holds by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorParams<T> {
    inertia: T,
    moment: T,
    q_factor: T,
    bias_field: T,
    k_offset: T,
    stiffness: T,
    f_res: T,
}

impl<T: Scalar> OscillatorParams<T> {
    /// Builds the oscillator from its bias field; stiffness is
    /// `moment * bias_field + k_offset`.
    pub fn from_bias(
        inertia: T,
        moment: T,
        q_factor: T,
        bias_field: T,
        k_offset: T,
    ) -> Result<Self> {
        check_positive("inertia", inertia)?;
        check_positive("moment", moment)?;
        check_positive("q_factor", q_factor)?;
        let stiffness = stiffness_from_bias(moment, bias_field, k_offset)?;
        if !(stiffness > T::zero()) {
            return Err(Error::domain(
                "stiffness",
                stiffness.to_f64_lossy(),
                "zero bias with zero offset gives no restoring torque",
            ));
        }
        let f_res = (stiffness / inertia).sqrt() / T::TAU();
        Ok(Self {
            inertia,
            moment,
            q_factor,
            bias_field,
            k_offset,
            stiffness,
            f_res,
        })
    }

    /// Builds the oscillator from a target resonant frequency; the bias field
    /// is solved for. Fails if `k_offset` alone already exceeds the
    /// required stiffness.
    pub fn from_resonance(
        inertia: T,
        moment: T,
        q_factor: T,
        f_res: T,
        k_offset: T,
    ) -> Result<Self> {
        check_positive("inertia", inertia)?;
        check_positive("moment", moment)?;
        check_positive("q_factor", q_factor)?;
        check_positive("f_res", f_res)?;
        check_non_negative("k_offset", k_offset)?;
        let w = T::TAU() * f_res;
        let stiffness = inertia * w * w;
        let bias_field = (stiffness - k_offset) / moment;
        if bias_field < T::zero() {
            return Err(Error::domain(
                "k_offset",
                k_offset.to_f64_lossy(),
                "exceeds the stiffness required for the requested frequency",
            ));
        }
        Ok(Self {
            inertia,
            moment,
            q_factor,
            bias_field,
            k_offset,
            stiffness,
            f_res,
        })
    }

    /// Same oscillator with a different bias field.
    pub fn with_bias_field(&self, bias_field: T) -> Result<Self> {
        Self::from_bias(
            self.inertia,
            self.moment,
            self.q_factor,
            bias_field,
            self.k_offset,
        )
    }

    pub fn with_q_factor(&self, q_factor: T) -> Result<Self> {
        check_positive("q_factor", q_factor)?;
        Ok(Self { q_factor, ..*self })
    }

    /// Moment of inertia, kg m^2.
    pub fn inertia(&self) -> T {
        self.inertia
    }

    /// Magnetic moment, A m^2.
    pub fn moment(&self) -> T {
        self.moment
    }

    pub fn q_factor(&self) -> T {
        self.q_factor
    }

    /// Resonant frequency, Hz.
    pub fn f_res(&self) -> T {
        self.f_res
    }

    /// Bias field, T.
    pub fn bias_field(&self) -> T {
        self.bias_field
    }

    /// Torsional stiffness, N m/rad.
    pub fn stiffness(&self) -> T {
        self.stiffness
    }

    /// Zero-bias residual stiffness, N m/rad.
    pub fn k_offset(&self) -> T {
        self.k_offset
    }

    /// Angular resonant frequency, rad/s.
    pub fn omega_res(&self) -> T {
        T::TAU() * self.f_res
    }

    /// Inertia-normalized damping rate `2 pi f_res / Q`, 1/s. The damping
    /// torque is `inertia * dissipation_rate * dtheta/dt`.
    pub fn dissipation_rate(&self) -> T {
        self.omega_res() / self.q_factor
    }

    /// Amplitude ring-down time `Q / (pi f_res)`, s.
    pub fn ring_down_time(&self) -> T {
        self.q_factor / (T::PI() * self.f_res)
    }

    pub fn cast<U: Scalar>(&self) -> OscillatorParams<U> {
        let c = |x: T| U::lit(x.to_f64_lossy());
        OscillatorParams {
            inertia: c(self.inertia),
            moment: c(self.moment),
            q_factor: c(self.q_factor),
            bias_field: c(self.bias_field),
            k_offset: c(self.k_offset),
            stiffness: c(self.stiffness),
            f_res: c(self.f_res),
        }
    }
}

impl OscillatorParams<f64> {
    /// The room-temperature oscillator of the reference experiment: NdFeB
    /// sensing magnet (1 mm x 20 mm), total inertia 3e-10 kg m^2,
    /// f_res = 4.99 Hz, Q = 39.
    pub fn reference() -> Self {
        let magnet = MaterialProperties::ndfeb();
        let (_, moment) =
            cylinder_inertia_and_moment(1e-3, 20e-3, &magnet, 0.0, RotationAxis::Longitudinal)
                .expect("reference magnet geometry is valid");
        Self::from_resonance(3e-10, moment, 39.0, 4.99, 0.0).expect("reference oscillator is valid")
    }

    /// Rebuilds a snapshot from `[inertia, moment, q_factor, bias_field,
    /// k_offset, stiffness, f_res]` without recomputing derived members, so
    /// stored parameters come back bit for bit. The stored members must be
    /// mutually consistent to 1e-9.
    pub fn from_raw_parts(v: [f64; 7]) -> Result<Self> {
        let [inertia, moment, q_factor, bias_field, k_offset, stiffness, f_res] = v;
        let check = Self::from_bias(inertia, moment, q_factor, bias_field, k_offset)?;
        if (check.stiffness / stiffness - 1.0).abs() > 1e-9
            || (check.f_res / f_res - 1.0).abs() > 1e-9
        {
            return Err(Error::Precondition(
                "inconsistent oscillator snapshot".into(),
            ));
        }
        Ok(Self {
            inertia,
            moment,
            q_factor,
            bias_field,
            k_offset,
            stiffness,
            f_res,
        })
    }
}

fn check_positive<T: Scalar>(name: &'static str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(name, v.to_f64_lossy(), "must be > 0"))
    }
}

fn check_non_negative<T: Scalar>(name: &'static str, v: T) -> Result<()> {
    if v >= T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(name, v.to_f64_lossy(), "must be >= 0"))
    }
}

/// Restoring stiffness `moment * bias_field + k_offset`, N m/rad.
pub fn stiffness_from_bias<T: Scalar>(moment: T, bias_field: T, k_offset: T) -> Result<T> {
    check_positive("moment", moment)?;
    check_non_negative("bias_field", bias_field)?;
    check_non_negative("k_offset", k_offset)?;
    Ok(moment * bias_field + k_offset)
}

/// Moment of inertia of a uniform sphere, `(8 pi / 15) rho_m R^5`.
pub fn sphere_inertia<T: Scalar>(radius: T, material: &MaterialProperties<T>) -> T {
    T::lit(8.0) * T::PI() / T::lit(15.0) * material.rho_m() * radius.powi(5)
}

/// Magnetic moment of a uniformly magnetized sphere, `(4 pi / 3) M R^3`.
pub fn sphere_moment<T: Scalar>(radius: T, material: &MaterialProperties<T>) -> T {
    T::lit(4.0) * T::PI() / T::lit(3.0) * material.magnetization() * radius.powi(3)
}

/// Torsional resonant frequency of a free ferromagnetic sphere in a bias
/// field:
///
/// `f_r = sqrt(10) / (4 pi) * rho_m^(-1/2) * M^(1/2) * B^(1/2) / R`
///
/// with `M` the material magnetization (`rho_e mu_B` for the default
/// presets).
pub fn sphere_resonant_frequency<T: Scalar>(
    radius: T,
    material: &MaterialProperties<T>,
    bias_field: T,
) -> Result<T> {
    check_positive("radius", radius)?;
    check_positive("bias_field", bias_field)?;
    let m = material.magnetization();
    check_positive("magnetization", m)?;
    Ok(
        T::lit(10.0).sqrt() / (T::lit(4.0) * T::PI()) * (m * bias_field / material.rho_m()).sqrt()
            / radius,
    )
}

/// Inverse of [`sphere_resonant_frequency`]: the bias field that puts a
/// sphere of `radius` at `f_res`.
pub fn sphere_bias_for_frequency<T: Scalar>(
    radius: T,
    material: &MaterialProperties<T>,
    f_res: T,
) -> Result<T> {
    check_positive("radius", radius)?;
    check_positive("f_res", f_res)?;
    let m = material.magnetization();
    check_positive("magnetization", m)?;
    let s = f_res * radius * T::lit(4.0) * T::PI() / T::lit(10.0).sqrt();
    Ok(s * s * material.rho_m() / m)
}

/// Oscillator parameters for a free sphere at a given bias field.
pub fn sphere_oscillator<T: Scalar>(
    radius: T,
    material: &MaterialProperties<T>,
    bias_field: T,
    q_factor: T,
) -> Result<OscillatorParams<T>> {
    check_positive("radius", radius)?;
    OscillatorParams::from_bias(
        sphere_inertia(radius, material),
        sphere_moment(radius, material),
        q_factor,
        bias_field,
        T::zero(),
    )
}

/// Rotation axis of a cylindrical magnet relative to its own symmetry axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RotationAxis {
    /// About the cylinder axis (`m d^2 / 8`). The magnet is magnetized
    /// across its diameter, so the moment is transverse to this axis.
    #[default]
    Longitudinal,
    /// About a diameter through the center (`m (3 r^2 + h^2) / 12`).
    Transverse,
}

/// Inertia (kg m^2) and moment (A m^2) of a diametrically magnetized
/// cylinder plus `extra_inertia` contributed by the rest of the rotor.
pub fn cylinder_inertia_and_moment<T: Scalar>(
    diameter: T,
    height: T,
    material: &MaterialProperties<T>,
    extra_inertia: T,
    axis: RotationAxis,
) -> Result<(T, T)> {
    check_positive("diameter", diameter)?;
    check_positive("height", height)?;
    check_non_negative("extra_inertia", extra_inertia)?;
    let r = diameter / T::lit(2.0);
    let volume = T::PI() * r * r * height;
    let mass = material.rho_m() * volume;
    let own = match axis {
        RotationAxis::Longitudinal => mass * r * r / T::lit(2.0),
        RotationAxis::Transverse => mass * (T::lit(3.0) * r * r + height * height) / T::lit(12.0),
    };
    Ok((own + extra_inertia, material.magnetization() * volume))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_bias_zero_offset_is_zero_stiffness() {
        assert_eq!(stiffness_from_bias(1.0, 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn stiffness_matches_hand_evaluation_for_sensing_magnet() {
        // M V B evaluated by hand: M = 6e28 * 9.2740100783e-24 A/m,
        // V = pi * (0.5 mm)^2 * 20 mm.
        let m_hand = 6e28 * 9.274_010_078_3e-24;
        let v_hand = std::f64::consts::PI * 0.25e-6 * 0.02;
        let (_, mu) = cylinder_inertia_and_moment(
            1e-3,
            20e-3,
            &MaterialProperties::ndfeb(),
            0.0,
            RotationAxis::Longitudinal,
        )
        .unwrap();
        assert!((mu / (m_hand * v_hand) - 1.0).abs() < 1e-14);
        assert!((mu - 8.74e-3).abs() < 0.01e-3);
        let k = stiffness_from_bias(mu, 1e-6, 0.0).unwrap();
        assert!((k / (m_hand * v_hand * 1e-6) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn stiffness_doubles_with_field() {
        let a = stiffness_from_bias(3.3e-3, 2.5e-6, 0.0).unwrap();
        let b = stiffness_from_bias(3.3e-3, 5.0e-6, 0.0).unwrap();
        assert_eq!(b, 2.0 * a);
    }

    #[test]
    fn stiffness_rejects_negative_inputs() {
        assert!(stiffness_from_bias(-1.0, 1.0, 0.0).is_err());
        assert!(stiffness_from_bias(1.0, -1.0, 0.0).is_err());
        assert!(stiffness_from_bias(1.0, 1.0, -1e-9).is_err());
    }

    #[test]
    fn sphere_frequency_matches_inertia_route() {
        let mat = MaterialProperties::<f64>::ndfeb();
        for &(r, b) in &[(1e-3, 1e-6), (1e-2, 2e-11), (3e-4, 1e-3), (0.05, 0.1)] {
            let f = sphere_resonant_frequency(r, &mat, b).unwrap();
            let k = sphere_moment(r, &mat) * b;
            let i = sphere_inertia(r, &mat);
            let f2 = (k / i).sqrt() / std::f64::consts::TAU;
            assert!((f / f2 - 1.0).abs() < 1e-12, "{f} {f2}");
        }
    }

    #[test]
    fn sphere_bias_round_trip_at_one_millihertz() {
        let mat = MaterialProperties::<f64>::ndfeb();
        let b = sphere_bias_for_frequency(0.01, &mat, 1e-3).unwrap();
        let f = sphere_resonant_frequency(0.01, &mat, b).unwrap();
        assert!((f / 1e-3 - 1.0).abs() < 1e-9);
        let b2 = sphere_bias_for_frequency(0.01, &mat, f).unwrap();
        assert!((b2 / b - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sphere_frequency_scales_inversely_with_radius() {
        let mat = MaterialProperties::<f64>::ndfeb();
        let a = sphere_resonant_frequency(0.01, &mat, 1e-6).unwrap();
        let b = sphere_resonant_frequency(0.02, &mat, 1e-6).unwrap();
        assert!((b / a - 0.5).abs() < 1e-14);
    }

    #[test]
    fn sphere_frequency_squared_is_linear_in_field() {
        let mat = MaterialProperties::<f64>::ndfeb();
        let f1 = sphere_resonant_frequency(0.01, &mat, 1e-6).unwrap();
        let f3 = sphere_resonant_frequency(0.01, &mat, 3e-6).unwrap();
        assert!((f3 * f3 / (f1 * f1) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_frequency_domain_errors() {
        let mat = MaterialProperties::<f64>::ndfeb();
        assert!(sphere_resonant_frequency(0.0, &mat, 1e-6).is_err());
        assert!(sphere_resonant_frequency(1e-3, &mat, 0.0).is_err());
        assert!(sphere_resonant_frequency(1e-3, &MaterialProperties::bgo(), 1e-6).is_err());
    }

    #[test]
    fn reference_total_inertia() {
        let mat = MaterialProperties::<f64>::ndfeb();
        let (own, _) =
            cylinder_inertia_and_moment(1e-3, 20e-3, &mat, 0.0, RotationAxis::Longitudinal)
                .unwrap();
        let extra = 3e-10 - own;
        assert!(extra > 0.0);
        let (total, _) =
            cylinder_inertia_and_moment(1e-3, 20e-3, &mat, extra, RotationAxis::Longitudinal)
                .unwrap();
        assert!((total - 3e-10).abs() < 1e-24);
    }

    /// Monte-Carlo integral of r_perp^2 dm over a unit-density cylinder.
    fn monte_carlo_inertia(d: f64, h: f64, axis: RotationAxis, n: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = d / 2.0;
        let mut sum = 0.0;
        let mut hits = 0usize;
        for _ in 0..n {
            let x: f64 = rng.random_range(-r..r);
            let y: f64 = rng.random_range(-r..r);
            let z: f64 = rng.random_range(-h / 2.0..h / 2.0);
            if x * x + y * y > r * r {
                continue;
            }
            hits += 1;
            sum += match axis {
                RotationAxis::Longitudinal => x * x + y * y,
                RotationAxis::Transverse => y * y + z * z,
            };
        }
        let mass = std::f64::consts::PI * r * r * h;
        mass * sum / hits as f64
    }

    #[test]
    fn cylinder_inertia_matches_monte_carlo() {
        let unit = MaterialProperties::<f64>::new(1.0, 0.0, 0.0).unwrap();
        for (d, h) in [(1.0, 20.0), (2.0, 1.0)] {
            for axis in [RotationAxis::Longitudinal, RotationAxis::Transverse] {
                let (i, _) = cylinder_inertia_and_moment(d, h, &unit, 0.0, axis).unwrap();
                let mc = monte_carlo_inertia(d, h, axis, 400_000);
                assert!((mc / i - 1.0).abs() < 0.01, "{axis:?} {d} {h}: {mc} vs {i}");
            }
        }
        // A slender rod about its center approaches m h^2 / 12.
        let (i, _) =
            cylinder_inertia_and_moment(1.0, 20.0, &unit, 0.0, RotationAxis::Transverse).unwrap();
        let m = std::f64::consts::PI * 0.25 * 20.0;
        assert!((i / (m * 400.0 / 12.0) - 1.0).abs() < 0.002);
    }

    #[test]
    fn oscillator_resonance_is_consistent() {
        let p = OscillatorParams::<f64>::reference();
        let f = (p.stiffness() / p.inertia()).sqrt() / std::f64::consts::TAU;
        assert!((f / p.f_res() - 1.0).abs() < 1e-9);
        assert!((p.f_res() - 4.99).abs() < 1e-12);
        let q = OscillatorParams::from_bias(p.inertia(), p.moment(), 39.0, p.bias_field(), 0.0)
            .unwrap();
        assert!((q.f_res() / 4.99 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn offset_larger_than_required_stiffness_is_rejected() {
        assert!(OscillatorParams::from_resonance(1e-10, 1e-3, 10.0, 1.0, 1.0).is_err());
        assert!(OscillatorParams::from_bias(1e-10, 1e-3, 10.0, 0.0, 0.0).is_err());
        let p = OscillatorParams::from_bias(1e-10, 1e-3, 10.0, 0.0, 1e-8).unwrap();
        assert!(p.f_res() > 0.0);
    }

    #[test]
    fn generic_over_single_precision() {
        let mat = MaterialProperties::<f32>::ndfeb();
        let f32v = sphere_resonant_frequency(0.01f32, &mat, 1e-6).unwrap();
        let f64v = sphere_resonant_frequency(0.01f64, &MaterialProperties::ndfeb(), 1e-6).unwrap();
        assert!((f32v as f64 / f64v - 1.0).abs() < 1e-5);
    }
}
