//! Bulk material descriptions: mass, electron-spin and nucleon densities.

use serde::{Deserialize, Serialize};

use crate::{Error, PhysicalConstants, Result, Scalar};

/// Where the magnetization `M` of a material comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum MagnetizationSource {
    /// `M = rho_e * mu_B`. Default; this is the form the thermal-limit
    /// sensitivity laws are written in.
    SpinDensity,
    /// `M = B_r / mu_0` from a remanence in tesla.
    Remanence(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialProperties<T> {
    rho_m: T,
    rho_e: T,
    rho_n: T,
    source: MagnetizationSource,
}

impl<T: Scalar> MaterialProperties<T> {
    /// Mass density (kg/m^3), electron-spin density and nucleon density
    /// (both m^-3).
    pub fn new(rho_m: T, rho_e: T, rho_n: T) -> Result<Self> {
        if !(rho_m > T::zero()) || !rho_m.is_finite() {
            return Err(Error::domain("rho_m", rho_m.to_f64_lossy(), "must be > 0"));
        }
        if !(rho_e >= T::zero()) || !rho_e.is_finite() {
            return Err(Error::domain("rho_e", rho_e.to_f64_lossy(), "must be >= 0"));
        }
        if !(rho_n >= T::zero()) || !rho_n.is_finite() {
            return Err(Error::domain("rho_n", rho_n.to_f64_lossy(), "must be >= 0"));
        }
        Ok(Self {
            rho_m,
            rho_e,
            rho_n,
            source: MagnetizationSource::SpinDensity,
        })
    }

    /// Sintered NdFeB with `M = rho_e mu_B` (about 5.56e5 A/m).
    pub fn ndfeb() -> Self {
        Self {
            rho_m: T::lit(7430.0),
            rho_e: T::lit(6e28),
            rho_n: T::zero(),
            source: MagnetizationSource::SpinDensity,
        }
    }

    /// NdFeB with the magnetization taken from a 0.71 T remanence instead
    /// (about 5.65e5 A/m, 1.5 % above the spin-density value).
    pub fn ndfeb_remanence() -> Self {
        Self::ndfeb().with_magnetization(MagnetizationSource::Remanence(0.71))
    }

    /// Bi4Ge3O12 nucleon source. The mass density is the handbook value.
    pub fn bgo() -> Self {
        Self {
            rho_m: T::lit(7130.0),
            rho_e: T::zero(),
            rho_n: T::lit(4e30),
            source: MagnetizationSource::SpinDensity,
        }
    }

    pub fn with_magnetization(mut self, source: MagnetizationSource) -> Self {
        self.source = source;
        self
    }

    pub fn rho_m(&self) -> T {
        self.rho_m
    }

    pub fn rho_e(&self) -> T {
        self.rho_e
    }

    pub fn rho_n(&self) -> T {
        self.rho_n
    }

    pub fn magnetization_source(&self) -> MagnetizationSource {
        self.source
    }

    /// Magnetization in A/m.
    pub fn magnetization(&self) -> T {
        let k = PhysicalConstants::<T>::codata();
        match self.source {
            MagnetizationSource::SpinDensity => self.rho_e * k.mu_b(),
            MagnetizationSource::Remanence(b_r) => T::lit(b_r) / k.mu_0(),
        }
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> MaterialProperties<U> {
        MaterialProperties {
            rho_m: U::lit(self.rho_m.to_f64_lossy()),
            rho_e: U::lit(self.rho_e.to_f64_lossy()),
            rho_n: U::lit(self.rho_n.to_f64_lossy()),
            source: self.source,
        }
    }
}
