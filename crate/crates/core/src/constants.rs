//! CODATA 2018 constants.

use crate::Scalar;

/// Fundamental constants used throughout the crate.
///
/// The values are fixed at construction and cannot be altered; use
/// [`PhysicalConstants::codata`] (or `Default`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants<T> {
    k_b: T,
    mu_b: T,
    hbar: T,
    c: T,
    m_e: T,
    gamma_e: T,
    mu_0: T,
}

impl<T: Scalar> PhysicalConstants<T> {
    pub fn codata() -> Self {
        Self {
            k_b: T::lit(1.380_649e-23),
            mu_b: T::lit(9.274_010_078_3e-24),
            hbar: T::lit(1.054_571_817e-34),
            c: T::lit(299_792_458.0),
            m_e: T::lit(9.109_383_701_5e-31),
            gamma_e: T::lit(1.760_859_630_23e11),
            mu_0: T::lit(1.256_637_062_12e-6),
        }
    }

    /// Boltzmann constant, J/K.
    pub fn k_b(&self) -> T {
        self.k_b
    }

    /// Bohr magneton, J/T.
    pub fn mu_b(&self) -> T {
        self.mu_b
    }

    /// Reduced Planck constant, J s.
    pub fn hbar(&self) -> T {
        self.hbar
    }

    /// Speed of light, m/s.
    pub fn c(&self) -> T {
        self.c
    }

    /// Electron mass, kg.
    pub fn m_e(&self) -> T {
        self.m_e
    }

    /// Electron gyromagnetic ratio magnitude, rad s^-1 T^-1.
    pub fn gamma_e(&self) -> T {
        self.gamma_e
    }

    /// Vacuum permeability, T m/A.
    pub fn mu_0(&self) -> T {
        self.mu_0
    }
}

impl<T: Scalar> Default for PhysicalConstants<T> {
    fn default() -> Self {
        Self::codata()
    }
}
