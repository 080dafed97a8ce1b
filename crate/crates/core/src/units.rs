//! Dimensionless normalization of the axial problem.
//!
//! Lengths are measured in `d0`, energies in `E0 = e²/(4πε₀ d0)` and time in
//! `1/omega_unit` with `omega_unit = 2π × 1 MHz`. The length unit is fixed by
//! `d0³ · m · omega_unit² = e²/(4πε₀)`, which makes the normalized equation of
//! motion `u'' = -∇V(u)` with no leftover prefactor.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::scalar::Real;

/// Elementary charge, C (exact in SI 2019).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Vacuum permittivity, F/m (CODATA 2018).
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// Unified atomic mass unit, kg (CODATA 2018).
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Frequency unit of the normalized problem, rad/s.
pub const OMEGA_UNIT: f64 = 2.0 * PI * 1.0e6;
/// Mass of the default ion species (¹⁷¹Yb⁺), in u.
pub const DEFAULT_MASS_U: f64 = 171.0;

/// `e²/(4πε₀)` in J·m.
pub fn coulomb_constant() -> f64 {
    ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (4.0 * PI * VACUUM_PERMITTIVITY)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization<T = f64> {
    /// Ion mass, kg.
    pub mass: T,
    /// Length unit, m.
    pub d0: T,
    /// Energy unit, J.
    pub e0: T,
    /// Frequency unit, rad/s.
    pub omega_unit: T,
}

/// Builds the normalization for an ion of the given mass (kg).
pub fn normalization_for<T: Real>(mass: T) -> Result<Normalization<T>> {
    if !(mass > T::zero()) || !mass.is_finite() {
        return Err(domain(format!("ion mass must be positive, got {mass:e}")));
    }
    // Evaluated in f64 so that f32 does not underflow in the intermediate e².
    let m = mass.to_f64_lossy();
    let k = coulomb_constant();
    let d0 = (k / (m * OMEGA_UNIT * OMEGA_UNIT)).cbrt();
    let e0 = k / d0;
    Ok(Normalization {
        mass,
        d0: T::lit(d0),
        e0: T::lit(e0),
        omega_unit: T::lit(OMEGA_UNIT),
    })
}

/// Normalization for a mass given in atomic mass units.
pub fn normalization_for_amu<T: Real>(mass_u: f64) -> Result<Normalization<T>> {
    if !(mass_u > 0.0) {
        return Err(domain(format!("ion mass must be positive, got {mass_u} u")));
    }
    normalization_for(T::lit(mass_u * ATOMIC_MASS_UNIT))
}

impl<T: Real> Normalization<T> {
    /// Normalized rate (or angular frequency) to SI, 1/s.
    #[inline]
    pub fn rate_to_si(&self, rate: T) -> T {
        rate * self.omega_unit
    }

    /// SI rate (1/s or rad/s) to normalized units.
    #[inline]
    pub fn rate_to_normalized(&self, rate_si: T) -> T {
        rate_si / self.omega_unit
    }

    /// Seconds to normalized time.
    #[inline]
    pub fn time_to_normalized(&self, t: T) -> T {
        t * self.omega_unit
    }

    /// Normalized time to seconds.
    #[inline]
    pub fn time_to_si(&self, tau: T) -> T {
        tau / self.omega_unit
    }

    #[inline]
    pub fn length_to_si(&self, u: T) -> T {
        u * self.d0
    }

    #[inline]
    pub fn length_to_normalized(&self, x: T) -> T {
        x / self.d0
    }

    /// Normalized angular frequency to ordinary frequency in Hz.
    #[inline]
    pub fn frequency_to_hz(&self, omega: T) -> T {
        self.rate_to_si(omega) / T::two_pi()
    }
}

impl Normalization<f64> {
    /// ¹⁷¹Yb⁺, the default species of every study.
    pub fn ytterbium171() -> Self {
        normalization_for_amu(DEFAULT_MASS_U).expect("positive mass")
    }
}
