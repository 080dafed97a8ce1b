//! Power-law heating of the COM mode.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::scalar::Real;

/// `h = D·ω·(A0·ω^(−2−α) + B0)` in quanta/s, `ω` in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatingModel<T = f64> {
    pub alpha: T,
    /// s⁻¹·(rad/s)^(2+α)
    pub a0: T,
    /// s⁻¹
    pub b0: T,
    /// Chain-dependent normalization factor.
    pub d: T,
}

impl<T: Real> HeatingModel<T> {
    pub fn new(alpha: T, a0: T, b0: T, d: T) -> Result<Self> {
        if !(alpha > T::zero()) {
            return Err(domain(format!("alpha must be positive, got {alpha}")));
        }
        if !(a0 >= T::zero()) || !(b0 >= T::zero()) {
            return Err(domain("A0 and B0 must be non-negative"));
        }
        if !(d > T::zero()) || !d.is_finite() {
            return Err(domain(format!("D must be positive, got {d}")));
        }
        Ok(Self { alpha, a0, b0, d })
    }

    /// α = 0.8, A0 = 8.2e17, B0 = 0.9, D = 1.
    pub fn standard() -> Self {
        Self { alpha: T::lit(0.8), a0: T::lit(8.2e17), b0: T::lit(0.9), d: T::one() }
    }

    pub fn with_d(self, d: T) -> Result<Self> {
        Self::new(self.alpha, self.a0, self.b0, d)
    }

    /// Frequency of minimum heating, `((1+α)·A0/B0)^(1/(2+α))`.
    pub fn turning_frequency(&self) -> T {
        ((T::one() + self.alpha) * self.a0 / self.b0).powf(T::one() / (T::lit(2.0) + self.alpha))
    }
}

pub fn heating_rate<T: Real>(model: &HeatingModel<T>, omega0: T) -> Result<T> {
    if !(omega0 > T::zero()) || !omega0.is_finite() {
        return Err(domain(format!("COM frequency must be positive, got {omega0:e} rad/s")));
    }
    let power = -(T::lit(2.0) + model.alpha);
    Ok(model.d * omega0 * (model.a0 * omega0.powf(power) + model.b0))
}

/// `D` that makes `h(ω0)/c` equal `observed_n0` for a cooling rate `c` (1/s).
pub fn calibrate_d<T: Real>(model: &HeatingModel<T>, omega0: T, cooling_rate: T, observed_n0: T) -> Result<T> {
    if !(observed_n0 > T::zero()) {
        return Err(domain("observed cooling limit must be positive"));
    }
    if !(cooling_rate > T::zero()) {
        return Err(domain("reference configuration has zero cooling rate"));
    }
    let unit = HeatingModel { d: T::one(), ..*model };
    let h1 = heating_rate(&unit, omega0)?;
    if !(h1 > T::zero()) {
        return Err(domain("heating model vanishes at the reference frequency"));
    }
    Ok(observed_n0 * cooling_rate / h1)
}
