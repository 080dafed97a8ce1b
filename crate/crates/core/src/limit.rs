//! Cooling limits `n0 = h / c`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::damping::{exact_damped_modes_with, exact_mode_eigenvalue, linearized_rate, perturbative_rate, DampingConfig};
use crate::error::{domain, Error, Result};
use crate::heating::{calibrate_d, heating_rate, HeatingModel};
use crate::modes::{com_mode_index, normal_modes, ModeSpectrum};
use crate::potential::IonChain;
use crate::scalar::Real;
use crate::units::Normalization;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactEigen,
    Perturbative,
    Linearized,
    QuadraticBound,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::ExactEigen => "exact-eigen",
            Method::Perturbative => "perturbative",
            Method::Linearized => "linearized",
            Method::QuadraticBound => "quadratic-bound",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact-eigen" | "exact" => Ok(Method::ExactEigen),
            "perturbative" => Ok(Method::Perturbative),
            "linearized" => Ok(Method::Linearized),
            "quadratic-bound" => Ok(Method::QuadraticBound),
            other => Err(domain(format!("unknown cooling-rate method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoolingLimitReport<T = f64> {
    /// Steady-state COM occupation, quanta.
    pub n0: T,
    /// Heating rate, quanta/s.
    pub h: T,
    /// Cooling rate, 1/s.
    pub c: T,
    /// COM angular frequency, rad/s.
    pub omega0: T,
    pub method: Method,
}

/// COM frequency (normalized) and cooling rate (normalized) of a chain.
#[derive(Debug, Clone)]
pub struct ComCooling<T = f64> {
    pub spectrum: ModeSpectrum<T>,
    pub com: usize,
    pub rate: T,
}

/// Cooling rate of the COM mode by the chosen method. `QuadraticBound` is a
/// property of the analytic chain, see [`quadratic_upper_bound`].
pub fn com_cooling<T: Real>(chain: &IonChain<T>, gamma: T, method: Method) -> Result<ComCooling<T>> {
    let h = chain.hessian();
    let spectrum = normal_modes(&h)?;
    let com = com_mode_index(&spectrum)?;
    let damping = DampingConfig::for_chain(gamma, chain)?;
    let rate = mode_rate(&h, &spectrum, &damping, com, method)?;
    Ok(ComCooling { spectrum, com, rate })
}

pub fn mode_rate<T: Real>(
    hessian: &DMatrix<T>,
    spectrum: &ModeSpectrum<T>,
    damping: &DampingConfig<T>,
    mode: usize,
    method: Method,
) -> Result<T> {
    match method {
        Method::Perturbative => perturbative_rate(spectrum, damping, mode),
        Method::Linearized => linearized_rate(spectrum, damping, mode),
        Method::ExactEigen => {
            if damping.gamma == T::zero() || damping.coolants.is_empty() {
                return Ok(T::zero());
            }
            let guess = perturbative_rate(spectrum, damping, mode)?;
            let z = exact_mode_eigenvalue(hessian, spectrum, damping, mode)?;
            // the polished root must stay on the branch of `mode`; otherwise
            // fall back to the full solve with overlap matching
            let w = spectrum.frequency(mode);
            let gap = (0..spectrum.len())
                .filter(|&k| k != mode)
                .map(|k| (spectrum.frequency(k) - w).abs())
                .fold(T::infinity(), |a, b| a.min(b));
            let drift = ((-z.re) - guess).abs() + (z.im - w).abs();
            if drift < T::lit(0.1) * gap && z.re < T::zero() {
                Ok(-z.re)
            } else {
                Ok(exact_damped_modes_with(hessian, spectrum, damping)?.mode(mode).cooling_rate())
            }
        }
        Method::QuadraticBound => Err(domain("the quadratic bound is not a per-chain rate; use quadratic_upper_bound")),
    }
}

fn report<T: Real>(model: &HeatingModel<T>, omega0: T, c: T, method: Method) -> Result<CoolingLimitReport<T>> {
    if !(c > T::zero()) {
        return Err(Error::NoCooling);
    }
    let h = heating_rate(model, omega0)?;
    Ok(CoolingLimitReport { n0: h / c, h, c, omega0, method })
}

/// `n0 = h(ω0) / c` for the chain's COM mode with its own coolant set.
pub fn cooling_limit<T: Real>(
    chain: &IonChain<T>,
    model: &HeatingModel<T>,
    gamma: T,
    method: Method,
    norm: &Normalization<T>,
) -> Result<CoolingLimitReport<T>> {
    if chain.coolant_indices().is_empty() {
        return Err(Error::NoCooling);
    }
    if !(gamma > T::zero()) {
        return Err(Error::NoCooling);
    }
    let cc = com_cooling(chain, gamma, method)?;
    let omega0 = norm.rate_to_si(cc.spectrum.frequency(cc.com));
    report(model, omega0, norm.rate_to_si(cc.rate), method)
}

/// Limit for a pure-quadratic chain of `n_ions` with `n_coolants` coolants:
/// COM frequency `√(2·X2)` and participation `N_C/N`.
pub fn quadratic_upper_bound<T: Real>(
    n_ions: usize,
    n_coolants: usize,
    x2: T,
    gamma: T,
    model: &HeatingModel<T>,
    norm: &Normalization<T>,
) -> Result<CoolingLimitReport<T>> {
    if n_coolants > n_ions || n_ions == 0 {
        return Err(domain(format!("need 0 < N and N_C ≤ N, got N = {n_ions}, N_C = {n_coolants}")));
    }
    if !(x2 > T::zero()) {
        return Err(domain("quadratic bound needs X2 > 0"));
    }
    let w = (T::lit(2.0) * x2).sqrt();
    let s = T::from_usize_lossy(n_coolants) / T::from_usize_lossy(n_ions);
    let x = gamma * s / w;
    let x2s = x * x;
    let c = w / T::lit(2.0).sqrt() * (x2s / ((T::one() + x2s).sqrt() + T::one())).sqrt();
    report(model, norm.rate_to_si(w), norm.rate_to_si(c), Method::QuadraticBound)
}

/// Heating model with `D` set so that `chain` at `gamma` has limit `n0`.
pub fn calibrate_heating<T: Real>(
    chain: &IonChain<T>,
    model: &HeatingModel<T>,
    gamma: T,
    method: Method,
    n0: T,
    norm: &Normalization<T>,
) -> Result<HeatingModel<T>> {
    let cc = com_cooling(chain, gamma, method)?;
    let omega0 = norm.rate_to_si(cc.spectrum.frequency(cc.com));
    let d = calibrate_d(model, omega0, norm.rate_to_si(cc.rate), n0)?;
    model.with_d(d)
}
