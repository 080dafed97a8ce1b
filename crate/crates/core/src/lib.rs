//! Sympathetic cooling of the axial COM mode in long ion chains: equilibrium,
//! normal modes, damped spectra, cooling limits, heating/cooling trajectories
//! through a circuit, and the parameter studies built on them.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the `*F64`
//! and `*F32` aliases below fix the scalar. Studies in [`optimize`] run in
//! `f64`.

pub mod damping;
pub mod dynamics;
pub mod error;
pub mod heating;
pub mod limit;
pub mod modes;
pub mod optimize;
pub mod potential;
pub mod scalar;
pub mod search;
pub mod units;

pub use damping::{
    exact_damped_modes, first_order_mode_correction, linearized_rate, perturbative_rate, DampedMode,
    DampedSpectrum, DampingConfig,
};
pub use dynamics::{
    evolve, gate_fidelity, mean_gate_fidelity, total_fidelity, DutyCycleSchedule, FidelityModel, Phase,
    Trajectory,
};
pub use error::{Error, Result};
pub use heating::{heating_rate, HeatingModel};
pub use limit::{cooling_limit, quadratic_upper_bound, CoolingLimitReport, Method};
pub use modes::{com_mode_index, normal_modes, ModeSpectrum};
pub use potential::{calibrate_equispacing, solve_equilibrium, IonChain, IonRole, PotentialFamily, TrapPotential};
pub use scalar::Real;
pub use units::Normalization;

pub type TrapPotentialF64 = TrapPotential<f64>;
pub type TrapPotentialF32 = TrapPotential<f32>;
pub type IonChainF64 = IonChain<f64>;
pub type IonChainF32 = IonChain<f32>;
pub type ModeSpectrumF64 = ModeSpectrum<f64>;
pub type ModeSpectrumF32 = ModeSpectrum<f32>;
pub type DampingConfigF64 = DampingConfig<f64>;
pub type DampingConfigF32 = DampingConfig<f32>;
pub type HeatingModelF64 = HeatingModel<f64>;
pub type HeatingModelF32 = HeatingModel<f32>;
pub type NormalizationF64 = Normalization<f64>;
pub type NormalizationF32 = Normalization<f32>;
pub type TrajectoryF64 = Trajectory<f64>;
pub type TrajectoryF32 = Trajectory<f32>;
