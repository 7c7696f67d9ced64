//! Single-excitation transfer along a spin-1/2 chain steered by a movable
//! parabolic magnetic field.
//!
//! Everything numerical is generic over [`scalar::Real`] (`f32` or `f64`);
//! the aliases below fix the scalar to `f64`, or `f32` with the `F32` suffix.

pub mod analysis;
pub mod error;
pub mod krotov;
pub mod model;
pub mod oracle;
pub mod propagator;
pub mod scalar;
pub mod tridiag;

pub use error::{Error, Result};

pub type ChainConfigF64 = model::ChainConfig<f64>;
pub type ControlPulseF64 = model::ControlPulse<f64>;
pub type QuantumStateF64 = model::QuantumState<f64>;
pub type TrajectoryF64 = propagator::Trajectory<f64>;
pub type KrotovSettingsF64 = krotov::KrotovSettings<f64>;
pub type OptimizationResultF64 = krotov::OptimizationResult<f64>;
pub type ScanRecordF64 = analysis::ScanRecord<f64>;
pub type QslFitF64 = analysis::QslFit<f64>;
pub type FullStateF64 = oracle::FullState<f64>;

pub type ChainConfigF32 = model::ChainConfig<f32>;
pub type ControlPulseF32 = model::ControlPulse<f32>;
pub type QuantumStateF32 = model::QuantumState<f32>;
pub type TrajectoryF32 = propagator::Trajectory<f32>;
pub type KrotovSettingsF32 = krotov::KrotovSettings<f32>;
