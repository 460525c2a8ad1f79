//! Simulation and analysis of a parametrically feedback-cooled, optically
//! levitated nanoparticle.
//!
//! Four independent routes describe the same steady states and dynamics:
//!
//! * [`analytic`]: closed-form distributions and moments,
//! * [`fp2d`]: finite-volume evolution of the truncated Wigner equation,
//! * [`fp1d`]: steady states of one-dimensional Fokker-Planck reductions,
//! * [`langevin`]: stochastic trajectories of the corresponding Langevin equations,
//!
//! plus the Gaussian-closed moment hierarchy in [`moments`] and bistability
//! diagnostics in [`analysis`]. All numerics are generic over [`Real`]; the
//! aliases below fix the scalar to `f64`, which every preset assumes.

pub mod analysis;
pub mod analytic;
pub mod dist;
pub mod error;
pub mod fp1d;
pub mod fp2d;
pub mod langevin;
pub mod model;
pub mod moments;
pub mod presets;
pub mod quad;
pub mod scalar;
pub mod special;

pub use error::{Error, Result};

/// Library version, echoed in output provenance headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use scalar::Real;

pub type SystemParams = model::SystemParams<f64>;
pub type DerivedCoefficients = model::DerivedCoefficients<f64>;
pub type RegimeReport = model::RegimeReport<f64>;
pub type Distribution1D = dist::Distribution1D<f64>;
pub type GaussianSteadyState = analytic::GaussianSteadyState<f64>;
pub type MomentState = moments::MomentState<f64>;
pub type PhaseGrid = fp2d::PhaseGrid<f64>;
pub type WignerField = fp2d::WignerField<f64>;
pub type FP1DProblem = fp1d::FP1DProblem<f64>;
pub type TrajectoryEnsemble = langevin::TrajectoryEnsemble<f64>;
pub type BistabilityReport = analysis::BistabilityReport<f64>;

pub type SystemParamsF32 = model::SystemParams<f32>;
pub type Distribution1DF32 = dist::Distribution1D<f32>;
pub type WignerFieldF32 = fp2d::WignerField<f32>;
