//! Spectral-Galerkin simulation of the renormalized stochastic Allen–Cahn
//! (Φ⁴₂) equation on the two-dimensional torus, together with negative
//! Besov norms and ensemble experiments measuring synchronization by noise.

pub mod besov;
pub mod error;
pub mod experiments;
mod fft;
pub mod field;
pub mod noise;
pub mod solver;

pub use besov::{BesovParams, LemmaGap, PhiValue, SGrid};
pub use error::{Error, Result};
pub use experiments::{ExperimentConfig, ExperimentKind, ExperimentReport, RateEstimate};
pub use field::{Field, HeatTime, LpIndex, TorusGrid};
pub use noise::{NoiseRealization, RenormConstant};
pub use solver::{Integrator, Nonlinearity, Scheme, SolverConfig, Trajectory};
