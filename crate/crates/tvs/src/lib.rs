//! Time Varying Stochastic (TVS) regression.
//!
//! Fits a linear input-output relation `y = beta * x + c + eps` where every
//! nonzero input impulse reaches the output after a random, Poisson-distributed
//! integer time delay. Estimation maximises the joint log-likelihood of the
//! Gaussian prediction residuals and the Poisson time shifts: a randomized
//! discrete search recovers the per-impulse shifts at fixed parameters, and a
//! differential-evolution outer loop optimises the parameters themselves.
//!
//! The crate also ships a simulator for synthetic delay data, a closed-form
//! OLS baseline (which is heavily attenuated on delayed data), and an
//! exhaustive-enumeration oracle for the inner shift search.

pub mod error;
pub mod inner;
pub mod likelihood;
pub mod model;
pub mod ols;
pub mod outer;
pub mod sim;

pub use error::{Result, TvsError};
pub use inner::{
    exhaustive_search, partition_blocks, search_shifts, tau_cap_for, Block, SearchConfig,
};
pub use likelihood::{
    gaussian_loglik, joint_loglik, poisson_loglik, poisson_logpmf, JointLogLik,
};
pub use model::{
    apply_shifts, decompose, sparsity_check, DensityReport, Impulse, ImpulseSet, ModelParams,
    ShiftVector, TimeSeries,
};
pub use ols::{ols_fit, OlsResult};
pub use outer::{destandardize_params, fit, standardize, FitConfig, FitResult, ScalingRecord};
pub use sim::{simulate, SimConfig, SimOutput};
