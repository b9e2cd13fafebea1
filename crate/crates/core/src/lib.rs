//! Recovery of low-Tucker-rank tensors from linear Gaussian measurements.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`]: dense column-major tensors, unfoldings and mode products.
//! * [`hosvd`]: thin SVD, truncated HOSVD and the rank-`r` projection `H_r`.
//! * [`sensing`]: the measurement operator, batched costs and gradients,
//!   and an empirical probe of the tensor restricted isometry property.
//! * [`solvers`]: tensor IHT and its stochastic (mini-batch) variant.
//! * [`analysis`]: the contraction constants of the linear convergence
//!   bound and the sample-complexity check.
//! * [`io`]: the `TNSR` binary and CSV tensor file formats.

pub mod analysis;
pub mod error;
pub mod hosvd;
pub mod io;
pub mod rng;
pub mod sensing;
pub mod solvers;
pub mod tensor;

pub use error::{Error, Result};
pub use hosvd::{hosvd_truncate, project_rank_r, reconstruct, svd_thin, Svd, TuckerFactors};
pub use sensing::{BatchPartition, SensingOperator};
pub use solvers::{run, RunStatus, RunTrace, SolverConfig};
pub use tensor::{DenseTensor, Matrix, RankTuple, Shape};
