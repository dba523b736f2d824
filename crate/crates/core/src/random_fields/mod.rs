//! Gaussian-process priors and Karhunen–Loève permeability fields.

mod gp;
mod kernel;
mod kkl;

pub use gp::{kernel_matrix, sample_gp, GpSampler, CHOLESKY_JITTER, CHOLESKY_MAX_POINTS, EMBEDDING_PADDING};
pub use kernel::{KernelFamily, KernelSpec, StationaryKernel};
pub use kkl::{kkl_decompose, sample_log_permeability, KklBasis, DENSE_MAX_POINTS};
