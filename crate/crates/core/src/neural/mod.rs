//! Differentiable tensors and the FiLM-conditioned Fourier neural operator.

pub mod autograd;
pub mod film_fno;
pub mod gradcheck;
pub mod ops;
pub mod spectral;

pub use autograd::{grad_enabled, no_grad, Tensor, Var};
pub use gradcheck::{all_entries, gradient_check, GradCheckReport, GRADCHECK_FLOOR};
pub use spectral::{spectral_conv, spectral_weight_modes, SpectralLayout};
pub use film_fno::{FilmFnoConfig, ModelSpec, VectorFieldModel};
