//! Problem families as paired low/high-fidelity samples.

pub mod advection;
pub mod benchmark1;
pub mod burgers;
pub mod darcy;
mod dataset;
pub mod initial;

pub use advection::solve_advection;
pub use benchmark1::{benchmark1_domain, benchmark1_hf, benchmark1_input, benchmark1_input_with_slope, benchmark1_lf};
pub use burgers::solve_burgers;
pub use darcy::{darcy_domain, darcy_energy, darcy_source, solve_darcy, DarcySolution};
pub use dataset::{generate_dataset, sample_seed, Dataset, Generator, ProblemConfig, ProblemKind, Sample};
pub use initial::{gen_initial_condition, spectral_degrade, DegradeSpec, IcDraw, IcSpec};
