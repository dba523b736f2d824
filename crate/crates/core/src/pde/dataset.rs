//! Paired low/high-fidelity datasets for every problem family.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::advection::solve_advection;
use super::benchmark1::{benchmark1_hf, benchmark1_input, benchmark1_lf};
use super::burgers::solve_burgers;
use super::darcy::{darcy_domain, darcy_source, solve_darcy};
use super::initial::{gen_initial_condition, spectral_degrade, DegradeSpec, IcSpec};
use crate::error::{FloralError, Result};
use crate::grid::{resample, Axis, Domain, GridFunction};
use crate::random_fields::{kkl_decompose, KernelSpec, KklBasis};
use crate::rng::{derive_seed, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Benchmark1,
    Advection,
    Burgers,
    Darcy,
}

impl ProblemKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Benchmark1 => "benchmark1",
            Self::Advection => "advection",
            Self::Burgers => "burgers",
            Self::Darcy => "darcy",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "benchmark1" => Ok(Self::Benchmark1),
            "advection" => Ok(Self::Advection),
            "burgers" => Ok(Self::Burgers),
            "darcy" => Ok(Self::Darcy),
            other => Err(FloralError::Config(format!("unknown problem '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub problem: ProblemKind,
    /// High-fidelity grid (space, then time for evolution problems).
    pub resolution: Vec<usize>,
    /// Native low-fidelity grid.
    pub lf_resolution: Vec<usize>,
    /// Benchmark 1 slope range of `a(x) = k x - 4`.
    pub slope_range: (f64, f64),
    /// Advection speed.
    pub beta: f64,
    /// Burgers viscosity.
    pub nu: f64,
    pub t_final: f64,
    /// Darcy log-permeability correlation length.
    pub lengthscale: f64,
    pub mean_log_permeability: f64,
    pub well_rate: f64,
    pub well_size: f64,
    pub q_hf: usize,
    pub q_lf: usize,
    pub ic: IcSpec,
    pub degrade: DegradeSpec,
}

impl ProblemConfig {
    pub fn defaults(problem: ProblemKind) -> Self {
        let base = Self {
            problem,
            resolution: vec![128],
            lf_resolution: vec![128],
            slope_range: (10.0, 14.0),
            beta: 0.05,
            nu: 0.01,
            t_final: 1.0,
            lengthscale: 0.1,
            mean_log_permeability: 0.0,
            well_rate: 50.0,
            well_size: 0.125,
            q_hf: 128,
            q_lf: 64,
            ic: IcSpec::default(),
            degrade: DegradeSpec::default(),
        };
        match problem {
            ProblemKind::Benchmark1 => base,
            ProblemKind::Advection => Self { resolution: vec![128, 128], lf_resolution: vec![128, 128], ..base },
            ProblemKind::Burgers => Self {
                resolution: vec![128, 128],
                lf_resolution: vec![64, 64],
                t_final: 0.2,
                degrade: DegradeSpec { f_keep: 0.6, ..DegradeSpec::default() },
                ..base
            },
            ProblemKind::Darcy => Self { resolution: vec![128, 128], lf_resolution: vec![32, 32], ..base },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = if self.problem == ProblemKind::Benchmark1 { 1 } else { 2 };
        for (name, r) in [("resolution", &self.resolution), ("lf_resolution", &self.lf_resolution)] {
            if r.len() != dims || r.iter().any(|&n| n < 2) {
                return Err(FloralError::Config(format!(
                    "{name} must have {dims} entries of at least 2, got {r:?}"
                )));
            }
        }
        match self.problem {
            ProblemKind::Benchmark1 => {
                if !(self.slope_range.0 < self.slope_range.1) {
                    return Err(FloralError::Config("slope_range must be increasing".into()));
                }
                if self.lf_resolution != self.resolution {
                    return Err(FloralError::Config("benchmark1 uses one grid for both fidelities".into()));
                }
            }
            ProblemKind::Advection | ProblemKind::Burgers => {
                self.ic.validate()?;
                self.degrade.validate()?;
                if !(self.t_final > 0.0) {
                    return Err(FloralError::Config("t_final must be positive".into()));
                }
                if self.problem == ProblemKind::Advection {
                    if self.lf_resolution != self.resolution {
                        return Err(FloralError::Config("advection uses one grid for both fidelities".into()));
                    }
                    let [nx, nt] = [self.resolution[0], self.resolution[1]];
                    let cfl = self.beta.abs() * (self.t_final / (nt - 1) as f64) * nx as f64;
                    if cfl > 1.0 {
                        return Err(FloralError::Config(format!("advection CFL number {cfl:.3} exceeds 1")));
                    }
                } else if self.nu < 0.0 {
                    return Err(FloralError::Config("nu must be nonnegative".into()));
                }
            }
            ProblemKind::Darcy => {
                let n: usize = self.resolution.iter().product();
                if self.q_lf == 0 || self.q_lf > self.q_hf || self.q_hf > n {
                    return Err(FloralError::Config(format!(
                        "need 1 <= q_lf <= q_hf <= {n}, got {} and {}",
                        self.q_lf, self.q_hf
                    )));
                }
                if !(self.lengthscale > 0.0) || !(self.well_size > 0.0 && self.well_size < 0.5) {
                    return Err(FloralError::Config("invalid Darcy lengthscale or well size".into()));
                }
            }
        }
        Ok(())
    }

    pub fn input_domain(&self) -> Domain {
        match self.problem {
            ProblemKind::Benchmark1 => super::benchmark1::benchmark1_domain(),
            ProblemKind::Advection | ProblemKind::Burgers => {
                Domain::new(vec![Axis::periodic(0.0, 1.0)]).expect("unit interval")
            }
            ProblemKind::Darcy => darcy_domain(),
        }
    }

    pub fn input_shape(&self) -> Vec<usize> {
        match self.problem {
            ProblemKind::Advection | ProblemKind::Burgers => vec![self.resolution[0]],
            _ => self.resolution.clone(),
        }
    }
}

/// One `(a, w_LF, w_HF)` triple; the low-fidelity field is kept natively and on the HF grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub input: GridFunction,
    pub lf: Option<GridFunction>,
    pub lf_on_hf: Option<GridFunction>,
    pub hf: GridFunction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub config: ProblemConfig,
    pub seed: u64,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn has_lf(&self) -> bool {
        self.samples.iter().all(|s| s.lf_on_hf.is_some())
    }
}

/// Seed of sample `index` under `root`.
pub fn sample_seed(root: u64, index: usize) -> u64 {
    derive_seed(root, &[stream::SAMPLE, index as u64])
}

/// Shared precomputation for a dataset (the Darcy KKL basis).
pub struct Generator {
    config: ProblemConfig,
    basis: Option<KklBasis>,
}

impl Generator {
    pub fn new(config: &ProblemConfig) -> Result<Self> {
        config.validate()?;
        let basis = if config.problem == ProblemKind::Darcy {
            let spec = KernelSpec::exponential(config.lengthscale);
            Some(kkl_decompose(&spec, &darcy_domain(), &config.resolution, config.q_hf, config.mean_log_permeability)?)
        } else {
            None
        };
        Ok(Self { config: config.clone(), basis })
    }

    pub fn basis(&self) -> Option<&KklBasis> {
        self.basis.as_ref()
    }

    pub fn sample(&self, seed: u64) -> Result<Sample> {
        let c = &self.config;
        match c.problem {
            ProblemKind::Benchmark1 => {
                let a = benchmark1_input(c.slope_range, c.resolution[0], seed)?;
                let lf = benchmark1_lf(&a)?;
                Ok(Sample { hf: benchmark1_hf(&a), lf_on_hf: Some(lf.clone()), lf: Some(lf), input: a })
            }
            ProblemKind::Advection => {
                let [nx, nt] = [c.resolution[0], c.resolution[1]];
                let u0 = gen_initial_condition(&c.ic, &c.input_domain(), nx, seed)?;
                let hf = solve_advection(&u0, c.beta, nt, c.t_final)?;
                let lf = solve_advection(&spectral_degrade(&u0, &c.degrade)?, c.beta, nt, c.t_final)?;
                Ok(Sample { input: u0, lf_on_hf: Some(lf.clone()), lf: Some(lf), hf })
            }
            ProblemKind::Burgers => {
                let [nx, nt] = [c.resolution[0], c.resolution[1]];
                let u0 = gen_initial_condition(&c.ic, &c.input_domain(), nx, seed)?;
                let hf = solve_burgers(&u0, c.nu, nt, c.t_final)?;
                let u0_lf = resample(&spectral_degrade(&u0, &c.degrade)?, &[c.lf_resolution[0]])?;
                let lf = solve_burgers(&u0_lf, c.nu, c.lf_resolution[1], c.t_final)?;
                let lf_on_hf = resample(&lf, &c.resolution)?;
                Ok(Sample { input: u0, lf: Some(lf), lf_on_hf: Some(lf_on_hf), hf })
            }
            ProblemKind::Darcy => {
                let basis = self.basis.as_ref().expect("basis built for Darcy");
                let z = basis.draw_coefficients(seed);
                let k_hf = basis.log_field(&z, c.q_hf)?.map(f64::exp);
                let g_lf = resample(&basis.log_field(&z, c.q_lf)?, &c.lf_resolution)?;
                let k_lf = g_lf.map(f64::exp);
                let dom = darcy_domain();
                let f_hf = darcy_source(c.well_rate, c.well_size, &dom, &c.resolution)?;
                let f_lf = darcy_source(c.well_rate, c.well_size, &dom, &c.lf_resolution)?;
                let hf = solve_darcy(&k_hf, &f_hf)?.pressure;
                let lf = solve_darcy(&k_lf, &f_lf)?.pressure;
                let lf_on_hf = resample(&lf, &c.resolution)?;
                Ok(Sample { input: k_hf, lf: Some(lf), lf_on_hf: Some(lf_on_hf), hf })
            }
        }
    }
}

/// Generates `count` samples; sample `i` depends only on `(config, seed, i)`.
pub fn generate_dataset(config: &ProblemConfig, count: usize, seed: u64) -> Result<Dataset> {
    let gen = Generator::new(config)?;
    let samples = (0..count)
        .into_par_iter()
        .map(|i| {
            gen.sample(sample_seed(seed, i))
                .map_err(|e| FloralError::Sample { index: i, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { config: config.clone(), seed, samples })
}
