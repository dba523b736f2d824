//! Ensemble generation over datasets and scoring against reference solutions.

use rayon::prelude::*;

use super::checkpoint::{Checkpoint, CheckpointKind};
use super::metrics::{compute_metrics, EvalReport};
use crate::error::{FloralError, Result};
use crate::flow::{condition_on_grid, generate_ensemble, EnsembleRequest, FlowMode, Normalization, OdeOptions};
use crate::grid::{resample, GridFunction};
use crate::neural::VectorFieldModel;
use crate::pde::Sample;
use crate::random_fields::{GpSampler, KernelSpec};
use crate::rng::derive_seed;

/// Anything that maps a dataset sample to an ensemble.
pub enum Predictor {
    Model { model: VectorFieldModel, mode: FlowMode, normalization: Option<Normalization>, prior: KernelSpec },
    /// Replicates the reference HF solution.
    Oracle,
    /// Replicates the LF solution.
    LfBaseline,
}

impl Predictor {
    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        match ck.header.kind {
            CheckpointKind::Oracle => Ok(Self::Oracle),
            CheckpointKind::LfBaseline => Ok(Self::LfBaseline),
            CheckpointKind::FilmFno => {
                let h = ck.header;
                Ok(Self::Model {
                    model: ck.model.ok_or_else(|| FloralError::Data("checkpoint has no parameters".into()))?,
                    mode: h.mode.ok_or_else(|| FloralError::Data("checkpoint has no flow mode".into()))?,
                    normalization: h.normalization,
                    prior: h.prior,
                })
            }
        }
    }

    pub fn needs_lf(&self) -> bool {
        matches!(self, Self::LfBaseline | Self::Model { mode: FlowMode::Floral, .. })
    }
}

#[derive(Clone, Debug)]
pub struct SampleOptions {
    pub ensembles: usize,
    pub seed: u64,
    /// Output grid; the HF grid of each sample when absent.
    pub resolution: Option<Vec<usize>>,
    pub ode: OdeOptions,
    /// Members integrated together; chosen from the grid size when absent.
    pub max_batch: Option<usize>,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self { ensembles: 10, seed: 0, resolution: None, ode: OdeOptions::default(), max_batch: None }
    }
}

/// Keeps the widest activation of one batch near 64 MiB.
pub fn default_max_batch(model: &VectorFieldModel, points: usize) -> usize {
    let c = &model.spec().config;
    let widest = c.hidden_channels * c.lifting_ratio.max(c.projection_ratio).max(1);
    ((1usize << 23) / (points * widest).max(1)).max(1)
}

fn on_grid(f: &GridFunction, shape: &[usize]) -> Result<GridFunction> {
    if f.shape[..] == shape[..] {
        Ok(f.clone())
    } else {
        resample(f, shape)
    }
}

/// Ensembles for `samples`, given as `(dataset index, sample)` pairs, in input order.
///
/// Sample `i` uses the seed `derive_seed(opts.seed, [i])`, so results do not
/// depend on which other samples are requested.
pub fn generate_for_samples(
    pred: &Predictor,
    samples: &[(usize, &Sample)],
    opts: &SampleOptions,
) -> Result<Vec<Vec<GridFunction>>> {
    if opts.ensembles == 0 {
        return Err(FloralError::Config("ensembles must be positive".into()));
    }
    if samples.is_empty() {
        return Ok(Vec::new());
    }
    let shape = opts.resolution.clone().unwrap_or_else(|| samples[0].1.hf.shape.clone());
    let domain = samples[0].1.hf.domain.clone();
    if shape.len() != domain.ndim() {
        return Err(FloralError::Config(format!("resolution {shape:?} does not match a {}-d domain", domain.ndim())));
    }
    let prior = match pred {
        Predictor::Model { prior, model, .. } => {
            model.check_grid(&domain)?;
            Some(GpSampler::new(prior, &domain, &shape)?)
        }
        _ => None,
    };
    samples
        .par_iter()
        .map(|&(index, s)| {
            let wrap = |e| FloralError::Sample { index, source: Box::new(e) };
            let lf = if pred.needs_lf() {
                Some(s.lf.as_ref().or(s.lf_on_hf.as_ref()).ok_or_else(|| {
                    wrap(FloralError::Data("the predictor needs the low-fidelity solution".into()))
                })?)
            } else {
                None
            };
            match pred {
                Predictor::Oracle => Ok(vec![on_grid(&s.hf, &shape).map_err(wrap)?; opts.ensembles]),
                Predictor::LfBaseline => Ok(vec![on_grid(lf.expect("checked"), &shape).map_err(wrap)?; opts.ensembles]),
                Predictor::Model { model, mode, normalization, .. } => {
                    let a = condition_on_grid(&s.input, &domain, &shape).map_err(wrap)?;
                    let prior = prior.as_ref().expect("built for models");
                    let req = EnsembleRequest {
                        mode: *mode,
                        a: &a,
                        w_lf: lf,
                        n_members: opts.ensembles,
                        prior,
                        seed: derive_seed(opts.seed, &[index as u64]),
                        opts: &opts.ode,
                        normalization: normalization.as_ref(),
                        max_batch: opts.max_batch.unwrap_or_else(|| default_max_batch(model, a.n_points())),
                    };
                    generate_ensemble(model, model.spec().w_channels, &req).map_err(wrap)
                }
            }
        })
        .collect()
}

/// Generates ensembles on each sample's HF grid and scores them against the HF solutions.
pub fn evaluate(pred: &Predictor, samples: &[(usize, &Sample)], opts: &SampleOptions) -> Result<EvalReport> {
    let opts = SampleOptions { resolution: None, ..opts.clone() };
    let ensembles = generate_for_samples(pred, samples, &opts)?;
    let truths: Vec<GridFunction> = samples.iter().map(|(_, s)| s.hf.clone()).collect();
    let mut report = compute_metrics(&ensembles, &truths)?;
    for (m, (index, _)) in report.per_sample.iter_mut().zip(samples) {
        m.index = *index;
    }
    Ok(report)
}
