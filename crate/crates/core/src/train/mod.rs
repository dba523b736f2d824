//! Optimization of the flow-matching objective, checkpoints and evaluation.

pub mod checkpoint;
pub mod eval;
pub mod metrics;
pub mod optim;

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{FloralError, Result};
use crate::flow::{cfm_loss, condition_on_grid, draw_prior, make_target, CouplingSample, FlowMode, Normalization, PathConfig};
use crate::grid::GridFunction;
use crate::neural::{no_grad, FilmFnoConfig, ModelSpec, Tensor, VectorFieldModel};
use crate::pde::Sample;
use crate::random_fields::{GpSampler, KernelSpec};
use crate::rng::{derive_seed, rng_for, stream};

pub use checkpoint::{Checkpoint, CheckpointHeader, CheckpointKind};
pub use eval::{evaluate, generate_for_samples, Predictor, SampleOptions};
pub use metrics::{compute_metrics, EvalReport, SampleMetrics, METRICS_HEADER};
pub use optim::{adam_step, adam_update, AdamConfig, AdamState};

/// Network shape apart from the Fourier modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Architecture {
    pub n_layers: usize,
    pub hidden_channels: usize,
    pub lifting_ratio: usize,
    pub projection_ratio: usize,
    pub conditioner_width: usize,
    pub conditioner_depth: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        let d = FilmFnoConfig::default();
        Self {
            n_layers: d.n_layers,
            hidden_channels: d.hidden_channels,
            lifting_ratio: d.lifting_ratio,
            projection_ratio: d.projection_ratio,
            conditioner_width: d.conditioner_width,
            conditioner_depth: d.conditioner_depth,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub mode: FlowMode,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Learning-rate factor applied after every epoch.
    pub lr_decay: f64,
    pub sigma_min: f64,
    pub gamma_weighting: bool,
    pub modes_per_axis: Vec<usize>,
    pub architecture: Architecture,
    /// Training uses samples `0..train_size`.
    pub train_size: usize,
    /// Validation uses the next `validation_size` samples.
    pub validation_size: usize,
    pub seed: u64,
    /// Standardize `a` and the targets channel-wise with training statistics.
    pub normalize: bool,
    /// Covariance of the prior `nu_0` and of the path noise.
    pub prior: KernelSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: FlowMode::Floral,
            epochs: 300,
            batch_size: 2,
            lr: 1e-3,
            weight_decay: 1e-4,
            lr_decay: 0.99,
            sigma_min: PathConfig::default().sigma_min,
            gamma_weighting: true,
            modes_per_axis: vec![16],
            architecture: Architecture::default(),
            train_size: 10,
            validation_size: 0,
            seed: 0,
            normalize: false,
            prior: KernelSpec::default_prior(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.train_size == 0 {
            return Err(FloralError::Config("epochs, batch_size and train_size must be positive".into()));
        }
        if self.batch_size > self.train_size {
            return Err(FloralError::Config(format!(
                "batch_size {} exceeds train_size {}",
                self.batch_size, self.train_size
            )));
        }
        if !(self.lr >= 0.0) || !(self.lr_decay > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(FloralError::Config("need lr >= 0, lr_decay > 0, weight_decay >= 0".into()));
        }
        self.path().validate()?;
        self.prior.validate()?;
        self.film_config().validate()
    }

    pub fn path(&self) -> PathConfig {
        PathConfig { sigma_min: self.sigma_min, gamma_weighting: self.gamma_weighting }
    }

    pub fn film_config(&self) -> FilmFnoConfig {
        let a = &self.architecture;
        FilmFnoConfig {
            n_layers: a.n_layers,
            hidden_channels: a.hidden_channels,
            modes_per_axis: self.modes_per_axis.clone(),
            lifting_ratio: a.lifting_ratio,
            projection_ratio: a.projection_ratio,
            conditioner_width: a.conditioner_width,
            conditioner_depth: a.conditioner_depth,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { weight_decay: self.weight_decay, ..AdamConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
    pub lr: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub history: Vec<EpochRecord>,
    pub optimizer_steps: u64,
}

/// `(a, target)` pairs on the HF grid.
pub fn training_pairs(samples: &[Sample], mode: FlowMode) -> Result<Vec<(GridFunction, GridFunction)>> {
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let wrap = |e| FloralError::Sample { index: i, source: Box::new(e) };
            let a = condition_on_grid(&s.input, &s.hf.domain, &s.hf.shape).map_err(wrap)?;
            let t = make_target(&s.hf, s.lf_on_hf.as_ref(), mode).map_err(wrap)?;
            Ok((a, t))
        })
        .collect()
}

struct Problem {
    pairs: Vec<(GridFunction, GridFunction)>,
    prior: GpSampler,
}

impl Problem {
    fn couplings(&self, idx: &[usize], seed: u64) -> Vec<CouplingSample> {
        idx.iter()
            .enumerate()
            .map(|(j, &i)| {
                let (a, w1) = &self.pairs[i];
                let w0 = draw_prior(&self.prior, w1.channels, &mut rng_for(seed, &[j as u64]));
                CouplingSample { a: a.clone(), w0, w1: w1.clone() }
            })
            .collect()
    }
}

/// Mean loss over all pairs, averaged over `draws` independent draws of `w0`, `tau` and noise.
fn mean_loss(model: &VectorFieldModel, problem: &Problem, cfg: &TrainConfig, seed: u64, draws: usize) -> Result<f64> {
    let idx: Vec<usize> = (0..problem.pairs.len()).collect();
    let mut total = 0.0;
    for d in 0..draws as u64 {
        for (c, chunk) in idx.chunks(cfg.batch_size).enumerate() {
            let c = c as u64;
            let batch = problem.couplings(chunk, derive_seed(seed, &[d, c, 0]));
            let l = no_grad(|| cfm_loss(model, &batch, &problem.prior, derive_seed(seed, &[d, c, 1]), &cfg.path()))?;
            total += l.data()[0] * chunk.len() as f64;
        }
    }
    Ok(total / (idx.len() * draws) as f64)
}

fn validation_loss(model: &VectorFieldModel, problem: &Problem, cfg: &TrainConfig) -> Result<f64> {
    mean_loss(model, problem, cfg, derive_seed(cfg.seed, &[stream::VALIDATION]), 1)
}

/// The flow-matching objective of a trained checkpoint on `samples`, with
/// `draws` fixed draws per sample; equal seeds give common random numbers
/// across checkpoints.
pub fn objective(ck: &Checkpoint, samples: &[Sample], draws: usize, seed: u64) -> Result<f64> {
    let (Some(model), Some(cfg), Some(mode)) = (&ck.model, &ck.header.train, ck.header.mode) else {
        return Err(FloralError::Config("objective needs a trained checkpoint".into()));
    };
    if samples.is_empty() || draws == 0 {
        return Err(FloralError::Config("objective needs samples and draws".into()));
    }
    let mut pairs = training_pairs(samples, mode)?;
    if let Some(n) = &ck.header.normalization {
        for (a, t) in pairs.iter_mut() {
            *a = n.input(a);
            *t = n.target(t);
        }
    }
    let prior = GpSampler::new(&ck.header.prior, &pairs[0].1.domain, &pairs[0].1.shape)?;
    mean_loss(model, &Problem { pairs, prior }, cfg, seed, draws)
}

fn snapshot(model: &VectorFieldModel) -> Vec<(String, Tensor)> {
    model.named_parameters().map(|(n, p)| (n.to_string(), p.value().clone())).collect()
}

/// Trains on `samples[..train_size]`, validating on the following `validation_size` samples.
///
/// The best checkpoint minimizes the validation loss, or the training loss
/// when there is no validation split.
pub fn train(samples: &[Sample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let needed = cfg.train_size + cfg.validation_size;
    if samples.len() < needed {
        return Err(FloralError::Config(format!("need {needed} samples, dataset has {}", samples.len())));
    }
    if cfg.mode == FlowMode::Floral && samples[..needed].iter().any(|s| s.lf_on_hf.is_none()) {
        return Err(FloralError::Config("FLORAL training needs low-fidelity solutions in the dataset".into()));
    }
    let mut train_pairs = training_pairs(&samples[..cfg.train_size], cfg.mode)?;
    let mut val_pairs = training_pairs(&samples[cfg.train_size..needed], cfg.mode)?;
    let normalization = if cfg.normalize {
        let (a, t): (Vec<_>, Vec<_>) = train_pairs.iter().cloned().unzip();
        Some(Normalization::fit(&a, &t)?)
    } else {
        None
    };
    if let Some(n) = &normalization {
        for (a, t) in train_pairs.iter_mut().chain(val_pairs.iter_mut()) {
            *a = n.input(a);
            *t = n.target(t);
        }
    }
    let (a0, t0) = (&train_pairs[0].0, &train_pairs[0].1);
    let prior = GpSampler::new(&cfg.prior, &t0.domain, &t0.shape)?;
    let val_prior = GpSampler::new(&cfg.prior, &t0.domain, &t0.shape)?;
    let spec = ModelSpec {
        config: cfg.film_config(),
        w_channels: t0.channels,
        a_channels: a0.channels,
        axis_kinds: t0.domain.axes.iter().map(|a| a.kind).collect(),
    };
    let mut model = VectorFieldModel::new(spec, &mut rng_for(cfg.seed, &[stream::INIT]))?;
    let train_set = Problem { pairs: train_pairs, prior };
    let val_set = Problem { pairs: val_pairs, prior: val_prior };

    let adam = cfg.adam();
    let mut state = AdamState::for_params(model.parameters());
    let mut lr = cfg.lr;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Vec<(String, Tensor)>, f64, Option<f64>)> = None;
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..cfg.train_size).collect();
        order.shuffle(&mut rng_for(cfg.seed, &[stream::SHUFFLE, epoch as u64]));
        let mut epoch_loss = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let seed = derive_seed(cfg.seed, &[stream::BATCH, epoch as u64, b as u64]);
            let batch = train_set.couplings(idx, derive_seed(seed, &[0]));
            let loss = cfm_loss(&model, &batch, &train_set.prior, derive_seed(seed, &[1]), &cfg.path())
                .map_err(|_| FloralError::NonFiniteLoss { epoch, batch: b })?;
            let value = loss.data()[0];
            model.zero_grad();
            loss.backward()?;
            drop(loss);
            adam_step(model.parameters_mut(), &mut state, lr, &adam)?;
            epoch_loss += value * idx.len() as f64;
        }
        let train_loss = epoch_loss / cfg.train_size as f64;
        let validation_loss =
            if cfg.validation_size > 0 { Some(validation_loss(&model, &val_set, cfg)?) } else { None };
        log::info!("epoch {epoch}: train {train_loss:.6e} validation {validation_loss:?} lr {lr:.3e}");
        history.push(EpochRecord { epoch, train_loss, validation_loss, lr });
        let score = validation_loss.unwrap_or(train_loss);
        if best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, epoch, snapshot(&model), train_loss, validation_loss));
        }
        lr *= cfg.lr_decay;
    }
    model.zero_grad();
    let last_rec = history.last().expect("at least one epoch");
    let last = Checkpoint::from_model(
        model.clone(),
        cfg.mode,
        cfg,
        normalization.clone(),
        last_rec.epoch,
        Some(last_rec.train_loss),
        last_rec.validation_loss,
    );
    let (_, epoch, values, tl, vl) = best.expect("at least one epoch");
    let best_model = VectorFieldModel::from_parameters(model.spec().clone(), values)?;
    let best = Checkpoint::from_model(best_model, cfg.mode, cfg, normalization, epoch, Some(tl), vl);
    Ok(TrainOutcome { best, last, history, optimizer_steps: state.step })
}

pub fn losses_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_loss,validation_loss,lr\n");
    for r in history {
        let v = r.validation_loss.map_or(String::new(), |v| v.to_string());
        s.push_str(&format!("{},{},{},{}\n", r.epoch, r.train_loss, v, r.lr));
    }
    s
}

/// Writes `best.json`, `final.json` (with their blobs) and `losses.csv` into `dir`.
pub fn write_outcome(outcome: &TrainOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    outcome.best.save(&dir.join("best.json"))?;
    outcome.last.save(&dir.join("final.json"))?;
    fs::write(dir.join("losses.csv"), losses_csv(&outcome.history))?;
    Ok(())
}
