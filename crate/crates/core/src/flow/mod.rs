//! Conditional flow matching: Gaussian probability paths, the regression
//! objective, and sampling by integrating the learned flow.

pub mod ode;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FloralError, Result};
use crate::grid::{mean_square_norm, resample, Domain, GridFunction};
use crate::neural::{ops, Tensor, Var, VectorFieldModel};
use crate::random_fields::GpSampler;
use crate::rng::{derive_seed, rng_from, stream};

pub use ode::{integrate_batch, integrate_fixed, OdeOptions, OdeStats};

/// Direct generation of the HF field, or of the HF − LF residual.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowMode {
    #[serde(rename = "FLORA", alias = "flora")]
    Flora,
    #[serde(rename = "FLORAL", alias = "floral")]
    Floral,
}

impl FlowMode {
    pub fn name(self) -> &'static str {
        match self {
            FlowMode::Flora => "FLORA",
            FlowMode::Floral => "FLORAL",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FLORA" => Ok(FlowMode::Flora),
            "FLORAL" => Ok(FlowMode::Floral),
            _ => Err(FloralError::Config(format!("unknown mode {s:?}; expected FLORA or FLORAL"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathConfig {
    pub sigma_min: f64,
    pub gamma_weighting: bool,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self { sigma_min: 1e-2, gamma_weighting: true }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_min > 0.0) {
            return Err(FloralError::Config(format!("sigma_min must be positive, got {}", self.sigma_min)));
        }
        Ok(())
    }

    /// Loss weight `gamma_tau^2` with `gamma_tau = 1 + 2 tau^2`.
    pub fn weight(&self, tau: f64) -> f64 {
        if self.gamma_weighting {
            (1.0 + 2.0 * tau * tau).powi(2)
        } else {
            1.0
        }
    }
}

/// Conditioning input with a prior draw `w0` and a target `w1`.
#[derive(Clone, Debug)]
pub struct CouplingSample {
    pub a: GridFunction,
    pub w0: GridFunction,
    pub w1: GridFunction,
}

/// Anything that evaluates a batched vector field `[B, C, S] -> [B, C, S]`.
pub trait VectorField: Sync {
    fn eval_batch(&self, tau: &[f64], w: &Tensor, a: &Tensor, shape: &[usize]) -> Result<Var>;
}

impl VectorField for VectorFieldModel {
    fn eval_batch(&self, tau: &[f64], w: &Tensor, a: &Tensor, shape: &[usize]) -> Result<Var> {
        self.forward(tau, w, a, shape)
    }
}

/// Closure-backed field, `f(tau, w, a)`.
pub struct FnField<F>(pub F);

impl<F: Fn(&[f64], &Tensor, &Tensor) -> Result<Tensor> + Sync> VectorField for FnField<F> {
    fn eval_batch(&self, tau: &[f64], w: &Tensor, a: &Tensor, _shape: &[usize]) -> Result<Var> {
        Ok(Var::constant((self.0)(tau, w, a)?))
    }
}

/// Training target: the HF field, or the HF − LF residual.
pub fn make_target(w_hf: &GridFunction, w_lf_on_hf: Option<&GridFunction>, mode: FlowMode) -> Result<GridFunction> {
    match mode {
        FlowMode::Flora => Ok(w_hf.clone()),
        FlowMode::Floral => {
            let lf = w_lf_on_hf.ok_or_else(|| FloralError::Data("FLORAL needs a low-fidelity field".into()))?;
            if !lf.same_grid(w_hf) {
                return Err(FloralError::Shape("low-fidelity field is not on the HF grid".into()));
            }
            w_hf.sub(lf)
        }
    }
}

/// `(1 - tau) w0 + tau w1 + sigma_min ||w1 - w0|| eps` with the RMS norm.
pub fn path_point_with_noise(z: &CouplingSample, tau: f64, eps: &GridFunction, cfg: &PathConfig) -> Result<GridFunction> {
    let diff = z.w1.sub(&z.w0)?;
    let sigma = cfg.sigma_min * mean_square_norm(&diff.values);
    let mean = z.w0.scale(1.0 - tau).add(&z.w1.scale(tau))?;
    mean.add(&eps.scale(sigma))
}

/// Independent prior draws, one per channel.
pub fn draw_prior(prior: &GpSampler, channels: usize, rng: &mut impl Rng) -> GridFunction {
    let mut values = Vec::with_capacity(channels * prior.shape().iter().product::<usize>());
    for _ in 0..channels {
        values.extend(prior.sample(rng).values);
    }
    GridFunction::new(prior.domain().clone(), prior.shape().to_vec(), channels, values).expect("prior grid")
}

/// A path point with fresh noise from `prior`.
pub fn sample_path_point(z: &CouplingSample, tau: f64, prior: &GpSampler, seed: u64, cfg: &PathConfig) -> Result<GridFunction> {
    let eps = draw_prior(prior, z.w0.channels, &mut rng_from(seed));
    path_point_with_noise(z, tau, &eps, cfg)
}

/// `w1 - w0`; the conditional field does not depend on `tau`.
pub fn target_vector_field(z: &CouplingSample) -> Result<GridFunction> {
    z.w1.sub(&z.w0)
}

/// Loss for explicit `tau` and noise per item.
pub fn cfm_loss_at(
    field: &dyn VectorField,
    batch: &[CouplingSample],
    taus: &[f64],
    noise: &[GridFunction],
    cfg: &PathConfig,
) -> Result<Var> {
    if batch.is_empty() || taus.len() != batch.len() || noise.len() != batch.len() {
        return Err(FloralError::Shape("loss needs one tau and one noise draw per batch item".into()));
    }
    let first = &batch[0].w0;
    let (s, cw, ca) = (first.n_points(), first.channels, batch[0].a.channels);
    let mut w = Vec::with_capacity(batch.len() * cw * s);
    let mut a = Vec::with_capacity(batch.len() * ca * s);
    let mut target = Vec::with_capacity(batch.len() * cw * s);
    for ((z, &tau), eps) in batch.iter().zip(taus).zip(noise) {
        if !z.w0.same_grid(first) || !z.w1.same_grid(first) || !z.a.same_grid_points(first) || z.a.channels != ca {
            return Err(FloralError::Shape("batch items must share one grid".into()));
        }
        w.extend(path_point_with_noise(z, tau, eps, cfg)?.values);
        a.extend_from_slice(&z.a.values);
        target.extend(target_vector_field(z)?.values);
    }
    let b = batch.len();
    let w = Tensor { shape: vec![b, cw, s], data: w };
    let a = Tensor { shape: vec![b, ca, s], data: a };
    let target = Tensor { shape: vec![b, cw, s], data: target };
    let pred = field.eval_batch(taus, &w, &a, &first.shape)?;
    let weights: Vec<f64> = taus.iter().map(|&t| cfg.weight(t)).collect();
    let loss = ops::weighted_mean_square_error(&pred, &target, &weights)?;
    if !loss.data()[0].is_finite() {
        return Err(FloralError::Autograd("non-finite loss".into()));
    }
    Ok(loss)
}

/// Conditional flow-matching loss with `tau ~ U[0, 1]` and fresh noise per item.
pub fn cfm_loss(field: &dyn VectorField, batch: &[CouplingSample], prior: &GpSampler, seed: u64, cfg: &PathConfig) -> Result<Var> {
    let mut taus = Vec::with_capacity(batch.len());
    let mut noise = Vec::with_capacity(batch.len());
    for (i, z) in batch.iter().enumerate() {
        let mut rng = rng_from(derive_seed(seed, &[i as u64]));
        taus.push(rng.gen::<f64>());
        noise.push(draw_prior(prior, z.w0.channels, &mut rng));
    }
    cfm_loss_at(field, batch, &taus, &noise, cfg)
}

/// Places the conditioning input on the evaluation grid.
///
/// Same-dimensional inputs are resampled; lower-dimensional ones (initial
/// conditions of space-time problems) are resampled on the leading axes and
/// repeated along the rest.
pub fn condition_on_grid(a: &GridFunction, domain: &Domain, shape: &[usize]) -> Result<GridFunction> {
    let k = a.domain.ndim();
    if k > domain.ndim() || a.domain.axes[..] != domain.axes[..k] {
        return Err(FloralError::Shape("conditioning input does not live on the leading axes of the domain".into()));
    }
    let r = if a.shape[..] == shape[..k] { a.clone() } else { resample(a, &shape[..k])? };
    if k == domain.ndim() {
        Ok(r)
    } else {
        r.broadcast_to(domain, shape)
    }
}

/// Flow integration for one conditioning input and start state.
pub fn integrate_flow(field: &dyn VectorField, a: &GridFunction, w0: &GridFunction, opts: &OdeOptions) -> Result<GridFunction> {
    if !a.same_grid_points(w0) {
        return Err(FloralError::Shape("a and w0 must share a grid".into()));
    }
    let s = w0.n_points();
    let at = Tensor { shape: vec![1, a.channels, s], data: a.values.clone() };
    let wt = Tensor { shape: vec![1, w0.channels, s], data: w0.values.clone() };
    let (y, _) = integrate_batch(field, &at, &wt, &w0.shape, opts)?;
    GridFunction::new(w0.domain.clone(), w0.shape.clone(), w0.channels, y.data)
}

/// Affine map between physical targets and the space the flow is trained in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub a_mean: Vec<f64>,
    pub a_std: Vec<f64>,
    pub target_mean: Vec<f64>,
    pub target_std: Vec<f64>,
}

fn affine(f: &GridFunction, shift: &[f64], scale: &[f64], forward: bool) -> GridFunction {
    let mut g = f.clone();
    for c in 0..g.channels {
        let (m, s) = (shift[c], scale[c]);
        for v in g.channel_mut(c) {
            *v = if forward { (*v - m) / s } else { *v * s + m };
        }
    }
    g
}

impl Normalization {
    /// Channel-wise means and standard deviations of inputs and targets.
    pub fn fit(inputs: &[GridFunction], targets: &[GridFunction]) -> Result<Self> {
        fn stats(fs: &[GridFunction]) -> Result<(Vec<f64>, Vec<f64>)> {
            let ch = fs.first().ok_or_else(|| FloralError::Data("no fields to normalize".into()))?.channels;
            let mut mean = vec![0.0; ch];
            let mut sq = vec![0.0; ch];
            let mut n = 0.0;
            for f in fs {
                for c in 0..ch {
                    mean[c] += f.channel(c).iter().sum::<f64>();
                    sq[c] += f.channel(c).iter().map(|v| v * v).sum::<f64>();
                }
                n += f.n_points() as f64;
            }
            let mean: Vec<f64> = mean.iter().map(|m| m / n).collect();
            let std = sq.iter().zip(&mean).map(|(s, m)| (s / n - m * m).max(0.0).sqrt().max(1e-12)).collect();
            Ok((mean, std))
        }
        let (a_mean, a_std) = stats(inputs)?;
        let (target_mean, target_std) = stats(targets)?;
        Ok(Self { a_mean, a_std, target_mean, target_std })
    }

    pub fn input(&self, a: &GridFunction) -> GridFunction {
        affine(a, &self.a_mean, &self.a_std, true)
    }

    pub fn target(&self, w: &GridFunction) -> GridFunction {
        affine(w, &self.target_mean, &self.target_std, true)
    }

    pub fn untarget(&self, w: &GridFunction) -> GridFunction {
        affine(w, &self.target_mean, &self.target_std, false)
    }
}

/// Everything needed to turn a conditioning input into ensemble members.
pub struct EnsembleRequest<'a> {
    pub mode: FlowMode,
    /// Conditioning input on the evaluation grid.
    pub a: &'a GridFunction,
    /// Low-fidelity solution at any resolution of the evaluation domain (FLORAL).
    pub w_lf: Option<&'a GridFunction>,
    pub n_members: usize,
    pub prior: &'a GpSampler,
    pub seed: u64,
    pub opts: &'a OdeOptions,
    pub normalization: Option<&'a Normalization>,
    /// Members integrated together; bounds memory on large grids.
    pub max_batch: usize,
}

/// Seed of ensemble member `m`.
pub fn member_seed(seed: u64, m: usize) -> u64 {
    derive_seed(seed, &[stream::ENSEMBLE, m as u64])
}

/// Draws `w0 ~ prior`, integrates the flow, and in FLORAL mode adds the LF field.
pub fn generate_ensemble(field: &dyn VectorField, channels: usize, req: &EnsembleRequest) -> Result<Vec<GridFunction>> {
    let prior = req.prior;
    let (domain, shape) = (prior.domain(), prior.shape());
    if req.a.domain != *domain || req.a.shape[..] != shape[..] {
        return Err(FloralError::Shape("conditioning input must be on the evaluation grid".into()));
    }
    let lf = match req.mode {
        FlowMode::Flora => None,
        FlowMode::Floral => {
            let lf = req.w_lf.ok_or_else(|| FloralError::Data("FLORAL sampling needs the low-fidelity field".into()))?;
            Some(if lf.shape[..] == shape[..] { lf.clone() } else { resample(lf, shape)? })
        }
    };
    let a = match req.normalization {
        Some(n) => n.input(req.a),
        None => req.a.clone(),
    };
    let s = a.n_points();
    let mut members = Vec::with_capacity(req.n_members);
    let chunk = req.max_batch.max(1);
    for start in (0..req.n_members).step_by(chunk) {
        let idx: Vec<usize> = (start..(start + chunk).min(req.n_members)).collect();
        let mut w0 = Vec::with_capacity(idx.len() * channels * s);
        let mut at = Vec::with_capacity(idx.len() * a.len());
        for &m in &idx {
            w0.extend(draw_prior(prior, channels, &mut rng_from(member_seed(req.seed, m))).values);
            at.extend_from_slice(&a.values);
        }
        let w0 = Tensor { shape: vec![idx.len(), channels, s], data: w0 };
        let at = Tensor { shape: vec![idx.len(), a.channels, s], data: at };
        let (y, _) = integrate_batch(field, &at, &w0, shape, req.opts).map_err(|e| match e {
            FloralError::Member { member, source } => FloralError::Member { member: idx[member], source },
            other => other,
        })?;
        for (j, _) in idx.iter().enumerate() {
            let vals = y.data[j * channels * s..(j + 1) * channels * s].to_vec();
            let mut g = GridFunction::new(domain.clone(), shape.to_vec(), channels, vals)?;
            if let Some(n) = req.normalization {
                g = n.untarget(&g);
            }
            if let Some(lf) = &lf {
                g = g.add(lf)?;
            }
            members.push(g);
        }
    }
    Ok(members)
}
