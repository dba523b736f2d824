use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

use super::kernel::{KernelSpec, StationaryKernel};
use crate::error::{FloralError, Result};
use crate::grid::{check_shape, fftn_complex, resample, uniform_grid, Domain, GridFunction};
use crate::rng::rng_from;

/// Grids up to this many points are sampled through a dense Cholesky factor.
pub const CHOLESKY_MAX_POINTS: usize = 4096;
pub const CHOLESKY_JITTER: f64 = 1e-10;
/// Embedding size per axis relative to the grid.
pub const EMBEDDING_PADDING: usize = 2;

/// Dense kernel matrix over the points of a grid, row-major point order.
pub fn kernel_matrix(kernel: &impl StationaryKernel, domain: &Domain, shape: &[usize]) -> Result<DMatrix<f64>> {
    let pts = grid_points(domain, shape)?;
    let n = pts.len();
    Ok(DMatrix::from_fn(n, n, |i, j| kernel.cov(dist(&pts[i], &pts[j]))))
}

pub(crate) fn grid_points(domain: &Domain, shape: &[usize]) -> Result<Vec<Vec<f64>>> {
    let coords = uniform_grid(domain, shape)?;
    let n: usize = shape.iter().product();
    Ok((0..n)
        .map(|flat| {
            let mut rem = flat;
            let mut x = vec![0.0; shape.len()];
            for d in (0..shape.len()).rev() {
                x[d] = coords[d][rem % shape[d]];
                rem /= shape[d];
            }
            x
        })
        .collect())
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// First column of the symmetric circulant embedding of a stationary kernel.
pub(crate) fn embedding_column(
    kernel: &impl StationaryKernel,
    spacing: &[f64],
    emb_shape: &[usize],
) -> Vec<f64> {
    let m: usize = emb_shape.iter().product();
    (0..m)
        .map(|flat| {
            let mut rem = flat;
            let mut r2 = 0.0;
            for d in (0..emb_shape.len()).rev() {
                let j = rem % emb_shape[d];
                rem /= emb_shape[d];
                let lag = j.min(emb_shape[d] - j) as f64 * spacing[d];
                r2 += lag * lag;
            }
            kernel.cov(r2.sqrt())
        })
        .collect()
}

#[derive(Clone, Debug)]
enum Factor {
    Cholesky(DMatrix<f64>),
    Circulant { emb_shape: Vec<usize>, sqrt_eig: Vec<f64> },
    Coarse(Box<GpSampler>),
}

/// Zero-mean Gaussian-process sampler with a cached factorization.
#[derive(Clone, Debug)]
pub struct GpSampler {
    domain: Domain,
    shape: Vec<usize>,
    factor: Factor,
}

impl GpSampler {
    pub fn new(spec: &KernelSpec, domain: &Domain, shape: &[usize]) -> Result<Self> {
        spec.validate()?;
        check_shape(domain, shape)?;
        let n: usize = shape.iter().product();
        let factor = if n <= CHOLESKY_MAX_POINTS {
            Factor::Cholesky(cholesky_factor(spec, domain, shape)?)
        } else {
            match circulant_factor(spec, domain, shape) {
                Ok(f) => f,
                Err(e) => {
                    log::warn!("{e}; falling back to Cholesky on a coarser grid");
                    let mut coarse = shape.to_vec();
                    while coarse.iter().product::<usize>() > CHOLESKY_MAX_POINTS {
                        let d = (0..coarse.len()).max_by_key(|&d| coarse[d]).unwrap();
                        coarse[d] = (coarse[d] / 2).max(2);
                    }
                    Factor::Coarse(Box::new(Self::new(spec, domain, &coarse)?))
                }
            }
        };
        Ok(Self { domain: domain.clone(), shape: shape.to_vec(), factor })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn uses_circulant_embedding(&self) -> bool {
        matches!(self.factor, Factor::Circulant { .. })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GridFunction {
        let values = match &self.factor {
            Factor::Cholesky(l) => {
                let z = DVector::from_fn(l.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
                (l * z).as_slice().to_vec()
            }
            Factor::Circulant { emb_shape, sqrt_eig } => {
                let mut buf: Vec<Complex64> = sqrt_eig
                    .iter()
                    .map(|&s| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(s * re, s * im)
                    })
                    .collect();
                fftn_complex(&mut buf, emb_shape, false);
                extract_block(&buf, emb_shape, &self.shape)
            }
            Factor::Coarse(inner) => {
                let coarse = inner.sample(rng);
                return resample(&coarse, &self.shape).expect("coarse resample to a valid grid");
            }
        };
        GridFunction::new(self.domain.clone(), self.shape.clone(), 1, values)
            .expect("finite Gaussian draw")
    }

    pub fn sample_seeded(&self, seed: u64) -> GridFunction {
        self.sample(&mut rng_from(seed))
    }
}

fn cholesky_factor(spec: &KernelSpec, domain: &Domain, shape: &[usize]) -> Result<DMatrix<f64>> {
    let mut k = kernel_matrix(spec, domain, shape)?;
    let jitter = CHOLESKY_JITTER * spec.variance.max(f64::MIN_POSITIVE);
    for i in 0..k.nrows() {
        k[(i, i)] += jitter;
    }
    k.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| FloralError::RandomField("kernel matrix is not positive definite".into()))
}

fn circulant_factor(spec: &KernelSpec, domain: &Domain, shape: &[usize]) -> Result<Factor> {
    let emb_shape: Vec<usize> = shape.iter().map(|&n| EMBEDDING_PADDING * n).collect();
    let spacing: Vec<f64> = domain.axes.iter().zip(shape).map(|(a, &n)| a.spacing(n)).collect();
    let col = embedding_column(spec, &spacing, &emb_shape);
    let m = col.len() as f64;
    let mut eig: Vec<Complex64> = col.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    fftn_complex(&mut eig, &emb_shape, false);
    let max = eig.iter().map(|c| c.re).fold(f64::MIN, f64::max);
    let min = eig.iter().map(|c| c.re).fold(f64::MAX, f64::min);
    if min < -1e-8 * max {
        return Err(FloralError::RandomField(format!(
            "circulant embedding not positive definite (min eigenvalue {min:.3e}, max {max:.3e})"
        )));
    }
    let sqrt_eig = eig.iter().map(|c| (c.re.max(0.0) / m).sqrt()).collect();
    Ok(Factor::Circulant { emb_shape, sqrt_eig })
}

fn extract_block(buf: &[Complex64], emb_shape: &[usize], shape: &[usize]) -> Vec<f64> {
    let n: usize = shape.iter().product();
    (0..n)
        .map(|flat| {
            let mut rem = flat;
            let mut idx = 0;
            let mut stride = 1;
            for d in (0..shape.len()).rev() {
                idx += (rem % shape[d]) * stride;
                rem /= shape[d];
                stride *= emb_shape[d];
            }
            buf[idx].re
        })
        .collect()
}

/// One zero-mean draw; deterministic in `(spec, grid, seed)`.
pub fn sample_gp(spec: &KernelSpec, domain: &Domain, shape: &[usize], seed: u64) -> Result<GridFunction> {
    Ok(GpSampler::new(spec, domain, shape)?.sample_seeded(seed))
}
