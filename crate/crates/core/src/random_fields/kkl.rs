//! Truncated Karhunen–Loève bases and log-normal permeability fields.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

use super::gp::{embedding_column, kernel_matrix};
use super::kernel::StationaryKernel;
use crate::error::{FloralError, Result};
use crate::grid::{check_shape, fftn_complex, Domain, GridFunction};
use crate::linalg::gemm;
use crate::rng::{rng_for, rng_from, stream};

/// Grids up to this size use a dense symmetric eigendecomposition.
pub const DENSE_MAX_POINTS: usize = 2048;
const NEGATIVE_SLACK: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct KklBasis {
    pub domain: Domain,
    pub shape: Vec<usize>,
    /// Nonincreasing, clamped at zero.
    pub eigenvalues: Vec<f64>,
    /// Unit-norm eigenvectors, one row of grid values per mode.
    pub eigenvectors: Vec<Vec<f64>>,
    pub mean: f64,
    /// Number of eigenvalues below `-1e-10` that were clamped to zero.
    pub clamped: usize,
}

impl KklBasis {
    pub fn q(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenfunction(&self, i: usize) -> GridFunction {
        GridFunction::new(self.domain.clone(), self.shape.clone(), 1, self.eigenvectors[i].clone())
            .expect("eigenvector on basis grid")
    }

    /// `mean + sum_{i < q_used} sqrt(lambda_i) phi_i z_i`.
    pub fn log_field(&self, z: &[f64], q_used: usize) -> Result<GridFunction> {
        if q_used > self.q() || q_used > z.len() {
            return Err(FloralError::RandomField(format!(
                "requested {q_used} terms from a basis of {} with {} coefficients",
                self.q(),
                z.len()
            )));
        }
        let n: usize = self.shape.iter().product();
        let mut g = vec![self.mean; n];
        for i in 0..q_used {
            let c = self.eigenvalues[i].sqrt() * z[i];
            for (gv, &p) in g.iter_mut().zip(&self.eigenvectors[i]) {
                *gv += c * p;
            }
        }
        GridFunction::new(self.domain.clone(), self.shape.clone(), 1, g)
    }

    /// Standard normal coefficients for every basis term, deterministic in `seed`.
    ///
    /// Truncations at different `q_used` share the leading coefficients.
    pub fn draw_coefficients(&self, seed: u64) -> Vec<f64> {
        let mut rng = rng_from(seed);
        (0..self.q()).map(|_| rng.sample(StandardNormal)).collect()
    }
}

/// `K = exp(G)` for a seeded coefficient draw truncated to `q_used` terms.
pub fn sample_log_permeability(basis: &KklBasis, q_used: usize, seed: u64) -> Result<GridFunction> {
    let z = basis.draw_coefficients(seed);
    Ok(basis.log_field(&z, q_used)?.map(f64::exp))
}

/// Top-`q` eigenpairs of the kernel matrix on a grid.
pub fn kkl_decompose(
    kernel: &impl StationaryKernel,
    domain: &Domain,
    shape: &[usize],
    q: usize,
    mean: f64,
) -> Result<KklBasis> {
    check_shape(domain, shape)?;
    let n: usize = shape.iter().product();
    if q == 0 || q > n {
        return Err(FloralError::RandomField(format!("need 1 <= q <= {n}, got {q}")));
    }
    let (vals, vecs) = if n <= DENSE_MAX_POINTS {
        dense_eigenpairs(kernel, domain, shape, q)?
    } else {
        subspace_eigenpairs(kernel, domain, shape, q, 1e-9, 400)?
    };
    finish(domain, shape, vals, vecs, mean)
}

fn finish(domain: &Domain, shape: &[usize], vals: Vec<f64>, mut vecs: Vec<Vec<f64>>, mean: f64) -> Result<KklBasis> {
    let clamped = vals.iter().filter(|&&v| v < -NEGATIVE_SLACK).count();
    if clamped > 0 {
        log::warn!("clamped {clamped} negative kernel eigenvalues to zero");
    }
    for v in vecs.iter_mut() {
        // sign convention: largest-magnitude entry positive
        let imax = (0..v.len()).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap();
        if v[imax] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(KklBasis {
        domain: domain.clone(),
        shape: shape.to_vec(),
        eigenvalues: vals.into_iter().map(|v| v.max(0.0)).collect(),
        eigenvectors: vecs,
        mean,
        clamped,
    })
}

fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

pub(crate) fn dense_eigenpairs(
    kernel: &impl StationaryKernel,
    domain: &Domain,
    shape: &[usize],
    q: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let k = kernel_matrix(kernel, domain, shape)?;
    let (vals, vecs) = sorted_eigen(k);
    Ok((vals[..q].to_vec(), (0..q).map(|c| vecs.column(c).iter().copied().collect()).collect()))
}

/// Kernel matrix-vector products through a zero-padded circulant embedding.
struct ToeplitzOperator {
    shape: Vec<usize>,
    emb_shape: Vec<usize>,
    eig: Vec<f64>,
}

impl ToeplitzOperator {
    fn new(kernel: &impl StationaryKernel, domain: &Domain, shape: &[usize]) -> Self {
        let emb_shape: Vec<usize> = shape.iter().map(|&n| 2 * n).collect();
        let spacing: Vec<f64> = domain.axes.iter().zip(shape).map(|(a, &n)| a.spacing(n)).collect();
        let col = embedding_column(kernel, &spacing, &emb_shape);
        let m = col.len() as f64;
        let mut eig: Vec<Complex64> = col.iter().map(|&c| Complex64::new(c, 0.0)).collect();
        fftn_complex(&mut eig, &emb_shape, false);
        Self { shape: shape.to_vec(), emb_shape, eig: eig.iter().map(|c| c.re / m).collect() }
    }

    fn embed_index(&self, flat: usize) -> usize {
        let mut rem = flat;
        let mut idx = 0;
        let mut stride = 1;
        for d in (0..self.shape.len()).rev() {
            idx += (rem % self.shape[d]) * stride;
            rem /= self.shape[d];
            stride *= self.emb_shape[d];
        }
        idx
    }

    /// Applies the operator to the rows of `x` (each of length `n`), two at a time.
    fn apply_rows(&self, x: &[f64], out: &mut [f64]) {
        let n: usize = self.shape.iter().product();
        let map: Vec<usize> = (0..n).map(|i| self.embed_index(i)).collect();
        let m = self.eig.len();
        let rows = x.len() / n;
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        let mut r = 0;
        while r < rows {
            buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            let pair = r + 1 < rows;
            for i in 0..n {
                let im = if pair { x[(r + 1) * n + i] } else { 0.0 };
                buf[map[i]] = Complex64::new(x[r * n + i], im);
            }
            fftn_complex(&mut buf, &self.emb_shape, false);
            for (b, &e) in buf.iter_mut().zip(&self.eig) {
                *b *= e;
            }
            fftn_complex(&mut buf, &self.emb_shape, true);
            for i in 0..n {
                out[r * n + i] = buf[map[i]].re;
                if pair {
                    out[(r + 1) * n + i] = buf[map[i]].im;
                }
            }
            r += 2;
        }
    }
}

/// Replaces the rows of `v` (`k x n`) by an orthonormal basis of their span.
fn orthonormalize_rows(v: &mut [f64], k: usize, n: usize) -> Result<()> {
    // two passes of Cholesky QR
    for _ in 0..2 {
        let mut g = vec![0.0; k * k];
        gemm(k, n, k, 1.0, v, n, 1, v, 1, n, 0.0, &mut g, k, 1);
        let chol = DMatrix::from_row_slice(k, k, &g)
            .cholesky()
            .ok_or_else(|| FloralError::RandomField("subspace collapsed during orthonormalization".into()))?;
        let linv = chol
            .l()
            .solve_lower_triangular(&DMatrix::identity(k, k))
            .ok_or_else(|| FloralError::RandomField("singular Gram factor".into()))?;
        let linv_rows: Vec<f64> = linv.transpose().as_slice().to_vec();
        let mut q = vec![0.0; k * n];
        gemm(k, k, n, 1.0, &linv_rows, k, 1, v, n, 1, 0.0, &mut q, n, 1);
        v.copy_from_slice(&q);
    }
    Ok(())
}

/// Block subspace iteration with Rayleigh–Ritz extraction.
pub(crate) fn subspace_eigenpairs(
    kernel: &impl StationaryKernel,
    domain: &Domain,
    shape: &[usize],
    q: usize,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n: usize = shape.iter().product();
    let k = (q + (q / 2).max(16)).min(n);
    let op = ToeplitzOperator::new(kernel, domain, shape);
    let mut rng = rng_for(0, &[stream::KKL_START, n as u64, q as u64]);
    let mut v: Vec<f64> = (0..k * n).map(|_| rng.sample(StandardNormal)).collect();
    orthonormalize_rows(&mut v, k, n)?;
    let mut w = vec![0.0; k * n];
    for it in 0..max_iter {
        op.apply_rows(&v, &mut w);
        let mut h = vec![0.0; k * k];
        gemm(k, n, k, 1.0, &v, n, 1, &w, 1, n, 0.0, &mut h, k, 1);
        let hm = DMatrix::from_fn(k, k, |i, j| 0.5 * (h[i * k + j] + h[j * k + i]));
        let (theta, y) = sorted_eigen(hm);
        // Ritz vectors as rows: row i is sum_j Y[j, i] v_j; Y is column-major
        let ys = y.as_slice();
        let mut ritz = vec![0.0; k * n];
        let mut aritz = vec![0.0; k * n];
        gemm(k, k, n, 1.0, ys, k, 1, &v, n, 1, 0.0, &mut ritz, n, 1);
        gemm(k, k, n, 1.0, ys, k, 1, &w, n, 1, 0.0, &mut aritz, n, 1);
        let worst = (0..q)
            .map(|i| {
                let r2: f64 = (0..n)
                    .map(|j| {
                        let d = aritz[i * n + j] - theta[i] * ritz[i * n + j];
                        d * d
                    })
                    .sum();
                r2.sqrt()
            })
            .fold(0.0, f64::max);
        if worst <= tol * theta[0].abs() {
            log::debug!("subspace iteration converged after {} sweeps", it + 1);
            let vecs = (0..q).map(|i| ritz[i * n..(i + 1) * n].to_vec()).collect();
            return Ok((theta[..q].to_vec(), vecs));
        }
        v = aritz;
        orthonormalize_rows(&mut v, k, n)?;
    }
    Err(FloralError::RandomField(format!(
        "eigen-solver did not converge in {max_iter} sweeps"
    )))
}
