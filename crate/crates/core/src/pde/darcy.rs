//! Steady Darcy flow `-div(K grad p) = f` on the unit square with no-flux walls.
//!
//! Cell-centred finite volumes with harmonic-mean face permeabilities. The
//! pressure is pinned by a zero-mean constraint with one Lagrange multiplier.

use crate::error::{FloralError, Result};
use crate::grid::{uniform_grid, Axis, Domain, GridFunction};

pub const DARCY_TOL: f64 = 1e-10;

pub fn darcy_domain() -> Domain {
    Domain::new(vec![Axis::cell_centered(0.0, 1.0); 2]).expect("unit square")
}

/// Injection well of rate `r` in the corner `[0, s]^2`, production well in `[1 - s, 1]^2`.
pub fn darcy_source(r: f64, s: f64, domain: &Domain, shape: &[usize]) -> Result<GridFunction> {
    let _ = uniform_grid(domain, shape)?;
    GridFunction::from_fn(domain.clone(), shape.to_vec(), |x| {
        if x.iter().all(|&xi| (xi - s / 2.0).abs() <= s / 2.0) {
            r
        } else if x.iter().all(|&xi| (xi - (1.0 - s / 2.0)).abs() <= s / 2.0) {
            -r
        } else {
            0.0
        }
    })
}

#[derive(Clone, Debug)]
pub struct DarcySolution {
    pub pressure: GridFunction,
    /// Two channels, `-K dp/dx_1` and `-K dp/dx_2`.
    pub velocity: GridFunction,
    pub multiplier: f64,
    /// `||A p + lambda 1 - b|| / ||b||` (absolute when `b = 0`).
    pub relative_residual: f64,
    pub iterations: usize,
}

struct Operator {
    n0: usize,
    n1: usize,
    /// Transmissibility of the face between (i, j) and (i + 1, j).
    t0: Vec<f64>,
    /// Transmissibility of the face between (i, j) and (i, j + 1).
    t1: Vec<f64>,
    diag: Vec<f64>,
}

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

impl Operator {
    fn new(k: &GridFunction) -> Self {
        let (n0, n1) = (k.shape[0], k.shape[1]);
        let h0 = k.domain.axes[0].spacing(n0);
        let h1 = k.domain.axes[1].spacing(n1);
        let kv = &k.values;
        let mut t0 = vec![0.0; n0 * n1];
        let mut t1 = vec![0.0; n0 * n1];
        let mut diag = vec![0.0; n0 * n1];
        for i in 0..n0 {
            for j in 0..n1 {
                let c = i * n1 + j;
                if i + 1 < n0 {
                    let t = harmonic(kv[c], kv[c + n1]) * h1 / h0;
                    t0[c] = t;
                    diag[c] += t;
                    diag[c + n1] += t;
                }
                if j + 1 < n1 {
                    let t = harmonic(kv[c], kv[c + 1]) * h0 / h1;
                    t1[c] = t;
                    diag[c] += t;
                    diag[c + 1] += t;
                }
            }
        }
        Self { n0, n1, t0, t1, diag }
    }

    fn apply(&self, p: &[f64], out: &mut [f64]) {
        let n1 = self.n1;
        for (o, (&d, &pv)) in out.iter_mut().zip(self.diag.iter().zip(p)) {
            *o = d * pv;
        }
        for i in 0..self.n0 {
            for j in 0..n1 {
                let c = i * n1 + j;
                if i + 1 < self.n0 {
                    out[c] -= self.t0[c] * p[c + n1];
                    out[c + n1] -= self.t0[c] * p[c];
                }
                if j + 1 < n1 {
                    out[c] -= self.t1[c] * p[c + 1];
                    out[c + 1] -= self.t1[c] * p[c];
                }
            }
        }
    }

    /// `sum_faces T (p_a - p_b)^2`.
    fn energy(&self, p: &[f64]) -> f64 {
        let n1 = self.n1;
        let mut e = 0.0;
        for i in 0..self.n0 {
            for j in 0..n1 {
                let c = i * n1 + j;
                if i + 1 < self.n0 {
                    e += self.t0[c] * (p[c] - p[c + n1]).powi(2);
                }
                if j + 1 < n1 {
                    e += self.t1[c] * (p[c] - p[c + 1]).powi(2);
                }
            }
        }
        e
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_inputs(k: &GridFunction, f: &GridFunction) -> Result<()> {
    if k.domain.ndim() != 2 || k.shape != f.shape || k.domain != f.domain {
        return Err(FloralError::Shape("permeability and source must share a 2D grid".into()));
    }
    if k.values.iter().any(|&v| !(v > 0.0)) {
        return Err(FloralError::Solver("permeability must be positive everywhere".into()));
    }
    Ok(())
}

pub fn solve_darcy(k: &GridFunction, f: &GridFunction) -> Result<DarcySolution> {
    check_inputs(k, f)?;
    let op = Operator::new(k);
    let (n0, n1) = (k.shape[0], k.shape[1]);
    let n = n0 * n1;
    let area = k.domain.axes[0].spacing(n0) * k.domain.axes[1].spacing(n1);
    let b: Vec<f64> = f.values.iter().map(|v| v * area).collect();
    // KKT: A p + lambda 1 = b, 1^T p = 0. Since 1^T A = 0, lambda = mean(b).
    let lambda = b.iter().sum::<f64>() / n as f64;
    let rhs: Vec<f64> = b.iter().map(|v| v - lambda).collect();
    let rhs_norm = dot(&rhs, &rhs).sqrt();

    let mut p = vec![0.0; n];
    let mut iterations = 0;
    if rhs_norm > 0.0 {
        let mut r = rhs.clone();
        let mut z: Vec<f64> = r.iter().zip(&op.diag).map(|(r, d)| r / d).collect();
        let mut dir = z.clone();
        let mut ad = vec![0.0; n];
        let mut rz = dot(&r, &z);
        let max_iter = 20 * n;
        loop {
            if dot(&r, &r).sqrt() <= DARCY_TOL * rhs_norm {
                break;
            }
            if iterations == max_iter {
                return Err(FloralError::Solver(format!("Darcy CG did not converge in {max_iter} iterations")));
            }
            op.apply(&dir, &mut ad);
            let alpha = rz / dot(&dir, &ad);
            for i in 0..n {
                p[i] += alpha * dir[i];
                r[i] -= alpha * ad[i];
            }
            for i in 0..n {
                z[i] = r[i] / op.diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                dir[i] = z[i] + beta * dir[i];
            }
            iterations += 1;
        }
        let mean = p.iter().sum::<f64>() / n as f64;
        p.iter_mut().for_each(|v| *v -= mean);
    }

    let mut ap = vec![0.0; n];
    op.apply(&p, &mut ap);
    let res: f64 = (0..n).map(|i| (ap[i] + lambda - b[i]).powi(2)).sum::<f64>().sqrt();
    let b_norm = dot(&b, &b).sqrt();
    let relative_residual = if b_norm > 0.0 { res / b_norm } else { res };

    let velocity = darcy_velocity(k, &p)?;
    let pressure = GridFunction::new(k.domain.clone(), k.shape.clone(), 1, p)?;
    Ok(DarcySolution { pressure, velocity, multiplier: lambda, relative_residual, iterations })
}

/// `-K grad p` by central differences; walls mirror the neighbouring cell.
fn darcy_velocity(k: &GridFunction, p: &[f64]) -> Result<GridFunction> {
    let (n0, n1) = (k.shape[0], k.shape[1]);
    let h0 = k.domain.axes[0].spacing(n0);
    let h1 = k.domain.axes[1].spacing(n1);
    let n = n0 * n1;
    let mut u = vec![0.0; 2 * n];
    for i in 0..n0 {
        for j in 0..n1 {
            let c = i * n1 + j;
            let pm = if i > 0 { p[c - n1] } else { p[c] };
            let pp = if i + 1 < n0 { p[c + n1] } else { p[c] };
            u[c] = -k.values[c] * (pp - pm) / (2.0 * h0);
            let pm = if j > 0 { p[c - 1] } else { p[c] };
            let pp = if j + 1 < n1 { p[c + 1] } else { p[c] };
            u[n + c] = -k.values[c] * (pp - pm) / (2.0 * h1);
        }
    }
    GridFunction::new(k.domain.clone(), k.shape.clone(), 2, u)
}

/// Both sides of the discrete energy identity `sum K |grad p|^2 dA = sum f p dA`.
pub fn darcy_energy(k: &GridFunction, f: &GridFunction, p: &GridFunction) -> Result<(f64, f64)> {
    check_inputs(k, f)?;
    let op = Operator::new(k);
    let area = k.domain.axes[0].spacing(k.shape[0]) * k.domain.axes[1].spacing(k.shape[1]);
    Ok((op.energy(&p.values), area * dot(&f.values, &p.values)))
}
