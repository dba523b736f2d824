//! Dormand–Prince 5(4) integration of `dw/dtau = H(tau, w, a)` over `tau in [0, 1]`.
//!
//! Each batch member keeps its own time, step size and controller state;
//! stage evaluations of all unfinished members are batched into one call.

use super::VectorField;
use crate::error::{FloralError, Result};
use crate::neural::{no_grad, Tensor};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Clone, Debug, PartialEq)]
pub struct OdeOptions {
    pub atol: f64,
    pub rtol: f64,
    pub initial_step: f64,
    pub safety: f64,
    pub min_factor: f64,
    pub max_factor: f64,
    /// Exponent on the previous error in the PI controller.
    pub beta: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            atol: 1e-5,
            rtol: 1e-5,
            initial_step: 1e-3,
            safety: 0.9,
            min_factor: 0.2,
            max_factor: 5.0,
            beta: 0.04,
            min_step: 1e-12,
            max_steps: 100_000,
        }
    }
}

impl OdeOptions {
    pub fn with_tolerance(tol: f64) -> Self {
        Self { atol: tol, rtol: tol, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

struct Member {
    t: f64,
    h: f64,
    err_prev: f64,
    done: bool,
    stats: OdeStats,
}

/// Rows `idx` of a `[B, C, S]` tensor.
fn gather(t: &Tensor, idx: &[usize]) -> Tensor {
    let row = t.numel() / t.shape[0];
    let mut data = Vec::with_capacity(idx.len() * row);
    for &i in idx {
        data.extend_from_slice(&t.data[i * row..(i + 1) * row]);
    }
    let mut shape = t.shape.clone();
    shape[0] = idx.len();
    Tensor { shape, data }
}

fn eval(field: &dyn VectorField, tau: &[f64], w: &Tensor, a: &Tensor, shape: &[usize]) -> Result<Vec<f64>> {
    let out = no_grad(|| field.eval_batch(tau, w, a, shape))?;
    if out.shape() != w.shape.as_slice() {
        return Err(FloralError::Shape(format!("vector field returned {:?} for {:?}", out.shape(), w.shape)));
    }
    Ok(out.data().to_vec())
}

/// Integrates every member of `w0: [B, C, S]` from 0 to 1 with conditioning `a: [B, Ca, S]`.
///
/// Failures are reported as [`FloralError::Member`] with the batch index.
pub fn integrate_batch(
    field: &dyn VectorField,
    a: &Tensor,
    w0: &Tensor,
    shape: &[usize],
    opts: &OdeOptions,
) -> Result<(Tensor, Vec<OdeStats>)> {
    if !(opts.atol > 0.0 && opts.rtol > 0.0) {
        return Err(FloralError::Config("atol and rtol must be positive".into()));
    }
    let b = w0.shape[0];
    if a.shape.first() != Some(&b) {
        return Err(FloralError::Shape("conditioning and initial state batch sizes differ".into()));
    }
    let row = w0.numel() / b.max(1);
    let mut y = w0.data.clone();
    let mut members: Vec<Member> = (0..b)
        .map(|_| Member { t: 0.0, h: opts.initial_step.min(1.0), err_prev: 1.0, done: false, stats: OdeStats::default() })
        .collect();
    let all: Vec<usize> = (0..b).collect();
    // k[0] holds the derivative at the current state (first-same-as-last)
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; y.len()]; 7];
    k[0] = eval(field, &vec![0.0; b], w0, a, shape)?;
    for m in members.iter_mut() {
        m.stats.evaluations += 1;
    }

    loop {
        let active: Vec<usize> = all.iter().copied().filter(|&i| !members[i].done).collect();
        if active.is_empty() {
            break;
        }
        let a_act = gather(a, &active);
        let h: Vec<f64> = active.iter().map(|&i| members[i].h).collect();
        let mut ystage = vec![0.0; active.len() * row];
        for s in 1..7 {
            for (j, &i) in active.iter().enumerate() {
                let r = i * row..(i + 1) * row;
                let dst = &mut ystage[j * row..(j + 1) * row];
                dst.copy_from_slice(&y[r.clone()]);
                for (q, &aq) in A[s][..s].iter().enumerate() {
                    if aq != 0.0 {
                        for (d, kv) in dst.iter_mut().zip(&k[q][r.clone()]) {
                            *d += h[j] * aq * kv;
                        }
                    }
                }
            }
            let tau: Vec<f64> = active.iter().zip(&h).map(|(&i, hj)| members[i].t + C[s] * hj).collect();
            let w_stage = Tensor { shape: vec![active.len(), w0.shape[1], w0.shape[2]], data: ystage.clone() };
            let ks = eval(field, &tau, &w_stage, &a_act, shape)?;
            for (j, &i) in active.iter().enumerate() {
                k[s][i * row..(i + 1) * row].copy_from_slice(&ks[j * row..(j + 1) * row]);
                members[i].stats.evaluations += 1;
            }
        }
        // after the last stage, ystage holds the fifth-order solution
        for (j, &i) in active.iter().enumerate() {
            let r = i * row..(i + 1) * row;
            let y5 = &ystage[j * row..(j + 1) * row];
            let mut acc = 0.0;
            for (p, (&y0, &y1)) in y[r.clone()].iter().zip(y5).enumerate() {
                let e: f64 = (0..7).map(|s| E[s] * k[s][i * row + p]).sum::<f64>() * h[j];
                let sc = opts.atol + opts.rtol * y0.abs().max(y1.abs());
                acc += (e / sc).powi(2);
            }
            let err = (acc / row as f64).sqrt();
            let m = &mut members[i];
            if !err.is_finite() {
                return Err(FloralError::Member {
                    member: i,
                    source: Box::new(FloralError::Integrator(format!("non-finite error estimate at tau = {}", m.t))),
                });
            }
            if err <= 1.0 {
                m.t += h[j];
                y[r.clone()].copy_from_slice(y5);
                let k6 = k[6][r.clone()].to_vec();
                k[0][r].copy_from_slice(&k6);
                m.stats.accepted += 1;
                let alpha = 0.2 - 0.75 * opts.beta;
                let fac = if err == 0.0 {
                    opts.max_factor
                } else {
                    opts.safety * err.powf(-alpha) * m.err_prev.powf(opts.beta)
                };
                m.h *= fac.clamp(opts.min_factor, opts.max_factor);
                m.err_prev = err.max(1e-4);
                if m.t >= 1.0 - 1e-14 {
                    m.done = true;
                    continue;
                }
            } else {
                m.stats.rejected += 1;
                m.h *= (opts.safety * err.powf(-0.2)).clamp(opts.min_factor, 1.0);
            }
            m.h = m.h.min(1.0 - m.t);
            let fail = if m.h < opts.min_step {
                Some(format!("step size {:.3e} below minimum at tau = {}", m.h, m.t))
            } else if m.stats.accepted + m.stats.rejected >= opts.max_steps {
                Some(format!("exceeded {} steps at tau = {}", opts.max_steps, m.t))
            } else {
                None
            };
            if let Some(msg) = fail {
                return Err(FloralError::Member { member: i, source: Box::new(FloralError::Integrator(msg)) });
            }
        }
    }
    Ok((Tensor { shape: w0.shape.clone(), data: y }, members.into_iter().map(|m| m.stats).collect()))
}

/// Fixed-step fifth-order integration with `steps` equal steps.
pub fn integrate_fixed(field: &dyn VectorField, a: &Tensor, w0: &Tensor, shape: &[usize], steps: usize) -> Result<Tensor> {
    let b = w0.shape[0];
    let h = 1.0 / steps as f64;
    let mut y = w0.data.clone();
    for n in 0..steps {
        let t = n as f64 * h;
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(6);
        for s in 0..6 {
            let mut ys = y.clone();
            for (q, &aq) in A[s][..s].iter().enumerate() {
                ys.iter_mut().zip(&k[q]).for_each(|(v, kv)| *v += h * aq * kv);
            }
            let ws = Tensor { shape: w0.shape.clone(), data: ys };
            k.push(eval(field, &vec![t + C[s] * h; b], &ws, a, shape)?);
        }
        for (q, &bq) in A[6][..6].iter().enumerate() {
            y.iter_mut().zip(&k[q]).for_each(|(v, kv)| *v += h * bq * kv);
        }
    }
    Ok(Tensor { shape: w0.shape.clone(), data: y })
}
