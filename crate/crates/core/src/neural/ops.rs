//! Differentiable operations on `[batch, channels, points]` tensors.

use super::autograd::{Tensor, Var};
use crate::error::{FloralError, Result};
use crate::linalg::gemm;

fn same_shape(a: &Var, b: &Var, op: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(FloralError::Shape(format!("{op}: {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

fn dims3(x: &Var, op: &str) -> Result<(usize, usize, usize)> {
    match x.shape() {
        &[b, c, s] => Ok((b, c, s)),
        other => Err(FloralError::Shape(format!("{op}: expected [batch, channels, points], got {other:?}"))),
    }
}

pub fn add(a: &Var, b: &Var) -> Result<Var> {
    same_shape(a, b, "add")?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    let value = Tensor { shape: a.shape().to_vec(), data };
    Ok(Var::from_op(value, vec![a.clone(), b.clone()], |c| {
        vec![c.needs[0].then(|| c.grad.to_vec()), c.needs[1].then(|| c.grad.to_vec())]
    }))
}

pub fn sub(a: &Var, b: &Var) -> Result<Var> {
    same_shape(a, b, "sub")?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect();
    let value = Tensor { shape: a.shape().to_vec(), data };
    Ok(Var::from_op(value, vec![a.clone(), b.clone()], |c| {
        vec![c.needs[0].then(|| c.grad.to_vec()), c.needs[1].then(|| c.grad.iter().map(|g| -g).collect())]
    }))
}

pub fn mul(a: &Var, b: &Var) -> Result<Var> {
    same_shape(a, b, "mul")?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    let value = Tensor { shape: a.shape().to_vec(), data };
    Ok(Var::from_op(value, vec![a.clone(), b.clone()], |c| {
        let (x, y) = (c.parents[0].data(), c.parents[1].data());
        vec![
            c.needs[0].then(|| c.grad.iter().zip(y).map(|(g, y)| g * y).collect()),
            c.needs[1].then(|| c.grad.iter().zip(x).map(|(g, x)| g * x).collect()),
        ]
    }))
}

pub fn scale(a: &Var, s: f64) -> Var {
    let value = Tensor { shape: a.shape().to_vec(), data: a.data().iter().map(|x| x * s).collect() };
    Var::from_op(value, vec![a.clone()], move |c| vec![Some(c.grad.iter().map(|g| g * s).collect())])
}

pub fn sum(a: &Var) -> Var {
    let n = a.data().len();
    let value = Tensor::scalar(a.data().iter().sum());
    Var::from_op(value, vec![a.clone()], move |c| vec![Some(vec![c.grad[0]; n])])
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `x * sigmoid(x)`.
pub fn silu(a: &Var) -> Var {
    let data = a.data().iter().map(|&x| x * sigmoid(x)).collect();
    let value = Tensor { shape: a.shape().to_vec(), data };
    Var::from_op(value, vec![a.clone()], |c| {
        let x = c.parents[0].data();
        vec![Some(
            c.grad
                .iter()
                .zip(x)
                .map(|(g, &x)| {
                    let s = sigmoid(x);
                    g * s * (1.0 + x * (1.0 - s))
                })
                .collect(),
        )]
    })
}

/// Pointwise channel mixing `y[b, :, p] = W x[b, :, p] + bias`, `W: [out, in]`.
pub fn linear(x: &Var, w: &Var, bias: Option<&Var>) -> Result<Var> {
    let (bsz, cin, s) = dims3(x, "linear")?;
    let (cout, win) = match w.shape() {
        &[o, i] => (o, i),
        other => return Err(FloralError::Shape(format!("linear weight must be 2D, got {other:?}"))),
    };
    if win != cin {
        return Err(FloralError::Shape(format!("linear: weight expects {win} channels, input has {cin}")));
    }
    if let Some(b) = bias {
        if b.shape() != [cout] {
            return Err(FloralError::Shape(format!("linear bias must be [{cout}], got {:?}", b.shape())));
        }
    }
    let mut out = vec![0.0; bsz * cout * s];
    for bi in 0..bsz {
        let xb = &x.data()[bi * cin * s..(bi + 1) * cin * s];
        let yb = &mut out[bi * cout * s..(bi + 1) * cout * s];
        if let Some(b) = bias {
            for (o, row) in yb.chunks_exact_mut(s).enumerate() {
                row.fill(b.data()[o]);
            }
        }
        gemm(cout, cin, s, 1.0, w.data(), cin, 1, xb, s, 1, 1.0, yb, s, 1);
    }
    let value = Tensor { shape: vec![bsz, cout, s], data: out };
    let mut parents = vec![x.clone(), w.clone()];
    if let Some(b) = bias {
        parents.push(b.clone());
    }
    Ok(Var::from_op(value, parents, move |c| {
        let (xd, wd) = (c.parents[0].data(), c.parents[1].data());
        let gx = c.needs[0].then(|| {
            let mut gx = vec![0.0; bsz * cin * s];
            for bi in 0..bsz {
                let gy = &c.grad[bi * cout * s..(bi + 1) * cout * s];
                let gxb = &mut gx[bi * cin * s..(bi + 1) * cin * s];
                gemm(cin, cout, s, 1.0, wd, 1, cin, gy, s, 1, 0.0, gxb, s, 1);
            }
            gx
        });
        let gw = c.needs[1].then(|| {
            let mut gw = vec![0.0; cout * cin];
            for bi in 0..bsz {
                let gy = &c.grad[bi * cout * s..(bi + 1) * cout * s];
                let xb = &xd[bi * cin * s..(bi + 1) * cin * s];
                gemm(cout, s, cin, 1.0, gy, s, 1, xb, 1, s, 1.0, &mut gw, cin, 1);
            }
            gw
        });
        let mut res = vec![gx, gw];
        if c.parents.len() == 3 {
            res.push(c.needs[2].then(|| {
                let mut gb = vec![0.0; cout];
                for bi in 0..bsz {
                    for (o, g) in gb.iter_mut().enumerate() {
                        *g += c.grad[(bi * cout + o) * s..(bi * cout + o + 1) * s].iter().sum::<f64>();
                    }
                }
                gb
            }));
        }
        res
    }))
}

/// `y[b, c, p] = scale[b, c] * h[b, c, p] + shift[b, c]`; `scale, shift: [batch, channels, 1]`.
pub fn film(h: &Var, scale: &Var, shift: &Var) -> Result<Var> {
    let (bsz, ch, s) = dims3(h, "film")?;
    if scale.shape() != [bsz, ch, 1] || shift.shape() != [bsz, ch, 1] {
        return Err(FloralError::Shape(format!(
            "film: modulation must be [{bsz}, {ch}, 1], got {:?} and {:?}",
            scale.shape(),
            shift.shape()
        )));
    }
    let (hd, sd, bd) = (h.data(), scale.data(), shift.data());
    let mut out = vec![0.0; hd.len()];
    for r in 0..bsz * ch {
        for p in 0..s {
            out[r * s + p] = sd[r] * hd[r * s + p] + bd[r];
        }
    }
    let value = Tensor { shape: h.shape().to_vec(), data: out };
    Ok(Var::from_op(value, vec![h.clone(), scale.clone(), shift.clone()], move |c| {
        let (hd, sd) = (c.parents[0].data(), c.parents[1].data());
        let g = c.grad;
        vec![
            c.needs[0].then(|| (0..bsz * ch * s).map(|i| g[i] * sd[i / s]).collect()),
            c.needs[1].then(|| {
                (0..bsz * ch).map(|r| (0..s).map(|p| g[r * s + p] * hd[r * s + p]).sum()).collect()
            }),
            c.needs[2].then(|| (0..bsz * ch).map(|r| g[r * s..(r + 1) * s].iter().sum()).collect()),
        ]
    }))
}

/// Average over points: `[batch, channels, points] -> [batch, channels, 1]`.
pub fn mean_points(x: &Var) -> Result<Var> {
    let (bsz, ch, s) = dims3(x, "mean_points")?;
    let data = x.data().chunks_exact(s).map(|r| r.iter().sum::<f64>() / s as f64).collect();
    let value = Tensor { shape: vec![bsz, ch, 1], data };
    Ok(Var::from_op(value, vec![x.clone()], move |c| {
        vec![Some((0..bsz * ch * s).map(|i| c.grad[i / s] / s as f64).collect())]
    }))
}

/// Concatenates along the channel axis.
pub fn concat_channels(xs: &[&Var]) -> Result<Var> {
    let (bsz, _, s) = dims3(xs[0], "concat")?;
    let mut chans = Vec::with_capacity(xs.len());
    for x in xs {
        let (b2, c2, s2) = dims3(x, "concat")?;
        if b2 != bsz || s2 != s {
            return Err(FloralError::Shape("concat: batch and point counts must agree".into()));
        }
        chans.push(c2);
    }
    let total: usize = chans.iter().sum();
    let mut out = Vec::with_capacity(bsz * total * s);
    for bi in 0..bsz {
        for (x, &c) in xs.iter().zip(&chans) {
            out.extend_from_slice(&x.data()[bi * c * s..(bi + 1) * c * s]);
        }
    }
    let value = Tensor { shape: vec![bsz, total, s], data: out };
    let parents = xs.iter().map(|&x| x.clone()).collect();
    Ok(Var::from_op(value, parents, move |c| {
        let mut offset = 0;
        chans
            .iter()
            .enumerate()
            .map(|(k, &ck)| {
                let start = offset;
                offset += ck;
                c.needs[k].then(|| {
                    let mut g = Vec::with_capacity(bsz * ck * s);
                    for bi in 0..bsz {
                        let base = (bi * total + start) * s;
                        g.extend_from_slice(&c.grad[base..base + ck * s]);
                    }
                    g
                })
            })
            .collect()
    }))
}

/// Channels `start..start + len`.
pub fn slice_channels(x: &Var, start: usize, len: usize) -> Result<Var> {
    let (bsz, ch, s) = dims3(x, "slice")?;
    if start + len > ch {
        return Err(FloralError::Shape(format!("slice {start}..{} of {ch} channels", start + len)));
    }
    let mut out = Vec::with_capacity(bsz * len * s);
    for bi in 0..bsz {
        let base = (bi * ch + start) * s;
        out.extend_from_slice(&x.data()[base..base + len * s]);
    }
    let value = Tensor { shape: vec![bsz, len, s], data: out };
    Ok(Var::from_op(value, vec![x.clone()], move |c| {
        let mut g = vec![0.0; bsz * ch * s];
        for bi in 0..bsz {
            let base = (bi * ch + start) * s;
            g[base..base + len * s].copy_from_slice(&c.grad[bi * len * s..(bi + 1) * len * s]);
        }
        vec![Some(g)]
    }))
}

/// `(1/B) sum_b weight_b * mean((target_b - pred_b)^2)`.
pub fn weighted_mean_square_error(pred: &Var, target: &Tensor, weights: &[f64]) -> Result<Var> {
    if pred.shape() != target.shape.as_slice() {
        return Err(FloralError::Shape(format!("loss: {:?} vs {:?}", pred.shape(), target.shape)));
    }
    let bsz = pred.shape()[0];
    if weights.len() != bsz || bsz == 0 {
        return Err(FloralError::Shape(format!("loss: {} weights for batch {bsz}", weights.len())));
    }
    let per = pred.data().len() / bsz;
    let resid: Vec<f64> = target.data.iter().zip(pred.data()).map(|(t, p)| t - p).collect();
    let loss: f64 = (0..bsz)
        .map(|b| weights[b] * resid[b * per..(b + 1) * per].iter().map(|r| r * r).sum::<f64>() / per as f64)
        .sum::<f64>()
        / bsz as f64;
    let weights = weights.to_vec();
    Ok(Var::from_op(Tensor::scalar(loss), vec![pred.clone()], move |c| {
        let g0 = c.grad[0];
        vec![Some(
            resid
                .iter()
                .enumerate()
                .map(|(i, r)| -2.0 * g0 * weights[i / per] * r / (per * bsz) as f64)
                .collect(),
        )]
    }))
}
