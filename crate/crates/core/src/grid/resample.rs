use rustfft::num_complex::Complex64;

use super::{check_shape, rfftn, irfftn, Axis, AxisKind, GridFunction};
use crate::error::Result;

/// Changes the resolution of a field axis by axis.
///
/// Periodic axes use spectral zero-padding or truncation; the other axes use
/// piecewise-linear interpolation in physical coordinates.
pub fn resample(f: &GridFunction, new_shape: &[usize]) -> Result<GridFunction> {
    check_shape(&f.domain, new_shape)?;
    if new_shape == f.shape.as_slice() {
        return Ok(f.clone());
    }
    let mut shape = f.shape.clone();
    let mut values = f.values.clone();
    for (axis, ax) in f.domain.axes.iter().enumerate() {
        let m = new_shape[axis];
        if m == shape[axis] {
            continue;
        }
        values = map_axis(&values, f.channels, &shape, axis, m, |src, dst| match ax.kind {
            AxisKind::Periodic => spectral_line(src, dst),
            _ => linear_line(ax, src, dst),
        });
        shape[axis] = m;
    }
    GridFunction::new(f.domain.clone(), shape, f.channels, values)
}

/// Applies a line transform of length `shape[axis]` -> `m` along `axis`.
fn map_axis(
    values: &[f64],
    channels: usize,
    shape: &[usize],
    axis: usize,
    m: usize,
    mut line_op: impl FnMut(&[f64], &mut [f64]),
) -> Vec<f64> {
    let n = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let outer: usize = channels * shape[..axis].iter().product::<usize>();
    let mut out = vec![0.0; outer * m * stride];
    let mut src = vec![0.0; n];
    let mut dst = vec![0.0; m];
    for o in 0..outer {
        for s in 0..stride {
            for k in 0..n {
                src[k] = values[o * n * stride + k * stride + s];
            }
            line_op(&src, &mut dst);
            for k in 0..m {
                out[o * m * stride + k * stride + s] = dst[k];
            }
        }
    }
    out
}

fn spectral_line(src: &[f64], dst: &mut [f64]) {
    let (n, m) = (src.len(), dst.len());
    let spec = rfftn(src, &[n]);
    let hm = m / 2 + 1;
    let scale = m as f64 / n as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); hm];
    for k in 0..hm.min(spec.len()) {
        let mut c = spec[k] * scale;
        if n % 2 == 0 && k == n / 2 && m > n {
            // source Nyquist bin splits evenly between +k and -k
            c *= 0.5;
        } else if m % 2 == 0 && k == m / 2 && m < n {
            // target Nyquist bin folds +k and -k together
            c = Complex64::new(2.0 * c.re, 0.0);
        }
        out[k] = c;
    }
    dst.copy_from_slice(&irfftn(&out, &[m]));
}

fn linear_line(ax: &Axis, src: &[f64], dst: &mut [f64]) {
    let (n, m) = (src.len(), dst.len());
    for (j, d) in dst.iter_mut().enumerate() {
        let pos = match ax.kind {
            AxisKind::Nodal => j as f64 * (n - 1) as f64 / (m - 1) as f64,
            _ => (j as f64 + 0.5) * n as f64 / m as f64 - 0.5,
        };
        let pos = pos.clamp(0.0, (n - 1) as f64);
        let i = (pos.floor() as usize).min(n - 2);
        let t = pos - i as f64;
        *d = (1.0 - t) * src[i] + t * src[i + 1];
    }
}
