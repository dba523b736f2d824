//! Real multi-dimensional FFTs.
//!
//! Convention: the forward transform is unnormalized and the inverse divides
//! by the total number of points. The real transform keeps the half spectrum
//! `0..=n/2` on the last axis and full complex spectra on the leading axes.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{check_shape, Domain, GridFunction};
use crate::error::{FloralError, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Shape of the half spectrum of a real array of `shape`.
pub fn half_shape(shape: &[usize]) -> Vec<usize> {
    let mut h = shape.to_vec();
    if let Some(last) = h.last_mut() {
        *last = *last / 2 + 1;
    }
    h
}

/// In-place unnormalized complex FFT along one axis of a row-major array.
fn fft_along(data: &mut [Complex64], shape: &[usize], axis: usize, inverse: bool) {
    let n = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let fft = plan(n, inverse);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    if stride == 1 {
        for row in data.chunks_exact_mut(n) {
            fft.process_with_scratch(row, &mut scratch);
        }
        return;
    }
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for o in 0..outer {
        let base = o * n * stride;
        for s in 0..stride {
            for k in 0..n {
                line[k] = data[base + k * stride + s];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for k in 0..n {
                data[base + k * stride + s] = line[k];
            }
        }
    }
}

/// Unnormalized complex FFT over every axis of a row-major array.
pub fn fftn_complex(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    for axis in 0..shape.len() {
        fft_along(data, shape, axis, inverse);
    }
}

/// Forward real FFT of one channel laid out row-major over `shape`.
pub fn rfftn(x: &[f64], shape: &[usize]) -> Vec<Complex64> {
    let n = *shape.last().expect("non-empty shape");
    let h = n / 2 + 1;
    let rows = x.len() / n;
    let fft = plan(n, false);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut out = Vec::with_capacity(rows * h);
    for row in x.chunks_exact(n) {
        for (b, &v) in buf.iter_mut().zip(row) {
            *b = Complex64::new(v, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        out.extend_from_slice(&buf[..h]);
    }
    let hs = half_shape(shape);
    for axis in 0..shape.len() - 1 {
        fft_along(&mut out, &hs, axis, false);
    }
    out
}

/// Inverse of [`rfftn`]; `shape` is the real output shape.
///
/// Imaginary parts of self-conjugate bins (zero and Nyquist on the last axis)
/// are discarded, so any input maps to a real field.
pub fn irfftn(spec: &[Complex64], shape: &[usize]) -> Vec<f64> {
    let n = *shape.last().expect("non-empty shape");
    let h = n / 2 + 1;
    let hs = half_shape(shape);
    let mut tmp = spec.to_vec();
    for axis in 0..shape.len() - 1 {
        fft_along(&mut tmp, &hs, axis, true);
    }
    let total: usize = shape.iter().product();
    let norm = 1.0 / total as f64;
    let fft = plan(n, true);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut out = Vec::with_capacity(total);
    for row in tmp.chunks_exact(h) {
        buf[..h].copy_from_slice(row);
        for k in 1..n.div_ceil(2) {
            buf[n - k] = row[k].conj();
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        out.extend(buf.iter().map(|c| c.re * norm));
    }
    out
}

/// Frequencies kept by a mode truncation on an axis of `n` points.
///
/// Returns `(weight_index, spectrum_index)` pairs. On the last axis the
/// nonnegative frequencies `0..=kmax` are kept and indexed directly; on
/// leading axes the signed frequencies `-kmax..=kmax` are kept and indexed
/// by `k + modes - 1`. `kmax = min(modes - 1, (n - 1) / 2)` never includes
/// the Nyquist bin, so a weight always refers to the same physical frequency.
pub fn retained_frequencies(n: usize, modes: usize, last: bool) -> Vec<(usize, usize)> {
    if modes == 0 {
        return Vec::new();
    }
    let kmax = (modes - 1).min((n - 1) / 2) as isize;
    if last {
        (0..=kmax as usize).map(|k| (k, k)).collect()
    } else {
        (-kmax..=kmax)
            .map(|k| ((k + modes as isize - 1) as usize, k.rem_euclid(n as isize) as usize))
            .collect()
    }
}

/// Half spectrum of every channel of a field.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub domain: Domain,
    /// Real-space shape of the transformed field.
    pub shape: Vec<usize>,
    pub channels: usize,
    /// Stored modes per axis (the half shape).
    pub modes: Vec<usize>,
    pub coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn channel(&self, c: usize) -> &[Complex64] {
        let n: usize = self.modes.iter().product();
        &self.coeffs[c * n..(c + 1) * n]
    }

    /// Sum of squared magnitudes over the full (two-sided) spectrum.
    pub fn full_energy(&self) -> f64 {
        let n = *self.shape.last().unwrap();
        let h = n / 2 + 1;
        self.coeffs
            .chunks_exact(h)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(k, c)| {
                        let w = if k == 0 || (n.is_multiple_of(2) && k == n / 2) { 1.0 } else { 2.0 };
                        w * c.norm_sqr()
                    })
                    .sum::<f64>()
            })
            .sum()
    }
}

pub fn rfft_nd(f: &GridFunction) -> Spectrum {
    let mut coeffs = Vec::new();
    for c in 0..f.channels {
        coeffs.extend(rfftn(f.channel(c), &f.shape));
    }
    Spectrum {
        domain: f.domain.clone(),
        shape: f.shape.clone(),
        channels: f.channels,
        modes: half_shape(&f.shape),
        coeffs,
    }
}

pub fn irfft_nd(s: &Spectrum, shape: &[usize]) -> Result<GridFunction> {
    check_shape(&s.domain, shape)?;
    if half_shape(shape) != s.modes {
        return Err(FloralError::Shape(format!(
            "spectrum with modes {:?} cannot produce shape {:?}",
            s.modes, shape
        )));
    }
    let per: usize = s.modes.iter().product();
    let mut values = Vec::with_capacity(s.channels * shape.iter().product::<usize>());
    for c in 0..s.channels {
        values.extend(irfftn(&s.coeffs[c * per..(c + 1) * per], shape));
    }
    GridFunction::new(s.domain.clone(), shape.to_vec(), s.channels, values)
}
