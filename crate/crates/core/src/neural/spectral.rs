//! Fourier-layer convolution acting on a truncated set of low frequencies.

use rustfft::num_complex::Complex64;

use super::autograd::{Tensor, Var};
use crate::error::{FloralError, Result};
use crate::grid::{half_shape, irfftn, retained_frequencies, rfftn};
use crate::linalg::gemm;

/// Number of complex weight matrices for `modes` per axis.
///
/// Leading axes keep signed frequencies (`2m - 1` slots), the last axis keeps
/// nonnegative ones (`m` slots).
pub fn spectral_weight_modes(modes: &[usize]) -> usize {
    let (last, lead) = modes.split_last().expect("at least one axis");
    lead.iter().map(|&m| 2 * m - 1).product::<usize>() * last
}

/// Retained half-spectrum entries of a grid for a mode truncation.
#[derive(Clone, Debug)]
pub struct SpectralLayout {
    pub shape: Vec<usize>,
    pub modes: Vec<usize>,
    /// `(weight slot, flat half-spectrum index, real-FFT multiplicity)`.
    pub retained: Vec<(usize, usize, f64)>,
}

impl SpectralLayout {
    pub fn new(shape: &[usize], modes: &[usize]) -> Result<Self> {
        if shape.len() != modes.len() || shape.is_empty() {
            return Err(FloralError::Shape(format!("{} mode counts for a {}D grid", modes.len(), shape.len())));
        }
        if modes.contains(&0) {
            return Err(FloralError::Config("mode counts must be positive".into()));
        }
        let d = shape.len();
        let hs = half_shape(shape);
        let mut slot_dims: Vec<usize> = modes[..d - 1].iter().map(|&m| 2 * m - 1).collect();
        slot_dims.push(modes[d - 1]);
        let per_axis: Vec<Vec<(usize, usize)>> =
            (0..d).map(|a| retained_frequencies(shape[a], modes[a], a + 1 == d)).collect();
        let mut retained = vec![(0usize, 0usize, 1.0f64)];
        for a in 0..d {
            let mut next = Vec::with_capacity(retained.len() * per_axis[a].len());
            for &(slot, idx, _) in &retained {
                for &(w, s) in &per_axis[a] {
                    let mult = if a + 1 == d && s != 0 { 2.0 } else { 1.0 };
                    next.push((slot * slot_dims[a] + w, idx * hs[a] + s, mult));
                }
            }
            retained = next;
        }
        Ok(Self { shape: shape.to_vec(), modes: modes.to_vec(), retained })
    }

    fn half_len(&self) -> usize {
        half_shape(&self.shape).iter().product()
    }
}

/// `y = irfft(R . rfft(x))` with `R` nonzero only on the retained modes.
///
/// `x: [batch, in, points]` over the row-major grid `shape`; the weights
/// `w_re, w_im: [slots, in, out]` hold one complex matrix per frequency slot.
pub fn spectral_conv(x: &Var, w_re: &Var, w_im: &Var, shape: &[usize], modes: &[usize]) -> Result<Var> {
    let layout = SpectralLayout::new(shape, modes)?;
    let n: usize = shape.iter().product();
    let (bsz, cin) = match x.shape() {
        &[b, c, s] if s == n => (b, c),
        other => return Err(FloralError::Shape(format!("spectral_conv input {other:?} on grid {shape:?}"))),
    };
    let slots = spectral_weight_modes(modes);
    let cout = match w_re.shape() {
        &[m, i, o] if m == slots && i == cin && w_im.shape() == w_re.shape() => o,
        other => {
            return Err(FloralError::Shape(format!(
                "spectral weights {other:?} do not match [{slots}, {cin}, out]"
            )))
        }
    };
    let r_count = layout.retained.len();
    let half_len = layout.half_len();

    // gathered input coefficients, [retained][batch][in]
    let mut xr = vec![0.0; r_count * bsz * cin];
    let mut xi = vec![0.0; r_count * bsz * cin];
    for b in 0..bsz {
        for i in 0..cin {
            let spec = rfftn(&x.data()[(b * cin + i) * n..(b * cin + i + 1) * n], shape);
            for (r, &(_, idx, _)) in layout.retained.iter().enumerate() {
                xr[(r * bsz + b) * cin + i] = spec[idx].re;
                xi[(r * bsz + b) * cin + i] = spec[idx].im;
            }
        }
    }
    let mut yr = vec![0.0; r_count * bsz * cout];
    let mut yi = vec![0.0; r_count * bsz * cout];
    let (wr, wi) = (w_re.data(), w_im.data());
    for (r, &(slot, _, _)) in layout.retained.iter().enumerate() {
        let a = r * bsz * cin..(r + 1) * bsz * cin;
        let c = r * bsz * cout..(r + 1) * bsz * cout;
        let w = slot * cin * cout..(slot + 1) * cin * cout;
        let (xr, xi, wr, wi) = (&xr[a.clone()], &xi[a], &wr[w.clone()], &wi[w]);
        gemm(bsz, cin, cout, 1.0, xr, cin, 1, wr, cout, 1, 0.0, &mut yr[c.clone()], cout, 1);
        gemm(bsz, cin, cout, -1.0, xi, cin, 1, wi, cout, 1, 1.0, &mut yr[c.clone()], cout, 1);
        gemm(bsz, cin, cout, 1.0, xr, cin, 1, wi, cout, 1, 0.0, &mut yi[c.clone()], cout, 1);
        gemm(bsz, cin, cout, 1.0, xi, cin, 1, wr, cout, 1, 1.0, &mut yi[c], cout, 1);
    }
    let mut out = Vec::with_capacity(bsz * cout * n);
    let mut spec = vec![Complex64::new(0.0, 0.0); half_len];
    for b in 0..bsz {
        for o in 0..cout {
            spec.fill(Complex64::new(0.0, 0.0));
            for (r, &(_, idx, _)) in layout.retained.iter().enumerate() {
                let k = (r * bsz + b) * cout + o;
                spec[idx] = Complex64::new(yr[k], yi[k]);
            }
            out.extend(irfftn(&spec, shape));
        }
    }
    let value = Tensor { shape: vec![bsz, cout, n], data: out };

    Ok(Var::from_op(value, vec![x.clone(), w_re.clone(), w_im.clone()], move |c| {
        let shape = &layout.shape;
        // adjoint of the inverse real FFT: (multiplicity / N) * rfft
        let mut gr = vec![0.0; r_count * bsz * cout];
        let mut gi = vec![0.0; r_count * bsz * cout];
        for b in 0..bsz {
            for o in 0..cout {
                let spec = rfftn(&c.grad[(b * cout + o) * n..(b * cout + o + 1) * n], shape);
                for (r, &(_, idx, mult)) in layout.retained.iter().enumerate() {
                    let k = (r * bsz + b) * cout + o;
                    gr[k] = spec[idx].re * mult / n as f64;
                    gi[k] = spec[idx].im * mult / n as f64;
                }
            }
        }
        let (wr, wi) = (c.parents[1].data(), c.parents[2].data());
        let gx = c.needs[0].then(|| {
            // X_bar = Y_bar W^H
            let mut gxr = vec![0.0; r_count * bsz * cin];
            let mut gxi = vec![0.0; r_count * bsz * cin];
            for (r, &(slot, _, _)) in layout.retained.iter().enumerate() {
                let a = r * bsz * cout..(r + 1) * bsz * cout;
                let o = r * bsz * cin..(r + 1) * bsz * cin;
                let w = slot * cin * cout..(slot + 1) * cin * cout;
                let (gr, gi, wr, wi) = (&gr[a.clone()], &gi[a], &wr[w.clone()], &wi[w]);
                gemm(bsz, cout, cin, 1.0, gr, cout, 1, wr, 1, cout, 0.0, &mut gxr[o.clone()], cin, 1);
                gemm(bsz, cout, cin, 1.0, gi, cout, 1, wi, 1, cout, 1.0, &mut gxr[o.clone()], cin, 1);
                gemm(bsz, cout, cin, 1.0, gi, cout, 1, wr, 1, cout, 0.0, &mut gxi[o.clone()], cin, 1);
                gemm(bsz, cout, cin, -1.0, gr, cout, 1, wi, 1, cout, 1.0, &mut gxi[o], cin, 1);
            }
            // adjoint of the forward real FFT: N * irfft(. / multiplicity)
            let mut gx = Vec::with_capacity(bsz * cin * n);
            let mut spec = vec![Complex64::new(0.0, 0.0); half_len];
            for b in 0..bsz {
                for i in 0..cin {
                    spec.fill(Complex64::new(0.0, 0.0));
                    for (r, &(_, idx, mult)) in layout.retained.iter().enumerate() {
                        let k = (r * bsz + b) * cin + i;
                        spec[idx] = Complex64::new(gxr[k], gxi[k]) * (n as f64 / mult);
                    }
                    gx.extend(irfftn(&spec, shape));
                }
            }
            gx
        });
        let weight_grads = (c.needs[1] || c.needs[2]).then(|| {
            // W_bar = X^H Y_bar
            let mut gwr = vec![0.0; slots * cin * cout];
            let mut gwi = vec![0.0; slots * cin * cout];
            for (r, &(slot, _, _)) in layout.retained.iter().enumerate() {
                let a = r * bsz * cin..(r + 1) * bsz * cin;
                let g = r * bsz * cout..(r + 1) * bsz * cout;
                let w = slot * cin * cout..(slot + 1) * cin * cout;
                let (xr, xi, gr, gi) = (&xr[a.clone()], &xi[a], &gr[g.clone()], &gi[g]);
                gemm(cin, bsz, cout, 1.0, xr, 1, cin, gr, cout, 1, 1.0, &mut gwr[w.clone()], cout, 1);
                gemm(cin, bsz, cout, 1.0, xi, 1, cin, gi, cout, 1, 1.0, &mut gwr[w.clone()], cout, 1);
                gemm(cin, bsz, cout, 1.0, xr, 1, cin, gi, cout, 1, 1.0, &mut gwi[w.clone()], cout, 1);
                gemm(cin, bsz, cout, -1.0, xi, 1, cin, gr, cout, 1, 1.0, &mut gwi[w], cout, 1);
            }
            (gwr, gwi)
        });
        let (gwr, gwi) = match weight_grads {
            Some((a, b)) => (c.needs[1].then_some(a), c.needs[2].then_some(b)),
            None => (None, None),
        };
        vec![gx, gwr, gwi]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{resample, Axis, Domain, GridFunction};
    use crate::neural::gradcheck::assert_gradients;
    use crate::neural::ops;
    use rand::Rng;

    fn random(shape: Vec<usize>, seed: u64) -> Var {
        let mut rng = crate::rng::rng_from(seed);
        let n = shape.iter().product();
        Var::parameter(Tensor { shape, data: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() })
    }

    #[test]
    fn slot_count() {
        assert_eq!(spectral_weight_modes(&[5]), 5);
        assert_eq!(spectral_weight_modes(&[3, 4]), 20);
    }

    #[test]
    fn single_mode_scaling_matches_fft_oracle() {
        // with only the DC slot set to w, the output is w times the input mean
        let n = 16;
        let x = random(vec![1, 1, n], 3);
        let w_re = Var::constant(Tensor { shape: vec![1, 1, 1], data: vec![2.5] });
        let w_im = Var::constant(Tensor::zeros(vec![1, 1, 1]));
        let y = spectral_conv(&x, &w_re, &w_im, &[n], &[1]).unwrap();
        let mean = x.data().iter().sum::<f64>() / n as f64;
        assert!(y.data().iter().all(|v| (v - 2.5 * mean).abs() < 1e-14));
    }

    #[test]
    fn zero_weights_give_zero() {
        let x = random(vec![2, 3, 10], 1);
        let w = Var::constant(Tensor::zeros(vec![4, 3, 2]));
        let y = spectral_conv(&x, &w, &w, &[10], &[4]).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_weights_reproduce_in_band_input() {
        let (n0, n1) = (12, 16);
        let data: Vec<f64> = (0..n0 * n1)
            .map(|p| {
                let (x, y) = ((p / n1) as f64 / n0 as f64, (p % n1) as f64 / n1 as f64);
                let t = 2.0 * std::f64::consts::PI;
                0.4 + (t * x).sin() * (2.0 * t * y).cos() + 0.5 * (2.0 * t * x + t * y).cos()
            })
            .collect();
        let x = Var::constant(Tensor { shape: vec![1, 1, n0 * n1], data });
        let slots = spectral_weight_modes(&[3, 3]);
        let w_re = Var::constant(Tensor::full(vec![slots, 1, 1], 1.0));
        let w_im = Var::constant(Tensor::zeros(vec![slots, 1, 1]));
        let y = spectral_conv(&x, &w_re, &w_im, &[n0, n1], &[3, 3]).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn pure_rotation_shifts_a_cosine() {
        // multiplying mode 1 by i turns cos(2 pi x) into -sin(2 pi x)
        let n = 32;
        let x: Vec<f64> = (0..n).map(|j| (2.0 * std::f64::consts::PI * j as f64 / n as f64).cos()).collect();
        let x = Var::constant(Tensor { shape: vec![1, 1, n], data: x });
        let w_re = Var::constant(Tensor::zeros(vec![2, 1, 1]));
        let w_im = Var::constant(Tensor { shape: vec![2, 1, 1], data: vec![0.0, 1.0] });
        let y = spectral_conv(&x, &w_re, &w_im, &[n], &[2]).unwrap();
        for (j, v) in y.data().iter().enumerate() {
            let s = -(2.0 * std::f64::consts::PI * j as f64 / n as f64).sin();
            assert!((v - s).abs() < 1e-13);
        }
    }

    #[test]
    fn output_is_band_limited() {
        let shape = [12, 10];
        let x = random(vec![2, 2, 120], 1);
        let w_re = random(vec![spectral_weight_modes(&[3, 3]), 2, 3], 2);
        let w_im = random(vec![spectral_weight_modes(&[3, 3]), 2, 3], 3);
        let y = spectral_conv(&x, &w_re, &w_im, &shape, &[3, 3]).unwrap();
        for ch in y.data().chunks_exact(120) {
            let spec = rfftn(ch, &shape);
            let total: f64 = spec.iter().map(|c| c.norm_sqr()).sum();
            let mut outside = 0.0;
            for k0 in 0..12 {
                for k1 in 0..6 {
                    let signed = if k0 > 6 { 12 - k0 } else { k0 };
                    if signed > 2 || k1 > 2 {
                        outside += spec[k0 * 6 + k1].norm_sqr();
                    }
                }
            }
            assert!(outside <= 1e-24 * total.max(1.0));
        }
    }

    #[test]
    fn gradients_1d() {
        let ps = vec![random(vec![2, 2, 9], 1), random(vec![3, 2, 3], 2), random(vec![3, 2, 3], 3)];
        assert_gradients(ps, |p| {
            let y = spectral_conv(&p[0], &p[1], &p[2], &[9], &[3])?;
            Ok(ops::sum(&ops::silu(&y)))
        });
    }

    #[test]
    fn gradients_2d_even_grid() {
        let slots = spectral_weight_modes(&[2, 3]);
        let ps = vec![random(vec![1, 2, 48], 4), random(vec![slots, 2, 2], 5), random(vec![slots, 2, 2], 6)];
        assert_gradients(ps, |p| {
            let y = spectral_conv(&p[0], &p[1], &p[2], &[6, 8], &[2, 3])?;
            Ok(ops::sum(&ops::silu(&y)))
        });
    }

    #[test]
    fn resolution_invariant_on_band_limited_input() {
        let domain = Domain::new(vec![Axis::periodic(0.0, 1.0)]).unwrap();
        let f = |x: &[f64]| (2.0 * std::f64::consts::PI * x[0]).sin() + 0.3 * (6.0 * std::f64::consts::PI * x[0]).cos();
        let coarse = GridFunction::from_fn(domain.clone(), vec![64], f).unwrap();
        let fine = GridFunction::from_fn(domain, vec![128], f).unwrap();
        let w_re = random(vec![8, 1, 1], 7);
        let w_im = random(vec![8, 1, 1], 8);
        let run = |g: &GridFunction| {
            let x = Var::constant(Tensor { shape: vec![1, 1, g.n_points()], data: g.values.clone() });
            spectral_conv(&x, &w_re, &w_im, &g.shape, &[8]).unwrap().data().to_vec()
        };
        let yc = GridFunction::new(coarse.domain.clone(), vec![64], 1, run(&coarse)).unwrap();
        let up = resample(&yc, &[128]).unwrap();
        let yf = run(&fine);
        let rms = (up.values.iter().zip(&yf).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 128.0).sqrt();
        assert!(rms < 1e-12, "{rms}");
    }
}
