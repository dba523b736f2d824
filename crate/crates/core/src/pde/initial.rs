//! Random sine-superposition initial conditions and their spectral degradation.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FloralError, Result};
use crate::grid::{irfftn, rfftn, GridFunction};
use crate::grid::Domain;
use crate::rng::rng_from;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcSpec {
    pub n_max: usize,
    pub n_waves: usize,
    pub amplitude: (f64, f64),
    pub phase: (f64, f64),
    pub p_abs: f64,
    pub p_flip: f64,
    pub p_window: f64,
    /// Range of the left window edge.
    pub window_left: (f64, f64),
    /// Range of the right window edge.
    pub window_right: (f64, f64),
}

impl Default for IcSpec {
    fn default() -> Self {
        Self {
            n_max: 8,
            n_waves: 2,
            amplitude: (0.0, 1.0),
            phase: (0.0, 2.0 * PI),
            p_abs: 0.1,
            p_flip: 0.5,
            p_window: 0.1,
            window_left: (0.05, 0.45),
            window_right: (0.55, 0.95),
        }
    }
}

impl IcSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_abs", self.p_abs), ("p_flip", self.p_flip), ("p_window", self.p_window)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(FloralError::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.n_max == 0 || self.n_waves == 0 {
            return Err(FloralError::Config("n_max and n_waves must be positive".into()));
        }
        if self.window_left.1 >= self.window_right.0 {
            return Err(FloralError::Config("window edge ranges must not overlap".into()));
        }
        Ok(())
    }
}

/// Draws the random parameters of one initial condition.
#[derive(Clone, Debug, PartialEq)]
pub struct IcDraw {
    /// `(amplitude, wave number n, phase)` per term.
    pub terms: Vec<(f64, usize, f64)>,
    pub abs: bool,
    pub flip: bool,
    pub window: Option<(f64, f64)>,
}

impl IcDraw {
    pub fn sample<R: Rng + ?Sized>(spec: &IcSpec, rng: &mut R) -> Self {
        let terms = (0..spec.n_waves)
            .map(|_| {
                let a = rng.gen_range(spec.amplitude.0..=spec.amplitude.1);
                let n = rng.gen_range(1..=spec.n_max);
                let phi = rng.gen_range(spec.phase.0..=spec.phase.1);
                (a, n, phi)
            })
            .collect();
        let abs = rng.gen::<f64>() < spec.p_abs;
        let flip = rng.gen::<f64>() < spec.p_flip;
        let use_window = rng.gen::<f64>() < spec.p_window;
        let xa = rng.gen_range(spec.window_left.0..=spec.window_left.1);
        let xb = rng.gen_range(spec.window_right.0..=spec.window_right.1);
        Self { terms, abs, flip, window: use_window.then_some((xa, xb)) }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut u: f64 = self.terms.iter().map(|&(a, n, phi)| a * (2.0 * PI * n as f64 * x + phi).sin()).sum();
        if self.abs {
            u = u.abs();
        }
        if self.flip {
            u = -u;
        }
        if let Some((xa, xb)) = self.window {
            if x < xa || x > xb {
                u = 0.0;
            }
        }
        u
    }
}

/// A random initial condition on a 1D periodic grid.
pub fn gen_initial_condition(spec: &IcSpec, domain: &Domain, n: usize, seed: u64) -> Result<GridFunction> {
    let draw = IcDraw::sample(spec, &mut rng_from(seed));
    GridFunction::from_fn(domain.clone(), vec![n], |x| draw.eval(x[0]))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradeSpec {
    pub f_keep: f64,
    pub gamma: f64,
    pub s_a: f64,
}

impl Default for DegradeSpec {
    fn default() -> Self {
        Self { f_keep: 0.4, gamma: 4.0, s_a: 0.8 }
    }
}

impl DegradeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_keep > 0.0 && self.f_keep <= 1.0) || self.gamma < 0.0 || !(self.s_a > 0.0) {
            return Err(FloralError::Config(format!("invalid degradation parameters {self:?}")));
        }
        Ok(())
    }

    /// Number of retained modes out of `kk + 1`.
    pub fn kept_modes(&self, kk: usize) -> usize {
        ((self.f_keep * kk as f64).floor() as usize).max(2)
    }
}

/// Low-pass filters, damps and rescales a periodic 1D field.
pub fn spectral_degrade(u0: &GridFunction, spec: &DegradeSpec) -> Result<GridFunction> {
    if u0.domain.ndim() != 1 || !u0.domain.axes[0].is_periodic() {
        return Err(FloralError::Grid("spectral_degrade needs a periodic 1D field".into()));
    }
    let n = u0.shape[0];
    let kk = n / 2;
    let keep = spec.kept_modes(kk);
    let mut values = Vec::with_capacity(u0.len());
    for c in 0..u0.channels {
        let mut s = rfftn(u0.channel(c), &[n]);
        for (k, coef) in s.iter_mut().enumerate() {
            let m = if k < keep { 1.0 } else { 0.0 };
            *coef *= spec.s_a * m * (-spec.gamma * k as f64 / kk as f64).exp();
        }
        values.extend(irfftn(&s, &[n]));
    }
    GridFunction::new(u0.domain.clone(), u0.shape.clone(), u0.channels, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{rfft_nd, Axis};

    fn dom() -> Domain {
        Domain::new(vec![Axis::periodic(0.0, 1.0)]).unwrap()
    }

    fn sine(n: usize, k: f64) -> GridFunction {
        GridFunction::from_fn(dom(), vec![n], |x| (2.0 * PI * k * x[0]).sin()).unwrap()
    }

    #[test]
    fn single_term_without_transforms() {
        let d = IcDraw { terms: vec![(1.0, 1, 0.0)], abs: false, flip: false, window: None };
        for x in [0.0, 0.1, 0.37] {
            assert!((d.eval(x) - (2.0 * PI * x).sin()).abs() < 1e-15);
        }
        let d = IcDraw { abs: true, ..d };
        assert!((0..100).all(|i| d.eval(i as f64 / 100.0) >= 0.0));
    }

    #[test]
    fn window_zeroes_outside() {
        let d = IcDraw { terms: vec![(1.0, 1, 0.3)], abs: false, flip: true, window: Some((0.2, 0.7)) };
        assert_eq!(d.eval(0.1), 0.0);
        assert_eq!(d.eval(0.8), 0.0);
        assert!((d.eval(0.5) + (PI + 0.3).sin()).abs() < 1e-15);
    }

    #[test]
    fn generated_energy_at_low_integer_modes() {
        let spec = IcSpec { p_abs: 0.0, p_window: 0.0, ..IcSpec::default() };
        for seed in 0..20 {
            let u = gen_initial_condition(&spec, &dom(), 128, seed).unwrap();
            let s = rfft_nd(&u);
            let total: f64 = s.coeffs.iter().map(|c| c.norm_sqr()).sum();
            let high: f64 = s.coeffs[9..].iter().map(|c| c.norm_sqr()).sum();
            assert!(high <= 1e-20 * total.max(1.0));
        }
    }

    #[test]
    fn degrade_constant_and_sine() {
        let spec = DegradeSpec::default();
        let c = GridFunction::constant(dom(), vec![128], 1, 1.0).unwrap();
        let d = spectral_degrade(&c, &spec).unwrap();
        assert!(d.values.iter().all(|v| (v - 0.8).abs() < 1e-14));
        let d = spectral_degrade(&sine(128, 1.0), &spec).unwrap();
        let amp = 0.8 * (-4.0f64 / 64.0).exp();
        assert!((d.values[32] - amp).abs() < 1e-12);
        assert!((amp - 0.7515).abs() < 1e-4);
    }

    #[test]
    fn degrade_removes_high_mode() {
        assert_eq!(DegradeSpec::default().kept_modes(64), 25);
        let d = spectral_degrade(&sine(128, 60.0), &DegradeSpec::default()).unwrap();
        assert!(d.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn degrade_twice_equals_squared_scale_doubled_damping() {
        let spec = DegradeSpec::default();
        let u = gen_initial_condition(&IcSpec::default(), &dom(), 128, 3).unwrap();
        let twice = spectral_degrade(&spectral_degrade(&u, &spec).unwrap(), &spec).unwrap();
        let once = spectral_degrade(&u, &DegradeSpec { s_a: 0.64, gamma: 8.0, ..spec }).unwrap();
        for (a, b) in twice.values.iter().zip(&once.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
