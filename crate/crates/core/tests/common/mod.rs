#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use floral::grid::{Axis, Domain, GridFunction};
use floral::pde::{solve_advection, solve_burgers};
use floral::rng::rng_from;

/// Gauss-Hermite rule for the weight `exp(-x^2)` (Golub-Welsch).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::zeros(n, n);
    for i in 1..n {
        let b = (i as f64 / 2.0).sqrt();
        j[(i, i - 1)] = b;
        j[(i - 1, i)] = b;
    }
    let e = SymmetricEigen::new(j);
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|k| (e.eigenvalues[k], PI.sqrt() * e.eigenvectors[(0, k)].powi(2)))
        .collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule.into_iter().unzip()
}

/// Two-point-grid Gaussian toy: `w0 ~ N(0, I)`, `w1 ~ N(m, s^2 I)` independent,
/// path `w = (1 - tau) w0 + tau w1 + sigma_min RMS(w1 - w0) eps`.
///
/// With `d = w1 - w0`, `w0 | d` is Gaussian, so `p(w | d)` is Gaussian and the
/// marginal field `E[d | w]` is a ratio of two quadratures over `d`.
pub struct GaussianToy {
    pub m: [f64; 2],
    pub s: f64,
    pub sigma_min: f64,
    nodes: Vec<([f64; 2], f64)>,
}

pub fn rms2(d: [f64; 2]) -> f64 {
    ((d[0] * d[0] + d[1] * d[1]) / 2.0).sqrt()
}

impl GaussianToy {
    pub fn new(m: [f64; 2], s: f64, sigma_min: f64, order: usize) -> Self {
        let (x, w) = gauss_hermite(order);
        let scale = (2.0 * (1.0 + s * s)).sqrt();
        let mut nodes = Vec::with_capacity(order * order);
        for i in 0..order {
            for j in 0..order {
                nodes.push(([m[0] + scale * x[i], m[1] + scale * x[j]], w[i] * w[j] / PI));
            }
        }
        Self { m, s, sigma_min, nodes }
    }

    /// `(tau, w, d)` with `w` on the conditional path of `d = w1 - w0`.
    pub fn draw(&self, rng: &mut impl Rng) -> (f64, [f64; 2], [f64; 2]) {
        let tau: f64 = rng.gen();
        let mut n = || rng.sample::<f64, _>(StandardNormal);
        let w0 = [n(), n()];
        let w1 = [self.m[0] + self.s * n(), self.m[1] + self.s * n()];
        let d = [w1[0] - w0[0], w1[1] - w0[1]];
        let sig = self.sigma_min * rms2(d);
        let w = [
            (1.0 - tau) * w0[0] + tau * w1[0] + sig * n(),
            (1.0 - tau) * w0[1] + tau * w1[1] + sig * n(),
        ];
        (tau, w, d)
    }

    /// Marginal vector field at `(tau, w)` by quadrature over `d`.
    pub fn marginal_field(&self, tau: f64, w: [f64; 2]) -> [f64; 2] {
        let c = 1.0 + self.s * self.s;
        let base_var = self.s * self.s / c;
        let (mut num, mut den) = ([0.0; 2], 0.0);
        for (d, wt) in &self.nodes {
            let var = base_var + (self.sigma_min * rms2(*d)).powi(2);
            let mu = [tau * d[0] - (d[0] - self.m[0]) / c, tau * d[1] - (d[1] - self.m[1]) / c];
            let r2 = (w[0] - mu[0]).powi(2) + (w[1] - mu[1]).powi(2);
            let p = wt * (-0.5 * r2 / var).exp() / var;
            num[0] += p * d[0];
            num[1] += p * d[1];
            den += p;
        }
        [num[0] / den, num[1] / den]
    }
}

/// `h(tau, w) = A w + b + tau (C w + c)` with parameters `[A, b, C, c]` row-major.
pub fn toy_field(theta: &[f64; 12], tau: f64, w: [f64; 2]) -> [f64; 2] {
    let mut out = [0.0; 2];
    for i in 0..2 {
        out[i] = theta[2 * i] * w[0] + theta[2 * i + 1] * w[1] + theta[4 + i]
            + tau * (theta[6 + 2 * i] * w[0] + theta[6 + 2 * i + 1] * w[1] + theta[10 + i]);
    }
    out
}

/// Gradient of `|h(tau, w) - target|^2` with respect to the parameters.
pub fn toy_grad(theta: &[f64; 12], tau: f64, w: [f64; 2], target: [f64; 2]) -> [f64; 12] {
    let h = toy_field(theta, tau, w);
    let r = [2.0 * (h[0] - target[0]), 2.0 * (h[1] - target[1])];
    let mut g = [0.0; 12];
    for i in 0..2 {
        g[2 * i] = r[i] * w[0];
        g[2 * i + 1] = r[i] * w[1];
        g[4 + i] = r[i];
        g[6 + 2 * i] = tau * r[i] * w[0];
        g[6 + 2 * i + 1] = tau * r[i] * w[1];
        g[10 + i] = tau * r[i];
    }
    g
}

pub struct GradientComparison {
    pub cfm: [f64; 12],
    pub fm: [f64; 12],
    /// Standard error of the paired difference, per parameter.
    pub se: [f64; 12],
}

impl GradientComparison {
    pub fn max_z(&self) -> f64 {
        (0..12).map(|k| (self.cfm[k] - self.fm[k]).abs() / self.se[k]).fold(0.0, f64::max)
    }
}

/// Monte-Carlo CFM gradient against the FM gradient with the quadrature marginal
/// field, both on the same `n` draws; `field` replaces the marginal field when given.
pub fn compare_gradients(
    toy: &GaussianToy,
    theta: &[f64; 12],
    n: usize,
    seed: u64,
    field: Option<&dyn Fn(f64, [f64; 2]) -> [f64; 2]>,
) -> GradientComparison {
    let mut rng = rng_from(seed);
    let (mut sc, mut sf, mut sd, mut sdd) = ([0.0; 12], [0.0; 12], [0.0; 12], [0.0; 12]);
    for _ in 0..n {
        let (tau, w, d) = toy.draw(&mut rng);
        let f = match field {
            Some(f) => f(tau, w),
            None => toy.marginal_field(tau, w),
        };
        let gc = toy_grad(theta, tau, w, d);
        let gf = toy_grad(theta, tau, w, f);
        for k in 0..12 {
            sc[k] += gc[k];
            sf[k] += gf[k];
            let diff = gc[k] - gf[k];
            sd[k] += diff;
            sdd[k] += diff * diff;
        }
    }
    let nf = n as f64;
    let mut out = GradientComparison { cfm: [0.0; 12], fm: [0.0; 12], se: [0.0; 12] };
    for k in 0..12 {
        out.cfm[k] = sc[k] / nf;
        out.fm[k] = sf[k] / nf;
        let mean = sd[k] / nf;
        out.se[k] = ((sdd[k] / nf - mean * mean) / (nf - 1.0)).sqrt();
    }
    out
}

/// 1D construction with two atoms for `w1` and a standard normal `w0`,
/// integrated by the trapezoidal rule on `[-9, 9]`.
pub struct TwoAtomToy {
    pub atoms: [(f64, f64); 2],
    pub sigma: f64,
    w0: Vec<(f64, f64)>,
}

impl TwoAtomToy {
    pub fn new(atoms: [(f64, f64); 2], sigma: f64) -> Self {
        let h = 0.005;
        let n = (18.0 / h) as usize;
        let w0 = (0..=n)
            .map(|i| {
                let x = -9.0 + i as f64 * h;
                (x, h * (-0.5 * x * x).exp() / (2.0 * PI).sqrt())
            })
            .collect();
        Self { atoms, sigma, w0 }
    }

    /// `(p_tau(w), J_tau(w))` with `J = E_z[f_z p(w | z)]`.
    fn moments(&self, tau: f64, w: f64) -> (f64, f64) {
        let norm = 1.0 / (self.sigma * (2.0 * PI).sqrt());
        let (mut p, mut j) = (0.0, 0.0);
        for &(w1, pi) in &self.atoms {
            for &(w0, q) in &self.w0 {
                let mu = (1.0 - tau) * w0 + tau * w1;
                let k = pi * q * norm * (-0.5 * ((w - mu) / self.sigma).powi(2)).exp();
                p += k;
                j += k * (w1 - w0);
            }
        }
        (p, j)
    }

    pub fn density(&self, tau: f64, w: f64) -> f64 {
        self.moments(tau, w).0
    }

    pub fn marginal_field(&self, tau: f64, w: f64) -> f64 {
        let (p, j) = self.moments(tau, w);
        j / p
    }

    /// A field that ignores the posterior weighting; it does not transport the path.
    pub fn naive_field(&self, _tau: f64, _w: f64) -> f64 {
        self.atoms.iter().map(|&(w1, pi)| pi * w1).sum::<f64>()
    }

    /// Max over a fixed set of points of the centred-difference residual of
    /// `dp/dtau + d(p f)/dw` with steps `h` in both variables.
    pub fn continuity_residual(&self, h: f64, field: &dyn Fn(f64, f64) -> f64) -> f64 {
        let mut worst: f64 = 0.0;
        for it in 1..=9 {
            let tau = it as f64 / 10.0;
            for iw in 0..=40 {
                let w = -4.0 + 0.2 * iw as f64;
                let dp = (self.density(tau + h, w) - self.density(tau - h, w)) / (2.0 * h);
                let flux = |x: f64| self.density(tau, x) * field(tau, x);
                let dflux = (flux(w + h) - flux(w - h)) / (2.0 * h);
                worst = worst.max((dp + dflux).abs());
            }
        }
        worst
    }
}

pub fn periodic_ic(n: usize, f: impl Fn(f64) -> f64) -> GridFunction {
    GridFunction::from_fn(Domain::new(vec![Axis::periodic(0.0, 1.0)]).unwrap(), vec![n], |x| f(x[0])).unwrap()
}

pub fn final_slice(traj: &GridFunction) -> Vec<f64> {
    let (nx, nt) = (traj.shape[0], traj.shape[1]);
    (0..nx).map(|i| traj.values[i * nt + nt - 1]).collect()
}

fn rms(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    (s / n as f64).sqrt()
}

/// Errors of upwind advection of `sin(2 pi x)` against the exact translate at
/// `nx = nt = 128, 256, 512, 1024` (beta = 0.05, T = 1).
pub fn advection_errors() -> Vec<f64> {
    let (beta, t) = (0.05, 1.0);
    [128, 256, 512, 1024]
        .iter()
        .map(|&n| {
            let u0 = periodic_ic(n, |x| (2.0 * PI * x).sin());
            let u = final_slice(&solve_advection(&u0, beta, n, t).unwrap());
            rms((0..n).map(|i| u[i] - (2.0 * PI * (i as f64 / n as f64 - beta * t)).sin()))
        })
        .collect()
}

/// Errors of Burgers at `nx = 64, 128, 256` against `nx = 1024` for a smooth
/// initial condition at `T = 0.05`.
pub fn burgers_errors() -> Vec<f64> {
    let (nu, t) = (0.01, 0.05);
    let ic = |x: f64| (2.0 * PI * x).sin() + 0.5 * (4.0 * PI * x).cos();
    let reference = final_slice(&solve_burgers(&periodic_ic(1024, ic), nu, 2, t).unwrap());
    [64, 128, 256]
        .iter()
        .map(|&n| {
            let u = final_slice(&solve_burgers(&periodic_ic(n, ic), nu, 2, t).unwrap());
            let stride = 1024 / n;
            rms((0..n).map(|i| u[i] - reference[i * stride]))
        })
        .collect()
}

pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect()
}
