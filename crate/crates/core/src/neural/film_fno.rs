//! Vector field `H(tau, w, a) = L w + N(tau, w, a)` with a FiLM-conditioned FNO as `N`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::autograd::{Tensor, Var};
use super::ops;
use super::spectral::{spectral_conv, spectral_weight_modes};
use crate::error::{FloralError, Result};
use crate::grid::{Axis, AxisKind, Domain, GridFunction};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilmFnoConfig {
    pub n_layers: usize,
    pub hidden_channels: usize,
    pub modes_per_axis: Vec<usize>,
    pub lifting_ratio: usize,
    pub projection_ratio: usize,
    pub conditioner_width: usize,
    pub conditioner_depth: usize,
}

impl Default for FilmFnoConfig {
    fn default() -> Self {
        Self {
            n_layers: 4,
            hidden_channels: 64,
            modes_per_axis: vec![16],
            lifting_ratio: 4,
            projection_ratio: 4,
            conditioner_width: 64,
            conditioner_depth: 3,
        }
    }
}

impl FilmFnoConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_layers", self.n_layers),
            ("hidden_channels", self.hidden_channels),
            ("lifting_ratio", self.lifting_ratio),
            ("projection_ratio", self.projection_ratio),
            ("conditioner_width", self.conditioner_width),
            ("conditioner_depth", self.conditioner_depth),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(FloralError::Config(format!("{name} must be positive")));
            }
        }
        if self.modes_per_axis.is_empty() || self.modes_per_axis.contains(&0) {
            return Err(FloralError::Config("modes_per_axis must list a positive count per axis".into()));
        }
        Ok(())
    }
}

/// What a model is built for: architecture plus channel counts and axis kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub config: FilmFnoConfig,
    pub w_channels: usize,
    pub a_channels: usize,
    pub axis_kinds: Vec<AxisKind>,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.w_channels == 0 || self.a_channels == 0 {
            return Err(FloralError::Config("w and a need at least one channel each".into()));
        }
        if self.axis_kinds.len() != self.config.modes_per_axis.len() {
            return Err(FloralError::Config(format!(
                "{} mode counts for {} axes",
                self.config.modes_per_axis.len(),
                self.axis_kinds.len()
            )));
        }
        Ok(())
    }

    /// Periodic axes contribute `sin, cos` of the unit coordinate, others the coordinate itself.
    pub fn coordinate_channels(&self) -> usize {
        self.axis_kinds.iter().map(|k| if *k == AxisKind::Periodic { 2 } else { 1 }).sum()
    }

    pub fn input_channels(&self) -> usize {
        self.w_channels + self.a_channels + 1 + self.coordinate_channels()
    }

    /// Names and shapes of every parameter, in storage order.
    pub fn parameter_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let c = &self.config;
        let h = c.hidden_channels;
        let lift = c.lifting_ratio * h;
        let proj = c.projection_ratio * h;
        let slots = spectral_weight_modes(&c.modes_per_axis);
        let mut v: Vec<(String, Vec<usize>)> = vec![
            ("linear.weight".into(), vec![self.w_channels, self.w_channels]),
            ("lift.0.weight".into(), vec![lift, self.input_channels()]),
            ("lift.0.bias".into(), vec![lift]),
            ("lift.1.weight".into(), vec![h, lift]),
            ("lift.1.bias".into(), vec![h]),
            ("cond.lift_a.weight".into(), vec![h, self.a_channels]),
            ("cond.lift_a.bias".into(), vec![h]),
        ];
        let mut prev = h + 1;
        for j in 0..c.conditioner_depth {
            v.push((format!("cond.mlp.{j}.weight"), vec![c.conditioner_width, prev]));
            v.push((format!("cond.mlp.{j}.bias"), vec![c.conditioner_width]));
            prev = c.conditioner_width;
        }
        for l in 0..c.n_layers {
            v.push((format!("layers.{l}.spectral.re"), vec![slots, h, h]));
            v.push((format!("layers.{l}.spectral.im"), vec![slots, h, h]));
            v.push((format!("layers.{l}.skip.weight"), vec![h, h]));
            v.push((format!("layers.{l}.skip.bias"), vec![h]));
            v.push((format!("layers.{l}.film.weight"), vec![2 * h, prev]));
            v.push((format!("layers.{l}.film.bias"), vec![2 * h]));
        }
        v.push(("project.0.weight".into(), vec![proj, h]));
        v.push(("project.0.bias".into(), vec![proj]));
        v.push(("project.1.weight".into(), vec![self.w_channels, proj]));
        v.push(("project.1.bias".into(), vec![self.w_channels]));
        v
    }

    pub fn parameter_count(&self) -> usize {
        self.parameter_shapes().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    }
}

fn glorot(shape: &[usize], rng: &mut impl Rng) -> Vec<f64> {
    let (fan_out, fan_in) = (shape[0], shape[1]);
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..fan_out * fan_in).map(|_| rng.gen_range(-limit..limit)).collect()
}

#[derive(Clone, Debug)]
pub struct VectorFieldModel {
    spec: ModelSpec,
    names: Vec<String>,
    params: Vec<Var>,
}

impl VectorFieldModel {
    /// Glorot-uniform pointwise maps, zero biases, spectral weights
    /// `U(0, 1) / (in * out)` and identity FiLM (`s = 1`, `b = 0`).
    pub fn new(spec: ModelSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let h = spec.config.hidden_channels;
        let mut names = Vec::new();
        let mut params = Vec::new();
        for (name, shape) in spec.parameter_shapes() {
            let n: usize = shape.iter().product();
            let data = if name.ends_with(".re") || name.ends_with(".im") {
                let scale = 1.0 / (h * h) as f64;
                (0..n).map(|_| scale * rng.gen::<f64>()).collect()
            } else if name.contains(".film.") {
                if name.ends_with("bias") {
                    (0..n).map(|i| if i < h { 1.0 } else { 0.0 }).collect()
                } else {
                    vec![0.0; n]
                }
            } else if name.ends_with("bias") {
                vec![0.0; n]
            } else {
                glorot(&shape, rng)
            };
            names.push(name);
            params.push(Var::parameter(Tensor { shape, data }));
        }
        Ok(Self { spec, names, params })
    }

    /// Rebuilds a model from stored parameter values.
    pub fn from_parameters(spec: ModelSpec, values: Vec<(String, Tensor)>) -> Result<Self> {
        spec.validate()?;
        let expected = spec.parameter_shapes();
        if expected.len() != values.len() {
            return Err(FloralError::Data(format!("expected {} parameters, got {}", expected.len(), values.len())));
        }
        let mut names = Vec::new();
        let mut params = Vec::new();
        for ((name, shape), (got_name, t)) in expected.into_iter().zip(values) {
            if name != got_name || shape != t.shape {
                return Err(FloralError::Data(format!(
                    "parameter {got_name} {:?} does not match {name} {shape:?}",
                    t.shape
                )));
            }
            names.push(name);
            params.push(Var::parameter(t));
        }
        Ok(Self { spec, names, params })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn parameters(&self) -> &[Var] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [Var] {
        &mut self.params
    }

    pub fn named_parameters(&self) -> impl Iterator<Item = (&str, &Var)> {
        self.names.iter().map(String::as_str).zip(&self.params)
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.value().numel()).sum()
    }

    pub fn zero_grad(&self) {
        self.params.iter().for_each(Var::zero_grad);
    }

    fn param(&self, name: &str) -> &Var {
        let i = self.names.iter().position(|n| n == name).expect("known parameter name");
        &self.params[i]
    }

    /// Coordinate channels `[channels, points]` for a grid of `shape`.
    fn coordinates(&self, shape: &[usize]) -> Result<Vec<f64>> {
        let s: usize = shape.iter().product();
        let mut out = Vec::with_capacity(self.spec.coordinate_channels() * s);
        for (d, kind) in self.spec.axis_kinds.iter().enumerate() {
            let x = Axis::new(0.0, 1.0, *kind).unit_points(shape[d])?;
            let inner: usize = shape[d + 1..].iter().product();
            let at = |p: usize| x[(p / inner) % shape[d]];
            if *kind == AxisKind::Periodic {
                let tau = 2.0 * std::f64::consts::PI;
                out.extend((0..s).map(|p| (tau * at(p)).sin()));
                out.extend((0..s).map(|p| (tau * at(p)).cos()));
            } else {
                out.extend((0..s).map(at));
            }
        }
        Ok(out)
    }

    /// `L w`, the linear part alone.
    pub fn linear_part(&self, w: &Var) -> Result<Var> {
        ops::linear(w, self.param("linear.weight"), None)
    }

    /// Batched evaluation; `w: [B, w_channels, S]`, `a: [B, a_channels, S]`, one `tau` per item.
    pub fn forward(&self, tau: &[f64], w: &Tensor, a: &Tensor, shape: &[usize]) -> Result<Var> {
        let spec = &self.spec;
        if shape.len() != spec.axis_kinds.len() || shape.iter().any(|&n| n < 2) {
            return Err(FloralError::Shape(format!("grid {shape:?} for a {}D model", spec.axis_kinds.len())));
        }
        let s: usize = shape.iter().product();
        let b = tau.len();
        if w.shape != [b, spec.w_channels, s] || a.shape != [b, spec.a_channels, s] {
            return Err(FloralError::Shape(format!(
                "forward: w {:?}, a {:?} for batch {b}, grid {shape:?}",
                w.shape, a.shape
            )));
        }
        let h = spec.config.hidden_channels;
        let coords = self.coordinates(shape)?;
        let cin = spec.input_channels();
        let mut input = Vec::with_capacity(b * cin * s);
        for i in 0..b {
            input.extend_from_slice(&w.data[i * spec.w_channels * s..(i + 1) * spec.w_channels * s]);
            input.extend_from_slice(&a.data[i * spec.a_channels * s..(i + 1) * spec.a_channels * s]);
            input.extend(std::iter::repeat_n(tau[i], s));
            input.extend_from_slice(&coords);
        }
        let input = Var::constant(Tensor { shape: vec![b, cin, s], data: input });
        let w_var = Var::constant(w.clone());
        let a_var = Var::constant(a.clone());
        let p = |n: &str| self.param(n);

        let z = ops::linear(&input, p("lift.0.weight"), Some(p("lift.0.bias")))?;
        let mut hid = ops::linear(&ops::silu(&z), p("lift.1.weight"), Some(p("lift.1.bias")))?;

        let pa = ops::linear(&a_var, p("cond.lift_a.weight"), Some(p("cond.lift_a.bias")))?;
        let tau_var = Var::constant(Tensor { shape: vec![b, 1, 1], data: tau.to_vec() });
        let mut e = ops::concat_channels(&[&ops::mean_points(&pa)?, &tau_var])?;
        for j in 0..spec.config.conditioner_depth {
            let z = ops::linear(&e, p(&format!("cond.mlp.{j}.weight")), Some(p(&format!("cond.mlp.{j}.bias"))))?;
            e = ops::silu(&z);
        }

        for l in 0..spec.config.n_layers {
            let mods = ops::linear(&e, p(&format!("layers.{l}.film.weight")), Some(p(&format!("layers.{l}.film.bias"))))?;
            let scale = ops::slice_channels(&mods, 0, h)?;
            let shift = ops::slice_channels(&mods, h, h)?;
            let spectral = spectral_conv(
                &hid,
                p(&format!("layers.{l}.spectral.re")),
                p(&format!("layers.{l}.spectral.im")),
                shape,
                &spec.config.modes_per_axis,
            )?;
            let skip = ops::linear(&hid, p(&format!("layers.{l}.skip.weight")), Some(p(&format!("layers.{l}.skip.bias"))))?;
            hid = ops::film(&ops::silu(&ops::add(&spectral, &skip)?), &scale, &shift)?;
        }

        let z = ops::linear(&hid, p("project.0.weight"), Some(p("project.0.bias")))?;
        let n_out = ops::linear(&ops::silu(&z), p("project.1.weight"), Some(p("project.1.bias")))?;
        ops::add(&self.linear_part(&w_var)?, &n_out)
    }

    /// Single-sample evaluation on grid functions sharing a grid.
    pub fn evaluate(&self, tau: f64, w: &GridFunction, a: &GridFunction) -> Result<GridFunction> {
        self.check_grid(&w.domain)?;
        if !w.same_grid_points(a) {
            return Err(FloralError::Shape("w and a must share a grid".into()));
        }
        let s = w.n_points();
        let wt = Tensor { shape: vec![1, w.channels, s], data: w.values.clone() };
        let at = Tensor { shape: vec![1, a.channels, s], data: a.values.clone() };
        let out = super::autograd::no_grad(|| self.forward(&[tau], &wt, &at, &w.shape))?;
        GridFunction::new(w.domain.clone(), w.shape.clone(), w.channels, out.data().to_vec())
    }

    /// Errors unless the axis kinds of `domain` match the ones the model was built for.
    pub fn check_grid(&self, domain: &Domain) -> Result<()> {
        let kinds: Vec<AxisKind> = domain.axes.iter().map(|a| a.kind).collect();
        if kinds != self.spec.axis_kinds {
            return Err(FloralError::Shape(format!(
                "model built for axes {:?}, got {kinds:?}",
                self.spec.axis_kinds
            )));
        }
        Ok(())
    }
}
