//! Uniform tensor-product grids and the fields that live on them.
//!
//! Values are stored channel-major, then row-major over the spatial axes
//! (the last axis varies fastest).

mod fft;
mod resample;

pub use fft::{fftn_complex, half_shape, irfft_nd, irfftn, retained_frequencies, rfft_nd, rfftn, Spectrum};
pub use resample::resample;

use serde::{Deserialize, Serialize};

use crate::error::{FloralError, Result};

/// How grid points are placed along an axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    /// `lo + i (hi - lo) / n`, right endpoint excluded.
    Periodic,
    /// `n` points including both endpoints.
    Nodal,
    /// Cell centres `lo + (i + 1/2) (hi - lo) / n`.
    CellCentered,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub kind: AxisKind,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, kind: AxisKind) -> Self {
        Self { lo, hi, kind }
    }

    pub fn periodic(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, AxisKind::Periodic)
    }

    pub fn nodal(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, AxisKind::Nodal)
    }

    pub fn cell_centered(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, AxisKind::CellCentered)
    }

    pub fn is_periodic(&self) -> bool {
        self.kind == AxisKind::Periodic
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    /// Grid spacing for `n` points.
    pub fn spacing(&self, n: usize) -> f64 {
        match self.kind {
            AxisKind::Periodic | AxisKind::CellCentered => self.length() / n as f64,
            AxisKind::Nodal => self.length() / (n - 1) as f64,
        }
    }

    pub fn points(&self, n: usize) -> Result<Vec<f64>> {
        if n < 2 {
            return Err(FloralError::Grid(format!("axis needs at least 2 points, got {n}")));
        }
        let h = self.spacing(n);
        Ok(match self.kind {
            AxisKind::Periodic => (0..n).map(|i| self.lo + i as f64 * h).collect(),
            AxisKind::Nodal => (0..n)
                .map(|i| if i == n - 1 { self.hi } else { self.lo + i as f64 * h })
                .collect(),
            AxisKind::CellCentered => (0..n).map(|i| self.lo + (i as f64 + 0.5) * h).collect(),
        })
    }

    /// Point positions rescaled to `[0, 1]` relative to the axis bounds.
    pub fn unit_points(&self, n: usize) -> Result<Vec<f64>> {
        Ok(self.points(n)?.into_iter().map(|x| (x - self.lo) / self.length()).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub axes: Vec<Axis>,
}

impl Domain {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 3 {
            return Err(FloralError::Grid(format!("domain must have 1 to 3 axes, got {}", axes.len())));
        }
        for (d, ax) in axes.iter().enumerate() {
            if !(ax.lo < ax.hi) || !ax.lo.is_finite() || !ax.hi.is_finite() {
                return Err(FloralError::Grid(format!(
                    "axis {d}: need finite lo < hi, got [{}, {}]",
                    ax.lo, ax.hi
                )));
            }
        }
        Ok(Self { axes })
    }

    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.axes.iter().map(|a| (a.lo, a.hi)).collect()
    }

    pub fn periodic_flags(&self) -> Vec<bool> {
        self.axes.iter().map(Axis::is_periodic).collect()
    }

    /// Sub-domain formed by the leading `k` axes.
    pub fn leading(&self, k: usize) -> Result<Self> {
        Self::new(self.axes[..k.min(self.axes.len())].to_vec())
    }
}

/// Per-axis coordinate arrays for a grid of `shape` on `domain`.
pub fn uniform_grid(domain: &Domain, shape: &[usize]) -> Result<Vec<Vec<f64>>> {
    check_shape(domain, shape)?;
    domain.axes.iter().zip(shape).map(|(ax, &n)| ax.points(n)).collect()
}

pub(crate) fn check_shape(domain: &Domain, shape: &[usize]) -> Result<()> {
    if shape.len() != domain.ndim() {
        return Err(FloralError::Grid(format!(
            "shape has {} axes but domain has {}",
            shape.len(),
            domain.ndim()
        )));
    }
    if let Some(n) = shape.iter().find(|&&n| n < 2) {
        return Err(FloralError::Grid(format!("axis needs at least 2 points, got {n}")));
    }
    Ok(())
}

/// A real, possibly multi-channel field sampled on a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub domain: Domain,
    pub shape: Vec<usize>,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(domain: Domain, shape: Vec<usize>, channels: usize, values: Vec<f64>) -> Result<Self> {
        check_shape(&domain, &shape)?;
        if channels == 0 {
            return Err(FloralError::Grid("channels must be positive".into()));
        }
        let expected = channels * shape.iter().product::<usize>();
        if values.len() != expected {
            return Err(FloralError::Shape(format!(
                "expected {expected} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FloralError::Grid("field contains non-finite values".into()));
        }
        Ok(Self { domain, shape, channels, values })
    }

    pub fn zeros(domain: Domain, shape: Vec<usize>, channels: usize) -> Result<Self> {
        let n = channels * shape.iter().product::<usize>();
        Self::new(domain, shape, channels, vec![0.0; n])
    }

    pub fn constant(domain: Domain, shape: Vec<usize>, channels: usize, c: f64) -> Result<Self> {
        let n = channels * shape.iter().product::<usize>();
        Self::new(domain, shape, channels, vec![c; n])
    }

    /// Single-channel field from a function of the point coordinates.
    pub fn from_fn(domain: Domain, shape: Vec<usize>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let coords = uniform_grid(&domain, &shape)?;
        let n: usize = shape.iter().product();
        let mut values = Vec::with_capacity(n);
        let mut x = vec![0.0; shape.len()];
        for flat in 0..n {
            let mut rem = flat;
            for d in (0..shape.len()).rev() {
                x[d] = coords[d][rem % shape[d]];
                rem /= shape[d];
            }
            values.push(f(&x));
        }
        Self::new(domain, shape, 1, values)
    }

    pub fn n_points(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.n_points();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.n_points();
        &mut self.values[c * n..(c + 1) * n]
    }

    /// Same domain and shape, any channel counts.
    pub fn same_grid_points(&self, other: &GridFunction) -> bool {
        self.domain == other.domain && self.shape == other.shape
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        self.domain == other.domain && self.shape == other.shape && self.channels == other.channels
    }

    fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(FloralError::Shape(format!(
                "grid mismatch: {:?}x{} vs {:?}x{}",
                self.shape, self.channels, other.shape, other.channels
            )));
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { values, ..self.clone() })
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { values: self.values.iter().map(|&v| f(v)).collect(), ..self.clone() }
    }

    /// Root-mean-square over all channels and grid points.
    pub fn mean_square_norm(&self) -> f64 {
        mean_square_norm(&self.values)
    }

    /// Spatial mean of each channel.
    pub fn channel_means(&self) -> Vec<f64> {
        (0..self.channels)
            .map(|c| {
                let ch = self.channel(c);
                ch.iter().sum::<f64>() / ch.len() as f64
            })
            .collect()
    }

    /// Repeats this field along trailing axes so it lives on `domain` with `shape`.
    ///
    /// The axes of `self` must equal the leading axes of `domain`.
    pub fn broadcast_to(&self, domain: &Domain, shape: &[usize]) -> Result<Self> {
        let k = self.domain.ndim();
        if domain.ndim() < k || domain.axes[..k] != self.domain.axes[..] || shape[..k] != self.shape[..] {
            return Err(FloralError::Shape(format!(
                "cannot broadcast {:?} onto {:?}",
                self.shape, shape
            )));
        }
        let rep: usize = shape[k..].iter().product();
        let n = self.n_points();
        let mut values = Vec::with_capacity(self.channels * n * rep);
        for c in 0..self.channels {
            for &v in self.channel(c) {
                values.extend(std::iter::repeat_n(v, rep));
            }
        }
        Self::new(domain.clone(), shape.to_vec(), self.channels, values)
    }
}

/// `sqrt(mean(v^2))`; zero for an empty slice.
pub fn mean_square_norm(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}
