use serde::{Deserialize, Serialize};

use crate::error::{FloralError, Result};

/// A covariance depending only on the Euclidean distance between points.
pub trait StationaryKernel: Sync {
    fn cov(&self, r: f64) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Matern,
    /// `variance * exp(-r / lengthscale)`.
    ExponentialDarcy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Matérn smoothness; one of 0.5, 1.5, 2.5. Ignored by the Darcy kernel.
    pub nu: f64,
    pub lengthscale: f64,
    pub variance: f64,
}

impl KernelSpec {
    pub fn matern(nu: f64, lengthscale: f64, variance: f64) -> Self {
        Self { family: KernelFamily::Matern, nu, lengthscale, variance }
    }

    pub fn exponential(lengthscale: f64) -> Self {
        Self { family: KernelFamily::ExponentialDarcy, nu: 0.5, lengthscale, variance: 1.0 }
    }

    /// Near-white flow prior: Matérn 1/2, lengthscale 1e-3, unit variance.
    pub fn default_prior() -> Self {
        Self::matern(0.5, 1e-3, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lengthscale > 0.0) || !(self.variance > 0.0) {
            return Err(FloralError::Config(format!(
                "kernel needs positive lengthscale and variance, got {} and {}",
                self.lengthscale, self.variance
            )));
        }
        if self.family == KernelFamily::Matern
            && ![0.5, 1.5, 2.5].iter().any(|&v| (self.nu - v).abs() < 1e-12)
        {
            return Err(FloralError::Config(format!(
                "Matérn smoothness must be 0.5, 1.5 or 2.5, got {}",
                self.nu
            )));
        }
        Ok(())
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self::default_prior()
    }
}

impl StationaryKernel for KernelSpec {
    fn cov(&self, r: f64) -> f64 {
        let s = r / self.lengthscale;
        let shape = match self.family {
            KernelFamily::ExponentialDarcy => (-s).exp(),
            KernelFamily::Matern if self.nu < 1.0 => (-s).exp(),
            KernelFamily::Matern if self.nu < 2.0 => {
                let t = 3f64.sqrt() * s;
                (1.0 + t) * (-t).exp()
            }
            KernelFamily::Matern => {
                let t = 5f64.sqrt() * s;
                (1.0 + t + t * t / 3.0) * (-t).exp()
            }
        };
        self.variance * shape
    }
}
