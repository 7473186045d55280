//! Online URLLC load prediction.
//!
//! Each user's normalized load is modeled as a zero-mean Gaussian process
//! over slot indices with a periodic covariance. The predictor keeps a
//! sliding window of the last `N` observations and produces the posterior
//! mean and variance for the next slot.

mod fit;
mod forecast;
mod gp;
mod ingest;
mod toeplitz;

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fit::{fit_hyperparams, FitGrid, KernelFit};
pub use forecast::{rolling_forecast, Forecast};
pub use gp::{build_gram, gp_posterior, log_marginal_likelihood, predict_next, GpPredictor};
pub use ingest::{ingest_reader, ingest_series, split_warmup, IngestOptions, LoadSeries};
pub use toeplitz::toeplitz_log_marginal_likelihood;

/// Hyperparameters of the periodic covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Length-scale; larger values flatten the covariance.
    pub theta1: f64,
    /// Period in slots.
    pub theta2: f64,
    /// Observation noise variance added to the Gram diagonal.
    pub noise_var: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self { theta1: 1.0, theta2: 150.0, noise_var: 1e-4 }
    }
}

impl KernelParams {
    pub fn new(theta1: f64, theta2: f64, noise_var: f64) -> Result<Self> {
        let p = Self { theta1, theta2, noise_var };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta1 > 0.0 && self.theta1.is_finite()) {
            return Err(Error::invalid(format!("theta1 must be positive, got {}", self.theta1)));
        }
        if !(self.theta2 > 0.0 && self.theta2.is_finite()) {
            return Err(Error::invalid(format!("theta2 must be positive, got {}", self.theta2)));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(Error::invalid(format!("noise_var must be >= 0, got {}", self.noise_var)));
        }
        Ok(())
    }
}

/// `exp(-sin^2(pi (a - b) / theta2) / theta1)`.
pub fn periodic_kernel(a: f64, b: f64, params: &KernelParams) -> f64 {
    let s = (PI * (a - b) / params.theta2).sin();
    (-s * s / params.theta1).exp()
}

/// Posterior summary for the next slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

impl Prediction {
    /// Mean inflated by `kappa` posterior standard deviations.
    pub fn upper(&self, kappa: f64) -> f64 {
        self.mean + kappa * self.variance.sqrt()
    }
}

/// The last `capacity` normalized loads, indexed by contiguous slots.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficWindow {
    values: VecDeque<f64>,
    first_slot: i64,
    capacity: usize,
}

impl TrafficWindow {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Window("capacity must be positive".into()));
        }
        Ok(Self { values: VecDeque::with_capacity(capacity), first_slot: 0, capacity })
    }

    /// Builds a window holding the tail of `values`, the last one at slot `last_slot`.
    pub fn from_history(capacity: usize, values: &[f64], last_slot: i64) -> Result<Self> {
        let mut w = Self::new(capacity)?;
        let keep = values.len().min(capacity);
        let start = last_slot - values.len() as i64 + 1;
        for (i, &v) in values.iter().enumerate().skip(values.len() - keep) {
            w.push(v, start + i as i64)?;
        }
        Ok(w)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.values.len() == self.capacity
    }

    /// Slot index of the newest observation.
    pub fn last_slot(&self) -> Option<i64> {
        (!self.is_empty()).then(|| self.first_slot + self.values.len() as i64 - 1)
    }

    pub fn first_slot(&self) -> Option<i64> {
        (!self.is_empty()).then_some(self.first_slot)
    }

    pub fn values(&self) -> Vec<f64> {
        self.values.iter().copied().collect()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| (self.first_slot + i as i64) as f64).collect()
    }

    /// Appends the observation for `slot`, evicting the oldest one at capacity.
    pub fn push(&mut self, observed: f64, slot: i64) -> Result<()> {
        if !(0.0..=1.0).contains(&observed) {
            return Err(Error::Window(format!("load {observed} outside [0, 1]")));
        }
        match self.last_slot() {
            Some(last) if slot != last + 1 => {
                return Err(Error::Window(format!("slot {slot} does not follow last slot {last}")))
            }
            None => self.first_slot = slot,
            _ => {}
        }
        if self.values.len() == self.capacity {
            self.values.pop_front();
            self.first_slot += 1;
        }
        self.values.push_back(observed);
        Ok(())
    }

    /// Functional form of [`push`](Self::push).
    pub fn slide(mut self, observed: f64, slot: i64) -> Result<Self> {
        self.push(observed, slot)?;
        Ok(self)
    }
}
