use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{periodic_kernel, KernelParams, Prediction, TrafficWindow};
use crate::error::{Error, Result};

/// Gram matrix of the window's slot indices with the noise variance on the diagonal.
pub fn build_gram(window: &TrafficWindow, params: &KernelParams) -> Result<DMatrix<f64>> {
    if window.is_empty() {
        return Err(Error::Window("cannot build a Gram matrix from an empty window".into()));
    }
    Ok(gram(&window.times(), params))
}

pub(crate) fn gram(times: &[f64], params: &KernelParams) -> DMatrix<f64> {
    let n = times.len();
    DMatrix::from_fn(n, n, |i, j| {
        let k = periodic_kernel(times[i], times[j], params);
        if i == j {
            k + params.noise_var
        } else {
            k
        }
    })
}

fn factor(times: &[f64], params: &KernelParams) -> Result<Cholesky<f64, Dyn>> {
    let g = gram(times, params);
    let chol = Cholesky::new(g).ok_or_else(|| {
        Error::Factorization(format!(
            "n = {}, theta1 = {}, theta2 = {}, noise_var = {}",
            times.len(),
            params.theta1,
            params.theta2,
            params.noise_var
        ))
    })?;
    let min_pivot = chol.l_dirty().diagonal().min();
    if !(min_pivot > 0.0) {
        return Err(Error::Factorization(format!("smallest pivot {min_pivot}")));
    }
    Ok(chol)
}

/// Posterior mean and variance at `query` given observations `(times, values)`.
///
/// Zero prior mean; solves through a Cholesky factorization of the Gram matrix.
pub fn gp_posterior(times: &[f64], values: &[f64], query: f64, params: &KernelParams) -> Result<Prediction> {
    if times.len() != values.len() {
        return Err(Error::Window("times and values differ in length".into()));
    }
    if times.is_empty() {
        return Err(Error::Window("no observations".into()));
    }
    params.validate()?;
    let chol = factor(times, params)?;
    let k = DVector::from_iterator(times.len(), times.iter().map(|&t| periodic_kernel(query, t, params)));
    let w = chol.solve(&k);
    let y = DVector::from_column_slice(values);
    let mean = w.dot(&y);
    let variance = (periodic_kernel(query, query, params) - k.dot(&w)).max(0.0);
    Ok(Prediction { mean, variance })
}

/// Posterior for the slot right after the newest observation.
pub fn predict_next(window: &TrafficWindow, params: &KernelParams) -> Result<Prediction> {
    if window.len() < 2 {
        return Err(Error::Window(format!("prediction needs at least 2 observations, window holds {}", window.len())));
    }
    let query = window.last_slot().expect("non-empty") as f64 + 1.0;
    gp_posterior(&window.times(), &window.values(), query, params)
}

/// Exact log marginal likelihood `log p(y | times, params)` through Cholesky.
pub fn log_marginal_likelihood(times: &[f64], values: &[f64], params: &KernelParams) -> Result<f64> {
    let chol = factor(times, params)?;
    let y = DVector::from_column_slice(values);
    let alpha = chol.solve(&y);
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let n = values.len() as f64;
    Ok(-0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * n * (2.0 * PI).ln())
}

/// Next-slot predictor for full, contiguous windows.
///
/// The covariance is stationary and the window always covers consecutive
/// slots, so the posterior weights depend only on the window length and the
/// hyperparameters. They are cached until either changes.
#[derive(Debug, Clone)]
pub struct GpPredictor {
    params: KernelParams,
    cache: Option<(usize, DVector<f64>, f64)>,
}

impl GpPredictor {
    pub fn new(params: KernelParams) -> Self {
        Self { params, cache: None }
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn set_params(&mut self, params: KernelParams) {
        if params != self.params {
            self.params = params;
            self.cache = None;
        }
    }

    pub fn predict(&mut self, window: &TrafficWindow) -> Result<Prediction> {
        let n = window.len();
        if n < 2 {
            return Err(Error::Window(format!("prediction needs at least 2 observations, window holds {n}")));
        }
        let stale = self.cache.as_ref().is_none_or(|(len, _, _)| *len != n);
        if stale {
            let times: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let chol = factor(&times, &self.params)?;
            let k = DVector::from_iterator(n, times.iter().map(|&t| periodic_kernel(n as f64, t, &self.params)));
            let w = chol.solve(&k);
            let variance = (1.0 - k.dot(&w)).max(0.0);
            self.cache = Some((n, w, variance));
        }
        let (_, w, variance) = self.cache.as_ref().expect("filled above");
        let mean = window.values().iter().zip(w.iter()).map(|(y, w)| y * w).sum();
        Ok(Prediction { mean, variance: *variance })
    }
}
