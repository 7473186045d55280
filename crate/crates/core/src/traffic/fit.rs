use serde::{Deserialize, Serialize};

use super::{toeplitz_log_marginal_likelihood, KernelParams, TrafficWindow};
use crate::error::{Error, Result};

/// Minimum number of observations a fit accepts.
pub const MIN_FIT_LEN: usize = 10;

/// Log-spaced candidate values for each hyperparameter.
#[derive(Debug, Clone, PartialEq)]
pub struct FitGrid {
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub noise_var: Vec<f64>,
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

impl FitGrid {
    /// 9 length-scales in [1e-2, 1e2], 12 periods in [2, 4n], 6 noise levels in [1e-6, 1e-1].
    ///
    /// Periods reach past the window span so the kernel can also act as a
    /// smooth non-periodic covariance without folding the next slot onto the
    /// oldest observation.
    pub fn standard(n: usize) -> Self {
        Self {
            theta1: log_space(1e-2, 1e2, 9),
            theta2: log_space(2.0, (4.0 * n as f64).max(2.0), 12),
            noise_var: log_space(1e-6, 1e-1, 6),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelFit {
    pub params: KernelParams,
    pub log_likelihood: f64,
    /// Window had no variation; `params` are the fallback defaults.
    pub degenerate: bool,
}

/// Grid search for the hyperparameters maximizing the exact log marginal likelihood.
///
/// Deterministic: ties keep the first candidate in (theta1, theta2, noise) order.
pub fn fit_hyperparams(window: &TrafficWindow) -> Result<KernelFit> {
    let n = window.len();
    if n < MIN_FIT_LEN {
        return Err(Error::Window(format!("fit needs at least {MIN_FIT_LEN} observations, got {n}")));
    }
    let values = window.values();
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi - lo <= 1e-12 {
        return Ok(KernelFit {
            params: KernelParams { theta1: 1.0, theta2: n as f64 / 4.0, noise_var: 1e-4 },
            log_likelihood: f64::NAN,
            degenerate: true,
        });
    }
    fit_on_grid(&values, &FitGrid::standard(n))
}

pub(crate) fn fit_on_grid(values: &[f64], grid: &FitGrid) -> Result<KernelFit> {
    let mut best: Option<KernelFit> = None;
    for &theta1 in &grid.theta1 {
        for &theta2 in &grid.theta2 {
            for &noise_var in &grid.noise_var {
                let params = KernelParams { theta1, theta2, noise_var };
                let Some(ll) = toeplitz_log_marginal_likelihood(values, &params) else {
                    continue;
                };
                if best.is_none_or(|b| ll > b.log_likelihood) {
                    best = Some(KernelFit { params, log_likelihood: ll, degenerate: false });
                }
            }
        }
    }
    best.ok_or_else(|| Error::Factorization("no grid point gave a positive definite Gram matrix".into()))
}
