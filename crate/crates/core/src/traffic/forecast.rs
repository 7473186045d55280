use serde::{Deserialize, Serialize};

use super::{fit_hyperparams, GpPredictor, KernelParams, TrafficWindow};
use crate::error::{Error, Result};

/// One-step-ahead predictions over an evaluation stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Observed load of each predicted slot.
    pub actual: Vec<f64>,
    /// Hyperparameters in force at each refit, in order.
    pub fits: Vec<KernelParams>,
}

impl Forecast {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn mse(&self) -> f64 {
        if self.mean.is_empty() {
            return 0.0;
        }
        let sum: f64 = self.mean.iter().zip(&self.actual).map(|(m, a)| (m - a).powi(2)).sum();
        sum / self.mean.len() as f64
    }
}

/// Rolling forecast: the first `window` values warm the predictor, then every
/// later value is predicted from the `window` values before it and pushed in.
/// Hyperparameters are refitted every `refit_period` predictions.
pub fn rolling_forecast(series: &[f64], window: usize, refit_period: usize) -> Result<Forecast> {
    if refit_period == 0 {
        return Err(Error::invalid("refit period must be positive"));
    }
    if series.len() <= window {
        return Err(Error::Window(format!(
            "series of {} values leaves nothing after a window of {window}",
            series.len()
        )));
    }
    let mut w = TrafficWindow::from_history(window, &series[..window], window as i64 - 1)?;
    let mut predictor = GpPredictor::new(KernelParams::default());
    let steps = series.len() - window;
    let mut out = Forecast {
        mean: Vec::with_capacity(steps),
        variance: Vec::with_capacity(steps),
        actual: Vec::with_capacity(steps),
        fits: Vec::new(),
    };
    for (k, &observed) in series[window..].iter().enumerate() {
        if k % refit_period == 0 {
            let fit = fit_hyperparams(&w)?;
            predictor.set_params(fit.params);
            out.fits.push(fit.params);
        }
        let p = predictor.predict(&w)?;
        out.mean.push(p.mean);
        out.variance.push(p.variance);
        out.actual.push(observed);
        w.push(observed, (window + k) as i64)?;
    }
    Ok(out)
}
