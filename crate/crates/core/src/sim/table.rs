use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traffic::{ingest_series, rolling_forecast, Forecast, IngestOptions};

/// Where loads come from and how they become packet counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub dataset: PathBuf,
    pub time_column: String,
    pub value_column: String,
    /// `Lambda`: packets per slot at normalized load 1.
    pub max_arrivals: f64,
    /// `N`: predictor window, also the warm-up length.
    pub window: usize,
    /// Slots between hyperparameter refits.
    pub refit_period: usize,
    /// Standard deviations added to the predicted mean.
    pub kappa: f64,
    /// Start index distance between consecutive users' reads of the dataset.
    pub user_stride: usize,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("data/sp500.csv"),
            time_column: "Date".into(),
            value_column: "Close".into(),
            max_arrivals: 500.0,
            window: 600,
            refit_period: 50,
            kappa: 1.0,
            user_stride: 200,
        }
    }
}

impl TrafficConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("max_arrivals", self.max_arrivals >= 0.0 && self.max_arrivals.is_finite()),
            ("window", self.window >= 2),
            ("refit_period", self.refit_period >= 1),
            ("kappa", self.kappa >= 0.0 && self.kappa.is_finite()),
        ];
        for (name, ok) in checks {
            if !ok {
                return Err(Error::invalid(format!("traffic.{name} out of range")));
            }
        }
        Ok(())
    }

    pub fn ingest_options(&self) -> IngestOptions {
        IngestOptions {
            time_column: self.time_column.clone(),
            value_column: self.value_column.clone(),
            min_rows: self.window + 1,
            ..IngestOptions::default()
        }
    }
}

/// Normalized load of one user in one evaluated slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotLoad {
    pub predicted_mean: f64,
    pub predicted_variance: f64,
    pub actual: f64,
}

impl SlotLoad {
    /// `E[L]` fed to the reliability constraint, in packets.
    pub fn expected_packets(&self, max_arrivals: f64, kappa: f64) -> f64 {
        max_arrivals * (self.predicted_mean + kappa * self.predicted_variance.sqrt()).max(0.0)
    }

    pub fn actual_packets(&self, max_arrivals: f64) -> f64 {
        max_arrivals * self.actual
    }
}

/// Rolling forecasts of every user's trace over the evaluated horizon.
///
/// Forecasts only depend on the dataset and the user index, so one table
/// serves every trial and sweep point.
#[derive(Debug, Clone)]
pub struct TrafficTable {
    config: TrafficConfig,
    series: Vec<f64>,
    horizon: usize,
    forecasts: Vec<Forecast>,
}

impl TrafficTable {
    pub fn load(config: &TrafficConfig, horizon: usize) -> Result<Self> {
        config.validate()?;
        let series = ingest_series(&config.dataset, &config.ingest_options())?;
        if series.rejected_rows > 0 {
            log::warn!("{} dataset rows rejected (first at rows {:?})", series.rejected_rows, series.rejected_examples);
        }
        Self::from_series(config, series.values, horizon)
    }

    pub fn from_series(config: &TrafficConfig, series: Vec<f64>, horizon: usize) -> Result<Self> {
        config.validate()?;
        if horizon == 0 {
            return Err(Error::invalid("horizon must be at least one slot"));
        }
        if series.len() < config.window + horizon {
            return Err(Error::Dataset(format!(
                "{} usable rows; window {} plus horizon {horizon} needed",
                series.len(),
                config.window
            )));
        }
        Ok(Self { config: config.clone(), series, horizon, forecasts: Vec::new() })
    }

    pub fn config(&self) -> &TrafficConfig {
        &self.config
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn series(&self) -> &[f64] {
        &self.series
    }

    /// Users with a forecast ready.
    pub fn users(&self) -> usize {
        self.forecasts.len()
    }

    /// First dataset index of user `u`'s trace.
    pub fn offset(&self, user: usize) -> usize {
        let span = self.series.len() - self.config.window - self.horizon + 1;
        (user * self.config.user_stride) % span
    }

    /// Forecasts users up to `users`, building the missing ones in parallel.
    pub fn ensure_users(&mut self, users: usize) -> Result<()> {
        let have = self.forecasts.len();
        if users <= have {
            return Ok(());
        }
        let need = self.config.window + self.horizon;
        let built: Vec<Forecast> = (have..users)
            .into_par_iter()
            .map(|u| {
                let o = self.offset(u);
                rolling_forecast(&self.series[o..o + need], self.config.window, self.config.refit_period)
            })
            .collect::<Result<_>>()?;
        self.forecasts.extend(built);
        Ok(())
    }

    pub fn forecast(&self, user: usize) -> Option<&Forecast> {
        self.forecasts.get(user)
    }

    /// Load of `user` in evaluated slot `slot` (0-based after the warm-up).
    pub fn slot_load(&self, user: usize, slot: usize) -> Result<SlotLoad> {
        let f = self
            .forecasts
            .get(user)
            .ok_or_else(|| Error::invalid(format!("no forecast for user {user}; call ensure_users first")))?;
        if slot >= f.len() {
            return Err(Error::invalid(format!("slot {slot} beyond horizon {}", f.len())));
        }
        Ok(SlotLoad { predicted_mean: f.mean[slot], predicted_variance: f.variance[slot], actual: f.actual[slot] })
    }
}
