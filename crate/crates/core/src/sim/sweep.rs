use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{RunReport, SlotRecord, TrialRecord};
use super::{run_trial, ScenarioConfig, Strategy, TrafficTable};
use crate::error::{Error, Result};
use crate::optimizer::SolverConfig;

/// Scenario parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    #[serde(rename = "eps", alias = "outage_eps")]
    OutageEps,
    #[serde(rename = "users", alias = "num_users")]
    NumUsers,
    /// Total bandwidth in MHz, realized as `round(value / w)` RBs.
    #[serde(rename = "bandwidth", alias = "total_bandwidth")]
    TotalBandwidth,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::OutageEps => "eps",
            SweepAxis::NumUsers => "users",
            SweepAxis::TotalBandwidth => "bandwidth",
        }
    }

    /// `base` with the axis set to `value`.
    pub fn apply(&self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut cfg = base.clone();
        match self {
            SweepAxis::OutageEps => cfg.outage_eps = value,
            SweepAxis::NumUsers => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::invalid(format!("user count must be a positive integer, got {value}")));
                }
                cfg.num_users = value as usize;
            }
            SweepAxis::TotalBandwidth => {
                let rbs = (value * 1e6 / cfg.channel.rb_bandwidth).round();
                if !(rbs >= 1.0) {
                    return Err(Error::invalid(format!("{value} MHz holds no resource block")));
                }
                cfg.num_rbs = rbs as usize;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eps" | "outage_eps" => Ok(SweepAxis::OutageEps),
            "users" | "num_users" => Ok(SweepAxis::NumUsers),
            "bandwidth" | "total_bandwidth" => Ok(SweepAxis::TotalBandwidth),
            _ => Err(Error::invalid(format!("unknown axis {s:?} (eps, users, bandwidth)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    /// One per strategy, in the sweep's strategy order.
    pub reports: Vec<RunReport>,
    pub slots: Vec<SlotRecord>,
    /// `trial: error` for trials that failed; the others still count.
    pub failures: Vec<String>,
}

impl SweepPoint {
    pub fn report(&self, strategy: Strategy) -> Option<&RunReport> {
        self.reports.iter().find(|r| r.strategy == strategy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub strategies: Vec<Strategy>,
    pub trials: usize,
    pub master_seed: u64,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// `(value, metric)` for one strategy along the axis.
    pub fn series<T>(&self, strategy: Strategy, metric: impl Fn(&RunReport) -> T) -> Vec<(f64, T)> {
        self.points.iter().filter_map(|p| p.report(strategy).map(|r| (p.value, metric(r)))).collect()
    }
}

/// Monte Carlo trials of every strategy at every axis value.
///
/// Trial `k` draws its scenario, fading and random placements from
/// `(master_seed, k)` alone, so every axis value sees the same draws and the
/// series are paired. Trials run on the current rayon pool; the result does
/// not depend on the pool size.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    axis: SweepAxis,
    values: &[f64],
    base: &ScenarioConfig,
    solver: &SolverConfig,
    table: &TrafficTable,
    trials: usize,
    master_seed: u64,
    strategies: &[Strategy],
) -> Result<SweepResult> {
    if values.is_empty() || trials == 0 || strategies.is_empty() {
        return Err(Error::invalid("a sweep needs values, at least one trial and a strategy"));
    }
    let rising = values.windows(2).all(|w| w[0] <= w[1]);
    let falling = values.windows(2).all(|w| w[0] >= w[1]);
    if !(rising || falling) {
        return Err(Error::invalid("sweep values must be monotone"));
    }
    solver.validate()?;
    let configs = values.iter().map(|&v| axis.apply(base, v)).collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = (0..configs.len()).flat_map(|i| (0..trials).map(move |t| (i, t))).collect();
    let results: Vec<Result<(Vec<TrialRecord>, Vec<SlotRecord>)>> =
        jobs.par_iter().map(|&(i, t)| run_trial(&configs[i], solver, table, master_seed, t, strategies)).collect();

    let mut results = results.into_iter();
    let points = values
        .iter()
        .map(|&value| {
            let mut per_strategy: Vec<Vec<TrialRecord>> = vec![Vec::new(); strategies.len()];
            let mut slots = Vec::new();
            let mut failures = Vec::new();
            for t in 0..trials {
                match results.next().expect("one result per job") {
                    Ok((records, s)) => {
                        for (k, r) in records.into_iter().enumerate() {
                            per_strategy[k].push(r);
                        }
                        slots.extend(s);
                    }
                    Err(e) => {
                        log::warn!("{axis} = {value}, trial {t}: {e}");
                        failures.push(format!("{t}: {e}"));
                    }
                }
            }
            let reports = strategies.iter().zip(per_strategy).map(|(&s, r)| RunReport::from_trials(s, r)).collect();
            SweepPoint { value, reports, slots, failures }
        })
        .collect();
    Ok(SweepResult { axis, strategies: strategies.to_vec(), trials, master_seed, points })
}
