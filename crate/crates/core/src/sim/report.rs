use serde::{Deserialize, Serialize};

use super::Strategy;

/// Sample mean and standard deviation (`n - 1` denominator; 0 below two samples).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: 0.0, std: 0.0, count: 0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std =
            if n > 1 { (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
        Self { mean, std, count: n }
    }
}

/// One strategy in one slot of one trial. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub trial: usize,
    pub slot: usize,
    pub strategy: Strategy,
    /// Realized `sum r - zeta * sum a p`.
    pub objective: f64,
    pub energy_j: f64,
    pub sum_rate_bps: f64,
    pub min_user_rate_bps: f64,
    /// Users whose realized rate fell short of their actual load.
    pub violations: usize,
    pub infeasible_flag: bool,
}

/// One strategy over the horizon of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub strategy: Strategy,
    pub slots: usize,
    /// Summed over slots.
    pub energy_j: f64,
    /// Slot averages.
    pub sum_rate_bps: f64,
    pub per_user_rate_bps: f64,
    pub objective: f64,
    /// Violations over user-slots.
    pub violation_freq: f64,
    pub infeasible_slots: usize,
    pub predictor_mse: f64,
    /// Outer iterations per slot, averaged.
    pub iterations: f64,
    pub converged_slots: usize,
}

impl TrialRecord {
    pub fn feasible(&self) -> bool {
        self.infeasible_slots == 0
    }
}

/// Trial statistics of one strategy at one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub strategy: Strategy,
    pub trials: usize,
    pub feasible_trials: usize,
    pub energy_j: Stat,
    pub sum_rate_bps: Stat,
    pub per_user_rate_bps: Stat,
    pub objective: Stat,
    pub violation_freq: Stat,
    pub predictor_mse: Stat,
    pub iterations: Stat,
    /// Share of solved slots that met the stopping rule.
    pub converged_fraction: f64,
    pub records: Vec<TrialRecord>,
}

impl RunReport {
    pub fn from_trials(strategy: Strategy, records: Vec<TrialRecord>) -> Self {
        let col = |f: fn(&TrialRecord) -> f64| Stat::of(&records.iter().map(f).collect::<Vec<_>>());
        let slots: usize = records.iter().map(|r| r.slots).sum();
        let converged: usize = records.iter().map(|r| r.converged_slots).sum();
        Self {
            strategy,
            trials: records.len(),
            feasible_trials: records.iter().filter(|r| r.feasible()).count(),
            energy_j: col(|r| r.energy_j),
            sum_rate_bps: col(|r| r.sum_rate_bps),
            per_user_rate_bps: col(|r| r.per_user_rate_bps),
            objective: col(|r| r.objective),
            violation_freq: col(|r| r.violation_freq),
            predictor_mse: col(|r| r.predictor_mse),
            iterations: col(|r| r.iterations),
            converged_fraction: if slots > 0 { converged as f64 / slots as f64 } else { 0.0 },
            records,
        }
    }
}
