use serde::Serialize;
use uav_urllc::optimizer::{successive_maximization, SolveOutcome, SolveStatus};
use uav_urllc::sim::{
    slot_instance, sweep, trial_scenario, RunReport, Strategy, SweepAxis, SweepResult, TrafficTable, TrialRecord,
};
use uav_urllc::traffic::{ingest_series, rolling_forecast, Forecast, IngestOptions};

use crate::config::RunConfig;
use crate::output::OutputDir;
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct PredictRow {
    /// Dataset row of the predicted value (0-based, usable rows only).
    pub slot: usize,
    pub observed: f64,
    pub predicted_mean: f64,
    pub predicted_variance: f64,
    pub squared_error: f64,
    pub timestamp: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictSummary {
    pub rows: usize,
    pub mse: f64,
    pub window: usize,
    pub refit_period: usize,
    pub refits: usize,
    pub rejected_rows: usize,
    pub forecast: Forecast,
}

/// Rolling one-step forecast over `predict.slots` rows after a warm-up of
/// `traffic.window` rows starting at `predict.offset`. The series is
/// normalized over the whole dataset, as in the simulations.
pub fn predict(config: &RunConfig, out: &mut OutputDir) -> Result<PredictSummary, CliError> {
    let t = &config.traffic;
    let series = ingest_series(&t.dataset, &IngestOptions { min_rows: t.window + 1, ..t.ingest_options() })?;
    for row in &series.rejected_examples {
        log::warn!("dataset row {row}: missing or non-numeric {}", t.value_column);
    }
    let start = config.predict.offset;
    let end = start + t.window + config.predict.slots;
    if end > series.values.len() {
        return Err(CliError::Dataset(format!(
            "{} usable rows; offset {start} + window {} + {} slots needs {end}",
            series.values.len(),
            t.window,
            config.predict.slots
        )));
    }
    let forecast = rolling_forecast(&series.values[start..end], t.window, t.refit_period)?;
    let rows: Vec<PredictRow> = (0..forecast.len())
        .map(|k| {
            let row = start + t.window + k;
            PredictRow {
                slot: row,
                observed: forecast.actual[k],
                predicted_mean: forecast.mean[k],
                predicted_variance: forecast.variance[k],
                squared_error: (forecast.mean[k] - forecast.actual[k]).powi(2),
                timestamp: series.timestamps[row].clone(),
            }
        })
        .collect();
    let summary = PredictSummary {
        rows: rows.len(),
        mse: forecast.mse(),
        window: t.window,
        refit_period: t.refit_period,
        refits: forecast.fits.len(),
        rejected_rows: series.rejected_rows,
        forecast,
    };
    out.write_csv("predict.csv", &rows)?;
    out.write_json("predict.json", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
struct AllocationRow {
    user: usize,
    rb: usize,
    power_w: f64,
}

#[derive(Debug, Clone, Serialize)]
struct UserRow {
    user: usize,
    x: f64,
    y: f64,
    predicted_packets: f64,
    rate_bps: f64,
    slack_bps: f64,
}

/// Solves the first evaluated slot of trial 0's scenario.
///
/// Writes the outcome even when the instance is infeasible, then reports the
/// largest reliability shortfall as the error.
pub fn solve(config: &RunConfig, out: &mut OutputDir) -> Result<SolveOutcome, CliError> {
    let scenario_cfg = config.scenario_config();
    let mut table = TrafficTable::load(&config.traffic, 1)?;
    table.ensure_users(scenario_cfg.num_users)?;
    let scenario = trial_scenario(&scenario_cfg, config.master_seed, 0)?;
    let instance = slot_instance(&scenario, &table, 0)?;
    let outcome = successive_maximization(&instance, &config.solver)?;
    outcome
        .allocation
        .check(&instance, 1e-9)
        .map_err(|e| CliError::Other(format!("solver returned an invalid allocation: {e}")))?;

    let alloc = &outcome.allocation;
    let assigned: Vec<AllocationRow> = (0..instance.num_users())
        .flat_map(|u| (0..instance.num_rbs).map(move |b| (u, b)))
        .filter(|&(u, b)| alloc.assign[(u, b)] > 0.0)
        .map(|(u, b)| AllocationRow { user: u, rb: b, power_w: alloc.power[(u, b)] })
        .collect();
    let users: Vec<UserRow> = (0..instance.num_users())
        .map(|u| UserRow {
            user: u,
            x: instance.users[u].x,
            y: instance.users[u].y,
            predicted_packets: instance.predicted_loads[u],
            rate_bps: outcome.per_user_rate[u],
            slack_bps: outcome.reliability_slack[u],
        })
        .collect();
    out.write_csv("solve_trace.csv", &outcome.trace)?;
    out.write_csv("solve_allocation.csv", &assigned)?;
    out.write_csv("solve_users.csv", &users)?;
    #[derive(Serialize)]
    struct Solved<'a> {
        instance: &'a uav_urllc::optimizer::ProblemInstance,
        outcome: &'a SolveOutcome,
    }
    out.write_json("solve.json", &Solved { instance: &instance, outcome: &outcome })?;

    if outcome.status == SolveStatus::Infeasible {
        let (user, slack) = outcome
            .reliability_slack
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (u, s)| if s < best.1 { (u, s) } else { best });
        return Err(CliError::Infeasible(format!(
            "user {user} falls {:.4e} bit/s short of its reliability target (max slack violation)",
            -slack
        )));
    }
    Ok(outcome)
}

/// One line of a per-strategy series file.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesRow {
    pub strategy: Strategy,
    pub value: f64,
    pub trials: usize,
    pub feasible_trials: usize,
    pub failures: usize,
    pub energy_j_mean: f64,
    pub energy_j_std: f64,
    pub sum_rate_bps_mean: f64,
    pub sum_rate_bps_std: f64,
    pub per_user_rate_bps_mean: f64,
    pub per_user_rate_bps_std: f64,
    pub objective_mean: f64,
    pub objective_std: f64,
    pub violation_freq_mean: f64,
    pub violation_freq_std: f64,
    pub predictor_mse_mean: f64,
    pub iterations_mean: f64,
    pub converged_fraction: f64,
}

impl SeriesRow {
    fn new(value: f64, failures: usize, r: &RunReport) -> Self {
        Self {
            strategy: r.strategy,
            value,
            trials: r.trials,
            feasible_trials: r.feasible_trials,
            failures,
            energy_j_mean: r.energy_j.mean,
            energy_j_std: r.energy_j.std,
            sum_rate_bps_mean: r.sum_rate_bps.mean,
            sum_rate_bps_std: r.sum_rate_bps.std,
            per_user_rate_bps_mean: r.per_user_rate_bps.mean,
            per_user_rate_bps_std: r.per_user_rate_bps.std,
            objective_mean: r.objective.mean,
            objective_std: r.objective.std,
            violation_freq_mean: r.violation_freq.mean,
            violation_freq_std: r.violation_freq.std,
            predictor_mse_mean: r.predictor_mse.mean,
            iterations_mean: r.iterations.mean,
            converged_fraction: r.converged_fraction,
        }
    }
}

type Metric = fn(&RunReport) -> (f64, f64);

const PLOTTED: [(&str, Metric); 5] = [
    ("energy_j", |r| (r.energy_j.mean, r.energy_j.std)),
    ("sum_rate_bps", |r| (r.sum_rate_bps.mean, r.sum_rate_bps.std)),
    ("per_user_rate_bps", |r| (r.per_user_rate_bps.mean, r.per_user_rate_bps.std)),
    ("objective", |r| (r.objective.mean, r.objective.std)),
    ("violation_freq", |r| (r.violation_freq.mean, r.violation_freq.std)),
];

fn table_for(config: &RunConfig, users: usize, horizon: usize) -> Result<TrafficTable, CliError> {
    let mut table = TrafficTable::load(&config.traffic, horizon)?;
    table.ensure_users(users)?;
    Ok(table)
}

fn run_sweep(config: &RunConfig, axis: SweepAxis, values: &[f64]) -> Result<SweepResult, CliError> {
    let base = config.scenario_config();
    // Reject bad axis values before the forecasts are built.
    let configs = values.iter().map(|&v| axis.apply(&base, v)).collect::<uav_urllc::Result<Vec<_>>>()?;
    let users = configs.iter().map(|c| c.num_users).max().unwrap_or(base.num_users);
    let table = table_for(config, users, base.horizon)?;
    let s = &config.sweep;
    Ok(sweep(axis, values, &base, &config.solver, &table, s.trials, config.master_seed, &s.strategies)?)
}

/// Sweeps `sweep.axis` over `sweep.values` and writes one series file per
/// strategy, per-slot records per axis value, plot columns and a JSON mirror.
pub fn sweep_cmd(config: &RunConfig, out: &mut OutputDir) -> Result<SweepResult, CliError> {
    let axis = config.sweep.axis;
    let result = run_sweep(config, axis, &config.sweep.values)?;
    for &strategy in &result.strategies {
        let rows: Vec<SeriesRow> = result
            .points
            .iter()
            .filter_map(|p| p.report(strategy).map(|r| SeriesRow::new(p.value, p.failures.len(), r)))
            .collect();
        out.write_csv(&format!("sweep_{axis}_{strategy}.csv"), &rows)?;
        for (name, metric) in PLOTTED {
            let series = result.series(strategy, metric);
            let means: Vec<(f64, f64)> = series.iter().map(|&(x, (m, _))| (x, m)).collect();
            let stds: Vec<(f64, f64)> = series.iter().map(|&(x, (_, s))| (x, s)).collect();
            out.write_columns(&format!("plot/{axis}_{name}_{strategy}_mean.dat"), [axis.as_str(), "mean"], &means)?;
            out.write_columns(&format!("plot/{axis}_{name}_{strategy}_std.dat"), [axis.as_str(), "std"], &stds)?;
        }
    }
    for (i, p) in result.points.iter().enumerate() {
        out.write_csv(&format!("slots_{axis}_{i}.csv"), &p.slots)?;
    }
    out.write_json(&format!("sweep_{axis}.json"), &result)?;
    Ok(result)
}

/// Paired difference `reference - other` of one metric over shared trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedDiff {
    pub reference: Strategy,
    pub other: Strategy,
    pub metric: String,
    pub trials: usize,
    pub mean: f64,
    pub std: f64,
    /// 95% normal-approximation interval of the mean.
    pub ci_low: f64,
    pub ci_high: f64,
    /// Trials with a difference of at least zero.
    pub reference_wins: usize,
}

impl PairedDiff {
    pub fn of(reference: Strategy, other: Strategy, metric: &str, diffs: &[f64]) -> Self {
        let n = diffs.len();
        let s = uav_urllc::sim::Stat::of(diffs);
        let half = if n > 1 { 1.959_963_984_540_054 * s.std / (n as f64).sqrt() } else { 0.0 };
        Self {
            reference,
            other,
            metric: metric.to_string(),
            trials: n,
            mean: s.mean,
            std: s.std,
            ci_low: s.mean - half,
            ci_high: s.mean + half,
            reference_wins: diffs.iter().filter(|d| **d >= 0.0).count(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub reports: Vec<RunReport>,
    pub paired: Vec<PairedDiff>,
    pub failures: Vec<String>,
}

type Compared = (&'static str, fn(&TrialRecord) -> f64);

const COMPARED: [Compared; 4] = [
    ("objective", |r| r.objective),
    ("energy_j", |r| r.energy_j),
    ("per_user_rate_bps", |r| r.per_user_rate_bps),
    ("violation_freq", |r| r.violation_freq),
];

/// Every strategy on the same trials at the configured scenario, with paired
/// differences against the first strategy.
pub fn compare(config: &RunConfig, out: &mut OutputDir) -> Result<Comparison, CliError> {
    let result = run_sweep(config, SweepAxis::OutageEps, &[config.scenario.outage_eps])?;
    let point = result.points.into_iter().next().expect("one value");
    let reference = result.strategies[0];
    let reference_report = point.report(reference).expect("reference strategy ran");
    let mut paired = Vec::new();
    for other in &point.reports[1..] {
        for (name, metric) in COMPARED {
            let diffs: Vec<f64> = reference_report
                .records
                .iter()
                .filter_map(|a| other.records.iter().find(|b| b.trial == a.trial).map(|b| metric(a) - metric(b)))
                .collect();
            paired.push(PairedDiff::of(reference, other.strategy, name, &diffs));
        }
    }
    let summary: Vec<SeriesRow> =
        point.reports.iter().map(|r| SeriesRow::new(point.value, point.failures.len(), r)).collect();
    out.write_csv("compare_summary.csv", &summary)?;
    out.write_csv("compare_paired.csv", &paired)?;
    out.write_csv("compare_slots.csv", &point.slots)?;
    let comparison = Comparison { reports: point.reports, paired, failures: point.failures };
    out.write_json("compare.json", &comparison)?;
    Ok(comparison)
}
