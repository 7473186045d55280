use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::report::{SlotRecord, TrialRecord};
use super::{derive_seed, stream, trial_scenario, Scenario, ScenarioConfig, Strategy, TrafficTable};
use crate::channel::{sample_fading, Position2D};
use crate::error::{Error, Result};
use crate::optimizer::{
    solve_at_position, successive_maximization, Allocation, Evaluator, ProblemInstance, SolveOutcome, SolveStatus,
    SolverConfig,
};

/// `P_max / B` on every RB the proposed solution assigns, same position.
pub fn baseline_max_power(instance: &ProblemInstance, config: &SolverConfig) -> Result<Allocation> {
    let out = successive_maximization(instance, config)?;
    Ok(max_power_from(instance, &out.allocation))
}

/// Replaces the power of `alloc` by the uniform split `P_max / B` on its assigned RBs.
pub fn max_power_from(instance: &ProblemInstance, alloc: &Allocation) -> Allocation {
    let level = instance.total_power / instance.num_rbs as f64;
    Allocation { power: alloc.assign.map(|a| if a > 0.0 { level } else { 0.0 }), ..alloc.clone() }
}

/// Assignment and power optimized with the UAV at a uniformly drawn position.
pub fn baseline_random_placement<R: Rng + ?Sized>(
    instance: &ProblemInstance,
    config: &SolverConfig,
    rng: &mut R,
) -> Result<SolveOutcome> {
    let c = instance.coverage;
    let pos = Position2D::new(sample_range(rng, c.x_min, c.x_max), sample_range(rng, c.y_min, c.y_max));
    solve_at_position(instance, pos, config)
}

fn sample_range<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Planning instance of evaluated slot `slot`: expected gains and the
/// forecast loads inflated by `kappa` standard deviations.
pub fn slot_instance(scenario: &Scenario, table: &TrafficTable, slot: usize) -> Result<ProblemInstance> {
    let cfg = &scenario.config;
    let traffic = table.config();
    let expected = (0..scenario.num_users())
        .map(|u| Ok(table.slot_load(u, slot)?.expected_packets(traffic.max_arrivals, traffic.kappa)))
        .collect::<Result<Vec<_>>>()?;
    let instance = ProblemInstance::expected(
        scenario.users.clone(),
        cfg.channel,
        cfg.num_rbs,
        cfg.total_power,
        cfg.packet_size,
        cfg.outage_eps,
        expected,
        cfg.coverage(),
        scenario.altitude,
        cfg.tradeoff_zeta,
    );
    instance.validate()?;
    Ok(instance)
}

/// One strategy's result in one slot.
#[derive(Debug, Clone)]
pub struct SlotOutcome {
    pub record: SlotRecord,
    pub allocation: Allocation,
    /// Outer iterations of the solve behind this allocation.
    pub iterations: usize,
    pub converged: bool,
}

/// Plans slot `slot` on expected gains for each strategy and evaluates the
/// allocations on one shared fading draw.
///
/// Loads are the table's forecasts; the reliability check uses the actual
/// load. The max-power baseline reuses the proposed solve.
pub fn run_slot(
    scenario: &Scenario,
    table: &TrafficTable,
    trial: usize,
    slot: usize,
    strategies: &[Strategy],
    solver: &SolverConfig,
) -> Result<Vec<SlotOutcome>> {
    let cfg = &scenario.config;
    let traffic = table.config();
    let u_count = scenario.num_users();
    let loads = (0..u_count).map(|u| table.slot_load(u, slot)).collect::<Result<Vec<_>>>()?;
    let instance = slot_instance(scenario, table, slot)?;

    let mut fading_rng = ChaCha8Rng::seed_from_u64(derive_seed(scenario.seed, &[stream::FADING, slot as u64]));
    let mut realized = instance.clone();
    realized.fading = DMatrix::zeros(u_count, cfg.num_rbs);
    for u in 0..u_count {
        for b in 0..cfg.num_rbs {
            realized.fading[(u, b)] = sample_fading(&cfg.channel, &mut fading_rng).power();
        }
    }
    let judge = Evaluator::new(&realized)?;
    let demand: Vec<f64> =
        loads.iter().map(|l| 8.0 * cfg.packet_size * l.actual_packets(traffic.max_arrivals)).collect();

    let needs_proposed = strategies.iter().any(|s| matches!(s, Strategy::Proposed | Strategy::MaxPower));
    let proposed = if needs_proposed { Some(successive_maximization(&instance, solver)?) } else { None };

    let mut out = Vec::with_capacity(strategies.len());
    for &strategy in strategies {
        let (allocation, iterations, status) = match strategy {
            Strategy::Proposed => {
                let p = proposed.as_ref().expect("solved above");
                (p.allocation.clone(), p.iterations, p.status)
            }
            Strategy::MaxPower => {
                let p = proposed.as_ref().expect("solved above");
                (max_power_from(&instance, &p.allocation), p.iterations, p.status)
            }
            Strategy::Random => {
                let seed = derive_seed(scenario.seed, &[stream::PLACEMENT, slot as u64]);
                let r = baseline_random_placement(&instance, solver, &mut ChaCha8Rng::seed_from_u64(seed))?;
                (r.allocation, r.iterations, r.status)
            }
        };
        let rates = judge.user_rates(&allocation);
        let radiated = allocation.radiated_power();
        let sum_rate: f64 = rates.iter().sum();
        let record = SlotRecord {
            trial,
            slot,
            strategy,
            objective: sum_rate - cfg.tradeoff_zeta * radiated,
            energy_j: radiated * cfg.slot_duration,
            sum_rate_bps: sum_rate,
            min_user_rate_bps: rates.iter().copied().fold(f64::INFINITY, f64::min),
            violations: rates.iter().zip(&demand).filter(|(r, d)| *r < *d).count(),
            infeasible_flag: status == SolveStatus::Infeasible,
        };
        out.push(SlotOutcome { record, allocation, iterations, converged: status == SolveStatus::Converged });
    }
    Ok(out)
}

/// Runs the horizon of one trial: draws the scenario from `(master, trial)`,
/// then every slot. Returns one record per strategy (in `strategies` order)
/// and all slot records.
pub fn run_trial(
    config: &ScenarioConfig,
    solver: &SolverConfig,
    table: &TrafficTable,
    master_seed: u64,
    trial: usize,
    strategies: &[Strategy],
) -> Result<(Vec<TrialRecord>, Vec<SlotRecord>)> {
    if config.horizon > table.horizon() {
        return Err(Error::invalid(format!(
            "horizon {} exceeds the traffic table's {}",
            config.horizon,
            table.horizon()
        )));
    }
    if config.num_users > table.users() {
        return Err(Error::invalid(format!(
            "traffic table holds {} users, {} needed",
            table.users(),
            config.num_users
        )));
    }
    let scenario = trial_scenario(config, master_seed, trial)?;
    let u_count = scenario.num_users();

    let mut slots = Vec::with_capacity(config.horizon * strategies.len());
    let mut sq_err = 0.0;
    for slot in 0..config.horizon {
        for u in 0..u_count {
            let l = table.slot_load(u, slot)?;
            sq_err += (l.predicted_mean - l.actual).powi(2);
        }
        slots.push(run_slot(&scenario, table, trial, slot, strategies, solver)?);
    }
    let predictor_mse = sq_err / (u_count * config.horizon) as f64;

    let horizon = config.horizon as f64;
    let records = strategies
        .iter()
        .enumerate()
        .map(|(k, &strategy)| {
            let mine: Vec<&SlotOutcome> = slots.iter().map(|s| &s[k]).collect();
            let sum = |f: fn(&SlotRecord) -> f64| mine.iter().map(|o| f(&o.record)).sum::<f64>();
            let sum_rate = sum(|r| r.sum_rate_bps) / horizon;
            TrialRecord {
                trial,
                strategy,
                slots: config.horizon,
                energy_j: sum(|r| r.energy_j),
                sum_rate_bps: sum_rate,
                per_user_rate_bps: sum_rate / u_count as f64,
                objective: sum(|r| r.objective) / horizon,
                violation_freq: sum(|r| r.violations as f64) / (u_count as f64 * horizon),
                infeasible_slots: mine.iter().filter(|o| o.record.infeasible_flag).count(),
                predictor_mse,
                iterations: mine.iter().map(|o| o.iterations as f64).sum::<f64>() / horizon,
                converged_slots: mine.iter().filter(|o| o.converged).count(),
            }
        })
        .collect();
    let records_flat = slots.into_iter().flatten().map(|o| o.record).collect();
    Ok((records, records_flat))
}
