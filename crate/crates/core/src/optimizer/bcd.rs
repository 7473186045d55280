use std::io::Write;

use nalgebra::DMatrix;

use super::eval::{row_dot, Evaluator};
use super::feasibility::{self, centroid, greedy_assignment, slacks_of};
use super::position::{reposition_with_power, solve_position_with};
use super::power::{free_level_at, optimal_power, solve_power_with};
use super::rb::solve_rb_with;
use super::reassign::reassign;
use super::rounding::round_allocation;
use super::{Allocation, IterationRecord, ProblemInstance, SolveOutcome, SolveStatus, SolverConfig};
use crate::channel::{Position2D, Position3D};
use crate::error::Result;

/// Block coordinate ascent over assignment, power and position, then
/// threshold rounding and a final power pass at the binary assignment.
///
/// Starts from round-robin RBs, `P_max / B` per assigned RB and the user
/// centroid; if that start misses a rate target, from the optimal power at
/// the same assignment, and failing that from the feasibility-phase witness.
/// A block's update is kept only if the objective does not drop and the rate
/// targets still hold, so the trace is non-decreasing.
pub fn successive_maximization(instance: &ProblemInstance, config: &SolverConfig) -> Result<SolveOutcome> {
    config.validate()?;
    let eval = Evaluator::new(instance)?;
    Ok(run(&eval, config, None))
}

/// Same loop with the UAV pinned at `uav_pos` (clamped to the coverage
/// rectangle at the scenario altitude); only assignment and power move.
pub fn solve_at_position(
    instance: &ProblemInstance,
    uav_pos: Position2D,
    config: &SolverConfig,
) -> Result<SolveOutcome> {
    config.validate()?;
    let eval = Evaluator::new(instance)?;
    let pos = instance.coverage.clamp(uav_pos).at_altitude(instance.altitude);
    Ok(run(&eval, config, Some(pos)))
}

fn run(eval: &Evaluator<'_>, config: &SolverConfig, pinned: Option<Position3D>) -> SolveOutcome {
    let instance = eval.inst;
    if instance.num_users() == 0 {
        let mut allocation = Allocation::empty(instance);
        if let Some(p) = pinned {
            allocation.uav_pos = p;
        }
        let pos = allocation.uav_pos;
        return SolveOutcome {
            allocation,
            objective: 0.0,
            per_user_rate: Vec::new(),
            reliability_slack: Vec::new(),
            iterations: 1,
            objective_trace: vec![0.0],
            trace: vec![IterationRecord { iteration: 0, objective: 0.0, min_slack: f64::INFINITY, x: pos.x, y: pos.y }],
            status: SolveStatus::Converged,
        };
    }

    let tol = config.inner_tol;
    let mut state = initial(eval);
    if let Some(p) = pinned {
        state.uav_pos = p;
    }
    if min_of(&slacks_of(eval, &state)) < -tol {
        // Re-powering the round-robin start is usually enough.
        if let Some(power) = optimal_power(eval, &state.assign, &eval.gains(state.uav_pos)) {
            state.power = power;
        }
    }
    if min_of(&slacks_of(eval, &state)) < -tol {
        let phase = feasibility::run(eval, state.uav_pos, pinned.is_none());
        if phase.min_slack < -tol {
            log::debug!("feasibility phase max-min slack {}", phase.min_slack);
            return finish(eval, phase.witness, Vec::new(), Vec::new(), 0, SolveStatus::Infeasible);
        }
        state = phase.witness;
        // Spend any leftover budget before starting the ascent.
        let gains = eval.gains(state.uav_pos);
        let p = solve_power_with(eval, &state.assign, &gains, config);
        if p.feasible {
            let cand = Allocation { power: p.power, ..state.clone() };
            try_accept(eval, &mut state, cand, tol);
        }
    }

    let mut value = eval.objective(&state);
    let mut objective_trace = vec![value];
    let mut trace = vec![record(eval, 0, &state, value)];
    let mut status = SolveStatus::MaxIters;
    let mut iterations = 0;
    for it in 1..=config.max_bcd_iters {
        iterations = it;
        let gains = eval.gains(state.uav_pos);

        // Assignment step, with unassigned pairs carrying the power their RB
        // would get; this leaves the objective of the current point unchanged.
        // The rounded relaxation and the current assignment are each polished
        // by single-RB moves and re-powered.
        let shadow = shadow_power(&state, instance.total_power);
        let rb = solve_rb_with(eval, &shadow, &gains, config);
        for assign in [round_filled(&rb.assign, config.rounding_threshold), state.assign.clone()] {
            let assign = match free_level_at(eval, &assign, &gains) {
                Some(free) => reassign(eval, &assign, &gains, &shadow, free, 2 * instance.num_rbs),
                None => assign,
            };
            if let Some(power) = optimal_power(eval, &assign, &gains) {
                let cand = Allocation { assign, power, uav_pos: state.uav_pos };
                try_accept(eval, &mut state, cand, tol);
            }
        }
        zero_unassigned(&mut state);

        if pinned.is_none() {
            let pos = solve_position_with(eval, &state.assign, &state.power, state.uav_pos, config);
            let cand = Allocation { uav_pos: pos, ..state.clone() };
            try_accept(eval, &mut state, cand, tol);
            if let Some(cand) = reposition_with_power(eval, &state, REPOSITION_STEPS) {
                try_accept(eval, &mut state, cand, tol);
            }
        }

        let next = eval.objective(&state);
        let change = (next - value).abs() / value.abs().max(f64::MIN_POSITIVE);
        value = next;
        objective_trace.push(value);
        trace.push(record(eval, it, &state, value));
        if change <= config.bcd_tol {
            status = SolveStatus::Converged;
            break;
        }
    }

    let binary = round_and_repair(eval, &state, config);
    let status = if min_of(&slacks_of(eval, &binary)) < -tol { SolveStatus::Infeasible } else { status };
    finish(eval, binary, objective_trace, trace, iterations, status)
}

/// Gradient steps of the power-aware position move per outer iteration.
const REPOSITION_STEPS: usize = 8;

fn initial(eval: &Evaluator<'_>) -> Allocation {
    let inst = eval.inst;
    let (nu, nb) = (inst.num_users(), inst.num_rbs);
    let assign = DMatrix::from_fn(nu, nb, |u, b| if b % nu == u { 1.0 } else { 0.0 });
    let power = assign.map(|a| a * inst.total_power / nb as f64);
    Allocation { assign, power, uav_pos: centroid(inst) }
}

/// Replaces `state` by `cand` if it is no worse and keeps every rate target.
fn try_accept(eval: &Evaluator<'_>, state: &mut Allocation, cand: Allocation, tol: f64) -> bool {
    let before = eval.objective(state);
    let after = eval.objective(&cand);
    let budget_ok = cand.radiated_power() <= eval.inst.total_power * (1.0 + 1e-9);
    let reliable = min_of(&slacks_of(eval, &cand)) >= -tol;
    if budget_ok && reliable && after >= before {
        *state = cand;
        true
    } else {
        false
    }
}

fn shadow_power(state: &Allocation, p_max: f64) -> DMatrix<f64> {
    let (nu, nb) = state.assign.shape();
    let mut shadow = state.power.clone();
    for b in 0..nb {
        let weight: f64 = state.assign.column(b).sum();
        let level =
            if weight > 0.0 { state.assign.column(b).dot(&state.power.column(b)) / weight } else { p_max / nb as f64 };
        for u in 0..nu {
            if state.assign[(u, b)] <= 0.0 {
                shadow[(u, b)] = level;
            }
        }
    }
    shadow
}

fn zero_unassigned(state: &mut Allocation) {
    let a = state.assign.clone();
    state.power.zip_apply(&a, |p, a| {
        if a <= 0.0 {
            *p = 0.0;
        }
    });
}

/// Threshold rounding, then every RB left empty goes to its largest share.
fn round_filled(relaxed: &DMatrix<f64>, threshold: f64) -> DMatrix<f64> {
    let mut rounded = round_allocation(relaxed, threshold);
    for b in 0..rounded.ncols() {
        if rounded.column(b).sum() == 0.0 {
            let col = relaxed.column(b);
            let u = (0..col.len()).fold(0, |best, u| if col[u] > col[best] { u } else { best });
            if col[u] > 0.0 {
                rounded[(u, b)] = 1.0;
            }
        }
    }
    rounded
}

/// Threshold rounding, one power pass at the binary assignment, and if that
/// misses a rate target, the same pass after giving every leftover RB to its
/// strongest claimant, then after a greedy max-min assignment.
fn round_and_repair(eval: &Evaluator<'_>, relaxed: &Allocation, config: &SolverConfig) -> Allocation {
    let gains = eval.gains(relaxed.uav_pos);
    let at = |assign: DMatrix<f64>| {
        let p = solve_power_with(eval, &assign, &gains, config);
        (Allocation { assign, power: p.power, uav_pos: relaxed.uav_pos }, p.feasible)
    };
    let rounded = round_allocation(&relaxed.assign, config.rounding_threshold);
    let (first, ok) = at(rounded.clone());
    if ok {
        return first;
    }
    let mut candidates = vec![first];
    let mut filled = rounded;
    for b in 0..filled.ncols() {
        if filled.column(b).sum() == 0.0 {
            let col = relaxed.assign.column(b);
            let u = (0..col.len()).fold(0, |best, u| if col[u] > col[best] { u } else { best });
            if col[u] > 0.0 {
                filled[(u, b)] = 1.0;
            }
        }
    }
    let (second, ok) = at(filled);
    if ok {
        return second;
    }
    candidates.push(second);
    let (third, ok) = at(greedy_assignment(eval, &gains));
    if ok {
        return third;
    }
    candidates.push(third);
    candidates
        .into_iter()
        .max_by(|a, b| min_of(&slacks_of(eval, a)).total_cmp(&min_of(&slacks_of(eval, b))))
        .expect("three candidates")
}

fn finish(
    eval: &Evaluator<'_>,
    allocation: Allocation,
    objective_trace: Vec<f64>,
    trace: Vec<IterationRecord>,
    iterations: usize,
    status: SolveStatus,
) -> SolveOutcome {
    let gains = eval.gains(allocation.uav_pos);
    let per_user_rate = row_dot(&allocation.assign, &eval.pair_rates(&allocation.power, &gains));
    let reliability_slack = per_user_rate.iter().zip(eval.required()).map(|(r, q)| r - q).collect();
    SolveOutcome {
        objective: eval.objective(&allocation),
        allocation,
        per_user_rate,
        reliability_slack,
        iterations,
        objective_trace,
        trace,
        status,
    }
}

fn record(eval: &Evaluator<'_>, iteration: usize, state: &Allocation, objective: f64) -> IterationRecord {
    IterationRecord {
        iteration,
        objective,
        min_slack: min_of(&slacks_of(eval, state)),
        x: state.uav_pos.x,
        y: state.uav_pos.y,
    }
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

impl SolveOutcome {
    /// Writes one comma-separated line per outer iteration:
    /// `iteration,objective,min_slack,x,y`.
    pub fn write_trace<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.trace {
            w.serialize(r)?;
        }
        w.flush()
    }
}
