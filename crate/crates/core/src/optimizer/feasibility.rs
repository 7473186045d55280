use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::eval::{row_dot, Evaluator};
use super::position::{evaluate, projected_direction};
use super::power::WaterFill;
use super::{Allocation, ProblemInstance};
use crate::channel::{Position2D, Position3D};
use crate::error::Result;

/// Soft-min temperature on normalized slacks.
const TEMPERATURE: f64 = 1e-2;
const ROUNDS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityResult {
    /// Best minimum normalized slack `min_u (rate_u - R_u) / max(R_u, w)` found.
    pub min_slack: f64,
    pub witness: Allocation,
    pub feasible: bool,
}

/// Searches for an allocation maximizing the smallest reliability slack.
///
/// Alternates a greedy max-min RB assignment, max-min power by bisection and
/// soft-min ascent on the position. A negative result means no allocation
/// reachable by this search meets every rate target.
pub fn feasibility_phase(instance: &ProblemInstance) -> Result<FeasibilityResult> {
    let eval = Evaluator::new(instance)?;
    Ok(run(&eval, centroid(instance), true))
}

pub(crate) fn centroid(inst: &ProblemInstance) -> Position3D {
    let n = inst.users.len();
    let c = if n == 0 {
        inst.coverage.center()
    } else {
        let (sx, sy) = inst.users.iter().fold((0.0, 0.0), |(x, y), p| (x + p.x, y + p.y));
        Position2D::new(sx / n as f64, sy / n as f64)
    };
    inst.coverage.clamp(c).at_altitude(inst.altitude)
}

pub(crate) fn run(eval: &Evaluator<'_>, start: Position3D, move_uav: bool) -> FeasibilityResult {
    let inst = eval.inst;
    let mut pos = start;
    let mut best: Option<(f64, Allocation)> = None;
    for _ in 0..ROUNDS {
        let gains = eval.gains(pos);
        let assign = greedy_assignment(eval, &gains);
        let (power, t) = WaterFill::new(eval, &assign, &gains).max_min();
        let alloc = Allocation { assign, power, uav_pos: pos };
        let improved = best.as_ref().is_none_or(|(b, _)| t > *b + 1e-12);
        if improved {
            best = Some((t, alloc.clone()));
        }
        if !improved || t.is_infinite() || !move_uav {
            break;
        }
        let next = soft_min_ascent(eval, &alloc);
        if (next.x - pos.x).hypot(next.y - pos.y) < 1e-3 {
            break;
        }
        pos = next;
    }
    let (min_slack, witness) = best.unwrap_or_else(|| (f64::INFINITY, Allocation::empty(inst)));
    FeasibilityResult { min_slack, feasible: min_slack >= 0.0, witness }
}

/// Hands out RBs one at a time to the user with the smallest normalized
/// slack, picking that user's best free RB; rates assume `P_max / B` per RB.
pub(crate) fn greedy_assignment(eval: &Evaluator<'_>, gains: &DMatrix<f64>) -> DMatrix<f64> {
    let inst = eval.inst;
    let (nu, nb) = (inst.num_users(), inst.num_rbs);
    let mut assign = DMatrix::zeros(nu, nb);
    if nu == 0 {
        return assign;
    }
    let uniform = DMatrix::from_element(nu, nb, inst.total_power / nb as f64);
    let rates = eval.pair_rates(&uniform, gains);
    let mut free = vec![true; nb];
    let mut have = vec![0.0; nu];
    for _ in 0..nb {
        let pick = (0..nu).filter(|&u| (0..nb).any(|b| free[b] && rates[(u, b)] > 0.0)).min_by(|&a, &b| {
            let sa = (have[a] - eval.required[a]) / eval.scale[a];
            let sb = (have[b] - eval.required[b]) / eval.scale[b];
            sa.total_cmp(&sb)
        });
        let Some(u) = pick else { break };
        let b = (0..nb)
            .filter(|&b| free[b])
            .max_by(|&x, &y| rates[(u, x)].total_cmp(&rates[(u, y)]).then(y.cmp(&x)))
            .expect("a free RB exists");
        free[b] = false;
        assign[(u, b)] = 1.0;
        have[u] += rates[(u, b)];
    }
    assign
}

/// Moves the UAV to raise `-tau * ln sum exp(-slack_u / tau)` with assignment
/// and power fixed.
fn soft_min_ascent(eval: &Evaluator<'_>, alloc: &Allocation) -> Position3D {
    let rect = eval.inst.coverage;
    let soft = |pos: Position3D| {
        let v = evaluate(eval, &alloc.assign, &alloc.power, pos);
        let m = v.slack.iter().copied().fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = v.slack.iter().map(|s| (-(s - m) / TEMPERATURE).exp()).collect();
        let total: f64 = weights.iter().sum();
        let value = m - TEMPERATURE * total.ln();
        let mut grad = [0.0; 2];
        for (w, g) in weights.iter().zip(&v.slack_grad) {
            grad[0] += w / total * g[0];
            grad[1] += w / total * g[1];
        }
        (value, grad)
    };
    let alpha0 = 0.25 * rect.width().max(rect.height());
    let mut alpha = alpha0;
    let mut pos = alloc.uav_pos;
    let (mut value, mut grad) = soft(pos);
    for _ in 0..200 {
        let Some(dir) = projected_direction(grad, pos.horizontal(), rect) else { break };
        let mut moved = None;
        while alpha >= 1e-6 {
            let cand =
                rect.clamp(Position2D::new(pos.x + alpha * dir[0], pos.y + alpha * dir[1])).at_altitude(pos.altitude);
            let (v, g) = soft(cand);
            if v > value {
                moved = Some((cand, v, g));
                break;
            }
            alpha *= 0.5;
        }
        let Some((cand, v, g)) = moved else { break };
        let len = (cand.x - pos.x).hypot(cand.y - pos.y);
        pos = cand;
        value = v;
        grad = g;
        alpha = (2.0 * alpha).min(alpha0);
        if len < 1e-4 {
            break;
        }
    }
    pos
}

/// Normalized slacks of an allocation.
pub(crate) fn slacks_of(eval: &Evaluator<'_>, alloc: &Allocation) -> Vec<f64> {
    let gains = eval.gains(alloc.uav_pos);
    let rates = row_dot(&alloc.assign, &eval.pair_rates(&alloc.power, &gains));
    eval.normalized_slacks(&rates)
}
