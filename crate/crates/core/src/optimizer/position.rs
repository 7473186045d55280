use std::f64::consts::LN_2;

use nalgebra::DMatrix;

use super::eval::Evaluator;
use super::power::{free_level_at, optimal_power};
use super::{Allocation, ProblemInstance, SolverConfig};
use crate::channel::{path_gain, Position2D, Position3D};
use crate::error::Result;

/// Objective and its gradient with respect to the UAV's horizontal position.
pub fn position_gradient(instance: &ProblemInstance, alloc: &Allocation) -> Result<(f64, [f64; 2])> {
    let eval = Evaluator::new(instance)?;
    let s = evaluate(&eval, &alloc.assign, &alloc.power, alloc.uav_pos);
    Ok((s.value, s.grad))
}

/// Position step: projected gradient ascent with backtracking on the
/// objective for fixed assignment and power.
///
/// A step is accepted only if it passes an Armijo test and no user's rate
/// slack drops below `min(current, 0)`, so a feasible point stays feasible.
pub fn solve_position(instance: &ProblemInstance, alloc: &Allocation, config: &SolverConfig) -> Result<Position3D> {
    let eval = Evaluator::new(instance)?;
    Ok(solve_position_with(&eval, &alloc.assign, &alloc.power, alloc.uav_pos, config))
}

const MAX_POSITION_STEPS: usize = 500;
/// Accepted steps shorter than this (in meters) end the search.
const MIN_STEP: f64 = 1e-4;

pub(crate) fn solve_position_with(
    eval: &Evaluator<'_>,
    assign: &DMatrix<f64>,
    power: &DMatrix<f64>,
    start: Position3D,
    config: &SolverConfig,
) -> Position3D {
    let rect = eval.inst.coverage;
    let mut pos = rect.clamp(start.horizontal()).at_altitude(eval.inst.altitude);
    let alpha0 = 0.25 * rect.width().max(rect.height());
    if alpha0 <= 0.0 || assign.nrows() == 0 {
        return pos;
    }
    let mut cur = evaluate(eval, assign, power, pos);
    let mut alpha = alpha0;
    for _ in 0..MAX_POSITION_STEPS.min(config.max_inner_iters) {
        let dir = projected_direction(cur.grad, pos.horizontal(), rect);
        let Some(dir) = dir else { break };
        let floor: Vec<f64> = cur.slack.iter().map(|s| s.min(0.0)).collect();
        let mut accepted = None;
        while alpha >= 1e-6 {
            let cand = rect.clamp(Position2D::new(pos.x + alpha * dir[0], pos.y + alpha * dir[1]));
            let step = [cand.x - pos.x, cand.y - pos.y];
            let next = evaluate(eval, assign, power, cand.at_altitude(pos.altitude));
            let armijo = next.value >= cur.value + 1e-4 * (cur.grad[0] * step[0] + cur.grad[1] * step[1]);
            let keeps_feasible = next.slack.iter().zip(&floor).all(|(s, f)| *s >= *f);
            if armijo && keeps_feasible && next.value >= cur.value {
                accepted = Some((cand, next, step[0].hypot(step[1])));
                break;
            }
            alpha *= 0.5;
        }
        let Some((cand, next, len)) = accepted else { break };
        pos = cand.at_altitude(pos.altitude);
        cur = next;
        alpha = (2.0 * alpha).min(alpha0);
        if len < MIN_STEP {
            break;
        }
    }
    pos
}

/// Position move with the power re-solved at every trial point.
///
/// With binding rate targets the fixed-power step cannot move at all. Here the
/// direction is the gradient of the rates weighted by each user's marginal
/// value `1 + mu_u`, read off the water-filling slopes, and a trial point is
/// judged by the objective after the power step there. Returns the improved
/// allocation, if any.
pub(crate) fn reposition_with_power(eval: &Evaluator<'_>, state: &Allocation, max_steps: usize) -> Option<Allocation> {
    let rect = eval.inst.coverage;
    let alpha0 = 0.25 * rect.width().max(rect.height());
    if alpha0 <= 0.0 || state.assign.nrows() == 0 {
        return None;
    }
    let mut cur = state.clone();
    let mut value = eval.objective(&cur);
    let mut alpha = alpha0;
    let mut moved = false;
    for _ in 0..max_steps {
        let gains = eval.gains(cur.uav_pos);
        let price = match free_level_at(eval, &cur.assign, &gains) {
            Some(free) if free > 0.0 => eval.inst.tradeoff_zeta.max(eval.model.bandwidth / (LN_2 * free)),
            _ => f64::INFINITY,
        };
        let point = evaluate(eval, &cur.assign, &cur.power, cur.uav_pos);
        let mut grad = [0.0; 2];
        for u in 0..cur.assign.nrows() {
            let w = marginal_weight(eval, &cur, &gains, u, price);
            grad[0] += w * point.slack_grad[u][0] * eval.scale[u];
            grad[1] += w * point.slack_grad[u][1] * eval.scale[u];
        }
        let Some(dir) = projected_direction(grad, cur.uav_pos.horizontal(), rect) else { break };
        let mut accepted = None;
        while alpha >= MIN_REPOSITION {
            let h = cur.uav_pos.horizontal();
            let pos = rect
                .clamp(Position2D::new(h.x + alpha * dir[0], h.y + alpha * dir[1]))
                .at_altitude(cur.uav_pos.altitude);
            if let Some(power) = optimal_power(eval, &cur.assign, &eval.gains(pos)) {
                let cand = Allocation { assign: cur.assign.clone(), power, uav_pos: pos };
                let v = eval.objective(&cand);
                if v > value + 1e-12 * value.abs() {
                    accepted = Some((cand, v));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((cand, v)) = accepted else { break };
        cur = cand;
        value = v;
        moved = true;
        alpha = (2.0 * alpha).min(alpha0);
    }
    moved.then_some(cur)
}

/// Smallest trial step of [`reposition_with_power`], in meters.
const MIN_REPOSITION: f64 = 0.5;

/// `(1 + mu_u) / price`: the larger of `1 / price` and the inverse marginal
/// rate per watt of the user's powered pairs.
fn marginal_weight(eval: &Evaluator<'_>, alloc: &Allocation, gains: &DMatrix<f64>, u: usize, price: f64) -> f64 {
    let model = &eval.model;
    let (mut sum, mut count) = (0.0, 0);
    for b in 0..alloc.assign.ncols() {
        let p = alloc.power[(u, b)];
        if alloc.assign[(u, b)] > 0.0 && p > 0.0 && p < eval.inst.total_power {
            let slope = model.rate_slope_at_snr(model.snr(p, gains[(u, b)])) * gains[(u, b)] / model.noise_power;
            if slope > 0.0 {
                sum += 1.0 / slope;
                count += 1;
            }
        }
    }
    let own = if count > 0 { sum / count as f64 } else { 0.0 };
    own.max(1.0 / price)
}

/// Unit ascent direction with components pointing out of the box removed.
pub(crate) fn projected_direction(grad: [f64; 2], p: Position2D, rect: super::Rect) -> Option<[f64; 2]> {
    let mut d = grad;
    if (p.x <= rect.x_min && d[0] < 0.0) || (p.x >= rect.x_max && d[0] > 0.0) {
        d[0] = 0.0;
    }
    if (p.y <= rect.y_min && d[1] < 0.0) || (p.y >= rect.y_max && d[1] > 0.0) {
        d[1] = 0.0;
    }
    let n = d[0].hypot(d[1]);
    (n > 0.0 && n.is_finite()).then(|| [d[0] / n, d[1] / n])
}

pub(crate) struct PointValue {
    pub value: f64,
    pub grad: [f64; 2],
    /// Normalized reliability slack per user.
    pub slack: Vec<f64>,
    /// Gradient of each user's normalized slack.
    pub slack_grad: Vec<[f64; 2]>,
}

pub(crate) fn evaluate(
    eval: &Evaluator<'_>,
    assign: &DMatrix<f64>,
    power: &DMatrix<f64>,
    pos: Position3D,
) -> PointValue {
    let inst = eval.inst;
    let model = &eval.model;
    let theta = inst.channel.pathloss_exp;
    let mut value = 0.0;
    let mut grad = [0.0; 2];
    let mut rates = vec![0.0; inst.num_users()];
    let mut slack_grad = vec![[0.0; 2]; inst.num_users()];
    for (u, user) in inst.users.iter().enumerate() {
        let d_sq = pos.distance_sq(*user);
        let path = path_gain(&inst.channel, pos, *user);
        // d path / d x = -theta * path * (x - x_u) / d^2
        let dpath = [-theta * path * (pos.x - user.x) / d_sq, -theta * path * (pos.y - user.y) / d_sq];
        for b in 0..inst.num_rbs {
            let (a, p) = (assign[(u, b)], power[(u, b)]);
            if a <= 0.0 || p <= 0.0 {
                continue;
            }
            let fade = inst.fading[(u, b)];
            let snr = p * path * fade / model.noise_power;
            let r = a * model.rate_at_snr(snr);
            rates[u] += r;
            let ds = a * model.rate_slope_at_snr(snr) * p * fade / model.noise_power;
            slack_grad[u][0] += ds * dpath[0];
            slack_grad[u][1] += ds * dpath[1];
        }
        grad[0] += slack_grad[u][0];
        grad[1] += slack_grad[u][1];
        slack_grad[u][0] /= eval.scale[u];
        slack_grad[u][1] /= eval.scale[u];
        value += rates[u];
    }
    value -= inst.tradeoff_zeta * assign.component_mul(power).sum();
    PointValue { value, grad, slack: eval.normalized_slacks(&rates), slack_grad }
}
