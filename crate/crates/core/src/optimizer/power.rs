use std::f64::consts::LN_2;

use nalgebra::DMatrix;

use super::eval::Evaluator;
use super::{ProblemInstance, SolverConfig};
use crate::channel::{dispersion, Position3D};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSolution {
    pub power: DMatrix<f64>,
    /// Every user meets its rate target within the budget.
    pub feasible: bool,
}

/// Power step: maximize `sum a * r(p) - zeta * sum a * p` over the power for a
/// fixed assignment and position, subject to the budget and the rate targets.
///
/// For a frozen dispersion term the problem is concave and separable per pair,
/// so the optimum is a water-filling `p = clip(w_u - N / g, 0, P_max)`. The
/// level of user `u` is the larger of the common level set by `zeta` and the
/// budget, and the smallest level meeting its target; both are found by
/// bisection. The dispersion term is refreshed from the new powers a few times.
///
/// When the targets cannot be met the max-min power allocation is returned
/// with `feasible = false`.
pub fn solve_power(
    instance: &ProblemInstance,
    assign: &DMatrix<f64>,
    uav_pos: Position3D,
    config: &SolverConfig,
) -> Result<PowerSolution> {
    let eval = Evaluator::new(instance)?;
    let gains = eval.gains(uav_pos);
    Ok(solve_power_with(&eval, assign, &gains, config))
}

/// Max-min normalized slack power allocation; returns the powers and the slack.
pub fn max_min_power(
    instance: &ProblemInstance,
    assign: &DMatrix<f64>,
    uav_pos: Position3D,
) -> Result<(DMatrix<f64>, f64)> {
    let eval = Evaluator::new(instance)?;
    let gains = eval.gains(uav_pos);
    let wf = WaterFill::new(&eval, assign, &gains);
    Ok(wf.max_min())
}

const SCA_PASSES: usize = 4;

pub(crate) fn solve_power_with(
    eval: &Evaluator<'_>,
    assign: &DMatrix<f64>,
    gains: &DMatrix<f64>,
    config: &SolverConfig,
) -> PowerSolution {
    match optimal_power(eval, assign, gains) {
        Some(power) => PowerSolution { power, feasible: true },
        None => {
            let (power, slack) = WaterFill::new(eval, assign, gains).max_min();
            PowerSolution { power, feasible: slack >= -config.inner_tol }
        }
    }
}

/// The power step without the max-min fallback: `None` if the targets do not fit.
pub(crate) fn optimal_power(eval: &Evaluator<'_>, assign: &DMatrix<f64>, gains: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut wf = WaterFill::new(eval, assign, gains);
    let mut power = DMatrix::zeros(assign.nrows(), assign.ncols());
    for _ in 0..SCA_PASSES {
        power = wf.powers(&wf.optimal_levels()?);
        if !wf.refresh_penalty(&power) {
            break;
        }
    }
    Some(power)
}

/// Free water level of the optimal powers at `assign`, if the targets fit.
pub(crate) fn free_level_at(eval: &Evaluator<'_>, assign: &DMatrix<f64>, gains: &DMatrix<f64>) -> Option<f64> {
    let wf = WaterFill::new(eval, assign, gains);
    let required: Vec<f64> = (0..assign.nrows()).map(|u| wf.min_level(u, eval.required[u])).collect::<Option<_>>()?;
    wf.free_level(&required)
}

/// Water-filling over a fixed assignment with a frozen dispersion term.
pub(crate) struct WaterFill<'e, 'a> {
    eval: &'e Evaluator<'a>,
    assign: &'e DMatrix<f64>,
    /// `N / g` per pair; infinite for a dead link.
    noise_over_gain: DMatrix<f64>,
    penalty: DMatrix<f64>,
    p_max: f64,
}

impl<'e, 'a> WaterFill<'e, 'a> {
    pub(crate) fn new(eval: &'e Evaluator<'a>, assign: &'e DMatrix<f64>, gains: &DMatrix<f64>) -> Self {
        let n = eval.model.noise_power;
        let noise_over_gain = gains.map(|g| if g > 0.0 { n / g } else { f64::INFINITY });
        // Start from the high-SNR limit V = 1.
        let penalty = DMatrix::from_element(assign.nrows(), assign.ncols(), eval.model.penalty_scale);
        Self { eval, assign, noise_over_gain, penalty, p_max: eval.inst.total_power }
    }

    fn users(&self) -> usize {
        self.assign.nrows()
    }

    fn active(&self, u: usize, b: usize) -> bool {
        self.assign[(u, b)] > 0.0 && self.noise_over_gain[(u, b)].is_finite()
    }

    fn pair_power(&self, u: usize, b: usize, level: f64) -> f64 {
        (level - self.noise_over_gain[(u, b)]).clamp(0.0, self.p_max)
    }

    fn pair_rate(&self, u: usize, b: usize, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        let snr = p / self.noise_over_gain[(u, b)];
        (self.eval.model.bandwidth * snr.ln_1p() / LN_2 - self.penalty[(u, b)]).max(0.0)
    }

    fn user_rate(&self, u: usize, level: f64) -> f64 {
        (0..self.assign.ncols())
            .filter(|&b| self.active(u, b))
            .map(|b| self.assign[(u, b)] * self.pair_rate(u, b, self.pair_power(u, b, level)))
            .sum()
    }

    /// Level at which every active pair of `u` sits at `P_max`.
    fn full_level(&self, u: usize) -> Option<f64> {
        (0..self.assign.ncols())
            .filter(|&b| self.active(u, b))
            .map(|b| self.noise_over_gain[(u, b)])
            .reduce(f64::max)
            .map(|m| m + self.p_max)
    }

    /// Smallest level giving `u` at least `target`.
    fn min_level(&self, u: usize, target: f64) -> Option<f64> {
        if target <= 0.0 {
            return Some(0.0);
        }
        let top = self.full_level(u)?;
        if self.user_rate(u, top) < target {
            return None;
        }
        Some(bisect_up(0.0, top, |w| self.user_rate(u, w) >= target))
    }

    fn budget(&self, levels: &[f64]) -> f64 {
        let mut used = 0.0;
        for u in 0..self.users() {
            for b in 0..self.assign.ncols() {
                if self.active(u, b) {
                    used += self.assign[(u, b)] * self.pair_power(u, b, levels[u]);
                }
            }
        }
        used
    }

    pub(crate) fn powers(&self, levels: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.users(), self.assign.ncols(), |u, b| {
            if self.active(u, b) {
                self.pair_power(u, b, levels[u])
            } else {
                0.0
            }
        })
    }

    /// KKT levels of the concave power problem, or `None` if infeasible.
    fn optimal_levels(&self) -> Option<Vec<f64>> {
        let required: Vec<f64> =
            (0..self.users()).map(|u| self.min_level(u, self.eval.required[u])).collect::<Option<_>>()?;
        let free = self.free_level(&required)?;
        Some(required.iter().map(|r| r.max(free)).collect())
    }

    /// Common level of users above their targets, set by `zeta` or the budget.
    fn free_level(&self, required: &[f64]) -> Option<f64> {
        if self.budget(required) > self.p_max * (1.0 + 1e-12) {
            return None;
        }
        let zeta = self.eval.inst.tradeoff_zeta;
        let top = (0..self.users()).filter_map(|u| self.full_level(u)).fold(0.0, f64::max);
        let cap = if zeta > 0.0 { (self.eval.model.bandwidth / (LN_2 * zeta)).min(top) } else { top };
        let with_free = |wf: f64| required.iter().map(|r| r.max(wf)).collect::<Vec<_>>();
        let free = if self.budget(&with_free(cap)) <= self.p_max {
            cap
        } else {
            bisect_down(0.0, cap, |wf| self.budget(&with_free(wf)) <= self.p_max)
        };
        Some(free)
    }

    /// Largest `t` such that every user reaches `R_u + t * S_u` within the
    /// budget; returns the matching powers and `t`.
    pub(crate) fn max_min(&self) -> (DMatrix<f64>, f64) {
        let u_count = self.users();
        if u_count == 0 {
            return (DMatrix::zeros(0, self.assign.ncols()), f64::INFINITY);
        }
        let eval = self.eval;
        let target = |u: usize, t: f64| eval.required[u] + t * eval.scale[u];
        let levels_at =
            |t: f64| -> Option<Vec<f64>> { (0..u_count).map(|u| self.min_level(u, target(u, t))).collect() };
        let fits = |t: f64| levels_at(t).is_some_and(|l| self.budget(&l) <= self.p_max);
        // No user can exceed its all-at-P_max rate.
        let mut hi = (0..u_count)
            .map(|u| {
                let best = self.full_level(u).map_or(0.0, |w| self.user_rate(u, w));
                (best - eval.required[u]) / eval.scale[u]
            })
            .fold(f64::INFINITY, f64::min);
        let lo = -1.0;
        if hi <= lo {
            hi = lo;
        }
        let t = if fits(hi) { hi } else { bisect_down(lo, hi, fits) };
        let levels = levels_at(t).unwrap_or_else(|| vec![0.0; u_count]);
        (self.powers(&levels), t)
    }

    /// Re-linearizes the dispersion term at `power`; false once it stopped moving.
    fn refresh_penalty(&mut self, power: &DMatrix<f64>) -> bool {
        let scale = self.eval.model.penalty_scale;
        let mut moved = false;
        for u in 0..self.users() {
            for b in 0..self.assign.ncols() {
                let snr = if self.active(u, b) { power[(u, b)] / self.noise_over_gain[(u, b)] } else { 0.0 };
                let pen = if snr > 0.0 { scale * dispersion(snr).sqrt() } else { scale };
                if (pen - self.penalty[(u, b)]).abs() > 1e-9 * scale.max(1e-300) {
                    moved = true;
                }
                self.penalty[(u, b)] = pen;
            }
        }
        moved
    }
}

/// Smallest `x` in `[lo, hi]` with `pred(x)`, for a predicate monotone from
/// false to true. Returns the upper end of the final bracket.
fn bisect_up(mut lo: f64, mut hi: f64, pred: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Largest `x` in `[lo, hi]` with `pred(x)`, for a predicate monotone from
/// true to false. Returns the lower end of the final bracket.
fn bisect_down(mut lo: f64, mut hi: f64, pred: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
