//! Local search over binary assignments: move one RB to another user while
//! that raises the decoupled per-user value.
//!
//! Users are scored independently with the budget priced in through the free
//! water level of the current power solution, so a move only touches the
//! scores of its two users.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;

use super::eval::Evaluator;
use crate::channel::dispersion;

struct Scorer<'a> {
    nog: DMatrix<f64>,
    penalty: DMatrix<f64>,
    required: &'a [f64],
    bandwidth: f64,
    p_max: f64,
    free: f64,
    /// Rate worth per watt, `ln 2 * free / bandwidth`.
    rate_weight: f64,
}

impl Scorer<'_> {
    fn rate(&self, u: usize, set: &[usize], level: f64) -> f64 {
        set.iter()
            .map(|&b| {
                let p = (level - self.nog[(u, b)]).clamp(0.0, self.p_max);
                if p <= 0.0 {
                    0.0
                } else {
                    (self.bandwidth * (p / self.nog[(u, b)]).ln_1p() / LN_2 - self.penalty[(u, b)]).max(0.0)
                }
            })
            .sum()
    }

    /// `weight * rate - power` at the best level, or `None` if the target is out of reach.
    fn score(&self, u: usize, set: &[usize]) -> Option<f64> {
        let target = self.required[u];
        let mut level = self.free;
        let mut rate = self.rate(u, set, level);
        if rate < target {
            let top = set.iter().map(|&b| self.nog[(u, b)]).filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
            if !top.is_finite() {
                return None;
            }
            let top = top + self.p_max;
            if self.rate(u, set, top) < target {
                return None;
            }
            let (mut lo, mut hi) = (level, top);
            while hi - lo > 1e-9 * hi {
                let mid = 0.5 * (lo + hi);
                if self.rate(u, set, mid) >= target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            level = hi;
            rate = self.rate(u, set, level);
        }
        let power: f64 = set.iter().map(|&b| (level - self.nog[(u, b)]).clamp(0.0, self.p_max)).sum();
        Some(self.rate_weight * rate - power)
    }
}

/// Improves a binary `assign` by single-RB moves, at most `max_moves` of them.
/// `reference` supplies the per-RB power used to freeze the dispersion term,
/// `free` the free water level of the current power solution.
pub(crate) fn reassign(
    eval: &Evaluator<'_>,
    assign: &DMatrix<f64>,
    gains: &DMatrix<f64>,
    reference: &DMatrix<f64>,
    free: f64,
    max_moves: usize,
) -> DMatrix<f64> {
    let (nu, nb) = assign.shape();
    if nu < 2 {
        return assign.clone();
    }
    let model = eval.model();
    let n = model.noise_power;
    let p_max = eval.inst.total_power;
    let nog = gains.map(|g| if g > 0.0 { n / g } else { f64::INFINITY });
    let penalty = DMatrix::from_fn(nu, nb, |u, b| {
        let mut p = reference.column(b).max();
        if p <= 0.0 {
            p = p_max / nb as f64;
        }
        model.penalty_scale * dispersion(p / nog[(u, b)]).sqrt()
    });
    let scorer = Scorer {
        nog,
        penalty,
        required: eval.required(),
        bandwidth: model.bandwidth,
        p_max,
        free,
        rate_weight: LN_2 * free / model.bandwidth,
    };

    let mut holder: Vec<Option<usize>> = (0..nb).map(|b| (0..nu).find(|&u| assign[(u, b)] > 0.5)).collect();
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); nu];
    for (b, h) in holder.iter().enumerate() {
        if let Some(u) = h {
            sets[*u].push(b);
        }
    }
    let Some(mut base) = (0..nu).map(|u| scorer.score(u, &sets[u])).collect::<Option<Vec<f64>>>() else {
        return assign.clone();
    };
    let with = |u: usize, sets: &[Vec<usize>], b: usize| {
        let mut s = sets[u].clone();
        s.push(b);
        scorer.score(u, &s)
    };
    let without = |u: usize, sets: &[Vec<usize>], b: usize| {
        let s: Vec<usize> = sets[u].iter().copied().filter(|&x| x != b).collect();
        scorer.score(u, &s)
    };
    let mut gain = DMatrix::from_element(nu, nb, f64::NEG_INFINITY);
    let mut loss = vec![0.0; nb];
    let fill_gain = |u: usize, gain: &mut DMatrix<f64>, sets: &[Vec<usize>], holder: &[Option<usize>], base: &[f64]| {
        for b in 0..nb {
            gain[(u, b)] = if holder[b] == Some(u) {
                f64::NEG_INFINITY
            } else {
                with(u, sets, b).map_or(f64::NEG_INFINITY, |s| s - base[u])
            };
        }
    };
    let fill_loss = |b: usize, loss: &mut [f64], sets: &[Vec<usize>], holder: &[Option<usize>], base: &[f64]| {
        loss[b] = match holder[b] {
            None => 0.0,
            Some(h) => without(h, sets, b).map_or(f64::NEG_INFINITY, |s| s - base[h]),
        };
    };
    for u in 0..nu {
        fill_gain(u, &mut gain, &sets, &holder, &base);
    }
    for b in 0..nb {
        fill_loss(b, &mut loss, &sets, &holder, &base);
    }

    for _ in 0..max_moves {
        let total: f64 = base.iter().map(|v| v.abs()).sum();
        let mut best: Option<(usize, usize, f64)> = None;
        for b in 0..nb {
            for u in 0..nu {
                let d = gain[(u, b)] + loss[b];
                if d > best.map_or(1e-9 * total.max(1e-300), |m| m.2) {
                    best = Some((u, b, d));
                }
            }
        }
        let Some((u, b, _)) = best else { break };
        let from = holder[b];
        sets[u].push(b);
        if let Some(h) = from {
            sets[h].retain(|&x| x != b);
        }
        holder[b] = Some(u);
        let touched: Vec<usize> = std::iter::once(u).chain(from).collect();
        for &v in &touched {
            base[v] = scorer.score(v, &sets[v]).unwrap_or(f64::NEG_INFINITY);
        }
        for &v in &touched {
            fill_gain(v, &mut gain, &sets, &holder, &base);
        }
        for &v in &touched {
            for &x in &sets[v] {
                fill_loss(x, &mut loss, &sets, &holder, &base);
            }
        }
    }
    DMatrix::from_fn(nu, nb, |u, b| if holder[b] == Some(u) { 1.0 } else { 0.0 })
}
