use nalgebra::DMatrix;

use super::eval::Evaluator;
use super::lp;
use super::{ProblemInstance, SolverConfig};
use crate::channel::Position3D;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RbSolution {
    /// Relaxed assignment with entries in `[0, 1]` and column sums `<= 1`.
    pub assign: DMatrix<f64>,
    /// Rate targets and budget hold within `inner_tol` (normalized).
    pub feasible: bool,
    /// Simplex pivots spent.
    pub iterations: usize,
}

/// Assignment step: maximize `sum a * (r - zeta * p)` over the relaxed
/// assignment for fixed power and position, subject to the rate targets, the
/// power budget and one user per RB.
///
/// The relaxation is a linear program and is solved exactly; its optimal
/// vertex is mostly binary, so threshold rounding loses little.
pub fn solve_rb_allocation(
    instance: &ProblemInstance,
    power: &DMatrix<f64>,
    uav_pos: Position3D,
    config: &SolverConfig,
) -> Result<RbSolution> {
    let eval = Evaluator::new(instance)?;
    let shape = (instance.num_users(), instance.num_rbs);
    if power.shape() != shape {
        return Err(Error::invalid(format!("power must be {shape:?}")));
    }
    let gains = eval.gains(uav_pos);
    Ok(solve_rb_with(&eval, power, &gains, config))
}

pub(crate) fn solve_rb_with(
    eval: &Evaluator<'_>,
    power: &DMatrix<f64>,
    gains: &DMatrix<f64>,
    config: &SolverConfig,
) -> RbSolution {
    let (nu, nb) = power.shape();
    let n = nu * nb;
    let rates = eval.pair_rates(power, gains);
    let mut profit = rates.clone();
    profit.zip_apply(power, |c, p| *c -= eval.inst.tradeoff_zeta * p);
    let profit_scale = profit.amax().max(f64::MIN_POSITIVE);
    // Column index u * nb + b.
    let idx = |u: usize, b: usize| u * nb + b;
    let c: Vec<f64> = (0..n).map(|j| profit[(j / nb, j % nb)] / profit_scale).collect();

    // Rows: one cap per RB, one rate target per user, the budget. All O(1).
    let m = nb + nu + 1;
    let mut a = vec![0.0; m * n];
    let mut rhs = vec![0.0; m];
    for b in 0..nb {
        for u in 0..nu {
            a[b * n + idx(u, b)] = 1.0;
        }
        rhs[b] = 1.0;
    }
    for u in 0..nu {
        let row = nb + u;
        for b in 0..nb {
            a[row * n + idx(u, b)] = -rates[(u, b)] / eval.scale[u];
        }
        rhs[row] = -eval.required[u] / eval.scale[u];
    }
    let p_max = eval.inst.total_power;
    for u in 0..nu {
        for b in 0..nb {
            a[(m - 1) * n + idx(u, b)] = power[(u, b)] / p_max;
        }
    }
    rhs[m - 1] = 1.0;

    let sol = lp::solve(&lp::Lp { rows: m, cols: n, a: &a, b: &rhs, c: &c }, config.max_inner_iters);
    let assign = DMatrix::from_fn(nu, nb, |u, b| sol.x[idx(u, b)].min(1.0));
    let rates_ok = (0..nu).all(|u| {
        let got: f64 = (0..nb).map(|b| assign[(u, b)] * rates[(u, b)]).sum();
        (got - eval.required[u]) / eval.scale[u] >= -config.inner_tol
    });
    let feasible = sol.feasible && rates_ok;
    RbSolution { assign, feasible, iterations: sol.pivots }
}
