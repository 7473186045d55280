//! Dense two-phase simplex for `max c'x  s.t.  A x <= b, x >= 0`.
//!
//! Sized for the assignment step (a few thousand columns, under two hundred
//! rows). Dantzig pricing, switching to Bland's rule after a run of
//! degenerate pivots so it cannot cycle.

const TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LpSolution {
    pub x: Vec<f64>,
    /// Phase one reached zero infeasibility.
    pub feasible: bool,
    pub pivots: usize,
}

/// Row-major constraint matrix with `rows` rows of `cols` entries.
pub(crate) struct Lp<'a> {
    pub rows: usize,
    pub cols: usize,
    pub a: &'a [f64],
    pub b: &'a [f64],
    pub c: &'a [f64],
}

struct Tableau {
    /// Structural columns, then one slack per row, then artificials, then the right-hand side.
    width: usize,
    /// `rows` constraint rows followed by the objective row.
    t: Vec<f64>,
    rows: usize,
    basis: Vec<usize>,
    pivots: usize,
    max_pivots: usize,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width - 1)
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let w = self.width;
        let inv = 1.0 / self.at(r, col);
        let (before, rest) = self.t.split_at_mut(r * w);
        let (row, after) = rest.split_at_mut(w);
        row.iter_mut().for_each(|v| *v *= inv);
        row[col] = 1.0;
        for other in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = other[col];
            if f != 0.0 {
                for (o, p) in other.iter_mut().zip(row.iter()) {
                    *o -= f * p;
                }
                other[col] = 0.0;
            }
        }
        self.basis[r] = col;
        self.pivots += 1;
    }

    /// Rewrites the objective row as reduced costs of `cost` for the current basis.
    fn price(&mut self, cost: &[f64]) {
        let w = self.width;
        let m = self.rows;
        let mut obj = vec![0.0; w];
        obj[..cost.len()].iter_mut().zip(cost).for_each(|(o, c)| *o = -c);
        for i in 0..m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (o, v) in obj.iter_mut().zip(&self.t[i * w..(i + 1) * w]) {
                    *o += cb * v;
                }
            }
        }
        self.t[m * w..].copy_from_slice(&obj);
    }

    /// Primal simplex on the current objective row; `allowed` filters entering columns.
    fn optimize(&mut self, allowed: usize) {
        let m = self.rows;
        let mut degenerate = 0;
        while self.pivots < self.max_pivots {
            let obj = &self.t[m * self.width..m * self.width + allowed];
            let bland = degenerate >= DEGENERATE_RUN;
            let entering = if bland {
                obj.iter().position(|&d| d < -TOL)
            } else {
                let (j, d) = obj
                    .iter()
                    .enumerate()
                    .fold((usize::MAX, -TOL), |best, (j, &d)| if d < best.1 { (j, d) } else { best });
                (d < -TOL).then_some(j)
            };
            let Some(col) = entering else { return };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let v = self.at(i, col);
                if v > TOL {
                    let ratio = self.rhs(i) / v;
                    let better = match leave {
                        None => true,
                        Some((r, best)) => ratio < best - TOL || (ratio <= best + TOL && self.basis[i] < self.basis[r]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            // Bounded feasible sets never hit the unbounded case.
            let Some((r, ratio)) = leave else { return };
            degenerate = if ratio <= TOL { degenerate + 1 } else { 0 };
            self.pivot(r, col);
        }
    }
}

pub(crate) fn solve(lp: &Lp<'_>, max_pivots: usize) -> LpSolution {
    let (m, n) = (lp.rows, lp.cols);
    let negative: Vec<usize> = (0..m).filter(|&i| lp.b[i] < 0.0).collect();
    let k = negative.len();
    let width = n + m + k + 1;
    let mut t = vec![0.0; (m + 1) * width];
    let mut basis = vec![0; m];
    let mut art = 0;
    for i in 0..m {
        let row = &mut t[i * width..(i + 1) * width];
        let sign = if lp.b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            row[j] = sign * lp.a[i * n + j];
        }
        row[n + i] = sign;
        row[width - 1] = sign * lp.b[i];
        if sign < 0.0 {
            row[n + m + art] = 1.0;
            basis[i] = n + m + art;
            art += 1;
        } else {
            basis[i] = n + i;
        }
    }
    let mut tab = Tableau { width, t, rows: m, basis, pivots: 0, max_pivots };

    let mut feasible = true;
    if k > 0 {
        let mut cost = vec![0.0; width - 1];
        cost[n + m..].iter_mut().for_each(|c| *c = -1.0);
        tab.price(&cost);
        tab.optimize(width - 1);
        let infeasibility = -tab.at(m, width - 1);
        feasible = infeasibility <= 1e-7;
        // Drive zero-level artificials out of the basis where possible.
        for i in 0..m {
            if tab.basis[i] >= n + m {
                if let Some(col) = (0..n + m).find(|&j| tab.at(i, j).abs() > 1e-7) {
                    tab.pivot(i, col);
                }
            }
        }
    }
    if feasible {
        let mut cost = vec![0.0; width - 1];
        cost[..n].copy_from_slice(lp.c);
        tab.price(&cost);
        tab.optimize(n + m);
    }
    let mut x = vec![0.0; n];
    for i in 0..m {
        if tab.basis[i] < n {
            x[tab.basis[i]] = tab.rhs(i).max(0.0);
        }
    }
    LpSolution { x, feasible, pivots: tab.pivots }
}
