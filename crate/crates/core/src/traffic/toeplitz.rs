use std::f64::consts::PI;

use super::{periodic_kernel, KernelParams};

/// Log marginal likelihood for observations on consecutive slots.
///
/// On a contiguous grid the Gram matrix is symmetric Toeplitz, so the solve
/// and the log-determinant come out of one Levinson recursion in O(n^2).
/// Returns `None` when the matrix is not numerically positive definite.
pub fn toeplitz_log_marginal_likelihood(values: &[f64], params: &KernelParams) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let r: Vec<f64> = (0..n)
        .map(|k| {
            let v = periodic_kernel(0.0, k as f64, params);
            if k == 0 {
                v + params.noise_var
            } else {
                v
            }
        })
        .collect();
    let quad_and_logdet = levinson(&r, values)?;
    let (quad, log_det) = quad_and_logdet;
    Some(-0.5 * quad - 0.5 * log_det - 0.5 * n as f64 * (2.0 * PI).ln())
}

/// Solves `T x = y` for the symmetric Toeplitz `T` with first column `r`;
/// returns `(y' x, log det T)`.
fn levinson(r: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = r.len();
    if !(r[0] > 0.0) {
        return None;
    }
    // b solves T_k b = e_{k-1}; the forward vector is its reverse.
    let mut b = Vec::with_capacity(n);
    let mut next = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    b.push(1.0 / r[0]);
    x.push(y[0] / r[0]);
    let mut log_det = r[0].ln();
    for k in 1..n {
        // eps = last row of T_{k+1} applied to [f; 0] with f = reverse(b).
        let eps: f64 = (0..k).map(|i| r[k - i] * b[k - 1 - i]).sum();
        let denom = 1.0 - eps * eps;
        if !(denom > 0.0) {
            return None;
        }
        // b' = ([0; b] - eps [f; 0]) / (1 - eps^2)
        next.clear();
        next.push(-eps * b[k - 1] / denom);
        for i in 1..k {
            next.push((b[i - 1] - eps * b[k - 1 - i]) / denom);
        }
        next.push(b[k - 1] / denom);
        std::mem::swap(&mut b, &mut next);
        // log det T_{k+1} = log det T_k - log (T_{k+1}^{-1})_{kk}
        let corner = b[k];
        if !(corner > 0.0) {
            return None;
        }
        log_det -= corner.ln();
        let resid = y[k] - (0..k).map(|i| r[k - i] * x[i]).sum::<f64>();
        x.push(0.0);
        for i in 0..=k {
            x[i] += resid * b[i];
        }
    }
    let quad = x.iter().zip(y).map(|(a, b)| a * b).sum();
    Some((quad, log_det))
}
