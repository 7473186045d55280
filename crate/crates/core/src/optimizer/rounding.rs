use nalgebra::DMatrix;

/// Threshold rounding: each RB goes to its largest entry if that entry is at
/// least `threshold` (lowest user index on ties), otherwise stays unassigned.
pub fn round_allocation(relaxed: &DMatrix<f64>, threshold: f64) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(relaxed.nrows(), relaxed.ncols());
    for (b, col) in relaxed.column_iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (u, &v) in col.iter().enumerate() {
            if best.is_none_or(|(_, m)| v > m) {
                best = Some((u, v));
            }
        }
        if let Some((u, v)) = best {
            if v >= threshold {
                out[(u, b)] = 1.0;
            }
        }
    }
    out
}
