/// Euclidean projection onto `{x >= 0, sum x <= 1}`, in place.
pub fn project_capped_simplex(v: &mut [f64]) {
    let positive: f64 = v.iter().map(|x| x.max(0.0)).sum();
    if positive <= 1.0 {
        v.iter_mut().for_each(|x| *x = x.max(0.0));
        return;
    }
    // Budget binds: project onto the probability simplex.
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if s - t > 0.0 {
            tau = t;
        } else {
            break;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - tau).max(0.0));
}
