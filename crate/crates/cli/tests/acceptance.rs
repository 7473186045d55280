//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uav_urllc::channel::{q_inv, ChannelParams, Position2D, RateModel};
use uav_urllc::optimizer::{
    objective, position_gradient, successive_maximization, Allocation, ProblemInstance, Rect, SolveStatus, SolverConfig,
};
use uav_urllc::sim::{sweep, ScenarioConfig, Strategy, SweepAxis, SweepResult, TrafficConfig, TrafficTable};
use uav_urllc::traffic::{gp_posterior, ingest_series, rolling_forecast, KernelParams};

/// Reliability-bound price of power for the energy figures; at the default
/// 1e4 the budget binds and every strategy spends all of it.
const ENERGY_ZETA: f64 = 1e15;
const RATE_ZETA: f64 = 1e4;
const TRIALS: usize = 20;
const BANDWIDTH_MHZ: [f64; 5] = [7.2, 9.0, 10.8, 12.6, 14.4];
const RATE_BANDWIDTH_MHZ: [f64; 5] = [3.6, 5.4, 7.2, 9.0, 10.8];
const USERS: [f64; 6] = [5.0, 8.0, 11.0, 14.0, 17.0, 20.0];
const MASTER_SEED: u64 = 20_240_601;

fn dataset() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sp500.csv")
}

struct Verdicts(Vec<(usize, bool)>);

impl Verdicts {
    fn record(&mut self, n: usize, name: &str, pass: bool, detail: String) {
        println!("criterion {n} [{name}]: {} ({detail})", if pass { "PASS" } else { "FAIL" });
        self.0.push((n, pass));
    }
}

/// Spearman correlation with average ranks for ties.
fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn mean_series(r: &SweepResult, s: Strategy, metric: fn(&uav_urllc::sim::RunReport) -> f64) -> (Vec<f64>, Vec<f64>) {
    r.series(s, metric).into_iter().unzip()
}

fn base(zeta: f64, eps: f64, horizon: usize) -> ScenarioConfig {
    ScenarioConfig { tradeoff_zeta: zeta, outage_eps: eps, horizon, ..ScenarioConfig::default() }
}

fn fmt_series(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn criterion_1(v: &mut Verdicts) {
    let t0 = Instant::now();
    let cfg = TrafficConfig { dataset: dataset(), ..TrafficConfig::default() };
    let series = ingest_series(&cfg.dataset, &cfg.ingest_options()).expect("dataset");
    let f = rolling_forecast(&series.values[..cfg.window + 1200], cfg.window, cfg.refit_period).expect("forecast");
    let secs = t0.elapsed().as_secs_f64();
    let mse = f.mse();
    v.record(
        1,
        "predictor MSE",
        f.len() == 1200 && mse <= 0.01 && secs <= 300.0,
        format!("N = 600, 1200 predicted slots, mse {mse:.3e} <= 1e-2, {secs:.1} s <= 300 s"),
    );
}

fn criteria_2_and_3(v: &mut Verdicts, table: &TrafficTable) {
    let solver = SolverConfig::default();
    let t0 = Instant::now();
    let energy_runs: Vec<(f64, SweepResult)> = [0.01, 0.05]
        .into_iter()
        .map(|eps| {
            let r = sweep(
                SweepAxis::TotalBandwidth,
                &BANDWIDTH_MHZ,
                &base(ENERGY_ZETA, eps, 3),
                &solver,
                table,
                TRIALS,
                MASTER_SEED,
                &[Strategy::Proposed, Strategy::MaxPower],
            )
            .expect("energy sweep");
            (eps, r)
        })
        .collect();
    let secs = t0.elapsed().as_secs_f64();

    let (_, smallest) = &energy_runs[0];
    let (_, prop) = mean_series(smallest, Strategy::Proposed, |r| r.energy_j.mean);
    let (_, maxp) = mean_series(smallest, Strategy::MaxPower, |r| r.energy_j.mean);
    let gains: Vec<f64> = prop.iter().zip(&maxp).map(|(p, m)| 1.0 - p / m).collect();
    let min_gain = gains.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut feasible, mut dominated) = (0usize, 0usize);
    for (_, r) in &energy_runs {
        for point in &r.points {
            let a = point.report(Strategy::Proposed).expect("proposed");
            let b = point.report(Strategy::MaxPower).expect("max power");
            for ra in a.records.iter().filter(|t| t.feasible()) {
                if let Some(rb) = b.records.iter().find(|t| t.trial == ra.trial && t.feasible()) {
                    feasible += 1;
                    if ra.energy_j <= rb.energy_j {
                        dominated += 1;
                    }
                }
            }
        }
    }
    let share = dominated as f64 / feasible.max(1) as f64;
    v.record(
        2,
        "energy gain over max power",
        min_gain >= 0.10 && share >= 0.95 && feasible > 0 && secs <= 600.0,
        format!(
            "eps 0.01, U = 20, {TRIALS} trials, smallest gain over {:?} MHz {:.2}% >= 10%; proposed <= max power in {dominated}/{feasible} feasible trials; {secs:.1} s <= 600 s",
            BANDWIDTH_MHZ,
            100.0 * min_gain
        ),
    );

    let mut checks = Vec::new();
    let mut details = Vec::new();
    for (eps, r) in &energy_runs {
        let (x, y) = mean_series(r, Strategy::Proposed, |r| r.energy_j.mean);
        let rho = spearman(&x, &y);
        checks.push(rho <= -0.9);
        details.push(format!("energy vs bandwidth (eps {eps}) rho {rho:.3} <= -0.9 [{}]", fmt_series(&y)));
    }

    let users = |zeta: f64| {
        sweep(
            SweepAxis::NumUsers,
            &USERS,
            &base(zeta, 0.1, 3),
            &solver,
            table,
            TRIALS,
            MASTER_SEED,
            &[Strategy::Proposed],
        )
        .expect("users sweep")
    };
    let energy_users = users(ENERGY_ZETA);
    let (x, y) = mean_series(&energy_users, Strategy::Proposed, |r| r.energy_j.mean);
    let rho = spearman(&x, &y);
    checks.push(rho >= 0.9);
    details.push(format!("energy vs U rho {rho:.3} >= 0.9 [{}]", fmt_series(&y)));

    let rate_users = users(RATE_ZETA);
    let (x, y) = mean_series(&rate_users, Strategy::Proposed, |r| r.per_user_rate_bps.mean);
    let rho = spearman(&x, &y);
    checks.push(rho <= -0.9);
    details.push(format!("per-user rate vs U rho {rho:.3} <= -0.9 [{}]", fmt_series(&y)));

    let rate_bw = sweep(
        SweepAxis::TotalBandwidth,
        &RATE_BANDWIDTH_MHZ,
        &base(RATE_ZETA, 0.1, 3),
        &solver,
        table,
        TRIALS,
        MASTER_SEED,
        &[Strategy::Proposed],
    )
    .expect("rate sweep");
    let (x, y) = mean_series(&rate_bw, Strategy::Proposed, |r| r.per_user_rate_bps.mean);
    let rho = spearman(&x, &y);
    // The grid is uniform, so plain second differences measure curvature.
    let second: Vec<f64> = y.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect();
    let concave = second.iter().all(|d| *d <= 0.0);
    checks.push(rho >= 0.9 && concave);
    details.push(format!(
        "per-user rate vs bandwidth rho {rho:.3} >= 0.9, second differences [{}] <= 0",
        fmt_series(&second)
    ));

    let all_points = energy_runs.iter().all(|(_, r)| r.points.len() >= 5)
        && [&energy_users, &rate_users, &rate_bw].iter().all(|r| r.points.len() >= 5)
        && TRIALS >= 20;
    v.record(3, "trend reproduction", all_points && checks.iter().all(|c| *c), details.join("; "));
}

fn random_instance(
    rng: &mut ChaCha8Rng,
    users: usize,
    rbs: usize,
    loads: Vec<f64>,
    eps: f64,
    zeta: f64,
) -> ProblemInstance {
    let coverage = Rect::sized(250.0, 250.0);
    let pos =
        (0..users).map(|_| Position2D::new(rng.random_range(0.0..=250.0), rng.random_range(0.0..=250.0))).collect();
    let altitude = rng.random_range(100.0..=150.0);
    ProblemInstance::expected(pos, ChannelParams::default(), rbs, 10.0, 32.0, eps, loads, coverage, altitude, zeta)
}

fn criterion_4(v: &mut Verdicts) {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED ^ 4);
    let solver = SolverConfig::default();
    let (mut monotone, mut converged, mut worst_drop) = (0, 0, 0.0f64);
    for _ in 0..100 {
        let u = rng.random_range(5..=20usize);
        // Every user with traffic needs an RB of its own.
        let b = rng.random_range(u.max(5)..=25usize);
        let loads = (0..u).map(|_| rng.random_range(0.0..=250.0)).collect();
        let inst = random_instance(&mut rng, u, b, loads, 0.1, RATE_ZETA);
        let out = successive_maximization(&inst, &solver).expect("solve");
        let drop = out.objective_trace.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
        worst_drop = worst_drop.max(drop);
        if drop <= 1e-6 {
            monotone += 1;
        }
        if out.status == SolveStatus::Converged && out.iterations <= 100 {
            converged += 1;
        }
    }
    v.record(
        4,
        "BCD monotone and convergent",
        monotone == 100 && converged >= 95,
        format!("{monotone}/100 traces non-decreasing (largest drop {worst_drop:.2e} <= 1e-6), {converged}/100 converged within 100 iterations >= 95"),
    );
}

/// `sum r - zeta sum a p` when the allocation meets budget and reliability.
fn oracle_value(inst: &ProblemInstance, model: &RateModel, alloc: &Allocation) -> Option<f64> {
    let ch = &inst.channel;
    let mut value = 0.0;
    let mut spent = 0.0;
    for u in 0..inst.num_users() {
        let dx = alloc.uav_pos.x - inst.users[u].x;
        let dy = alloc.uav_pos.y - inst.users[u].y;
        let d = (dx * dx + dy * dy + inst.altitude * inst.altitude).sqrt();
        let gain = ch.gamma0 * (d / ch.ref_distance).powf(-ch.pathloss_exp);
        let mut rate = 0.0;
        for b in 0..inst.num_rbs {
            let (a, p) = (alloc.assign[(u, b)], alloc.power[(u, b)]);
            rate += model.rate(a, p, gain);
            spent += a * p;
        }
        let need = 8.0 * inst.packet_size * inst.predicted_loads[u] / inst.outage_eps;
        if rate < need * (1.0 - 1e-9) {
            return None;
        }
        value += rate;
    }
    if spent > inst.total_power * (1.0 + 1e-9) {
        return None;
    }
    Some(value - inst.tradeoff_zeta * spent)
}

fn exhaustive(inst: &ProblemInstance, model: &RateModel) -> Option<f64> {
    let (u, b) = (inst.num_users(), inst.num_rbs);
    let c = inst.coverage;
    let xs = [c.x_min, 0.5 * (c.x_min + c.x_max), c.x_max];
    let ys = [c.y_min, 0.5 * (c.y_min + c.y_max), c.y_max];
    let levels = [0.0, 0.5 * inst.total_power, inst.total_power];
    let owners = (u + 1).pow(b as u32);
    let powers = levels.len().pow(b as u32);
    let mut best: Option<f64> = None;
    for &x in &xs {
        for &y in &ys {
            for o in 0..owners {
                for pw in 0..powers {
                    let mut alloc = Allocation::empty(inst);
                    alloc.uav_pos = Position2D::new(x, y).at_altitude(inst.altitude);
                    let (mut o, mut pw) = (o, pw);
                    for rb in 0..b {
                        let owner = o % (u + 1);
                        let level = levels[pw % levels.len()];
                        o /= u + 1;
                        pw /= levels.len();
                        if owner < u {
                            alloc.assign[(owner, rb)] = 1.0;
                            alloc.power[(owner, rb)] = level;
                        }
                    }
                    if let Some(val) = oracle_value(inst, model, &alloc) {
                        best = Some(best.map_or(val, |b: f64| b.max(val)));
                    }
                }
            }
        }
    }
    best
}

fn criterion_5(v: &mut Verdicts) {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED ^ 5);
    let solver = SolverConfig::default();
    let (mut compared, mut within, mut worst) = (0, 0, f64::INFINITY);
    let mut attempts = 0;
    while compared < 50 && attempts < 500 {
        attempts += 1;
        let u = rng.random_range(1..=2usize);
        let b = rng.random_range(1..=2usize);
        let loads = (0..u).map(|k| if k < b { rng.random_range(0.0..=200.0) } else { 0.0 }).collect();
        let eps = [0.01, 0.05, 0.1][rng.random_range(0..3)];
        let zeta = [1e4, 1e6, 1e8][rng.random_range(0..3)];
        let inst = random_instance(&mut rng, u, b, loads, eps, zeta);
        let model = inst.channel.rate_model().expect("rate model");
        let Some(opt) = exhaustive(&inst, &model) else { continue };
        compared += 1;
        let out = successive_maximization(&inst, &solver).expect("solve");
        let got = oracle_value(&inst, &model, &out.allocation).unwrap_or(f64::NEG_INFINITY);
        let margin = (got - opt) / opt.abs();
        worst = worst.min(margin);
        if margin >= -0.05 {
            within += 1;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    v.record(
        5,
        "exhaustive-search oracle",
        compared == 50 && within == 50 && secs <= 60.0,
        format!("{within}/{compared} micro-instances within 5% of the grid optimum (worst relative margin {worst:+.4}), {secs:.2} s <= 60 s"),
    );
}

fn q_bisect(theta: f64) -> f64 {
    let q = |x: f64| 0.5 * libm::erfc(x / std::f64::consts::SQRT_2);
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if q(mid) > theta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn criterion_6(v: &mut Verdicts) {
    let mut q_err = 0.0f64;
    for k in 0..=400 {
        let theta = 10f64.powf(-8.0 + k as f64 * (0.5f64.log10() + 8.0) / 400.0);
        q_err = q_err.max((q_inv(theta).expect("q_inv") - q_bisect(theta)).abs());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED ^ 6);
    let mut grad_err = 0.0f64;
    for _ in 0..50 {
        let u = rng.random_range(2..=8usize);
        let b = rng.random_range(u..=12usize);
        let loads = vec![0.0; u];
        let inst = random_instance(&mut rng, u, b, loads, 0.1, RATE_ZETA);
        let mut alloc = Allocation::empty(&inst);
        for rb in 0..b {
            let owner = rng.random_range(0..u);
            alloc.assign[(owner, rb)] = 1.0;
            alloc.power[(owner, rb)] = rng.random_range(0.1..=1.0) * inst.total_power / b as f64;
        }
        alloc.uav_pos =
            Position2D::new(rng.random_range(25.0..=225.0), rng.random_range(25.0..=225.0)).at_altitude(inst.altitude);
        let (_, g) = position_gradient(&inst, &alloc).expect("gradient");
        let h = 1e-3;
        let mut fd = [0.0; 2];
        for (axis, slot) in fd.iter_mut().enumerate() {
            let shifted = |s: f64| {
                let mut a = alloc.clone();
                if axis == 0 {
                    a.uav_pos.x += s;
                } else {
                    a.uav_pos.y += s;
                }
                objective(&inst, &a).expect("objective")
            };
            *slot = (shifted(h) - shifted(-h)) / (2.0 * h);
        }
        let diff = ((g[0] - fd[0]).powi(2) + (g[1] - fd[1]).powi(2)).sqrt();
        let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
        grad_err = grad_err.max(diff / norm);
    }

    let mut gp_err = 0.0f64;
    for _ in 0..100 {
        let t0 = rng.random_range(0..1000) as f64;
        let times: Vec<f64> = (0..5).map(|k| t0 + k as f64).collect();
        let values: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..=1.0)).collect();
        let params = KernelParams::new(
            rng.random_range(0.1..=10.0),
            rng.random_range(2.0..=100.0),
            rng.random_range(1e-4..=1e-1),
        )
        .expect("params");
        let kern = |a: f64, b: f64| (-((PI * (a - b) / params.theta2).sin().powi(2)) / params.theta1).exp();
        let k = DMatrix::from_fn(5, 5, |i, j| kern(times[i], times[j]) + if i == j { params.noise_var } else { 0.0 });
        let query = t0 + 5.0;
        let ks = DVector::from_iterator(5, times.iter().map(|&t| kern(query, t)));
        let lu = k.lu();
        let alpha = lu.solve(&DVector::from_column_slice(&values)).expect("solve");
        let beta = lu.solve(&ks).expect("solve");
        let p = gp_posterior(&times, &values, query, &params).expect("posterior");
        gp_err = gp_err.max((p.mean - ks.dot(&alpha)).abs()).max((p.variance - (1.0 - ks.dot(&beta))).abs());
    }

    v.record(
        6,
        "numerical kernels",
        q_err <= 1e-9 && grad_err <= 1e-4 && gp_err <= 1e-8,
        format!(
            "q_inv vs bisection max error {q_err:.2e} <= 1e-9; position gradient vs central differences max relative error {grad_err:.2e} <= 1e-4 over 50 states; GP posterior vs direct solve max error {gp_err:.2e} <= 1e-8"
        ),
    );
}

fn criterion_7(v: &mut Verdicts, table: &TrafficTable) {
    let cfg = ScenarioConfig::default();
    let trials = 10;
    let r = sweep(
        SweepAxis::OutageEps,
        &[0.1],
        &cfg,
        &SolverConfig::default(),
        table,
        trials,
        MASTER_SEED,
        &[Strategy::Proposed],
    )
    .expect("sweep");
    let rep = r.points[0].report(Strategy::Proposed).expect("proposed");
    let user_slots = rep.trials * cfg.num_users * cfg.horizon;
    let freq = rep.violation_freq.mean;
    v.record(
        7,
        "chance constraint",
        user_slots >= 500 && freq <= 0.15 && table.config().kappa == 1.0,
        format!(
            "kappa 1, eps 0.1, default scenario, violation frequency {freq:.4} <= 0.15 over {user_slots} user-slots"
        ),
    );
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).expect("read dir") {
            let p = e.expect("entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).expect("prefix").to_path_buf(), fs::read(&p).expect("read"));
            }
        }
    }
    out
}

fn criterion_8(v: &mut Verdicts) {
    let work = std::env::temp_dir().join(format!("uav-urllc-acceptance-{}", std::process::id()));
    let _ = fs::remove_dir_all(&work);
    let config = format!(
        "master_seed = 42\n[scenario]\nnum_users = 5\nnum_rbs = 10\nhorizon = 2\n[traffic]\ndataset = {:?}\n[sweep]\nvalues = [0.05, 0.1]\ntrials = 2\n",
        dataset().display().to_string()
    );
    let mut trees = Vec::new();
    let mut ok = true;
    for run in ["a", "b"] {
        let cwd = work.join(run);
        fs::create_dir_all(&cwd).expect("mkdir");
        fs::write(cwd.join("run.toml"), &config).expect("config");
        for cmd in ["sweep", "compare", "solve"] {
            let status = Command::new(env!("CARGO_BIN_EXE_uav-urllc"))
                .args([cmd, "--config", "run.toml"])
                .current_dir(&cwd)
                .output()
                .expect("spawn");
            ok &= status.status.success();
        }
        trees.push(tree(&cwd.join("results")));
    }
    let files = trees[0].len();
    let identical = ok && files > 0 && trees[0] == trees[1];
    let _ = fs::remove_dir_all(&work);
    v.record(
        8,
        "reproducibility",
        identical,
        format!("sweep, compare and solve run twice: {files} report files byte-identical"),
    );
}

fn main() -> ExitCode {
    let t0 = Instant::now();
    let mut v = Verdicts(Vec::new());
    criterion_1(&mut v);

    let mut table =
        TrafficTable::load(&TrafficConfig { dataset: dataset(), ..TrafficConfig::default() }, 5).expect("traffic");
    table.ensure_users(20).expect("forecasts");
    criteria_2_and_3(&mut v, &table);
    criterion_4(&mut v);
    criterion_5(&mut v);
    criterion_6(&mut v);
    criterion_7(&mut v, &table);
    criterion_8(&mut v);

    v.0.sort();
    let failed: Vec<usize> = v.0.iter().filter(|(_, p)| !p).map(|(n, _)| *n).collect();
    println!(
        "acceptance: {}/{} criteria pass in {:.0} s",
        v.0.len() - failed.len(),
        v.0.len(),
        t0.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {failed:?}");
        ExitCode::FAILURE
    }
}
