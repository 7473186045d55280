use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use proptest::prelude::*;
use uav_urllc::sim::{Strategy as Plan, SweepAxis};
use uav_urllc_cli::RunConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uav-urllc"))
}

/// A 240-row noisy sinusoid in the dataset's column layout.
fn synthetic_dataset(dir: &Path) -> PathBuf {
    let path = dir.join("load.csv");
    let mut text = String::from("Date,Close\n");
    for i in 0..240 {
        let v = 100.0 + 10.0 * (i as f64 * 0.21).sin() + ((i * 7919) % 13) as f64 * 0.1;
        text.push_str(&format!("d{i},{v}\n"));
    }
    fs::write(&path, text).unwrap();
    path
}

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let data = synthetic_dataset(dir);
    let path = dir.join("run.toml");
    let text = format!(
        "master_seed = 11\n[scenario]\nnum_users = 3\nnum_rbs = 6\nhorizon = 2\n[traffic]\ndataset = {:?}\nwindow = 40\nuser_stride = 30\n[predict]\nslots = 60\n{extra}",
        data.display().to_string()
    );
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], config: &Path, out: &Path) -> std::process::Output {
    bin().args(args).arg("--config").arg(config).arg("--out").arg(out).output().unwrap()
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let cfg = small_config(dir.path(), "");
    let ok = run(&["solve"], &cfg, &out);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[scenario]\nnum_users = 0\n").unwrap();
    assert_eq!(run(&["solve"], &bad, &out).status.code(), Some(2));
    fs::write(&bad, "[solver]\nbcd_tolerance = 1.0\n").unwrap();
    assert_eq!(run(&["solve"], &bad, &out).status.code(), Some(2));
    assert_eq!(run(&["sweep", "--axis", "power"], &cfg, &out).status.code(), Some(2));

    fs::write(&bad, "[traffic]\ndataset = \"/definitely/missing.csv\"\n").unwrap();
    assert_eq!(run(&["predict"], &bad, &out).status.code(), Some(4));

    // One RB cannot carry three users at a 1e-4 outage target on a microwatt budget.
    let tight = small_config(dir.path(), "");
    let text = fs::read_to_string(&tight)
        .unwrap()
        .replace("num_rbs = 6", "num_rbs = 1\ntotal_power = 1e-6\noutage_eps = 0.0001");
    fs::write(&tight, text).unwrap();
    let inf = run(&["solve"], &tight, &out);
    assert_eq!(inf.status.code(), Some(3), "{}", String::from_utf8_lossy(&inf.stderr));
    assert!(String::from_utf8_lossy(&inf.stderr).contains("short of its reliability target"));
}

#[test]
fn every_output_file_names_seed_and_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = small_config(dir.path(), "");
    let out = dir.path().join("out");
    let r = run(&["sweep", "--axis", "eps", "--values", "0.05,0.1", "--trials", "2", "--seed", "5"], &cfg_path, &out);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));

    let effective = RunConfig::parse(&fs::read_to_string(out.join("config.toml")).unwrap()).unwrap();
    assert_eq!(effective.master_seed, 5);
    assert_eq!(effective.sweep.values, vec![0.05, 0.1]);
    let header = format!("# master_seed=5 config_sha256={}", effective.hash());

    let mut files = Vec::new();
    let mut stack = vec![out.clone()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push(p);
            }
        }
    }
    assert!(files.len() > 30);
    for f in files {
        let text = fs::read_to_string(&f).unwrap();
        if f.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v["meta"]["master_seed"], 5);
            assert_eq!(v["meta"]["config_sha256"], effective.hash().as_str());
        } else {
            assert_eq!(text.lines().next().unwrap(), header, "{}", f.display());
        }
    }
    let series = fs::read_to_string(out.join("sweep_eps_proposed.csv")).unwrap();
    assert_eq!(series.lines().count(), 4);
    let slots = fs::read_to_string(out.join("slots_eps_0.csv")).unwrap();
    assert_eq!(
        slots.lines().nth(1).unwrap(),
        "trial,slot,strategy,objective,energy_j,sum_rate_bps,min_user_rate_bps,violations,infeasible_flag"
    );
}

#[test]
fn predict_rows_and_constant_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dir.path().join("p");
    assert!(run(&["predict"], &cfg, &out).status.success());
    let rows = fs::read_to_string(out.join("predict.csv")).unwrap();
    // Header comment, column header, then stream length minus warm-up.
    assert_eq!(rows.lines().count(), 2 + 60);

    let flat = dir.path().join("flat.csv");
    let mut text = String::from("Date,Close\n");
    for i in 0..120 {
        text.push_str(&format!("d{i},{}\n", if i == 0 { 10.0 } else { 20.0 }));
    }
    fs::write(&flat, text).unwrap();
    let cfg2 = dir.path().join("flat.toml");
    fs::write(
        &cfg2,
        format!(
            "[traffic]\ndataset = {:?}\nwindow = 30\n[predict]\noffset = 10\nslots = 50\n",
            flat.display().to_string()
        ),
    )
    .unwrap();
    let out2 = dir.path().join("f");
    let r = run(&["predict"], &cfg2, &out2);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out2.join("predict.json")).unwrap()).unwrap();
    assert_eq!(v["data"]["rows"], 50);
    assert!(v["data"]["mse"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn single_point_sweep_matches_solve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let text = fs::read_to_string(&cfg).unwrap().replace("horizon = 2", "horizon = 1");
    fs::write(&cfg, text).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&["solve"], &cfg, &a).status.success());
    let r = run(&["sweep", "--axis", "eps", "--values", "0.1", "--trials", "1", "--strategy", "proposed"], &cfg, &b);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));

    let solve: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("solve.json")).unwrap()).unwrap();
    let sweep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(b.join("sweep_eps.json")).unwrap()).unwrap();
    let alloc = &solve["data"]["outcome"]["allocation"];
    let rows = |m: &serde_json::Value| -> Vec<Vec<f64>> { serde_json::from_value(m.clone()).unwrap() };
    let radiated: f64 =
        rows(&alloc["assign"]).iter().flatten().zip(rows(&alloc["power"]).iter().flatten()).map(|(a, p)| a * p).sum();
    let energy = sweep["data"]["points"][0]["reports"][0]["energy_j"]["mean"].as_f64().unwrap();
    assert!((energy - radiated * 1e-3).abs() <= 1e-12 * energy.abs().max(1e-300), "{energy} vs {radiated}");
    assert_eq!(solve["data"]["outcome"]["status"], "converged");
}

#[test]
fn compare_reports_paired_intervals() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dir.path().join("c");
    let r = run(&["compare", "--trials", "1", "--strategy", "proposed,random"], &cfg, &out);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("compare.json")).unwrap()).unwrap();
    let paired = v["data"]["paired"].as_array().unwrap();
    assert_eq!(paired.len(), 4);
    for d in paired {
        assert_eq!(d["ci_low"], d["mean"]);
        assert_eq!(d["ci_high"], d["mean"]);
    }
    for rep in v["data"]["reports"].as_array().unwrap() {
        assert!(rep["violation_freq"]["mean"].is_number());
    }
}

#[test]
fn show_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "[sweep]\naxis = \"bandwidth\"\nvalues = [1.8, 3.6]\n");
    let first = bin().args(["show-config", "--config"]).arg(&cfg).output().unwrap();
    assert!(first.status.success());
    let emitted = dir.path().join("emitted.toml");
    fs::write(&emitted, &first.stdout).unwrap();
    let second = bin().args(["show-config", "--config"]).arg(&emitted).output().unwrap();
    assert_eq!(first.stdout, second.stdout);
}

fn arb_config() -> impl Strategy<Value = RunConfig> {
    (
        any::<u64>(),
        1usize..200,
        1usize..400,
        1e-4f64..0.99,
        0.0f64..1e16,
        -60.0f64..0.0,
        prop::sample::select(vec![SweepAxis::OutageEps, SweepAxis::NumUsers, SweepAxis::TotalBandwidth]),
        prop::collection::vec(1e-3f64..1e3, 1..6),
        prop::sample::subsequence(Plan::ALL.to_vec(), 1..=3),
        0.0f64..5.0,
    )
        .prop_map(|(seed, users, rbs, eps, zeta, gamma, axis, values, strategies, kappa)| {
            let mut c = RunConfig { master_seed: seed, ..RunConfig::default() };
            c.scenario.num_users = users;
            c.scenario.num_rbs = rbs;
            c.scenario.outage_eps = eps;
            c.scenario.tradeoff_zeta = zeta;
            c.scenario.channel.gamma0_db = gamma;
            c.sweep.axis = axis;
            c.sweep.values = values;
            c.sweep.strategies = strategies;
            c.traffic.kappa = kappa;
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_emission_is_idempotent(cfg in arb_config()) {
        let text = cfg.to_toml();
        let back = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml(), text);
        prop_assert_eq!(back.hash(), cfg.hash());
    }
}
