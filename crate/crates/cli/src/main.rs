use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uav_urllc::sim::{Strategy, SweepAxis};
use uav_urllc_cli::commands::{compare, predict, solve, sweep_cmd};
use uav_urllc_cli::output::OutputDir;
use uav_urllc_cli::{CliError, RunConfig};

/// UAV base station URLLC experiments: load prediction, joint RB / power /
/// placement solves, sweeps and baseline comparisons.
///
/// Exit codes: 0 success, 2 configuration error, 3 infeasible instance,
/// 4 dataset error.
#[derive(Parser)]
#[command(name = "uav-urllc", version)]
struct Cli {
    /// TOML overrides on the built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides `master_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Trials {
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated strategies (proposed, max_power, random).
    #[arg(long, value_delimiter = ',')]
    strategy: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum Command {
    /// Rolling one-step load forecast over the dataset; prints the MSE.
    Predict,
    /// One slot of one scenario, with the full objective trace.
    Solve,
    /// Monte Carlo sweep over one scenario parameter.
    Sweep {
        /// eps, users or bandwidth (MHz).
        #[arg(long)]
        axis: Option<String>,
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[command(flatten)]
        trials: Trials,
    },
    /// All strategies on the same trials with paired differences.
    Compare {
        #[command(flatten)]
        trials: Trials,
    },
    /// Prints the effective configuration.
    ShowConfig,
}

fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    let trials = match &cli.command {
        Command::Sweep { axis, values, trials } => {
            if let Some(a) = axis {
                cfg.sweep.axis = a.parse::<SweepAxis>()?;
            }
            if let Some(v) = values {
                cfg.sweep.values = v.clone();
            }
            Some(trials)
        }
        Command::Compare { trials } => Some(trials),
        _ => None,
    };
    if let Some(t) = trials {
        if let Some(n) = t.trials {
            cfg.sweep.trials = n;
        }
        if let Some(names) = &t.strategy {
            cfg.sweep.strategies = names.iter().map(|s| s.trim().parse::<Strategy>()).collect::<Result<_, _>>()?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = effective_config(cli)?;
    if let Command::ShowConfig = cli.command {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    if cfg.sweep.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.sweep.threads)
            .build_global()
            .map_err(|e| CliError::Other(e.to_string()))?;
    }
    let mut out = OutputDir::create(&cfg)?;
    match &cli.command {
        Command::Predict => {
            let s = predict(&cfg, &mut out)?;
            println!("predicted {} slots, {} refits, mse {:.6}", s.rows, s.refits, s.mse);
        }
        Command::Solve => {
            // Infeasible solves still write their files before the error surfaces.
            let o = solve(&cfg, &mut out)?;
            println!(
                "status {:?} after {} iterations, objective {:.6e}, radiated power {:.6e} W",
                o.status,
                o.iterations,
                o.objective,
                o.allocation.radiated_power()
            );
        }
        Command::Sweep { .. } => {
            let r = sweep_cmd(&cfg, &mut out)?;
            for p in &r.points {
                for rep in &p.reports {
                    println!(
                        "{} = {}: {:<9} energy {:.4e} J (sd {:.2e}), per-user rate {:.4e} bit/s, violations {:.3}, feasible {}/{}",
                        r.axis,
                        p.value,
                        rep.strategy,
                        rep.energy_j.mean,
                        rep.energy_j.std,
                        rep.per_user_rate_bps.mean,
                        rep.violation_freq.mean,
                        rep.feasible_trials,
                        rep.trials
                    );
                }
            }
        }
        Command::Compare { .. } => {
            let c = compare(&cfg, &mut out)?;
            for d in &c.paired {
                println!(
                    "{} - {} {}: {:.4e} [{:.4e}, {:.4e}] over {} trials ({} wins)",
                    d.reference, d.other, d.metric, d.mean, d.ci_low, d.ci_high, d.trials, d.reference_wins
                );
            }
        }
        Command::ShowConfig => unreachable!(),
    }
    println!("wrote {} files to {}", out.written().len(), out.dir().display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
