//! Scenarios, baselines and Monte Carlo evaluation.
//!
//! Every slot is planned on expected channel gains and evaluated on freshly
//! drawn Rician fading. Loads come from a [`TrafficTable`] of per-user
//! rolling forecasts; a user's trace is the dataset read from a staggered
//! start index.

mod report;
mod run;
mod sweep;
mod table;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, Position2D};
use crate::error::{Error, Result};
use crate::optimizer::Rect;

pub use report::{RunReport, SlotRecord, Stat, TrialRecord};
pub use run::{
    baseline_max_power, baseline_random_placement, max_power_from, run_slot, run_trial, slot_instance, SlotOutcome,
};
pub use sweep::{sweep, SweepAxis, SweepPoint, SweepResult};
pub use table::{SlotLoad, TrafficConfig, TrafficTable};

/// Scenario knobs; defaults follow the reference experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_users: usize,
    /// Coverage rectangle `[0, width] x [0, height]` in meters.
    pub coverage_width: f64,
    pub coverage_height: f64,
    /// The altitude is drawn once per scenario from this range.
    pub altitude_min: f64,
    pub altitude_max: f64,
    pub channel: ChannelParams,
    pub num_rbs: usize,
    /// `P_max` in W.
    pub total_power: f64,
    /// Packet size in bytes.
    pub packet_size: f64,
    pub outage_eps: f64,
    /// Price of one watt in bit/s.
    pub tradeoff_zeta: f64,
    /// Evaluated slots after the predictor warm-up.
    pub horizon: usize,
    /// Seconds per slot; converts power to energy.
    pub slot_duration: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_users: 20,
            coverage_width: 250.0,
            coverage_height: 250.0,
            altitude_min: 100.0,
            altitude_max: 150.0,
            channel: ChannelParams::default(),
            num_rbs: 50,
            total_power: 10.0,
            packet_size: 32.0,
            outage_eps: 0.1,
            tradeoff_zeta: 1e4,
            horizon: 5,
            slot_duration: 1e-3,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        let checks = [
            ("num_users", self.num_users >= 1),
            ("coverage_width", self.coverage_width > 0.0 && self.coverage_width.is_finite()),
            ("coverage_height", self.coverage_height > 0.0 && self.coverage_height.is_finite()),
            ("altitude_min", self.altitude_min > 0.0),
            ("altitude_max", self.altitude_max >= self.altitude_min && self.altitude_max.is_finite()),
            ("num_rbs", self.num_rbs >= 1),
            ("total_power", self.total_power > 0.0 && self.total_power.is_finite()),
            ("packet_size", self.packet_size > 0.0),
            ("outage_eps", self.outage_eps > 0.0 && self.outage_eps < 1.0),
            ("tradeoff_zeta", self.tradeoff_zeta >= 0.0 && self.tradeoff_zeta.is_finite()),
            ("horizon", self.horizon >= 1),
            ("slot_duration", self.slot_duration > 0.0),
        ];
        for (name, ok) in checks {
            if !ok {
                return Err(Error::invalid(format!("scenario.{name} out of range")));
            }
        }
        Ok(())
    }

    pub fn coverage(&self) -> Rect {
        Rect::sized(self.coverage_width, self.coverage_height)
    }

    /// Total bandwidth `B * w` in Hz.
    pub fn total_bandwidth(&self) -> f64 {
        self.num_rbs as f64 * self.channel.rb_bandwidth
    }
}

/// One drawn scenario: user positions and altitude, plus the fixed parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub users: Vec<Position2D>,
    pub altitude: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn coverage(&self) -> Rect {
        self.config.coverage()
    }
}

/// Users i.i.d. uniform over the coverage rectangle, altitude uniform over its
/// range. The altitude is drawn first and users one by one, so the first `k`
/// users of a larger scenario match a `k`-user scenario with the same seed.
pub fn generate_scenario(config: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let altitude = if config.altitude_max > config.altitude_min {
        rng.random_range(config.altitude_min..=config.altitude_max)
    } else {
        config.altitude_min
    };
    let users = (0..config.num_users)
        .map(|_| {
            let x = rng.random_range(0.0..=config.coverage_width);
            let y = rng.random_range(0.0..=config.coverage_height);
            Position2D::new(x, y)
        })
        .collect();
    Ok(Scenario { config: config.clone(), users, altitude, seed })
}

/// Scenario of trial `trial` under `master_seed`, as drawn by [`run_trial`].
pub fn trial_scenario(config: &ScenarioConfig, master_seed: u64, trial: usize) -> Result<Scenario> {
    generate_scenario(config, derive_seed(master_seed, &[stream::SCENARIO, trial as u64]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Proposed,
    /// The proposed assignment and position with `P_max / B` on every assigned RB.
    MaxPower,
    /// Assignment and power optimized at a uniformly drawn UAV position.
    #[serde(rename = "random", alias = "random_placement")]
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Proposed, Strategy::MaxPower, Strategy::Random];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Proposed => "proposed",
            Strategy::MaxPower => "max_power",
            Strategy::Random => "random",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Strategy::Proposed),
            "max_power" => Ok(Strategy::MaxPower),
            "random" | "random_placement" => Ok(Strategy::Random),
            _ => Err(Error::invalid(format!("unknown strategy {s:?} (proposed, max_power, random)"))),
        }
    }
}

/// Mixes `parts` into `master` (SplitMix64 finalizer per word).
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    parts.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

/// Random streams of one trial.
pub(crate) mod stream {
    pub const SCENARIO: u64 = 0;
    pub const FADING: u64 = 1;
    pub const PLACEMENT: u64 = 2;
}
