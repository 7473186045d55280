//! Run configuration: a TOML tree of overrides on the reference defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use uav_urllc::channel::{db_to_linear, dbm_to_watts, ChannelParams};
use uav_urllc::optimizer::SolverConfig;
use uav_urllc::sim::{ScenarioConfig, Strategy, SweepAxis, TrafficConfig};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    pub scenario: ScenarioBlock,
    pub solver: SolverConfig,
    pub traffic: TrafficConfig,
    pub predict: PredictBlock,
    pub sweep: SweepBlock,
    pub output: OutputBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: 1,
            scenario: ScenarioBlock::default(),
            solver: SolverConfig::default(),
            traffic: TrafficConfig::default(),
            predict: PredictBlock::default(),
            sweep: SweepBlock::default(),
            output: OutputBlock::default(),
        }
    }
}

/// Scenario parameters as written in config files; radio constants in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioBlock {
    pub num_users: usize,
    pub coverage_width: f64,
    pub coverage_height: f64,
    pub altitude_min: f64,
    pub altitude_max: f64,
    pub num_rbs: usize,
    /// W.
    pub total_power: f64,
    /// Bytes.
    pub packet_size: f64,
    pub outage_eps: f64,
    /// (bit/s)/W.
    pub tradeoff_zeta: f64,
    pub horizon: usize,
    /// Seconds.
    pub slot_duration: f64,
    pub channel: ChannelBlock,
}

impl Default for ScenarioBlock {
    fn default() -> Self {
        let s = ScenarioConfig::default();
        Self {
            num_users: s.num_users,
            coverage_width: s.coverage_width,
            coverage_height: s.coverage_height,
            altitude_min: s.altitude_min,
            altitude_max: s.altitude_max,
            num_rbs: s.num_rbs,
            total_power: s.total_power,
            packet_size: s.packet_size,
            outage_eps: s.outage_eps,
            tradeoff_zeta: s.tradeoff_zeta,
            horizon: s.horizon,
            slot_duration: s.slot_duration,
            channel: ChannelBlock::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelBlock {
    pub gamma0_db: f64,
    pub pathloss_exp: f64,
    pub noise_dbm_per_hz: f64,
    pub rb_bandwidth_hz: f64,
    /// Linear Rician factor.
    pub rician_k: f64,
    pub blocklength: u32,
    pub decode_err: f64,
    pub ref_distance: f64,
}

impl Default for ChannelBlock {
    fn default() -> Self {
        let c = ChannelParams::default();
        Self {
            gamma0_db: -30.0,
            pathloss_exp: c.pathloss_exp,
            noise_dbm_per_hz: -174.0,
            rb_bandwidth_hz: c.rb_bandwidth,
            rician_k: c.rician_k,
            blocklength: c.blocklength,
            decode_err: c.decode_err,
            ref_distance: c.ref_distance,
        }
    }
}

impl ChannelBlock {
    pub fn params(&self) -> ChannelParams {
        ChannelParams {
            gamma0: db_to_linear(self.gamma0_db),
            pathloss_exp: self.pathloss_exp,
            noise_density: dbm_to_watts(self.noise_dbm_per_hz),
            rb_bandwidth: self.rb_bandwidth_hz,
            rician_k: self.rician_k,
            blocklength: self.blocklength,
            decode_err: self.decode_err,
            ref_distance: self.ref_distance,
        }
    }
}

/// Slice of the dataset replayed by `predict`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictBlock {
    /// First dataset row of the warm-up window.
    pub offset: usize,
    /// Predicted slots after the warm-up.
    pub slots: usize,
}

impl Default for PredictBlock {
    fn default() -> Self {
        Self { offset: 0, slots: 1200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBlock {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub trials: usize,
    pub strategies: Vec<Strategy>,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            axis: SweepAxis::OutageEps,
            values: vec![0.01, 0.05, 0.1],
            trials: 20,
            strategies: Strategy::ALL.to_vec(),
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: PathBuf::from("results"), formats: vec![Format::Csv, Format::Json] }
    }
}

impl RunConfig {
    /// Defaults when `path` is `None`, else the file's overrides on them.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("every field has a TOML form")
    }

    /// SHA-256 of the emitted effective config, hex.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn scenario_config(&self) -> ScenarioConfig {
        let s = &self.scenario;
        ScenarioConfig {
            num_users: s.num_users,
            coverage_width: s.coverage_width,
            coverage_height: s.coverage_height,
            altitude_min: s.altitude_min,
            altitude_max: s.altitude_max,
            channel: s.channel.params(),
            num_rbs: s.num_rbs,
            total_power: s.total_power,
            packet_size: s.packet_size,
            outage_eps: s.outage_eps,
            tradeoff_zeta: s.tradeoff_zeta,
            horizon: s.horizon,
            slot_duration: s.slot_duration,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.scenario_config().validate()?;
        self.solver.validate()?;
        self.traffic.validate()?;
        if self.predict.slots == 0 {
            return Err(CliError::Config("predict.slots must be at least 1".into()));
        }
        if self.sweep.values.is_empty() || self.sweep.trials == 0 || self.sweep.strategies.is_empty() {
            return Err(CliError::Config("sweep needs values, trials >= 1 and a strategy".into()));
        }
        if self.output.formats.is_empty() {
            return Err(CliError::Config("output.formats is empty".into()));
        }
        Ok(())
    }

    pub fn writes(&self, format: Format) -> bool {
        self.output.formats.contains(&format)
    }
}
