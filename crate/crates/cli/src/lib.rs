//! Batch experiments over the `uav_urllc` core: prediction replays, single
//! solves, parameter sweeps and paired strategy comparisons.

pub mod commands;
pub mod config;
pub mod output;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("output: {0}")]
    Output(#[from] std::io::Error),

    #[error("{0}")]
    Other(String),
}

impl CliError {
    /// 2 configuration, 3 infeasible instance, 4 dataset, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Dataset(_) => 4,
            CliError::Output(_) | CliError::Other(_) => 1,
        }
    }
}

impl From<uav_urllc::Error> for CliError {
    fn from(e: uav_urllc::Error) -> Self {
        use uav_urllc::Error as E;
        match e {
            E::InvalidParameter(m) => CliError::Config(m),
            E::Dataset(m) | E::Window(m) => CliError::Dataset(m),
            other => CliError::Other(other.to_string()),
        }
    }
}
