//! RIS channel simulator.
//!
//! Alice and Bob each see the RIS through an `L`-path Rayleigh channel on a
//! uniform planar array. The combined Alice-RIS-Bob channel is
//! `g = Σ_m w_m g_AR,m g_BR,m`, and one probing round exchanges random signals
//! of power `P_t` over it while the RIS records what it receives.

mod channel;
mod dataset;
mod io;
mod params;
mod probe;

pub use channel::{
    combined_channel, sample_direct_channel, sample_ris_phase, steering_vector, ChannelVector,
    LinkGeometry, RisPhase,
};
pub use dataset::{generate_dataset, Dataset, DatasetConfig, GeometrySampler, GridSpec, Split};
pub use io::{read_dataset, write_dataset, FORMAT_VERSION};
pub use params::{db_to_linear, linear_to_db, SystemParams};
pub use probe::{sample_noise, sample_probe_round, sample_probe_round_with, ProbeRound, ProbeSignals};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChanError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("angle {value} outside [-pi/2, pi/2] ({name})")]
    AngleOutOfRange { name: &'static str, value: f64 },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("dataset format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ChanError>;
