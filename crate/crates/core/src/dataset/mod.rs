//! Telemetry ingestion and dataset preparation: CSV parsing, uniform
//! resampling, normalization, training-window extraction, synthetic flight
//! generation and trajectory-level splits.

pub mod interp;
pub mod normalize;
pub mod split;
pub mod synth;
pub mod telemetry;
pub mod windows;

pub use interp::resample_uniform;
pub use normalize::NormStats;
pub use split::split_trajectories;
pub use synth::{synth_trajectories, SynthOptions};
pub use telemetry::{load_csv, save_csv};
pub use windows::{make_windows, window_count, window_to_example, Window};

use thiserror::Error;

use crate::quadstate::{ControlInput, QuadState};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// One recorded (or simulated) flight: time stamps, full states and motor
/// commands, sample-aligned.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub states: Vec<QuadState>,
    pub controls: Vec<ControlInput>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}
