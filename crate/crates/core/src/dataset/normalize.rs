//! Per-channel z-score normalization. Statistics are fitted on training
//! trajectories only and applied everywhere; label statistics are the state
//! statistics of the body-rate and velocity channels, so normalized labels
//! agree with the corresponding normalized state rows.

use super::{DataError, Trajectory};
use crate::quadstate::{ControlInput, QuadState, TruncatedState, CONTROL_DIM, STATE_DIM, TRUNC_DIM};

/// A channel whose standard deviation falls below this is treated as
/// constant: its scale is pinned to 1 so normalization is a pure shift.
pub const CONSTANT_STD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub state_mean: [f64; STATE_DIM],
    pub state_std: [f64; STATE_DIM],
    pub control_mean: [f64; CONTROL_DIM],
    pub control_std: [f64; CONTROL_DIM],
    pub constant_state: [bool; STATE_DIM],
    pub constant_control: [bool; CONTROL_DIM],
}

impl NormStats {
    /// Identity transform: zero mean, unit scale.
    pub fn identity() -> Self {
        NormStats {
            state_mean: [0.0; STATE_DIM],
            state_std: [1.0; STATE_DIM],
            control_mean: [0.0; CONTROL_DIM],
            control_std: [1.0; CONTROL_DIM],
            constant_state: [false; STATE_DIM],
            constant_control: [false; CONTROL_DIM],
        }
    }

    /// Fits means and population standard deviations over every sample of
    /// the given (training) trajectories.
    pub fn fit(trajectories: &[Trajectory]) -> Result<Self, DataError> {
        let total: usize = trajectories.iter().map(Trajectory::len).sum();
        if total == 0 {
            return Err(DataError::Invalid(
                "cannot fit normalization on empty data".into(),
            ));
        }
        let n = total as f64;
        let mut stats = NormStats::identity();
        for traj in trajectories {
            for state in &traj.states {
                let a = state.to_array();
                for c in 0..STATE_DIM {
                    stats.state_mean[c] += a[c];
                }
            }
            for u in &traj.controls {
                for c in 0..CONTROL_DIM {
                    stats.control_mean[c] += u.0[c];
                }
            }
        }
        for c in 0..STATE_DIM {
            stats.state_mean[c] /= n;
        }
        for c in 0..CONTROL_DIM {
            stats.control_mean[c] /= n;
        }
        let mut state_var = [0.0; STATE_DIM];
        let mut control_var = [0.0; CONTROL_DIM];
        for traj in trajectories {
            for state in &traj.states {
                let a = state.to_array();
                for c in 0..STATE_DIM {
                    let d = a[c] - stats.state_mean[c];
                    state_var[c] += d * d;
                }
            }
            for u in &traj.controls {
                for c in 0..CONTROL_DIM {
                    let d = u.0[c] - stats.control_mean[c];
                    control_var[c] += d * d;
                }
            }
        }
        for c in 0..STATE_DIM {
            let std = (state_var[c] / n).sqrt();
            if std < CONSTANT_STD_TOL {
                stats.state_std[c] = 1.0;
                stats.constant_state[c] = true;
            } else {
                stats.state_std[c] = std;
            }
        }
        for c in 0..CONTROL_DIM {
            let std = (control_var[c] / n).sqrt();
            if std < CONSTANT_STD_TOL {
                stats.control_std[c] = 1.0;
                stats.constant_control[c] = true;
            } else {
                stats.control_std[c] = std;
            }
        }
        Ok(stats)
    }

    pub fn normalize_state(&self, x: &QuadState) -> QuadState {
        let a = x.to_array();
        let mut out = [0.0; STATE_DIM];
        for c in 0..STATE_DIM {
            out[c] = (a[c] - self.state_mean[c]) / self.state_std[c];
        }
        QuadState::from_array(out)
    }

    pub fn denormalize_state(&self, x: &QuadState) -> QuadState {
        let a = x.to_array();
        let mut out = [0.0; STATE_DIM];
        for c in 0..STATE_DIM {
            out[c] = a[c] * self.state_std[c] + self.state_mean[c];
        }
        QuadState::from_array(out)
    }

    pub fn normalize_control(&self, u: &ControlInput) -> ControlInput {
        let mut out = [0.0; CONTROL_DIM];
        for c in 0..CONTROL_DIM {
            out[c] = (u.0[c] - self.control_mean[c]) / self.control_std[c];
        }
        ControlInput(out)
    }

    pub fn denormalize_control(&self, u: &ControlInput) -> ControlInput {
        let mut out = [0.0; CONTROL_DIM];
        for c in 0..CONTROL_DIM {
            out[c] = u.0[c] * self.control_std[c] + self.control_mean[c];
        }
        ControlInput(out)
    }

    /// Label statistics: the state statistics of the body-rate and velocity
    /// channels, in label channel order.
    pub fn label_mean(&self) -> [f64; TRUNC_DIM] {
        let mut out = [0.0; TRUNC_DIM];
        out.copy_from_slice(&self.state_mean[6..12]);
        out
    }

    pub fn label_std(&self) -> [f64; TRUNC_DIM] {
        let mut out = [0.0; TRUNC_DIM];
        out.copy_from_slice(&self.state_std[6..12]);
        out
    }

    pub fn normalize_label(&self, y: &TruncatedState) -> TruncatedState {
        let a = y.to_array();
        let mean = self.label_mean();
        let std = self.label_std();
        let mut out = [0.0; TRUNC_DIM];
        for c in 0..TRUNC_DIM {
            out[c] = (a[c] - mean[c]) / std[c];
        }
        TruncatedState::from_array(out)
    }

    pub fn denormalize_label(&self, y: &TruncatedState) -> TruncatedState {
        let a = y.to_array();
        let mean = self.label_mean();
        let std = self.label_std();
        let mut out = [0.0; TRUNC_DIM];
        for c in 0..TRUNC_DIM {
            out[c] = a[c] * std[c] + mean[c];
        }
        TruncatedState::from_array(out)
    }

    /// Normalizes every sample of a trajectory (time stamps untouched).
    pub fn normalize_trajectory(&self, traj: &Trajectory) -> Trajectory {
        Trajectory {
            t: traj.t.clone(),
            states: traj.states.iter().map(|x| self.normalize_state(x)).collect(),
            controls: traj
                .controls
                .iter()
                .map(|u| self.normalize_control(u))
                .collect(),
        }
    }
}
