//! Sliding training windows. A window anchored at sample `t0` feeds the
//! model `past` samples of state and command ending at `t0` plus `future`
//! upcoming commands, and is supervised on the truncated states of the
//! `future` samples after `t0`.

use super::{DataError, Trajectory};
use crate::quadstate::{augment_sequence, truncate_state, TRUNC_DIM};
use crate::tcn::tensor::SeqTensor;
use crate::tcn::train::TrainExample;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub traj_id: usize,
    /// Index of the last observed sample; the window spans
    /// `t0 - past + 1 ..= t0 + future` within its trajectory.
    pub t0: usize,
}

/// Number of windows a trajectory of `n` samples yields.
pub fn window_count(n: usize, past: usize, future: usize, stride: usize) -> usize {
    if n < past + future {
        0
    } else {
        (n - past - future) / stride + 1
    }
}

/// Enumerates all windows over a set of trajectories, never crossing
/// trajectory boundaries. Windows are ordered by trajectory, then by `t0`.
pub fn make_windows(
    trajectories: &[Trajectory],
    past: usize,
    future: usize,
    stride: usize,
) -> Result<Vec<Window>, DataError> {
    if past == 0 || future == 0 || stride == 0 {
        return Err(DataError::Invalid(format!(
            "window sizes must be positive: past {past}, future {future}, stride {stride}"
        )));
    }
    let mut out = Vec::new();
    for (traj_id, traj) in trajectories.iter().enumerate() {
        let n = traj.len();
        let mut t0 = past - 1;
        while t0 + future <= n.saturating_sub(1) {
            out.push(Window { traj_id, t0 });
            t0 += stride;
        }
    }
    Ok(out)
}

/// Materializes a window as a training example: a `1 x 16 x (past+future)`
/// input tensor and a `1 x 6 x future` target tensor.
pub fn window_to_example(
    traj: &Trajectory,
    window: &Window,
    past: usize,
    future: usize,
) -> Result<TrainExample, DataError> {
    let t0 = window.t0;
    if t0 + 1 < past || t0 + future >= traj.len() {
        return Err(DataError::Invalid(format!(
            "window t0 {t0} out of range for trajectory of {} samples",
            traj.len()
        )));
    }
    let start = t0 + 1 - past;
    let input = augment_sequence(
        &traj.states[start..=t0],
        &traj.controls[start..=t0],
        &traj.controls[t0 + 1..=t0 + future],
    )
    .map_err(|e| DataError::Invalid(e.to_string()))?;
    let mut target = SeqTensor::zeros(1, TRUNC_DIM, future);
    for i in 0..future {
        let label = truncate_state(&traj.states[t0 + 1 + i]).to_array();
        for (c, v) in label.iter().enumerate() {
            target.set(0, c, i, *v);
        }
    }
    Ok(TrainExample { input, target })
}
