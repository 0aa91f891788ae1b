//! Resampling of irregular telemetry onto a uniform grid. Linear
//! interpolation for positions, velocities and body rates; shortest-arc
//! interpolation for the Euler angles; zero-order hold for motor commands.

use super::{DataError, Trajectory};
use crate::quadstate::{ControlInput, QuadState};

/// Wraps an angle difference into `(-pi, pi]` so interpolation takes the
/// short way around.
fn wrap_angle(d: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut out = d % two_pi;
    if out > std::f64::consts::PI {
        out -= two_pi;
    } else if out <= -std::f64::consts::PI {
        out += two_pi;
    }
    out
}

/// Resamples a trajectory at interval `dt`, starting at its first time stamp
/// and ending at or before its last.
pub fn resample_uniform(traj: &Trajectory, dt: f64) -> Result<Trajectory, DataError> {
    if traj.len() < 2 {
        return Err(DataError::Invalid(format!(
            "resample needs at least 2 samples, got {}",
            traj.len()
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(DataError::Invalid(format!("invalid sample interval {dt}")));
    }
    let t0 = traj.t[0];
    let t_end = *traj.t.last().unwrap();
    // Tolerate round-off at the final sample.
    let steps = ((t_end - t0) / dt * (1.0 + 1e-12)).floor() as usize;

    let mut out = Trajectory::default();
    let mut seg = 0usize; // index of the segment [t[seg], t[seg+1]] in use
    for k in 0..=steps {
        let t = t0 + k as f64 * dt;
        while seg + 2 < traj.len() && traj.t[seg + 1] <= t {
            seg += 1;
        }
        let ta = traj.t[seg];
        let tb = traj.t[seg + 1];
        let s = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
        let a = traj.states[seg].to_array();
        let b = traj.states[seg + 1].to_array();
        let mut x = [0.0; 12];
        for (i, slot) in x.iter_mut().enumerate() {
            *slot = if i < 3 {
                a[i] + s * wrap_angle(b[i] - a[i])
            } else {
                a[i] + s * (b[i] - a[i])
            };
        }
        out.t.push(t);
        out.states.push(QuadState::from_array(x));
        // Hold the command of the most recent real sample.
        let hold = if traj.t[seg + 1] <= t { seg + 1 } else { seg };
        out.controls.push(ControlInput(traj.controls[hold].0));
    }
    Ok(out)
}
