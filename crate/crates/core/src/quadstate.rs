//! State and frame definitions shared by every predictor.
//!
//! The quadrotor state is `x = [eta r xi v]`: XYZ Euler angles, world-frame
//! position, body angular velocity and world-frame velocity. Angles are stored
//! unwrapped; any modular reduction happens at ingestion. The rotation
//! convention is fixed as `R_world<-body = Rz(psi) * Ry(theta) * Rx(phi)`.

use nalgebra::{Matrix3, Vector3};

use crate::tcn::tensor::{SeqTensor, ShapeError};

/// Entries in a full quadrotor state.
pub const STATE_DIM: usize = 12;
/// Motor command channels.
pub const CONTROL_DIM: usize = 4;
/// State plus control channels, the network input width.
pub const AUG_DIM: usize = STATE_DIM + CONTROL_DIM;
/// Entries in a truncated (label) state.
pub const TRUNC_DIM: usize = 6;

/// Full 12-dimensional quadrotor state at one timestep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadState {
    /// Euler angles (roll phi, pitch theta, yaw psi), radians, unwrapped.
    pub eta: Vector3<f64>,
    /// Position in the world frame, meters.
    pub r: Vector3<f64>,
    /// Body angular velocity, rad/s.
    pub xi: Vector3<f64>,
    /// Velocity in the world frame, m/s.
    pub v: Vector3<f64>,
}

impl QuadState {
    pub fn zero() -> Self {
        QuadState {
            eta: Vector3::zeros(),
            r: Vector3::zeros(),
            xi: Vector3::zeros(),
            v: Vector3::zeros(),
        }
    }

    pub fn from_array(a: [f64; STATE_DIM]) -> Self {
        QuadState {
            eta: Vector3::new(a[0], a[1], a[2]),
            r: Vector3::new(a[3], a[4], a[5]),
            xi: Vector3::new(a[6], a[7], a[8]),
            v: Vector3::new(a[9], a[10], a[11]),
        }
    }

    pub fn to_array(&self) -> [f64; STATE_DIM] {
        [
            self.eta.x, self.eta.y, self.eta.z, self.r.x, self.r.y, self.r.z, self.xi.x,
            self.xi.y, self.xi.z, self.v.x, self.v.y, self.v.z,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

/// Four motor commands in dimensionless command units, each non-negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput(pub [f64; CONTROL_DIM]);

impl ControlInput {
    pub fn zero() -> Self {
        ControlInput([0.0; CONTROL_DIM])
    }

    pub fn uniform(u: f64) -> Self {
        ControlInput([u; CONTROL_DIM])
    }

    pub fn is_valid(&self) -> bool {
        self.0.iter().all(|u| u.is_finite() && *u >= 0.0)
    }
}

/// A state concatenated with its control input, `[eta r xi v u]`.
///
/// Future-timestep instances carry exact zeros in the first 12 entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentedState(pub [f64; AUG_DIM]);

impl AugmentedState {
    pub fn from_past(x: &QuadState, u: &ControlInput) -> Self {
        let mut a = [0.0; AUG_DIM];
        a[..STATE_DIM].copy_from_slice(&x.to_array());
        a[STATE_DIM..].copy_from_slice(&u.0);
        AugmentedState(a)
    }

    pub fn from_future(u: &ControlInput) -> Self {
        let mut a = [0.0; AUG_DIM];
        a[STATE_DIM..].copy_from_slice(&u.0);
        AugmentedState(a)
    }
}

/// The label subset of the state: body rates and world velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedState {
    pub xi: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl TruncatedState {
    pub fn zero() -> Self {
        TruncatedState {
            xi: Vector3::zeros(),
            v: Vector3::zeros(),
        }
    }

    pub fn to_array(&self) -> [f64; TRUNC_DIM] {
        [self.xi.x, self.xi.y, self.xi.z, self.v.x, self.v.y, self.v.z]
    }

    pub fn from_array(a: [f64; TRUNC_DIM]) -> Self {
        TruncatedState {
            xi: Vector3::new(a[0], a[1], a[2]),
            v: Vector3::new(a[3], a[4], a[5]),
        }
    }
}

/// Rotation matrix mapping body-frame vectors into the world frame,
/// `Rz(psi) * Ry(theta) * Rx(phi)`.
pub fn rotation_body_to_world(eta: &Vector3<f64>) -> Matrix3<f64> {
    let (sp, cp) = eta.x.sin_cos();
    let (st, ct) = eta.y.sin_cos();
    let (ss, cs) = eta.z.sin_cos();
    Matrix3::new(
        cs * ct,
        cs * st * sp - ss * cp,
        cs * st * cp + ss * sp,
        ss * ct,
        ss * st * sp + cs * cp,
        ss * st * cp - cs * sp,
        -st,
        ct * sp,
        ct * cp,
    )
}

/// Matrix mapping body angular velocity to Euler angle rates.
///
/// Its determinant is `cos(theta)`; it is singular at pitch +-90 degrees.
/// Callers that invert it must check `|cos(theta)|` against
/// [`GIMBAL_LOCK_TOL`].
pub fn euler_rate_matrix(eta: &Vector3<f64>) -> Matrix3<f64> {
    let (sp, cp) = eta.x.sin_cos();
    let (st, ct) = eta.y.sin_cos();
    Matrix3::new(1.0, 0.0, -st, 0.0, cp, sp * ct, 0.0, -sp, cp * ct)
}

/// Threshold on `|cos(theta)|` below which the Euler-rate map is treated as
/// singular.
pub const GIMBAL_LOCK_TOL: f64 = 1e-6;

/// Builds the network input sequence from past states/controls and future
/// controls: columns `0..P` carry `[x; u]`, columns `P..P+F` carry `[0; u]`.
///
/// The result is a `1 x 16 x (P+F)` tensor.
pub fn augment_sequence(
    past_states: &[QuadState],
    past_controls: &[ControlInput],
    future_controls: &[ControlInput],
) -> Result<SeqTensor, ShapeError> {
    if past_states.len() != past_controls.len() {
        return Err(ShapeError::new(format!(
            "augment_sequence: {} past states but {} past controls",
            past_states.len(),
            past_controls.len()
        )));
    }
    if past_states.is_empty() {
        return Err(ShapeError::new("augment_sequence: empty past window"));
    }
    let p = past_states.len();
    let f = future_controls.len();
    let mut out = SeqTensor::zeros(1, AUG_DIM, p + f);
    for (t, (x, u)) in past_states.iter().zip(past_controls).enumerate() {
        let col = AugmentedState::from_past(x, u);
        for c in 0..AUG_DIM {
            out.set(0, c, t, col.0[c]);
        }
    }
    for (i, u) in future_controls.iter().enumerate() {
        let col = AugmentedState::from_future(u);
        for c in 0..AUG_DIM {
            out.set(0, c, p + i, col.0[c]);
        }
    }
    Ok(out)
}

/// Projects a full state onto its label subset `(xi, v)`.
pub fn truncate_state(x: &QuadState) -> TruncatedState {
    TruncatedState { xi: x.xi, v: x.v }
}
