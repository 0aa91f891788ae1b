//! Continuous-time Newton-Euler quadrotor model with fixed-step RK4
//! discretization and multi-step rollout.

use nalgebra::Vector3;
use thiserror::Error;

use crate::quadstate::{
    euler_rate_matrix, rotation_body_to_world, truncate_state, ControlInput, QuadState,
    TruncatedState, GIMBAL_LOCK_TOL,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PhysicsError {
    #[error("gimbal lock: |cos(pitch)| <= {GIMBAL_LOCK_TOL} at pitch {pitch}")]
    GimbalLock { pitch: f64 },
    #[error("invalid physics parameters: {0}")]
    InvalidParams(String),
}

/// Rigid-body and rotor parameters of the modeled platform.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsParams {
    /// Mass, kg.
    pub mass: f64,
    /// Diagonal body inertia, kg m^2.
    pub inertia: Vector3<f64>,
    /// Arm length, m.
    pub arm_length: f64,
    /// Rotor thrust coefficient: T_i = thrust_coeff * speed^2.
    pub thrust_coeff: f64,
    /// Rotor torque coefficient: Q_i = torque_coeff * speed^2.
    pub torque_coeff: f64,
    /// Translational drag rate, 1/s.
    pub drag_t: f64,
    /// Rotational drag, N m s.
    pub drag_r: f64,
    /// Gravity magnitude, m/s^2 (world -z).
    pub gravity: f64,
    /// Command-to-rotor-speed affine map: speed = gain * u + bias, clamped at 0.
    pub motor_gain: f64,
    pub motor_bias: f64,
}

impl PhysicsParams {
    /// Desk-scale defaults with plausible magnitudes for a 1 kg platform.
    pub fn default_desk_scale() -> Self {
        PhysicsParams {
            mass: 1.0,
            inertia: Vector3::new(0.01, 0.01, 0.02),
            arm_length: 0.21,
            thrust_coeff: 8e-6,
            torque_coeff: 1e-7,
            drag_t: 0.05,
            drag_r: 0.001,
            gravity: 9.81,
            motor_gain: 50.0,
            motor_bias: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        let checks = [
            (self.mass > 0.0, "mass must be positive"),
            (
                self.inertia.iter().all(|i| *i > 0.0),
                "inertia entries must be positive",
            ),
            (self.arm_length > 0.0, "arm_length must be positive"),
            (self.thrust_coeff > 0.0, "thrust_coeff must be positive"),
            (self.torque_coeff > 0.0, "torque_coeff must be positive"),
            (self.drag_t >= 0.0, "drag_t must be non-negative"),
            (self.drag_r >= 0.0, "drag_r must be non-negative"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(PhysicsError::InvalidParams(msg.into()));
            }
        }
        Ok(())
    }

    /// Per-motor rotor speed that exactly balances gravity at level attitude.
    pub fn hover_speed(&self) -> f64 {
        (self.mass * self.gravity / (4.0 * self.thrust_coeff)).sqrt()
    }

    /// Motor command producing [`PhysicsParams::hover_speed`].
    pub fn hover_command(&self) -> f64 {
        (self.hover_speed() - self.motor_bias) / self.motor_gain
    }
}

/// Rotor angular velocities, rad/s, non-negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorSpeeds(pub [f64; 4]);

/// Total thrust along body +z and body-frame torques.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrenchBody {
    pub thrust_total: f64,
    pub torque: Vector3<f64>,
}

/// Affine command-to-speed map, clamped at zero.
pub fn motor_map(u: &ControlInput, params: &PhysicsParams) -> RotorSpeeds {
    let mut speeds = [0.0; 4];
    for (s, &cmd) in speeds.iter_mut().zip(&u.0) {
        *s = (params.motor_gain * cmd + params.motor_bias).max(0.0);
    }
    RotorSpeeds(speeds)
}

/// Mixes squared rotor speeds into total thrust and body torques for the
/// X-configuration arm geometry.
pub fn mix_forces(speeds: &RotorSpeeds, params: &PhysicsParams) -> WrenchBody {
    let sq: Vec<f64> = speeds.0.iter().map(|s| s * s).collect();
    let ct = params.thrust_coeff;
    let cq = params.torque_coeff;
    let lever = params.arm_length / 2f64.sqrt();
    WrenchBody {
        thrust_total: ct * (sq[0] + sq[1] + sq[2] + sq[3]),
        torque: Vector3::new(
            ct * lever * (sq[0] - sq[1] + sq[2] - sq[3]),
            ct * lever * (-sq[0] - sq[1] + sq[2] + sq[3]),
            cq * (-sq[0] + sq[1] - sq[2] + sq[3]),
        ),
    }
}

/// Time derivative of the 12-dimensional state under a given body wrench.
pub fn state_derivative_with_wrench(
    x: &QuadState,
    wrench: &WrenchBody,
    params: &PhysicsParams,
) -> Result<[f64; 12], PhysicsError> {
    if x.eta.y.cos().abs() <= GIMBAL_LOCK_TOL {
        return Err(PhysicsError::GimbalLock { pitch: x.eta.y });
    }
    let eta_dot = euler_rate_matrix(&x.eta) * x.xi;
    let r_dot = x.v;
    let rot = rotation_body_to_world(&x.eta);
    let thrust_world = rot * Vector3::new(0.0, 0.0, wrench.thrust_total);
    let v_dot = thrust_world / params.mass
        - Vector3::new(0.0, 0.0, params.gravity)
        - params.drag_t * x.v;
    let inertia = params.inertia;
    let i_omega = Vector3::new(
        inertia.x * x.xi.x,
        inertia.y * x.xi.y,
        inertia.z * x.xi.z,
    );
    let torque_net = wrench.torque - x.xi.cross(&i_omega) - params.drag_r * x.xi;
    let omega_dot = Vector3::new(
        torque_net.x / inertia.x,
        torque_net.y / inertia.y,
        torque_net.z / inertia.z,
    );
    Ok([
        eta_dot.x, eta_dot.y, eta_dot.z, r_dot.x, r_dot.y, r_dot.z, omega_dot.x, omega_dot.y,
        omega_dot.z, v_dot.x, v_dot.y, v_dot.z,
    ])
}

/// Time derivative of the state under the rotor model.
pub fn state_derivative(
    x: &QuadState,
    speeds: &RotorSpeeds,
    params: &PhysicsParams,
) -> Result<[f64; 12], PhysicsError> {
    state_derivative_with_wrench(x, &mix_forces(speeds, params), params)
}

/// RK4 substep length used inside [`integrate_step`]; four substeps cover the
/// nominal 0.01 s sample interval.
const SUBSTEP: f64 = 0.0025;

fn rk4_step<F>(x: &QuadState, dt: f64, deriv: &F) -> Result<QuadState, PhysicsError>
where
    F: Fn(&QuadState) -> Result<[f64; 12], PhysicsError>,
{
    let advance = |x0: &QuadState, d: &[f64; 12], h: f64| {
        let mut a = x0.to_array();
        for i in 0..12 {
            a[i] += h * d[i];
        }
        QuadState::from_array(a)
    };
    let k1 = deriv(x)?;
    let k2 = deriv(&advance(x, &k1, dt / 2.0))?;
    let k3 = deriv(&advance(x, &k2, dt / 2.0))?;
    let k4 = deriv(&advance(x, &k3, dt))?;
    let mut a = x.to_array();
    for i in 0..12 {
        a[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(QuadState::from_array(a))
}

/// Classical fourth-order integration over `dt` with the control held
/// constant. `dt` is split into substeps no longer than 2.5 ms.
pub fn integrate_step(
    x: &QuadState,
    u: &ControlInput,
    dt: f64,
    params: &PhysicsParams,
) -> Result<QuadState, PhysicsError> {
    assert!(dt > 0.0, "dt must be positive");
    let speeds = motor_map(u, params);
    let wrench = mix_forces(&speeds, params);
    integrate_step_with_wrench(x, &wrench, dt, params)
}

/// As [`integrate_step`] but with the body wrench supplied directly; the
/// hybrid predictors use this to override the rotor model.
pub fn integrate_step_with_wrench(
    x: &QuadState,
    wrench: &WrenchBody,
    dt: f64,
    params: &PhysicsParams,
) -> Result<QuadState, PhysicsError> {
    let deriv = |s: &QuadState| state_derivative_with_wrench(s, wrench, params);
    integrate_with(x, dt, &deriv)
}

/// As [`integrate_step`] but with an arbitrary derivative function, used by
/// the additive-correction hybrid.
pub fn integrate_with<F>(x: &QuadState, dt: f64, deriv: &F) -> Result<QuadState, PhysicsError>
where
    F: Fn(&QuadState) -> Result<[f64; 12], PhysicsError>,
{
    assert!(dt > 0.0, "dt must be positive");
    let substeps = (dt / SUBSTEP).ceil().max(1.0) as usize;
    let h = dt / substeps as f64;
    let mut state = *x;
    for _ in 0..substeps {
        state = rk4_step(&state, h, deriv)?;
    }
    Ok(state)
}

/// Iterated [`integrate_step`]; output `k` is the truncated state after
/// `k + 1` steps.
pub fn physics_rollout(
    x0: &QuadState,
    future_controls: &[ControlInput],
    dt: f64,
    params: &PhysicsParams,
) -> Result<Vec<TruncatedState>, PhysicsError> {
    assert!(!future_controls.is_empty(), "rollout needs at least one step");
    let mut state = *x0;
    let mut out = Vec::with_capacity(future_controls.len());
    for u in future_controls {
        state = integrate_step(&state, u, dt, params)?;
        out.push(truncate_state(&state));
    }
    Ok(out)
}

/// Full-state variant of [`physics_rollout`], used by dataset synthesis.
pub fn physics_rollout_full(
    x0: &QuadState,
    future_controls: &[ControlInput],
    dt: f64,
    params: &PhysicsParams,
) -> Result<Vec<QuadState>, PhysicsError> {
    let mut state = *x0;
    let mut out = Vec::with_capacity(future_controls.len());
    for u in future_controls {
        state = integrate_step(&state, u, dt, params)?;
        out.push(state);
    }
    Ok(out)
}
