//! Hybrid predictors: the rigid-body model supplies the dynamics while a
//! learned component replaces or corrects part of it.
//!
//! Three variants are supported. The motor hybrid replaces the rotor model
//! with learned per-rotor thrusts; torques follow from the thrusts through
//! the arm geometry and the torque-to-thrust coefficient ratio. The
//! acceleration-error hybrid adds a learned correction to the state
//! derivative. The combined hybrid applies both. Each learned component is
//! expressed as a trait so a physics-equivalent stand-in can verify that the
//! hybrid machinery itself introduces no error.

use thiserror::Error;

use crate::dataset::normalize::NormStats;
use crate::physics::{
    integrate_step, integrate_with, mix_forces, motor_map, state_derivative_with_wrench,
    PhysicsError, PhysicsParams, WrenchBody,
};
use crate::quadstate::{
    augment_sequence, truncate_state, ControlInput, QuadState, CONTROL_DIM, STATE_DIM,
};
use crate::tcn::{Network, TcnError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HybridVariant {
    Motor,
    AccelError,
    Combined,
}

#[derive(Debug, Error)]
pub enum HybridError {
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Tcn(#[from] TcnError),
    #[error("{0}")]
    Invalid(String),
}

/// Predicts the thrust of each rotor over the next sample interval, in
/// newtons, from the recent flight history and the upcoming command.
pub trait ThrustPredictor {
    fn predict_thrusts(
        &self,
        past_states: &[QuadState],
        past_controls: &[ControlInput],
        next_control: &ControlInput,
    ) -> Result<[f64; CONTROL_DIM], HybridError>;
}

/// Predicts an additive correction to the 12-channel state derivative, in
/// raw state units per second.
pub trait AccelPredictor {
    fn predict_correction(
        &self,
        past_states: &[QuadState],
        past_controls: &[ControlInput],
        next_control: &ControlInput,
    ) -> Result<[f64; STATE_DIM], HybridError>;
}

/// Converts per-rotor thrusts into a body wrench using the arm geometry.
/// The yaw torque of rotor `i` is `torque_coeff * speed_i^2`, which equals
/// `(torque_coeff / thrust_coeff) * thrust_i`.
pub fn wrench_from_thrusts(thrusts: &[f64; 4], params: &PhysicsParams) -> WrenchBody {
    let lever = params.arm_length / 2f64.sqrt();
    let ratio = params.torque_coeff / params.thrust_coeff;
    let [t1, t2, t3, t4] = *thrusts;
    WrenchBody {
        thrust_total: t1 + t2 + t3 + t4,
        torque: nalgebra::Vector3::new(
            lever * (t1 - t2 + t3 - t4),
            lever * (-t1 - t2 + t3 + t4),
            ratio * (-t1 + t2 - t3 + t4),
        ),
    }
}

/// One step of the motor hybrid: integrate the rigid body under the wrench
/// implied by the predicted thrusts.
pub fn motor_hybrid_step(
    x: &QuadState,
    thrusts: &[f64; 4],
    dt: f64,
    params: &PhysicsParams,
) -> Result<QuadState, PhysicsError> {
    let wrench = wrench_from_thrusts(thrusts, params);
    crate::physics::integrate_step_with_wrench(x, &wrench, dt, params)
}

/// One step of the acceleration-error hybrid: the rotor-model derivative
/// plus a constant correction over the step.
pub fn accel_error_hybrid_step(
    x: &QuadState,
    u: &ControlInput,
    correction: &[f64; STATE_DIM],
    dt: f64,
    params: &PhysicsParams,
) -> Result<QuadState, PhysicsError> {
    let wrench = mix_forces(&motor_map(u, params), params);
    let deriv = |s: &QuadState| {
        let mut d = state_derivative_with_wrench(s, &wrench, params)?;
        for (slot, c) in d.iter_mut().zip(correction) {
            *slot += c;
        }
        Ok(d)
    };
    integrate_with(x, dt, &deriv)
}

/// One step of the combined hybrid: predicted-thrust wrench plus an additive
/// derivative correction.
pub fn combined_hybrid_step(
    x: &QuadState,
    thrusts: &[f64; 4],
    correction: &[f64; STATE_DIM],
    dt: f64,
    params: &PhysicsParams,
) -> Result<QuadState, PhysicsError> {
    let wrench = wrench_from_thrusts(thrusts, params);
    let deriv = |s: &QuadState| {
        let mut d = state_derivative_with_wrench(s, &wrench, params)?;
        for (slot, c) in d.iter_mut().zip(correction) {
            *slot += c;
        }
        Ok(d)
    };
    integrate_with(x, dt, &deriv)
}

/// A hybrid model: physics parameters plus optional learned components. With
/// both components absent the rollout is the pure rigid-body rollout.
pub struct HybridPredictor<'a> {
    pub params: PhysicsParams,
    pub thrust: Option<&'a dyn ThrustPredictor>,
    pub accel: Option<&'a dyn AccelPredictor>,
}

impl<'a> HybridPredictor<'a> {
    /// Multi-step prediction with predicted-state feedback: each step feeds
    /// the previous prediction back into the history the learned components
    /// see.
    pub fn rollout(
        &self,
        past_states: &[QuadState],
        past_controls: &[ControlInput],
        future_controls: &[ControlInput],
        dt: f64,
    ) -> Result<Vec<crate::quadstate::TruncatedState>, HybridError> {
        if past_states.is_empty() || past_states.len() != past_controls.len() {
            return Err(HybridError::Invalid(format!(
                "rollout history: {} states, {} controls",
                past_states.len(),
                past_controls.len()
            )));
        }
        let mut states = past_states.to_vec();
        let mut controls = past_controls.to_vec();
        let mut out = Vec::with_capacity(future_controls.len());
        for u in future_controls {
            let x = *states.last().unwrap();
            let thrusts = match self.thrust {
                Some(p) => Some(p.predict_thrusts(&states, &controls, u)?),
                None => None,
            };
            let correction = match self.accel {
                Some(p) => Some(p.predict_correction(&states, &controls, u)?),
                None => None,
            };
            let next = match (thrusts, correction) {
                (Some(t), Some(c)) => combined_hybrid_step(&x, &t, &c, dt, &self.params)?,
                (Some(t), None) => motor_hybrid_step(&x, &t, dt, &self.params)?,
                (None, Some(c)) => accel_error_hybrid_step(&x, u, &c, dt, &self.params)?,
                (None, None) => integrate_step(&x, u, dt, &self.params)?,
            };
            out.push(truncate_state(&next));
            states.push(next);
            controls.push(*u);
        }
        Ok(out)
    }
}

/// Stand-in thrust predictor that evaluates the rotor model itself; a motor
/// hybrid built on it must match the pure physics rollout.
pub struct PhysicsThrustPredictor {
    pub params: PhysicsParams,
}

impl ThrustPredictor for PhysicsThrustPredictor {
    fn predict_thrusts(
        &self,
        _past_states: &[QuadState],
        _past_controls: &[ControlInput],
        next_control: &ControlInput,
    ) -> Result<[f64; 4], HybridError> {
        let speeds = motor_map(next_control, &self.params);
        let mut out = [0.0; 4];
        for (slot, s) in out.iter_mut().zip(&speeds.0) {
            *slot = self.params.thrust_coeff * s * s;
        }
        Ok(out)
    }
}

/// Stand-in acceleration predictor with zero correction; an
/// acceleration-error hybrid built on it must match the pure physics
/// rollout.
pub struct ZeroAccelPredictor;

impl AccelPredictor for ZeroAccelPredictor {
    fn predict_correction(
        &self,
        _past_states: &[QuadState],
        _past_controls: &[ControlInput],
        _next_control: &ControlInput,
    ) -> Result<[f64; STATE_DIM], HybridError> {
        Ok([0.0; STATE_DIM])
    }
}

fn network_window_input(
    network: &Network,
    norm: &NormStats,
    past_states: &[QuadState],
    past_controls: &[ControlInput],
    next_control: &ControlInput,
) -> Result<crate::tcn::SeqTensor, HybridError> {
    let p = network.config.past_steps;
    if past_states.len() < p {
        return Err(HybridError::Invalid(format!(
            "history of {} samples shorter than network past window {p}",
            past_states.len()
        )));
    }
    let start = past_states.len() - p;
    let states: Vec<QuadState> = past_states[start..]
        .iter()
        .map(|x| norm.normalize_state(x))
        .collect();
    let controls: Vec<ControlInput> = past_controls[start..]
        .iter()
        .map(|u| norm.normalize_control(u))
        .collect();
    let future = [norm.normalize_control(next_control)];
    let input =
        augment_sequence(&states, &controls, &future).map_err(|e| HybridError::Tcn(e.into()))?;
    Ok(input)
}

/// Thrust predictor backed by a sequence network with four output channels.
/// Inputs are normalized with training statistics; outputs are thrusts in
/// newtons.
pub struct TcnThrustPredictor {
    pub network: Network,
    pub norm: NormStats,
}

impl TcnThrustPredictor {
    pub fn new(network: Network, norm: NormStats) -> Result<Self, HybridError> {
        let cfg = &network.config;
        if cfg.future_steps != 1 || cfg.output_channels != 4 {
            return Err(HybridError::Invalid(format!(
                "thrust network must map to 4 channels one step ahead, \
                 got {} channels {} steps ahead",
                cfg.output_channels, cfg.future_steps
            )));
        }
        Ok(TcnThrustPredictor { network, norm })
    }
}

impl ThrustPredictor for TcnThrustPredictor {
    fn predict_thrusts(
        &self,
        past_states: &[QuadState],
        past_controls: &[ControlInput],
        next_control: &ControlInput,
    ) -> Result<[f64; 4], HybridError> {
        let input = network_window_input(
            &self.network,
            &self.norm,
            past_states,
            past_controls,
            next_control,
        )?;
        let pred = self.network.predict(&input)?;
        let mut out = [0.0; 4];
        for (c, slot) in out.iter_mut().enumerate() {
            *slot = pred.get(0, c, 0);
        }
        Ok(out)
    }
}

/// Acceleration-correction predictor backed by a sequence network with
/// twelve output channels, in raw state units per second.
pub struct TcnAccelPredictor {
    pub network: Network,
    pub norm: NormStats,
}

impl TcnAccelPredictor {
    pub fn new(network: Network, norm: NormStats) -> Result<Self, HybridError> {
        let cfg = &network.config;
        if cfg.future_steps != 1 || cfg.output_channels != STATE_DIM {
            return Err(HybridError::Invalid(format!(
                "correction network must map to {STATE_DIM} channels one step ahead, \
                 got {} channels {} steps ahead",
                cfg.output_channels, cfg.future_steps
            )));
        }
        Ok(TcnAccelPredictor { network, norm })
    }
}

impl AccelPredictor for TcnAccelPredictor {
    fn predict_correction(
        &self,
        past_states: &[QuadState],
        past_controls: &[ControlInput],
        next_control: &ControlInput,
    ) -> Result<[f64; STATE_DIM], HybridError> {
        let input = network_window_input(
            &self.network,
            &self.norm,
            past_states,
            past_controls,
            next_control,
        )?;
        let pred = self.network.predict(&input)?;
        let mut out = [0.0; STATE_DIM];
        for (c, slot) in out.iter_mut().enumerate() {
            *slot = pred.get(0, c, 0);
        }
        Ok(out)
    }
}

/// Teacher-forced training target for the thrust network at sample `k`: the
/// rotor-model thrusts for the recorded command.
pub fn thrust_target(u: &ControlInput, params: &PhysicsParams) -> [f64; 4] {
    let speeds = motor_map(u, params);
    let mut out = [0.0; 4];
    for (slot, s) in out.iter_mut().zip(&speeds.0) {
        *slot = params.thrust_coeff * s * s;
    }
    out
}

/// Teacher-forced training target for the correction network at sample `k`:
/// the constant derivative offset that carries the rigid-body prediction
/// onto the observed next state, `(x[k+1] - physics_step(x[k], u[k])) / dt`.
pub fn accel_error_target(
    x: &QuadState,
    x_next: &QuadState,
    u: &ControlInput,
    dt: f64,
    params: &PhysicsParams,
) -> Result<[f64; STATE_DIM], PhysicsError> {
    let predicted = integrate_step(x, u, dt, params)?;
    let p = predicted.to_array();
    let n = x_next.to_array();
    let mut out = [0.0; STATE_DIM];
    for i in 0..STATE_DIM {
        out[i] = (n[i] - p[i]) / dt;
    }
    Ok(out)
}
