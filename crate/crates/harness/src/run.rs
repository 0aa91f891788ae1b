//! Model construction, training and horizon evaluation for every model
//! kind. Everything here is deterministic in the seed: shuffles, weight
//! draws and evaluation reductions all use fixed orders.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use e2e_tcn::checkpoint::{Checkpoint, CheckpointKind};
use e2e_tcn::dataset::{NormStats, Trajectory, Window};
use e2e_tcn::hybrid::{
    accel_error_target, thrust_target, HybridPredictor, TcnAccelPredictor, TcnThrustPredictor,
};
use e2e_tcn::physics::{physics_rollout, PhysicsParams};
use e2e_tcn::quadstate::{augment_sequence, truncate_state, TruncatedState, STATE_DIM};
use e2e_tcn::tcn::{train_epoch, Network, OptimizerState, SeqTensor, TrainExample};

use crate::config::{ExperimentConfig, ModelKind};
use crate::data::PreparedData;
use crate::error::HarnessError;
use crate::report::HorizonErrors;

/// A trained (or parameter-free) model ready for evaluation.
pub struct TrainedModel {
    pub kind: ModelKind,
    /// Empty for physics; thrust then correction for the combined hybrid.
    pub networks: Vec<Network>,
    pub norm: NormStats,
    pub physics: PhysicsParams,
    pub optimizers: Vec<OptimizerState>,
    /// Per-epoch training loss, one curve per network.
    pub loss_curves: Vec<Vec<f64>>,
}

impl TrainedModel {
    pub fn checkpoint_kind(&self) -> Option<CheckpointKind> {
        match self.kind {
            ModelKind::Physics => None,
            ModelKind::EndToEnd => Some(CheckpointKind::EndToEnd),
            ModelKind::MotorHybrid => Some(CheckpointKind::MotorHybrid),
            ModelKind::AccelHybrid => Some(CheckpointKind::AccelErrorHybrid),
            ModelKind::CombinedHybrid => Some(CheckpointKind::CombinedHybrid),
        }
    }

    pub fn to_checkpoint(&self) -> Option<Checkpoint> {
        let kind = self.checkpoint_kind()?;
        Some(Checkpoint {
            kind,
            networks: self.networks.clone(),
            norm: Some(self.norm.clone()),
            physics: match self.kind {
                ModelKind::EndToEnd => None,
                _ => Some(self.physics.clone()),
            },
            optimizers: self.optimizers.iter().cloned().map(Some).collect(),
        })
    }

    pub fn from_checkpoint(
        ckpt: Checkpoint,
        expected: ModelKind,
        physics_fallback: &PhysicsParams,
    ) -> Result<Self, HarnessError> {
        let kind = match ckpt.kind {
            CheckpointKind::EndToEnd => ModelKind::EndToEnd,
            CheckpointKind::MotorHybrid => ModelKind::MotorHybrid,
            CheckpointKind::AccelErrorHybrid => ModelKind::AccelHybrid,
            CheckpointKind::CombinedHybrid => ModelKind::CombinedHybrid,
        };
        if kind != expected {
            return Err(HarnessError::Config(format!(
                "checkpoint holds a {} model but the config selects {}",
                kind.label(),
                expected.label()
            )));
        }
        Ok(TrainedModel {
            kind,
            networks: ckpt.networks,
            norm: ckpt.norm.unwrap_or_else(NormStats::identity),
            physics: ckpt.physics.unwrap_or_else(|| physics_fallback.clone()),
            optimizers: ckpt.optimizers.into_iter().flatten().collect(),
            loss_curves: Vec::new(),
        })
    }
}

/// Teacher-forced single-step examples for a hybrid component network.
fn hybrid_examples(
    data: &PreparedData,
    windows: &[Window],
    past: usize,
    dt: f64,
    physics: &PhysicsParams,
    thrust: bool,
) -> Result<Vec<TrainExample>, HarnessError> {
    let mut normalized: Vec<Option<Trajectory>> = vec![None; data.trajectories.len()];
    let mut out = Vec::with_capacity(windows.len());
    for w in windows {
        let raw = &data.trajectories[w.traj_id];
        let norm_traj = normalized[w.traj_id]
            .get_or_insert_with(|| data.norm.normalize_trajectory(raw));
        let t0 = w.t0;
        let start = t0 + 1 - past;
        let input = augment_sequence(
            &norm_traj.states[start..=t0],
            &norm_traj.controls[start..=t0],
            &norm_traj.controls[t0 + 1..=t0 + 1],
        )
        .map_err(|e| HarnessError::Data(e.to_string()))?;
        let target = if thrust {
            let t = thrust_target(&raw.controls[t0 + 1], physics);
            SeqTensor::from_data(1, 4, 1, t.to_vec())
        } else {
            let c = accel_error_target(
                &raw.states[t0],
                &raw.states[t0 + 1],
                &raw.controls[t0 + 1],
                dt,
                physics,
            )?;
            SeqTensor::from_data(1, STATE_DIM, 1, c.to_vec())
        }
        .map_err(|e| HarnessError::Data(e.to_string()))?;
        out.push(TrainExample { input, target });
    }
    Ok(out)
}

fn fit_network(
    mut net: Network,
    examples: &[TrainExample],
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<(Network, OptimizerState, Vec<f64>), HarnessError> {
    let mut opt = OptimizerState::new(net.param_count(), learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut curve = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let loss = train_epoch(&mut net, examples, &mut opt, batch_size, &mut rng)?;
        curve.push(loss);
    }
    Ok((net, opt, curve))
}

pub fn train_model(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    seed: u64,
) -> Result<TrainedModel, HarnessError> {
    let mut model = TrainedModel {
        kind: cfg.kind,
        networks: Vec::new(),
        norm: data.norm.clone(),
        physics: cfg.physics.clone(),
        optimizers: Vec::new(),
        loss_curves: Vec::new(),
    };
    let train = &cfg.train;
    match cfg.kind {
        ModelKind::Physics => {}
        ModelKind::EndToEnd => {
            let mut net_cfg = cfg.network_config();
            net_cfg.seed = seed;
            let examples = data.e2e_examples(&data.train_windows, cfg.data.past, cfg.data.future)?;
            let (net, opt, curve) = fit_network(
                Network::init(net_cfg)?,
                &examples,
                train.epochs,
                train.batch_size,
                train.learning_rate,
                seed,
            )?;
            model.networks.push(net);
            model.optimizers.push(opt);
            model.loss_curves.push(curve);
        }
        ModelKind::MotorHybrid | ModelKind::AccelHybrid | ModelKind::CombinedHybrid => {
            let want_thrust = cfg.kind != ModelKind::AccelHybrid;
            let want_accel = cfg.kind != ModelKind::MotorHybrid;
            if want_thrust {
                let mut net_cfg = cfg.hybrid_network_config(4, 1);
                net_cfg.seed = seed.wrapping_add(1);
                let examples = hybrid_examples(
                    data,
                    &data.train_windows,
                    cfg.data.past,
                    cfg.data.dt,
                    &cfg.physics,
                    true,
                )?;
                let (net, opt, curve) = fit_network(
                    Network::init(net_cfg)?,
                    &examples,
                    train.epochs,
                    train.batch_size,
                    train.learning_rate,
                    seed.wrapping_add(1),
                )?;
                model.networks.push(net);
                model.optimizers.push(opt);
                model.loss_curves.push(curve);
            }
            if want_accel {
                let mut net_cfg = cfg.hybrid_network_config(STATE_DIM, 2);
                net_cfg.seed = seed.wrapping_add(2);
                let examples = hybrid_examples(
                    data,
                    &data.train_windows,
                    cfg.data.past,
                    cfg.data.dt,
                    &cfg.physics,
                    false,
                )?;
                let (net, opt, curve) = fit_network(
                    Network::init(net_cfg)?,
                    &examples,
                    train.epochs,
                    train.batch_size,
                    train.learning_rate,
                    seed.wrapping_add(2),
                )?;
                model.networks.push(net);
                model.optimizers.push(opt);
                model.loss_curves.push(curve);
            }
        }
    }
    Ok(model)
}

/// Per-evaluation state built once and shared across windows.
enum PreparedEvaluator<'a> {
    Physics(&'a PhysicsParams),
    EndToEnd {
        network: &'a Network,
        norm: &'a NormStats,
    },
    Hybrid {
        physics: &'a PhysicsParams,
        thrust: Option<TcnThrustPredictor>,
        accel: Option<TcnAccelPredictor>,
    },
}

impl<'a> PreparedEvaluator<'a> {
    fn new(model: &'a TrainedModel) -> Result<Self, HarnessError> {
        Ok(match model.kind {
            ModelKind::Physics => PreparedEvaluator::Physics(&model.physics),
            ModelKind::EndToEnd => PreparedEvaluator::EndToEnd {
                network: &model.networks[0],
                norm: &model.norm,
            },
            ModelKind::MotorHybrid | ModelKind::AccelHybrid | ModelKind::CombinedHybrid => {
                let thrust = if model.kind != ModelKind::AccelHybrid {
                    Some(TcnThrustPredictor::new(
                        model.networks[0].clone(),
                        model.norm.clone(),
                    )?)
                } else {
                    None
                };
                let accel_index = if model.kind == ModelKind::CombinedHybrid { 1 } else { 0 };
                let accel = if model.kind != ModelKind::MotorHybrid {
                    Some(TcnAccelPredictor::new(
                        model.networks[accel_index].clone(),
                        model.norm.clone(),
                    )?)
                } else {
                    None
                };
                PreparedEvaluator::Hybrid {
                    physics: &model.physics,
                    thrust,
                    accel,
                }
            }
        })
    }

    /// Predicts the `future` truncated states of one window, in raw units.
    fn predict_window(
        &self,
        traj: &Trajectory,
        norm_traj: &Trajectory,
        w: &Window,
        past: usize,
        future: usize,
        dt: f64,
    ) -> Result<Vec<TruncatedState>, HarnessError> {
        let t0 = w.t0;
        let start = t0 + 1 - past;
        match self {
            PreparedEvaluator::Physics(params) => Ok(physics_rollout(
                &traj.states[t0],
                &traj.controls[t0 + 1..=t0 + future],
                dt,
                params,
            )?),
            PreparedEvaluator::EndToEnd { network, norm } => {
                let input = augment_sequence(
                    &norm_traj.states[start..=t0],
                    &norm_traj.controls[start..=t0],
                    &norm_traj.controls[t0 + 1..=t0 + future],
                )
                .map_err(|e| HarnessError::Data(e.to_string()))?;
                let pred = network.predict(&input)?;
                let mut out = Vec::with_capacity(future);
                for i in 0..future {
                    let mut label = [0.0; 6];
                    for (c, slot) in label.iter_mut().enumerate() {
                        *slot = pred.get(0, c, i);
                    }
                    out.push(norm.denormalize_label(&TruncatedState::from_array(label)));
                }
                Ok(out)
            }
            PreparedEvaluator::Hybrid {
                physics,
                thrust,
                accel,
            } => {
                let hybrid = HybridPredictor {
                    params: (*physics).clone(),
                    thrust: thrust
                        .as_ref()
                        .map(|t| t as &dyn e2e_tcn::hybrid::ThrustPredictor),
                    accel: accel
                        .as_ref()
                        .map(|a| a as &dyn e2e_tcn::hybrid::AccelPredictor),
                };
                Ok(hybrid.rollout(
                    &traj.states[start..=t0],
                    &traj.controls[start..=t0],
                    &traj.controls[t0 + 1..=t0 + future],
                    dt,
                )?)
            }
        }
    }
}

/// Raw-unit predictions for each window, in window order.
pub fn predict_windows(
    model: &TrainedModel,
    data: &PreparedData,
    windows: &[Window],
    past: usize,
    future: usize,
    dt: f64,
) -> Result<Vec<Vec<TruncatedState>>, HarnessError> {
    let evaluator = PreparedEvaluator::new(model)?;
    let normalized: Vec<Option<Trajectory>> = data
        .trajectories
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if model.kind == ModelKind::EndToEnd && windows.iter().any(|w| w.traj_id == i) {
                Some(data.norm.normalize_trajectory(t))
            } else {
                None
            }
        })
        .collect();
    windows
        .iter()
        .map(|w| {
            let traj = &data.trajectories[w.traj_id];
            let norm_traj = normalized[w.traj_id].as_ref().unwrap_or(traj);
            evaluator.predict_window(traj, norm_traj, w, past, future, dt)
        })
        .collect()
}

/// Evaluates a model over test windows, returning per-window squared-error
/// curves; the reduction order is fixed by window order regardless of the
/// number of worker threads.
pub fn evaluate_model(
    model: &TrainedModel,
    data: &PreparedData,
    windows: &[Window],
    past: usize,
    future: usize,
    dt: f64,
) -> Result<HorizonErrors, HarnessError> {
    let normalized: Vec<Option<Trajectory>> = data
        .trajectories
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if model.kind == ModelKind::EndToEnd && windows.iter().any(|w| w.traj_id == i) {
                Some(data.norm.normalize_trajectory(t))
            } else {
                None
            }
        })
        .collect();
    let evaluator = PreparedEvaluator::new(model)?;
    let results: Vec<Result<(Vec<f64>, Vec<f64>), HarnessError>> = windows
        .par_iter()
        .map(|w| {
            let traj = &data.trajectories[w.traj_id];
            let norm_traj = normalized[w.traj_id].as_ref().unwrap_or(traj);
            let preds = evaluator.predict_window(traj, norm_traj, w, past, future, dt)?;
            let mut vel = Vec::with_capacity(future);
            let mut rate = Vec::with_capacity(future);
            for (i, pred) in preds.iter().enumerate() {
                let truth = truncate_state(&traj.states[w.t0 + 1 + i]).to_array();
                let p = pred.to_array();
                let mut rate_sq = 0.0;
                let mut vel_sq = 0.0;
                for c in 0..3 {
                    rate_sq += (p[c] - truth[c]).powi(2);
                    vel_sq += (p[c + 3] - truth[c + 3]).powi(2);
                }
                rate.push(rate_sq / 3.0);
                vel.push(vel_sq / 3.0);
            }
            Ok((vel, rate))
        })
        .collect();
    let mut errors = HorizonErrors {
        dt,
        velocity: Vec::with_capacity(windows.len()),
        body_rate: Vec::with_capacity(windows.len()),
    };
    for r in results {
        let (v, b) = r?;
        errors.velocity.push(v);
        errors.body_rate.push(b);
    }
    errors.validate()?;
    Ok(errors)
}

/// Zero-order-hold baseline: predict the last observed body rates and
/// velocities frozen over the horizon.
pub fn evaluate_zoh(
    data: &PreparedData,
    windows: &[Window],
    future: usize,
    dt: f64,
) -> Result<HorizonErrors, HarnessError> {
    let mut errors = HorizonErrors {
        dt,
        velocity: Vec::with_capacity(windows.len()),
        body_rate: Vec::with_capacity(windows.len()),
    };
    for w in windows {
        let traj = &data.trajectories[w.traj_id];
        let frozen = truncate_state(&traj.states[w.t0]).to_array();
        let mut vel = Vec::with_capacity(future);
        let mut rate = Vec::with_capacity(future);
        for i in 0..future {
            let truth = truncate_state(&traj.states[w.t0 + 1 + i]).to_array();
            let mut rate_sq = 0.0;
            let mut vel_sq = 0.0;
            for c in 0..3 {
                rate_sq += (frozen[c] - truth[c]).powi(2);
                vel_sq += (frozen[c + 3] - truth[c + 3]).powi(2);
            }
            rate.push(rate_sq / 3.0);
            vel.push(vel_sq / 3.0);
        }
        errors.velocity.push(vel);
        errors.body_rate.push(rate);
    }
    errors.validate()?;
    Ok(errors)
}
