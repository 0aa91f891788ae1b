//! Experiment configuration files: flat UTF-8 `key = value` lines grouped
//! under `[section]` headers, `#` comments. Every key is documented below;
//! unknown keys or sections are errors.
//!
//! ```text
//! seed = 0                       # top level, overridable by --seed
//!
//! [model]
//! kind = e2e-tcn                 # physics | e2e-tcn | motor-hybrid |
//!                                # accel-hybrid | combined-hybrid
//!
//! [network]
//! blocks = 8                     # residual blocks
//! kernel = 3
//! channels = 64                  # width of every block
//! batchnorm = true
//! dropout = 0.0
//! loss = l2                      # l1 | l2 | wl2
//! wl2_weights = 2,2,2,1,1,1      # per output channel, wl2 only
//! shortened_gradient = false
//! injection_layer = 4
//!
//! [data]
//! source = synthetic             # synthetic | files
//! files = data/*.csv             # glob, files source only
//! trajectories = 40              # synthetic source only
//! samples = 300                  # per synthetic trajectory
//! dt = 0.01                      # sample interval, s
//! test_fraction = 0.25
//! past = 45                      # window lengths and stride
//! future = 45
//! stride = 5
//!
//! [physics]
//! mass = 1.0
//! inertia = 0.01,0.01,0.02
//! arm_length = 0.21
//! thrust_coeff = 8e-6
//! torque_coeff = 1e-7
//! drag_t = 0.05
//! drag_r = 0.001
//! gravity = 9.81
//! motor_gain = 50
//! motor_bias = 0
//!
//! [train]
//! epochs = 100
//! batch_size = 32
//! learning_rate = 0.001
//! ```

use std::path::Path;

use nalgebra::Vector3;

use e2e_tcn::physics::PhysicsParams;
use e2e_tcn::tcn::{LossKind, NetworkConfig};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Physics,
    EndToEnd,
    MotorHybrid,
    AccelHybrid,
    CombinedHybrid,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Physics => "physics",
            ModelKind::EndToEnd => "e2e-tcn",
            ModelKind::MotorHybrid => "motor-hybrid",
            ModelKind::AccelHybrid => "accel-hybrid",
            ModelKind::CombinedHybrid => "combined-hybrid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSource {
    Synthetic,
    Files,
}

#[derive(Debug, Clone)]
pub struct DataConfig {
    pub source: DataSource,
    pub files: Option<String>,
    pub trajectories: usize,
    pub samples: usize,
    pub dt: f64,
    pub test_fraction: f64,
    pub past: usize,
    pub future: usize,
    pub stride: usize,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub kind: ModelKind,
    pub blocks: usize,
    pub kernel: usize,
    pub channels: usize,
    pub batchnorm: bool,
    pub dropout: f64,
    pub loss: LossKind,
    pub wl2_weights: Vec<f64>,
    pub shortened_gradient: bool,
    pub injection_layer: usize,
    pub data: DataConfig,
    pub physics: PhysicsParams,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            kind: ModelKind::EndToEnd,
            blocks: 8,
            kernel: 3,
            channels: 64,
            batchnorm: true,
            dropout: 0.0,
            loss: LossKind::L2,
            wl2_weights: vec![2.0, 2.0, 2.0, 1.0, 1.0, 1.0],
            shortened_gradient: false,
            injection_layer: 4,
            data: DataConfig {
                source: DataSource::Synthetic,
                files: None,
                trajectories: 40,
                samples: 300,
                dt: 0.01,
                test_fraction: 0.25,
                past: 45,
                future: 45,
                stride: 5,
            },
            physics: PhysicsParams::default_desk_scale(),
            train: TrainConfig {
                epochs: 100,
                batch_size: 32,
                learning_rate: 1e-3,
            },
        }
    }
}

impl ExperimentConfig {
    /// The network shape for the end-to-end model.
    pub fn network_config(&self) -> NetworkConfig {
        let mut cfg = NetworkConfig::default_e2e(self.data.past, self.data.future);
        cfg.num_blocks = self.blocks;
        cfg.kernel_size = self.kernel;
        cfg.channels = vec![self.channels; self.blocks];
        cfg.use_batchnorm = self.batchnorm;
        cfg.dropout_rate = self.dropout;
        cfg.loss_kind = self.loss;
        cfg.wl2_weights = self.wl2_weights.clone();
        cfg.shortened_gradient = self.shortened_gradient;
        cfg.injection_layer = self.injection_layer.min(self.blocks.saturating_sub(1));
        cfg.seed = self.seed;
        cfg
    }

    /// The network shape for a hybrid component: one step ahead, raw-unit
    /// outputs of the given channel count.
    pub fn hybrid_network_config(&self, output_channels: usize, seed_offset: u64) -> NetworkConfig {
        let mut cfg = self.network_config();
        cfg.future_steps = 1;
        cfg.output_channels = output_channels;
        cfg.loss_kind = LossKind::L2;
        cfg.seed = self.seed.wrapping_add(seed_offset);
        cfg
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.blocks == 0 {
            return Err(HarnessError::Config("network needs at least 1 block".into()));
        }
        if self.data.past == 0 || self.data.future == 0 || self.data.stride == 0 {
            return Err(HarnessError::Config(
                "past, future and stride must be positive".into(),
            ));
        }
        if self.data.source == DataSource::Files && self.data.files.is_none() {
            return Err(HarnessError::Config(
                "data source `files` needs a `files` glob".into(),
            ));
        }
        if self.train.batch_size == 0 {
            return Err(HarnessError::Config("batch_size must be positive".into()));
        }
        self.physics
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T, HarnessError> {
    value.parse().map_err(|_| {
        HarnessError::Config(format!("line {line}: cannot parse `{value}` for key `{key}`"))
    })
}

fn parse_bool(key: &str, value: &str, line: usize) -> Result<bool, HarnessError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(HarnessError::Config(format!(
            "line {line}: key `{key}` expects a boolean, got `{value}`"
        ))),
    }
}

fn parse_list(key: &str, value: &str, line: usize) -> Result<Vec<f64>, HarnessError> {
    value
        .split(',')
        .map(|v| parse::<f64>(key, v.trim(), line))
        .collect()
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = ExperimentConfig::default();
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| {
                HarnessError::Config(format!("line {lineno}: malformed section header `{line}`"))
            })?;
            match name {
                "model" | "network" | "data" | "physics" | "train" => {
                    section = name.to_string();
                }
                other => {
                    return Err(HarnessError::Config(format!(
                        "line {lineno}: unknown section `[{other}]`"
                    )))
                }
            }
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            HarnessError::Config(format!("line {lineno}: expected `key = value`, got `{line}`"))
        })?;
        let key = key.trim();
        let value = value.trim();
        match (section.as_str(), key) {
            ("", "seed") => cfg.seed = parse(key, value, lineno)?,
            ("model", "kind") => {
                cfg.kind = match value {
                    "physics" => ModelKind::Physics,
                    "e2e-tcn" => ModelKind::EndToEnd,
                    "motor-hybrid" => ModelKind::MotorHybrid,
                    "accel-hybrid" => ModelKind::AccelHybrid,
                    "combined-hybrid" => ModelKind::CombinedHybrid,
                    other => {
                        return Err(HarnessError::Config(format!(
                            "line {lineno}: unknown model kind `{other}`"
                        )))
                    }
                }
            }
            ("network", "blocks") => cfg.blocks = parse(key, value, lineno)?,
            ("network", "kernel") => cfg.kernel = parse(key, value, lineno)?,
            ("network", "channels") => cfg.channels = parse(key, value, lineno)?,
            ("network", "batchnorm") => cfg.batchnorm = parse_bool(key, value, lineno)?,
            ("network", "dropout") => cfg.dropout = parse(key, value, lineno)?,
            ("network", "loss") => {
                cfg.loss = match value {
                    "l1" => LossKind::L1,
                    "l2" => LossKind::L2,
                    "wl2" => LossKind::WL2,
                    other => {
                        return Err(HarnessError::Config(format!(
                            "line {lineno}: unknown loss `{other}`"
                        )))
                    }
                }
            }
            ("network", "wl2_weights") => cfg.wl2_weights = parse_list(key, value, lineno)?,
            ("network", "shortened_gradient") => {
                cfg.shortened_gradient = parse_bool(key, value, lineno)?
            }
            ("network", "injection_layer") => cfg.injection_layer = parse(key, value, lineno)?,
            ("data", "source") => {
                cfg.data.source = match value {
                    "synthetic" => DataSource::Synthetic,
                    "files" => DataSource::Files,
                    other => {
                        return Err(HarnessError::Config(format!(
                            "line {lineno}: unknown data source `{other}`"
                        )))
                    }
                }
            }
            ("data", "files") => cfg.data.files = Some(value.to_string()),
            ("data", "trajectories") => cfg.data.trajectories = parse(key, value, lineno)?,
            ("data", "samples") => cfg.data.samples = parse(key, value, lineno)?,
            ("data", "dt") => cfg.data.dt = parse(key, value, lineno)?,
            ("data", "test_fraction") => cfg.data.test_fraction = parse(key, value, lineno)?,
            ("data", "past") => cfg.data.past = parse(key, value, lineno)?,
            ("data", "future") => cfg.data.future = parse(key, value, lineno)?,
            ("data", "stride") => cfg.data.stride = parse(key, value, lineno)?,
            ("physics", "mass") => cfg.physics.mass = parse(key, value, lineno)?,
            ("physics", "inertia") => {
                let v = parse_list(key, value, lineno)?;
                if v.len() != 3 {
                    return Err(HarnessError::Config(format!(
                        "line {lineno}: inertia needs 3 values"
                    )));
                }
                cfg.physics.inertia = Vector3::new(v[0], v[1], v[2]);
            }
            ("physics", "arm_length") => cfg.physics.arm_length = parse(key, value, lineno)?,
            ("physics", "thrust_coeff") => cfg.physics.thrust_coeff = parse(key, value, lineno)?,
            ("physics", "torque_coeff") => cfg.physics.torque_coeff = parse(key, value, lineno)?,
            ("physics", "drag_t") => cfg.physics.drag_t = parse(key, value, lineno)?,
            ("physics", "drag_r") => cfg.physics.drag_r = parse(key, value, lineno)?,
            ("physics", "gravity") => cfg.physics.gravity = parse(key, value, lineno)?,
            ("physics", "motor_gain") => cfg.physics.motor_gain = parse(key, value, lineno)?,
            ("physics", "motor_bias") => cfg.physics.motor_bias = parse(key, value, lineno)?,
            ("train", "epochs") => cfg.train.epochs = parse(key, value, lineno)?,
            ("train", "batch_size") => cfg.train.batch_size = parse(key, value, lineno)?,
            ("train", "learning_rate") => cfg.train.learning_rate = parse(key, value, lineno)?,
            (sec, key) => {
                return Err(HarnessError::Config(if sec.is_empty() {
                    format!("line {lineno}: unknown top-level key `{key}`")
                } else {
                    format!("line {lineno}: unknown key `{key}` in section `[{sec}]`")
                }))
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_through_empty_config() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.kind, ModelKind::EndToEnd);
        assert_eq!(cfg.blocks, 8);
        assert_eq!(cfg.train.epochs, 100);
    }

    #[test]
    fn full_config_parses() {
        let text = "\
seed = 9\n\
[model]\n\
kind = motor-hybrid\n\
[network]\n\
blocks = 3  # small\n\
kernel = 2\n\
channels = 16\n\
batchnorm = false\n\
dropout = 0.1\n\
loss = wl2\n\
wl2_weights = 1,1,1,2,2,2\n\
shortened_gradient = true\n\
injection_layer = 1\n\
[data]\n\
source = synthetic\n\
trajectories = 5\n\
samples = 120\n\
dt = 0.02\n\
test_fraction = 0.4\n\
past = 10\n\
future = 8\n\
stride = 2\n\
[physics]\n\
mass = 1.5\n\
inertia = 0.02,0.02,0.04\n\
[train]\n\
epochs = 7\n\
batch_size = 4\n\
learning_rate = 0.01\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.kind, ModelKind::MotorHybrid);
        assert_eq!(cfg.blocks, 3);
        assert!(!cfg.batchnorm);
        assert_eq!(cfg.loss, LossKind::WL2);
        assert_eq!(cfg.data.dt, 0.02);
        assert_eq!(cfg.physics.mass, 1.5);
        assert_eq!(cfg.physics.inertia.z, 0.04);
        assert_eq!(cfg.train.epochs, 7);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = parse_config("[network]\nwidht = 64\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("widht"));
    }

    #[test]
    fn unknown_section_is_an_error() {
        assert!(parse_config("[netwerk]\n").is_err());
    }

    #[test]
    fn files_source_requires_glob() {
        assert!(parse_config("[data]\nsource = files\n").is_err());
        assert!(parse_config("[data]\nsource = files\nfiles = x/*.csv\n").is_ok());
    }

    #[test]
    fn bad_value_cites_line() {
        let err = parse_config("[train]\nepochs = soon\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
