//! Binary model checkpoints, little-endian throughout.
//!
//! Layout: magic `E2ETCN01`, format version `u32`, variant tag `u8`,
//! network count `u8`; per network the serialized configuration, its
//! parameter tensors in declaration order as `(rank u32, dims u32..,
//! payload f32..)`, and its batch-norm running statistics in the same tensor
//! encoding; then optional sections for normalization statistics, physics
//! parameters (hybrid variants) and per-network optimizer state. Saving a
//! loaded checkpoint reproduces the file byte for byte.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use thiserror::Error;

use crate::dataset::normalize::NormStats;
use crate::hybrid::HybridVariant;
use crate::physics::PhysicsParams;
use crate::tcn::{LossKind, Network, NetworkConfig, OptimizerState, TcnError};
use crate::quadstate::{CONTROL_DIM, STATE_DIM};

pub const MAGIC: [u8; 8] = *b"E2ETCN01";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint format version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Tcn(#[from] TcnError),
}

/// What the stored networks are for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckpointKind {
    /// One network predicting the truncated state directly.
    EndToEnd,
    /// One thrust network plus physics parameters.
    MotorHybrid,
    /// One derivative-correction network plus physics parameters.
    AccelErrorHybrid,
    /// Thrust network then correction network, plus physics parameters.
    CombinedHybrid,
}

impl CheckpointKind {
    fn tag(self) -> u8 {
        match self {
            CheckpointKind::EndToEnd => 0,
            CheckpointKind::MotorHybrid => 1,
            CheckpointKind::AccelErrorHybrid => 2,
            CheckpointKind::CombinedHybrid => 3,
        }
    }

    fn from_tag(tag: u8) -> Result<Self, CheckpointError> {
        Ok(match tag {
            0 => CheckpointKind::EndToEnd,
            1 => CheckpointKind::MotorHybrid,
            2 => CheckpointKind::AccelErrorHybrid,
            3 => CheckpointKind::CombinedHybrid,
            other => {
                return Err(CheckpointError::Corrupt(format!(
                    "unknown variant tag {other}"
                )))
            }
        })
    }

    pub fn expected_networks(self) -> usize {
        match self {
            CheckpointKind::CombinedHybrid => 2,
            _ => 1,
        }
    }

    pub fn hybrid_variant(self) -> Option<HybridVariant> {
        match self {
            CheckpointKind::EndToEnd => None,
            CheckpointKind::MotorHybrid => Some(HybridVariant::Motor),
            CheckpointKind::AccelErrorHybrid => Some(HybridVariant::AccelError),
            CheckpointKind::CombinedHybrid => Some(HybridVariant::Combined),
        }
    }
}

#[derive(Debug)]
pub struct Checkpoint {
    pub kind: CheckpointKind,
    /// One network, or thrust then correction for the combined hybrid.
    pub networks: Vec<Network>,
    pub norm: Option<NormStats>,
    /// Present for the hybrid variants.
    pub physics: Option<PhysicsParams>,
    /// Aligned with `networks`.
    pub optimizers: Vec<Option<OptimizerState>>,
}

struct Writer<W: Write> {
    inner: W,
}

impl<W: Write> Writer<W> {
    fn u8(&mut self, v: u8) -> Result<(), CheckpointError> {
        Ok(self.inner.write_all(&[v])?)
    }
    fn u32(&mut self, v: u32) -> Result<(), CheckpointError> {
        Ok(self.inner.write_all(&v.to_le_bytes())?)
    }
    fn u64(&mut self, v: u64) -> Result<(), CheckpointError> {
        Ok(self.inner.write_all(&v.to_le_bytes())?)
    }
    fn f32(&mut self, v: f32) -> Result<(), CheckpointError> {
        Ok(self.inner.write_all(&v.to_le_bytes())?)
    }
    fn f64(&mut self, v: f64) -> Result<(), CheckpointError> {
        Ok(self.inner.write_all(&v.to_le_bytes())?)
    }
    fn usize32(&mut self, v: usize) -> Result<(), CheckpointError> {
        self.u32(u32::try_from(v).map_err(|_| {
            CheckpointError::Corrupt(format!("value {v} exceeds the 32-bit field"))
        })?)
    }
    /// Rank-1 tensor, single-precision payload.
    fn tensor_f32(&mut self, data: &[f64]) -> Result<(), CheckpointError> {
        self.u32(1)?;
        self.usize32(data.len())?;
        for &v in data {
            self.f32(v as f32)?;
        }
        Ok(())
    }
}

struct Reader<R: Read> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], CheckpointError> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| CheckpointError::Corrupt("unexpected end of file".into()))?;
        Ok(buf)
    }
    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.bytes::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f32(&mut self) -> Result<f32, CheckpointError> {
        Ok(f32::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn tensor_f32(&mut self) -> Result<Vec<f64>, CheckpointError> {
        let rank = self.u32()?;
        let mut len = 1usize;
        for _ in 0..rank {
            let dim = self.u32()? as usize;
            len = len
                .checked_mul(dim)
                .ok_or_else(|| CheckpointError::Corrupt("tensor size overflow".into()))?;
        }
        if rank == 0 {
            len = 0;
        }
        if len > (1 << 30) {
            return Err(CheckpointError::Corrupt(format!(
                "implausible tensor of {len} elements"
            )));
        }
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(self.f32()? as f64);
        }
        Ok(out)
    }
}

fn write_config<W: Write>(w: &mut Writer<W>, cfg: &NetworkConfig) -> Result<(), CheckpointError> {
    w.usize32(cfg.num_blocks)?;
    w.usize32(cfg.kernel_size)?;
    w.usize32(cfg.channels.len())?;
    for &c in &cfg.channels {
        w.usize32(c)?;
    }
    w.usize32(cfg.past_steps)?;
    w.usize32(cfg.future_steps)?;
    w.usize32(cfg.input_channels)?;
    w.usize32(cfg.output_channels)?;
    w.u8(cfg.use_batchnorm as u8)?;
    w.f64(cfg.dropout_rate)?;
    w.u8(match cfg.loss_kind {
        LossKind::L1 => 0,
        LossKind::L2 => 1,
        LossKind::WL2 => 2,
    })?;
    w.usize32(cfg.wl2_weights.len())?;
    for &v in &cfg.wl2_weights {
        w.f64(v)?;
    }
    w.u8(cfg.shortened_gradient as u8)?;
    w.usize32(cfg.injection_layer)?;
    w.u64(cfg.seed)?;
    Ok(())
}

fn read_config<R: Read>(r: &mut Reader<R>) -> Result<NetworkConfig, CheckpointError> {
    let num_blocks = r.u32()? as usize;
    let kernel_size = r.u32()? as usize;
    let n_channels = r.u32()? as usize;
    if n_channels > 1024 {
        return Err(CheckpointError::Corrupt(format!(
            "implausible channel list of length {n_channels}"
        )));
    }
    let mut channels = Vec::with_capacity(n_channels);
    for _ in 0..n_channels {
        channels.push(r.u32()? as usize);
    }
    let past_steps = r.u32()? as usize;
    let future_steps = r.u32()? as usize;
    let input_channels = r.u32()? as usize;
    let output_channels = r.u32()? as usize;
    let use_batchnorm = r.u8()? != 0;
    let dropout_rate = r.f64()?;
    let loss_kind = match r.u8()? {
        0 => LossKind::L1,
        1 => LossKind::L2,
        2 => LossKind::WL2,
        other => {
            return Err(CheckpointError::Corrupt(format!(
                "unknown loss tag {other}"
            )))
        }
    };
    let n_weights = r.u32()? as usize;
    if n_weights > 1024 {
        return Err(CheckpointError::Corrupt(format!(
            "implausible loss-weight list of length {n_weights}"
        )));
    }
    let mut wl2_weights = Vec::with_capacity(n_weights);
    for _ in 0..n_weights {
        wl2_weights.push(r.f64()?);
    }
    let shortened_gradient = r.u8()? != 0;
    let injection_layer = r.u32()? as usize;
    let seed = r.u64()?;
    Ok(NetworkConfig {
        num_blocks,
        kernel_size,
        channels,
        past_steps,
        future_steps,
        input_channels,
        output_channels,
        use_batchnorm,
        dropout_rate,
        loss_kind,
        wl2_weights,
        shortened_gradient,
        injection_layer,
        seed,
    })
}

fn write_network<W: Write>(w: &mut Writer<W>, net: &Network) -> Result<(), CheckpointError> {
    write_config(w, &net.config)?;
    let mut tensors: Vec<Vec<f64>> = Vec::new();
    net.for_each_param(&mut |_, p| tensors.push(p.to_vec()));
    w.usize32(tensors.len())?;
    for t in &tensors {
        w.tensor_f32(t)?;
    }
    let mut stats: Vec<Vec<f64>> = Vec::new();
    net.for_each_running_stat(&mut |_, s| stats.push(s.to_vec()));
    w.usize32(stats.len())?;
    for s in &stats {
        w.tensor_f32(s)?;
    }
    Ok(())
}

fn read_network<R: Read>(r: &mut Reader<R>) -> Result<Network, CheckpointError> {
    let config = read_config(r)?;
    let mut net = Network::init(config)?;
    let n_tensors = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(n_tensors);
    for _ in 0..n_tensors {
        tensors.push(r.tensor_f32()?);
    }
    let mut it = tensors.into_iter();
    let mut mismatch: Option<String> = None;
    net.for_each_param_mut(&mut |name, p| {
        if mismatch.is_some() {
            return;
        }
        match it.next() {
            Some(t) if t.len() == p.len() => *p = t,
            Some(t) => {
                mismatch = Some(format!(
                    "tensor {name}: stored {} values, expected {}",
                    t.len(),
                    p.len()
                ))
            }
            None => mismatch = Some(format!("missing tensor {name}")),
        }
    });
    if let Some(msg) = mismatch {
        return Err(CheckpointError::Corrupt(msg));
    }
    if it.next().is_some() {
        return Err(CheckpointError::Corrupt(
            "more parameter tensors than the configuration declares".into(),
        ));
    }
    let n_stats = r.u32()? as usize;
    let mut stats = Vec::with_capacity(n_stats);
    for _ in 0..n_stats {
        stats.push(r.tensor_f32()?);
    }
    let mut it = stats.into_iter();
    let mut mismatch: Option<String> = None;
    net.for_each_running_stat_mut(&mut |name, s| {
        if mismatch.is_some() {
            return;
        }
        match it.next() {
            Some(t) if t.len() == s.len() => *s = t,
            Some(t) => {
                mismatch = Some(format!(
                    "running stat {name}: stored {} values, expected {}",
                    t.len(),
                    s.len()
                ))
            }
            None => mismatch = Some(format!("missing running stat {name}")),
        }
    });
    if let Some(msg) = mismatch {
        return Err(CheckpointError::Corrupt(msg));
    }
    if it.next().is_some() {
        return Err(CheckpointError::Corrupt(
            "more running-stat tensors than the configuration declares".into(),
        ));
    }
    Ok(net)
}

fn write_norm<W: Write>(w: &mut Writer<W>, norm: &NormStats) -> Result<(), CheckpointError> {
    for v in norm.state_mean.iter().chain(&norm.state_std) {
        w.f64(*v)?;
    }
    for v in norm.control_mean.iter().chain(&norm.control_std) {
        w.f64(*v)?;
    }
    for &b in norm.constant_state.iter() {
        w.u8(b as u8)?;
    }
    for &b in norm.constant_control.iter() {
        w.u8(b as u8)?;
    }
    Ok(())
}

fn read_norm<R: Read>(r: &mut Reader<R>) -> Result<NormStats, CheckpointError> {
    let mut norm = NormStats::identity();
    for i in 0..STATE_DIM {
        norm.state_mean[i] = r.f64()?;
    }
    for i in 0..STATE_DIM {
        norm.state_std[i] = r.f64()?;
    }
    for i in 0..CONTROL_DIM {
        norm.control_mean[i] = r.f64()?;
    }
    for i in 0..CONTROL_DIM {
        norm.control_std[i] = r.f64()?;
    }
    for i in 0..STATE_DIM {
        norm.constant_state[i] = r.u8()? != 0;
    }
    for i in 0..CONTROL_DIM {
        norm.constant_control[i] = r.u8()? != 0;
    }
    Ok(norm)
}

fn write_physics<W: Write>(w: &mut Writer<W>, p: &PhysicsParams) -> Result<(), CheckpointError> {
    for v in [
        p.mass,
        p.inertia.x,
        p.inertia.y,
        p.inertia.z,
        p.arm_length,
        p.thrust_coeff,
        p.torque_coeff,
        p.drag_t,
        p.drag_r,
        p.gravity,
        p.motor_gain,
        p.motor_bias,
    ] {
        w.f64(v)?;
    }
    Ok(())
}

fn read_physics<R: Read>(r: &mut Reader<R>) -> Result<PhysicsParams, CheckpointError> {
    let mass = r.f64()?;
    let ix = r.f64()?;
    let iy = r.f64()?;
    let iz = r.f64()?;
    let arm_length = r.f64()?;
    let thrust_coeff = r.f64()?;
    let torque_coeff = r.f64()?;
    let drag_t = r.f64()?;
    let drag_r = r.f64()?;
    let gravity = r.f64()?;
    let motor_gain = r.f64()?;
    let motor_bias = r.f64()?;
    Ok(PhysicsParams {
        mass,
        inertia: Vector3::new(ix, iy, iz),
        arm_length,
        thrust_coeff,
        torque_coeff,
        drag_t,
        drag_r,
        gravity,
        motor_gain,
        motor_bias,
    })
}

fn write_optimizer<W: Write>(
    w: &mut Writer<W>,
    opt: &OptimizerState,
) -> Result<(), CheckpointError> {
    w.u64(opt.step_count)?;
    w.f64(opt.learning_rate)?;
    w.f64(opt.beta1)?;
    w.f64(opt.beta2)?;
    w.f64(opt.epsilon)?;
    w.usize32(opt.first_moment.len())?;
    for &v in &opt.first_moment {
        w.f64(v)?;
    }
    for &v in &opt.second_moment {
        w.f64(v)?;
    }
    Ok(())
}

fn read_optimizer<R: Read>(r: &mut Reader<R>) -> Result<OptimizerState, CheckpointError> {
    let step_count = r.u64()?;
    let learning_rate = r.f64()?;
    let beta1 = r.f64()?;
    let beta2 = r.f64()?;
    let epsilon = r.f64()?;
    let n = r.u32()? as usize;
    if n > (1 << 30) {
        return Err(CheckpointError::Corrupt(format!(
            "implausible optimizer state of {n} values"
        )));
    }
    let mut first_moment = Vec::with_capacity(n);
    for _ in 0..n {
        first_moment.push(r.f64()?);
    }
    let mut second_moment = Vec::with_capacity(n);
    for _ in 0..n {
        second_moment.push(r.f64()?);
    }
    Ok(OptimizerState {
        first_moment,
        second_moment,
        step_count,
        learning_rate,
        beta1,
        beta2,
        epsilon,
    })
}

pub fn save(path: &Path, ckpt: &Checkpoint) -> Result<(), CheckpointError> {
    if ckpt.networks.len() != ckpt.kind.expected_networks() {
        return Err(CheckpointError::Corrupt(format!(
            "{:?} checkpoint needs {} network(s), got {}",
            ckpt.kind,
            ckpt.kind.expected_networks(),
            ckpt.networks.len()
        )));
    }
    if ckpt.optimizers.len() != ckpt.networks.len() {
        return Err(CheckpointError::Corrupt(format!(
            "{} optimizer slots for {} networks",
            ckpt.optimizers.len(),
            ckpt.networks.len()
        )));
    }
    let file = std::fs::File::create(path)?;
    let mut w = Writer {
        inner: std::io::BufWriter::new(file),
    };
    w.inner.write_all(&MAGIC)?;
    w.u32(FORMAT_VERSION)?;
    w.u8(ckpt.kind.tag())?;
    w.u8(ckpt.networks.len() as u8)?;
    for net in &ckpt.networks {
        write_network(&mut w, net)?;
    }
    match &ckpt.norm {
        Some(norm) => {
            w.u8(1)?;
            write_norm(&mut w, norm)?;
        }
        None => w.u8(0)?,
    }
    match &ckpt.physics {
        Some(p) => {
            w.u8(1)?;
            write_physics(&mut w, p)?;
        }
        None => w.u8(0)?,
    }
    for opt in &ckpt.optimizers {
        match opt {
            Some(o) => {
                w.u8(1)?;
                write_optimizer(&mut w, o)?;
            }
            None => w.u8(0)?,
        }
    }
    w.inner.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let file = std::fs::File::open(path)?;
    let mut r = Reader {
        inner: std::io::BufReader::new(file),
    };
    let magic: [u8; 8] = r.bytes().map_err(|_| CheckpointError::BadMagic)?;
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let kind = CheckpointKind::from_tag(r.u8()?)?;
    let n_networks = r.u8()? as usize;
    if n_networks != kind.expected_networks() {
        return Err(CheckpointError::Corrupt(format!(
            "{kind:?} checkpoint declares {n_networks} network(s)"
        )));
    }
    let mut networks = Vec::with_capacity(n_networks);
    for _ in 0..n_networks {
        networks.push(read_network(&mut r)?);
    }
    let norm = if r.u8()? != 0 {
        Some(read_norm(&mut r)?)
    } else {
        None
    };
    let physics = if r.u8()? != 0 {
        Some(read_physics(&mut r)?)
    } else {
        None
    };
    let mut optimizers = Vec::with_capacity(n_networks);
    for _ in 0..n_networks {
        optimizers.push(if r.u8()? != 0 {
            Some(read_optimizer(&mut r)?)
        } else {
            None
        });
    }
    let mut trailing = [0u8; 1];
    match r.inner.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => {
            return Err(CheckpointError::Corrupt(
                "trailing bytes after checkpoint".into(),
            ))
        }
        Err(e) => return Err(e.into()),
    }
    Ok(Checkpoint {
        kind,
        networks,
        norm,
        physics,
        optimizers,
    })
}
