//! The full sequence-prediction network: a stack of residual blocks with
//! exponentially growing dilation, closed by a pointwise output convolution.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use thiserror::Error;

use super::block::{BlockCache, BlockGrads, ResidualBlock};
use super::conv::{ConvGrads, ConvLayer};
use super::loss::LossKind;
use super::tensor::{SeqTensor, ShapeError};
use super::Mode;
use crate::quadstate::{AUG_DIM, CONTROL_DIM, STATE_DIM, TRUNC_DIM};

#[derive(Debug, Error)]
pub enum TcnError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("non-finite activation at {location}")]
    NonFinite { location: String },
    #[error("invalid network config: {0}")]
    Config(String),
    #[error("empty dataset")]
    EmptyDataset,
}

/// Architecture and training-behavior switches for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub num_blocks: usize,
    pub kernel_size: usize,
    /// Output channel width of each residual block; length `num_blocks`.
    pub channels: Vec<usize>,
    /// Past window length P.
    pub past_steps: usize,
    /// Future window length F.
    pub future_steps: usize,
    pub input_channels: usize,
    pub output_channels: usize,
    pub use_batchnorm: bool,
    pub dropout_rate: f64,
    pub loss_kind: LossKind,
    /// Per-output-channel weights for the weighted L2 loss.
    pub wl2_weights: Vec<f64>,
    /// Feed future controls to an intermediate block instead of the input.
    pub shortened_gradient: bool,
    /// Block index at which future controls are injected when
    /// `shortened_gradient` is set.
    pub injection_layer: usize,
    pub seed: u64,
}

impl NetworkConfig {
    /// Defaults sized for 90-step past and future windows at 100 Hz.
    pub fn default_e2e(past_steps: usize, future_steps: usize) -> Self {
        NetworkConfig {
            num_blocks: 8,
            kernel_size: 3,
            channels: vec![64; 8],
            past_steps,
            future_steps,
            input_channels: AUG_DIM,
            output_channels: TRUNC_DIM,
            use_batchnorm: true,
            dropout_rate: 0.0,
            loss_kind: LossKind::L2,
            // Body-rate channels weighted up relative to velocities.
            wl2_weights: vec![2.0, 2.0, 2.0, 1.0, 1.0, 1.0],
            shortened_gradient: false,
            injection_layer: 4,
            seed: 0,
        }
    }

    /// Dilation shared by the two convolutions of block `b`: doubles per
    /// block, `1, 2, 4, ...`.
    pub fn dilation_of_block(&self, b: usize) -> usize {
        1usize << b.min(30)
    }

    /// Dilations of every convolution layer in stack order.
    pub fn conv_dilations(&self) -> Vec<usize> {
        (0..self.num_blocks)
            .flat_map(|b| {
                let d = self.dilation_of_block(b);
                [d, d]
            })
            .collect()
    }

    /// Validates the config; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>, TcnError> {
        if self.num_blocks == 0 {
            return Err(TcnError::Config("num_blocks must be >= 1".into()));
        }
        if self.kernel_size == 0 {
            return Err(TcnError::Config("kernel_size must be >= 1".into()));
        }
        if self.channels.len() != self.num_blocks {
            return Err(TcnError::Config(format!(
                "channels has {} entries for {} blocks",
                self.channels.len(),
                self.num_blocks
            )));
        }
        if self.channels.iter().any(|c| *c == 0) {
            return Err(TcnError::Config("channel widths must be positive".into()));
        }
        if self.past_steps == 0 || self.future_steps == 0 {
            return Err(TcnError::Config("window lengths must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(TcnError::Config("dropout_rate must be in [0, 1)".into()));
        }
        if self.loss_kind == LossKind::WL2 && self.wl2_weights.len() != self.output_channels {
            return Err(TcnError::Config(format!(
                "wl2_weights has {} entries for {} output channels",
                self.wl2_weights.len(),
                self.output_channels
            )));
        }
        if self.shortened_gradient && self.injection_layer >= self.num_blocks {
            return Err(TcnError::Config(format!(
                "injection_layer {} out of range for {} blocks",
                self.injection_layer, self.num_blocks
            )));
        }
        let mut warnings = Vec::new();
        let window = self.past_steps + self.future_steps;
        if !self.shortened_gradient && receptive_field(self) < window {
            warnings.push(format!(
                "receptive field {} does not cover the {}-step window",
                receptive_field(self),
                window
            ));
        }
        Ok(warnings)
    }
}

/// Receptive field of the configured stack: `1 + sum (k-1) * dilation` over
/// every convolution layer.
pub fn receptive_field(config: &NetworkConfig) -> usize {
    receptive_field_of(config.kernel_size, &config.conv_dilations())
}

/// Receptive field of an arbitrary causal stack given per-layer dilations.
pub fn receptive_field_of(kernel_size: usize, dilations: &[usize]) -> usize {
    1 + dilations
        .iter()
        .map(|d| (kernel_size - 1) * d)
        .sum::<usize>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: NetworkConfig,
    pub blocks: Vec<ResidualBlock>,
    pub out_conv: ConvLayer,
}

#[derive(Debug, Clone)]
pub struct NetworkGrads {
    pub blocks: Vec<BlockGrads>,
    pub out_conv: ConvGrads,
}

/// Forward-pass state consumed by [`Network::backward`] and by the BN
/// running-stat update.
pub struct NetCache {
    block_caches: Vec<BlockCache>,
    out_in: SeqTensor,
    /// Control rows of the original input, kept when shortened-gradient
    /// injection is active.
    _mode: Mode,
}

impl Network {
    /// Builds the network with fan-in scaled normal weights drawn from a
    /// ChaCha stream seeded by `config.seed`.
    pub fn init(config: NetworkConfig) -> Result<Self, TcnError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut blocks = Vec::with_capacity(config.num_blocks);
        for b in 0..config.num_blocks {
            let mut c_in = if b == 0 {
                config.input_channels
            } else {
                config.channels[b - 1]
            };
            if config.shortened_gradient && b == config.injection_layer {
                c_in += CONTROL_DIM;
            }
            let mut block = ResidualBlock::new(
                c_in,
                config.channels[b],
                config.kernel_size,
                config.dilation_of_block(b),
                config.use_batchnorm,
                config.dropout_rate,
            );
            init_conv(&mut block.conv1, &mut rng);
            init_conv(&mut block.conv2, &mut rng);
            if let Some(p) = &mut block.proj {
                init_conv(p, &mut rng);
            }
            blocks.push(block);
        }
        let mut out_conv = ConvLayer::zeros(
            *config.channels.last().unwrap(),
            config.output_channels,
            1,
            1,
        );
        init_conv(&mut out_conv, &mut rng);
        Ok(Network {
            config,
            blocks,
            out_conv,
        })
    }

    pub fn param_count(&self) -> usize {
        self.blocks.iter().map(|b| b.param_count()).sum::<usize>()
            + self.out_conv.param_count()
    }

    /// Full forward pass; returns the last `F` time positions as a
    /// `(B, output_channels, F)` tensor. Position `i` estimates the label at
    /// `t0 + 1 + i`.
    pub fn forward(
        &self,
        input: &SeqTensor,
        mode: Mode,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(SeqTensor, NetCache), TcnError> {
        let cfg = &self.config;
        let window = cfg.past_steps + cfg.future_steps;
        if input.channels() != cfg.input_channels || input.steps() != window {
            return Err(ShapeError::new(format!(
                "network expects {}x{} input, got {}x{}",
                cfg.input_channels,
                window,
                input.channels(),
                input.steps()
            ))
            .into());
        }

        let mut h = if cfg.shortened_gradient {
            mask_future_columns(input, cfg.past_steps)
        } else {
            input.clone()
        };
        let mut rng = rng;
        let mut caches = Vec::with_capacity(self.blocks.len());
        for (b, block) in self.blocks.iter().enumerate() {
            if cfg.shortened_gradient && b == cfg.injection_layer {
                h = concat_control_rows(&h, input);
            }
            let (next, cache) = block.forward(&h, mode, rng.as_deref_mut())?;
            if !next.is_finite() {
                return Err(TcnError::NonFinite {
                    location: format!("block {}", b),
                });
            }
            caches.push(cache);
            h = next;
        }
        let out_full = self.out_conv.forward(&h)?;
        if !out_full.is_finite() {
            return Err(TcnError::NonFinite {
                location: "output convolution".into(),
            });
        }
        let out = out_full.slice_last_steps(cfg.future_steps);
        Ok((
            out,
            NetCache {
                block_caches: caches,
                out_in: h,
                _mode: mode,
            },
        ))
    }

    /// Eval-mode forward pass without cache bookkeeping at the call site.
    pub fn predict(&self, input: &SeqTensor) -> Result<SeqTensor, TcnError> {
        Ok(self.forward(input, Mode::Eval, None)?.0)
    }

    /// Reverse-mode pass from the gradient of the loss with respect to the
    /// sliced `(B, output_channels, F)` prediction.
    pub fn backward(
        &self,
        cache: &NetCache,
        grad_prediction: &SeqTensor,
        mode: Mode,
    ) -> NetworkGrads {
        let cfg = &self.config;
        let window = cfg.past_steps + cfg.future_steps;
        // Embed the prediction gradient into the full time axis.
        let mut grad_full = SeqTensor::zeros(grad_prediction.batch(), cfg.output_channels, window);
        for b in 0..grad_prediction.batch() {
            for c in 0..cfg.output_channels {
                let src = grad_prediction.row(b, c);
                grad_full.row_mut(b, c)[cfg.past_steps..].copy_from_slice(src);
            }
        }
        let (mut g, out_grads) = self.out_conv.backward(&cache.out_in, &grad_full);
        let mut block_grads: Vec<BlockGrads> = Vec::with_capacity(self.blocks.len());
        for (b, block) in self.blocks.iter().enumerate().rev() {
            let (mut gx, grads) = block.backward(&cache.block_caches[b], &g, mode);
            if cfg.shortened_gradient && b == cfg.injection_layer {
                // The injected control rows are inputs, not activations of the
                // previous block; drop their gradient.
                gx = drop_last_channels(&gx, CONTROL_DIM);
            }
            block_grads.push(grads);
            g = gx;
        }
        block_grads.reverse();
        NetworkGrads {
            blocks: block_grads,
            out_conv: out_grads,
        }
    }

    /// Applies the cached batch statistics to the BN running estimates.
    pub fn update_running_stats(&mut self, cache: &NetCache) {
        for (block, c) in self.blocks.iter_mut().zip(&cache.block_caches) {
            block.update_running(c);
        }
    }

    /// Visits every trainable parameter tensor in declaration order.
    pub fn for_each_param(&self, f: &mut dyn FnMut(&str, &[f64])) {
        for (i, b) in self.blocks.iter().enumerate() {
            f(&format!("block{}.conv1.weight", i), &b.conv1.weight);
            f(&format!("block{}.conv1.bias", i), &b.conv1.bias);
            if let Some(bn) = &b.bn1 {
                f(&format!("block{}.bn1.gamma", i), &bn.gamma);
                f(&format!("block{}.bn1.beta", i), &bn.beta);
            }
            f(&format!("block{}.conv2.weight", i), &b.conv2.weight);
            f(&format!("block{}.conv2.bias", i), &b.conv2.bias);
            if let Some(bn) = &b.bn2 {
                f(&format!("block{}.bn2.gamma", i), &bn.gamma);
                f(&format!("block{}.bn2.beta", i), &bn.beta);
            }
            if let Some(p) = &b.proj {
                f(&format!("block{}.proj.weight", i), &p.weight);
                f(&format!("block{}.proj.bias", i), &p.bias);
            }
        }
        f("out.weight", &self.out_conv.weight);
        f("out.bias", &self.out_conv.bias);
    }

    pub fn for_each_param_mut(&mut self, f: &mut dyn FnMut(&str, &mut Vec<f64>)) {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            f(&format!("block{}.conv1.weight", i), &mut b.conv1.weight);
            f(&format!("block{}.conv1.bias", i), &mut b.conv1.bias);
            if let Some(bn) = &mut b.bn1 {
                f(&format!("block{}.bn1.gamma", i), &mut bn.gamma);
                f(&format!("block{}.bn1.beta", i), &mut bn.beta);
            }
            f(&format!("block{}.conv2.weight", i), &mut b.conv2.weight);
            f(&format!("block{}.conv2.bias", i), &mut b.conv2.bias);
            if let Some(bn) = &mut b.bn2 {
                f(&format!("block{}.bn2.gamma", i), &mut bn.gamma);
                f(&format!("block{}.bn2.beta", i), &mut bn.beta);
            }
            if let Some(p) = &mut b.proj {
                f(&format!("block{}.proj.weight", i), &mut p.weight);
                f(&format!("block{}.proj.bias", i), &mut p.bias);
            }
        }
        f("out.weight", &mut self.out_conv.weight);
        f("out.bias", &mut self.out_conv.bias);
    }

    /// Visits BN running statistics (mean then var per BN layer) in
    /// declaration order.
    pub fn for_each_running_stat(&self, f: &mut dyn FnMut(&str, &[f64])) {
        for (i, b) in self.blocks.iter().enumerate() {
            if let Some(bn) = &b.bn1 {
                f(&format!("block{}.bn1.running_mean", i), &bn.running_mean);
                f(&format!("block{}.bn1.running_var", i), &bn.running_var);
            }
            if let Some(bn) = &b.bn2 {
                f(&format!("block{}.bn2.running_mean", i), &bn.running_mean);
                f(&format!("block{}.bn2.running_var", i), &bn.running_var);
            }
        }
    }

    pub fn for_each_running_stat_mut(&mut self, f: &mut dyn FnMut(&str, &mut Vec<f64>)) {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            if let Some(bn) = &mut b.bn1 {
                f(&format!("block{}.bn1.running_mean", i), &mut bn.running_mean);
                f(&format!("block{}.bn1.running_var", i), &mut bn.running_var);
            }
            if let Some(bn) = &mut b.bn2 {
                f(&format!("block{}.bn2.running_mean", i), &mut bn.running_mean);
                f(&format!("block{}.bn2.running_var", i), &mut bn.running_var);
            }
        }
    }

    pub fn params_to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.for_each_param(&mut |_, p| out.extend_from_slice(p));
        out
    }

    pub fn set_params_from_vec(&mut self, flat: &[f64]) {
        let mut offset = 0;
        self.for_each_param_mut(&mut |_, p| {
            let len = p.len();
            p.copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        });
        assert_eq!(offset, flat.len());
    }

    /// Flattens gradients in the same order as [`Network::params_to_vec`].
    pub fn grads_to_vec(&self, grads: &NetworkGrads) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (b, g) in self.blocks.iter().zip(&grads.blocks) {
            out.extend_from_slice(&g.conv1.weight);
            out.extend_from_slice(&g.conv1.bias);
            if b.bn1.is_some() {
                let bn = g.bn1.as_ref().expect("bn1 grads");
                out.extend_from_slice(&bn.gamma);
                out.extend_from_slice(&bn.beta);
            }
            out.extend_from_slice(&g.conv2.weight);
            out.extend_from_slice(&g.conv2.bias);
            if b.bn2.is_some() {
                let bn = g.bn2.as_ref().expect("bn2 grads");
                out.extend_from_slice(&bn.gamma);
                out.extend_from_slice(&bn.beta);
            }
            if b.proj.is_some() {
                let p = g.proj.as_ref().expect("proj grads");
                out.extend_from_slice(&p.weight);
                out.extend_from_slice(&p.bias);
            }
        }
        out.extend_from_slice(&grads.out_conv.weight);
        out.extend_from_slice(&grads.out_conv.bias);
        out
    }
}

fn init_conv(conv: &mut ConvLayer, rng: &mut ChaCha8Rng) {
    let std = (1.0 / (conv.c_in * conv.kernel) as f64).sqrt();
    for w in conv.weight.iter_mut() {
        *w = gaussian(rng) * std;
    }
    // Biases are drawn from a small fan-in-scaled uniform rather than set to
    // zero: with zero biases, a causally padded position whose live taps are
    // all ReLU-zeroed lands the next pre-activation exactly on the ReLU kink,
    // where the loss is not differentiable.
    for b in conv.bias.iter_mut() {
        *b = rng.gen_range(-std..std);
    }
}

/// Standard normal draw via Box-Muller; two uniforms per sample keeps the
/// stream layout simple and deterministic.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Zeroes all channels of columns `>= past_steps`.
fn mask_future_columns(x: &SeqTensor, past_steps: usize) -> SeqTensor {
    let mut y = x.clone();
    for b in 0..y.batch() {
        for c in 0..y.channels() {
            for v in y.row_mut(b, c)[past_steps..].iter_mut() {
                *v = 0.0;
            }
        }
    }
    y
}

/// Appends the four control rows of the original input as extra channels.
fn concat_control_rows(h: &SeqTensor, input: &SeqTensor) -> SeqTensor {
    let mut out = SeqTensor::zeros(h.batch(), h.channels() + CONTROL_DIM, h.steps());
    for b in 0..h.batch() {
        for c in 0..h.channels() {
            out.row_mut(b, c).copy_from_slice(h.row(b, c));
        }
        for c in 0..CONTROL_DIM {
            out.row_mut(b, h.channels() + c)
                .copy_from_slice(input.row(b, STATE_DIM + c));
        }
    }
    out
}

fn drop_last_channels(x: &SeqTensor, count: usize) -> SeqTensor {
    let keep = x.channels() - count;
    let mut out = SeqTensor::zeros(x.batch(), keep, x.steps());
    for b in 0..x.batch() {
        for c in 0..keep {
            out.row_mut(b, c).copy_from_slice(x.row(b, c));
        }
    }
    out
}
