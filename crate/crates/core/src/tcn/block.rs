//! Residual block: two causal convolutions with optional batch norm and
//! dropout, plus a skip connection (pointwise projection when the channel
//! counts differ).

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::conv::{ConvGrads, ConvLayer};
use super::norm::{BatchNorm, BatchNormGrads, BnCache};
use super::tensor::{SeqTensor, ShapeError};
use super::Mode;

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub conv1: ConvLayer,
    pub bn1: Option<BatchNorm>,
    pub conv2: ConvLayer,
    pub bn2: Option<BatchNorm>,
    pub proj: Option<ConvLayer>,
    pub dropout: f64,
}

#[derive(Debug, Clone)]
pub struct BlockGrads {
    pub conv1: ConvGrads,
    pub bn1: Option<BatchNormGrads>,
    pub conv2: ConvGrads,
    pub bn2: Option<BatchNormGrads>,
    pub proj: Option<ConvGrads>,
}

/// Intermediate activations needed by the backward pass.
pub struct BlockCache {
    input: SeqTensor,
    c1: SeqTensor,
    bn1: Option<BnCache>,
    n1: SeqTensor,
    d1: SeqTensor,
    c2: SeqTensor,
    bn2: Option<BnCache>,
    n2: SeqTensor,
    mask1: Option<Vec<f64>>,
    mask2: Option<Vec<f64>>,
}

fn relu(x: &SeqTensor) -> SeqTensor {
    let mut y = x.clone();
    for v in y.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    y
}

fn relu_backward(pre: &SeqTensor, grad: &mut SeqTensor) {
    for (g, p) in grad.data_mut().iter_mut().zip(pre.data()) {
        if *p <= 0.0 {
            *g = 0.0;
        }
    }
}

impl ResidualBlock {
    pub fn new(
        c_in: usize,
        c_out: usize,
        kernel: usize,
        dilation: usize,
        use_batchnorm: bool,
        dropout: f64,
    ) -> Self {
        let proj = if c_in != c_out {
            Some(ConvLayer::zeros(c_in, c_out, 1, 1))
        } else {
            None
        };
        ResidualBlock {
            conv1: ConvLayer::zeros(c_in, c_out, kernel, dilation),
            bn1: use_batchnorm.then(|| BatchNorm::new(c_out)),
            conv2: ConvLayer::zeros(c_out, c_out, kernel, dilation),
            bn2: use_batchnorm.then(|| BatchNorm::new(c_out)),
            proj,
            dropout,
        }
    }

    pub fn param_count(&self) -> usize {
        self.conv1.param_count()
            + self.conv2.param_count()
            + self.bn1.as_ref().map_or(0, |b| b.param_count())
            + self.bn2.as_ref().map_or(0, |b| b.param_count())
            + self.proj.as_ref().map_or(0, |p| p.param_count())
    }

    fn apply_dropout(&self, x: SeqTensor, rng: &mut ChaCha8Rng) -> (SeqTensor, Option<Vec<f64>>) {
        if self.dropout <= 0.0 {
            return (x, None);
        }
        let keep = 1.0 - self.dropout;
        let mut y = x;
        let mask: Vec<f64> = y
            .data_mut()
            .iter_mut()
            .map(|v| {
                let m = if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 };
                *v *= m;
                m
            })
            .collect();
        (y, Some(mask))
    }

    /// Forward pass. `rng` is required in train mode when dropout is active.
    /// Batch-norm running statistics are not touched here; the training loop
    /// applies [`ResidualBlock::update_running`] with the returned cache.
    pub fn forward(
        &self,
        x: &SeqTensor,
        mode: Mode,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(SeqTensor, BlockCache), ShapeError> {
        let train = mode == Mode::Train;
        let c1 = self.conv1.forward(x)?;
        let (n1, bn1_cache) = match (&self.bn1, train) {
            (Some(bn), true) => {
                let (y, cache) = bn.forward_train(&c1);
                (y, Some(cache))
            }
            (Some(bn), false) => (bn.forward_eval(&c1), None),
            (None, _) => (c1.clone(), None),
        };
        let a1 = relu(&n1);
        let mut rng = rng;
        let (d1, mask1) = if train {
            match rng.as_deref_mut() {
                Some(r) => self.apply_dropout(a1, r),
                None => {
                    assert!(self.dropout <= 0.0, "dropout requires an rng in train mode");
                    (a1, None)
                }
            }
        } else {
            (a1, None)
        };
        let c2 = self.conv2.forward(&d1)?;
        let (n2, bn2_cache) = match (&self.bn2, train) {
            (Some(bn), true) => {
                let (y, cache) = bn.forward_train(&c2);
                (y, Some(cache))
            }
            (Some(bn), false) => (bn.forward_eval(&c2), None),
            (None, _) => (c2.clone(), None),
        };
        let a2 = relu(&n2);
        let (d2, mask2) = if train {
            match rng.as_deref_mut() {
                Some(r) => self.apply_dropout(a2, r),
                None => (a2, None),
            }
        } else {
            (a2, None)
        };
        let skip = match &self.proj {
            Some(p) => p.forward(x)?,
            None => x.clone(),
        };
        let mut out = d2.clone();
        for (o, s) in out.data_mut().iter_mut().zip(skip.data()) {
            *o += s;
        }
        Ok((
            out,
            BlockCache {
                input: x.clone(),
                c1,
                bn1: bn1_cache,
                n1,
                d1,
                c2,
                bn2: bn2_cache,
                n2,
                mask1,
                mask2,
            },
        ))
    }

    /// Folds the batch statistics captured in `cache` into the running
    /// estimates.
    pub fn update_running(&mut self, cache: &BlockCache) {
        if let (Some(bn), Some(c)) = (&mut self.bn1, &cache.bn1) {
            bn.update_running(c);
        }
        if let (Some(bn), Some(c)) = (&mut self.bn2, &cache.bn2) {
            bn.update_running(c);
        }
    }

    pub fn backward(
        &self,
        cache: &BlockCache,
        grad_out: &SeqTensor,
        mode: Mode,
    ) -> (SeqTensor, BlockGrads) {
        let train = mode == Mode::Train;
        // Skip path.
        let (mut grad_x_skip, proj_grads) = match &self.proj {
            Some(p) => {
                let (gx, gp) = p.backward(&cache.input, grad_out);
                (gx, Some(gp))
            }
            None => (grad_out.clone(), None),
        };

        // Main path, in reverse.
        let mut g = grad_out.clone();
        if let Some(mask) = &cache.mask2 {
            for (v, m) in g.data_mut().iter_mut().zip(mask) {
                *v *= m;
            }
        }
        relu_backward(&cache.n2, &mut g);
        let (g, bn2_grads) = match &self.bn2 {
            Some(bn) => {
                let (gx, gp) = if train {
                    bn.backward_train(&cache.c2, cache.bn2.as_ref().unwrap(), &g)
                } else {
                    bn.backward_eval(&cache.c2, &g)
                };
                (gx, Some(gp))
            }
            None => (g, None),
        };
        let (mut g, conv2_grads) = self.conv2.backward(&cache.d1, &g);
        if let Some(mask) = &cache.mask1 {
            for (v, m) in g.data_mut().iter_mut().zip(mask) {
                *v *= m;
            }
        }
        relu_backward(&cache.n1, &mut g);
        let (g, bn1_grads) = match &self.bn1 {
            Some(bn) => {
                let (gx, gp) = if train {
                    bn.backward_train(&cache.c1, cache.bn1.as_ref().unwrap(), &g)
                } else {
                    bn.backward_eval(&cache.c1, &g)
                };
                (gx, Some(gp))
            }
            None => (g, None),
        };
        let (g_main, conv1_grads) = self.conv1.backward(&cache.input, &g);

        for (a, b) in grad_x_skip.data_mut().iter_mut().zip(g_main.data()) {
            *a += b;
        }
        (
            grad_x_skip,
            BlockGrads {
                conv1: conv1_grads,
                bn1: bn1_grads,
                conv2: conv2_grads,
                bn2: bn2_grads,
                proj: proj_grads,
            },
        )
    }
}
