//! Reconstruction losses over predicted label sequences, with gradients.

use super::tensor::{SeqTensor, ShapeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Mean absolute error.
    L1,
    /// Mean squared error.
    L2,
    /// Per-channel weighted mean squared error.
    WL2,
}

/// Mean loss over batch, channels and timesteps, plus the gradient with
/// respect to the prediction. The L1 subgradient at zero is taken as zero.
pub fn compute_loss(
    prediction: &SeqTensor,
    target: &SeqTensor,
    kind: LossKind,
    channel_weights: &[f64],
) -> Result<(f64, SeqTensor), ShapeError> {
    if prediction.batch() != target.batch()
        || prediction.channels() != target.channels()
        || prediction.steps() != target.steps()
    {
        return Err(ShapeError::new(format!(
            "loss: prediction {}x{}x{} vs target {}x{}x{}",
            prediction.batch(),
            prediction.channels(),
            prediction.steps(),
            target.batch(),
            target.channels(),
            target.steps()
        )));
    }
    if kind == LossKind::WL2 && channel_weights.len() != prediction.channels() {
        return Err(ShapeError::new(format!(
            "loss: {} channel weights for {} channels",
            channel_weights.len(),
            prediction.channels()
        )));
    }
    let n = (prediction.batch() * prediction.channels() * prediction.steps()) as f64;
    let mut total = 0.0;
    let mut grad = SeqTensor::zeros(prediction.batch(), prediction.channels(), prediction.steps());
    for b in 0..prediction.batch() {
        for c in 0..prediction.channels() {
            let p = prediction.row(b, c);
            let y = target.row(b, c);
            let g = grad.row_mut(b, c);
            match kind {
                LossKind::L1 => {
                    for t in 0..p.len() {
                        let e = p[t] - y[t];
                        total += e.abs();
                        // signum with sign(0) = 0
                        g[t] = if e > 0.0 {
                            1.0 / n
                        } else if e < 0.0 {
                            -1.0 / n
                        } else {
                            0.0
                        };
                    }
                }
                LossKind::L2 => {
                    for t in 0..p.len() {
                        let e = p[t] - y[t];
                        total += e * e;
                        g[t] = 2.0 * e / n;
                    }
                }
                LossKind::WL2 => {
                    let w = channel_weights[c];
                    for t in 0..p.len() {
                        let e = p[t] - y[t];
                        total += w * e * e;
                        g[t] = 2.0 * w * e / n;
                    }
                }
            }
        }
    }
    Ok((total / n, grad))
}
