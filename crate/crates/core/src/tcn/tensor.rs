//! The `batch x channels x timesteps` array carried between network layers.

use thiserror::Error;

/// Shape mismatch between an operation's inputs.
#[derive(Debug, Clone, Error)]
#[error("shape error: {0}")]
pub struct ShapeError(String);

impl ShapeError {
    pub fn new(msg: impl Into<String>) -> Self {
        ShapeError(msg.into())
    }
}

/// Dense real-valued sequence tensor, row-major in `(batch, channel, step)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqTensor {
    batch: usize,
    channels: usize,
    steps: usize,
    data: Vec<f64>,
}

impl SeqTensor {
    pub fn zeros(batch: usize, channels: usize, steps: usize) -> Self {
        SeqTensor {
            batch,
            channels,
            steps,
            data: vec![0.0; batch * channels * steps],
        }
    }

    pub fn from_data(
        batch: usize,
        channels: usize,
        steps: usize,
        data: Vec<f64>,
    ) -> Result<Self, ShapeError> {
        if data.len() != batch * channels * steps {
            return Err(ShapeError::new(format!(
                "data length {} does not match {}x{}x{}",
                data.len(),
                batch,
                channels,
                steps
            )));
        }
        Ok(SeqTensor {
            batch,
            channels,
            steps,
            data,
        })
    }

    #[inline]
    pub fn batch(&self) -> usize {
        self.batch
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn get(&self, b: usize, c: usize, t: usize) -> f64 {
        debug_assert!(b < self.batch && c < self.channels && t < self.steps);
        self.data[(b * self.channels + c) * self.steps + t]
    }

    #[inline]
    pub fn set(&mut self, b: usize, c: usize, t: usize, v: f64) {
        debug_assert!(b < self.batch && c < self.channels && t < self.steps);
        self.data[(b * self.channels + c) * self.steps + t] = v;
    }

    #[inline]
    pub fn add(&mut self, b: usize, c: usize, t: usize, v: f64) {
        self.data[(b * self.channels + c) * self.steps + t] += v;
    }

    /// Contiguous time series for one `(batch, channel)` pair.
    #[inline]
    pub fn row(&self, b: usize, c: usize) -> &[f64] {
        let start = (b * self.channels + c) * self.steps;
        &self.data[start..start + self.steps]
    }

    #[inline]
    pub fn row_mut(&mut self, b: usize, c: usize) -> &mut [f64] {
        let start = (b * self.channels + c) * self.steps;
        &mut self.data[start..start + self.steps]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// All entries per batch element, `channels * steps` values.
    pub fn batch_slice(&self, b: usize) -> &[f64] {
        let n = self.channels * self.steps;
        &self.data[b * n..(b + 1) * n]
    }

    pub fn batch_slice_mut(&mut self, b: usize) -> &mut [f64] {
        let n = self.channels * self.steps;
        &mut self.data[b * n..(b + 1) * n]
    }

    /// Copies the last `count` time positions into a new tensor.
    pub fn slice_last_steps(&self, count: usize) -> SeqTensor {
        assert!(count <= self.steps);
        let offset = self.steps - count;
        let mut out = SeqTensor::zeros(self.batch, self.channels, count);
        for b in 0..self.batch {
            for c in 0..self.channels {
                let src = self.row(b, c);
                out.row_mut(b, c).copy_from_slice(&src[offset..]);
            }
        }
        out
    }

    /// Stacks single-batch tensors of identical channel/step shape.
    pub fn stack_batch(parts: &[SeqTensor]) -> Result<SeqTensor, ShapeError> {
        let first = parts
            .first()
            .ok_or_else(|| ShapeError::new("stack_batch: no tensors"))?;
        let (c, t) = (first.channels, first.steps);
        let total: usize = parts.iter().map(|p| p.batch).sum();
        let mut out = SeqTensor::zeros(total, c, t);
        let mut b_out = 0;
        for p in parts {
            if p.channels != c || p.steps != t {
                return Err(ShapeError::new("stack_batch: mismatched shapes"));
            }
            for b in 0..p.batch {
                out.batch_slice_mut(b_out).copy_from_slice(p.batch_slice(b));
                b_out += 1;
            }
        }
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}
