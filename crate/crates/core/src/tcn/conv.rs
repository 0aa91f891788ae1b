//! Causal dilated 1-D convolution.
//!
//! Left zero-padding of `(k-1)*dilation` keeps the output the same length as
//! the input and makes output position `t` depend only on inputs at `<= t`.

use rayon::prelude::*;

use super::tensor::{SeqTensor, ShapeError};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    /// `c_out * c_in * kernel`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub dilation: usize,
}

/// Gradients mirroring [`ConvLayer`] parameters.
#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    pub fn zeros(c_in: usize, c_out: usize, kernel: usize, dilation: usize) -> Self {
        assert!(kernel >= 1 && dilation >= 1);
        ConvLayer {
            weight: vec![0.0; c_out * c_in * kernel],
            bias: vec![0.0; c_out],
            c_in,
            c_out,
            kernel,
            dilation,
        }
    }

    /// Identity channel map, only meaningful for `kernel == 1, c_in == c_out`.
    pub fn identity(c: usize) -> Self {
        let mut layer = ConvLayer::zeros(c, c, 1, 1);
        for i in 0..c {
            layer.weight[i * c + i] = 1.0;
        }
        layer
    }

    #[inline]
    fn w(&self, o: usize, i: usize, j: usize) -> f64 {
        self.weight[(o * self.c_in + i) * self.kernel + j]
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn forward(&self, x: &SeqTensor) -> Result<SeqTensor, ShapeError> {
        if x.channels() != self.c_in {
            return Err(ShapeError::new(format!(
                "conv expects {} input channels, got {}",
                self.c_in,
                x.channels()
            )));
        }
        let (bsz, t_len) = (x.batch(), x.steps());
        let mut out = SeqTensor::zeros(bsz, self.c_out, t_len);
        let chunk = self.c_out * t_len;
        out.data_mut()
            .par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(b, out_b)| {
                for o in 0..self.c_out {
                    let dst = &mut out_b[o * t_len..(o + 1) * t_len];
                    dst.fill(self.bias[o]);
                    for i in 0..self.c_in {
                        let src = x.row(b, i);
                        for j in 0..self.kernel {
                            let w = self.w(o, i, j);
                            if w == 0.0 {
                                continue;
                            }
                            let shift = (self.kernel - 1 - j) * self.dilation;
                            for t in shift..t_len {
                                dst[t] += w * src[t - shift];
                            }
                        }
                    }
                }
            });
        Ok(out)
    }

    /// Reverse-mode step: given the upstream gradient, produces the gradient
    /// with respect to the input and to the layer parameters.
    pub fn backward(&self, x: &SeqTensor, grad_out: &SeqTensor) -> (SeqTensor, ConvGrads) {
        assert_eq!(grad_out.channels(), self.c_out);
        assert_eq!(grad_out.steps(), x.steps());
        let (bsz, t_len) = (x.batch(), x.steps());

        let mut grad_x = SeqTensor::zeros(bsz, self.c_in, t_len);
        let chunk = self.c_in * t_len;
        grad_x
            .data_mut()
            .par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(b, gx_b)| {
                for o in 0..self.c_out {
                    let go = grad_out.row(b, o);
                    for i in 0..self.c_in {
                        let dst = &mut gx_b[i * t_len..(i + 1) * t_len];
                        for j in 0..self.kernel {
                            let w = self.w(o, i, j);
                            if w == 0.0 {
                                continue;
                            }
                            let shift = (self.kernel - 1 - j) * self.dilation;
                            for t in shift..t_len {
                                dst[t - shift] += w * go[t];
                            }
                        }
                    }
                }
            });

        // Per-batch partials summed in batch order keeps reductions deterministic.
        let partials: Vec<ConvGrads> = (0..bsz)
            .into_par_iter()
            .map(|b| {
                let mut gw = vec![0.0; self.weight.len()];
                let mut gb = vec![0.0; self.bias.len()];
                for o in 0..self.c_out {
                    let go = grad_out.row(b, o);
                    gb[o] += go.iter().sum::<f64>();
                    for i in 0..self.c_in {
                        let src = x.row(b, i);
                        for j in 0..self.kernel {
                            let shift = (self.kernel - 1 - j) * self.dilation;
                            let mut acc = 0.0;
                            for t in shift..t_len {
                                acc += go[t] * src[t - shift];
                            }
                            gw[(o * self.c_in + i) * self.kernel + j] += acc;
                        }
                    }
                }
                ConvGrads {
                    weight: gw,
                    bias: gb,
                }
            })
            .collect();
        let mut grads = ConvGrads {
            weight: vec![0.0; self.weight.len()],
            bias: vec![0.0; self.bias.len()],
        };
        for p in partials {
            for (a, b) in grads.weight.iter_mut().zip(&p.weight) {
                *a += b;
            }
            for (a, b) in grads.bias.iter_mut().zip(&p.bias) {
                *a += b;
            }
        }
        (grad_x, grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointwise_identity_passes_input_through() {
        let layer = ConvLayer::identity(3);
        let x = SeqTensor::from_data(2, 3, 4, (0..24).map(|i| i as f64).collect()).unwrap();
        let y = layer.forward(&x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn hand_convolution_k2() {
        // k=2, weights (1,1): y[t] = x[t-1] + x[t] with left zero padding.
        let mut layer = ConvLayer::zeros(1, 1, 2, 1);
        layer.weight = vec![1.0, 1.0];
        let x = SeqTensor::from_data(1, 1, 4, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let y = layer.forward(&x).unwrap();
        assert_eq!(y.data(), &[1.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn impulse_response_lands_on_dilated_taps() {
        let mut layer = ConvLayer::zeros(1, 1, 3, 2);
        layer.weight = vec![1.0, 1.0, 1.0];
        let t_len = 10;
        let j = 3;
        let mut x = SeqTensor::zeros(1, 1, t_len);
        x.set(0, 0, j, 1.0);
        let y = layer.forward(&x).unwrap();
        for t in 0..t_len {
            let expect = t >= j && t <= j + 4 && (t - j) % 2 == 0;
            assert_eq!(y.get(0, 0, t) != 0.0, expect, "t={}", t);
        }
    }

    #[test]
    fn rejects_channel_mismatch() {
        let layer = ConvLayer::zeros(3, 2, 2, 1);
        let x = SeqTensor::zeros(1, 4, 5);
        assert!(layer.forward(&x).is_err());
    }
}
