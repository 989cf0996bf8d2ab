use serde::{Deserialize, Serialize};

use super::{ensure_finite, Result, Tensor1, TensorError};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the loss.
pub const PROB_CLAMP: f64 = 1e-12;

/// Output length of a valid sliding window: `floor((len - size) / stride) + 1`.
pub fn out_len(len: usize, size: usize, stride: usize) -> Result<usize> {
    if stride == 0 {
        return Err(TensorError::InvalidStride);
    }
    if size == 0 {
        return Err(TensorError::InvalidPoolSize);
    }
    if len < size {
        return Err(TensorError::TooShort { len, size });
    }
    Ok((len - size) / stride + 1)
}

/// 1D convolution layer, weights laid out `(out, in, kernel)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv1d {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            weight: vec![0.0; out_channels * in_channels * kernel],
            bias: vec![0.0; out_channels],
        }
    }

    pub fn weight_shape(&self) -> [usize; 3] {
        [self.out_channels, self.in_channels, self.kernel]
    }

    pub fn forward(&self, x: &Tensor1) -> Result<Tensor1> {
        conv1d_forward(x, self)
    }

    /// Accumulate parameter gradients into `dw`/`db` and, if requested,
    /// return the gradient with respect to `x`.
    pub(crate) fn backward(
        &self,
        x: &Tensor1,
        grad_out: &Tensor1,
        dw: &mut [f64],
        db: &mut [f64],
        want_input_grad: bool,
    ) -> Option<Tensor1> {
        let (k, s) = (self.kernel, self.stride);
        let lo = grad_out.len();
        for o in 0..self.out_channels {
            let g = grad_out.row(o);
            db[o] += g.iter().sum::<f64>();
            for i in 0..self.in_channels {
                let xr = x.row(i);
                let base = (o * self.in_channels + i) * k;
                for t in 0..k {
                    let mut acc = 0.0;
                    for (j, gj) in g.iter().enumerate() {
                        acc += gj * xr[j * s + t];
                    }
                    dw[base + t] += acc;
                }
            }
        }
        if !want_input_grad {
            return None;
        }
        let mut dx = Tensor1::zeros(self.in_channels, x.len());
        for o in 0..self.out_channels {
            let g = grad_out.row(o);
            for i in 0..self.in_channels {
                let w = &self.weight[(o * self.in_channels + i) * k..][..k];
                let dxr = dx.row_mut(i);
                for j in 0..lo {
                    let gj = g[j];
                    for (t, wt) in w.iter().enumerate() {
                        dxr[j * s + t] += gj * wt;
                    }
                }
            }
        }
        Some(dx)
    }
}

/// Valid convolution: `out[o, j] = b[o] + sum_{i,t} w[o,i,t] * x[i, j*stride + t]`.
///
/// Terms are accumulated bias first, then input channel, then tap.
pub fn conv1d_forward(x: &Tensor1, conv: &Conv1d) -> Result<Tensor1> {
    if x.channels() != conv.in_channels {
        return Err(TensorError::Shape {
            op: "conv1d",
            detail: format!("input has {} channels, layer expects {}", x.channels(), conv.in_channels),
        });
    }
    if conv.weight.len() != conv.out_channels * conv.in_channels * conv.kernel
        || conv.bias.len() != conv.out_channels
    {
        return Err(TensorError::Shape {
            op: "conv1d",
            detail: "weight/bias length disagrees with layer shape".into(),
        });
    }
    let lo = out_len(x.len(), conv.kernel, conv.stride)?;
    let (k, s) = (conv.kernel, conv.stride);
    let mut out = vec![0.0; conv.out_channels * lo];
    for (o, orow) in out.chunks_mut(lo).enumerate() {
        orow.fill(conv.bias[o]);
        for i in 0..conv.in_channels {
            let xr = x.row(i);
            let w = &conv.weight[(o * conv.in_channels + i) * k..][..k];
            for (t, &wt) in w.iter().enumerate() {
                for (j, acc) in orow.iter_mut().enumerate() {
                    *acc += wt * xr[j * s + t];
                }
            }
        }
    }
    ensure_finite("conv1d", &out)?;
    Ok(Tensor1::from_parts_unchecked(conv.out_channels, lo, out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub size: usize,
    pub stride: usize,
}

impl Default for PoolSpec {
    fn default() -> Self {
        Self { size: 4, stride: 4 }
    }
}

/// Max-pool each channel. Returns the pooled tensor and, per output cell,
/// the input index (within its channel row) that won. Ties go to the lowest
/// index.
pub fn maxpool1d(x: &Tensor1, size: usize, stride: usize) -> Result<(Tensor1, Vec<usize>)> {
    let lo = out_len(x.len(), size, stride)?;
    let mut out = Vec::with_capacity(x.channels() * lo);
    let mut argmax = Vec::with_capacity(x.channels() * lo);
    for c in 0..x.channels() {
        let row = x.row(c);
        for j in 0..lo {
            let start = j * stride;
            let mut best = start;
            for idx in start + 1..start + size {
                if row[idx] > row[best] {
                    best = idx;
                }
            }
            out.push(row[best]);
            argmax.push(best);
        }
    }
    Ok((Tensor1::from_parts_unchecked(x.channels(), lo, out), argmax))
}

/// Route pooled gradients back to the winning input positions.
pub fn maxpool1d_backward(grad_out: &Tensor1, argmax: &[usize], input_len: usize) -> Tensor1 {
    let mut dx = Tensor1::zeros(grad_out.channels(), input_len);
    for c in 0..grad_out.channels() {
        let g = grad_out.row(c);
        let idx = &argmax[c * g.len()..(c + 1) * g.len()];
        let row = dx.row_mut(c);
        for (gj, &i) in g.iter().zip(idx) {
            row[i] += gj;
        }
    }
    dx
}

/// Fully connected layer, weight row-major `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.weight.len() != self.in_dim * self.out_dim || self.bias.len() != self.out_dim {
            return Err(TensorError::Shape {
                op: "dense",
                detail: "weight/bias length disagrees with layer shape".into(),
            });
        }
        dense_forward(x, &self.weight, self.out_dim, &self.bias)
    }

    pub(crate) fn backward(
        &self,
        x: &[f64],
        grad_out: &[f64],
        dw: &mut [f64],
        db: &mut [f64],
        want_input_grad: bool,
    ) -> Option<Vec<f64>> {
        for (r, &g) in grad_out.iter().enumerate() {
            db[r] += g;
            if g != 0.0 {
                for (d, xc) in dw[r * self.in_dim..(r + 1) * self.in_dim].iter_mut().zip(x) {
                    *d += g * xc;
                }
            }
        }
        if !want_input_grad {
            return None;
        }
        let mut dx = vec![0.0; self.in_dim];
        for (r, &g) in grad_out.iter().enumerate() {
            if g != 0.0 {
                for (d, w) in dx.iter_mut().zip(&self.weight[r * self.in_dim..(r + 1) * self.in_dim]) {
                    *d += g * w;
                }
            }
        }
        Some(dx)
    }
}

/// `y = W x + b` with `W` row-major `(rows, x.len())`.
pub fn dense_forward(x: &[f64], w: &[f64], rows: usize, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != rows || w.len() != rows * x.len() {
        return Err(TensorError::Shape {
            op: "dense",
            detail: format!(
                "W has {} values, b has {}, for {} rows and input {}",
                w.len(),
                b.len(),
                rows,
                x.len()
            ),
        });
    }
    let cols = x.len();
    let y: Vec<f64> = (0..rows)
        .map(|r| {
            let mut acc = b[r];
            for (wc, xc) in w[r * cols..(r + 1) * cols].iter().zip(x) {
                acc += wc * xc;
            }
            acc
        })
        .collect();
    ensure_finite("dense", &y)?;
    Ok(y)
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

pub(crate) fn relu_inplace(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Logistic function without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of one prediction and its derivative `dL/dp`.
pub fn bce_loss(p: f64, y: f64) -> (f64, f64) {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let loss = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
    let grad = -y / p + (1.0 - y) / (1.0 - p);
    (loss, grad)
}
