use super::{ensure_finite, Result, TensorError};

/// A `(channels, len)` block of samples stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor1 {
    channels: usize,
    len: usize,
    data: Vec<f64>,
}

impl Tensor1 {
    pub fn new(channels: usize, len: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * len {
            return Err(TensorError::Shape {
                op: "tensor",
                detail: format!("{} values for shape ({channels}, {len})", data.len()),
            });
        }
        ensure_finite("tensor", &data)?;
        Ok(Self { channels, len, data })
    }

    pub fn zeros(channels: usize, len: usize) -> Self {
        Self {
            channels,
            len,
            data: vec![0.0; channels * len],
        }
    }

    /// Single-channel tensor.
    pub fn from_row(row: Vec<f64>) -> Result<Self> {
        let len = row.len();
        Self::new(1, len, row)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, c: usize) -> &[f64] {
        &self.data[c * self.len..(c + 1) * self.len]
    }

    pub fn row_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.len..(c + 1) * self.len]
    }

    pub fn at(&self, c: usize, i: usize) -> f64 {
        self.data[c * self.len + i]
    }

    pub(crate) fn from_parts_unchecked(channels: usize, len: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), channels * len);
        Self { channels, len, data }
    }
}
