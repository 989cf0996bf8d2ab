//! Minimal CPU kernel for the stress network.
//!
//! Valid (unpadded) 1D convolution, max-pooling with lowest-index ties, dense
//! layers, ReLU/sigmoid, binary cross-entropy, exact reverse-mode gradients
//! for the fixed multi-channel topology, and Adam. Everything is `f64`.

mod adam;
mod init;
mod layers;
mod net;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use init::{kaiming_uniform, seeded_rng, Rng};
pub use layers::{
    bce_loss, conv1d_forward, dense_forward, maxpool1d, maxpool1d_backward, out_len, relu,
    sigmoid, Conv1d, Dense, PoolSpec, PROB_CLAMP,
};
pub use net::{ConvStack, ForwardCache, LayerGrads, Network, StackLayout, REDUCTION_CHUNK};
pub use tensor::Tensor1;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("input length {len} shorter than kernel/pool size {size}")]
    TooShort { len: usize, size: usize },
    #[error("stride must be >= 1")]
    InvalidStride,
    #[error("pool size must be >= 1")]
    InvalidPoolSize,
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("missing input channel {0:?}")]
    MissingChannel(String),
    #[error("forward cache does not belong to this network")]
    MissingCache,
}

pub type Result<T> = std::result::Result<T, TensorError>;

pub(crate) fn ensure_finite(op: &'static str, xs: &[f64]) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(TensorError::NonFinite(op))
    }
}
