//! Stress inference from multi-rate wearable signals.
//!
//! The crate covers the full offline/online pipeline: a portable on-disk
//! recording format ([`signal_store`]), a small fixed-topology CNN kernel with
//! exact backpropagation and Adam ([`tensor_nn`]), the multi-channel stress
//! classifier built on top of it ([`stress_net`]), a synthetic recording
//! generator ([`synthgen`]) and a streaming monitor that turns pushed samples
//! into per-window predictions and a daily summary ([`monitor`]).
//!
//! Data-parallel loops (per-sample gradients, batch inference, per-subject
//! generation) go through [`Exec`]. With the default `parallel` feature they
//! run on rayon; without it every path is sequential. Both modes produce
//! bit-identical results.

pub mod exec;
pub mod monitor;
pub mod signal_store;
pub mod stress_net;
pub mod synthgen;
pub mod tensor_nn;

pub use exec::Exec;
