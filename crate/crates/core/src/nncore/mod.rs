//! Minimal dense-tensor engine: reverse-mode differentiation on a tape, the
//! layers both labelers need, BCE and KL losses, and Adam.
//!
//! Everything is `f64`; gradients are verified against central finite
//! differences in [`gradcheck`].

mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
mod params;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON};
pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, primitive_checks, CheckResult};
pub use layers::{bilstm, highway, lstm_cell, self_attention, BiLstm, Highway, Linear, LstmParams, SelfAttention};
pub use params::{ParamId, ParamStore, Parameter};
pub use tape::{bce_loss, kld_loss, Axis, Gradients, Tape, Var, LOG_EPS};
pub use tensor::Tensor;
