//! Hand-rolled reverse-mode kernels: embeddings, LSTM, dense layers, softmax
//! cross-entropy, Adam, finite-difference checks and a checkpoint container.
//!
//! There is no tape. Each kernel has an explicit forward returning whatever the
//! backward needs, and the caller wires them together.

mod checkpoint;
mod gradcheck;
mod layers;
mod optim;
mod params;
mod tensor;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport, TensorCheck};
pub use layers::{
    dense_backward, dense_forward, embed_backward, embed_forward, lstm_backward, lstm_forward, lstm_step,
    softmax, softmax_xent, softmax_xent_backward, Activation, LstmTrace,
};
pub use optim::{adam_step, clip_global_norm, AdamConfig, DEFAULT_CLIP_NORM};
pub use params::{xavier_uniform, Grads, Param, ParamId, ParamStore};
pub use tensor::Tensor;
