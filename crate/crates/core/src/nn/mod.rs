//! A small differentiable network engine: dense and LSTM layers, inverted
//! dropout, the training losses, Adam, and finite-difference checking.

mod adam;
mod forward;
mod gradcheck;
mod loss;
mod params;
mod spec;

pub use adam::{adam_step, AdamConfig};
pub use forward::{backward, forward, forward_cached, lstm_step, Batch, ForwardCache, LstmState};
pub use gradcheck::{check_gradients, relative_error, GradCheckReport, REL_ERROR_FLOOR};
pub use loss::{
    cross_entropy, cross_entropy_grad, dice_loss, inverse_frequency_weights, masked_sequence_loss, AnnotationMask,
    MaskedLoss, DICE_EPS, PROB_FLOOR,
};
pub use params::{AdamState, Gradients, ParameterStore};
pub use spec::{sigmoid, Activation, Head, LayerSpec, MaskSlot, NetworkSpec};
