//! Non-recurrent layers and the bidirectional wrapper.
//!
//! Every layer works on a single sequence: inputs are `L × width` matrices
//! (or plain vectors for dense layers). Backward passes accumulate into a
//! gradient twin of the layer and return the gradient for the input.

mod bidirectional;
mod conv;
mod dense;
mod dropout;
mod embedding;

pub use bidirectional::{bidirectional_forward, Bidirectional, BidirectionalCache};
pub use conv::{maxpool1d, maxpool1d_backward, Conv1d};
pub use dense::{Dense, DenseActivation};
pub use dropout::{dropout_apply, DropoutMode, DropoutSpec};
pub use embedding::Embedding;
