//! Slim LSTM variants, a small CNN/LSTM text classifier built on them, and
//! the tooling to train, sweep and gradient-check it. Everything is f64 and
//! runs on the CPU with hand-written backward passes.

pub mod activation;
pub mod cell;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod optim;
pub mod params;
pub mod rng;
pub mod sweep;
pub mod synthetic;
pub mod tensor;
pub mod train;

pub use cell::{CellParams, Variant};
pub use error::{Error, Result};
pub use model::{LstmPosition, Model, ModelSpec};
pub use params::ParamSet;
pub use rng::Rng;
pub use tensor::Tensor;
pub use train::{ExperimentConfig, MetricsReport};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/tensors.md")]
    mod tensors {}
    #[doc = include_str!("../../../book/src/cells.md")]
    mod cells {}
    #[doc = include_str!("../../../book/src/bptt.md")]
    mod bptt {}
    #[doc = include_str!("../../../book/src/parameters.md")]
    mod parameters {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/optimizers.md")]
    mod optimizers {}
    #[doc = include_str!("../../../book/src/gradcheck.md")]
    mod gradcheck {}
    #[doc = include_str!("../../../book/src/text.md")]
    mod text {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
