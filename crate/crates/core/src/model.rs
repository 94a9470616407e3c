//! The sentiment classifier: embedding, spatial dropout, convolution and
//! pooling, a recurrent block of any variant, a bidirectional LSTM0 tail,
//! optional extra dense layers, and a sigmoid head.
//!
//! With [`LstmPosition::CnnThenLstm`] (the default) the stack is
//!
//! ```text
//! ids[L] → embedding (V→e) → spatial dropout → conv1d+relu → maxpool
//!        → variant cell (all steps) → bidirectional LSTM0 → last step
//!        → [dense+relu → dropout] × 3 (optional) → dense+sigmoid → p
//! ```
//!
//! [`LstmPosition::LstmThenCnn`] moves the variant cell in front of the
//! convolution.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cell::{self, CellParams, CellState, InitScheme, StepCache, Variant};
use crate::error::{Error, Result};
use crate::layers::{
    dropout_apply, maxpool1d, maxpool1d_backward, Bidirectional, BidirectionalCache, Conv1d, Dense,
    DenseActivation, DropoutMode, DropoutSpec, Embedding,
};
use crate::params::ParamSet;
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LstmPosition {
    #[default]
    CnnThenLstm,
    LstmThenCnn,
}

impl fmt::Display for LstmPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LstmPosition::CnnThenLstm => "cnn-then-lstm",
            LstmPosition::LstmThenCnn => "lstm-then-cnn",
        })
    }
}

impl std::str::FromStr for LstmPosition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cnn-then-lstm" | "cnn-lstm" => Ok(LstmPosition::CnnThenLstm),
            "lstm-then-cnn" | "lstm-cnn" => Ok(LstmPosition::LstmThenCnn),
            _ => Err(Error::Config(format!(
                "unknown lstm position {s:?}; expected cnn-then-lstm or lstm-then-cnn"
            ))),
        }
    }
}

/// Layer sizes and regularization knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelHyper {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub maxlen: usize,
    pub filters: usize,
    pub kernel_size: usize,
    pub pool_size: usize,
    /// Width of the variant cell.
    pub hidden: usize,
    /// Width of each half of the bidirectional tail.
    pub tail_hidden: usize,
    pub spatial_dropout: f64,
    pub dense_dropout: f64,
    pub extra_dense_widths: Vec<usize>,
    pub forget_bias: f64,
    pub alpha: f64,
}

impl Default for ModelHyper {
    fn default() -> Self {
        ModelHyper {
            vocab_size: 20_000,
            embed_dim: 128,
            maxlen: 32,
            filters: 64,
            kernel_size: 5,
            pool_size: 4,
            hidden: 64,
            tail_hidden: 64,
            spatial_dropout: 0.4,
            dense_dropout: 0.2,
            extra_dense_widths: vec![64, 32, 16],
            forget_bias: cell::DEFAULT_FORGET_BIAS,
            alpha: cell::DEFAULT_ALPHA,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    pub lstm_position: LstmPosition,
    pub extra_dense: bool,
    pub bidirectional_tail: bool,
    pub hyper: ModelHyper,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            variant: Variant::Lstm0,
            lstm_position: LstmPosition::CnnThenLstm,
            extra_dense: false,
            bidirectional_tail: true,
            hyper: ModelHyper::default(),
        }
    }
}

/// One step of the forward pipeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stage {
    Embedding,
    Dropout(DropoutSpec),
    Conv,
    Pool,
    Recurrent,
    Bidirectional,
    LastStep,
    Dense(usize),
    Head,
}

/// Shape and parameter count of one stage, as reported by
/// [`ModelSpec::describe`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerInfo {
    pub name: String,
    pub output_shape: Vec<usize>,
    pub params: usize,
}

impl ModelSpec {
    pub fn stages(&self) -> Vec<Stage> {
        let h = &self.hyper;
        let mut s = vec![
            Stage::Embedding,
            Stage::Dropout(DropoutSpec {
                rate: h.spatial_dropout,
                mode: DropoutMode::SpatialFeature,
            }),
        ];
        match self.lstm_position {
            LstmPosition::CnnThenLstm => s.extend([Stage::Conv, Stage::Pool, Stage::Recurrent]),
            LstmPosition::LstmThenCnn => s.extend([Stage::Recurrent, Stage::Conv, Stage::Pool]),
        }
        if self.bidirectional_tail {
            s.push(Stage::Bidirectional);
        }
        s.push(Stage::LastStep);
        if self.extra_dense {
            for k in 0..h.extra_dense_widths.len() {
                s.push(Stage::Dense(k));
                s.push(Stage::Dropout(DropoutSpec {
                    rate: h.dense_dropout,
                    mode: DropoutMode::Elementwise,
                }));
            }
        }
        s.push(Stage::Head);
        s
    }

    /// Walks the stages, checking that each one accepts what the previous
    /// one produces.
    pub fn describe(&self) -> Result<Vec<LayerInfo>> {
        let h = &self.hyper;
        let positive = [
            ("vocab_size", h.vocab_size),
            ("embed_dim", h.embed_dim),
            ("maxlen", h.maxlen),
            ("filters", h.filters),
            ("kernel_size", h.kernel_size),
            ("pool_size", h.pool_size),
            ("hidden", h.hidden),
            ("tail_hidden", h.tail_hidden),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if h.vocab_size < 2 {
            return Err(Error::Config("vocab_size must be at least 2".into()));
        }
        if self.extra_dense && h.extra_dense_widths.iter().any(|&w| w == 0) {
            return Err(Error::Config("extra_dense_widths must be positive".into()));
        }
        if !(h.alpha > -1.0 && h.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (-1, 1), got {}", h.alpha)));
        }

        let mut out: Vec<LayerInfo> = vec![];
        let mut shape = vec![h.maxlen];
        let mut prev = "input".to_string();
        for stage in self.stages() {
            let (name, next, params) = match stage {
                Stage::Embedding => (
                    "embedding".to_string(),
                    vec![h.maxlen, h.embed_dim],
                    h.vocab_size * h.embed_dim,
                ),
                Stage::Dropout(spec) => {
                    spec.validate()?;
                    let name = match spec.mode {
                        DropoutMode::SpatialFeature => "spatial_dropout",
                        DropoutMode::Elementwise => "dropout",
                    };
                    (name.to_string(), shape.clone(), 0)
                }
                Stage::Conv => {
                    if shape.len() != 2 || shape[0] < h.kernel_size {
                        return Err(Error::Config(format!(
                            "conv1d (kernel {}) cannot follow {prev} with output shape {shape:?}",
                            h.kernel_size
                        )));
                    }
                    (
                        "conv1d".to_string(),
                        vec![shape[0] - h.kernel_size + 1, h.filters],
                        h.filters * h.kernel_size * shape[1] + h.filters,
                    )
                }
                Stage::Pool => {
                    if shape.len() != 2 || shape[0] < h.pool_size {
                        return Err(Error::Config(format!(
                            "maxpool (size {}) cannot follow {prev} with output shape {shape:?}",
                            h.pool_size
                        )));
                    }
                    ("maxpool".to_string(), vec![shape[0] / h.pool_size, shape[1]], 0)
                }
                Stage::Recurrent => (
                    format!("{}", self.variant),
                    vec![shape[0], h.hidden],
                    cell::count_params(self.variant, shape[1], h.hidden)?,
                ),
                Stage::Bidirectional => (
                    "bidirectional LSTM0".to_string(),
                    vec![shape[0], 2 * h.tail_hidden],
                    2 * cell::count_params(Variant::Lstm0, shape[1], h.tail_hidden)?,
                ),
                Stage::LastStep => ("last_step".to_string(), vec![shape[1]], 0),
                Stage::Dense(k) => {
                    let w = h.extra_dense_widths[k];
                    (format!("dense{k}"), vec![w], w * shape[0] + w)
                }
                Stage::Head => ("head".to_string(), vec![1], shape[0] + 1),
            };
            prev.clone_from(&name);
            shape.clone_from(&next);
            out.push(LayerInfo {
                name,
                output_shape: next,
                params,
            });
        }
        Ok(out)
    }

    /// Trainable parameters of the whole model, from the layer formulas.
    pub fn param_count(&self) -> Result<usize> {
        Ok(self.describe()?.iter().map(|l| l.params).sum())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub embedding: Embedding,
    pub conv: Conv1d,
    pub recurrent: CellParams,
    pub tail: Option<Bidirectional>,
    pub extra: Vec<Dense>,
    pub head: Dense,
}

#[derive(Clone, Debug)]
enum StageCache {
    Embedding,
    Dropout { mask: Tensor },
    Conv { input: Tensor, output: Tensor },
    Pool { input_shape: Vec<usize>, argmax: Vec<usize> },
    Recurrent { caches: Vec<StepCache> },
    Bidirectional(BidirectionalCache),
    LastStep { shape: Vec<usize> },
    Dense { index: usize, input: Tensor, output: Tensor },
    Head { input: Tensor, output: Tensor },
}

/// Everything [`Model::backward`] needs from one forward pass.
#[derive(Clone, Debug)]
pub struct Trace {
    ids: Vec<usize>,
    stages: Vec<StageCache>,
}

impl Model {
    pub fn build(spec: &ModelSpec, rng: &mut Rng) -> Result<Model> {
        let layers = spec.describe()?;
        let h = &spec.hyper;
        let scheme = InitScheme {
            forget_bias: h.forget_bias,
            alpha: h.alpha,
        };
        let (conv_in, rec_in, tail_in) = match spec.lstm_position {
            LstmPosition::CnnThenLstm => (h.embed_dim, h.filters, h.hidden),
            LstmPosition::LstmThenCnn => (h.hidden, h.embed_dim, h.filters),
        };
        let embedding = Embedding::new(h.vocab_size, h.embed_dim, rng)?;
        let conv = Conv1d::new(h.filters, h.kernel_size, conv_in, true, rng)?;
        let recurrent = cell::init_params(spec.variant, rec_in, h.hidden, rng, scheme)?;
        let tail = if spec.bidirectional_tail {
            let tail_scheme = InitScheme {
                forget_bias: h.forget_bias,
                ..InitScheme::default()
            };
            Some(Bidirectional::new(Variant::Lstm0, tail_in, h.tail_hidden, rng, tail_scheme)?)
        } else {
            None
        };
        let mut width = if spec.bidirectional_tail { 2 * h.tail_hidden } else { h.hidden };
        let mut extra = vec![];
        if spec.extra_dense {
            for &w in &h.extra_dense_widths {
                extra.push(Dense::new(width, w, DenseActivation::Relu, rng)?);
                width = w;
            }
        }
        let head = Dense::new(width, 1, DenseActivation::Sigmoid, rng)?;
        let model = Model {
            spec: spec.clone(),
            embedding,
            conv,
            recurrent,
            tail,
            extra,
            head,
        };
        debug_assert_eq!(model.num_params(), layers.iter().map(|l| l.params).sum::<usize>());
        Ok(model)
    }

    /// Probability of the positive class and the trace for backward. Pass
    /// an RNG to run in training mode (dropout active).
    pub fn forward(&self, ids: &[usize], mut rng: Option<&mut Rng>) -> Result<(f64, Trace)> {
        if ids.len() != self.spec.hyper.maxlen {
            return Err(Error::Argument(format!(
                "model expects sequences of length {}, got {}",
                self.spec.hyper.maxlen,
                ids.len()
            )));
        }
        let mut stages = vec![];
        let mut x = Tensor::zeros(&[1]);
        for stage in self.spec.stages() {
            let (next, cache) = match stage {
                Stage::Embedding => (self.embedding.forward(ids)?, StageCache::Embedding),
                Stage::Dropout(spec) => {
                    let (y, mask) = dropout_apply(&spec, &x, rng.as_deref_mut())?;
                    (y, StageCache::Dropout { mask })
                }
                Stage::Conv => {
                    let y = self.conv.forward(&x)?;
                    (y.clone(), StageCache::Conv { input: x, output: y })
                }
                Stage::Pool => {
                    let (y, argmax) = maxpool1d(&x, self.spec.hyper.pool_size)?;
                    let input_shape = x.shape().to_vec();
                    (y, StageCache::Pool { input_shape, argmax })
                }
                Stage::Recurrent => {
                    let init = CellState::zeros(self.recurrent.hidden_dim);
                    let (hs, caches) = cell::sequence_forward(&self.recurrent, &x, &init)?;
                    (hs, StageCache::Recurrent { caches })
                }
                Stage::Bidirectional => {
                    let tail = self.tail.as_ref().expect("spec has a tail");
                    let (y, cache) = tail.forward(&x)?;
                    (y, StageCache::Bidirectional(cache))
                }
                Stage::LastStep => {
                    let y = Tensor::vector(x.row(x.rows() - 1).to_vec());
                    (y, StageCache::LastStep { shape: x.shape().to_vec() })
                }
                Stage::Dense(index) => {
                    let y = self.extra[index].forward(&x)?;
                    (y.clone(), StageCache::Dense { index, input: x, output: y })
                }
                Stage::Head => {
                    let y = self.head.forward(&x)?;
                    (y.clone(), StageCache::Head { input: x, output: y })
                }
            };
            stages.push(cache);
            x = next;
        }
        let p = x.data()[0];
        Ok((
            p,
            Trace {
                ids: ids.to_vec(),
                stages,
            },
        ))
    }

    /// Evaluation-mode probability.
    pub fn predict(&self, ids: &[usize]) -> Result<f64> {
        Ok(self.forward(ids, None)?.0)
    }

    /// Accumulates `d_prob · ∂p/∂θ` into `grads`.
    pub fn backward(&self, trace: &Trace, d_prob: f64, grads: &mut Model) -> Result<()> {
        let mut d = Tensor::vector(vec![d_prob]);
        for cache in trace.stages.iter().rev() {
            d = match cache {
                StageCache::Head { input, output } => {
                    self.head.backward(input, output, &d, &mut grads.head)?
                }
                StageCache::Dense { index, input, output } => {
                    self.extra[*index].backward(input, output, &d, &mut grads.extra[*index])?
                }
                StageCache::Dropout { mask } => d.hadamard(mask)?,
                StageCache::LastStep { shape } => {
                    let mut full = Tensor::zeros(shape);
                    full.row_mut(shape[0] - 1).copy_from_slice(d.data());
                    full
                }
                StageCache::Bidirectional(cache) => {
                    let tail = self.tail.as_ref().expect("spec has a tail");
                    let g = grads.tail.as_mut().expect("grads mirror the model");
                    tail.backward(cache, &d, g)?
                }
                StageCache::Recurrent { caches } => {
                    let (g, d_xs, _) = cell::sequence_backward(&self.recurrent, caches, &d)?;
                    crate::params::accumulate(&mut grads.recurrent, &g);
                    d_xs
                }
                StageCache::Pool { input_shape, argmax } => maxpool1d_backward(input_shape, argmax, &d),
                StageCache::Conv { input, output } => {
                    self.conv.backward(input, output, &d, &mut grads.conv)?
                }
                StageCache::Embedding => {
                    self.embedding.backward(&trace.ids, &d, &mut grads.embedding)?;
                    d
                }
            };
        }
        Ok(())
    }

    pub fn zeros_like(&self) -> Model {
        let mut z = self.clone();
        z.zero();
        z
    }
}

impl ParamSet for Model {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        self.embedding.visit(&mut |n, t| f(&format!("embedding.{n}"), t));
        self.conv.visit(&mut |n, t| f(&format!("conv.{n}"), t));
        self.recurrent.visit(&mut |n, t| f(&format!("recurrent.{n}"), t));
        if let Some(tail) = &self.tail {
            tail.visit(&mut |n, t| f(&format!("tail.{n}"), t));
        }
        for (k, layer) in self.extra.iter().enumerate() {
            layer.visit(&mut |n, t| f(&format!("dense{k}.{n}"), t));
        }
        self.head.visit(&mut |n, t| f(&format!("head.{n}"), t));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        self.embedding.visit_mut(&mut |n, t| f(&format!("embedding.{n}"), t));
        self.conv.visit_mut(&mut |n, t| f(&format!("conv.{n}"), t));
        self.recurrent.visit_mut(&mut |n, t| f(&format!("recurrent.{n}"), t));
        if let Some(tail) = &mut self.tail {
            tail.visit_mut(&mut |n, t| f(&format!("tail.{n}"), t));
        }
        for (k, layer) in self.extra.iter_mut().enumerate() {
            layer.visit_mut(&mut |n, t| f(&format!("dense{k}.{n}"), t));
        }
        self.head.visit_mut(&mut |n, t| f(&format!("head.{n}"), t));
    }

    fn tensors(&self) -> Vec<&Tensor> {
        let mut out = self.embedding.tensors();
        out.extend(self.conv.tensors());
        out.extend(self.recurrent.tensors());
        if let Some(tail) = &self.tail {
            out.extend(tail.tensors());
        }
        for layer in &self.extra {
            out.extend(layer.tensors());
        }
        out.extend(self.head.tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.embedding.tensors_mut();
        out.extend(self.conv.tensors_mut());
        out.extend(self.recurrent.tensors_mut());
        if let Some(tail) = &mut self.tail {
            out.extend(tail.tensors_mut());
        }
        for layer in &mut self.extra {
            out.extend(layer.tensors_mut());
        }
        out.extend(self.head.tensors_mut());
        out
    }
}
