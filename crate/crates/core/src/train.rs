//! Loss, metrics, experiment configuration and the mini-batch training loop.

use serde::{Deserialize, Serialize};

use crate::cell::{self, Variant};
use crate::data::{split_train_val, LabeledDataset, TokenSeq};
use crate::error::{Error, Result};
use crate::model::{LstmPosition, Model, ModelHyper, ModelSpec};
use crate::optim::{make_optimizer, Optimizer, OptimizerKind};
use crate::params::{self, ParamSet};
use crate::rng::Rng;

pub const PROB_CLAMP: f64 = 1e-7;
pub const THRESHOLD: f64 = 0.5;

/// Binary cross-entropy and its derivative with respect to `p`. The
/// probability is clamped to `[1e-7, 1 − 1e-7]` first.
pub fn bce_loss(p: f64, y: f64) -> (f64, f64) {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let loss = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
    (loss, (p - y) / (p * (1.0 - p)))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: usize,
    pub true_negative: usize,
    pub false_positive: usize,
    pub false_negative: usize,
}

impl Confusion {
    pub fn record(&mut self, predicted_positive: bool, label: u8) {
        match (predicted_positive, label == 1) {
            (true, true) => self.true_positive += 1,
            (false, false) => self.true_negative += 1,
            (true, false) => self.false_positive += 1,
            (false, true) => self.false_negative += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.true_positive + self.true_negative + self.false_positive + self.false_negative
    }
}

/// Accuracies in percent. A class absent from the evaluated set has no
/// accuracy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub samples: usize,
    pub overall: f64,
    pub positive: Option<f64>,
    pub negative: Option<f64>,
    pub confusion: Confusion,
}

impl Evaluation {
    pub fn from_confusion(confusion: Confusion) -> Result<Self> {
        let n = confusion.total();
        if n == 0 {
            return Err(Error::EmptyDataset("nothing to evaluate".into()));
        }
        let pct = |num: usize, den: usize| (den > 0).then(|| 100.0 * num as f64 / den as f64);
        let c = confusion;
        Ok(Evaluation {
            samples: n,
            overall: 100.0 * (c.true_positive + c.true_negative) as f64 / n as f64,
            positive: pct(c.true_positive, c.true_positive + c.false_negative),
            negative: pct(c.true_negative, c.true_negative + c.false_positive),
            confusion,
        })
    }
}

/// Evaluation-mode accuracy at threshold 0.5.
pub fn evaluate(model: &Model, dataset: &LabeledDataset) -> Result<Evaluation> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset("cannot evaluate on an empty dataset".into()));
    }
    let mut confusion = Confusion::default();
    for (seq, &label) in dataset.sequences.iter().zip(&dataset.labels) {
        let p = model.predict(seq.ids())?;
        confusion.record(p >= THRESHOLD, label);
    }
    Evaluation::from_confusion(confusion)
}

/// Mean loss of `model` over `dataset` in evaluation mode.
pub fn mean_loss(model: &Model, dataset: &LabeledDataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset("cannot score an empty dataset".into()));
    }
    let mut total = 0.0;
    for (seq, &label) in dataset.sequences.iter().zip(&dataset.labels) {
        total += bce_loss(model.predict(seq.ids())?, label as f64).0;
    }
    Ok(total / dataset.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training-mode batch loss.
    pub loss: f64,
    /// Evaluation-mode accuracy on the training side, percent.
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub variant: Variant,
    pub seed: u64,
    pub train_samples: usize,
    pub validation_samples: usize,
    pub epochs: Vec<EpochRecord>,
    /// Evaluation on the validation side, reported as test accuracy.
    pub validation: Evaluation,
    /// File name of the run manifest this report belongs to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `epoch,loss,accuracy` rows.
    pub fn epochs_csv(&self) -> String {
        let mut out = String::from("epoch,loss,accuracy\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{}\n", e.epoch, e.loss, e.accuracy));
        }
        out
    }
}

fn default_position() -> LstmPosition {
    LstmPosition::CnnThenLstm
}
fn default_true() -> bool {
    true
}
fn default_optimizer() -> OptimizerKind {
    OptimizerKind::Adam
}
fn default_lr() -> f64 {
    1e-4
}
fn default_batch() -> usize {
    32
}
fn default_epochs() -> usize {
    10
}
fn default_split() -> f64 {
    0.4
}
fn default_text_column() -> String {
    "text".into()
}
fn default_label_column() -> String {
    "sentiment".into()
}
fn hyper() -> ModelHyper {
    ModelHyper::default()
}
fn default_vocab() -> usize {
    hyper().vocab_size
}
fn default_embed() -> usize {
    hyper().embed_dim
}
fn default_maxlen() -> usize {
    hyper().maxlen
}
fn default_filters() -> usize {
    hyper().filters
}
fn default_kernel() -> usize {
    hyper().kernel_size
}
fn default_pool() -> usize {
    hyper().pool_size
}
fn default_hidden() -> usize {
    hyper().hidden
}
fn default_tail() -> usize {
    hyper().tail_hidden
}
fn default_spatial() -> f64 {
    hyper().spatial_dropout
}
fn default_dense_dropout() -> f64 {
    hyper().dense_dropout
}
fn default_widths() -> Vec<usize> {
    hyper().extra_dense_widths
}
fn default_forget_bias() -> f64 {
    cell::DEFAULT_FORGET_BIAS
}
fn default_alpha() -> f64 {
    cell::DEFAULT_ALPHA
}

/// One experiment, as read from a flat JSON file. Unknown keys are
/// rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub variant: Variant,
    #[serde(default = "default_position")]
    pub lstm_position: LstmPosition,
    #[serde(default)]
    pub extra_dense: bool,
    #[serde(default = "default_true")]
    pub bidirectional_tail: bool,
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerKind,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_split")]
    pub split: f64,
    /// Must be set before training, here or by the caller.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub clip_norm: Option<f64>,
    #[serde(default = "default_text_column")]
    pub text_column: String,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    #[serde(default = "default_vocab")]
    pub vocab_size: usize,
    #[serde(default = "default_embed")]
    pub embed_dim: usize,
    #[serde(default = "default_maxlen")]
    pub maxlen: usize,
    #[serde(default = "default_filters")]
    pub filters: usize,
    #[serde(default = "default_kernel")]
    pub kernel_size: usize,
    #[serde(default = "default_pool")]
    pub pool_size: usize,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_tail")]
    pub tail_hidden: usize,
    #[serde(default = "default_spatial")]
    pub spatial_dropout: f64,
    #[serde(default = "default_dense_dropout")]
    pub dense_dropout: f64,
    #[serde(default = "default_widths")]
    pub extra_dense_widths: Vec<usize>,
    #[serde(default = "default_forget_bias")]
    pub forget_bias: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str(r#"{"variant": "LSTM0"}"#).expect("defaults deserialize")
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate_fields()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn hyper(&self) -> ModelHyper {
        ModelHyper {
            vocab_size: self.vocab_size,
            embed_dim: self.embed_dim,
            maxlen: self.maxlen,
            filters: self.filters,
            kernel_size: self.kernel_size,
            pool_size: self.pool_size,
            hidden: self.hidden,
            tail_hidden: self.tail_hidden,
            spatial_dropout: self.spatial_dropout,
            dense_dropout: self.dense_dropout,
            extra_dense_widths: self.extra_dense_widths.clone(),
            forget_bias: self.forget_bias,
            alpha: self.alpha,
        }
    }

    pub fn set_hyper(&mut self, h: &ModelHyper) {
        self.vocab_size = h.vocab_size;
        self.embed_dim = h.embed_dim;
        self.maxlen = h.maxlen;
        self.filters = h.filters;
        self.kernel_size = h.kernel_size;
        self.pool_size = h.pool_size;
        self.hidden = h.hidden;
        self.tail_hidden = h.tail_hidden;
        self.spatial_dropout = h.spatial_dropout;
        self.dense_dropout = h.dense_dropout;
        self.extra_dense_widths = h.extra_dense_widths.clone();
        self.forget_bias = h.forget_bias;
        self.alpha = h.alpha;
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            variant: self.variant,
            lstm_position: self.lstm_position,
            extra_dense: self.extra_dense,
            bidirectional_tail: self.bidirectional_tail,
            hyper: self.hyper(),
        }
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("no seed given; set \"seed\" or pass one explicitly".into()))
    }

    fn validate_fields(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::Config(format!("split must lie in (0, 1), got {}", self.split)));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::Config(format!("clip_norm must be positive, got {c}")));
            }
        }
        if !(self.alpha > -1.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (-1, 1), got {}", self.alpha)));
        }
        Ok(())
    }

    /// Field checks plus a dry run of the layer stack.
    pub fn validate(&self) -> Result<()> {
        self.validate_fields()?;
        self.require_seed()?;
        self.model_spec().describe()?;
        Ok(())
    }
}

// Independent RNG streams per concern, all keyed by the run seed.
const STREAM_SPLIT: u64 = 1;
const STREAM_INIT: u64 = 2;
const STREAM_SHUFFLE: u64 = 3;
const STREAM_DROPOUT: u64 = 4;

/// Epoch-at-a-time training of one model.
pub struct Trainer {
    config: ExperimentConfig,
    seed: u64,
    model: Model,
    optimizer: Optimizer,
    train: LabeledDataset,
    validation: LabeledDataset,
    shuffle_rng: Rng,
    dropout_rng: Rng,
    history: Vec<EpochRecord>,
}

impl Trainer {
    pub fn new(config: &ExperimentConfig, train: LabeledDataset, validation: LabeledDataset) -> Result<Self> {
        config.validate()?;
        if train.is_empty() {
            return Err(Error::EmptyDataset("training side is empty".into()));
        }
        let seed = config.require_seed()?;
        let root = Rng::new(seed);
        let model = Model::build(&config.model_spec(), &mut root.derive(STREAM_INIT))?;
        let mut optimizer = make_optimizer(config.optimizer, config.lr)?;
        if let Some(c) = config.clip_norm {
            optimizer = optimizer.with_clip_norm(c);
        }
        Ok(Trainer {
            config: config.clone(),
            seed,
            model,
            optimizer,
            train,
            validation,
            shuffle_rng: root.derive(STREAM_SHUFFLE),
            dropout_rng: root.derive(STREAM_DROPOUT),
            history: vec![],
        })
    }

    /// Splits `dataset` with the configured ratio and seed.
    pub fn from_dataset(config: &ExperimentConfig, dataset: &LabeledDataset) -> Result<Self> {
        let seed = config.require_seed()?;
        let (train, validation) = split_train_val(dataset, config.split, &mut Rng::new(seed).derive(STREAM_SPLIT))?;
        Trainer::new(config, train, validation)
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn history(&self) -> &[EpochRecord] {
        &self.history
    }

    pub fn train_set(&self) -> &LabeledDataset {
        &self.train
    }

    pub fn validation_set(&self) -> &LabeledDataset {
        &self.validation
    }

    /// Mean loss and gradient over one batch, in training mode.
    fn batch_gradient(&mut self, batch: &[usize]) -> Result<(f64, Model)> {
        let mut grads = self.model.zeros_like();
        let mut total = 0.0;
        for &i in batch {
            let ids: &TokenSeq = &self.train.sequences[i];
            let y = self.train.labels[i] as f64;
            let (p, trace) = self.model.forward(ids.ids(), Some(&mut self.dropout_rng))?;
            let (loss, d_p) = bce_loss(p, y);
            total += loss;
            self.model.backward(&trace, d_p, &mut grads)?;
        }
        let scale = 1.0 / batch.len() as f64;
        params::scale_all(&mut grads, scale);
        Ok((total * scale, grads))
    }

    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        let epoch = self.history.len() + 1;
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        self.shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for (b, batch) in order.chunks(self.config.batch_size).enumerate() {
            let (loss, grads) = self.batch_gradient(batch)?;
            if !loss.is_finite() || !grads.tensors().iter().all(|t| t.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    batch: b + 1,
                    loss,
                });
            }
            let mut params = self.model.tensors_mut();
            self.optimizer.apply(&mut params, &grads.tensors())?;
            loss_sum += loss;
            batches += 1;
        }
        let accuracy = evaluate(&self.model, &self.train)?.overall;
        let record = EpochRecord {
            epoch,
            loss: loss_sum / batches as f64,
            accuracy,
        };
        self.history.push(record.clone());
        Ok(record)
    }

    /// Runs the remaining configured epochs.
    pub fn run(&mut self) -> Result<()> {
        while self.history.len() < self.config.epochs {
            self.run_epoch()?;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<(Model, MetricsReport)> {
        let validation = evaluate(&self.model, &self.validation)?;
        let report = MetricsReport {
            variant: self.config.variant,
            seed: self.seed,
            train_samples: self.train.len(),
            validation_samples: self.validation.len(),
            epochs: self.history,
            validation,
            manifest: None,
        };
        Ok((self.model, report))
    }
}

/// Splits, trains for the configured epochs and evaluates the validation
/// side.
pub fn train(config: &ExperimentConfig, dataset: &LabeledDataset) -> Result<(Model, MetricsReport)> {
    let mut trainer = Trainer::from_dataset(config, dataset)?;
    trainer.run()?;
    trainer.finish()
}
