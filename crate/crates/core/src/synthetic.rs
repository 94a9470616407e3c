//! Small synthetic token datasets for overfitting and smoke tests.

use crate::cell::Variant;
use crate::data::{LabeledDataset, TokenSeq, PAD_ID};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::train::ExperimentConfig;

/// `n` left-padded sequences with alternating labels. Positive samples draw
/// every token from the lower half of the id range `1..vocab_size`,
/// negative samples from the upper half, so a bag of tokens separates them.
pub fn separable(n: usize, maxlen: usize, vocab_size: usize, seed: u64) -> Result<LabeledDataset> {
    if vocab_size < 5 || maxlen < 2 {
        return Err(Error::Argument(format!(
            "need vocab_size >= 5 and maxlen >= 2, got {vocab_size} and {maxlen}"
        )));
    }
    let mut rng = Rng::new(seed);
    let half = (vocab_size - 1) / 2;
    let mut sequences = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as u8;
        let len = maxlen / 2 + rng.below(maxlen - maxlen / 2 + 1);
        let offset = if label == 1 { 1 } else { 1 + half };
        let mut ids = vec![PAD_ID; maxlen - len];
        ids.extend((0..len).map(|_| offset + rng.below(half)));
        sequences.push(TokenSeq::from_ids(ids));
        labels.push(label);
    }
    LabeledDataset::new(sequences, labels)
}

/// A reduced-width configuration that trains in seconds.
pub fn small_config(variant: Variant, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        variant,
        seed: Some(seed),
        lr: 0.01,
        batch_size: 8,
        epochs: 500,
        split: 0.25,
        vocab_size: 40,
        embed_dim: 8,
        maxlen: 12,
        filters: 8,
        kernel_size: 3,
        pool_size: 2,
        hidden: 8,
        tail_hidden: 8,
        extra_dense_widths: vec![8, 6, 4],
        ..ExperimentConfig::default()
    }
}

/// The default full-size pipeline with Adam at 1e-3 and one batch per
/// epoch on 32 samples, as used by the overfitting check.
pub fn overfit_config(variant: Variant, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        variant,
        seed: Some(seed),
        lr: 1e-3,
        batch_size: 32,
        epochs: 500,
        ..ExperimentConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes_use_disjoint_tokens() {
        let data = separable(32, 10, 40, 3).unwrap();
        assert_eq!(data.class_counts(), (16, 16));
        for (seq, &label) in data.sequences.iter().zip(&data.labels) {
            assert_eq!(seq.len(), 10);
            for &id in seq.ids().iter().filter(|&&id| id != PAD_ID) {
                assert!(id < 40);
                assert_eq!(id <= 19, label == 1, "id {id} label {label}");
            }
        }
        assert_eq!(separable(32, 10, 40, 3).unwrap(), data);
    }

    #[test]
    fn small_config_is_valid() {
        for v in Variant::ALL {
            small_config(v, 1).validate().unwrap();
        }
    }
}
