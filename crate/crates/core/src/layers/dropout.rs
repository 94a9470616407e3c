use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropoutMode {
    /// Independent mask per entry.
    Elementwise,
    /// One mask entry per feature column, shared across all timesteps.
    SpatialFeature,
}

/// Inverted dropout: survivors are scaled by `1 / (1 − rate)` during
/// training, evaluation is the identity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropoutSpec {
    pub rate: f64,
    pub mode: DropoutMode,
}

impl DropoutSpec {
    pub fn new(rate: f64, mode: DropoutMode) -> Result<Self> {
        let spec = DropoutSpec { rate, mode };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rate) {
            return Err(Error::Config(format!(
                "dropout rate must lie in [0, 1), got {}",
                self.rate
            )));
        }
        Ok(())
    }
}

/// Applies dropout and returns the output together with the mask that was
/// multiplied in (already including the rescaling). Pass `rng = None` for
/// evaluation.
pub fn dropout_apply(spec: &DropoutSpec, x: &Tensor, rng: Option<&mut Rng>) -> Result<(Tensor, Tensor)> {
    spec.validate()?;
    let rng = match rng {
        Some(rng) if spec.rate > 0.0 => rng,
        _ => return Ok((x.clone(), Tensor::filled(x.shape(), 1.0))),
    };
    let keep = 1.0 / (1.0 - spec.rate);
    let mut mask = Tensor::zeros(x.shape());
    match spec.mode {
        DropoutMode::Elementwise => {
            for m in mask.data_mut() {
                *m = if rng.bernoulli(spec.rate) { 0.0 } else { keep };
            }
        }
        DropoutMode::SpatialFeature => {
            let width = x.cols();
            let columns: Vec<f64> = (0..width)
                .map(|_| if rng.bernoulli(spec.rate) { 0.0 } else { keep })
                .collect();
            for row in mask.data_mut().chunks_exact_mut(width) {
                row.copy_from_slice(&columns);
            }
        }
    }
    let out = x.hadamard(&mask)?;
    Ok((out, mask))
}
