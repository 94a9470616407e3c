//! Single-document JSON checkpoints with base64 little-endian f64 blobs.

use std::collections::BTreeMap;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use slimrnn::data::Vocabulary;
use slimrnn::{ExperimentConfig, Model, ModelSpec, ParamSet, Rng};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorBlob {
    pub name: String,
    pub shape: Vec<usize>,
    /// Base64 of the values as consecutive little-endian f64.
    pub data: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub tensors: Vec<TensorBlob>,
    pub vocabulary: Vocabulary,
    pub config: ExperimentConfig,
}

fn encode(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn decode(name: &str, text: &str) -> CliResult<Vec<f64>> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| CliError::Checkpoint(format!("tensor {name}: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(CliError::Checkpoint(format!(
            "tensor {name}: {} bytes is not a whole number of f64 values",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

impl Checkpoint {
    pub fn capture(model: &Model, vocabulary: &Vocabulary, config: &ExperimentConfig) -> Self {
        let mut tensors = vec![];
        model.visit(&mut |name, t| {
            tensors.push(TensorBlob {
                name: name.to_string(),
                shape: t.shape().to_vec(),
                data: encode(t.data()),
            })
        });
        Checkpoint {
            format_version: FORMAT_VERSION,
            spec: model.spec.clone(),
            tensors,
            vocabulary: vocabulary.clone(),
            config: config.clone(),
        }
    }

    /// Rebuilds the model, requiring every tensor to be present exactly once
    /// with the shape the model spec implies.
    pub fn restore(&self) -> CliResult<Model> {
        if self.format_version != FORMAT_VERSION {
            return Err(CliError::Checkpoint(format!(
                "format version {} is not supported (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let mut blobs: BTreeMap<&str, &TensorBlob> = BTreeMap::new();
        for blob in &self.tensors {
            if blobs.insert(&blob.name, blob).is_some() {
                return Err(CliError::Checkpoint(format!("tensor {} appears twice", blob.name)));
            }
        }
        let mut model = Model::build(&self.spec, &mut Rng::new(0))?;
        let mut problem = None;
        model.visit_mut(&mut |name, t| {
            if problem.is_some() {
                return;
            }
            let Some(blob) = blobs.remove(name) else {
                problem = Some(format!("tensor {name} is missing"));
                return;
            };
            if blob.shape != t.shape() {
                problem = Some(format!(
                    "tensor {name} has shape {:?}, expected {:?}",
                    blob.shape,
                    t.shape()
                ));
                return;
            }
            match decode(name, &blob.data) {
                Ok(values) if values.len() == t.len() => t.data_mut().copy_from_slice(&values),
                Ok(values) => {
                    problem = Some(format!("tensor {name} holds {} values, expected {}", values.len(), t.len()))
                }
                Err(e) => problem = Some(e.to_string()),
            }
        });
        if let Some(p) = problem {
            return Err(CliError::Checkpoint(p));
        }
        if let Some(extra) = blobs.keys().next() {
            return Err(CliError::Checkpoint(format!("unexpected tensor {extra}")));
        }
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_json()).map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::Checkpoint(e.to_string()))
    }
}
