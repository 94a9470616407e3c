//! One-axis experiment sweeps and their comparison tables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cell::Variant;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::model::LstmPosition;
use crate::optim::OptimizerKind;
use crate::train::{train, Evaluation, ExperimentConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Variant,
    LstmPosition,
    ExtraDense,
    Lr,
    Optimizer,
    BatchSize,
    Split,
}

impl Axis {
    pub const ALL: [Axis; 7] = [
        Axis::Variant,
        Axis::LstmPosition,
        Axis::ExtraDense,
        Axis::Lr,
        Axis::Optimizer,
        Axis::BatchSize,
        Axis::Split,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Variant => "variant",
            Axis::LstmPosition => "lstm_position",
            Axis::ExtraDense => "extra_dense",
            Axis::Lr => "lr",
            Axis::Optimizer => "optimizer",
            Axis::BatchSize => "batch_size",
            Axis::Split => "split",
        }
    }

    /// Sets this axis on `config` and returns the column label.
    pub fn apply(self, config: &mut ExperimentConfig, value: &str) -> Result<String> {
        let value = value.trim();
        let bad = |what: &str| Error::Config(format!("invalid {} value {value:?}: {what}", self.name()));
        Ok(match self {
            Axis::Variant => {
                config.variant = value.parse()?;
                config.variant.to_string()
            }
            Axis::LstmPosition => {
                config.lstm_position = value.parse::<LstmPosition>()?;
                match config.lstm_position {
                    LstmPosition::CnnThenLstm => "CNN-LSTM".into(),
                    LstmPosition::LstmThenCnn => "LSTM-CNN".into(),
                }
            }
            Axis::ExtraDense => {
                config.extra_dense = value.parse().map_err(|_| bad("expected true or false"))?;
                if config.extra_dense { "Dense" } else { "No dense" }.into()
            }
            Axis::Lr => {
                let lr: f64 = value.parse().map_err(|_| bad("expected a number"))?;
                if !(lr > 0.0 && lr.is_finite()) {
                    return Err(bad("must be positive"));
                }
                config.lr = lr;
                format!("lr={value}")
            }
            Axis::Optimizer => {
                config.optimizer = value.parse::<OptimizerKind>()?;
                config.optimizer.to_string()
            }
            Axis::BatchSize => {
                let bs: usize = value.parse().map_err(|_| bad("expected a positive integer"))?;
                if bs == 0 {
                    return Err(bad("must be at least 1"));
                }
                config.batch_size = bs;
                format!("BS={bs}")
            }
            Axis::Split => {
                let split: f64 = value.parse().map_err(|_| bad("expected a number"))?;
                if !(split > 0.0 && split < 1.0) {
                    return Err(bad("must lie in (0, 1)"));
                }
                config.split = split;
                format!("Split={value}")
            }
        })
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Axis::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .ok_or_else(|| {
                let names: Vec<_> = Axis::ALL.iter().map(|a| a.name()).collect();
                Error::Config(format!("unknown axis {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// Rows are models, columns are axis values; each cell holds the
/// validation evaluation of one run. On the variant axis the rows are the
/// variants and there is a single column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: Axis,
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub cells: Vec<Vec<Evaluation>>,
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.1}"))
}

impl SweepTable {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["Model".to_string()];
        if self.axis == Axis::Variant {
            h.extend(["Positive (%)", "Negative (%)", "Overall"].map(String::from));
        } else {
            for c in &self.columns {
                h.extend([format!("{c} Pos"), format!("{c} Neg"), format!("{c} Overall")]);
            }
        }
        h
    }

    pub fn body(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .zip(&self.cells)
            .map(|(row, cells)| {
                let mut line = vec![row.clone()];
                for e in cells {
                    line.extend([pct(e.positive), pct(e.negative), pct(Some(e.overall))]);
                }
                line
            })
            .collect()
    }

    /// Tab-separated text, header first.
    pub fn render(&self) -> String {
        let mut out = self.header().join("\t");
        out.push('\n');
        for line in self.body() {
            out.push_str(&line.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}

/// Trains once per value with everything else, seed included, held fixed.
pub fn run_sweep(
    base: &ExperimentConfig,
    axis: Axis,
    values: &[String],
    dataset: &LabeledDataset,
) -> Result<SweepTable> {
    run_grid(base, &[base.variant], axis, values, dataset)
}

/// [`run_sweep`] repeated for each variant in `rows`. Ignored on the
/// variant axis, whose values already are the rows.
pub fn run_grid(
    base: &ExperimentConfig,
    rows: &[Variant],
    axis: Axis,
    values: &[String],
    dataset: &LabeledDataset,
) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(Error::Config(format!("no values given for axis {axis}")));
    }
    base.validate()?;
    let mut table = SweepTable {
        axis,
        rows: vec![],
        columns: vec![],
        cells: vec![],
    };
    if axis == Axis::Variant {
        table.columns.push("Result".into());
        for v in values {
            let mut config = base.clone();
            let label = axis.apply(&mut config, v)?;
            let (_, report) = train(&config, dataset)?;
            table.rows.push(label);
            table.cells.push(vec![report.validation]);
        }
        return Ok(table);
    }
    let mut configs = vec![];
    for v in values {
        let mut config = base.clone();
        table.columns.push(axis.apply(&mut config, v)?);
        configs.push(config);
    }
    for &variant in rows {
        let mut cells = vec![];
        for config in &configs {
            let config = ExperimentConfig {
                variant,
                ..config.clone()
            };
            cells.push(train(&config, dataset)?.1.validation);
        }
        table.rows.push(variant.to_string());
        table.cells.push(cells);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    fn strings(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn axis_parsing_and_labels() {
        assert_eq!("batch-size".parse::<Axis>().unwrap(), Axis::BatchSize);
        assert!("momentum".parse::<Axis>().is_err());
        let mut c = ExperimentConfig::default();
        assert_eq!(Axis::BatchSize.apply(&mut c, "16").unwrap(), "BS=16");
        assert_eq!(c.batch_size, 16);
        assert_eq!(Axis::Split.apply(&mut c, "0.33").unwrap(), "Split=0.33");
        assert_eq!(Axis::Optimizer.apply(&mut c, "rmsprop").unwrap(), "RMSprop");
        assert!(Axis::Split.apply(&mut c, "1.5").is_err());
        assert!(Axis::BatchSize.apply(&mut c, "0").is_err());
        assert!(Axis::Variant.apply(&mut c, "LSTM9").is_err());
    }

    #[test]
    fn batch_size_table_shape() {
        let mut base = synthetic::small_config(Variant::Lstm6, 4);
        base.epochs = 1;
        let data = synthetic::separable(24, base.maxlen, base.vocab_size, 4).unwrap();
        let table = run_sweep(&base, Axis::BatchSize, &strings(&["16", "32", "64", "128"]), &data).unwrap();
        assert_eq!(table.columns, ["BS=16", "BS=32", "BS=64", "BS=128"]);
        assert_eq!(table.rows, ["LSTM6"]);
        assert_eq!(table.header().len(), 1 + 3 * 4);
        assert!(table.render().starts_with("Model\tBS=16 Pos\tBS=16 Neg\tBS=16 Overall\tBS=32 Pos"));
    }

    #[test]
    fn variant_axis_rows() {
        let mut base = synthetic::small_config(Variant::Lstm0, 4);
        base.epochs = 1;
        let data = synthetic::separable(16, base.maxlen, base.vocab_size, 4).unwrap();
        let table = run_sweep(&base, Axis::Variant, &strings(&["LSTM0", "LSTM1", "LSTM6"]), &data).unwrap();
        assert_eq!(table.rows, ["LSTM0", "LSTM1", "LSTM6"]);
        assert_eq!(table.header(), ["Model", "Positive (%)", "Negative (%)", "Overall"]);
    }

    #[test]
    fn single_value_matches_plain_training() {
        let mut base = synthetic::small_config(Variant::Lstm2, 9);
        base.epochs = 2;
        let data = synthetic::separable(16, base.maxlen, base.vocab_size, 9).unwrap();
        let table = run_sweep(&base, Axis::Lr, &strings(&["0.01"]), &data).unwrap();
        let (_, report) = train(&base, &data).unwrap();
        assert_eq!(table.cells[0][0], report.validation);
    }
}
