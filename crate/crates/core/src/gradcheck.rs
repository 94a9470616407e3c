//! Central finite differences as an independent oracle for every backward
//! pass in the crate.
//!
//! A [`GradProbe`] exposes a scalar loss over a flat vector of
//! coordinates together with the analytic gradient at the same point.
//! [`check_probe`] compares the two coordinate by coordinate using
//!
//! ```text
//! rel(a, n) = |a − n| / max(|a|, |n|, 1e-12)
//! ```
//!
//! and [`check_module`] builds probes for the cells, layers and a micro
//! model over several seeds.

use std::fmt;

use serde::Serialize;

use crate::cell::{self, CellParams, CellState, InitScheme, Variant};
use crate::error::{Error, Result};
use crate::layers::{Bidirectional, Conv1d, Dense, DenseActivation, Embedding};
use crate::model::{LstmPosition, Model, ModelHyper, ModelSpec};
use crate::params::ParamSet;
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::train::bce_loss;

pub const DEFAULT_EPS: f64 = 1e-6;
/// Step for whole-model checks. A dozen stacked layers lift the loss's
/// rounding noise to a few ulps, which at 1e-6 swamps the smallest
/// gradient entries; 1e-4 sits near the optimum for that noise level.
pub const MODEL_EPS: f64 = 1e-4;
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(DENOMINATOR_FLOOR);
    (analytic - numeric).abs() / denom
}

/// `(L(w + ε eᵢ) − L(w − ε eᵢ)) / 2ε` for every coordinate `i`.
pub fn finite_diff(
    mut lossfn: impl FnMut(&[f64]) -> f64,
    params: &[f64],
    eps: f64,
) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(Error::Argument(format!("step must be positive, got {eps}")));
    }
    let mut point = params.to_vec();
    let mut grad = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = point[i];
        point[i] = orig + eps;
        let up = lossfn(&point);
        point[i] = orig - eps;
        let down = lossfn(&point);
        point[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Oracle(format!(
                "non-finite loss while perturbing coordinate {i}"
            )));
        }
        grad.push((up - down) / (2.0 * eps));
    }
    Ok(grad)
}

/// Something with a scalar loss over flat coordinates and an analytic
/// gradient of that loss.
pub trait GradProbe {
    /// Names and lengths of consecutive blocks of the flat vector.
    fn segments(&self) -> Vec<(String, usize)>;
    fn point(&self) -> Vec<f64>;
    fn loss(&self, point: &[f64]) -> f64;
    fn gradient(&self, point: &[f64]) -> Vec<f64>;
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamRow {
    pub name: String,
    pub len: usize,
    pub max_rel_error: f64,
    pub mean_rel_error: f64,
    /// Coordinate within the block where the largest error occurred.
    pub worst_index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradReport {
    pub target: String,
    pub tolerance: f64,
    pub rows: Vec<ParamRow>,
    /// Set when the oracle itself could not run.
    pub error: Option<String>,
    pub passed: bool,
}

impl GradReport {
    pub fn max_rel_error(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.max_rel_error))
    }

    fn finish(mut self) -> Self {
        self.passed = self.error.is_none() && self.rows.iter().all(|r| r.max_rel_error < self.tolerance);
        self
    }
}

impl fmt::Display for GradReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        writeln!(
            f,
            "{} {verdict} (tol {:e}, max rel err {:.3e})",
            self.target,
            self.tolerance,
            self.max_rel_error()
        )?;
        if let Some(err) = &self.error {
            writeln!(f, "  oracle error: {err}")?;
        }
        for r in &self.rows {
            writeln!(
                f,
                "  {:<24} n={:<6} max {:.3e}  mean {:.3e}  worst #{}",
                r.name, r.len, r.max_rel_error, r.mean_rel_error, r.worst_index
            )?;
        }
        Ok(())
    }
}

/// Compares analytic and numeric gradients of one probe.
pub fn check_probe(probe: &dyn GradProbe, name: &str, eps: f64, tol: f64) -> GradReport {
    let report = GradReport {
        target: name.to_string(),
        tolerance: tol,
        rows: vec![],
        error: None,
        passed: false,
    };
    let point = probe.point();
    let analytic = probe.gradient(&point);
    let numeric = match finite_diff(|p| probe.loss(p), &point, eps) {
        Ok(g) => g,
        Err(e) => {
            return GradReport {
                error: Some(e.to_string()),
                ..report
            }
            .finish()
        }
    };
    let mut rows = vec![];
    let mut offset = 0;
    for (seg, len) in probe.segments() {
        let mut max = 0.0;
        let mut worst = 0;
        let mut sum = 0.0;
        for i in 0..len {
            let e = relative_error(analytic[offset + i], numeric[offset + i]);
            sum += e;
            if e > max {
                max = e;
                worst = i;
            }
        }
        rows.push(ParamRow {
            name: seg,
            len,
            max_rel_error: max,
            mean_rel_error: if len > 0 { sum / len as f64 } else { 0.0 },
            worst_index: worst,
        });
        offset += len;
    }
    GradReport { rows, ..report }.finish()
}

/// Merges per-seed reports row by row (max of maxima, mean of means).
fn merge(name: &str, tol: f64, reports: Vec<GradReport>) -> GradReport {
    let mut merged = GradReport {
        target: name.to_string(),
        tolerance: tol,
        rows: vec![],
        error: None,
        passed: false,
    };
    let count = reports.len().max(1) as f64;
    for report in reports {
        if report.error.is_some() && merged.error.is_none() {
            merged.error = report.error.clone();
        }
        for row in report.rows {
            match merged.rows.iter_mut().find(|r| r.name == row.name) {
                Some(r) => {
                    r.mean_rel_error += row.mean_rel_error / count;
                    if row.max_rel_error > r.max_rel_error {
                        r.max_rel_error = row.max_rel_error;
                        r.worst_index = row.worst_index;
                    }
                    r.len = r.len.max(row.len);
                }
                None => merged.rows.push(ParamRow {
                    mean_rel_error: row.mean_rel_error / count,
                    ..row
                }),
            }
        }
    }
    merged.finish()
}

fn random_weights(rng: &mut Rng, shape: &[usize]) -> Tensor {
    rng.uniform(shape, -1.0, 1.0).expect("valid shape")
}

// ---------------------------------------------------------------------------
// probes

/// `L = Σ_t ⟨r_t, h_t⟩` over a cell, differentiated with respect to every
/// parameter, every input row and the initial state.
pub struct CellProbe {
    pub params: CellParams,
    pub xs: Tensor,
    pub init: CellState,
    pub readout: Tensor,
}

impl CellProbe {
    pub fn random(variant: Variant, d: usize, n: usize, steps: usize, seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        let mut params = cell::init_params(variant, d, n, &mut rng, InitScheme::default())
            .expect("positive dims");
        // Give biases random values too.
        params.visit_mut(&mut |name, t| {
            if name.ends_with(".b") {
                *t = rng.uniform(t.shape(), -0.5, 0.5).expect("valid shape");
            }
        });
        CellProbe {
            params,
            xs: random_weights(&mut rng, &[steps, d]),
            init: CellState {
                h: random_weights(&mut rng, &[n]).scale(0.5),
                c: random_weights(&mut rng, &[n]),
            },
            readout: random_weights(&mut rng, &[steps, n]),
        }
    }

    fn unpack(&self, point: &[f64]) -> (CellParams, Tensor, CellState) {
        let mut params = self.params.clone();
        let np = params.num_params();
        params.load_flat(&point[..np]).expect("layout");
        let nx = self.xs.len();
        let n = self.params.hidden_dim;
        let xs = Tensor::new(self.xs.shape(), point[np..np + nx].to_vec()).expect("layout");
        let init = CellState {
            h: Tensor::vector(point[np + nx..np + nx + n].to_vec()),
            c: Tensor::vector(point[np + nx + n..].to_vec()),
        };
        (params, xs, init)
    }
}

impl GradProbe for CellProbe {
    fn segments(&self) -> Vec<(String, usize)> {
        let mut s = self.params.layout();
        s.push(("input".into(), self.xs.len()));
        s.push(("h0".into(), self.params.hidden_dim));
        s.push(("c0".into(), self.params.hidden_dim));
        s
    }

    fn point(&self) -> Vec<f64> {
        let mut p = self.params.flatten();
        p.extend_from_slice(self.xs.data());
        p.extend_from_slice(self.init.h.data());
        p.extend_from_slice(self.init.c.data());
        p
    }

    fn loss(&self, point: &[f64]) -> f64 {
        let (params, xs, init) = self.unpack(point);
        let (hs, _) = cell::sequence_forward(&params, &xs, &init).expect("shapes");
        hs.dot(&self.readout).expect("shapes")
    }

    fn gradient(&self, point: &[f64]) -> Vec<f64> {
        let (params, xs, init) = self.unpack(point);
        let (_, caches) = cell::sequence_forward(&params, &xs, &init).expect("shapes");
        let (grads, d_xs, d_init) =
            cell::sequence_backward(&params, &caches, &self.readout).expect("shapes");
        let mut g = grads.flatten();
        g.extend_from_slice(d_xs.data());
        g.extend_from_slice(d_init.h.data());
        g.extend_from_slice(d_init.c.data());
        g
    }
}

/// `L = Σ r ⊙ embed(ids)`, differentiated with respect to the table.
pub struct EmbeddingProbe {
    pub layer: Embedding,
    pub ids: Vec<usize>,
    pub readout: Tensor,
}

impl EmbeddingProbe {
    pub fn random(seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        let layer = Embedding {
            table: random_weights(&mut rng, &[5, 3]),
        };
        let ids = vec![0, 3, 1, 3, 4, 4, 4];
        let readout = random_weights(&mut rng, &[ids.len(), 3]);
        EmbeddingProbe { layer, ids, readout }
    }
}

impl GradProbe for EmbeddingProbe {
    fn segments(&self) -> Vec<(String, usize)> {
        self.layer.layout()
    }

    fn point(&self) -> Vec<f64> {
        self.layer.flatten()
    }

    fn loss(&self, point: &[f64]) -> f64 {
        let mut layer = self.layer.clone();
        layer.load_flat(point).expect("layout");
        layer.forward(&self.ids).expect("ids").dot(&self.readout).expect("shapes")
    }

    fn gradient(&self, point: &[f64]) -> Vec<f64> {
        let mut layer = self.layer.clone();
        layer.load_flat(point).expect("layout");
        let mut grads = layer.zeros_like();
        layer.backward(&self.ids, &self.readout, &mut grads).expect("shapes");
        grads.flatten()
    }
}

/// Conv1d followed by max pooling, read out linearly.
pub struct ConvProbe {
    pub layer: Conv1d,
    pub pool: usize,
    pub input: Tensor,
    pub readout: Tensor,
}

impl ConvProbe {
    pub fn random(seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        let layer = Conv1d {
            kernels: random_weights(&mut rng, &[2, 3, 2]),
            bias: random_weights(&mut rng, &[2]).scale(0.1),
            relu: true,
        };
        let input = random_weights(&mut rng, &[6, 2]);
        // 6 − 3 + 1 = 4 rows, pooled by 2.
        let readout = random_weights(&mut rng, &[2, 2]);
        ConvProbe {
            layer,
            pool: 2,
            input,
            readout,
        }
    }

    fn run(&self, layer: &Conv1d, input: &Tensor) -> f64 {
        let conv = layer.forward(input).expect("shapes");
        let (pooled, _) = crate::layers::maxpool1d(&conv, self.pool).expect("shapes");
        pooled.dot(&self.readout).expect("shapes")
    }

    fn unpack(&self, point: &[f64]) -> (Conv1d, Tensor) {
        let mut layer = self.layer.clone();
        let np = layer.num_params();
        layer.load_flat(&point[..np]).expect("layout");
        let input = Tensor::new(self.input.shape(), point[np..].to_vec()).expect("layout");
        (layer, input)
    }
}

impl GradProbe for ConvProbe {
    fn segments(&self) -> Vec<(String, usize)> {
        let mut s = self.layer.layout();
        s.push(("input".into(), self.input.len()));
        s
    }

    fn point(&self) -> Vec<f64> {
        let mut p = self.layer.flatten();
        p.extend_from_slice(self.input.data());
        p
    }

    fn loss(&self, point: &[f64]) -> f64 {
        let (layer, input) = self.unpack(point);
        self.run(&layer, &input)
    }

    fn gradient(&self, point: &[f64]) -> Vec<f64> {
        let (layer, input) = self.unpack(point);
        let conv = layer.forward(&input).expect("shapes");
        let (_, argmax) = crate::layers::maxpool1d(&conv, self.pool).expect("shapes");
        let d_conv = crate::layers::maxpool1d_backward(conv.shape(), &argmax, &self.readout);
        let mut grads = layer.zeros_like();
        let d_in = layer.backward(&input, &conv, &d_conv, &mut grads).expect("shapes");
        let mut g = grads.flatten();
        g.extend_from_slice(d_in.data());
        g
    }
}

/// A dense layer read out linearly.
pub struct DenseProbe {
    pub layer: Dense,
    pub input: Tensor,
    pub readout: Tensor,
}

impl DenseProbe {
    pub fn random(activation: DenseActivation, seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        DenseProbe {
            layer: Dense {
                weight: random_weights(&mut rng, &[3, 4]),
                bias: random_weights(&mut rng, &[3]),
                activation,
            },
            input: random_weights(&mut rng, &[4]),
            readout: random_weights(&mut rng, &[3]),
        }
    }

    fn unpack(&self, point: &[f64]) -> (Dense, Tensor) {
        let mut layer = self.layer.clone();
        let np = layer.num_params();
        layer.load_flat(&point[..np]).expect("layout");
        (layer, Tensor::vector(point[np..].to_vec()))
    }
}

impl GradProbe for DenseProbe {
    fn segments(&self) -> Vec<(String, usize)> {
        let mut s = self.layer.layout();
        s.push(("input".into(), self.input.len()));
        s
    }

    fn point(&self) -> Vec<f64> {
        let mut p = self.layer.flatten();
        p.extend_from_slice(self.input.data());
        p
    }

    fn loss(&self, point: &[f64]) -> f64 {
        let (layer, input) = self.unpack(point);
        layer.forward(&input).expect("shapes").dot(&self.readout).expect("shapes")
    }

    fn gradient(&self, point: &[f64]) -> Vec<f64> {
        let (layer, input) = self.unpack(point);
        let out = layer.forward(&input).expect("shapes");
        let mut grads = layer.zeros_like();
        let d_in = layer.backward(&input, &out, &self.readout, &mut grads).expect("shapes");
        let mut g = grads.flatten();
        g.extend_from_slice(d_in.data());
        g
    }
}

/// A bidirectional pair read out linearly at every timestep.
pub struct BidirectionalProbe {
    pub layer: Bidirectional,
    pub xs: Tensor,
    pub readout: Tensor,
}

impl BidirectionalProbe {
    pub fn random(variant: Variant, seed: u64) -> Self {
        let (d, n, steps) = (3, 2, 3);
        let mut rng = Rng::new(seed);
        let layer = Bidirectional::new(variant, d, n, &mut rng, InitScheme::default())
            .expect("positive dims");
        BidirectionalProbe {
            layer,
            xs: random_weights(&mut rng, &[steps, d]),
            readout: random_weights(&mut rng, &[steps, 2 * n]),
        }
    }

    fn unpack(&self, point: &[f64]) -> (Bidirectional, Tensor) {
        let mut layer = self.layer.clone();
        let np = layer.num_params();
        layer.load_flat(&point[..np]).expect("layout");
        let xs = Tensor::new(self.xs.shape(), point[np..].to_vec()).expect("layout");
        (layer, xs)
    }
}

impl GradProbe for BidirectionalProbe {
    fn segments(&self) -> Vec<(String, usize)> {
        let mut s = self.layer.layout();
        s.push(("input".into(), self.xs.len()));
        s
    }

    fn point(&self) -> Vec<f64> {
        let mut p = self.layer.flatten();
        p.extend_from_slice(self.xs.data());
        p
    }

    fn loss(&self, point: &[f64]) -> f64 {
        let (layer, xs) = self.unpack(point);
        let (out, _) = layer.forward(&xs).expect("shapes");
        out.dot(&self.readout).expect("shapes")
    }

    fn gradient(&self, point: &[f64]) -> Vec<f64> {
        let (layer, xs) = self.unpack(point);
        let (_, cache) = layer.forward(&xs).expect("shapes");
        let mut grads = layer.zeros_like();
        let d_xs = layer.backward(&cache, &self.readout, &mut grads).expect("shapes");
        let mut g = grads.flatten();
        g.extend_from_slice(d_xs.data());
        g
    }
}

/// Binary cross-entropy of a whole model on one labelled sequence, dropout
/// disabled.
pub struct ModelProbe {
    pub model: Model,
    pub ids: Vec<usize>,
    pub label: f64,
}

impl ModelProbe {
    /// Micro model: V=20, e=4, F=3, k=2, n=3, T=6.
    pub fn micro(variant: Variant, position: LstmPosition, extra_dense: bool, seed: u64) -> Self {
        let hyper = ModelHyper {
            vocab_size: 20,
            embed_dim: 4,
            maxlen: 6,
            filters: 3,
            kernel_size: 2,
            pool_size: 2,
            hidden: 3,
            tail_hidden: 3,
            spatial_dropout: 0.0,
            dense_dropout: 0.0,
            extra_dense_widths: vec![4, 3, 2],
            ..ModelHyper::default()
        };
        let spec = ModelSpec {
            variant,
            lstm_position: position,
            extra_dense,
            bidirectional_tail: true,
            hyper,
        };
        let mut rng = Rng::new(seed);
        let mut model = Model::build(&spec, &mut rng).expect("micro spec is valid");
        // Larger weights than the default init so no path is negligible.
        model.visit_mut(&mut |_, t| {
            for x in t.data_mut() {
                *x = 2.0 * rng.next_f64() - 1.0;
            }
        });
        let ids = (0..6).map(|_| rng.below(20)).collect();
        let label = if rng.bernoulli(0.5) { 1.0 } else { 0.0 };
        ModelProbe { model, ids, label }
    }

    fn with_point(&self, point: &[f64]) -> Model {
        let mut m = self.model.clone();
        m.load_flat(point).expect("layout");
        m
    }
}

impl GradProbe for ModelProbe {
    fn segments(&self) -> Vec<(String, usize)> {
        self.model.layout()
    }

    fn point(&self) -> Vec<f64> {
        self.model.flatten()
    }

    fn loss(&self, point: &[f64]) -> f64 {
        let m = self.with_point(point);
        let p = m.predict(&self.ids).expect("ids");
        bce_loss(p, self.label).0
    }

    fn gradient(&self, point: &[f64]) -> Vec<f64> {
        let m = self.with_point(point);
        let (p, trace) = m.forward(&self.ids, None).expect("ids");
        let mut grads = m.zeros_like();
        m.backward(&trace, bce_loss(p, self.label).1, &mut grads).expect("trace");
        grads.flatten()
    }
}

/// What [`check_module`] should certify.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Cell(Variant),
    Embedding,
    Conv1d,
    Dense,
    Bidirectional,
    /// The micro classifier end to end, with the given recurrent variant.
    Model(Variant),
}

impl Target {
    pub fn name(&self) -> String {
        match self {
            Target::Cell(v) => v.to_string(),
            Target::Embedding => "embedding".into(),
            Target::Conv1d => "conv1d+maxpool".into(),
            Target::Dense => "dense".into(),
            Target::Bidirectional => "bidirectional".into(),
            Target::Model(v) => format!("model[{v}]"),
        }
    }

    /// Finite-difference step used for this target.
    pub fn eps(&self) -> f64 {
        match self {
            Target::Model(_) => MODEL_EPS,
            _ => DEFAULT_EPS,
        }
    }

    /// Every target the CLI's `all` scope covers.
    pub fn all() -> Vec<Target> {
        let mut out: Vec<Target> = Variant::ALL.iter().map(|&v| Target::Cell(v)).collect();
        out.extend([
            Target::Embedding,
            Target::Conv1d,
            Target::Dense,
            Target::Bidirectional,
            Target::Model(Variant::Lstm0),
        ]);
        out
    }
}

/// Random cell dimensions for a seed, within d ≤ 6, n ≤ 5, T ≤ 4.
pub fn cell_dims(seed: u64) -> (usize, usize, usize) {
    let mut rng = Rng::new(seed ^ 0x5eed_d135);
    (1 + rng.below(6), 1 + rng.below(5), 1 + rng.below(4))
}

/// Runs the oracle for `target` once per seed and merges the reports.
pub fn check_module(target: Target, seeds: &[u64], tol: f64) -> GradReport {
    let reports = seeds
        .iter()
        .map(|&seed| {
            let probe: Box<dyn GradProbe> = match target {
                Target::Cell(v) => {
                    let (d, n, steps) = cell_dims(seed);
                    Box::new(CellProbe::random(v, d, n, steps, seed))
                }
                Target::Embedding => Box::new(EmbeddingProbe::random(seed)),
                Target::Conv1d => Box::new(ConvProbe::random(seed)),
                Target::Dense => {
                    let act = [DenseActivation::None, DenseActivation::Relu, DenseActivation::Sigmoid]
                        [(seed % 3) as usize];
                    Box::new(DenseProbe::random(act, seed))
                }
                Target::Bidirectional => Box::new(BidirectionalProbe::random(Variant::Lstm0, seed)),
                Target::Model(v) => Box::new(ModelProbe::micro(
                    v,
                    LstmPosition::CnnThenLstm,
                    seed % 2 == 1,
                    seed,
                )),
            };
            check_probe(probe.as_ref(), &target.name(), target.eps(), tol)
        })
        .collect();
    merge(&target.name(), tol, reports)
}
