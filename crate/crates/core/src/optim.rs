//! SGD, RMSprop and Adam over a flat list of parameter tensors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const RHO: f64 = 0.9;
pub const EPSILON: f64 = 1e-8;

/// Learning rates used across the experiments.
pub const LR_PRESETS: [f64; 3] = [1e-4, 1e-3, 3e-4];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Rmsprop,
    Adam,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "SGD",
            OptimizerKind::Rmsprop => "RMSprop",
            OptimizerKind::Adam => "Adam",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "rmsprop" => Ok(OptimizerKind::Rmsprop),
            "adam" => Ok(OptimizerKind::Adam),
            _ => Err(Error::Config(format!(
                "unknown optimizer {s:?}; expected sgd, rmsprop or adam"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub rho: f64,
    pub eps: f64,
    /// Rescale gradients whose global norm exceeds this.
    pub clip_norm: Option<f64>,
    /// First-moment slots (Adam).
    m: Vec<Vec<f64>>,
    /// Second-moment slots (Adam, RMSprop).
    v: Vec<Vec<f64>>,
    t: u64,
}

pub fn make_optimizer(kind: OptimizerKind, lr: f64) -> Result<Optimizer> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
    }
    Ok(Optimizer {
        kind,
        lr,
        beta1: BETA1,
        beta2: BETA2,
        rho: RHO,
        eps: EPSILON,
        clip_norm: None,
        m: vec![],
        v: vec![],
        t: 0,
    })
}

impl Optimizer {
    pub fn with_clip_norm(mut self, max_norm: f64) -> Self {
        self.clip_norm = Some(max_norm);
        self
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Number of per-parameter slot vectors currently allocated.
    pub fn slot_count(&self) -> usize {
        self.m.len() + self.v.len()
    }

    fn ensure_slots(&mut self, params: &[&mut Tensor]) -> Result<()> {
        let wants_m = self.kind == OptimizerKind::Adam;
        let wants_v = self.kind != OptimizerKind::Sgd;
        if self.t == 0 && self.v.is_empty() && self.m.is_empty() {
            let zeros = || params.iter().map(|p| vec![0.0; p.len()]).collect::<Vec<_>>();
            if wants_m {
                self.m = zeros();
            }
            if wants_v {
                self.v = zeros();
            }
        }
        let slots = if wants_v { &self.v } else { return Ok(()) };
        if slots.len() != params.len() || slots.iter().zip(params).any(|(s, p)| s.len() != p.len()) {
            return Err(Error::Argument(
                "parameter list changed shape since the optimizer was first applied".into(),
            ));
        }
        Ok(())
    }

    /// One update of every tensor in `params` from the matching `grads`.
    pub fn apply(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Argument(format!(
                "{} parameter tensors but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::shape("optimizer update", p.shape(), g.shape()));
            }
        }
        self.ensure_slots(params)?;
        self.t += 1;

        let scale = match self.clip_norm {
            Some(max) => {
                let norm = grads
                    .iter()
                    .flat_map(|g| g.data())
                    .map(|x| x * x)
                    .sum::<f64>()
                    .sqrt();
                if norm > max { max / norm } else { 1.0 }
            }
            None => 1.0,
        };

        let lr = self.lr;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (w, &gi) in p.data_mut().iter_mut().zip(g.data()) {
                        *w -= lr * gi * scale;
                    }
                }
            }
            OptimizerKind::Rmsprop => {
                let (rho, eps) = (self.rho, self.eps);
                for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.v) {
                    for ((w, &gi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(v.iter_mut()) {
                        let gi = gi * scale;
                        *vi = rho * *vi + (1.0 - rho) * gi * gi;
                        *w -= lr * gi / (vi.sqrt() + eps);
                    }
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
                let c1 = 1.0 - b1.powf(self.t as f64);
                let c2 = 1.0 - b2.powf(self.t as f64);
                for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
                    let slots = m.iter_mut().zip(v.iter_mut());
                    for ((w, &gi), (mi, vi)) in p.data_mut().iter_mut().zip(g.data()).zip(slots) {
                        let gi = gi * scale;
                        *mi = b1 * *mi + (1.0 - b1) * gi;
                        *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                        let m_hat = *mi / c1;
                        let v_hat = *vi / c2;
                        *w -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_step(kind: OptimizerKind, w: f64, g: f64) -> f64 {
        let mut opt = make_optimizer(kind, 0.001).unwrap();
        let mut p = Tensor::vector(vec![w]);
        let grad = Tensor::vector(vec![g]);
        opt.apply(&mut [&mut p], &[&grad]).unwrap();
        p.data()[0]
    }

    #[test]
    fn adam_first_step() {
        // m̂ = v̂ = 1, step = −lr / (1 + ε)
        let w = one_step(OptimizerKind::Adam, 0.0, 1.0);
        assert!((w - (-0.001 / (1.0 + 1e-8))).abs() < 1e-15);
        assert!((w + 0.000999999995).abs() < 1e-10);
    }

    #[test]
    fn rmsprop_first_step() {
        // v = 0.1, step = −0.001 / (√0.1 + ε)
        let w = one_step(OptimizerKind::Rmsprop, 0.0, 1.0);
        assert!((w + 0.0031622776).abs() < 1e-10, "{w}");
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::Rmsprop, OptimizerKind::Adam] {
            assert_eq!(one_step(kind, 0.37, 0.0), 0.37, "{kind}");
        }
    }

    #[test]
    fn presets_and_validation() {
        let adam = make_optimizer(OptimizerKind::Adam, 1e-4).unwrap();
        assert_eq!((adam.beta1, adam.beta2), (0.9, 0.999));
        for lr in LR_PRESETS {
            make_optimizer(OptimizerKind::Rmsprop, lr).unwrap();
        }
        assert!(matches!(make_optimizer(OptimizerKind::Sgd, 0.0), Err(Error::Config(_))));
        assert!(make_optimizer(OptimizerKind::Sgd, -1.0).is_err());
    }

    #[test]
    fn sgd_keeps_no_slots() {
        let mut opt = make_optimizer(OptimizerKind::Sgd, 0.1).unwrap();
        let mut p = Tensor::vector(vec![1.0, 2.0]);
        opt.apply(&mut [&mut p], &[&Tensor::vector(vec![1.0, 1.0])]).unwrap();
        assert_eq!(opt.slot_count(), 0);
        assert_eq!(opt.step_count(), 1);
        assert_eq!(p.data(), &[0.9, 1.9]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut opt = make_optimizer(OptimizerKind::Adam, 0.1).unwrap();
        let mut p = Tensor::vector(vec![1.0, 2.0]);
        let g = Tensor::vector(vec![1.0]);
        assert!(opt.apply(&mut [&mut p], &[&g]).is_err());
        assert_eq!(opt.step_count(), 0);
    }

    #[test]
    fn adam_step_bounded_by_lr() {
        let mut opt = make_optimizer(OptimizerKind::Adam, 0.01).unwrap();
        let mut p = Tensor::vector(vec![0.0]);
        let g = Tensor::vector(vec![3.7]);
        for _ in 0..200 {
            let before = p.data()[0];
            opt.apply(&mut [&mut p], &[&g]).unwrap();
            assert!((p.data()[0] - before).abs() <= 0.01 * (1.0 + 1e-9));
        }
    }

    #[test]
    fn clipping_caps_the_update() {
        let mut opt = make_optimizer(OptimizerKind::Sgd, 1.0).unwrap().with_clip_norm(5.0);
        let mut p = Tensor::vector(vec![0.0, 0.0]);
        opt.apply(&mut [&mut p], &[&Tensor::vector(vec![30.0, 40.0])]).unwrap();
        assert!((p.data()[0] + 3.0).abs() < 1e-12 && (p.data()[1] + 4.0).abs() < 1e-12);
    }

    #[test]
    fn every_kind_descends_a_quadratic() {
        // f(w) = Σ a_i (w_i − c_i)²
        let a = [1.0, 3.0, 0.5];
        let c = [2.0, -1.0, 0.3];
        let loss = |w: &[f64]| -> f64 { (0..3).map(|i| a[i] * (w[i] - c[i]).powi(2)).sum() };
        for (kind, lr) in [
            (OptimizerKind::Sgd, 0.05),
            (OptimizerKind::Rmsprop, 0.01),
            (OptimizerKind::Adam, 0.01),
        ] {
            let mut opt = make_optimizer(kind, lr).unwrap();
            let mut w = Tensor::vector(vec![0.0; 3]);
            let mut prev = loss(w.data());
            for step in 0..100 {
                let g: Vec<f64> = (0..3).map(|i| 2.0 * a[i] * (w.data()[i] - c[i])).collect();
                opt.apply(&mut [&mut w], &[&Tensor::vector(g)]).unwrap();
                let now = loss(w.data());
                assert!(now < prev, "{kind} step {step}: {now} >= {prev}");
                prev = now;
            }
        }
    }
}
