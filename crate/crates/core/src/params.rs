//! Uniform access to the trainable tensors of a layer, cell or model.

use crate::cell::CellParams;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A collection of named trainable tensors visited in a fixed order.
///
/// Gradient containers reuse the same types as the parameters they belong
/// to, so two values of one type always visit structurally identical
/// tensors in the same order.
pub trait ParamSet {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor));

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, t| n += t.len());
        n
    }

    /// `(name, length)` for each tensor, in visiting order.
    fn layout(&self) -> Vec<(String, usize)> {
        let mut out = vec![];
        self.visit(&mut |name, t| out.push((name.to_string(), t.len())));
        out
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit(&mut |_, t| out.extend_from_slice(t.data()));
        out
    }

    fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        let total = self.num_params();
        if flat.len() != total {
            return Err(Error::Argument(format!(
                "flat parameter vector has {} entries, expected {total}",
                flat.len()
            )));
        }
        let mut offset = 0;
        self.visit_mut(&mut |_, t| {
            let len = t.len();
            t.data_mut().copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        });
        Ok(())
    }

    fn zero(&mut self) {
        self.visit_mut(&mut |_, t| t.fill(0.0));
    }

    fn tensors(&self) -> Vec<&Tensor>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;
}

impl ParamSet for CellParams {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        self.for_each_tensor(|name, t| f(&name, t));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        self.for_each_tensor_mut(|name, t| f(&name, t));
    }

    fn tensors(&self) -> Vec<&Tensor> {
        let mut out: Vec<&Tensor> = vec![];
        for gate in &self.gates {
            for t in [&gate.input, &gate.recurrent, &gate.pointwise, &gate.bias]
                .into_iter()
                .flatten()
            {
                out.push(t);
            }
        }
        out.extend([&self.cand_input, &self.cand_recurrent, &self.cand_bias]);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = vec![];
        for gate in &mut self.gates {
            for t in [
                &mut gate.input,
                &mut gate.recurrent,
                &mut gate.pointwise,
                &mut gate.bias,
            ]
            .into_iter()
            .flatten()
            {
                out.push(t);
            }
        }
        out.extend([
            &mut self.cand_input,
            &mut self.cand_recurrent,
            &mut self.cand_bias,
        ]);
        out
    }
}

/// Adds `other` into `acc` tensor by tensor.
pub fn accumulate<P: ParamSet>(acc: &mut P, other: &P) {
    let src = other.tensors();
    for (a, b) in acc.tensors_mut().into_iter().zip(src) {
        crate::tensor::add_into(a.data_mut(), b.data());
    }
}

/// Multiplies every entry by `factor`.
pub fn scale_all<P: ParamSet>(p: &mut P, factor: f64) {
    p.visit_mut(&mut |_, t| t.data_mut().iter_mut().for_each(|x| *x *= factor));
}

/// Euclidean norm over every entry.
pub fn global_norm<P: ParamSet>(p: &P) -> f64 {
    let mut sq = 0.0;
    p.visit(&mut |_, t| sq += t.data().iter().map(|x| x * x).sum::<f64>());
    sq.sqrt()
}
