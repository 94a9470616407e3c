use serde::{Deserialize, Serialize};

use crate::activation::{relu, sigmoid};
use crate::error::{Error, Result};
use crate::params::ParamSet;
use crate::rng::Rng;
use crate::tensor::{matvec_acc, matvec_t_acc, outer_acc, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DenseActivation {
    None,
    Relu,
    Sigmoid,
}

/// `y = act(V · x + d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `out × in`.
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: DenseActivation,
}

impl Dense {
    /// Glorot-uniform weights, zero bias.
    pub fn new(inputs: usize, outputs: usize, activation: DenseActivation, rng: &mut Rng) -> Result<Self> {
        let s = (6.0 / (inputs + outputs) as f64).sqrt();
        Ok(Dense {
            weight: rng.uniform(&[outputs, inputs], -s, s)?,
            bias: Tensor::zeros(&[outputs]),
            activation,
        })
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.shape() != [self.inputs()] {
            return Err(Error::shape("dense", x.shape(), self.weight.shape()));
        }
        let mut y = self.bias.data().to_vec();
        matvec_acc(self.weight.data(), self.inputs(), x.data(), &mut y);
        for v in &mut y {
            *v = match self.activation {
                DenseActivation::None => *v,
                DenseActivation::Relu => relu(*v),
                DenseActivation::Sigmoid => sigmoid(*v),
            };
        }
        Ok(Tensor::vector(y))
    }

    /// `out` is the forward output; it determines the activation derivative.
    pub fn backward(&self, x: &Tensor, out: &Tensor, d_out: &Tensor, grads: &mut Dense) -> Result<Tensor> {
        if d_out.shape() != [self.outputs()] || out.shape() != d_out.shape() {
            return Err(Error::shape("dense backward", d_out.shape(), &[self.outputs()]));
        }
        let d_pre: Vec<f64> = out
            .data()
            .iter()
            .zip(d_out.data())
            .map(|(&y, &g)| match self.activation {
                DenseActivation::None => g,
                DenseActivation::Relu if y > 0.0 => g,
                DenseActivation::Relu => 0.0,
                DenseActivation::Sigmoid => g * y * (1.0 - y),
            })
            .collect();
        outer_acc(grads.weight.data_mut(), &d_pre, x.data());
        for (b, g) in grads.bias.data_mut().iter_mut().zip(&d_pre) {
            *b += g;
        }
        let mut d_x = vec![0.0; self.inputs()];
        matvec_t_acc(self.weight.data(), self.inputs(), &d_pre, &mut d_x);
        Ok(Tensor::vector(d_x))
    }

    pub fn zeros_like(&self) -> Self {
        Dense {
            weight: Tensor::zeros(self.weight.shape()),
            bias: Tensor::zeros(self.bias.shape()),
            activation: self.activation,
        }
    }
}

impl ParamSet for Dense {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("weight", &self.weight);
        f("bias", &self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("weight", &mut self.weight);
        f("bias", &mut self.bias);
    }

    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.weight, &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}
