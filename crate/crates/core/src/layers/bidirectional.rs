use crate::cell::{self, CellParams, CellState, InitScheme, StepCache, Variant};
use crate::error::{Error, Result};
use crate::params::ParamSet;
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Two independent cells, one reading the sequence forwards and one
/// reading it backwards. Output row `t` is `[h_fwd(t), h_bwd(t)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bidirectional {
    pub forward: CellParams,
    pub backward: CellParams,
}

#[derive(Clone, Debug)]
pub struct BidirectionalCache {
    forward: Vec<StepCache>,
    backward: Vec<StepCache>,
}

fn reversed_rows(x: &Tensor) -> Tensor {
    let rows: Vec<Vec<f64>> = (0..x.rows()).rev().map(|t| x.row(t).to_vec()).collect();
    Tensor::from_rows(&rows).expect("same widths")
}

impl Bidirectional {
    pub fn new(variant: Variant, d: usize, n: usize, rng: &mut Rng, scheme: InitScheme) -> Result<Self> {
        Ok(Bidirectional {
            forward: cell::init_params(variant, d, n, rng, scheme)?,
            backward: cell::init_params(variant, d, n, rng, scheme)?,
        })
    }

    pub fn from_pair(forward: CellParams, backward: CellParams) -> Result<Self> {
        if forward.hidden_dim != backward.hidden_dim {
            return Err(Error::Config(format!(
                "bidirectional halves need equal hidden widths, got {} and {}",
                forward.hidden_dim, backward.hidden_dim
            )));
        }
        if forward.input_dim != backward.input_dim {
            return Err(Error::Config(format!(
                "bidirectional halves need equal input widths, got {} and {}",
                forward.input_dim, backward.input_dim
            )));
        }
        Ok(Bidirectional { forward, backward })
    }

    pub fn hidden_dim(&self) -> usize {
        self.forward.hidden_dim
    }

    pub fn output_width(&self) -> usize {
        2 * self.hidden_dim()
    }

    /// `T × d` in, `T × 2n` out.
    pub fn forward(&self, xs: &Tensor) -> Result<(Tensor, BidirectionalCache)> {
        let n = self.hidden_dim();
        if self.backward.hidden_dim != n {
            return Err(Error::Config("bidirectional halves differ in hidden width".into()));
        }
        let (h_fwd, c_fwd) = cell::sequence_forward(&self.forward, xs, &CellState::zeros(n))?;
        let (h_bwd, c_bwd) =
            cell::sequence_forward(&self.backward, &reversed_rows(xs), &CellState::zeros(n))?;
        let steps = xs.rows();
        let mut out = Vec::with_capacity(steps * 2 * n);
        for t in 0..steps {
            out.extend_from_slice(h_fwd.row(t));
            out.extend_from_slice(h_bwd.row(steps - 1 - t));
        }
        Ok((
            Tensor::matrix(steps, 2 * n, out)?,
            BidirectionalCache {
                forward: c_fwd,
                backward: c_bwd,
            },
        ))
    }

    pub fn backward(&self, cache: &BidirectionalCache, d_out: &Tensor, grads: &mut Bidirectional) -> Result<Tensor> {
        let n = self.hidden_dim();
        let steps = cache.forward.len();
        if d_out.shape() != [steps, 2 * n] {
            return Err(Error::shape("bidirectional backward", d_out.shape(), &[steps, 2 * n]));
        }
        let mut d_fwd = Vec::with_capacity(steps * n);
        let mut d_bwd = Vec::with_capacity(steps * n);
        for t in 0..steps {
            d_fwd.extend_from_slice(&d_out.row(t)[..n]);
        }
        for t in (0..steps).rev() {
            d_bwd.extend_from_slice(&d_out.row(t)[n..]);
        }
        let (g_fwd, dx_fwd, _) =
            cell::sequence_backward(&self.forward, &cache.forward, &Tensor::matrix(steps, n, d_fwd)?)?;
        let (g_bwd, dx_bwd_rev, _) =
            cell::sequence_backward(&self.backward, &cache.backward, &Tensor::matrix(steps, n, d_bwd)?)?;
        crate::params::accumulate(&mut grads.forward, &g_fwd);
        crate::params::accumulate(&mut grads.backward, &g_bwd);
        dx_fwd.add(&reversed_rows(&dx_bwd_rev))
    }

    pub fn zeros_like(&self) -> Self {
        Bidirectional {
            forward: self.forward.zeros_like(),
            backward: self.backward.zeros_like(),
        }
    }
}

/// Free-function form of [`Bidirectional::forward`] over a parameter pair.
pub fn bidirectional_forward(fwd: &CellParams, bwd: &CellParams, xs: &Tensor) -> Result<Tensor> {
    let layer = Bidirectional::from_pair(fwd.clone(), bwd.clone())?;
    Ok(layer.forward(xs)?.0)
}

impl ParamSet for Bidirectional {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        self.forward.visit(&mut |name, t| f(&format!("fwd.{name}"), t));
        self.backward.visit(&mut |name, t| f(&format!("bwd.{name}"), t));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        self.forward.visit_mut(&mut |name, t| f(&format!("fwd.{name}"), t));
        self.backward.visit_mut(&mut |name, t| f(&format!("bwd.{name}"), t));
    }

    fn tensors(&self) -> Vec<&Tensor> {
        let mut out = self.forward.tensors();
        out.extend(self.backward.tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.forward.tensors_mut();
        out.extend(self.backward.tensors_mut());
        out
    }
}
