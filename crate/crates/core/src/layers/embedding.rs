use crate::error::{Error, Result};
use crate::params::ParamSet;
use crate::rng::Rng;
use crate::tensor::{add_into, Tensor};

/// Lookup table from token id to a dense row. Id 0 is padding.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    /// `V × e`.
    pub table: Tensor,
}

impl Embedding {
    /// Uniform init in `[-0.05, 0.05)`.
    pub fn new(vocab: usize, width: usize, rng: &mut Rng) -> Result<Self> {
        Ok(Embedding {
            table: rng.uniform(&[vocab, width], -0.05, 0.05)?,
        })
    }

    pub fn capacity(&self) -> usize {
        self.table.rows()
    }

    pub fn width(&self) -> usize {
        self.table.cols()
    }

    fn check_ids(&self, ids: &[usize]) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::Argument("empty token sequence".into()));
        }
        let capacity = self.capacity();
        match ids.iter().find(|&&id| id >= capacity) {
            Some(&id) => Err(Error::Lookup { id, capacity }),
            None => Ok(()),
        }
    }

    /// Row `t` of the output is `table[ids[t]]`.
    pub fn forward(&self, ids: &[usize]) -> Result<Tensor> {
        self.check_ids(ids)?;
        let mut data = Vec::with_capacity(ids.len() * self.width());
        for &id in ids {
            data.extend_from_slice(self.table.row(id));
        }
        Tensor::matrix(ids.len(), self.width(), data)
    }

    /// Scatters `d_out` rows into the gradient rows of the ids visited.
    pub fn backward(&self, ids: &[usize], d_out: &Tensor, grads: &mut Embedding) -> Result<()> {
        self.check_ids(ids)?;
        if d_out.shape() != [ids.len(), self.width()] {
            return Err(Error::shape("embedding backward", d_out.shape(), &[ids.len(), self.width()]));
        }
        for (t, &id) in ids.iter().enumerate() {
            add_into(grads.table.row_mut(id), d_out.row(t));
        }
        Ok(())
    }

    pub fn zeros_like(&self) -> Self {
        Embedding {
            table: Tensor::zeros(self.table.shape()),
        }
    }
}

impl ParamSet for Embedding {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("table", &self.table);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("table", &mut self.table);
    }

    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.table]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.table]
    }
}
