use crate::error::{Error, Result};
use crate::params::ParamSet;
use crate::rng::Rng;
use crate::tensor::{dot, Tensor};

/// Valid 1-D cross-correlation over time, stride 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1d {
    /// `F × k × e_in`.
    pub kernels: Tensor,
    /// `F`.
    pub bias: Tensor,
    /// Apply a ReLU to the output.
    pub relu: bool,
}

impl Conv1d {
    /// Glorot-uniform kernels, zero bias.
    pub fn new(filters: usize, kernel: usize, in_width: usize, relu: bool, rng: &mut Rng) -> Result<Self> {
        let fan_in = kernel * in_width;
        let fan_out = kernel * filters;
        let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
        Ok(Conv1d {
            kernels: rng.uniform(&[filters, kernel, in_width], -s, s)?,
            bias: Tensor::zeros(&[filters]),
            relu,
        })
    }

    pub fn filters(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn kernel_size(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn in_width(&self) -> usize {
        self.kernels.shape()[2]
    }

    pub fn output_len(&self, input_len: usize) -> Option<usize> {
        (input_len >= self.kernel_size()).then(|| input_len - self.kernel_size() + 1)
    }

    /// `out[t, f] = act(b[f] + Σ_j Σ_c K[f, j, c] · x[t + j, c])`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.rank() != 2 || x.cols() != self.in_width() {
            return Err(Error::shape("conv1d", x.shape(), &[0, self.in_width()]));
        }
        let out_len = self
            .output_len(x.rows())
            .ok_or_else(|| Error::shape("conv1d (input shorter than kernel)", x.shape(), self.kernels.shape()))?;
        let filters = self.filters();
        let window = self.kernel_size() * self.in_width();
        let e = self.in_width();
        let mut out = Vec::with_capacity(out_len * filters);
        for t in 0..out_len {
            // rows t..t+k are contiguous in row-major storage
            let patch = &x.data()[t * e..t * e + window];
            for (f, kernel) in self.kernels.data().chunks_exact(window).enumerate() {
                let v = self.bias.data()[f] + dot(kernel, patch);
                out.push(if self.relu { v.max(0.0) } else { v });
            }
        }
        Tensor::matrix(out_len, filters, out)
    }

    /// Needs the forward input and output (the output carries the ReLU
    /// mask).
    pub fn backward(&self, x: &Tensor, out: &Tensor, d_out: &Tensor, grads: &mut Conv1d) -> Result<Tensor> {
        if d_out.shape() != out.shape() {
            return Err(Error::shape("conv1d backward", d_out.shape(), out.shape()));
        }
        let filters = self.filters();
        let e = self.in_width();
        let window = self.kernel_size() * e;
        let mut d_x = Tensor::zeros(x.shape());
        for t in 0..out.rows() {
            let patch = &x.data()[t * e..t * e + window];
            for f in 0..filters {
                let mut g = d_out.data()[t * filters + f];
                if self.relu && out.data()[t * filters + f] <= 0.0 {
                    g = 0.0;
                }
                if g == 0.0 {
                    continue;
                }
                grads.bias.data_mut()[f] += g;
                let dk = &mut grads.kernels.data_mut()[f * window..(f + 1) * window];
                for (d, &p) in dk.iter_mut().zip(patch) {
                    *d += g * p;
                }
                let kernel = &self.kernels.data()[f * window..(f + 1) * window];
                let dx = &mut d_x.data_mut()[t * e..t * e + window];
                for (d, &k) in dx.iter_mut().zip(kernel) {
                    *d += g * k;
                }
            }
        }
        Ok(d_x)
    }

    pub fn zeros_like(&self) -> Self {
        Conv1d {
            kernels: Tensor::zeros(self.kernels.shape()),
            bias: Tensor::zeros(self.bias.shape()),
            relu: self.relu,
        }
    }
}

impl ParamSet for Conv1d {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("kernels", &self.kernels);
        f("bias", &self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("kernels", &mut self.kernels);
        f("bias", &mut self.bias);
    }

    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.kernels, &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.kernels, &mut self.bias]
    }
}

/// Non-overlapping max over windows of `pool` rows, per column. Trailing
/// rows that do not fill a window are dropped. Also returns, for every
/// output entry, the flat input index it was taken from (first occurrence
/// on ties).
pub fn maxpool1d(x: &Tensor, pool: usize) -> Result<(Tensor, Vec<usize>)> {
    if pool == 0 {
        return Err(Error::Argument("pool size must be at least 1".into()));
    }
    if x.rank() != 2 || x.rows() < pool {
        return Err(Error::shape("maxpool1d", x.shape(), &[pool, 0]));
    }
    let width = x.cols();
    let out_len = x.rows() / pool;
    let mut out = Vec::with_capacity(out_len * width);
    let mut argmax = Vec::with_capacity(out_len * width);
    for w in 0..out_len {
        for c in 0..width {
            let mut best = (w * pool) * width + c;
            for r in w * pool + 1..(w + 1) * pool {
                let idx = r * width + c;
                if x.data()[idx] > x.data()[best] {
                    best = idx;
                }
            }
            out.push(x.data()[best]);
            argmax.push(best);
        }
    }
    Ok((Tensor::matrix(out_len, width, out)?, argmax))
}

/// Routes each output gradient to the input entry it came from.
pub fn maxpool1d_backward(input_shape: &[usize], argmax: &[usize], d_out: &Tensor) -> Tensor {
    let mut d_x = Tensor::zeros(input_shape);
    for (&idx, &g) in argmax.iter().zip(d_out.data()) {
        d_x.data_mut()[idx] += g;
    }
    d_x
}
