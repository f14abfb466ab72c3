//! Multilayer perceptron with tanh hidden layers and a linear output layer,
//! plus the reverse pass used by every loss in the crate.
//!
//! Parameters live in one flat buffer. Layer `l` occupies a weight block of
//! shape `[out x in]` (row-major) followed by its `[out]` bias. Flat storage
//! keeps Adam, SI and checkpointing layout-agnostic.

use serde::{Deserialize, Serialize};

use super::rng::RngKey;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    dims: Vec<usize>,
    data: Vec<f64>,
}

/// Layer activations recorded by [`MlpParams::forward_cached`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    batch: usize,
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("cache holds at least the input")
    }
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::config("an MLP needs at least input and output widths"));
    }
    if dims.contains(&0) {
        return Err(Error::config(format!("zero-width layer in {dims:?}")));
    }
    Ok(())
}

/// `c[m x n] (+)= a[m x k] * b[k x n]` with arbitrary strides.
#[allow(clippy::too_many_arguments)]
#[inline]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    beta: f64,
    c: &mut [f64],
    rsc: isize,
    csc: isize,
) {
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: callers pass slices whose extents cover every strided index
    // touched for the given (m, k, n) and strides; `c` does not alias a or b.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            rsc,
            csc,
        );
    }
}

impl MlpParams {
    /// Uniform fan-based initialization in `[-sqrt(6/(in+out)), +sqrt(6/(in+out))]`,
    /// zero biases.
    pub fn init(dims: &[usize], key: RngKey) -> Result<Self> {
        check_dims(dims)?;
        let mut params = Self::zeros(dims)?;
        let mut stream = key.stream();
        for l in 0..params.num_layers() {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let (w, _) = params.layer_mut(l);
            for v in w.iter_mut() {
                *v = stream.uniform_range(-bound, bound);
            }
        }
        Ok(params)
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        Ok(MlpParams {
            dims: dims.to_vec(),
            data: vec![0.0; param_count(dims)],
        })
    }

    pub fn from_flat(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        check_dims(dims)?;
        let n = param_count(dims);
        if data.len() != n {
            return Err(Error::config(format!(
                "MLP {dims:?} has {n} parameters, got {}",
                data.len()
            )));
        }
        Ok(MlpParams {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn layer_offset(&self, l: usize) -> usize {
        param_count(&self.dims[..=l])
    }

    /// `(weight [out x in], bias [out])` of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let off = self.layer_offset(l);
        let (i, o) = (self.dims[l], self.dims[l + 1]);
        let (w, rest) = self.data[off..].split_at(i * o);
        (w, &rest[..o])
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let off = self.layer_offset(l);
        let (i, o) = (self.dims[l], self.dims[l + 1]);
        let (w, rest) = self.data[off..].split_at_mut(i * o);
        (w, &mut rest[..o])
    }

    /// Checked batched forward pass: `[batch x in] -> [batch x out]`.
    pub fn forward(&self, inputs: &Tensor) -> Result<Tensor> {
        if inputs.shape().len() != 2 || inputs.cols() != self.input_dim() {
            return Err(Error::config(format!(
                "input shape {:?} does not match MLP input width {}",
                inputs.shape(),
                self.input_dim()
            )));
        }
        let batch = inputs.rows();
        let out = self.forward_rows(inputs.data(), batch);
        Tensor::new(vec![batch, self.output_dim()], out)
    }

    /// Forward pass over a flat row-major buffer. Panics on width mismatch.
    pub fn forward_rows(&self, inputs: &[f64], batch: usize) -> Vec<f64> {
        let mut cache = self.forward_cached(inputs, batch);
        cache.acts.pop().unwrap()
    }

    pub fn forward_cached(&self, inputs: &[f64], batch: usize) -> ForwardCache {
        assert_eq!(inputs.len(), batch * self.input_dim(), "MLP input width");
        let mut acts = Vec::with_capacity(self.dims.len());
        acts.push(inputs.to_vec());
        let last = self.num_layers() - 1;
        for l in 0..self.num_layers() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let (w, b) = self.layer(l);
            let mut z = Vec::with_capacity(batch * fan_out);
            for _ in 0..batch {
                z.extend_from_slice(b);
            }
            let x = &acts[l];
            // z += x * W^T
            gemm(
                batch,
                fan_in,
                fan_out,
                x,
                fan_in as isize,
                1,
                w,
                1,
                fan_in as isize,
                1.0,
                &mut z,
                fan_out as isize,
                1,
            );
            if l != last {
                for v in z.iter_mut() {
                    *v = v.tanh();
                }
            }
            acts.push(z);
        }
        ForwardCache { batch, acts }
    }

    /// Reverse pass. Accumulates `dL/dparams` into `grad` (same layout as the
    /// flat parameter buffer) and optionally writes `dL/dinput`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        d_out: &[f64],
        grad: &mut [f64],
        d_input: Option<&mut [f64]>,
    ) {
        let batch = cache.batch;
        assert_eq!(d_out.len(), batch * self.output_dim(), "output gradient width");
        assert_eq!(grad.len(), self.num_params(), "gradient buffer size");
        let last = self.num_layers() - 1;
        let mut delta = d_out.to_vec();
        let mut d_input = d_input;
        for l in (0..self.num_layers()).rev() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            if l != last {
                for (d, a) in delta.iter_mut().zip(&cache.acts[l + 1]) {
                    *d *= 1.0 - a * a;
                }
            }
            let off = self.layer_offset(l);
            let (gw, rest) = grad[off..].split_at_mut(fan_in * fan_out);
            let gb = &mut rest[..fan_out];
            // dW += delta^T * a_prev
            gemm(
                fan_out,
                batch,
                fan_in,
                &delta,
                1,
                fan_out as isize,
                &cache.acts[l],
                fan_in as isize,
                1,
                1.0,
                gw,
                fan_in as isize,
                1,
            );
            for row in delta.chunks_exact(fan_out) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            let need_prev = l > 0 || d_input.is_some();
            if need_prev {
                let (w, _) = self.layer(l);
                let mut prev = vec![0.0; batch * fan_in];
                gemm(
                    batch,
                    fan_out,
                    fan_in,
                    &delta,
                    fan_out as isize,
                    1,
                    w,
                    fan_in as isize,
                    1,
                    0.0,
                    &mut prev,
                    fan_in as isize,
                    1,
                );
                if l == 0 {
                    if let Some(d) = d_input.take() {
                        d.copy_from_slice(&prev);
                    }
                } else {
                    delta = prev;
                }
            }
        }
    }
}

/// Checked forward pass as a free function.
pub fn mlp_forward(params: &MlpParams, inputs: &Tensor) -> Result<Tensor> {
    params.forward(inputs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_output_bias() {
        let mut p = MlpParams::zeros(&[3, 4, 2]).unwrap();
        p.layer_mut(1).1.copy_from_slice(&[0.5, -1.5]);
        let x = Tensor::from_rows(&[vec![1.0, 2.0, 3.0], vec![-4.0, 0.0, 9.0]]).unwrap();
        let y = p.forward(&x).unwrap();
        assert_eq!(y.row(0), &[0.5, -1.5]);
        assert_eq!(y.row(1), &[0.5, -1.5]);
    }

    #[test]
    fn single_affine_layer() {
        let p = MlpParams::from_flat(&[1, 1], vec![2.0, 1.0]).unwrap();
        let y = p.forward(&Tensor::from_rows(&[vec![3.0]]).unwrap()).unwrap();
        assert_eq!(y.data(), &[7.0]);
    }

    #[test]
    fn identical_rows_identical_outputs() {
        let p = MlpParams::init(&[5, 16, 16, 3], RngKey::from_seed(4)).unwrap();
        let row = vec![0.1, -0.3, 0.7, 2.0, -1.0];
        let y = p
            .forward(&Tensor::from_rows(&[row.clone(), row]).unwrap())
            .unwrap();
        assert_eq!(y.row(0), y.row(1));
    }

    #[test]
    fn width_mismatch_is_config_error() {
        let p = MlpParams::zeros(&[3, 2]).unwrap();
        let x = Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(p.forward(&x), Err(Error::Config(_))));
        assert!(MlpParams::from_flat(&[3, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn init_respects_fan_bound_and_zero_bias() {
        let p = MlpParams::init(&[8, 32, 2], RngKey::from_seed(1)).unwrap();
        let bound = (6.0f64 / 40.0).sqrt();
        let (w, b) = p.layer(0);
        assert!(w.iter().all(|v| v.abs() <= bound));
        assert!(b.iter().all(|&v| v == 0.0));
        assert_eq!(p.num_params(), 8 * 32 + 32 + 32 * 2 + 2);
    }

    #[test]
    fn row_independence_of_batched_forward() {
        let p = MlpParams::init(&[4, 8, 2], RngKey::from_seed(2)).unwrap();
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..4).map(|j| (i * 4 + j) as f64 * 0.1 - 0.7).collect())
            .collect();
        let all = p.forward(&Tensor::from_rows(&rows).unwrap()).unwrap();
        for (i, r) in rows.iter().enumerate() {
            let one = p.forward(&Tensor::from_rows(std::slice::from_ref(r)).unwrap()).unwrap();
            for (a, b) in one.data().iter().zip(all.row(i)) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }
}
