//! Dense f64 tensors with reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every operation applied to tensors created on it.
//! Calling [`Tape::backward`] on a scalar node walks the recording in
//! reverse and accumulates `d(loss)/d(node)` into every node, so leaf
//! gradients can be read back with [`Tape::grad`]. Tapes are cheap to
//! build and are meant to be dropped after each backward pass.

mod adam;
mod attention;
mod ops;

pub use adam::AdamState;
pub use attention::{multihead_attention, MhaIds};
use ops::Op;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("{op}: dimension mismatch between {lhs:?} and {rhs:?}")]
    DimensionMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: expected {expected}, got shape {shape:?}")]
    InvalidShape {
        op: &'static str,
        expected: &'static str,
        shape: Vec<usize>,
    },
    #[error("shape {shape:?} holds {expected} elements but {got} were provided")]
    DataLength {
        shape: Vec<usize>,
        expected: usize,
        got: usize,
    },
    #[error("conv1d: kernel size {0} must be odd")]
    EvenKernel(usize),
    #[error("conv1d: kernel size {k} exceeds padded input length {padded}")]
    KernelTooLong { k: usize, padded: usize },
    #[error("batchnorm: train mode needs at least 2 rows, got {0}")]
    DegenerateBatch(usize),
    #[error("backward: loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("{0}: non-finite value encountered")]
    NonFinite(&'static str),
    #[error("attention: {heads} heads do not divide model dimension {dim}")]
    HeadsDontDivide { heads: usize, dim: usize },
}

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(usize);

/// Dense row-major tensor of 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    pub requires_grad: bool,
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, TensorError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(TensorError::DataLength {
                shape,
                expected,
                got: data.len(),
            });
        }
        Ok(Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        })
    }

    /// Leaf that should receive a gradient during backward.
    pub fn param(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, TensorError> {
        let mut t = Tensor::new(shape, data)?;
        t.requires_grad = true;
        Ok(t)
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn filled(shape: Vec<usize>, value: f64) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![value; n],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
            requires_grad: false,
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Rows × cols of a 2-D tensor; panics on other ranks.
    pub fn dims2(&self) -> (usize, usize) {
        assert_eq!(self.shape.len(), 2, "dims2 on rank-{} tensor", self.shape.len());
        (self.shape[0], self.shape[1])
    }
}

struct Node {
    tensor: Tensor,
    op: Op,
}

/// Recording of a computation, in creation order.
///
/// Every node's inputs precede it, so a single reverse sweep visits each
/// node exactly once and gradients accumulate additively across fan-out.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Per-column batch statistics produced by a train-mode batchnorm call.
#[derive(Debug, Clone)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, tensor: Tensor) -> TensorId {
        self.record(tensor, Op::Leaf)
    }

    /// Leaf from raw parts; `requires_grad` marks it for gradient delivery.
    pub fn leaf_from(
        &mut self,
        shape: Vec<usize>,
        data: Vec<f64>,
        requires_grad: bool,
    ) -> Result<TensorId, TensorError> {
        let mut t = Tensor::new(shape, data)?;
        t.requires_grad = requires_grad;
        Ok(self.leaf(t))
    }

    fn record(&mut self, tensor: Tensor, op: Op) -> TensorId {
        self.nodes.push(Node { tensor, op });
        TensorId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: TensorId) -> &Tensor {
        &self.nodes[id.0].tensor
    }

    pub fn data(&self, id: TensorId) -> &[f64] {
        self.nodes[id.0].tensor.data()
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        self.nodes[id.0].tensor.shape()
    }

    /// Gradient accumulated by the last [`Tape::backward`], if any.
    pub fn grad(&self, id: TensorId) -> Option<&[f64]> {
        self.nodes[id.0].tensor.grad.as_deref()
    }

    // ── elementwise and linear ops ──────────────────────────────────────

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.check_same_shape("add", a, b)?;
        let data: Vec<f64> = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.record(Tensor::new(shape, data).unwrap(), Op::Add { a, b }))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.check_same_shape("sub", a, b)?;
        let data: Vec<f64> = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(x, y)| x - y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.record(Tensor::new(shape, data).unwrap(), Op::Sub { a, b }))
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.check_same_shape("mul", a, b)?;
        let data: Vec<f64> = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.record(Tensor::new(shape, data).unwrap(), Op::Mul { a, b }))
    }

    pub fn scale(&mut self, a: TensorId, factor: f64) -> TensorId {
        let data: Vec<f64> = self.data(a).iter().map(|x| x * factor).collect();
        let shape = self.shape(a).to_vec();
        self.record(Tensor::new(shape, data).unwrap(), Op::Scale { a, factor })
    }

    pub fn one_minus(&mut self, a: TensorId) -> TensorId {
        let data: Vec<f64> = self.data(a).iter().map(|x| 1.0 - x).collect();
        let shape = self.shape(a).to_vec();
        self.record(Tensor::new(shape, data).unwrap(), Op::OneMinus { a })
    }

    /// `a[r×c] + bias[c]` broadcast over rows.
    pub fn add_bias(&mut self, a: TensorId, bias: TensorId) -> Result<TensorId, TensorError> {
        let (rows, cols) = self.dims2_of("add_bias", a)?;
        if self.shape(bias) != [cols] {
            return Err(TensorError::DimensionMismatch {
                op: "add_bias",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(bias).to_vec(),
            });
        }
        let b = self.data(bias).to_vec();
        let mut data = self.data(a).to_vec();
        for r in 0..rows {
            for c in 0..cols {
                data[r * cols + c] += b[c];
            }
        }
        Ok(self.record(
            Tensor::new(vec![rows, cols], data).unwrap(),
            Op::AddBias { a, bias },
        ))
    }

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        let (m, k) = self.dims2_of("matmul", a)?;
        let (k2, n) = self.dims2_of("matmul", b)?;
        if k != k2 {
            return Err(TensorError::DimensionMismatch {
                op: "matmul",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let data = ops::matmul_raw(self.data(a), self.data(b), m, k, n);
        Ok(self.record(
            Tensor::new(vec![m, n], data).unwrap(),
            Op::MatMul { a, b, m, k, n },
        ))
    }

    pub fn transpose(&mut self, a: TensorId) -> Result<TensorId, TensorError> {
        let (rows, cols) = self.dims2_of("transpose", a)?;
        let src = self.data(a);
        let mut data = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                data[c * rows + r] = src[r * cols + c];
            }
        }
        Ok(self.record(
            Tensor::new(vec![cols, rows], data).unwrap(),
            Op::Transpose { a },
        ))
    }

    pub fn reshape(&mut self, a: TensorId, shape: Vec<usize>) -> Result<TensorId, TensorError> {
        let expected: usize = shape.iter().product();
        if expected != self.data(a).len() {
            return Err(TensorError::DataLength {
                shape,
                expected,
                got: self.data(a).len(),
            });
        }
        let data = self.data(a).to_vec();
        Ok(self.record(Tensor::new(shape, data).unwrap(), Op::Reshape { a }))
    }

    /// Rows `[start, start+n)` of a 2-D tensor.
    pub fn slice_rows(
        &mut self,
        a: TensorId,
        start: usize,
        n: usize,
    ) -> Result<TensorId, TensorError> {
        let (rows, cols) = self.dims2_of("slice_rows", a)?;
        if start + n > rows {
            return Err(TensorError::InvalidShape {
                op: "slice_rows",
                expected: "row range inside tensor",
                shape: vec![start, n, rows],
            });
        }
        let data = self.data(a)[start * cols..(start + n) * cols].to_vec();
        Ok(self.record(
            Tensor::new(vec![n, cols], data).unwrap(),
            Op::SliceRows { a, start },
        ))
    }

    /// Stack 2-D tensors with equal column counts on top of each other.
    pub fn concat_rows(&mut self, parts: &[TensorId]) -> Result<TensorId, TensorError> {
        assert!(!parts.is_empty(), "concat_rows needs at least one input");
        let (_, cols) = self.dims2_of("concat_rows", parts[0])?;
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let (r, c) = self.dims2_of("concat_rows", p)?;
            if c != cols {
                return Err(TensorError::DimensionMismatch {
                    op: "concat_rows",
                    lhs: self.shape(parts[0]).to_vec(),
                    rhs: self.shape(p).to_vec(),
                });
            }
            rows += r;
            data.extend_from_slice(self.data(p));
        }
        Ok(self.record(
            Tensor::new(vec![rows, cols], data).unwrap(),
            Op::ConcatRows {
                parts: parts.to_vec(),
            },
        ))
    }

    /// Concatenate 2-D tensors with equal row counts side by side.
    pub fn concat_cols(&mut self, parts: &[TensorId]) -> Result<TensorId, TensorError> {
        assert!(!parts.is_empty(), "concat_cols needs at least one input");
        let (rows, _) = self.dims2_of("concat_cols", parts[0])?;
        let mut widths = Vec::with_capacity(parts.len());
        let mut total = 0;
        for &p in parts {
            let (r, c) = self.dims2_of("concat_cols", p)?;
            if r != rows {
                return Err(TensorError::DimensionMismatch {
                    op: "concat_cols",
                    lhs: self.shape(parts[0]).to_vec(),
                    rhs: self.shape(p).to_vec(),
                });
            }
            widths.push(c);
            total += c;
        }
        let mut data = vec![0.0; rows * total];
        let mut offset = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            let src = self.data(p);
            for r in 0..rows {
                data[r * total + offset..r * total + offset + w]
                    .copy_from_slice(&src[r * w..(r + 1) * w]);
            }
            offset += w;
        }
        Ok(self.record(
            Tensor::new(vec![rows, total], data).unwrap(),
            Op::ConcatCols {
                parts: parts.to_vec(),
                widths,
            },
        ))
    }

    // ── reductions ──────────────────────────────────────────────────────

    /// Sum of all elements, as a shape-`[1]` scalar.
    pub fn sum(&mut self, a: TensorId) -> TensorId {
        let s: f64 = self.data(a).iter().sum();
        self.record(Tensor::new(vec![1], vec![s]).unwrap(), Op::Sum { a })
    }

    /// Mean over the last axis of a 2-D tensor: `[r×c] -> [r]`.
    pub fn mean_lastdim(&mut self, a: TensorId) -> Result<TensorId, TensorError> {
        let (rows, cols) = self.dims2_of("mean_lastdim", a)?;
        let src = self.data(a);
        let data: Vec<f64> = (0..rows)
            .map(|r| src[r * cols..(r + 1) * cols].iter().sum::<f64>() / cols as f64)
            .collect();
        Ok(self.record(Tensor::new(vec![rows], data).unwrap(), Op::MeanLastDim { a }))
    }

    // ── nonlinearities ──────────────────────────────────────────────────

    /// Row-wise softmax of a 2-D tensor, stabilized by max subtraction.
    pub fn softmax_lastdim(&mut self, a: TensorId) -> Result<TensorId, TensorError> {
        let (rows, cols) = self.dims2_of("softmax_lastdim", a)?;
        let src = self.data(a);
        if src.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite("softmax_lastdim"));
        }
        let mut data = vec![0.0; rows * cols];
        for r in 0..rows {
            let row = &src[r * cols..(r + 1) * cols];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for c in 0..cols {
                let e = (row[c] - max).exp();
                data[r * cols + c] = e;
                total += e;
            }
            for c in 0..cols {
                data[r * cols + c] /= total;
            }
        }
        Ok(self.record(
            Tensor::new(vec![rows, cols], data).unwrap(),
            Op::Softmax { a },
        ))
    }

    /// GELU in its tanh approximation.
    pub fn gelu(&mut self, a: TensorId) -> TensorId {
        let data: Vec<f64> = self.data(a).iter().map(|&x| ops::gelu_scalar(x)).collect();
        let shape = self.shape(a).to_vec();
        self.record(Tensor::new(shape, data).unwrap(), Op::Gelu { a })
    }

    pub fn sigmoid(&mut self, a: TensorId) -> TensorId {
        let data: Vec<f64> = self
            .data(a)
            .iter()
            .map(|&x| 1.0 / (1.0 + (-x).exp()))
            .collect();
        let shape = self.shape(a).to_vec();
        self.record(Tensor::new(shape, data).unwrap(), Op::Sigmoid { a })
    }

    // ── structured ops ──────────────────────────────────────────────────

    /// Same-length 1-D cross-correlation with zero padding.
    ///
    /// `x` is `[c_in × len]`, `kernels` is `[c_out × c_in × k]` with odd `k`,
    /// `bias` is `[c_out]`; output is `[c_out × len]`.
    pub fn conv1d(
        &mut self,
        x: TensorId,
        kernels: TensorId,
        bias: TensorId,
    ) -> Result<TensorId, TensorError> {
        let (c_in, len) = self.dims2_of("conv1d", x)?;
        let kshape = self.shape(kernels).to_vec();
        if kshape.len() != 3 || kshape[1] != c_in {
            return Err(TensorError::DimensionMismatch {
                op: "conv1d",
                lhs: self.shape(x).to_vec(),
                rhs: kshape,
            });
        }
        let (c_out, k) = (kshape[0], kshape[2]);
        if k % 2 == 0 {
            return Err(TensorError::EvenKernel(k));
        }
        let pad = (k - 1) / 2;
        if k > len + 2 * pad {
            return Err(TensorError::KernelTooLong {
                k,
                padded: len + 2 * pad,
            });
        }
        if self.shape(bias) != [c_out] {
            return Err(TensorError::DimensionMismatch {
                op: "conv1d",
                lhs: vec![c_out],
                rhs: self.shape(bias).to_vec(),
            });
        }
        let data = ops::conv1d_raw(
            self.data(x),
            self.data(kernels),
            self.data(bias),
            c_in,
            c_out,
            len,
            k,
        );
        Ok(self.record(
            Tensor::new(vec![c_out, len], data).unwrap(),
            Op::Conv1d {
                x,
                kernels,
                bias,
                c_in,
                c_out,
                len,
                k,
            },
        ))
    }

    /// Per-patch same-padded cross-correlation pooled over time, in one
    /// step: `patches[p×s]`, `kernels[cm×1×k]`, `bias[cm]` → `[p×cm]`.
    ///
    /// Equivalent to running [`Tape::conv1d`] on each patch row as a
    /// `1×s` signal and averaging each output channel over time, but
    /// collapsed into a single linear map per channel.
    pub fn patch_conv_pool(
        &mut self,
        patches: TensorId,
        kernels: TensorId,
        bias: TensorId,
    ) -> Result<TensorId, TensorError> {
        let (p, s) = self.dims2_of("patch_conv_pool", patches)?;
        let kshape = self.shape(kernels).to_vec();
        if kshape.len() != 3 || kshape[1] != 1 {
            return Err(TensorError::DimensionMismatch {
                op: "patch_conv_pool",
                lhs: vec![p, s],
                rhs: kshape,
            });
        }
        let (cm, k) = (kshape[0], kshape[2]);
        if k % 2 == 0 {
            return Err(TensorError::EvenKernel(k));
        }
        if k > 2 * s - 1 {
            return Err(TensorError::KernelTooLong { k, padded: 2 * s - 1 });
        }
        if self.shape(bias) != [cm] {
            return Err(TensorError::DimensionMismatch {
                op: "patch_conv_pool",
                lhs: vec![cm],
                rhs: self.shape(bias).to_vec(),
            });
        }
        let coeff = ops::pool_coefficients(self.data(kernels), cm, k, s);
        let patch_data = self.data(patches);
        let bias_data = self.data(bias);
        let mut out = vec![0.0; p * cm];
        for row in 0..p {
            for c in 0..cm {
                let mut acc = bias_data[c];
                let wrow = &coeff[c * s..(c + 1) * s];
                let prow = &patch_data[row * s..(row + 1) * s];
                for j in 0..s {
                    acc += wrow[j] * prow[j];
                }
                out[row * cm + c] = acc;
            }
        }
        Ok(self.record(
            Tensor::new(vec![p, cm], out).unwrap(),
            Op::PatchConvPool {
                patches,
                kernels,
                bias,
                p,
                s,
                cm,
                k,
            },
        ))
    }

    /// Train-mode batch normalization of `x[n×c]` over the row axis.
    ///
    /// Normalizes with the biased batch variance and returns the batch
    /// statistics so the caller can fold them into running estimates.
    pub fn batchnorm_train(
        &mut self,
        x: TensorId,
        gamma: TensorId,
        beta: TensorId,
        eps: f64,
    ) -> Result<(TensorId, BatchStats), TensorError> {
        let (n, c) = self.dims2_of("batchnorm", x)?;
        if n < 2 {
            return Err(TensorError::DegenerateBatch(n));
        }
        self.check_bn_params(gamma, beta, c)?;
        let src = self.data(x);
        let mut mean = vec![0.0; c];
        let mut var = vec![0.0; c];
        for col in 0..c {
            let mut s = 0.0;
            for row in 0..n {
                s += src[row * c + col];
            }
            mean[col] = s / n as f64;
            let mut v = 0.0;
            for row in 0..n {
                let d = src[row * c + col] - mean[col];
                v += d * d;
            }
            var[col] = v / n as f64;
        }
        let g = self.data(gamma);
        let b = self.data(beta);
        let mut data = vec![0.0; n * c];
        for col in 0..c {
            let inv = 1.0 / (var[col] + eps).sqrt();
            for row in 0..n {
                data[row * c + col] = (src[row * c + col] - mean[col]) * inv * g[col] + b[col];
            }
        }
        let stats = BatchStats {
            mean: mean.clone(),
            var: var.clone(),
        };
        let id = self.record(
            Tensor::new(vec![n, c], data).unwrap(),
            Op::BatchNormTrain {
                x,
                gamma,
                beta,
                mean,
                var,
                eps,
            },
        );
        Ok((id, stats))
    }

    /// Eval-mode batch normalization using fixed running statistics.
    pub fn batchnorm_eval(
        &mut self,
        x: TensorId,
        gamma: TensorId,
        beta: TensorId,
        running_mean: &[f64],
        running_var: &[f64],
        eps: f64,
    ) -> Result<TensorId, TensorError> {
        let (n, c) = self.dims2_of("batchnorm", x)?;
        self.check_bn_params(gamma, beta, c)?;
        if running_mean.len() != c || running_var.len() != c {
            return Err(TensorError::DimensionMismatch {
                op: "batchnorm",
                lhs: vec![c],
                rhs: vec![running_mean.len(), running_var.len()],
            });
        }
        let src = self.data(x);
        let g = self.data(gamma);
        let b = self.data(beta);
        let mut data = vec![0.0; n * c];
        for col in 0..c {
            let inv = 1.0 / (running_var[col] + eps).sqrt();
            for row in 0..n {
                data[row * c + col] =
                    (src[row * c + col] - running_mean[col]) * inv * g[col] + b[col];
            }
        }
        Ok(self.record(
            Tensor::new(vec![n, c], data).unwrap(),
            Op::BatchNormEval {
                x,
                gamma,
                beta,
                mean: running_mean.to_vec(),
                var: running_var.to_vec(),
                eps,
            },
        ))
    }

    // ── backward ────────────────────────────────────────────────────────

    /// Reverse sweep from a scalar loss; every node receives its gradient.
    pub fn backward(&mut self, loss: TensorId) -> Result<(), TensorError> {
        if self.data(loss).len() != 1 {
            return Err(TensorError::NonScalarLoss(self.shape(loss).to_vec()));
        }
        for node in &mut self.nodes {
            node.tensor.grad = Some(vec![0.0; node.tensor.len()]);
        }
        self.nodes[loss.0].tensor.grad = Some(vec![1.0]);
        for i in (0..self.nodes.len()).rev() {
            ops::backward_step(&mut self.nodes, i);
        }
        Ok(())
    }

    // ── helpers ─────────────────────────────────────────────────────────

    fn dims2_of(&self, op: &'static str, id: TensorId) -> Result<(usize, usize), TensorError> {
        let shape = self.shape(id);
        if shape.len() != 2 {
            return Err(TensorError::InvalidShape {
                op,
                expected: "2-D tensor",
                shape: shape.to_vec(),
            });
        }
        Ok((shape[0], shape[1]))
    }

    fn check_same_shape(
        &self,
        op: &'static str,
        a: TensorId,
        b: TensorId,
    ) -> Result<(), TensorError> {
        if self.shape(a) != self.shape(b) {
            return Err(TensorError::DimensionMismatch {
                op,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    fn check_bn_params(
        &self,
        gamma: TensorId,
        beta: TensorId,
        c: usize,
    ) -> Result<(), TensorError> {
        if self.shape(gamma) != [c] || self.shape(beta) != [c] {
            return Err(TensorError::DimensionMismatch {
                op: "batchnorm",
                lhs: vec![c],
                rhs: self.shape(gamma).to_vec(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
