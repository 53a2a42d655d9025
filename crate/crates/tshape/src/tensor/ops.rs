//! Recorded operations and their backward rules.

use super::{Node, TensorId};

#[derive(Clone)]
pub(super) enum Op {
    Leaf,
    Add {
        a: TensorId,
        b: TensorId,
    },
    Sub {
        a: TensorId,
        b: TensorId,
    },
    Mul {
        a: TensorId,
        b: TensorId,
    },
    Scale {
        a: TensorId,
        factor: f64,
    },
    OneMinus {
        a: TensorId,
    },
    AddBias {
        a: TensorId,
        bias: TensorId,
    },
    MatMul {
        a: TensorId,
        b: TensorId,
        m: usize,
        k: usize,
        n: usize,
    },
    Transpose {
        a: TensorId,
    },
    Reshape {
        a: TensorId,
    },
    SliceRows {
        a: TensorId,
        start: usize,
    },
    ConcatRows {
        parts: Vec<TensorId>,
    },
    ConcatCols {
        parts: Vec<TensorId>,
        widths: Vec<usize>,
    },
    Sum {
        a: TensorId,
    },
    MeanLastDim {
        a: TensorId,
    },
    Softmax {
        a: TensorId,
    },
    Gelu {
        a: TensorId,
    },
    Sigmoid {
        a: TensorId,
    },
    Conv1d {
        x: TensorId,
        kernels: TensorId,
        bias: TensorId,
        c_in: usize,
        c_out: usize,
        len: usize,
        k: usize,
    },
    PatchConvPool {
        patches: TensorId,
        kernels: TensorId,
        bias: TensorId,
        p: usize,
        s: usize,
        cm: usize,
        k: usize,
    },
    BatchNormTrain {
        x: TensorId,
        gamma: TensorId,
        beta: TensorId,
        mean: Vec<f64>,
        var: Vec<f64>,
        eps: f64,
    },
    BatchNormEval {
        x: TensorId,
        gamma: TensorId,
        beta: TensorId,
        mean: Vec<f64>,
        var: Vec<f64>,
        eps: f64,
    },
}

pub(super) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += av * brow[j];
            }
        }
    }
    out
}

pub(super) fn conv1d_raw(
    x: &[f64],
    kernels: &[f64],
    bias: &[f64],
    c_in: usize,
    c_out: usize,
    len: usize,
    k: usize,
) -> Vec<f64> {
    let pad = (k - 1) / 2;
    let mut out = vec![0.0; c_out * len];
    for o in 0..c_out {
        for t in 0..len {
            let mut acc = bias[o];
            for c in 0..c_in {
                for tap in 0..k {
                    let src = t + tap;
                    if src < pad || src - pad >= len {
                        continue;
                    }
                    acc += kernels[(o * c_in + c) * k + tap] * x[c * len + src - pad];
                }
            }
            out[o * len + t] = acc;
        }
    }
    out
}

/// Weight of input position `j` in the time-pooled output of channel `c`:
/// the sum of the kernel taps that reach `j` under same padding, divided
/// by the signal length. Pooling a same-padded cross-correlation over time
/// is exactly a linear map with these coefficients.
pub(super) fn pool_coefficients(kernels: &[f64], cm: usize, k: usize, s: usize) -> Vec<f64> {
    let pad = (k as isize - 1) / 2;
    let mut coeff = vec![0.0; cm * s];
    for c in 0..cm {
        for j in 0..s as isize {
            let mut acc = 0.0;
            for tap in 0..k as isize {
                // output positions t with t + tap - pad == j
                let t = j - tap + pad;
                if t >= 0 && t < s as isize {
                    acc += kernels[c * k + tap as usize];
                }
            }
            coeff[c * s + j as usize] = acc / s as f64;
        }
    }
    coeff
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

pub(super) fn gelu_scalar(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad_scalar(x: f64) -> f64 {
    let inner = GELU_C * (x + 0.044715 * x * x * x);
    let t = inner.tanh();
    let sech2 = 1.0 - t * t;
    let d_inner = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
    0.5 * (1.0 + t) + 0.5 * x * sech2 * d_inner
}

fn accumulate(nodes: &mut [Node], id: TensorId, delta: &[f64]) {
    let grad = nodes[id.0]
        .tensor
        .grad
        .as_mut()
        .expect("grad buffers allocated before backward sweep");
    for (g, d) in grad.iter_mut().zip(delta) {
        *g += d;
    }
}

/// Propagate node `i`'s gradient to its inputs.
pub(super) fn backward_step(nodes: &mut Vec<Node>, i: usize) {
    let grad = match nodes[i].tensor.grad.clone() {
        Some(g) => g,
        None => return,
    };
    let op = nodes[i].op.clone();
    match op {
        Op::Leaf => {}
        Op::Add { a, b } => {
            accumulate(nodes, a, &grad);
            accumulate(nodes, b, &grad);
        }
        Op::Sub { a, b } => {
            accumulate(nodes, a, &grad);
            let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
            accumulate(nodes, b, &neg);
        }
        Op::Mul { a, b } => {
            let da: Vec<f64> = grad
                .iter()
                .zip(nodes[b.0].tensor.data())
                .map(|(g, y)| g * y)
                .collect();
            let db: Vec<f64> = grad
                .iter()
                .zip(nodes[a.0].tensor.data())
                .map(|(g, x)| g * x)
                .collect();
            accumulate(nodes, a, &da);
            accumulate(nodes, b, &db);
        }
        Op::Scale { a, factor } => {
            let da: Vec<f64> = grad.iter().map(|g| g * factor).collect();
            accumulate(nodes, a, &da);
        }
        Op::OneMinus { a } => {
            let da: Vec<f64> = grad.iter().map(|g| -g).collect();
            accumulate(nodes, a, &da);
        }
        Op::AddBias { a, bias } => {
            accumulate(nodes, a, &grad);
            let cols = nodes[bias.0].tensor.len();
            let mut db = vec![0.0; cols];
            for (idx, g) in grad.iter().enumerate() {
                db[idx % cols] += g;
            }
            accumulate(nodes, bias, &db);
        }
        Op::MatMul { a, b, m, k, n } => {
            // dA = G·Bᵀ, dB = Aᵀ·G
            let b_data = nodes[b.0].tensor.data();
            let mut bt = vec![0.0; k * n];
            for r in 0..k {
                for c in 0..n {
                    bt[c * k + r] = b_data[r * n + c];
                }
            }
            let da = matmul_raw(&grad, &bt, m, n, k);
            let a_data = nodes[a.0].tensor.data();
            let mut at = vec![0.0; m * k];
            for r in 0..m {
                for c in 0..k {
                    at[c * m + r] = a_data[r * k + c];
                }
            }
            let db = matmul_raw(&at, &grad, k, m, n);
            accumulate(nodes, a, &da);
            accumulate(nodes, b, &db);
        }
        Op::Transpose { a } => {
            let out_shape = nodes[i].tensor.shape().to_vec();
            let (rows, cols) = (out_shape[0], out_shape[1]);
            let mut da = vec![0.0; grad.len()];
            for r in 0..rows {
                for c in 0..cols {
                    da[c * rows + r] = grad[r * cols + c];
                }
            }
            accumulate(nodes, a, &da);
        }
        Op::Reshape { a } => {
            accumulate(nodes, a, &grad);
        }
        Op::SliceRows { a, start } => {
            let cols = nodes[a.0].tensor.shape()[1];
            let mut da = vec![0.0; nodes[a.0].tensor.len()];
            da[start * cols..start * cols + grad.len()].copy_from_slice(&grad);
            accumulate(nodes, a, &da);
        }
        Op::ConcatRows { parts } => {
            let mut offset = 0;
            for p in parts {
                let n = nodes[p.0].tensor.len();
                let slice = grad[offset..offset + n].to_vec();
                accumulate(nodes, p, &slice);
                offset += n;
            }
        }
        Op::ConcatCols { parts, widths } => {
            let total: usize = widths.iter().sum();
            let rows = grad.len() / total;
            let mut offset = 0;
            for (p, w) in parts.into_iter().zip(widths) {
                let mut dp = vec![0.0; rows * w];
                for r in 0..rows {
                    dp[r * w..(r + 1) * w]
                        .copy_from_slice(&grad[r * total + offset..r * total + offset + w]);
                }
                accumulate(nodes, p, &dp);
                offset += w;
            }
        }
        Op::Sum { a } => {
            let da = vec![grad[0]; nodes[a.0].tensor.len()];
            accumulate(nodes, a, &da);
        }
        Op::MeanLastDim { a } => {
            let (rows, cols) = nodes[a.0].tensor.dims2();
            let mut da = vec![0.0; rows * cols];
            for r in 0..rows {
                let g = grad[r] / cols as f64;
                for c in 0..cols {
                    da[r * cols + c] = g;
                }
            }
            accumulate(nodes, a, &da);
        }
        Op::Softmax { a } => {
            // row-wise Jacobian-vector product: dx = s ⊙ (g − ⟨g, s⟩)
            let out = nodes[i].tensor.data().to_vec();
            let (rows, cols) = nodes[i].tensor.dims2();
            let mut da = vec![0.0; rows * cols];
            for r in 0..rows {
                let s = &out[r * cols..(r + 1) * cols];
                let g = &grad[r * cols..(r + 1) * cols];
                let dot: f64 = s.iter().zip(g).map(|(x, y)| x * y).sum();
                for c in 0..cols {
                    da[r * cols + c] = s[c] * (g[c] - dot);
                }
            }
            accumulate(nodes, a, &da);
        }
        Op::Gelu { a } => {
            let da: Vec<f64> = grad
                .iter()
                .zip(nodes[a.0].tensor.data())
                .map(|(g, &x)| g * gelu_grad_scalar(x))
                .collect();
            accumulate(nodes, a, &da);
        }
        Op::Sigmoid { a } => {
            let da: Vec<f64> = grad
                .iter()
                .zip(nodes[i].tensor.data())
                .map(|(g, &s)| g * s * (1.0 - s))
                .collect();
            accumulate(nodes, a, &da);
        }
        Op::Conv1d {
            x,
            kernels,
            bias,
            c_in,
            c_out,
            len,
            k,
        } => {
            let pad = (k - 1) / 2;
            let x_data = nodes[x.0].tensor.data().to_vec();
            let k_data = nodes[kernels.0].tensor.data().to_vec();
            let mut dx = vec![0.0; c_in * len];
            let mut dk = vec![0.0; c_out * c_in * k];
            let mut db = vec![0.0; c_out];
            for o in 0..c_out {
                for t in 0..len {
                    let g = grad[o * len + t];
                    if g == 0.0 {
                        continue;
                    }
                    db[o] += g;
                    for c in 0..c_in {
                        for tap in 0..k {
                            let src = t + tap;
                            if src < pad || src - pad >= len {
                                continue;
                            }
                            let xi = c * len + src - pad;
                            dk[(o * c_in + c) * k + tap] += g * x_data[xi];
                            dx[xi] += g * k_data[(o * c_in + c) * k + tap];
                        }
                    }
                }
            }
            accumulate(nodes, x, &dx);
            accumulate(nodes, kernels, &dk);
            accumulate(nodes, bias, &db);
        }
        Op::PatchConvPool {
            patches,
            kernels,
            bias,
            p,
            s,
            cm,
            k,
        } => {
            // grad is [p × cm]; forward was patches · coeffᵀ + bias
            let patch_data = nodes[patches.0].tensor.data().to_vec();
            let kernel_data = nodes[kernels.0].tensor.data().to_vec();
            let coeff = pool_coefficients(&kernel_data, cm, k, s);
            let mut d_patches = vec![0.0; p * s];
            let mut d_coeff = vec![0.0; cm * s];
            let mut d_bias = vec![0.0; cm];
            for row in 0..p {
                for c in 0..cm {
                    let g = grad[row * cm + c];
                    if g == 0.0 {
                        continue;
                    }
                    d_bias[c] += g;
                    for j in 0..s {
                        d_patches[row * s + j] += g * coeff[c * s + j];
                        d_coeff[c * s + j] += g * patch_data[row * s + j];
                    }
                }
            }
            // chain through coeff[c,j] = Σ_valid kernels[c,tap] / s
            let pad = (k as isize - 1) / 2;
            let mut d_kernels = vec![0.0; cm * k];
            for c in 0..cm {
                for j in 0..s as isize {
                    let dc = d_coeff[c * s + j as usize] / s as f64;
                    if dc == 0.0 {
                        continue;
                    }
                    for tap in 0..k as isize {
                        let t = j - tap + pad;
                        if t >= 0 && t < s as isize {
                            d_kernels[c * k + tap as usize] += dc;
                        }
                    }
                }
            }
            accumulate(nodes, patches, &d_patches);
            accumulate(nodes, kernels, &d_kernels);
            accumulate(nodes, bias, &d_bias);
        }
        Op::BatchNormTrain {
            x,
            gamma,
            beta,
            mean,
            var,
            eps,
        } => {
            let src = nodes[x.0].tensor.data().to_vec();
            let g_data = nodes[gamma.0].tensor.data().to_vec();
            let (n, c) = nodes[x.0].tensor.dims2();
            let nf = n as f64;
            let mut dx = vec![0.0; n * c];
            let mut dgamma = vec![0.0; c];
            let mut dbeta = vec![0.0; c];
            for col in 0..c {
                let inv = 1.0 / (var[col] + eps).sqrt();
                let mut g_sum = 0.0;
                let mut gx_sum = 0.0;
                for row in 0..n {
                    let xhat = (src[row * c + col] - mean[col]) * inv;
                    let g = grad[row * c + col];
                    g_sum += g;
                    gx_sum += g * xhat;
                    dgamma[col] += g * xhat;
                    dbeta[col] += g;
                }
                for row in 0..n {
                    let xhat = (src[row * c + col] - mean[col]) * inv;
                    let g = grad[row * c + col];
                    dx[row * c + col] =
                        g_data[col] * inv * (g - g_sum / nf - xhat * gx_sum / nf);
                }
            }
            accumulate(nodes, x, &dx);
            accumulate(nodes, gamma, &dgamma);
            accumulate(nodes, beta, &dbeta);
        }
        Op::BatchNormEval {
            x,
            gamma,
            beta,
            mean,
            var,
            eps,
        } => {
            let src = nodes[x.0].tensor.data().to_vec();
            let g_data = nodes[gamma.0].tensor.data().to_vec();
            let (n, c) = nodes[x.0].tensor.dims2();
            let mut dx = vec![0.0; n * c];
            let mut dgamma = vec![0.0; c];
            let mut dbeta = vec![0.0; c];
            for col in 0..c {
                let inv = 1.0 / (var[col] + eps).sqrt();
                for row in 0..n {
                    let g = grad[row * c + col];
                    dx[row * c + col] = g * g_data[col] * inv;
                    dgamma[col] += g * (src[row * c + col] - mean[col]) * inv;
                    dbeta[col] += g;
                }
            }
            accumulate(nodes, x, &dx);
            accumulate(nodes, gamma, &dgamma);
            accumulate(nodes, beta, &dbeta);
        }
    }
}
