use super::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn assert_close(got: &[f64], want: &[f64], tol: f64) {
    assert_eq!(got.len(), want.len(), "length mismatch");
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        assert!(
            (g - w).abs() <= tol,
            "index {i}: got {g}, want {w} (tol {tol})"
        );
    }
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

// ── matmul ──────────────────────────────────────────────────────────────

#[test]
fn matmul_identity() {
    let mut tape = Tape::new();
    let a = tape
        .leaf_from(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0], false)
        .unwrap();
    let b = tape
        .leaf_from(vec![2, 2], vec![3.0, 4.0, 5.0, 6.0], false)
        .unwrap();
    let c = tape.matmul(a, b).unwrap();
    assert_eq!(tape.data(c), &[3.0, 4.0, 5.0, 6.0]);
}

#[test]
fn matmul_row_times_column() {
    let mut tape = Tape::new();
    let a = tape.leaf_from(vec![1, 2], vec![1.0, 2.0], false).unwrap();
    let b = tape.leaf_from(vec![2, 1], vec![3.0, 4.0], false).unwrap();
    let c = tape.matmul(a, b).unwrap();
    assert_eq!(tape.data(c), &[11.0]);
}

#[test]
fn matmul_shape_mismatch_names_both_shapes() {
    let mut tape = Tape::new();
    let a = tape.leaf(Tensor::zeros(vec![2, 3]));
    let b = tape.leaf(Tensor::zeros(vec![4, 2]));
    let err = tape.matmul(a, b).unwrap_err();
    assert_eq!(
        err,
        TensorError::DimensionMismatch {
            op: "matmul",
            lhs: vec![2, 3],
            rhs: vec![4, 2],
        }
    );
}

#[test]
fn matmul_grad_of_sum_is_column_sums_of_rhs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a_data = rand_vec(&mut rng, 20);
    let b_data = rand_vec(&mut rng, 15);

    let mut tape = Tape::new();
    let a = tape.leaf_from(vec![4, 5], a_data.clone(), true).unwrap();
    let b = tape.leaf_from(vec![5, 3], b_data.clone(), true).unwrap();
    let c = tape.matmul(a, b).unwrap();
    let loss = tape.sum(c);
    tape.backward(loss).unwrap();

    // d sum(A·B) / dA[i,p] = Σ_j B[p,j], independent of i.
    let col_sums: Vec<f64> = (0..5).map(|p| (0..3).map(|j| b_data[p * 3 + j]).sum()).collect();
    let expected: Vec<f64> = (0..4).flat_map(|_| col_sums.clone()).collect();
    assert_close(tape.grad(a).unwrap(), &expected, 1e-12);

    // independent finite-difference oracle, step 1e-5
    let loss_at = |a_d: &[f64]| -> f64 {
        let mut t = Tape::new();
        let ai = t.leaf_from(vec![4, 5], a_d.to_vec(), false).unwrap();
        let bi = t.leaf_from(vec![5, 3], b_data.clone(), false).unwrap();
        let ci = t.matmul(ai, bi).unwrap();
        let l = t.sum(ci);
        t.data(l)[0]
    };
    let analytic = tape.grad(a).unwrap().to_vec();
    for i in 0..a_data.len() {
        let mut plus = a_data.clone();
        plus[i] += 1e-5;
        let mut minus = a_data.clone();
        minus[i] -= 1e-5;
        let fd = (loss_at(&plus) - loss_at(&minus)) / 2e-5;
        let rel = (analytic[i] - fd).abs() / fd.abs().max(1e-12);
        assert!(rel < 1e-6, "coord {i}: analytic {} vs fd {fd}", analytic[i]);
    }
}

// ── conv1d ──────────────────────────────────────────────────────────────

#[test]
fn conv_delta_kernel_is_identity() {
    let mut tape = Tape::new();
    let x = tape
        .leaf_from(vec![1, 3], vec![1.0, 2.0, 3.0], false)
        .unwrap();
    let k = tape
        .leaf_from(vec![1, 1, 3], vec![0.0, 1.0, 0.0], false)
        .unwrap();
    let b = tape.leaf_from(vec![1], vec![0.0], false).unwrap();
    let y = tape.conv1d(x, k, b).unwrap();
    assert_eq!(tape.data(y), &[1.0, 2.0, 3.0]);
}

#[test]
fn conv_box_kernel_with_zero_padding() {
    let mut tape = Tape::new();
    let x = tape
        .leaf_from(vec![1, 3], vec![1.0, 2.0, 3.0], false)
        .unwrap();
    let k = tape
        .leaf_from(vec![1, 1, 3], vec![1.0, 1.0, 1.0], false)
        .unwrap();
    let b = tape.leaf_from(vec![1], vec![0.0], false).unwrap();
    let y = tape.conv1d(x, k, b).unwrap();
    assert_eq!(tape.data(y), &[3.0, 6.0, 5.0]);
}

#[test]
fn conv_rejects_even_kernel() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::zeros(vec![1, 8]));
    let k = tape.leaf(Tensor::zeros(vec![2, 1, 4]));
    let b = tape.leaf(Tensor::zeros(vec![2]));
    assert_eq!(tape.conv1d(x, k, b).unwrap_err(), TensorError::EvenKernel(4));
}

/// Direct quadruple-loop cross-correlation, written independently of the op.
fn naive_conv(x: &[f64], kernels: &[f64], bias: &[f64], c_in: usize, c_out: usize, len: usize, k: usize) -> Vec<f64> {
    let pad = (k as isize - 1) / 2;
    let mut out = vec![0.0; c_out * len];
    for o in 0..c_out {
        for t in 0..len as isize {
            let mut acc = bias[o];
            for c in 0..c_in {
                for tap in 0..k as isize {
                    let src = t + tap - pad;
                    if src >= 0 && src < len as isize {
                        acc += kernels[(o * c_in + c) * k + tap as usize]
                            * x[c * len + src as usize];
                    }
                }
            }
            out[o * len + t as usize] = acc;
        }
    }
    out
}

#[test]
fn conv_matches_naive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (c_in, c_out, len, k) = (2, 3, 16, 5);
    let x_data = rand_vec(&mut rng, c_in * len);
    let k_data = rand_vec(&mut rng, c_out * c_in * k);
    let b_data = rand_vec(&mut rng, c_out);

    let mut tape = Tape::new();
    let x = tape.leaf_from(vec![c_in, len], x_data.clone(), false).unwrap();
    let kid = tape
        .leaf_from(vec![c_out, c_in, k], k_data.clone(), false)
        .unwrap();
    let b = tape.leaf_from(vec![c_out], b_data.clone(), false).unwrap();
    let y = tape.conv1d(x, kid, b).unwrap();

    let expected = naive_conv(&x_data, &k_data, &b_data, c_in, c_out, len, k);
    assert_close(tape.data(y), &expected, 1e-12);
}

#[test]
fn conv_matches_naive_oracle_across_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for c_in in [1, 2, 4] {
        for c_out in [1, 3] {
            for len in [1, 5, 32] {
                for k in [1usize, 3, 5, 7] {
                    let x_data = rand_vec(&mut rng, c_in * len);
                    let k_data = rand_vec(&mut rng, c_out * c_in * k);
                    let b_data = rand_vec(&mut rng, c_out);
                    let mut tape = Tape::new();
                    let x = tape.leaf_from(vec![c_in, len], x_data.clone(), false).unwrap();
                    let kid = tape
                        .leaf_from(vec![c_out, c_in, k], k_data.clone(), false)
                        .unwrap();
                    let b = tape.leaf_from(vec![c_out], b_data.clone(), false).unwrap();
                    let y = tape.conv1d(x, kid, b).unwrap();
                    let expected = naive_conv(&x_data, &k_data, &b_data, c_in, c_out, len, k);
                    assert_close(tape.data(y), &expected, 1e-12);
                }
            }
        }
    }
}

// ── softmax ─────────────────────────────────────────────────────────────

#[test]
fn softmax_uniform_on_equal_inputs() {
    let mut tape = Tape::new();
    let x = tape.leaf_from(vec![1, 3], vec![0.0; 3], false).unwrap();
    let s = tape.softmax_lastdim(x).unwrap();
    assert_close(tape.data(s), &[1.0 / 3.0; 3], 1e-15);
}

#[test]
fn softmax_stable_under_large_inputs() {
    let mut tape = Tape::new();
    let x = tape
        .leaf_from(vec![1, 2], vec![1000.0, 1000.0], false)
        .unwrap();
    let s = tape.softmax_lastdim(x).unwrap();
    assert_close(tape.data(s), &[0.5, 0.5], 1e-15);
}

#[test]
fn softmax_frozen_values() {
    let mut tape = Tape::new();
    let x = tape
        .leaf_from(vec![1, 3], vec![1.0, 2.0, 3.0], false)
        .unwrap();
    let s = tape.softmax_lastdim(x).unwrap();
    assert_close(
        tape.data(s),
        &[0.09003057317038046, 0.24472847105479767, 0.6652409557748219],
        1e-8,
    );
}

#[test]
fn softmax_rows_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let rows = rng.gen_range(1..6);
        let cols = rng.gen_range(1..9);
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-30.0..30.0)).collect();
        let mut tape = Tape::new();
        let x = tape.leaf_from(vec![rows, cols], data, false).unwrap();
        let s = tape.softmax_lastdim(x).unwrap();
        let out = tape.data(s);
        for r in 0..rows {
            let row = &out[r * cols..(r + 1) * cols];
            assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn softmax_rejects_non_finite() {
    let mut tape = Tape::new();
    let x = tape
        .leaf_from(vec![1, 2], vec![f64::NAN, 0.0], false)
        .unwrap();
    assert_eq!(
        tape.softmax_lastdim(x).unwrap_err(),
        TensorError::NonFinite("softmax_lastdim")
    );
}

// ── activations ─────────────────────────────────────────────────────────

#[test]
fn activation_symmetry_points() {
    let mut tape = Tape::new();
    let x = tape.leaf_from(vec![1], vec![0.0], false).unwrap();
    let g = tape.gelu(x);
    let s = tape.sigmoid(x);
    assert_eq!(tape.data(g), &[0.0]);
    assert_eq!(tape.data(s), &[0.5]);
}

#[test]
fn gelu_approaches_identity_for_large_inputs() {
    for x in [6.0, 8.0, 20.0] {
        let mut tape = Tape::new();
        let xi = tape.leaf_from(vec![1], vec![x], false).unwrap();
        let g = tape.gelu(xi);
        assert!((tape.data(g)[0] - x).abs() < 1e-6, "gelu({x})");
    }
}

#[test]
fn activation_gradients_match_finite_differences() {
    let x0 = 0.7;
    let eval = |f: fn(&mut Tape, TensorId) -> TensorId, x: f64| -> f64 {
        let mut t = Tape::new();
        let xi = t.leaf_from(vec![1], vec![x], false).unwrap();
        let y = f(&mut t, xi);
        t.data(y)[0]
    };
    let grad = |f: fn(&mut Tape, TensorId) -> TensorId| -> f64 {
        let mut t = Tape::new();
        let xi = t.leaf_from(vec![1], vec![x0], true).unwrap();
        let y = f(&mut t, xi);
        let loss = t.sum(y);
        t.backward(loss).unwrap();
        t.grad(xi).unwrap()[0]
    };
    let gelu_fn: fn(&mut Tape, TensorId) -> TensorId = |t, x| t.gelu(x);
    let sig_fn: fn(&mut Tape, TensorId) -> TensorId = |t, x| t.sigmoid(x);
    for f in [gelu_fn, sig_fn] {
        let h = 1e-6;
        let fd = (eval(f, x0 + h) - eval(f, x0 - h)) / (2.0 * h);
        let an = grad(f);
        assert!((an - fd).abs() / fd.abs() < 1e-6, "analytic {an} vs fd {fd}");
    }
}

// ── batchnorm ───────────────────────────────────────────────────────────

#[test]
fn batchnorm_zero_variance_column_maps_to_zero() {
    let mut tape = Tape::new();
    let x = tape
        .leaf_from(vec![3, 2], vec![5.0, -1.0, 5.0, -1.0, 5.0, -1.0], false)
        .unwrap();
    let gamma = tape.leaf_from(vec![2], vec![1.0, 1.0], false).unwrap();
    let beta = tape.leaf_from(vec![2], vec![0.0, 0.0], false).unwrap();
    let (y, _) = tape.batchnorm_train(x, gamma, beta, 1e-5).unwrap();
    assert_close(tape.data(y), &[0.0; 6], 1e-12);
}

#[test]
fn batchnorm_zero_gamma_outputs_beta() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data = rand_vec(&mut rng, 8);
    let mut tape = Tape::new();
    let x = tape.leaf_from(vec![4, 2], data, false).unwrap();
    let gamma = tape.leaf_from(vec![2], vec![0.0, 0.0], false).unwrap();
    let beta = tape.leaf_from(vec![2], vec![1.5, -2.0], false).unwrap();
    let (y, _) = tape.batchnorm_train(x, gamma, beta, 1e-5).unwrap();
    assert_close(tape.data(y), &[1.5, -2.0, 1.5, -2.0, 1.5, -2.0, 1.5, -2.0], 1e-12);
}

#[test]
fn batchnorm_train_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (n, c) = (8, 4);
    // spread the rows out so the ε term in the normalizer is negligible
    let data: Vec<f64> = rand_vec(&mut rng, n * c).iter().map(|v| v * 100.0).collect();
    let gamma_v = vec![1.3, 0.7, 2.0, 1.0];
    let beta_v = vec![0.1, -0.4, 0.0, 2.5];
    let mut tape = Tape::new();
    let x = tape.leaf_from(vec![n, c], data, false).unwrap();
    let gamma = tape.leaf_from(vec![c], gamma_v.clone(), false).unwrap();
    let beta = tape.leaf_from(vec![c], beta_v.clone(), false).unwrap();
    let (y, _) = tape.batchnorm_train(x, gamma, beta, 1e-5).unwrap();
    let out = tape.data(y);
    for col in 0..c {
        let vals: Vec<f64> = (0..n).map(|r| out[r * c + col]).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        assert!((mean - beta_v[col]).abs() < 1e-10, "col {col} mean {mean}");
        assert!(
            (var - gamma_v[col] * gamma_v[col]).abs() < 1e-6,
            "col {col} var {var} vs {}",
            gamma_v[col] * gamma_v[col]
        );
    }
}

#[test]
fn batchnorm_rejects_single_row_in_train_mode() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::zeros(vec![1, 3]));
    let gamma = tape.leaf(Tensor::filled(vec![3], 1.0));
    let beta = tape.leaf(Tensor::zeros(vec![3]));
    assert_eq!(
        tape.batchnorm_train(x, gamma, beta, 1e-5).unwrap_err(),
        TensorError::DegenerateBatch(1)
    );
}

// ── multihead attention ─────────────────────────────────────────────────

fn mha_leaves(tape: &mut Tape, d: usize, data: [&[f64]; 4]) -> MhaIds {
    MhaIds {
        wq: tape.leaf_from(vec![d, d], data[0].to_vec(), true).unwrap(),
        wk: tape.leaf_from(vec![d, d], data[1].to_vec(), true).unwrap(),
        wv: tape.leaf_from(vec![d, d], data[2].to_vec(), true).unwrap(),
        wo: tape.leaf_from(vec![d, d], data[3].to_vec(), true).unwrap(),
    }
}

#[test]
fn attention_single_token() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let d = 4;
    let x_data = rand_vec(&mut rng, d);
    let wq = rand_vec(&mut rng, d * d);
    let wk = rand_vec(&mut rng, d * d);
    let wv = rand_vec(&mut rng, d * d);
    let wo = rand_vec(&mut rng, d * d);

    let mut tape = Tape::new();
    let x = tape.leaf_from(vec![1, d], x_data.clone(), false).unwrap();
    let w = mha_leaves(&mut tape, d, [&wq, &wk, &wv, &wo]);
    let (out, probs) = multihead_attention(&mut tape, x, x, x, w, 2).unwrap();
    for p in &probs {
        assert_eq!(tape.data(*p), &[1.0]);
    }
    // with one token the value path reduces to (x·Wv)·Wo
    let xv = super::ops::matmul_raw(&x_data, &wv, 1, d, d);
    let expected = super::ops::matmul_raw(&xv, &wo, 1, d, d);
    assert_close(tape.data(out), &expected, 1e-12);
}

#[test]
fn attention_uniform_over_identical_tokens() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let (l, d, heads) = (5, 6, 3);
    let token = rand_vec(&mut rng, d);
    let x_data: Vec<f64> = (0..l).flat_map(|_| token.clone()).collect();
    let wq = rand_vec(&mut rng, d * d);
    let wk = rand_vec(&mut rng, d * d);
    let wv = rand_vec(&mut rng, d * d);
    let wo = rand_vec(&mut rng, d * d);

    let mut tape = Tape::new();
    let x = tape.leaf_from(vec![l, d], x_data, false).unwrap();
    let w = mha_leaves(&mut tape, d, [&wq, &wk, &wv, &wo]);
    let (_, probs) = multihead_attention(&mut tape, x, x, x, w, heads).unwrap();
    for p in probs {
        assert_close(tape.data(p), &vec![1.0 / l as f64; l * l], 1e-12);
    }
}

/// Naive per-head attention oracle over plain slices.
fn naive_mha(
    x: &[f64],
    wq: &[f64],
    wk: &[f64],
    wv: &[f64],
    wo: &[f64],
    l: usize,
    d: usize,
    heads: usize,
) -> Vec<f64> {
    let matmul = |a: &[f64], b: &[f64], m: usize, k: usize, n: usize| -> Vec<f64> {
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    out[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        out
    };
    let q = matmul(x, wq, l, d, d);
    let k = matmul(x, wk, l, d, d);
    let v = matmul(x, wv, l, d, d);
    let dh = d / heads;
    let mut merged = vec![0.0; l * d];
    for h in 0..heads {
        for i in 0..l {
            let mut scores = vec![0.0; l];
            for j in 0..l {
                let mut s = 0.0;
                for c in 0..dh {
                    s += q[i * d + h * dh + c] * k[j * d + h * dh + c];
                }
                scores[j] = s / (dh as f64).sqrt();
            }
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            for c in 0..dh {
                let mut acc = 0.0;
                for j in 0..l {
                    acc += exps[j] / total * v[j * d + h * dh + c];
                }
                merged[i * d + h * dh + c] = acc;
            }
        }
    }
    matmul(&merged, wo, l, d, d)
}

#[test]
fn attention_matches_naive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (l, d, heads) = (6, 8, 2);
    let x_data = rand_vec(&mut rng, l * d);
    let wq = rand_vec(&mut rng, d * d);
    let wk = rand_vec(&mut rng, d * d);
    let wv = rand_vec(&mut rng, d * d);
    let wo = rand_vec(&mut rng, d * d);

    let mut tape = Tape::new();
    let x = tape.leaf_from(vec![l, d], x_data.clone(), false).unwrap();
    let w = mha_leaves(&mut tape, d, [&wq, &wk, &wv, &wo]);
    let (out, _) = multihead_attention(&mut tape, x, x, x, w, heads).unwrap();
    let expected = naive_mha(&x_data, &wq, &wk, &wv, &wo, l, d, heads);
    assert_close(tape.data(out), &expected, 1e-10);
}

#[test]
fn attention_rejects_bad_head_count() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::zeros(vec![4, 6]));
    let w = MhaIds {
        wq: tape.leaf(Tensor::zeros(vec![6, 6])),
        wk: tape.leaf(Tensor::zeros(vec![6, 6])),
        wv: tape.leaf(Tensor::zeros(vec![6, 6])),
        wo: tape.leaf(Tensor::zeros(vec![6, 6])),
    };
    assert_eq!(
        multihead_attention(&mut tape, x, x, x, w, 4).unwrap_err(),
        TensorError::HeadsDontDivide { heads: 4, dim: 6 }
    );
}

// ── backward ────────────────────────────────────────────────────────────

#[test]
fn backward_of_sum_is_ones() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let data = rand_vec(&mut rng, 12);
    let mut tape = Tape::new();
    let x = tape.leaf_from(vec![3, 4], data, true).unwrap();
    let loss = tape.sum(x);
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(x).unwrap(), &[1.0; 12][..]);
}

#[test]
fn backward_of_sum_of_squares_is_twice_input() {
    let data = vec![1.0, -2.0, 0.5];
    let mut tape = Tape::new();
    let x = tape.leaf_from(vec![3], data.clone(), true).unwrap();
    let sq = tape.mul(x, x).unwrap();
    let loss = tape.sum(sq);
    tape.backward(loss).unwrap();
    let expected: Vec<f64> = data.iter().map(|v| 2.0 * v).collect();
    assert_close(tape.grad(x).unwrap(), &expected, 1e-15);
}

#[test]
fn backward_accumulates_through_diamond() {
    let mut tape = Tape::new();
    let x = tape.leaf_from(vec![4], vec![1.0, 2.0, 3.0, 4.0], true).unwrap();
    let y = tape.add(x, x).unwrap();
    let loss = tape.sum(y);
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(x).unwrap(), &[2.0; 4][..]);
}

#[test]
fn backward_rejects_non_scalar_loss() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::zeros(vec![2, 2]));
    assert_eq!(
        tape.backward(x).unwrap_err(),
        TensorError::NonScalarLoss(vec![2, 2])
    );
}

// ── adam ────────────────────────────────────────────────────────────────

#[test]
fn adam_zero_gradient_leaves_params_unchanged() {
    let mut p = Tensor::param(vec![3], vec![1.0, -2.0, 3.0]).unwrap();
    let before = p.data().to_vec();
    let mut state = AdamState::new(&[3], 0.1);
    state.step(&mut [&mut p], &[vec![0.0; 3]]).unwrap();
    assert_eq!(p.data(), &before[..]);
}

#[test]
fn adam_first_step_matches_hand_evaluation() {
    // step 1 with gradient g: m̂ = g, v̂ = g², so Δ = lr·g/(|g| + eps)
    let g = 0.37;
    let lr = 0.1;
    let mut p = Tensor::param(vec![1], vec![2.0]).unwrap();
    let mut state = AdamState::new(&[1], lr);
    state.step(&mut [&mut p], &[vec![g]]).unwrap();
    let expected = 2.0 - lr * g / (g.abs() + 1e-8);
    assert!((p.data()[0] - expected).abs() < 1e-15);
}

#[test]
fn adam_constant_gradient_moves_monotonically() {
    let mut p = Tensor::param(vec![1], vec![0.0]).unwrap();
    let mut state = AdamState::new(&[1], 0.05);
    let mut last = 0.0;
    for _ in 0..2 {
        state.step(&mut [&mut p], &[vec![1.0]]).unwrap();
        assert!(p.data()[0] < last, "parameter must decrease against +grad");
        last = p.data()[0];
    }
}

#[test]
fn adam_trajectories_are_deterministic() {
    let run = || -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut p = Tensor::param(vec![4], rand_vec(&mut rng, 4)).unwrap();
        let mut state = AdamState::new(&[4], 1e-2);
        for _ in 0..10 {
            let grad: Vec<f64> = p.data().iter().map(|v| 2.0 * v).collect();
            state.step(&mut [&mut p], &[grad]).unwrap();
        }
        p.data().to_vec()
    };
    let a = run();
    let b = run();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

// ── composed gradients ──────────────────────────────────────────────────

#[test]
fn composed_ops_match_finite_differences() {
    // conv → batchnorm → gelu → attention-style matmul chain
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let (c_in, c_out, len) = (1, 3, 8);
    let k = 3;
    let x0 = rand_vec(&mut rng, c_in * len);
    let k0 = rand_vec(&mut rng, c_out * c_in * k);
    let b0 = rand_vec(&mut rng, c_out);
    let g0 = vec![1.0, 0.8, 1.2];
    let be0 = vec![0.0, 0.1, -0.1];

    let eval = |kd: &[f64]| -> f64 {
        let mut t = Tape::new();
        let x = t.leaf_from(vec![c_in, len], x0.clone(), false).unwrap();
        let kt = t.leaf_from(vec![c_out, c_in, k], kd.to_vec(), true).unwrap();
        let bt = t.leaf_from(vec![c_out], b0.clone(), true).unwrap();
        let y = t.conv1d(x, kt, bt).unwrap();
        let yt = t.transpose(y).unwrap(); // [len × c_out]
        let gamma = t.leaf_from(vec![c_out], g0.clone(), true).unwrap();
        let beta = t.leaf_from(vec![c_out], be0.clone(), true).unwrap();
        let (bn, _) = t.batchnorm_train(yt, gamma, beta, 1e-5).unwrap();
        let act = t.gelu(bn);
        let sq = t.mul(act, act).unwrap();
        let loss = t.sum(sq);
        t.data(loss)[0]
    };

    let mut t = Tape::new();
    let x = t.leaf_from(vec![c_in, len], x0.clone(), false).unwrap();
    let kt = t.leaf_from(vec![c_out, c_in, k], k0.clone(), true).unwrap();
    let bt = t.leaf_from(vec![c_out], b0.clone(), true).unwrap();
    let y = t.conv1d(x, kt, bt).unwrap();
    let yt = t.transpose(y).unwrap();
    let gamma = t.leaf_from(vec![c_out], g0.clone(), true).unwrap();
    let beta = t.leaf_from(vec![c_out], be0.clone(), true).unwrap();
    let (bn, _) = t.batchnorm_train(yt, gamma, beta, 1e-5).unwrap();
    let act = t.gelu(bn);
    let sq = t.mul(act, act).unwrap();
    let loss = t.sum(sq);
    t.backward(loss).unwrap();
    let analytic = t.grad(kt).unwrap().to_vec();

    let h = 1e-5;
    for i in 0..k0.len() {
        let mut plus = k0.clone();
        plus[i] += h;
        let mut minus = k0.clone();
        minus[i] -= h;
        let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
        let denom = fd.abs().max(analytic[i].abs()).max(1e-3);
        assert!(
            (analytic[i] - fd).abs() / denom < 1e-3,
            "kernel coord {i}: analytic {} vs fd {fd}",
            analytic[i]
        );
    }
}
