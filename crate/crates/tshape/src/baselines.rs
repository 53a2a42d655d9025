//! Reference detectors: an autoregressive one-step forecaster and a
//! brute-force subsequence nearest-neighbor distance scorer.
//!
//! Both fit on the training region only and score test points causally,
//! matching the alignment of the model path.

use crate::data::window_ending_at;
use crate::metrics::ScoreSeries;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("training region of {len} points is too short for order {order} (needs > {min})")]
    InsufficientData { len: usize, order: usize, min: usize },
    #[error("subsequence length {len} exceeds the training region ({train} points)")]
    SubsequenceTooLong { len: usize, train: usize },
    #[error("linear system is singular")]
    Singular,
}

/// Lag-`p` autoregressive model with intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct ArParams {
    pub order: usize,
    /// `[intercept, a_1, …, a_p]`; prediction is
    /// `intercept + Σ a_i · x[t−i]`.
    pub coefficients: Vec<f64>,
}

/// Least-squares fit of the lag-`p` regression via normal equations with
/// a small ridge term to keep periodic trainining data well-posed.
pub fn ar_fit(train: &[f64], order: usize) -> Result<ArParams, BaselineError> {
    let p = order;
    if train.len() <= 2 * p {
        return Err(BaselineError::InsufficientData {
            len: train.len(),
            order: p,
            min: 2 * p,
        });
    }
    let dim = p + 1;
    let mut xtx = vec![0.0; dim * dim];
    let mut xty = vec![0.0; dim];
    for t in p..train.len() {
        // regressor row: [1, x[t-1], …, x[t-p]]
        let mut row = Vec::with_capacity(dim);
        row.push(1.0);
        for i in 1..=p {
            row.push(train[t - i]);
        }
        let y = train[t];
        for a in 0..dim {
            xty[a] += row[a] * y;
            for b in 0..dim {
                xtx[a * dim + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..dim {
        xtx[a * dim + a] += 1e-8;
    }
    let coefficients = solve_dense(&mut xtx, &mut xty, dim)?;
    Ok(ArParams {
        order: p,
        coefficients,
    })
}

/// Gaussian elimination with partial pivoting; consumes its inputs.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Result<Vec<f64>, BaselineError> {
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .expect("non-empty range");
        if a[pivot * n + col].abs() < 1e-300 {
            return Err(BaselineError::Singular);
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let factor = a[row * n + col] / a[col * n + col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    Ok(x)
}

impl ArParams {
    /// One-step prediction from the `order` values before `t`, reading
    /// `values[0]` for positions before the start of the series.
    pub fn predict_at(&self, values: &[f64], t: usize) -> f64 {
        let mut acc = self.coefficients[0];
        for i in 1..=self.order {
            let value = if t >= i { values[t - i] } else { values[0] };
            acc += self.coefficients[i] * value;
        }
        acc
    }
}

/// Squared one-step prediction error over the test region.
pub fn ar_score(values: &[f64], split: usize, params: &ArParams) -> ScoreSeries {
    let scores: Vec<f64> = (split..values.len())
        .map(|t| {
            let err = values[t] - params.predict_at(values, t);
            err * err
        })
        .collect();
    ScoreSeries {
        scores,
        start_index: split,
        valid_from: params.order.saturating_sub(split),
    }
}

/// Z-normalized training subsequences for nearest-neighbor lookup.
#[derive(Debug, Clone)]
pub struct SubseqIndex {
    pub len: usize,
    subsequences: Vec<Vec<f64>>,
}

fn znorm(window: &[f64]) -> Vec<f64> {
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let var = window.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 {
        return vec![0.0; window.len()];
    }
    window.iter().map(|v| (v - mean) / std).collect()
}

/// Index every length-`len` subsequence of the training region.
pub fn subseq_index(train: &[f64], len: usize) -> Result<SubseqIndex, BaselineError> {
    if len == 0 || len > train.len() {
        return Err(BaselineError::SubsequenceTooLong {
            len,
            train: train.len(),
        });
    }
    let subsequences = (0..=train.len() - len)
        .map(|start| znorm(&train[start..start + len]))
        .collect();
    Ok(SubseqIndex { len, subsequences })
}

/// Minimum z-normalized Euclidean distance from the subsequence ending at
/// each test point to any training subsequence. Brute force.
pub fn subseq_score(values: &[f64], split: usize, index: &SubseqIndex) -> ScoreSeries {
    let scores: Vec<f64> = (split..values.len())
        .into_par_iter()
        .map(|t| {
            let query = znorm(&window_ending_at(values, t, index.len));
            let best = index
                .subsequences
                .iter()
                .map(|stored| {
                    query
                        .iter()
                        .zip(stored)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
            best.sqrt()
        })
        .collect();
    ScoreSeries {
        scores,
        start_index: split,
        valid_from: (index.len - 1).saturating_sub(split),
    }
}
