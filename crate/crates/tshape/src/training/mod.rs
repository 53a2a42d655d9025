//! Training orchestration: batching, epochs, early stopping, and the
//! best-validation checkpoint.
//!
//! Fitting minimizes mean squared reconstruction error over strided
//! training windows with Adam. The tail of the training region is held
//! out for validation; no test-region sample ever enters a batch.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};

use crate::data::{make_windows, zscore_normalize, DataError, TimeSeries, Window};
use crate::model::{forward_fast, ModelConfig, ModelError, Mode, TShapeParams};
use crate::tensor::{AdamState, Tape, TensorError};
use rayon::prelude::*;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("training region ({len} points) is shorter than one window ({window})")]
    TrainRegionTooShort { len: usize, window: usize },
    #[error("no fitting windows left after the validation split")]
    NoFittingWindows,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Stride between training windows; defaults to the patch length.
    pub stride: Option<usize>,
    pub early_stop_patience: usize,
    /// Tail fraction of the training region held out for validation.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            lr: 1e-3,
            stride: None,
            early_stop_patience: 5,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn effective_stride(&self, model: &ModelConfig) -> usize {
        self.stride.unwrap_or(model.patch_s).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// The checkpoint with the lowest validation loss seen.
    pub params: TShapeParams,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

impl TrainOutcome {
    /// Loss history as `epoch,train_loss,val_loss` CSV.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for stats in &self.history {
            let _ = writeln!(out, "{},{},{}", stats.epoch, stats.train_loss, stats.val_loss);
        }
        out
    }
}

const MIN_IMPROVEMENT: f64 = 1e-5;

/// Fit the model on the training region of `series`.
pub fn train(
    series: &TimeSeries,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    model_config.validate()?;
    let t_len = model_config.window_t;
    if series.split_index < t_len {
        return Err(TrainError::TrainRegionTooShort {
            len: series.split_index,
            window: t_len,
        });
    }
    let (normalized, _) = zscore_normalize(series)?;
    let train_slice = &normalized.values[..series.split_index];

    let stride = train_config.effective_stride(model_config);
    let val_len = (series.split_index as f64 * train_config.validation_fraction) as usize;
    let boundary = series.split_index - val_len;
    let fit_region = &train_slice[..boundary];
    if fit_region.len() < t_len {
        return Err(TrainError::NoFittingWindows);
    }
    // validation windows use a small prime stride so checkpoint selection
    // sees many window phases, not just the training grid's
    let val_stride = stride.min(7);
    let val_windows: Vec<Window> = make_windows(train_slice, t_len, val_stride)
        .into_iter()
        .filter(|w| w.end >= boundary)
        .collect();

    let mut params = TShapeParams::init(model_config, train_config.seed)?;
    let sizes: Vec<usize> = params.trainable().iter().map(|t| t.len()).collect();
    let mut adam = AdamState::new(&sizes, train_config.lr);
    // decouple the shuffle stream from parameter initialization
    let mut order_rng =
        rand_chacha::ChaCha8Rng::seed_from_u64(train_config.seed ^ 0x9E37_79B9_7F4A_7C15);
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    let mut history = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut best_params = params.clone();
    let mut epochs_without_improvement = 0;
    let mut stopped_early = false;

    for epoch in 0..train_config.epochs {
        // jitter the window grid so every phase of the signal relative to
        // the patch boundaries is seen across epochs; a fixed grid starves
        // inference-time phases whenever the data's period is a multiple
        // of the stride
        let max_offset = (fit_region.len() - t_len).min(stride - 1);
        let offset = if max_offset == 0 {
            0
        } else {
            use rand::Rng;
            order_rng.gen_range(0..=max_offset)
        };
        let fit_windows: Vec<Window> = make_windows(&fit_region[offset..], t_len, stride);
        let mut indices: Vec<usize> = (0..fit_windows.len()).collect();
        indices.shuffle(&mut order_rng);
        let mut epoch_loss = 0.0;
        for (batch_no, batch) in indices.chunks(train_config.batch_size).enumerate() {
            let step = batch_step(&fit_windows, batch, &params, model_config)?;
            if !step.loss_sum.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                });
            }
            epoch_loss += step.loss_sum;
            let mut tensors = params.trainable_mut();
            adam.step(&mut tensors, &step.grads)?;
            // one running-stats update per optimizer step, from the
            // batch-averaged window statistics
            if let Some(bn) = params.bn.as_mut() {
                if let Some((mean, var)) = average_stats(&step.bn_stats) {
                    bn.update_running(&mean, &var);
                }
            }
        }
        let train_loss = epoch_loss / fit_windows.len() as f64;
        let val_loss = if val_windows.is_empty() {
            train_loss
        } else {
            validation_loss(&val_windows, &params, model_config)?
        };
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });

        if val_loss < best_val {
            if best_val - val_loss >= MIN_IMPROVEMENT {
                epochs_without_improvement = 0;
            } else {
                epochs_without_improvement += 1;
            }
            best_val = val_loss;
            best_epoch = epoch;
            best_params = params.clone();
        } else {
            epochs_without_improvement += 1;
        }
        if epochs_without_improvement >= train_config.early_stop_patience {
            stopped_early = true;
            break;
        }
    }

    Ok(TrainOutcome {
        params: best_params,
        history,
        best_epoch,
        best_val_loss: best_val,
        stopped_early,
    })
}

struct BatchStep {
    loss_sum: f64,
    grads: Vec<Vec<f64>>,
    bn_stats: Vec<(Vec<f64>, Vec<f64>)>,
}

fn average_stats(stats: &[(Vec<f64>, Vec<f64>)]) -> Option<(Vec<f64>, Vec<f64>)> {
    let first = stats.first()?;
    let mut mean = vec![0.0; first.0.len()];
    let mut var = vec![0.0; first.1.len()];
    for (m, v) in stats {
        for (acc, x) in mean.iter_mut().zip(m) {
            *acc += x;
        }
        for (acc, x) in var.iter_mut().zip(v) {
            *acc += x;
        }
    }
    let n = stats.len() as f64;
    mean.iter_mut().for_each(|x| *x /= n);
    var.iter_mut().for_each(|x| *x /= n);
    Some((mean, var))
}

/// Forward/backward over one batch. Windows run in parallel on private
/// tapes; gradients and running-stat updates are folded in window order so
/// the result is independent of thread scheduling.
fn batch_step(
    windows: &[Window],
    batch: &[usize],
    params: &TShapeParams,
    config: &ModelConfig,
) -> Result<BatchStep, TrainError> {
    let scale = 1.0 / batch.len() as f64;
    let per_window: Vec<(f64, Vec<Vec<f64>>, Option<(Vec<f64>, Vec<f64>)>)> = batch
        .par_iter()
        .map(|&idx| -> Result<_, TrainError> {
            let window = &windows[idx];
            let mut tape = Tape::new();
            let wid = tape.leaf_from(vec![window.values.len()], window.values.clone(), false)?;
            let pass = forward_fast(&mut tape, wid, params, config, Mode::Train)?;
            let diff = tape.sub(pass.reconstruction, wid)?;
            let sq = tape.mul(diff, diff)?;
            let sum = tape.sum(sq);
            let loss = tape.scale(sum, 1.0 / window.values.len() as f64);
            let loss_value = tape.data(loss)[0];
            tape.backward(loss)?;
            let grads = pass.trainable_grads(&tape);
            let stats = pass.bn_stats.map(|s| (s.mean, s.var));
            Ok((loss_value, grads, stats))
        })
        .collect::<Result<_, _>>()?;

    let mut loss_sum = 0.0;
    let mut grads: Vec<Vec<f64>> = params
        .trainable()
        .iter()
        .map(|t| vec![0.0; t.len()])
        .collect();
    let mut bn_stats = Vec::with_capacity(per_window.len());
    for (loss, window_grads, stats) in per_window {
        loss_sum += loss;
        for (acc, g) in grads.iter_mut().zip(&window_grads) {
            for (a, v) in acc.iter_mut().zip(g) {
                *a += v * scale;
            }
        }
        if let Some(s) = stats {
            bn_stats.push(s);
        }
    }
    Ok(BatchStep {
        loss_sum,
        grads,
        bn_stats,
    })
}

/// Mean reconstruction error over windows, with the normalizer in eval
/// mode and no gradient bookkeeping consumed.
fn validation_loss(
    windows: &[Window],
    params: &TShapeParams,
    config: &ModelConfig,
) -> Result<f64, TrainError> {
    let losses: Vec<f64> = windows
        .par_iter()
        .map(|window| -> Result<f64, TrainError> {
            let mut tape = Tape::new();
            let wid = tape.leaf_from(vec![window.values.len()], window.values.clone(), false)?;
            let pass = forward_fast(&mut tape, wid, params, config, Mode::Eval)?;
            let recon = tape.data(pass.reconstruction);
            let mse = window
                .values
                .iter()
                .zip(recon)
                .map(|(x, r)| (x - r) * (x - r))
                .sum::<f64>()
                / window.values.len() as f64;
            Ok(mse)
        })
        .collect::<Result<_, _>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}
