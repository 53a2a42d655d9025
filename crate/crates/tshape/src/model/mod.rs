//! The TShape network.
//!
//! A window of length `T` is split into `P = T/s` non-overlapping patches.
//! Each patch is described by multi-scale convolutional features pooled
//! over time, normalized and activated, then tagged with a learnable
//! patch-position embedding. Two attention streams — one across feature
//! channels inside the transposed patch matrix, one across patches — are
//! fused by a learned sigmoid gate, and a per-patch linear head maps the
//! fused representation back to a same-length reconstruction of the
//! window. Anomalies are scored by pointwise squared reconstruction error.

mod params;

pub use params::{AttentionWeights, BatchNormParams, ConvScale, GateParams, Linear, TShapeParams};

use crate::tensor::{
    multihead_attention, BatchStats, MhaIds, Tape, Tensor, TensorError, TensorId,
};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("window length {window} is not a multiple of patch length {patch}")]
    PatchMismatch { window: usize, patch: usize },
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("parameters do not match config: {0}")]
    ParamMismatch(String),
}

/// Which part of the network to disable, mirroring the ablation variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    Full,
    NoLocal,
    NoGlobal,
    NoConv,
    SlidingWindow,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [
        Ablation::Full,
        Ablation::NoLocal,
        Ablation::NoGlobal,
        Ablation::NoConv,
        Ablation::SlidingWindow,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoLocal => "no_local",
            Ablation::NoGlobal => "no_global",
            Ablation::NoConv => "no_conv",
            Ablation::SlidingWindow => "sliding_window",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ablation::ALL
            .iter()
            .find(|a| a.as_str() == s)
            .copied()
            .ok_or_else(|| format!("unknown ablation `{s}` (expected one of full, no_local, no_global, no_conv, sliding_window)"))
    }
}

/// Forward mode: train uses batch statistics in the normalizer, eval uses
/// the running estimates stored with the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Window length `T`.
    pub window_t: usize,
    /// Patch length `s`; must divide `window_t`.
    pub patch_s: usize,
    /// Odd convolution kernel sizes, one parallel branch per entry.
    pub kernel_sizes: Vec<usize>,
    /// Channels per convolution scale `C_m`.
    pub channels_per_scale: usize,
    /// Heads of the channel-wise attention; must divide the patch count.
    pub heads_local: usize,
    /// Heads of the patch-wise attention; must divide the feature width.
    pub heads_global: usize,
    pub ablation: Ablation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            window_t: 256,
            patch_s: 16,
            kernel_sizes: vec![3, 5, 7],
            channels_per_scale: 16,
            heads_local: 4,
            heads_global: 4,
            ablation: Ablation::Full,
        }
    }
}

impl ModelConfig {
    /// Number of patches `P = T/s`.
    pub fn patch_count(&self) -> usize {
        self.window_t / self.patch_s
    }

    /// Feature width `C = |K| · C_m`.
    pub fn feature_dim(&self) -> usize {
        self.kernel_sizes.len() * self.channels_per_scale
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.window_t == 0 || self.patch_s == 0 {
            return Err(ModelError::Config(
                "window and patch lengths must be positive".into(),
            ));
        }
        if self.window_t % self.patch_s != 0 {
            return Err(ModelError::Config(format!(
                "patch length {} must divide window length {}",
                self.patch_s, self.window_t
            )));
        }
        if self.kernel_sizes.is_empty() {
            return Err(ModelError::Config("at least one kernel size required".into()));
        }
        for &k in &self.kernel_sizes {
            if k % 2 == 0 {
                return Err(ModelError::Config(format!("kernel size {k} must be odd")));
            }
            if k > 2 * self.patch_s - 1 {
                return Err(ModelError::Config(format!(
                    "kernel size {k} exceeds padded patch length {}",
                    2 * self.patch_s - 1
                )));
            }
        }
        if self.channels_per_scale == 0 {
            return Err(ModelError::Config("channels per scale must be positive".into()));
        }
        let p = self.patch_count();
        let c = self.feature_dim();
        if self.heads_local == 0 || p % self.heads_local != 0 {
            return Err(ModelError::Config(format!(
                "heads_local {} must divide patch count {p}",
                self.heads_local
            )));
        }
        if self.heads_global == 0 || c % self.heads_global != 0 {
            return Err(ModelError::Config(format!(
                "heads_global {} must divide feature width {c}",
                self.heads_global
            )));
        }
        Ok(())
    }
}

/// Tape handles of every parameter inserted for one forward pass, in the
/// same order as [`TShapeParams::trainable_names`].
#[derive(Debug, Clone)]
pub struct ParamIds {
    pub conv: Vec<(TensorId, TensorId)>,
    pub proj: Option<(TensorId, TensorId)>,
    pub bn: Option<(TensorId, TensorId)>,
    pub pos_embedding: TensorId,
    pub local: Option<MhaIds>,
    pub global: Option<MhaIds>,
    pub gate: Option<(TensorId, TensorId)>,
    pub head: (TensorId, TensorId),
}

impl ParamIds {
    /// Trainable tensor handles in canonical order.
    pub fn trainable(&self) -> Vec<TensorId> {
        let mut ids = Vec::new();
        for &(k, b) in &self.conv {
            ids.push(k);
            ids.push(b);
        }
        if let Some((w, b)) = self.proj {
            ids.push(w);
            ids.push(b);
        }
        if let Some((g, b)) = self.bn {
            ids.push(g);
            ids.push(b);
        }
        ids.push(self.pos_embedding);
        for mha in [&self.local, &self.global].into_iter().flatten() {
            ids.push(mha.wq);
            ids.push(mha.wk);
            ids.push(mha.wv);
            ids.push(mha.wo);
        }
        if let Some((w, b)) = self.gate {
            ids.push(w);
            ids.push(b);
        }
        ids.push(self.head.0);
        ids.push(self.head.1);
        ids
    }
}

/// Handles to every intermediate of one forward pass.
#[derive(Debug)]
pub struct ForwardPass {
    pub params: ParamIds,
    /// `[P × s]` patch matrix.
    pub patches: TensorId,
    /// Per-patch, per-scale convolution maps `[C_m × s]`; empty unless the
    /// convolution path ran.
    pub conv_maps: Vec<Vec<TensorId>>,
    /// Per-patch, per-scale pooled feature rows `[1 × C_m]`.
    pub pooled: Vec<Vec<TensorId>>,
    /// `[P × C]` features before normalization and activation.
    pub pre_features: TensorId,
    /// `[P × C]` features `U`.
    pub features: TensorId,
    /// `[P × C]` position-encoded features `V`.
    pub encoded: TensorId,
    /// Channel-attention branch output (equals `encoded` when ablated).
    pub local_out: TensorId,
    /// Patch-attention branch output (equals `encoded` when ablated).
    pub global_out: TensorId,
    /// Per-head `[C × C]` attention probabilities of the channel stream.
    pub local_attn: Vec<TensorId>,
    /// Per-head `[P × P]` attention probabilities of the patch stream.
    pub global_attn: Vec<TensorId>,
    /// Sigmoid gate `[P × C]`; absent when fusion is bypassed.
    pub gate: Option<TensorId>,
    /// Fused representation `H`.
    pub fused: TensorId,
    /// `[P × s]` per-patch reconstruction.
    pub patch_recon: TensorId,
    /// `[T]` reconstruction of the input window.
    pub reconstruction: TensorId,
    /// Batch statistics of the train-mode normalizer, for running updates.
    pub bn_stats: Option<BatchStats>,
}

impl ForwardPass {
    /// Gradients of all trainable parameters after `tape.backward`, in
    /// canonical order.
    pub fn trainable_grads(&self, tape: &Tape) -> Vec<Vec<f64>> {
        self.params
            .trainable()
            .iter()
            .map(|&id| tape.grad(id).expect("backward must run first").to_vec())
            .collect()
    }

    /// Copy every intermediate out of the tape for inspection or export.
    pub fn trace(&self, tape: &Tape) -> ForwardTrace {
        let take = |id: TensorId| tape.value(id).clone();
        ForwardTrace {
            patches: take(self.patches),
            conv_maps: self
                .conv_maps
                .iter()
                .map(|row| row.iter().map(|&id| take(id)).collect())
                .collect(),
            pooled: self
                .pooled
                .iter()
                .map(|row| row.iter().map(|&id| take(id)).collect())
                .collect(),
            pre_features: take(self.pre_features),
            features: take(self.features),
            encoded: take(self.encoded),
            local_out: take(self.local_out),
            global_out: take(self.global_out),
            local_attn: self.local_attn.iter().map(|&id| take(id)).collect(),
            global_attn: self.global_attn.iter().map(|&id| take(id)).collect(),
            gate: self.gate.map(take),
            fused: take(self.fused),
            patch_recon: take(self.patch_recon),
            reconstruction: take(self.reconstruction),
        }
    }
}

/// Owned copies of the forward intermediates.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub patches: Tensor,
    pub conv_maps: Vec<Vec<Tensor>>,
    pub pooled: Vec<Vec<Tensor>>,
    pub pre_features: Tensor,
    pub features: Tensor,
    pub encoded: Tensor,
    pub local_out: Tensor,
    pub global_out: Tensor,
    pub local_attn: Vec<Tensor>,
    pub global_attn: Vec<Tensor>,
    pub gate: Option<Tensor>,
    pub fused: Tensor,
    pub patch_recon: Tensor,
    pub reconstruction: Tensor,
}

/// Split a `[T]` window into the `[P × s]` patch matrix.
pub fn patch_split(tape: &mut Tape, window: TensorId, patch_s: usize) -> Result<TensorId, ModelError> {
    let len = tape.data(window).len();
    if patch_s == 0 || len % patch_s != 0 {
        return Err(ModelError::PatchMismatch {
            window: len,
            patch: patch_s,
        });
    }
    Ok(tape.reshape(window, vec![len / patch_s, patch_s])?)
}

/// Inject patch-order information: `V = U + E`.
pub fn add_positional(
    tape: &mut Tape,
    features: TensorId,
    embedding: TensorId,
) -> Result<TensorId, ModelError> {
    Ok(tape.add(features, embedding)?)
}

/// Attention across feature channels of the transposed patch matrix, with
/// a residual connection: transpose `V` to `[C × P]`, attend over the `C`
/// channel tokens, transpose back, add `V`.
pub fn local_attention(
    tape: &mut Tape,
    encoded: TensorId,
    weights: MhaIds,
    heads: usize,
) -> Result<(TensorId, Vec<TensorId>), ModelError> {
    let vt = tape.transpose(encoded)?;
    let (out, probs) = multihead_attention(tape, vt, vt, vt, weights, heads)?;
    let out_t = tape.transpose(out)?;
    Ok((tape.add(out_t, encoded)?, probs))
}

/// Attention across the `P` patch tokens, with a residual connection.
pub fn global_attention(
    tape: &mut Tape,
    encoded: TensorId,
    weights: MhaIds,
    heads: usize,
) -> Result<(TensorId, Vec<TensorId>), ModelError> {
    let (out, probs) = multihead_attention(tape, encoded, encoded, encoded, weights, heads)?;
    Ok((tape.add(out, encoded)?, probs))
}

/// Convex per-feature combination of the two branches through a learned
/// sigmoid gate: `H = g ⊙ L + (1−g) ⊙ G` with `g = σ([L;G]·Wg + bg)`.
pub fn gated_fusion(
    tape: &mut Tape,
    local_out: TensorId,
    global_out: TensorId,
    gate_weight: TensorId,
    gate_bias: TensorId,
) -> Result<(TensorId, TensorId), ModelError> {
    let cat = tape.concat_cols(&[local_out, global_out])?;
    let lin = tape.matmul(cat, gate_weight)?;
    let pre = tape.add_bias(lin, gate_bias)?;
    let gate = tape.sigmoid(pre);
    let keep = tape.mul(gate, local_out)?;
    let inv = tape.one_minus(gate);
    let other = tape.mul(inv, global_out)?;
    Ok((tape.add(keep, other)?, gate))
}

/// Pointwise squared reconstruction error.
pub fn anomaly_score(window: &[f64], reconstruction: &[f64]) -> Vec<f64> {
    assert_eq!(
        window.len(),
        reconstruction.len(),
        "window and reconstruction lengths differ"
    );
    window
        .iter()
        .zip(reconstruction)
        .map(|(x, r)| (x - r) * (x - r))
        .collect()
}

/// Run the network on a `[T]` window leaf, materializing every
/// intermediate (per-patch convolution maps included) for inspection.
pub fn forward(
    tape: &mut Tape,
    window: TensorId,
    params: &TShapeParams,
    config: &ModelConfig,
    mode: Mode,
) -> Result<ForwardPass, ModelError> {
    forward_impl(tape, window, params, config, mode, true)
}

/// Run the network with the per-patch convolution and pooling collapsed
/// into fused linear maps. Numerically equal to [`forward`] up to float
/// summation order; the trace omits the per-patch convolution maps.
pub fn forward_fast(
    tape: &mut Tape,
    window: TensorId,
    params: &TShapeParams,
    config: &ModelConfig,
    mode: Mode,
) -> Result<ForwardPass, ModelError> {
    forward_impl(tape, window, params, config, mode, false)
}

fn forward_impl(
    tape: &mut Tape,
    window: TensorId,
    params: &TShapeParams,
    config: &ModelConfig,
    mode: Mode,
    traced: bool,
) -> Result<ForwardPass, ModelError> {
    config.validate()?;
    params.check_against(config)?;
    let p = config.patch_count();
    let s = config.patch_s;
    let ids = params.insert_into(tape);

    let patches = patch_split(tape, window, s)?;

    // patch features
    let mut conv_maps = Vec::new();
    let mut pooled = Vec::new();
    let mut bn_stats = None;
    let (pre_features, features) = match config.ablation {
        Ablation::NoConv => {
            let (w, b) = ids.proj.expect("checked by check_against");
            let projected = tape.matmul(patches, w)?;
            let pre = tape.add_bias(projected, b)?;
            (pre, pre)
        }
        Ablation::SlidingWindow => {
            let window_values = tape.data(window).to_vec();
            let feats = sliding_window_features(&window_values, config);
            let pre = tape.leaf_from(vec![p, config.feature_dim()], feats, false)?;
            let (bn_out, stats) = normalize_features(tape, pre, &ids, params, mode)?;
            bn_stats = stats;
            (pre, tape.gelu(bn_out))
        }
        _ if traced => {
            let mut patch_rows = Vec::with_capacity(p);
            for i in 0..p {
                let row = tape.slice_rows(patches, i, 1)?; // [1 × s]
                let mut scale_rows = Vec::with_capacity(ids.conv.len());
                let mut maps = Vec::with_capacity(ids.conv.len());
                let mut zs = Vec::with_capacity(ids.conv.len());
                for &(kernels, bias) in &ids.conv {
                    let h = tape.conv1d(row, kernels, bias)?; // [C_m × s]
                    let z = tape.mean_lastdim(h)?; // [C_m]
                    let zrow = tape.reshape(z, vec![1, config.channels_per_scale])?;
                    maps.push(h);
                    zs.push(zrow);
                    scale_rows.push(zrow);
                }
                conv_maps.push(maps);
                pooled.push(zs);
                patch_rows.push(tape.concat_cols(&scale_rows)?); // [1 × C]
            }
            let pre = tape.concat_rows(&patch_rows)?; // [P × C]
            let (bn_out, stats) = normalize_features(tape, pre, &ids, params, mode)?;
            bn_stats = stats;
            (pre, tape.gelu(bn_out))
        }
        _ => {
            let per_scale: Vec<TensorId> = ids
                .conv
                .iter()
                .map(|&(kernels, bias)| tape.patch_conv_pool(patches, kernels, bias))
                .collect::<Result<_, _>>()?; // each [P × C_m]
            let pre = tape.concat_cols(&per_scale)?; // [P × C]
            let (bn_out, stats) = normalize_features(tape, pre, &ids, params, mode)?;
            bn_stats = stats;
            (pre, tape.gelu(bn_out))
        }
    };

    // patch-order information
    let encoded = add_positional(tape, features, ids.pos_embedding)?;

    // channel stream: attend across feature channels of the transposed matrix
    let (local_out, local_attn) = match ids.local {
        Some(w) => local_attention(tape, encoded, w, config.heads_local)?,
        None => (encoded, Vec::new()),
    };

    // patch stream: attend across patch tokens
    let (global_out, global_attn) = match ids.global {
        Some(w) => global_attention(tape, encoded, w, config.heads_global)?,
        None => (encoded, Vec::new()),
    };

    // fuse the two streams, or pass the single surviving one through
    let (fused, gate) = match (config.ablation, ids.gate) {
        (Ablation::NoLocal, _) => (global_out, None),
        (Ablation::NoGlobal, _) => (local_out, None),
        (_, Some((wg, bg))) => {
            let (h, g) = gated_fusion(tape, local_out, global_out, wg, bg)?;
            (h, Some(g))
        }
        (_, None) => unreachable!("gate presence checked by check_against"),
    };

    // per-patch linear head back to the signal domain
    let projected = tape.matmul(fused, ids.head.0)?;
    let patch_recon = tape.add_bias(projected, ids.head.1)?;
    let reconstruction = tape.reshape(patch_recon, vec![config.window_t])?;

    Ok(ForwardPass {
        params: ids,
        patches,
        conv_maps,
        pooled,
        pre_features,
        features,
        encoded,
        local_out,
        global_out,
        local_attn,
        global_attn,
        gate,
        fused,
        patch_recon,
        reconstruction,
        bn_stats,
    })
}

fn normalize_features(
    tape: &mut Tape,
    pre: TensorId,
    ids: &ParamIds,
    params: &TShapeParams,
    mode: Mode,
) -> Result<(TensorId, Option<BatchStats>), ModelError> {
    let (gamma, beta) = ids.bn.expect("bn presence checked by check_against");
    let bn = params.bn.as_ref().expect("bn presence checked");
    match mode {
        Mode::Train => {
            let (out, stats) = tape.batchnorm_train(pre, gamma, beta, BatchNormParams::EPS)?;
            Ok((out, Some(stats)))
        }
        Mode::Eval => {
            let out = tape.batchnorm_eval(
                pre,
                gamma,
                beta,
                bn.running_mean.data(),
                bn.running_var.data(),
                BatchNormParams::EPS,
            )?;
            Ok((out, None))
        }
    }
}

/// Parameter-free stand-in for the convolution block: per scale, a
/// same-padded moving average over each patch (dividing by the in-bounds
/// count), pooled over time and tiled across the scale's channels.
fn sliding_window_features(window: &[f64], config: &ModelConfig) -> Vec<f64> {
    let s = config.patch_s;
    let p = config.patch_count();
    let cm = config.channels_per_scale;
    let c = config.feature_dim();
    let mut out = vec![0.0; p * c];
    for i in 0..p {
        let patch = &window[i * s..(i + 1) * s];
        for (m, &k) in config.kernel_sizes.iter().enumerate() {
            let half = (k - 1) / 2;
            let mut pooled = 0.0;
            for t in 0..s {
                let lo = t.saturating_sub(half);
                let hi = (t + half).min(s - 1);
                let mean: f64 =
                    patch[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
                pooled += mean;
            }
            pooled /= s as f64;
            for ch in 0..cm {
                out[i * c + m * cm + ch] = pooled;
            }
        }
    }
    out
}
