//! Learnable state of the network, addressable by path for checkpoints.

use super::{Ablation, ModelConfig, ModelError, ParamIds};
use crate::tensor::{MhaIds, Tape, Tensor, TensorId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvScale {
    /// `[C_m × 1 × k]` kernel stack.
    pub kernels: Tensor,
    /// `[C_m]` bias.
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
}

impl BatchNormParams {
    pub const EPS: f64 = 1e-5;
    pub const MOMENTUM: f64 = 0.1;

    /// Fold one batch's statistics into the running estimates.
    pub fn update_running(&mut self, mean: &[f64], var: &[f64]) {
        for (r, m) in self.running_mean.data_mut().iter_mut().zip(mean) {
            *r = (1.0 - Self::MOMENTUM) * *r + Self::MOMENTUM * m;
        }
        for (r, v) in self.running_var.data_mut().iter_mut().zip(var) {
            *r = (1.0 - Self::MOMENTUM) * *r + Self::MOMENTUM * v;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    pub wq: Tensor,
    pub wk: Tensor,
    pub wv: Tensor,
    pub wo: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    /// `[2C × C]` projection of the concatenated branch outputs.
    pub weight: Tensor,
    /// `[C]` bias.
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Every learnable array of the model, plus the normalizer's running
/// statistics. Which components exist depends on the ablation variant.
#[derive(Debug, Clone, PartialEq)]
pub struct TShapeParams {
    pub conv_scales: Vec<ConvScale>,
    /// Raw-patch projection used by the `no_conv` variant.
    pub proj: Option<Linear>,
    pub bn: Option<BatchNormParams>,
    /// `[P × C]` patch-position embedding.
    pub pos_embedding: Tensor,
    pub local_attn: Option<AttentionWeights>,
    pub global_attn: Option<AttentionWeights>,
    pub gate: Option<GateParams>,
    /// `[C × s]` + `[s]` per-patch reconstruction head.
    pub head: Linear,
}

/// Standard normal via Box-Muller, fully determined by the RNG stream.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

fn normal_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>, std: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| normal(rng) * std).collect();
    let mut t = Tensor::new(shape, data).unwrap();
    t.requires_grad = true;
    t
}

fn zero_param(shape: Vec<usize>) -> Tensor {
    let mut t = Tensor::zeros(shape);
    t.requires_grad = true;
    t
}

fn attention_weights(rng: &mut ChaCha8Rng, dim: usize) -> AttentionWeights {
    let std = 1.0 / (dim as f64).sqrt();
    AttentionWeights {
        wq: normal_tensor(rng, vec![dim, dim], std),
        wk: normal_tensor(rng, vec![dim, dim], std),
        wv: normal_tensor(rng, vec![dim, dim], std),
        wo: normal_tensor(rng, vec![dim, dim], std),
    }
}

impl TShapeParams {
    /// Fresh parameters for `config`, seeded for reproducibility.
    ///
    /// Projection weights draw from `N(0, 1/fan_in)`, the position
    /// embedding from `N(0, 1)`, biases start at zero, and the normalizer
    /// starts at identity with zero-mean unit-variance running stats.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = config.patch_count();
        let s = config.patch_s;
        let c = config.feature_dim();
        let cm = config.channels_per_scale;

        let uses_conv = !matches!(config.ablation, Ablation::NoConv | Ablation::SlidingWindow);
        let conv_scales = if uses_conv {
            config
                .kernel_sizes
                .iter()
                .map(|&k| ConvScale {
                    kernels: normal_tensor(&mut rng, vec![cm, 1, k], 1.0 / (k as f64).sqrt()),
                    bias: zero_param(vec![cm]),
                })
                .collect()
        } else {
            Vec::new()
        };
        let proj = (config.ablation == Ablation::NoConv).then(|| Linear {
            weight: normal_tensor(&mut rng, vec![s, c], 1.0 / (s as f64).sqrt()),
            bias: zero_param(vec![c]),
        });
        let bn = (config.ablation != Ablation::NoConv).then(|| BatchNormParams {
            gamma: {
                let mut g = Tensor::filled(vec![c], 1.0);
                g.requires_grad = true;
                g
            },
            beta: zero_param(vec![c]),
            running_mean: Tensor::zeros(vec![c]),
            running_var: Tensor::filled(vec![c], 1.0),
        });
        let pos_embedding = normal_tensor(&mut rng, vec![p, c], 1.0);
        let local_attn =
            (config.ablation != Ablation::NoLocal).then(|| attention_weights(&mut rng, p));
        let global_attn =
            (config.ablation != Ablation::NoGlobal).then(|| attention_weights(&mut rng, c));
        let gate = (!matches!(config.ablation, Ablation::NoLocal | Ablation::NoGlobal)).then(
            || GateParams {
                weight: normal_tensor(&mut rng, vec![2 * c, c], 1.0 / (2.0 * c as f64).sqrt()),
                bias: zero_param(vec![c]),
            },
        );
        let head = Linear {
            weight: normal_tensor(&mut rng, vec![c, s], 1.0 / (c as f64).sqrt()),
            bias: zero_param(vec![s]),
        };
        Ok(TShapeParams {
            conv_scales,
            proj,
            bn,
            pos_embedding,
            local_attn,
            global_attn,
            gate,
            head,
        })
    }

    /// Verify component presence and shapes against `config`.
    pub fn check_against(&self, config: &ModelConfig) -> Result<(), ModelError> {
        let p = config.patch_count();
        let s = config.patch_s;
        let c = config.feature_dim();
        let cm = config.channels_per_scale;
        let uses_conv = !matches!(config.ablation, Ablation::NoConv | Ablation::SlidingWindow);

        if uses_conv {
            if self.conv_scales.len() != config.kernel_sizes.len() {
                return Err(ModelError::ParamMismatch(format!(
                    "expected {} convolution scales, found {}",
                    config.kernel_sizes.len(),
                    self.conv_scales.len()
                )));
            }
            for (scale, &k) in self.conv_scales.iter().zip(&config.kernel_sizes) {
                if scale.kernels.shape() != [cm, 1, k] {
                    return Err(ModelError::ParamMismatch(format!(
                        "kernel stack for size {k} has shape {:?}",
                        scale.kernels.shape()
                    )));
                }
            }
        } else if !self.conv_scales.is_empty() {
            return Err(ModelError::ParamMismatch(
                "convolution parameters present but variant does not use them".into(),
            ));
        }
        if (config.ablation == Ablation::NoConv) != self.proj.is_some() {
            return Err(ModelError::ParamMismatch(
                "raw-patch projection presence does not match variant".into(),
            ));
        }
        if let Some(proj) = &self.proj {
            if proj.weight.shape() != [s, c] {
                return Err(ModelError::ParamMismatch(format!(
                    "projection weight has shape {:?}, expected [{s}, {c}]",
                    proj.weight.shape()
                )));
            }
        }
        if (config.ablation != Ablation::NoConv) != self.bn.is_some() {
            return Err(ModelError::ParamMismatch(
                "normalizer presence does not match variant".into(),
            ));
        }
        if let Some(bn) = &self.bn {
            if bn.gamma.shape() != [c] {
                return Err(ModelError::ParamMismatch(format!(
                    "gamma has shape {:?}, expected [{c}]",
                    bn.gamma.shape()
                )));
            }
        }
        if self.pos_embedding.shape() != [p, c] {
            return Err(ModelError::ParamMismatch(format!(
                "position embedding has shape {:?}, expected [{p}, {c}]",
                self.pos_embedding.shape()
            )));
        }
        if (config.ablation != Ablation::NoLocal) != self.local_attn.is_some() {
            return Err(ModelError::ParamMismatch(
                "channel-attention presence does not match variant".into(),
            ));
        }
        if let Some(attn) = &self.local_attn {
            if attn.wq.shape() != [p, p] {
                return Err(ModelError::ParamMismatch(format!(
                    "channel-attention weights have shape {:?}, expected [{p}, {p}]",
                    attn.wq.shape()
                )));
            }
        }
        if (config.ablation != Ablation::NoGlobal) != self.global_attn.is_some() {
            return Err(ModelError::ParamMismatch(
                "patch-attention presence does not match variant".into(),
            ));
        }
        if let Some(attn) = &self.global_attn {
            if attn.wq.shape() != [c, c] {
                return Err(ModelError::ParamMismatch(format!(
                    "patch-attention weights have shape {:?}, expected [{c}, {c}]",
                    attn.wq.shape()
                )));
            }
        }
        let wants_gate = !matches!(config.ablation, Ablation::NoLocal | Ablation::NoGlobal);
        if wants_gate != self.gate.is_some() {
            return Err(ModelError::ParamMismatch(
                "gate presence does not match variant".into(),
            ));
        }
        if let Some(gate) = &self.gate {
            if gate.weight.shape() != [2 * c, c] {
                return Err(ModelError::ParamMismatch(format!(
                    "gate weight has shape {:?}, expected [{}, {c}]",
                    gate.weight.shape(),
                    2 * c
                )));
            }
        }
        if self.head.weight.shape() != [c, s] {
            return Err(ModelError::ParamMismatch(format!(
                "head weight has shape {:?}, expected [{c}, {s}]",
                self.head.weight.shape()
            )));
        }
        Ok(())
    }

    /// Copy every trainable tensor onto `tape` as gradient-tracked leaves.
    pub fn insert_into(&self, tape: &mut Tape) -> ParamIds {
        let leaf = |tape: &mut Tape, t: &Tensor| -> TensorId { tape.leaf(t.clone()) };
        let conv = self
            .conv_scales
            .iter()
            .map(|s| (leaf(tape, &s.kernels), leaf(tape, &s.bias)))
            .collect();
        let proj = self
            .proj
            .as_ref()
            .map(|p| (leaf(tape, &p.weight), leaf(tape, &p.bias)));
        let bn = self
            .bn
            .as_ref()
            .map(|b| (leaf(tape, &b.gamma), leaf(tape, &b.beta)));
        let pos_embedding = leaf(tape, &self.pos_embedding);
        let mha = |tape: &mut Tape, w: &AttentionWeights| MhaIds {
            wq: leaf(tape, &w.wq),
            wk: leaf(tape, &w.wk),
            wv: leaf(tape, &w.wv),
            wo: leaf(tape, &w.wo),
        };
        let local = self.local_attn.as_ref().map(|w| mha(tape, w));
        let global = self.global_attn.as_ref().map(|w| mha(tape, w));
        let gate = self
            .gate
            .as_ref()
            .map(|g| (leaf(tape, &g.weight), leaf(tape, &g.bias)));
        let head = (leaf(tape, &self.head.weight), leaf(tape, &self.head.bias));
        ParamIds {
            conv,
            proj,
            bn,
            pos_embedding,
            local,
            global,
            gate,
            head,
        }
    }

    /// Names of the trainable tensors, in the canonical order shared with
    /// [`ParamIds::trainable`] and the `trainable_*` accessors.
    pub fn trainable_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (m, _) in self.conv_scales.iter().enumerate() {
            names.push(format!("conv.{m}.kernels"));
            names.push(format!("conv.{m}.bias"));
        }
        if self.proj.is_some() {
            names.push("proj.weight".into());
            names.push("proj.bias".into());
        }
        if self.bn.is_some() {
            names.push("bn.gamma".into());
            names.push("bn.beta".into());
        }
        names.push("pos_embedding".into());
        for (prefix, attn) in [("local_attn", &self.local_attn), ("global_attn", &self.global_attn)]
        {
            if attn.is_some() {
                for w in ["wq", "wk", "wv", "wo"] {
                    names.push(format!("{prefix}.{w}"));
                }
            }
        }
        if self.gate.is_some() {
            names.push("gate.weight".into());
            names.push("gate.bias".into());
        }
        names.push("head.weight".into());
        names.push("head.bias".into());
        names
    }

    pub fn trainable(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for s in &self.conv_scales {
            out.push(&s.kernels);
            out.push(&s.bias);
        }
        if let Some(p) = &self.proj {
            out.push(&p.weight);
            out.push(&p.bias);
        }
        if let Some(b) = &self.bn {
            out.push(&b.gamma);
            out.push(&b.beta);
        }
        out.push(&self.pos_embedding);
        for attn in [&self.local_attn, &self.global_attn].into_iter().flatten() {
            out.push(&attn.wq);
            out.push(&attn.wk);
            out.push(&attn.wv);
            out.push(&attn.wo);
        }
        if let Some(g) = &self.gate {
            out.push(&g.weight);
            out.push(&g.bias);
        }
        out.push(&self.head.weight);
        out.push(&self.head.bias);
        out
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for s in &mut self.conv_scales {
            out.push(&mut s.kernels);
            out.push(&mut s.bias);
        }
        if let Some(p) = &mut self.proj {
            out.push(&mut p.weight);
            out.push(&mut p.bias);
        }
        if let Some(b) = &mut self.bn {
            out.push(&mut b.gamma);
            out.push(&mut b.beta);
        }
        out.push(&mut self.pos_embedding);
        for attn in [&mut self.local_attn, &mut self.global_attn]
            .into_iter()
            .flatten()
        {
            out.push(&mut attn.wq);
            out.push(&mut attn.wk);
            out.push(&mut attn.wv);
            out.push(&mut attn.wo);
        }
        if let Some(g) = &mut self.gate {
            out.push(&mut g.weight);
            out.push(&mut g.bias);
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }

    /// All tensors including running statistics, for checkpointing.
    pub fn all_named(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = self
            .trainable_names()
            .into_iter()
            .zip(self.trainable())
            .collect();
        if let Some(bn) = &self.bn {
            out.push(("bn.running_mean".into(), &bn.running_mean));
            out.push(("bn.running_var".into(), &bn.running_var));
        }
        out
    }

    /// Mutable view over all tensors including running statistics. Entries
    /// are matched by name, not position.
    pub fn all_named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = Vec::new();
        for (m, s) in self.conv_scales.iter_mut().enumerate() {
            out.push((format!("conv.{m}.kernels"), &mut s.kernels));
            out.push((format!("conv.{m}.bias"), &mut s.bias));
        }
        if let Some(p) = &mut self.proj {
            out.push(("proj.weight".into(), &mut p.weight));
            out.push(("proj.bias".into(), &mut p.bias));
        }
        if let Some(b) = &mut self.bn {
            out.push(("bn.gamma".into(), &mut b.gamma));
            out.push(("bn.beta".into(), &mut b.beta));
            out.push(("bn.running_mean".into(), &mut b.running_mean));
            out.push(("bn.running_var".into(), &mut b.running_var));
        }
        out.push(("pos_embedding".into(), &mut self.pos_embedding));
        for (prefix, attn) in [
            ("local_attn", &mut self.local_attn),
            ("global_attn", &mut self.global_attn),
        ] {
            if let Some(w) = attn {
                out.push((format!("{prefix}.wq"), &mut w.wq));
                out.push((format!("{prefix}.wk"), &mut w.wk));
                out.push((format!("{prefix}.wv"), &mut w.wv));
                out.push((format!("{prefix}.wo"), &mut w.wo));
            }
        }
        if let Some(g) = &mut self.gate {
            out.push(("gate.weight".into(), &mut g.weight));
            out.push(("gate.bias".into(), &mut g.bias));
        }
        out.push(("head.weight".into(), &mut self.head.weight));
        out.push(("head.bias".into(), &mut self.head.bias));
        out
    }
}
