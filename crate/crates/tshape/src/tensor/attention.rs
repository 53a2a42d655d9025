//! Multi-head scaled dot-product attention composed from tape primitives.

use super::{Tape, TensorError, TensorId};

/// Tape handles of one attention block's projection matrices.
///
/// All four are `[d × d]` where `d` is the model dimension of the token
/// sequence being attended over.
#[derive(Debug, Clone, Copy)]
pub struct MhaIds {
    pub wq: TensorId,
    pub wk: TensorId,
    pub wv: TensorId,
    pub wo: TensorId,
}

/// Standard multi-head attention over `q,k,v: [tokens × d]`.
///
/// Each head attends with scale `1/sqrt(d/heads)`; head outputs are
/// concatenated and passed through the output projection. Returns the
/// output together with every head's `[tokens × tokens]` attention
/// probability matrix.
pub fn multihead_attention(
    tape: &mut Tape,
    q_in: TensorId,
    k_in: TensorId,
    v_in: TensorId,
    weights: MhaIds,
    heads: usize,
) -> Result<(TensorId, Vec<TensorId>), TensorError> {
    let shape = tape.shape(q_in).to_vec();
    if shape.len() != 2 {
        return Err(TensorError::InvalidShape {
            op: "multihead_attention",
            expected: "2-D tensor",
            shape,
        });
    }
    let d = shape[1];
    if heads == 0 || d % heads != 0 {
        return Err(TensorError::HeadsDontDivide { heads, dim: d });
    }
    let d_head = d / heads;
    let scale = 1.0 / (d_head as f64).sqrt();

    let q = tape.matmul(q_in, weights.wq)?;
    let k = tape.matmul(k_in, weights.wk)?;
    let v = tape.matmul(v_in, weights.wv)?;

    let mut head_outputs = Vec::with_capacity(heads);
    let mut attn_probs = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = slice_cols(tape, q, h * d_head, d_head)?;
        let kh = slice_cols(tape, k, h * d_head, d_head)?;
        let vh = slice_cols(tape, v, h * d_head, d_head)?;
        let kt = tape.transpose(kh)?;
        let scores = tape.matmul(qh, kt)?;
        let scaled = tape.scale(scores, scale);
        let probs = tape.softmax_lastdim(scaled)?;
        attn_probs.push(probs);
        head_outputs.push(tape.matmul(probs, vh)?);
    }
    let merged = tape.concat_cols(&head_outputs)?;
    let out = tape.matmul(merged, weights.wo)?;
    Ok((out, attn_probs))
}

/// Column block `[start, start+n)` via transpose + row slice.
fn slice_cols(
    tape: &mut Tape,
    a: TensorId,
    start: usize,
    n: usize,
) -> Result<TensorId, TensorError> {
    let t = tape.transpose(a)?;
    let rows = tape.slice_rows(t, start, n)?;
    tape.transpose(rows)
}
