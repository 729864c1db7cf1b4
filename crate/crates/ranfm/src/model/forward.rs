//! Graph construction for the full model: patch embedding, masking,
//! positional encoding, the L-layer encoder, and the task heads.
//!
//! Training and inference share these builders, so the differentiated path
//! and the evaluation path cannot drift apart.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::model::config::ModelConfig;
use crate::model::params::ParameterSet;
use crate::model::patching::{patchify, TokenSequence};
use crate::model::posenc;
use crate::tensor::Tensor;

/// Epsilon inside every layer normalization.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Graph leaves for every named parameter of a [`ParameterSet`].
pub struct ParamNodes {
    map: BTreeMap<String, NodeId>,
}

impl ParamNodes {
    pub fn get(&self, name: &str) -> Result<NodeId> {
        self.map
            .get(name)
            .copied()
            .ok_or_else(|| Error::Config(format!("parameter `{name}` not bound in graph")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, NodeId)> {
        self.map.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Register every parameter tensor as a graph leaf.
pub fn bind_params(g: &mut Graph, params: &ParameterSet) -> ParamNodes {
    let mut map = BTreeMap::new();
    for (name, tensor) in params.iter() {
        map.insert(name.to_string(), g.leaf(tensor.clone()));
    }
    ParamNodes { map }
}

/// Token layout of an embedded window.
#[derive(Debug, Clone, Copy)]
pub struct TokenLayout {
    pub channels: usize,
    pub num_patches: usize,
}

impl TokenLayout {
    pub fn num_tokens(&self) -> usize {
        self.channels * self.num_patches
    }
}

/// Patchify a normalized C×T window and build the token sequence:
/// projection, optional mask-token replacement, positional encoding.
pub fn build_embedding(
    g: &mut Graph,
    cfg: &ModelConfig,
    nodes: &ParamNodes,
    window_norm: &Tensor,
    mask: Option<&[usize]>,
) -> Result<(NodeId, TokenLayout)> {
    let grid = patchify(window_norm, cfg.patch_len)?;
    let layout = TokenLayout {
        channels: grid.channels,
        num_patches: grid.num_patches,
    };
    let patches = g.leaf(grid.matrix().clone());
    let projected = g.matmul(patches, nodes.get("proj.weight")?)?;
    let mut tokens = g.add_row_broadcast(projected, nodes.get("proj.bias")?)?;
    if let Some(indices) = mask {
        tokens = g.mask_rows(tokens, nodes.get("mask_token")?, indices)?;
    }
    let pe = posenc::tiled_table(
        layout.channels,
        layout.num_patches,
        cfg.embed_dim,
        window_norm.dtype(),
    )?;
    let pe_leaf = g.leaf(pe);
    let encoded = g.add(tokens, pe_leaf)?;
    Ok((encoded, layout))
}

/// L pre-norm layers of {attention, feed-forward} with residual connections,
/// followed by a final norm.
pub fn build_encoder(
    g: &mut Graph,
    cfg: &ModelConfig,
    nodes: &ParamNodes,
    mut x: NodeId,
) -> Result<NodeId> {
    let dh = cfg.head_dim();
    for l in 0..cfg.layers {
        let n1g = nodes.get(&format!("enc.{l}.norm1.gain"))?;
        let n1b = nodes.get(&format!("enc.{l}.norm1.bias"))?;
        let a_in = g.layer_norm(x, n1g, n1b, LAYER_NORM_EPS)?;

        let mut qkv = Vec::with_capacity(3);
        for w in ["wq", "wk", "wv"] {
            let weight = nodes.get(&format!("enc.{l}.attn.{w}.weight"))?;
            let bias = nodes.get(&format!("enc.{l}.attn.{w}.bias"))?;
            let proj = g.matmul(a_in, weight)?;
            qkv.push(g.add_row_broadcast(proj, bias)?);
        }
        let mut heads = Vec::with_capacity(cfg.num_heads);
        for h in 0..cfg.num_heads {
            let c0 = h * dh;
            let c1 = (h + 1) * dh;
            let qh = g.slice_cols(qkv[0], c0, c1)?;
            let kh = g.slice_cols(qkv[1], c0, c1)?;
            let vh = g.slice_cols(qkv[2], c0, c1)?;
            heads.push(g.attention(qh, kh, vh)?);
        }
        let cat = g.concat_cols(&heads)?;
        let wo = g.matmul(cat, nodes.get(&format!("enc.{l}.attn.wo.weight"))?)?;
        let attn_out = g.add_row_broadcast(wo, nodes.get(&format!("enc.{l}.attn.wo.bias"))?)?;
        x = g.add(x, attn_out)?;

        let n2g = nodes.get(&format!("enc.{l}.norm2.gain"))?;
        let n2b = nodes.get(&format!("enc.{l}.norm2.bias"))?;
        let f_in = g.layer_norm(x, n2g, n2b, LAYER_NORM_EPS)?;
        let f1 = g.matmul(f_in, nodes.get(&format!("enc.{l}.ffn.w1.weight"))?)?;
        let f1 = g.add_row_broadcast(f1, nodes.get(&format!("enc.{l}.ffn.w1.bias"))?)?;
        let f1 = g.activation(f1, cfg.activation)?;
        let f2 = g.matmul(f1, nodes.get(&format!("enc.{l}.ffn.w2.weight"))?)?;
        let f2 = g.add_row_broadcast(f2, nodes.get(&format!("enc.{l}.ffn.w2.bias"))?)?;
        x = g.add(x, f2)?;
    }
    g.layer_norm(
        x,
        nodes.get("final_norm.gain")?,
        nodes.get("final_norm.bias")?,
        LAYER_NORM_EPS,
    )
}

/// Stack of M head layers with the activation between (none after the last).
fn build_head_stack(
    g: &mut Graph,
    cfg: &ModelConfig,
    nodes: &ParamNodes,
    prefix: &str,
    mut x: NodeId,
) -> Result<NodeId> {
    for i in 0..cfg.head_layers {
        let w = nodes.get(&format!("{prefix}.{i}.weight"))?;
        let b = nodes.get(&format!("{prefix}.{i}.bias"))?;
        let lin = g.matmul(x, w)?;
        x = g.add_row_broadcast(lin, b)?;
        if i + 1 < cfg.head_layers {
            x = g.activation(x, cfg.activation)?;
        }
    }
    Ok(x)
}

/// Map every token back to patch space and reassemble channel-major:
/// (C·N)×d → C×(N·P), still in normalized units.
pub fn build_recon_head(
    g: &mut Graph,
    cfg: &ModelConfig,
    nodes: &ParamNodes,
    z: NodeId,
    layout: TokenLayout,
) -> Result<NodeId> {
    let per_token = build_head_stack(g, cfg, nodes, "head.recon", z)?;
    g.reshape(
        per_token,
        &[layout.channels, layout.num_patches * cfg.patch_len],
    )
}

/// Flatten each channel's N tokens to N·d and project to the horizon;
/// weights are shared across channels, output is C×H.
pub fn build_forecast_head(
    g: &mut Graph,
    cfg: &ModelConfig,
    nodes: &ParamNodes,
    z: NodeId,
    layout: TokenLayout,
) -> Result<NodeId> {
    let n = layout.num_patches;
    let d = cfg.embed_dim;
    let mut rows = Vec::with_capacity(layout.channels);
    for c in 0..layout.channels {
        let block = g.slice_rows(z, c * n, (c + 1) * n)?;
        let flat = g.reshape(block, &[1, n * d])?;
        rows.push(build_head_stack(g, cfg, nodes, "head.forecast", flat)?);
    }
    if rows.len() == 1 {
        Ok(rows[0])
    } else {
        g.concat_rows(&rows)
    }
}

/// Mean-pool all tokens and project to class logits (1×K).
pub fn build_classify_head(
    g: &mut Graph,
    cfg: &ModelConfig,
    nodes: &ParamNodes,
    z: NodeId,
) -> Result<NodeId> {
    let pooled = g.mean_rows(z)?;
    build_head_stack(g, cfg, nodes, "head.classify", pooled)
}

// ---------------------------------------------------------------------------
// standalone wrappers over the graph builders
// ---------------------------------------------------------------------------

fn seq_layout(seq: &TokenSequence) -> TokenLayout {
    TokenLayout {
        channels: seq.channels,
        num_patches: seq.patches_per_channel,
    }
}

/// Run the encoder stack over an embedded sequence.
pub fn encoder_forward(
    seq: &TokenSequence,
    params: &ParameterSet,
    cfg: &ModelConfig,
) -> Result<TokenSequence> {
    if seq.width() != cfg.embed_dim {
        return Err(Error::ShapeMismatch {
            op: "encoder_forward",
            lhs: seq.embeddings.shape().to_vec(),
            rhs: vec![cfg.embed_dim],
        });
    }
    let mut g = Graph::new();
    let nodes = bind_params(&mut g, params);
    let x = g.leaf(seq.embeddings.clone());
    let out = build_encoder(&mut g, cfg, &nodes, x)?;
    Ok(TokenSequence {
        embeddings: g.value(out).clone(),
        masked: seq.masked.clone(),
        channels: seq.channels,
        patches_per_channel: seq.patches_per_channel,
    })
}

/// Global representation: the arithmetic mean of all token embeddings, [d].
pub fn mean_pool(seq: &TokenSequence) -> Result<Tensor> {
    if seq.num_tokens() == 0 {
        return Err(Error::contract("mean_pool", "empty token sequence"));
    }
    let pooled = crate::ops::mean_rows(&seq.embeddings)?;
    pooled.reshaped(&[seq.width()])
}

/// Reconstruction head over encoded tokens: C×(N·P) in normalized space.
pub fn head_reconstruct(
    seq: &TokenSequence,
    params: &ParameterSet,
    cfg: &ModelConfig,
) -> Result<Tensor> {
    let mut g = Graph::new();
    let nodes = bind_params(&mut g, params);
    let z = g.leaf(seq.embeddings.clone());
    let out = build_recon_head(&mut g, cfg, &nodes, z, seq_layout(seq))?;
    Ok(g.value(out).clone())
}

/// Forecast head over encoded tokens: C×H in normalized space.
pub fn head_forecast(
    seq: &TokenSequence,
    params: &ParameterSet,
    cfg: &ModelConfig,
    horizon: usize,
) -> Result<Tensor> {
    if horizon == 0 {
        return Err(Error::InvalidDimension {
            op: "head_forecast",
            detail: "horizon must be positive".into(),
        });
    }
    let mut g = Graph::new();
    let nodes = bind_params(&mut g, params);
    let z = g.leaf(seq.embeddings.clone());
    let out = build_forecast_head(&mut g, cfg, &nodes, z, seq_layout(seq))?;
    let value = g.value(out);
    if value.cols() != horizon {
        return Err(Error::ShapeMismatch {
            op: "head_forecast",
            lhs: value.shape().to_vec(),
            rhs: vec![seq.channels, horizon],
        });
    }
    Ok(value.clone())
}

/// Classification head over a pooled representation: logits [K].
pub fn head_classify(pooled: &Tensor, params: &ParameterSet, cfg: &ModelConfig) -> Result<Tensor> {
    let d = pooled.numel();
    if d != cfg.embed_dim {
        return Err(Error::ShapeMismatch {
            op: "head_classify",
            lhs: pooled.shape().to_vec(),
            rhs: vec![cfg.embed_dim],
        });
    }
    let mut g = Graph::new();
    let nodes = bind_params(&mut g, params);
    let z = g.leaf(pooled.reshaped(&[1, d])?);
    let out = build_head_stack(&mut g, cfg, &nodes, "head.classify", z)?;
    let k = g.value(out).numel();
    g.value(out).reshaped(&[k])
}
