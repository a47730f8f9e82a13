//! Shipped configurations: the VapSR models, the roadmap and ablation
//! variants, and a tiny model for toy training.
//!
//! Widths, up-layer channels and group counts that the architecture leaves
//! open were fixed by `analysis::calibrate`; its tests check that these
//! values are still the best candidates.

use super::config::{AttentionKind, AttentionOrder, BlockLayout, ModelConfig, UpLayer};
use crate::error::{Error, Result};

fn with_tag(mut cfg: ModelConfig, tag: &str) -> ModelConfig {
    cfg.variant_tag = tag.to_owned();
    cfg
}

/// 21 blocks, 48 -> 64 -> 48, two x2 shuffles.
pub fn vapsr_x4() -> ModelConfig {
    ModelConfig::vapsr_base("vapsr_x4")
}

/// Single up conv straight to 3 * 3^2 channels; 22 blocks.
pub fn vapsr_x3() -> ModelConfig {
    ModelConfig {
        scale: 3,
        n_blocks: 22,
        up_layers: vec![UpLayer::new(27, 3)],
        ..ModelConfig::vapsr_base("vapsr_x3")
    }
}

/// Single up conv straight to 3 * 2^2 channels; 22 blocks.
pub fn vapsr_x2() -> ModelConfig {
    ModelConfig {
        scale: 2,
        n_blocks: 22,
        up_layers: vec![UpLayer::new(12, 2)],
        ..ModelConfig::vapsr_base("vapsr_x2")
    }
}

/// 11 blocks, 32 -> 64 -> 32, grouped refinement conv.
pub fn vapsr_s() -> ModelConfig {
    ModelConfig {
        n_blocks: 11,
        width: 32,
        expand_width: 64,
        tail_groups: 2,
        ..ModelConfig::vapsr_base("vapsr_s")
    }
}

/// 2 blocks of 8 channels at x4, small enough to train in seconds.
pub fn tiny() -> ModelConfig {
    ModelConfig {
        n_blocks: 2,
        width: 8,
        expand_width: 8,
        up_layers: vec![UpLayer::new(32, 2), UpLayer::new(12, 2)],
        ..ModelConfig::vapsr_base("tiny")
    }
}

/// Stage (i): pixel-attention blocks with two 3x3 body convs and a 1x1 attention.
fn stage_i() -> ModelConfig {
    ModelConfig {
        n_blocks: 10,
        width: 64,
        expand_width: 64,
        block_layout: BlockLayout::PixelAttention,
        body_kernel: 3,
        attention_kind: AttentionKind::Dense,
        attention_order: AttentionOrder::PointLast,
        attn_kernel: 1,
        attn_dilation: 1,
        pixel_norm: false,
        up_layers: vec![UpLayer::new(48, 4)],
        ..ModelConfig::vapsr_base("i")
    }
}

fn dense_attention(kernel: usize, tag: &str) -> ModelConfig {
    ModelConfig {
        attn_kernel: kernel,
        ..with_tag(stage_i(), tag)
    }
}

/// Separable 5 + 7(d3) + 1 attention, still with 3x3 body convs.
fn separable_attention() -> ModelConfig {
    ModelConfig {
        attention_kind: AttentionKind::Separable,
        attention_order: AttentionOrder::PointLast,
        attn_kernel: 7,
        attn_dilation: 3,
        ..with_tag(stage_i(), "iv_attn")
    }
}

fn stage_iv() -> ModelConfig {
    ModelConfig {
        body_kernel: 1,
        ..with_tag(separable_attention(), "iv")
    }
}

fn stage_v() -> ModelConfig {
    ModelConfig {
        pixel_norm: true,
        ..with_tag(stage_iv(), "v")
    }
}

fn stage_vi() -> ModelConfig {
    ModelConfig {
        block_layout: BlockLayout::Lka,
        ..with_tag(stage_v(), "vi")
    }
}

fn stage_vi_plus() -> ModelConfig {
    ModelConfig {
        tail_groups: 2,
        ..with_tag(stage_vi(), "vi+")
    }
}

fn stage_vi_plus_plus() -> ModelConfig {
    ModelConfig {
        width: 32,
        expand_width: 64,
        ..with_tag(stage_vi_plus(), "vi++")
    }
}

fn stage_vii() -> ModelConfig {
    ModelConfig {
        up_layers: vec![UpLayer::new(56, 2), UpLayer::new(12, 2)],
        ..with_tag(stage_vi_plus_plus(), "vii")
    }
}

fn sweep(kernel: usize, blocks: usize) -> ModelConfig {
    ModelConfig {
        attn_kernel: kernel,
        n_blocks: blocks,
        ..with_tag(stage_vii(), &format!("k{kernel}_b{blocks}"))
    }
}

/// Roadmap stages in order, each differing from its predecessor by one change.
pub fn roadmap() -> Vec<ModelConfig> {
    vec![
        stage_i(),
        dense_attention(3, "ii_k3"),
        dense_attention(9, "ii_k9"),
        separable_attention(),
        stage_iv(),
        stage_v(),
        stage_vi(),
        stage_vi_plus(),
        stage_vi_plus_plus(),
        stage_vii(),
    ]
}

/// Attention order and kernel/depth sweeps around stage (vii).
pub fn sweeps() -> Vec<ModelConfig> {
    vec![
        ModelConfig {
            attention_order: AttentionOrder::PointFirst,
            ..with_tag(stage_vii(), "vii_157")
        },
        sweep(5, 11),
        sweep(5, 12),
        sweep(9, 9),
        sweep(11, 8),
    ]
}

pub fn main_models() -> Vec<ModelConfig> {
    vec![vapsr_x4(), vapsr_x3(), vapsr_x2(), vapsr_s()]
}

/// Every named variant: roadmap, sweeps, then the main models.
pub fn variant_catalog() -> Vec<ModelConfig> {
    let mut all = roadmap();
    all.extend(sweeps());
    all.extend(main_models());
    all
}

pub fn preset_names() -> Vec<String> {
    let mut names: Vec<String> = variant_catalog().into_iter().map(|c| c.variant_tag).collect();
    names.push("tiny".into());
    names
}

/// Looks up any catalog variant or `tiny` by tag.
pub fn preset(name: &str) -> Result<ModelConfig> {
    if name == "tiny" {
        return Ok(tiny());
    }
    variant_catalog()
        .into_iter()
        .find(|c| c.variant_tag == name)
        .ok_or_else(|| {
            Error::config(format!(
                "unknown preset {name:?}; available: {}",
                preset_names().join(", ")
            ))
        })
}
