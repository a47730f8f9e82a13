//! Parameter, Multi-Adds and receptive-field accounting.
//!
//! Multi-Adds convention: one MAC per multiply. A conv costs
//! `k^2 * (C_in / groups) * C_out` per output pixel at the resolution it
//! actually runs at (LR in the body, growing after each shuffle); the
//! attention product costs `C` per pixel; bias adds, GELU and normalization
//! are not counted.

mod calibrate;
mod report;

pub use calibrate::{calibrate, CalibrationChoice, CalibrationReport};
pub use report::{roadmap_report, Report, ReportRow};

use crate::error::{Error, Result};
use crate::model::{layer_plan, LayerKind, ModelConfig};

/// Multi-Adds are quoted for a 1280x720 ground-truth image.
pub const GT_HEIGHT: usize = 720;
pub const GT_WIDTH: usize = 1280;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerCost {
    pub name: String,
    pub params: u64,
    pub macs: u64,
    pub rf_kernel: usize,
    pub rf_dilation: usize,
}

/// Per-layer costs for an `lr_h x lr_w` input.
pub fn layer_costs(cfg: &ModelConfig, lr_h: usize, lr_w: usize) -> Vec<LayerCost> {
    layer_plan(cfg)
        .into_iter()
        .map(|layer| {
            let pixels = (lr_h * layer.resolution * lr_w * layer.resolution) as u64;
            let (params, per_pixel, k, d) = match layer.kind {
                LayerKind::Conv(spec) => (
                    spec.param_count() as u64,
                    spec.weight_count() as u64,
                    spec.kernel,
                    spec.dilation,
                ),
                LayerKind::PixelNorm { channels } => (2 * channels as u64, 0, 1, 1),
                LayerKind::Product { channels } => (0, channels as u64, 1, 1),
            };
            LayerCost {
                name: layer.name,
                params,
                macs: per_pixel * pixels,
                rf_kernel: k,
                rf_dilation: d,
            }
        })
        .collect()
}

/// Exact number of learnable scalars.
pub fn param_count(cfg: &ModelConfig) -> u64 {
    layer_costs(cfg, 1, 1).iter().map(|c| c.params).sum()
}

/// MACs to produce a `gt_h x gt_w` output. Both dims must be multiples of the scale.
pub fn multi_adds(cfg: &ModelConfig, gt_h: usize, gt_w: usize) -> Result<u64> {
    let s = cfg.scale;
    if gt_h == 0 || gt_w == 0 || !gt_h.is_multiple_of(s) || !gt_w.is_multiple_of(s) {
        return Err(Error::config(format!(
            "{gt_w}x{gt_h} output is not divisible by scale {s}"
        )));
    }
    Ok(layer_costs(cfg, gt_h / s, gt_w / s).iter().map(|c| c.macs).sum())
}

/// Largest output size not exceeding `gt_h x gt_w` that the scale divides.
pub fn modcrop(scale: usize, gt_h: usize, gt_w: usize) -> (usize, usize) {
    (gt_h - gt_h % scale, gt_w - gt_w % scale)
}

/// Multi-Adds at the reference size, modcropped for scales that do not divide it.
pub fn reference_multi_adds(cfg: &ModelConfig) -> Result<u64> {
    let (h, w) = modcrop(cfg.scale, GT_HEIGHT, GT_WIDTH);
    multi_adds(cfg, h, w)
}

/// Side of the input window seen by one output of a stride-1 conv stack:
/// `1 + sum((k - 1) * d)`.
pub fn receptive_field(layers: &[(usize, usize)]) -> Result<usize> {
    let mut rf = 1;
    for &(k, d) in layers {
        if k % 2 == 0 || d == 0 {
            return Err(Error::config(format!(
                "receptive field needs odd kernels and dilation >= 1, got ({k}, {d})"
            )));
        }
        rf += (k - 1) * d;
    }
    Ok(rf)
}

/// Receptive field of one block's attention branch.
pub fn attention_receptive_field(cfg: &ModelConfig) -> usize {
    receptive_field(&cfg.attention_layers()).expect("validated config")
}
