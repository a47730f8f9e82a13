use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn_ops::{ConvSpec, DEFAULT_EPSILON};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
/// RGB in, RGB out.
pub const IMAGE_CHANNELS: usize = 3;

/// Where the attention product sits relative to the second body conv.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockLayout {
    /// `proj_out(attn(x_b) * x_b)`: projection on both sides of the attention.
    Lka,
    /// `proj_out(x_b) * attn(x_b)`: attention gates the body output.
    PixelAttention,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionKind {
    /// One dense `attn_kernel x attn_kernel` conv.
    Dense,
    /// Pointwise conv, local depthwise conv and dilated depthwise conv.
    Separable,
}

/// Order of the three separable attention layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttentionOrder {
    /// pointwise, local depthwise, dilated depthwise
    #[serde(rename = "1-5-7")]
    PointFirst,
    /// local depthwise, dilated depthwise, pointwise
    #[serde(rename = "5-7-1")]
    PointLast,
}

impl AttentionOrder {
    pub fn tag(self) -> &'static str {
        match self {
            AttentionOrder::PointFirst => "1-5-7",
            AttentionOrder::PointLast => "5-7-1",
        }
    }
}

/// One reconstruction step: a 3x3 conv to `channels`, then a pixel shuffle by `shuffle`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpLayer {
    pub channels: usize,
    pub shuffle: usize,
}

impl UpLayer {
    pub const fn new(channels: usize, shuffle: usize) -> Self {
        Self { channels, shuffle }
    }
}

/// Declarative description of a whole network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub schema_version: u32,
    pub variant_tag: String,
    pub scale: usize,
    pub n_blocks: usize,
    pub width: usize,
    pub expand_width: usize,
    pub block_layout: BlockLayout,
    pub body_kernel: usize,
    pub attention_kind: AttentionKind,
    pub attention_order: AttentionOrder,
    pub attn_local_kernel: usize,
    pub attn_kernel: usize,
    pub attn_dilation: usize,
    pub pixel_norm: bool,
    pub norm_epsilon: f64,
    pub tail_groups: usize,
    pub up_layers: Vec<UpLayer>,
    pub bias: bool,
}

impl ModelConfig {
    /// The block structure shared by every VapSR preset; scale-specific
    /// fields are filled in by the presets.
    pub fn vapsr_base(tag: &str) -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            variant_tag: tag.to_owned(),
            scale: 4,
            n_blocks: 21,
            width: 48,
            expand_width: 64,
            block_layout: BlockLayout::Lka,
            body_kernel: 1,
            attention_kind: AttentionKind::Separable,
            attention_order: AttentionOrder::PointFirst,
            attn_local_kernel: 5,
            attn_kernel: 5,
            attn_dilation: 3,
            pixel_norm: true,
            norm_epsilon: DEFAULT_EPSILON,
            tail_groups: 1,
            up_layers: vec![UpLayer::new(64, 2), UpLayer::new(12, 2)],
            bias: true,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every structural invariant, naming the first one violated.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::config(format!("{}: {msg}", self.variant_tag)));
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return fail(format!(
                "schema_version {} unsupported (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if !matches!(self.scale, 2..=4) {
            return fail(format!("scale {} not in {{2, 3, 4}}", self.scale));
        }
        if self.width == 0 || self.expand_width == 0 {
            return fail("width and expand_width must be positive".into());
        }
        if self.expand_width < self.width {
            return fail(format!(
                "expand_width {} < width {}",
                self.expand_width, self.width
            ));
        }
        if self.block_layout == BlockLayout::PixelAttention && self.expand_width != self.width {
            return fail("pixel_attention layout needs expand_width == width".into());
        }
        for (name, k) in [
            ("body_kernel", self.body_kernel),
            ("attn_local_kernel", self.attn_local_kernel),
            ("attn_kernel", self.attn_kernel),
        ] {
            if k == 0 || k % 2 == 0 {
                return fail(format!("{name} {k} must be odd"));
            }
        }
        if self.attn_dilation == 0 {
            return fail("attn_dilation must be >= 1".into());
        }
        if self.attention_kind == AttentionKind::Dense && self.attn_dilation != 1 {
            return fail("dense attention has no dilation".into());
        }
        if !(self.norm_epsilon > 0.0) {
            return fail(format!("norm_epsilon {} must be > 0", self.norm_epsilon));
        }
        if self.tail_groups == 0 || !self.width.is_multiple_of(self.tail_groups) {
            return fail(format!(
                "tail_groups {} must divide width {}",
                self.tail_groups, self.width
            ));
        }
        if self.up_layers.is_empty() {
            return fail("up_layers is empty".into());
        }
        let product: usize = self.up_layers.iter().map(|u| u.shuffle).product();
        if product != self.scale {
            return fail(format!(
                "product of shuffle factors {product} != scale {}",
                self.scale
            ));
        }
        for (i, u) in self.up_layers.iter().enumerate() {
            let r2 = u.shuffle * u.shuffle;
            if u.shuffle == 0 || u.channels == 0 || u.channels % r2 != 0 {
                return fail(format!(
                    "up layer {i}: {} channels not divisible by shuffle {}^2",
                    u.channels, u.shuffle
                ));
            }
        }
        let last = self.up_layers.last().expect("non-empty");
        if last.channels / (last.shuffle * last.shuffle) != IMAGE_CHANNELS {
            return fail(format!(
                "last up layer yields {} channels, expected {IMAGE_CHANNELS}",
                last.channels / (last.shuffle * last.shuffle)
            ));
        }
        Ok(())
    }

    /// Channels carried through the attention product.
    pub fn product_channels(&self) -> usize {
        match self.block_layout {
            BlockLayout::Lka => self.expand_width,
            BlockLayout::PixelAttention => self.width,
        }
    }

    /// `(kernel, dilation)` of each attention layer in evaluation order.
    pub fn attention_layers(&self) -> Vec<(usize, usize)> {
        match self.attention_kind {
            AttentionKind::Dense => vec![(self.attn_kernel, 1)],
            AttentionKind::Separable => {
                let local = (self.attn_local_kernel, 1);
                let dilated = (self.attn_kernel, self.attn_dilation);
                match self.attention_order {
                    AttentionOrder::PointFirst => vec![(1, 1), local, dilated],
                    AttentionOrder::PointLast => vec![local, dilated, (1, 1)],
                }
            }
        }
    }

    pub(crate) fn conv(&self, spec: ConvSpec) -> ConvSpec {
        spec.with_bias(self.bias)
    }
}
