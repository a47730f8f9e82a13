//! Model configs, presets and the network built from them.

pub mod config;
mod network;
pub mod presets;

pub use config::{
    AttentionKind, AttentionOrder, BlockLayout, ModelConfig, UpLayer, CONFIG_SCHEMA_VERSION,
    IMAGE_CHANNELS,
};
pub use network::{
    block_graph, features_graph, forward_graph, forward_vab, layer_plan, parameter_layout,
    ConvWeights, LayerKind, LayerSpec, Network, VabWeights,
};
pub use presets::{preset, preset_names, variant_catalog};
