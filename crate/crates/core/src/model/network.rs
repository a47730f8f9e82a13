use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{AttentionKind, AttentionOrder, BlockLayout, ModelConfig, IMAGE_CHANNELS};
use crate::autograd::{Eager, Graph, ParamStore};
use crate::error::{Error, Result};
use crate::nn_ops::{self, ConvSpec};
use crate::tensor::{Real, Shape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LayerKind {
    Conv(ConvSpec),
    PixelNorm { channels: usize },
    /// Elementwise attention product.
    Product { channels: usize },
}

/// One costed layer of the network, in evaluation order.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    /// Spatial size of the layer input relative to the LR image (1 in the body).
    pub resolution: usize,
}

/// Conv specs of one block's attention branch, named by role.
fn attention_specs(cfg: &ModelConfig) -> Vec<(&'static str, ConvSpec)> {
    let c = cfg.product_channels();
    match cfg.attention_kind {
        AttentionKind::Dense => vec![("attn.dense", cfg.conv(ConvSpec::dense(c, c, cfg.attn_kernel)))],
        AttentionKind::Separable => {
            let point = ("attn.point", cfg.conv(ConvSpec::pointwise(c, c)));
            let local = ("attn.dw", cfg.conv(ConvSpec::depthwise(c, cfg.attn_local_kernel, 1)));
            let dilated = (
                "attn.dw_dilated",
                cfg.conv(ConvSpec::depthwise(c, cfg.attn_kernel, cfg.attn_dilation)),
            );
            match cfg.attention_order {
                AttentionOrder::PointFirst => vec![point, local, dilated],
                AttentionOrder::PointLast => vec![local, dilated, point],
            }
        }
    }
}

fn extract_spec(cfg: &ModelConfig) -> ConvSpec {
    cfg.conv(ConvSpec::dense(IMAGE_CHANNELS, cfg.width, 3))
}

fn proj_in_spec(cfg: &ModelConfig) -> ConvSpec {
    cfg.conv(ConvSpec::dense(cfg.width, cfg.expand_width, cfg.body_kernel))
}

fn proj_out_spec(cfg: &ModelConfig) -> ConvSpec {
    cfg.conv(ConvSpec::dense(cfg.expand_width, cfg.width, cfg.body_kernel))
}

fn refine_spec(cfg: &ModelConfig) -> ConvSpec {
    cfg.conv(ConvSpec::dense(cfg.width, cfg.width, 3).with_groups(cfg.tail_groups))
}

/// `(conv, shuffle factor)` for each reconstruction step.
fn up_specs(cfg: &ModelConfig) -> Vec<(ConvSpec, usize)> {
    let mut cin = cfg.width;
    cfg.up_layers
        .iter()
        .map(|u| {
            let spec = cfg.conv(ConvSpec::dense(cin, u.channels, 3));
            cin = u.channels / (u.shuffle * u.shuffle);
            (spec, u.shuffle)
        })
        .collect()
}

fn block_prefix(i: usize) -> String {
    format!("blocks.{i}")
}

/// Every costed layer of `cfg` in evaluation order.
pub fn layer_plan(cfg: &ModelConfig) -> Vec<LayerSpec> {
    let mut plan = Vec::new();
    let mut push = |name: String, kind: LayerKind, resolution: usize| {
        plan.push(LayerSpec { name, kind, resolution })
    };
    push("extract".into(), LayerKind::Conv(extract_spec(cfg)), 1);
    for i in 0..cfg.n_blocks {
        let p = block_prefix(i);
        push(format!("{p}.proj_in"), LayerKind::Conv(proj_in_spec(cfg)), 1);
        let attn = attention_specs(cfg);
        for (role, spec) in attn {
            push(format!("{p}.{role}"), LayerKind::Conv(spec), 1);
        }
        let product = LayerKind::Product {
            channels: cfg.product_channels(),
        };
        match cfg.block_layout {
            BlockLayout::Lka => {
                push(format!("{p}.product"), product, 1);
                push(format!("{p}.proj_out"), LayerKind::Conv(proj_out_spec(cfg)), 1);
            }
            BlockLayout::PixelAttention => {
                push(format!("{p}.proj_out"), LayerKind::Conv(proj_out_spec(cfg)), 1);
                push(format!("{p}.product"), product, 1);
            }
        }
        if cfg.pixel_norm {
            push(format!("{p}.norm"), LayerKind::PixelNorm { channels: cfg.width }, 1);
        }
    }
    push("refine".into(), LayerKind::Conv(refine_spec(cfg)), 1);
    let mut res = 1;
    for (j, (spec, r)) in up_specs(cfg).into_iter().enumerate() {
        push(format!("up.{j}"), LayerKind::Conv(spec), res);
        res *= r;
    }
    plan
}

/// Parameter names and shapes in storage order.
pub fn parameter_layout(cfg: &ModelConfig) -> Vec<(String, Shape)> {
    let mut out = Vec::new();
    for layer in layer_plan(cfg) {
        match layer.kind {
            LayerKind::Conv(spec) => {
                out.push((format!("{}.weight", layer.name), spec.weight_shape()));
                if spec.has_bias {
                    out.push((
                        format!("{}.bias", layer.name),
                        Shape::new(1, spec.out_channels, 1, 1),
                    ));
                }
            }
            LayerKind::PixelNorm { channels } => {
                out.push((format!("{}.gamma", layer.name), Shape::new(1, channels, 1, 1)));
                out.push((format!("{}.beta", layer.name), Shape::new(1, channels, 1, 1)));
            }
            LayerKind::Product { .. } => {}
        }
    }
    out
}

fn conv_layer<T: Real, G: Graph<T>>(
    g: &mut G,
    x: &G::Value,
    spec: &ConvSpec,
    name: &str,
) -> Result<G::Value> {
    let weight = format!("{name}.weight");
    let bias = format!("{name}.bias");
    g.conv2d(x, spec, &weight, spec.has_bias.then_some(bias.as_str()))
}

/// One attention block applied to `x_a`.
pub fn block_graph<T: Real, G: Graph<T>>(
    g: &mut G,
    cfg: &ModelConfig,
    index: usize,
    x_a: &G::Value,
) -> Result<G::Value> {
    let p = block_prefix(index);
    let h = conv_layer(g, x_a, &proj_in_spec(cfg), &format!("{p}.proj_in"))?;
    let x_b = g.gelu(&h)?;
    let mut attn = x_b.clone();
    for (role, spec) in attention_specs(cfg) {
        attn = conv_layer(g, &attn, &spec, &format!("{p}.{role}"))?;
    }
    let x_c = match cfg.block_layout {
        BlockLayout::Lka => {
            let gated = g.mul(&attn, &x_b)?;
            conv_layer(g, &gated, &proj_out_spec(cfg), &format!("{p}.proj_out"))?
        }
        BlockLayout::PixelAttention => {
            let body = conv_layer(g, &x_b, &proj_out_spec(cfg), &format!("{p}.proj_out"))?;
            g.mul(&body, &attn)?
        }
    };
    let sum = g.add(&x_c, x_a)?;
    if cfg.pixel_norm {
        g.pixel_norm(
            &sum,
            &format!("{p}.norm.gamma"),
            &format!("{p}.norm.beta"),
            cfg.norm_epsilon,
        )
    } else {
        Ok(sum)
    }
}

/// Shallow features plus the refined body output, before reconstruction.
pub fn features_graph<T: Real, G: Graph<T>>(
    g: &mut G,
    cfg: &ModelConfig,
    x: &G::Value,
) -> Result<G::Value> {
    let x0 = conv_layer(g, x, &extract_spec(cfg), "extract")?;
    let mut h = x0.clone();
    for i in 0..cfg.n_blocks {
        h = block_graph(g, cfg, i, &h)?;
    }
    let refined = conv_layer(g, &h, &refine_spec(cfg), "refine")?;
    g.add(&refined, &x0)
}

/// Full network: LR image in, SR image out.
pub fn forward_graph<T: Real, G: Graph<T>>(
    g: &mut G,
    cfg: &ModelConfig,
    x: &G::Value,
) -> Result<G::Value> {
    let mut y = features_graph(g, cfg, x)?;
    for (j, (spec, r)) in up_specs(cfg).into_iter().enumerate() {
        let h = conv_layer(g, &y, &spec, &format!("up.{j}"))?;
        y = g.pixel_shuffle(&h, r)?;
    }
    Ok(y)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvWeights<T: Real = f32> {
    pub spec: ConvSpec,
    pub weight: Tensor<T>,
    pub bias: Option<Vec<T>>,
}

impl<T: Real> ConvWeights<T> {
    pub fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        nn_ops::conv2d(x, &self.spec, &self.weight, self.bias.as_deref())
    }
}

/// Weights of a single block, detached from the parameter store.
#[derive(Clone, Debug, PartialEq)]
pub struct VabWeights<T: Real = f32> {
    pub layout: BlockLayout,
    pub proj_in: ConvWeights<T>,
    /// Attention convs in evaluation order.
    pub attention: Vec<ConvWeights<T>>,
    pub proj_out: ConvWeights<T>,
    pub norm: Option<nn_ops::PixelNormParams<T>>,
}

/// Evaluates one block directly from its weights.
pub fn forward_vab<T: Real>(x_a: &Tensor<T>, w: &VabWeights<T>) -> Result<Tensor<T>> {
    let x_b = nn_ops::gelu(&w.proj_in.apply(x_a)?);
    let mut attn = x_b.clone();
    for conv in &w.attention {
        attn = conv.apply(&attn)?;
    }
    let x_c = match w.layout {
        BlockLayout::Lka => w.proj_out.apply(&attn.mul(&x_b)?)?,
        BlockLayout::PixelAttention => w.proj_out.apply(&x_b)?.mul(&attn)?,
    };
    let sum = x_c.add(x_a)?;
    match &w.norm {
        Some(norm) => nn_ops::pixel_norm(&sum, norm),
        None => Ok(sum),
    }
}

/// A configured network with its weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T: Real = f32> {
    config: ModelConfig,
    params: ParamStore<T>,
}

impl<T: Real> Network<T> {
    /// He-uniform conv weights (`U(-b, b)`, `b = sqrt(6 / fan_in)`), zero biases,
    /// identity norms. Deterministic in `seed`.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        for (name, shape) in parameter_layout(&config) {
            let t = if name.ends_with(".weight") {
                let fan_in = shape.c * shape.h * shape.w;
                let bound = (6.0 / fan_in as f64).sqrt();
                Tensor::from_fn(shape, |_| T::from_acc(rng.gen_range(-bound..bound)))?
            } else if name.ends_with(".gamma") {
                Tensor::full(shape, T::one())?
            } else {
                Tensor::zeros(shape)?
            };
            params.insert(name, t)?;
        }
        Ok(Self { config, params })
    }

    /// Wraps existing weights after checking they match the layout exactly.
    pub fn from_params(config: ModelConfig, params: ParamStore<T>) -> Result<Self> {
        config.validate()?;
        let layout = parameter_layout(&config);
        for (name, shape) in &layout {
            let t = params
                .get(name)
                .map_err(|_| Error::config(format!("missing parameter {name}")))?;
            if t.shape() != *shape {
                return Err(Error::shape(format!(
                    "parameter {name}: expected {shape:?}, got {:?}",
                    t.shape()
                )));
            }
        }
        if let Some(extra) = params.names().find(|n| !layout.iter().any(|(l, _)| l == n)) {
            return Err(Error::config(format!("unexpected parameter {extra}")));
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn into_parts(self) -> (ModelConfig, ParamStore<T>) {
        (self.config, self.params)
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            config: self.config.clone(),
            params: self.params.cast(),
        }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.shape().c != IMAGE_CHANNELS {
            return Err(Error::shape(format!(
                "expected {IMAGE_CHANNELS} input channels, got {:?}",
                x.shape()
            )));
        }
        if !x.is_finite() {
            return Err(Error::Numeric("input contains non-finite values".into()));
        }
        Ok(())
    }

    fn check_output(y: Tensor<T>) -> Result<Tensor<T>> {
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::Numeric("network produced non-finite values".into()))
        }
    }

    /// `(N, 3, H, W)` to `(N, 3, H * scale, W * scale)`.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let y = forward_graph(&mut Eager::new(&self.params), &self.config, x)?;
        Self::check_output(y)
    }

    /// The pre-reconstruction feature map at LR resolution.
    pub fn features(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let y = features_graph(&mut Eager::new(&self.params), &self.config, x)?;
        Self::check_output(y)
    }

    pub fn forward_block(&self, index: usize, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_block(index)?;
        block_graph(&mut Eager::new(&self.params), &self.config, index, x)
    }

    fn check_block(&self, index: usize) -> Result<()> {
        if index >= self.config.n_blocks {
            return Err(Error::config(format!(
                "block {index} out of range (n_blocks {})",
                self.config.n_blocks
            )));
        }
        Ok(())
    }

    fn conv_weights(&self, name: &str, spec: ConvSpec) -> Result<ConvWeights<T>> {
        let bias = if spec.has_bias {
            Some(self.params.get(&format!("{name}.bias"))?.data().to_vec())
        } else {
            None
        };
        Ok(ConvWeights {
            spec,
            weight: self.params.get(&format!("{name}.weight"))?.clone(),
            bias,
        })
    }

    pub fn block_weights(&self, index: usize) -> Result<VabWeights<T>> {
        self.check_block(index)?;
        let cfg = &self.config;
        let p = block_prefix(index);
        let attention = attention_specs(cfg)
            .into_iter()
            .map(|(role, spec)| self.conv_weights(&format!("{p}.{role}"), spec))
            .collect::<Result<_>>()?;
        let norm = if cfg.pixel_norm {
            Some(nn_ops::PixelNormParams {
                gamma: self.params.get(&format!("{p}.norm.gamma"))?.data().to_vec(),
                beta: self.params.get(&format!("{p}.norm.beta"))?.data().to_vec(),
                epsilon: cfg.norm_epsilon,
            })
        } else {
            None
        };
        Ok(VabWeights {
            layout: cfg.block_layout,
            proj_in: self.conv_weights(&format!("{p}.proj_in"), proj_in_spec(cfg))?,
            attention,
            proj_out: self.conv_weights(&format!("{p}.proj_out"), proj_out_spec(cfg))?,
            norm,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    fn input(h: usize, w: usize) -> Tensor<f32> {
        Tensor::from_fn((1, 3, h, w), |i| ((i * 37 % 101) as f32) / 100.0).unwrap()
    }

    #[test]
    fn output_shape_follows_scale() {
        for scale in [2, 3, 4] {
            let mut cfg = presets::tiny();
            cfg.scale = scale;
            cfg.up_layers = match scale {
                4 => cfg.up_layers,
                s => vec![super::super::config::UpLayer::new(3 * s * s, s)],
            };
            let net = Network::<f32>::init(cfg, 1).unwrap();
            let y = net.forward(&input(5, 7)).unwrap();
            assert_eq!(y.shape(), Shape::new(1, 3, 5 * scale, 7 * scale));
        }
    }

    #[test]
    fn layout_and_store_agree() {
        let cfg = presets::vapsr_x4();
        let net = Network::<f32>::init(cfg.clone(), 0).unwrap();
        let names: Vec<_> = net.params().names().map(str::to_owned).collect();
        let layout: Vec<_> = parameter_layout(&cfg).into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, layout);
        assert_eq!(names[0], "extract.weight");
        assert!(names.contains(&"blocks.20.attn.dw_dilated.weight".to_owned()));
    }

    #[test]
    fn block_matches_direct_evaluation() {
        let mut cfg = presets::tiny();
        cfg.pixel_norm = true;
        let mut net = Network::<f32>::init(cfg, 3).unwrap();
        // non-trivial norm and biases
        for (name, t) in net.params_mut().iter_mut() {
            if !name.ends_with(".weight") {
                let n = t.numel();
                for (i, v) in t.data_mut().iter_mut().enumerate() {
                    *v += 0.1 * (i as f32 - n as f32 / 2.0) / n as f32;
                }
            }
        }
        let x = Tensor::from_fn((1, 8, 6, 5), |i| (i as f32 * 0.13).sin()).unwrap();
        let a = net.forward_block(1, &x).unwrap();
        let b = forward_vab(&x, &net.block_weights(1).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn from_params_rejects_mismatches() {
        let cfg = presets::tiny();
        let net = Network::<f32>::init(cfg.clone(), 0).unwrap();
        let (_, mut params) = net.into_parts();
        params.insert("extra.weight", Tensor::zeros((1, 1, 1, 1)).unwrap()).unwrap();
        assert!(Network::from_params(cfg.clone(), params).is_err());

        let mut other = cfg.clone();
        other.width = 16;
        other.expand_width = 16;
        let params = Network::<f32>::init(other, 0).unwrap().into_parts().1;
        assert!(Network::from_params(cfg, params).is_err());
    }

    #[test]
    fn init_is_deterministic() {
        let a = Network::<f32>::init(presets::tiny(), 9).unwrap();
        let b = Network::<f32>::init(presets::tiny(), 9).unwrap();
        let c = Network::<f32>::init(presets::tiny(), 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn nan_input_is_a_numeric_error() {
        let net = Network::<f32>::init(presets::tiny(), 0).unwrap();
        let mut x = input(4, 4);
        x.data_mut()[3] = f32::NAN;
        assert!(matches!(net.forward(&x), Err(Error::Numeric(_))));
    }
}
