mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use vapsr::analysis::{attention_receptive_field, layer_costs, multi_adds, param_count, receptive_field};
use vapsr::autograd::{adam_step, ema_update, AdamConfig, EmaState, OpKind, OptimizerState, ParamStore, Tape};
use vapsr::metrics::{psnr, ssim, ImagePlane};
use vapsr::model::{forward_graph, presets, ModelConfig};
use vapsr::nn_ops::{conv2d, pixel_norm, pixel_shuffle, pixel_unshuffle, ConvSpec, PixelNormParams};
use vapsr::{Network, Tensor};

fn every_config() -> Vec<ModelConfig> {
    let mut all = presets::variant_catalog();
    all.push(presets::tiny());
    all
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn conv_is_linear(seed in any::<u64>(), case in 0usize..4, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut rng = rng(seed);
        let spec = random_conv_spec(&mut rng, case).with_bias(false);
        let (h, w) = (rng.gen_range(1..8), rng.gen_range(1..8));
        let x: Tensor<f64> = random_tensor(&mut rng, (1, spec.in_channels, h, w), -1.0, 1.0);
        let y: Tensor<f64> = random_tensor(&mut rng, (1, spec.in_channels, h, w), -1.0, 1.0);
        let k: Tensor<f64> = random_tensor(&mut rng, spec.weight_shape(), -1.0, 1.0);
        let mix = Tensor::from_fn(x.shape(), |i| a * x.data()[i] + b * y.data()[i]).unwrap();
        let lhs = conv2d(&mix, &spec, &k, None).unwrap();
        let (cx, cy) = (conv2d(&x, &spec, &k, None).unwrap(), conv2d(&y, &spec, &k, None).unwrap());
        for i in 0..lhs.numel() {
            prop_assert!((lhs.data()[i] - (a * cx.data()[i] + b * cy.data()[i])).abs() < 1e-10);
        }
    }

    #[test]
    fn grouped_conv_equals_block_diagonal_dense(seed in any::<u64>(), groups in 1usize..4, ig in 1usize..3, og in 1usize..3) {
        let mut rng = rng(seed);
        let (cin, cout) = (groups * ig, groups * og);
        let spec = ConvSpec::dense(cin, cout, 3).with_groups(groups).with_bias(false);
        let dense = ConvSpec::dense(cin, cout, 3).with_bias(false);
        let wg: Tensor<f64> = random_tensor(&mut rng, spec.weight_shape(), -1.0, 1.0);
        let mut wd = Tensor::<f64>::zeros(dense.weight_shape()).unwrap();
        for oc in 0..cout {
            let g = oc / og;
            for icg in 0..ig {
                for t in 0..9 {
                    wd.data_mut()[(oc * cin + g * ig + icg) * 9 + t] = wg.data()[(oc * ig + icg) * 9 + t];
                }
            }
        }
        let x: Tensor<f64> = random_tensor(&mut rng, (1, cin, 5, 6), -1.0, 1.0);
        let a = conv2d(&x, &spec, &wg, None).unwrap();
        let b = conv2d(&x, &dense, &wd, None).unwrap();
        prop_assert!(max_abs_diff(a.data(), b.data()) < 1e-12);
    }

    #[test]
    fn pixel_norm_ignores_per_pixel_shifts(seed in any::<u64>(), c in 2usize..9) {
        let mut rng = rng(seed);
        let x: Tensor<f64> = random_tensor(&mut rng, (1, c, 3, 4), -2.0, 2.0);
        let shifts: Vec<f64> = (0..12).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let moved = Tensor::from_fn(x.shape(), |i| x.data()[i] + shifts[i % 12]).unwrap();
        let p = PixelNormParams::identity(c);
        let (a, b) = (pixel_norm(&x, &p).unwrap(), pixel_norm(&moved, &p).unwrap());
        prop_assert!(max_abs_diff(a.data(), b.data()) < 1e-9);
    }

    #[test]
    fn shuffle_is_a_bijection(seed in any::<u64>(), r in 1usize..4, c in 1usize..3, h in 1usize..5, w in 1usize..5) {
        let mut rng = rng(seed);
        let x: Tensor<f32> = random_tensor(&mut rng, (2, c * r * r, h, w), -1.0, 1.0);
        let y = pixel_shuffle(&x, r).unwrap();
        prop_assert_eq!(y.shape().dims(), [2, c, h * r, w * r]);
        prop_assert_eq!(pixel_unshuffle(&y, r).unwrap(), x.clone());
        let mut a = x.data().to_vec();
        let mut b = y.data().to_vec();
        a.sort_by(f32::total_cmp);
        b.sort_by(f32::total_cmp);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn receptive_field_adds_and_commutes(layers in prop::collection::vec((0usize..5, 1usize..5), 1..6), split in 0usize..6) {
        let layers: Vec<(usize, usize)> = layers.into_iter().map(|(k, d)| (2 * k + 1, d)).collect();
        let split = split.min(layers.len());
        let whole = receptive_field(&layers).unwrap();
        let (head, tail) = layers.split_at(split);
        let parts = receptive_field(head).unwrap() + receptive_field(tail).unwrap() - 1;
        prop_assert_eq!(whole, parts);
        let mut rev = layers.clone();
        rev.reverse();
        prop_assert_eq!(receptive_field(&rev).unwrap(), whole);
    }

    #[test]
    fn psnr_is_symmetric_and_ssim_bounded(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let a = ImagePlane::from_fn(1, 12, 12, |_| rng.gen_range(0.0..1.0)).unwrap();
        let noise: Vec<f64> = (0..144).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let b = ImagePlane::from_fn(1, 12, 12, |i| (a.values()[i] + noise[i]).clamp(0.0, 1.0)).unwrap();
        prop_assert_eq!(psnr(&a, &b, 0).unwrap(), psnr(&b, &a, 0).unwrap());
        let s = ssim(&a, &b, 0).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s));
        prop_assert!((ssim(&a, &a, 0).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((s - ssim(&b, &a, 0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn optimizer_steps_are_deterministic(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let mut params = ParamStore::<f32>::new();
        params.insert("a", random_tensor(&mut rng, (2, 3, 1, 1), -1.0, 1.0)).unwrap();
        params.insert("b", random_tensor(&mut rng, (1, 4, 2, 2), -1.0, 1.0)).unwrap();
        let mut grads = params.zeros_like();
        for (_, t) in grads.iter_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        }
        let run = || {
            let mut p = params.clone();
            let mut opt = OptimizerState::new(&p, AdamConfig::default());
            let mut ema = EmaState::new(&p);
            for _ in 0..3 {
                adam_step(&mut p, &grads, &mut opt).unwrap();
                ema_update(&mut ema, &p).unwrap();
            }
            (p, ema.debiased(3))
        };
        prop_assert_eq!(run(), run());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn features_are_translation_equivariant(seed in any::<u64>(), dy in 1usize..4, dx in 1usize..4) {
        let cfg = presets::tiny();
        let net = Network::<f32>::init(cfg.clone(), seed).unwrap();
        // Stack of per-layer radii bounds how far padding can reach.
        let margin: usize = layer_costs(&cfg, 1, 1)
            .iter()
            .filter(|l| !l.name.starts_with("up."))
            .map(|l| (l.rf_kernel - 1) * l.rf_dilation / 2)
            .sum();
        let n = 2 * margin + 8;
        let mut rng = rng(seed);
        let big: Tensor<f32> = random_tensor(&mut rng, (1, 3, n + dy, n + dx), 0.0, 1.0);
        let window = |oy: usize, ox: usize| {
            Tensor::from_fn((1, 3, n, n), |i| {
                let (c, y, x) = (i / (n * n), i / n % n, i % n);
                big.at(0, c, y + oy, x + ox)
            })
            .unwrap()
        };
        let fa = net.features(&window(0, 0)).unwrap();
        let fb = net.features(&window(dy, dx)).unwrap();
        for c in 0..cfg.width {
            for y in margin..n - margin - dy {
                for x in margin..n - margin - dx {
                    let (p, q) = (fb.at(0, c, y, x), fa.at(0, c, y + dy, x + dx));
                    prop_assert!((p - q).abs() <= 1e-5, "({c},{y},{x}): {p} vs {q}");
                }
            }
        }
    }
}

#[test]
fn one_gelu_per_block() {
    for cfg in every_config() {
        let net = Network::<f32>::init(cfg.clone(), 0).unwrap();
        let mut tape = Tape::new(net.params());
        let x = tape.leaf(Tensor::full((1, 3, 4, 4), 0.5).unwrap());
        forward_graph(&mut tape, &cfg, &x).unwrap();
        assert_eq!(tape.count(OpKind::Gelu), cfg.n_blocks, "{}", cfg.variant_tag);
        assert_eq!(tape.count(OpKind::PixelShuffle), cfg.up_layers.len());
        let norms = if cfg.pixel_norm { cfg.n_blocks } else { 0 };
        assert_eq!(tape.count(OpKind::PixelNorm), norms);
    }
}

#[test]
fn parameter_count_is_additive_and_matches_the_store() {
    for cfg in every_config() {
        let total = param_count(&cfg);
        let by_layer: u64 = layer_costs(&cfg, 8, 8).iter().map(|l| l.params).sum();
        assert_eq!(total, by_layer, "{}", cfg.variant_tag);
        let net = Network::<f32>::init(cfg.clone(), 0).unwrap();
        assert_eq!(net.params().scalar_count() as u64, total, "{}", cfg.variant_tag);
    }
}

#[test]
fn multi_adds_scale_with_output_area() {
    for cfg in every_config() {
        let s = cfg.scale;
        let base = multi_adds(&cfg, 12 * s, 20 * s).unwrap();
        assert_eq!(multi_adds(&cfg, 24 * s, 40 * s).unwrap(), 4 * base);
        assert!(multi_adds(&cfg, 12 * s + 1, 20 * s).is_err() || s == 1);
    }
}

#[test]
fn configs_round_trip_through_json() {
    for cfg in every_config() {
        assert_eq!(ModelConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}

#[test]
fn empirical_receptive_field_matches_formula() {
    for cfg in [presets::vapsr_x4(), presets::tiny(), ModelConfig { attn_kernel: 5, ..presets::tiny() }] {
        let rf = attention_receptive_field(&cfg);
        assert_eq!(probe_support(&cfg, 3, 5), (rf, rf), "{}", cfg.variant_tag);
    }
}

#[test]
fn init_and_forward_are_deterministic() {
    let cfg = presets::tiny();
    let a = Network::<f32>::init(cfg.clone(), 17).unwrap();
    let b = Network::<f32>::init(cfg.clone(), 17).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, Network::<f32>::init(cfg, 18).unwrap());
    let x = Tensor::from_fn((1, 3, 9, 7), |i| (i % 17) as f32 / 17.0).unwrap();
    assert_eq!(a.forward(&x).unwrap(), b.forward(&x).unwrap());
}

#[test]
fn tiny_model_golden_output() {
    let net = Network::<f32>::init(presets::tiny(), 0).unwrap();
    let x = Tensor::from_fn((1, 3, 8, 8), |i| ((i * 37) % 101) as f32 / 100.0).unwrap();
    let y = net.forward(&x).unwrap();
    assert_eq!(y.shape().dims(), [1, 3, 32, 32]);
    let mut h = crc32fast::Hasher::new();
    for v in y.data() {
        h.update(&v.to_le_bytes());
    }
    assert_eq!(h.finalize(), 610_877_679, "golden hash changed");
}

#[test]
fn zero_block_network_still_upsamples() {
    let cfg = ModelConfig {
        n_blocks: 0,
        ..presets::tiny()
    };
    let net = Network::<f32>::init(cfg.clone(), 1).unwrap();
    assert!(net.params().names().all(|n| !n.starts_with("blocks.")));
    let x = Tensor::full((1, 3, 5, 6), 0.25f32).unwrap();
    assert_eq!(net.forward(&x).unwrap().shape().dims(), [1, 3, 20, 24]);
    let mut tape = Tape::new(net.params());
    let v = tape.leaf(x);
    forward_graph(&mut tape, &cfg, &v).unwrap();
    assert_eq!(tape.count(OpKind::Gelu), 0);
}
