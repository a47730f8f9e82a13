//! Reference implementations and fixtures shared by the integration tests.
//! The oracles never call into the library's kernels.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vapsr::analysis::receptive_field;
use vapsr::autograd::{Graph, ParamStore, Tape};
use vapsr::model::ModelConfig;
use vapsr::nn_ops::ConvSpec;
use vapsr::{Real, Shape, Tensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor<T: Real>(rng: &mut ChaCha8Rng, shape: impl Into<Shape>, lo: f64, hi: f64) -> Tensor<T> {
    let shape = shape.into();
    let data = (0..shape.numel()).map(|_| T::from_acc(rng.gen_range(lo..hi))).collect();
    Tensor::from_values(shape, data).unwrap()
}

/// Plain nested-loop convolution with explicit bounds checks, in f64.
pub fn conv_oracle<T: Real>(x: &Tensor<T>, spec: &ConvSpec, w: &Tensor<T>, bias: Option<&[T]>) -> Vec<f64> {
    let s = x.shape();
    let (cin, cout, g) = (spec.in_channels, spec.out_channels, spec.groups);
    let (in_g, out_g) = (cin / g, cout / g);
    let (k, d) = (spec.kernel as i64, spec.dilation as i64);
    let pad = (k - 1) * d / 2;
    let xv = |n: usize, c: usize, y: i64, xx: i64| -> f64 {
        if y < 0 || xx < 0 || y >= s.h as i64 || xx >= s.w as i64 {
            0.0
        } else {
            x.data()[((n * s.c + c) * s.h + y as usize) * s.w + xx as usize].acc()
        }
    };
    let wv = |oc: usize, ic: usize, ky: i64, kx: i64| -> f64 {
        w.data()[((oc * in_g + ic) * k as usize + ky as usize) * k as usize + kx as usize].acc()
    };
    let mut out = Vec::with_capacity(s.n * cout * s.h * s.w);
    for n in 0..s.n {
        for oc in 0..cout {
            let grp = oc / out_g;
            for oy in 0..s.h as i64 {
                for ox in 0..s.w as i64 {
                    let mut acc = bias.map_or(0.0, |b| b[oc].acc());
                    for icg in 0..in_g {
                        let ic = grp * in_g + icg;
                        for ky in 0..k {
                            for kx in 0..k {
                                acc += xv(n, ic, oy + ky * d - pad, ox + kx * d - pad) * wv(oc, icg, ky, kx);
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
    }
    out
}

/// erf by its Maclaurin series (accurate to ~1e-15 for |x| <= 3) and the
/// asymptotic tail beyond.
pub fn erf_series(x: f64) -> f64 {
    if x.abs() > 5.5 {
        return x.signum();
    }
    let mut term = x;
    let mut sum = x;
    let x2 = x * x;
    for n in 1..200 {
        term *= -x2 / n as f64;
        let add = term / (2 * n + 1) as f64;
        sum += add;
        if add.abs() < 1e-18 {
            break;
        }
    }
    sum * 2.0 / std::f64::consts::PI.sqrt()
}

pub fn gelu_oracle(x: f64) -> f64 {
    0.5 * x * (1.0 + erf_series(x / std::f64::consts::SQRT_2))
}

/// Per-pixel channel mean and population variance by two explicit passes.
pub fn pixel_moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Pixel normalization written out per pixel.
pub fn pixel_norm_oracle(x: &[f64], c: usize, hw: usize, gamma: &[f64], beta: &[f64], eps: f64) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for p in 0..hw {
        let col: Vec<f64> = (0..c).map(|ch| x[ch * hw + p]).collect();
        let (mean, var) = pixel_moments(&col);
        for ch in 0..c {
            out[ch * hw + p] = (col[ch] - mean) / (var + eps).sqrt() * gamma[ch] + beta[ch];
        }
    }
    out
}

pub fn psnr_oracle(a: &[f64], b: &[f64], h: usize, w: usize, crop: usize) -> f64 {
    let mut se = 0.0;
    let mut count = 0usize;
    for y in crop..h - crop {
        for x in crop..w - crop {
            let d = a[y * w + x] - b[y * w + x];
            se += d * d;
            count += 1;
        }
    }
    if se == 0.0 {
        return f64::INFINITY;
    }
    -10.0 * (se / count as f64).log10()
}

/// Windowed SSIM evaluated directly with a 2-D window at every valid position.
pub fn ssim_oracle(a: &[f64], b: &[f64], h: usize, w: usize) -> f64 {
    let size = 11usize;
    let sigma = 1.5f64;
    let mut win = vec![0.0; size * size];
    for i in 0..size {
        for j in 0..size {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            win[i * size + j] = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
        }
    }
    let total: f64 = win.iter().sum();
    win.iter_mut().for_each(|v| *v /= total);
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut acc = 0.0;
    let mut count = 0;
    for y in 0..=h - size {
        for x in 0..=w - size {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..size {
                for j in 0..size {
                    let g = win[i * size + j];
                    let (p, q) = (a[(y + i) * w + x + j], b[(y + i) * w + x + j]);
                    ma += g * p;
                    mb += g * q;
                    saa += g * p * p;
                    sbb += g * q * q;
                    sab += g * p * q;
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    acc / count as f64
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn to_f64<T: Real>(t: &Tensor<T>) -> Vec<f64> {
    t.data().iter().map(|v| v.acc()).collect()
}

/// A random conv spec drawn from dense, grouped, depthwise and dilated kinds.
pub fn random_conv_spec(rng: &mut ChaCha8Rng, case: usize) -> ConvSpec {
    let kernel = [1, 3, 5][rng.gen_range(0..3)];
    let bias = rng.gen_bool(0.5);
    match case % 4 {
        0 => ConvSpec::dense(rng.gen_range(1..5), rng.gen_range(1..5), kernel).with_bias(bias),
        1 => {
            let g = [2, 3][rng.gen_range(0..2)];
            ConvSpec::dense(g * rng.gen_range(1..3), g * rng.gen_range(1..3), kernel)
                .with_groups(g)
                .with_bias(bias)
        }
        2 => ConvSpec::depthwise(rng.gen_range(1..5), kernel.max(3), 1).with_bias(bias),
        _ => ConvSpec::depthwise(rng.gen_range(1..5), [3, 5][rng.gen_range(0..2)], rng.gen_range(2..4))
            .with_bias(bias),
    }
}

/// Gradient support of one output pixel of an attention branch with positive weights.
pub fn probe_support(cfg: &ModelConfig, channels: usize, seed: u64) -> (usize, usize) {
    let layers = cfg.attention_layers();
    let rf = receptive_field(&layers).unwrap();
    let n = rf + 8;
    let mut rng = rng(seed);
    let mut params = ParamStore::<f64>::new();
    let specs: Vec<ConvSpec> = layers
        .iter()
        .map(|&(k, d)| {
            if k == 1 {
                ConvSpec::pointwise(channels, channels).with_bias(false)
            } else {
                ConvSpec::depthwise(channels, k, d).with_bias(false)
            }
        })
        .collect();
    for (i, spec) in specs.iter().enumerate() {
        params.insert(format!("l{i}"), random_tensor(&mut rng, spec.weight_shape(), 0.1, 1.0)).unwrap();
    }
    let mut tape = Tape::new(&params);
    let x = tape.leaf(random_tensor(&mut rng, (1, channels, n, n), 0.1, 1.0));
    let mut y = x;
    for (i, spec) in specs.iter().enumerate() {
        y = tape.conv2d(&y, spec, &format!("l{i}"), None).unwrap();
    }
    let mut seed = Tensor::<f64>::zeros((1, channels, n, n)).unwrap();
    let centre = n / 2;
    seed.data_mut()[centre * n + centre] = 1.0;
    let grads = tape.backward(y, seed).unwrap();
    let g = grads.wrt(x).unwrap();
    let (mut rows, mut cols) = (Vec::new(), Vec::new());
    for c in 0..channels {
        for yy in 0..n {
            for xx in 0..n {
                if g.at(0, c, yy, xx) != 0.0 {
                    rows.push(yy);
                    cols.push(xx);
                }
            }
        }
    }
    let span = |v: &[usize]| v.iter().max().unwrap() - v.iter().min().unwrap() + 1;
    (span(&rows), span(&cols))
}

/// Recomputes the trailing checksum so a mutation reaches the parser.
pub fn reseal(bytes: &mut [u8]) {
    if bytes.len() < 4 {
        return;
    }
    let body = bytes.len() - 4;
    let crc = crc32fast::hash(&bytes[..body]);
    bytes[body..].copy_from_slice(&crc.to_le_bytes());
}

pub fn mutate_archive(rng: &mut rand_chacha::ChaCha8Rng, original: &[u8]) -> Vec<u8> {
    let mut b = original.to_vec();
    // Most fields of interest sit in the header and first tensor records.
    let hot = 600.min(b.len());
    let pos = |rng: &mut rand_chacha::ChaCha8Rng, len: usize| {
        if rng.gen_bool(0.7) { rng.gen_range(0..hot.min(len).max(1)) } else { rng.gen_range(0..len.max(1)) }
    };
    for _ in 0..rng.gen_range(1..4) {
        match rng.gen_range(0..7) {
            0 => {
                let i = pos(rng, b.len());
                b[i] ^= 1 << rng.gen_range(0..8);
            }
            1 => {
                let i = pos(rng, b.len());
                b[i] = rng.gen();
            }
            2 => {
                let n = rng.gen_range(0..b.len());
                b.truncate(n);
            }
            3 => {
                let i = pos(rng, b.len());
                let extra: Vec<u8> = (0..rng.gen_range(1..16)).map(|_| rng.gen()).collect();
                b.splice(i..i, extra);
            }
            4 => {
                let i = pos(rng, b.len());
                let end = (i + rng.gen_range(1..16)).min(b.len());
                b.drain(i..end);
            }
            5 => {
                // Overwrite a 32-bit field with an extreme value.
                let i = pos(rng, b.len().saturating_sub(4));
                let v: u32 = [0, 1, u32::MAX, u32::MAX / 2, 0x8000_0000, rng.gen()][rng.gen_range(0..6)];
                if i + 4 <= b.len() {
                    b[i..i + 4].copy_from_slice(&v.to_le_bytes());
                }
            }
            _ => b.extend((0..rng.gen_range(1..8)).map(|_| rng.gen::<u8>())),
        }
        if b.is_empty() {
            break;
        }
    }
    b
}
