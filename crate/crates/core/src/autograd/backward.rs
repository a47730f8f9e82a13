//! Analytic vector-Jacobian products for the forward kernels in `nn_ops`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn_ops::{gelu_grad_scalar, pixel_unshuffle, tap_range, ConvSpec, PAR_THRESHOLD};
use crate::tensor::{Real, Shape, Tensor};

pub struct ConvGrads<T: Real> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Option<Vec<T>>,
}

pub fn conv2d_backward<T: Real>(
    x: &Tensor<T>,
    spec: &ConvSpec,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let Shape { n, h, w, .. } = x.shape();
    if grad_out.shape() != Shape::new(n, spec.out_channels, h, w) {
        return Err(Error::shape(format!(
            "conv backward: upstream {:?} does not match output of {:?}",
            grad_out.shape(),
            x.shape()
        )));
    }
    let plane = h * w;
    let k = spec.kernel;
    let k2 = k * k;
    let (cin_g, cout_g) = (spec.in_per_group(), spec.out_per_group());
    let pad = spec.padding() as isize;
    let d = spec.dilation as isize;
    let parallel = x.numel() * cout_g * k2 >= PAR_THRESHOLD;

    // dL/dW[oc][icl][ky][kx] = sum_b sum_p gy[b][oc][p] * x[b][ic][p + shift]
    let weight_grad = |oc: usize, dst: &mut [T]| {
        let g = oc / cout_g;
        for icl in 0..cin_g {
            let ic = g * cin_g + icl;
            for ky in 0..k {
                let dy = ky as isize * d - pad;
                let (y0, y1) = tap_range(h, dy);
                for kx in 0..k {
                    let dx = kx as isize * d - pad;
                    let (x0, x1) = tap_range(w, dx);
                    if x0 >= x1 {
                        continue;
                    }
                    let mut acc = 0f64;
                    for b in 0..n {
                        let gy = grad_out.plane(b, oc);
                        let xp = x.plane(b, ic);
                        for y in y0..y1 {
                            let src = ((y as isize + dy) * w as isize + dx + x0 as isize) as usize;
                            let xs = &xp[src..src + (x1 - x0)];
                            for (g, v) in gy[y * w + x0..y * w + x1].iter().zip(xs) {
                                acc += g.acc() * v.acc();
                            }
                        }
                    }
                    dst[(icl * k + ky) * k + kx] = T::from_acc(acc);
                }
            }
        }
    };
    let mut gw = vec![T::zero(); spec.weight_count()];
    if parallel {
        gw.par_chunks_mut(cin_g * k2)
            .enumerate()
            .for_each(|(oc, dst)| weight_grad(oc, dst));
    } else {
        gw.chunks_mut(cin_g * k2)
            .enumerate()
            .for_each(|(oc, dst)| weight_grad(oc, dst));
    }

    // dL/dx[b][ic][p + shift] += W[oc][icl][ky][kx] * gy[b][oc][p]
    let input_grad = |idx: usize, dst: &mut [T]| {
        let (b, ic) = (idx / spec.in_channels, idx % spec.in_channels);
        let g = ic / cin_g;
        let icl = ic % cin_g;
        let mut acc = vec![0f64; plane];
        for ocl in 0..cout_g {
            let oc = g * cout_g + ocl;
            let gy = grad_out.plane(b, oc);
            let filter = &weight.data()[(oc * cin_g + icl) * k2..][..k2];
            for ky in 0..k {
                let dy = ky as isize * d - pad;
                let (y0, y1) = tap_range(h, dy);
                for kx in 0..k {
                    let dx = kx as isize * d - pad;
                    let (x0, x1) = tap_range(w, dx);
                    if x0 >= x1 {
                        continue;
                    }
                    let wv = filter[ky * k + kx].acc();
                    for y in y0..y1 {
                        let dst = ((y as isize + dy) * w as isize + dx + x0 as isize) as usize;
                        let src = &gy[y * w + x0..y * w + x1];
                        let out = &mut acc[dst..dst + (x1 - x0)];
                        for (a, &g) in out.iter_mut().zip(src) {
                            *a += wv * g.acc();
                        }
                    }
                }
            }
        }
        for (o, a) in dst.iter_mut().zip(&acc) {
            *o = T::from_acc(*a);
        }
    };
    let mut gx = vec![T::zero(); x.numel()];
    if parallel {
        gx.par_chunks_mut(plane)
            .enumerate()
            .for_each(|(i, dst)| input_grad(i, dst));
    } else {
        gx.chunks_mut(plane)
            .enumerate()
            .for_each(|(i, dst)| input_grad(i, dst));
    }

    let bias = spec.has_bias.then(|| {
        (0..spec.out_channels)
            .map(|oc| {
                let s: f64 = (0..n)
                    .flat_map(|b| grad_out.plane(b, oc))
                    .map(|v| v.acc())
                    .sum();
                T::from_acc(s)
            })
            .collect()
    });

    Ok(ConvGrads {
        input: Tensor::from_values(x.shape(), gx)?,
        weight: Tensor::from_values(spec.weight_shape(), gw)?,
        bias,
    })
}

pub fn gelu_backward<T: Real>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    let d = x.map(|v| T::from_acc(gelu_grad_scalar(v.acc())));
    d.mul(grad_out)
}

pub struct PixelNormGrads<T: Real> {
    pub input: Tensor<T>,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
}

/// Gradient of `y = gamma * xhat + beta` with `xhat` the per-pixel standardized input.
///
/// Per pixel: `dx = inv_std * (g - mean_c(g) - xhat * mean_c(g * xhat))` with `g = dy * gamma`.
pub fn pixel_norm_backward<T: Real>(
    grad_out: &Tensor<T>,
    normalized: &[f64],
    inv_std: &[f64],
    gamma: &[T],
) -> Result<PixelNormGrads<T>> {
    let Shape { n, c, h, w } = grad_out.shape();
    let plane = h * w;
    if normalized.len() != grad_out.numel() || inv_std.len() != n * plane || gamma.len() != c {
        return Err(Error::shape("pixel_norm backward: cached statistics mismatch"));
    }
    let inv_c = 1.0 / c as f64;
    let mut gx = vec![T::zero(); grad_out.numel()];
    let mut ggamma = vec![0f64; c];
    let mut gbeta = vec![0f64; c];

    for b in 0..n {
        let mut mean_g = vec![0f64; plane];
        let mut mean_gx = vec![0f64; plane];
        for ch in 0..c {
            let gam = gamma[ch].acc();
            let base = (b * c + ch) * plane;
            let gy = grad_out.plane(b, ch);
            for p in 0..plane {
                let dy = gy[p].acc();
                let xn = normalized[base + p];
                ggamma[ch] += dy * xn;
                gbeta[ch] += dy;
                let g = dy * gam;
                mean_g[p] += g;
                mean_gx[p] += g * xn;
            }
        }
        for ch in 0..c {
            let gam = gamma[ch].acc();
            let base = (b * c + ch) * plane;
            let gy = grad_out.plane(b, ch);
            for p in 0..plane {
                let g = gy[p].acc() * gam;
                let xn = normalized[base + p];
                let v = inv_std[b * plane + p] * (g - mean_g[p] * inv_c - xn * mean_gx[p] * inv_c);
                gx[base + p] = T::from_acc(v);
            }
        }
    }
    Ok(PixelNormGrads {
        input: Tensor::from_values(grad_out.shape(), gx)?,
        gamma: ggamma.into_iter().map(T::from_acc).collect(),
        beta: gbeta.into_iter().map(T::from_acc).collect(),
    })
}

pub fn pixel_shuffle_backward<T: Real>(grad_out: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    pixel_unshuffle(grad_out, r)
}
