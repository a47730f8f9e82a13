use crate::error::{Error, Result};
use crate::tensor::{Real, Shape, Tensor};

pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Per-channel affine parameters of a pixel normalization layer.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelNormParams<T: Real = f32> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub epsilon: f64,
}

impl<T: Real> PixelNormParams<T> {
    /// `gamma = 1`, `beta = 0`.
    pub fn identity(channels: usize) -> Self {
        Self {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// Forward result plus what the backward pass needs.
pub struct PixelNormOutput<T: Real> {
    pub output: Tensor<T>,
    /// `(x - mu) / sqrt(var + eps)` before the affine step, kept in `f64`.
    pub normalized: Vec<f64>,
    /// `1 / sqrt(var + eps)` per `(n, pixel)`.
    pub inv_std: Vec<f64>,
}

/// Normalizes every pixel's channel vector to zero mean and unit population
/// variance, then applies per-channel `gamma` and `beta`.
pub fn pixel_norm<T: Real>(x: &Tensor<T>, params: &PixelNormParams<T>) -> Result<Tensor<T>> {
    Ok(pixel_norm_forward(x, &params.gamma, &params.beta, params.epsilon)?.output)
}

pub fn pixel_norm_forward<T: Real>(
    x: &Tensor<T>,
    gamma: &[T],
    beta: &[T],
    epsilon: f64,
) -> Result<PixelNormOutput<T>> {
    let Shape { n, c, h, w } = x.shape();
    if gamma.len() != c || beta.len() != c {
        return Err(Error::shape(format!(
            "pixel_norm: {c} channels but gamma/beta have {}/{}",
            gamma.len(),
            beta.len()
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::shape(format!("pixel_norm: epsilon {epsilon} must be > 0")));
    }
    let plane = h * w;
    let mut normalized = vec![0f64; x.numel()];
    let mut inv_std = vec![0f64; n * plane];
    let mut out = vec![T::zero(); x.numel()];
    let inv_c = 1.0 / c as f64;

    for b in 0..n {
        let mut mean = vec![0f64; plane];
        for ch in 0..c {
            for (m, v) in mean.iter_mut().zip(x.plane(b, ch)) {
                *m += v.acc();
            }
        }
        mean.iter_mut().for_each(|m| *m *= inv_c);

        let mut var = vec![0f64; plane];
        for ch in 0..c {
            for ((s, v), m) in var.iter_mut().zip(x.plane(b, ch)).zip(&mean) {
                let d = v.acc() - m;
                *s += d * d;
            }
        }
        let istd = &mut inv_std[b * plane..(b + 1) * plane];
        for (is, s) in istd.iter_mut().zip(&var) {
            *is = 1.0 / (s * inv_c + epsilon).sqrt();
        }

        for ch in 0..c {
            let (g, bt) = (gamma[ch].acc(), beta[ch].acc());
            let base = (b * c + ch) * plane;
            let src = x.plane(b, ch);
            for p in 0..plane {
                let xn = (src[p].acc() - mean[p]) * istd[p];
                normalized[base + p] = xn;
                out[base + p] = T::from_acc(xn * g + bt);
            }
        }
    }
    let output = Tensor::from_values(x.shape(), out)?;
    debug_assert!(!x.is_finite() || output.is_finite());
    Ok(PixelNormOutput {
        output,
        normalized,
        inv_std,
    })
}
