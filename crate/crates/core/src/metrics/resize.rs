use super::ImagePlane;
use crate::error::{Error, Result};

/// Keys cubic convolution kernel with `a = -0.5`, support `[-2, 2]`.
pub fn cubic(x: f64) -> f64 {
    let ax = x.abs();
    let (ax2, ax3) = (ax * ax, ax * ax * ax);
    if ax <= 1.0 {
        1.5 * ax3 - 2.5 * ax2 + 1.0
    } else if ax < 2.0 {
        -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0
    } else {
        0.0
    }
}

/// Source indices (edge-clamped) and normalized weights for output sample `i`
/// when resampling `in_len` samples to `out_len`.
///
/// Sample centres follow `u = (i + 0.5) / s - 0.5`; when shrinking the kernel
/// is stretched by `1 / s` so it also low-pass filters.
pub fn bicubic_weights(in_len: usize, out_len: usize, i: usize) -> (Vec<usize>, Vec<f64>) {
    let s = out_len as f64 / in_len as f64;
    let (stretch, width) = if s < 1.0 { (s, 4.0 / s) } else { (1.0, 4.0) };
    let u = (i as f64 + 0.5) / s - 0.5;
    let left = (u - width / 2.0).floor() as isize;
    let taps = width.ceil() as isize + 2;
    let mut idx = Vec::with_capacity(taps as usize);
    let mut wts = Vec::with_capacity(taps as usize);
    for j in left..left + taps {
        let w = stretch * cubic(stretch * (u - j as f64));
        if w != 0.0 {
            idx.push(j.clamp(0, in_len as isize - 1) as usize);
            wts.push(w);
        }
    }
    let sum: f64 = wts.iter().sum();
    for w in &mut wts {
        *w /= sum;
    }
    (idx, wts)
}

fn resample_axis(
    src: &[f64],
    stride: usize,
    plan: &[(Vec<usize>, Vec<f64>)],
    dst: &mut [f64],
    dst_stride: usize,
) {
    for (o, (idx, wts)) in plan.iter().enumerate() {
        // Weighted differences from one tap keep constant signals exactly constant.
        let reference = src[idx[0] * stride];
        let delta: f64 = idx
            .iter()
            .zip(wts)
            .map(|(&j, w)| w * (src[j * stride] - reference))
            .sum();
        dst[o * dst_stride] = reference + delta;
    }
}

/// Separable bicubic resize of every channel to `out_h x out_w`.
pub fn bicubic_resize(img: &ImagePlane, out_h: usize, out_w: usize) -> Result<ImagePlane> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::shape(format!("cannot resize to {out_w}x{out_h}")));
    }
    let (c, h, w) = (img.channels(), img.height(), img.width());
    let plan_w: Vec<_> = (0..out_w).map(|i| bicubic_weights(w, out_w, i)).collect();
    let plan_h: Vec<_> = (0..out_h).map(|i| bicubic_weights(h, out_h, i)).collect();
    let mut out = vec![0.0; c * out_h * out_w];
    let mut tmp = vec![0.0; h * out_w];
    for ch in 0..c {
        let src = img.channel(ch);
        for y in 0..h {
            resample_axis(&src[y * w..], 1, &plan_w, &mut tmp[y * out_w..], 1);
        }
        let dst = &mut out[ch * out_h * out_w..(ch + 1) * out_h * out_w];
        for x in 0..out_w {
            resample_axis(&tmp[x..], out_w, &plan_h, &mut dst[x..], out_w);
        }
    }
    ImagePlane::new(c, out_h, out_w, out)
}
