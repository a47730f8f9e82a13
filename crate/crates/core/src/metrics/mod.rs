//! Image planes, luminance, PSNR, SSIM and bicubic resampling.
//!
//! All metrics work on `[0, 1]`-scaled `f64` planes.

mod resize;
mod ssim;

pub use resize::{bicubic_resize, bicubic_weights, cubic};
pub use ssim::{gaussian_window, ssim, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// A `(channels, h, w)` image, row-major, usually 1 (Y) or 3 (RGB) channels.
#[derive(Clone, Debug, PartialEq)]
pub struct ImagePlane {
    channels: usize,
    h: usize,
    w: usize,
    values: Vec<f64>,
}

impl ImagePlane {
    pub fn new(channels: usize, h: usize, w: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 || h == 0 || w == 0 || values.len() != channels * h * w {
            return Err(Error::shape(format!(
                "image ({channels}, {h}, {w}) with {} values",
                values.len()
            )));
        }
        Ok(Self { channels, h, w, values })
    }

    pub fn from_fn(channels: usize, h: usize, w: usize, f: impl FnMut(usize) -> f64) -> Result<Self> {
        Self::new(channels, h, w, (0..channels * h * w).map(f).collect())
    }

    /// Batch item `n` of a tensor.
    pub fn from_tensor<T: Real>(t: &Tensor<T>, n: usize) -> Result<Self> {
        let s = t.shape();
        if n >= s.n {
            return Err(Error::shape(format!("batch index {n} out of range for {s:?}")));
        }
        let len = s.c * s.plane();
        let values = t.data()[n * len..(n + 1) * len].iter().map(|v| v.acc()).collect();
        Self::new(s.c, s.h, s.w, values)
    }

    pub fn to_tensor<T: Real>(&self) -> Tensor<T> {
        Tensor::from_values(
            (1, self.channels, self.h, self.w),
            self.values.iter().map(|&v| T::from_acc(v)).collect(),
        )
        .expect("plane dims are valid")
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.values[(c * self.h + y) * self.w + x]
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.h * self.w;
        &self.values[c * n..(c + 1) * n]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub fn clamp01(&self) -> Self {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    /// Clamps, then snaps to the nearest of 256 levels (ties away from zero).
    pub fn quantize8(&self) -> Self {
        self.map(|v| to_u8(v) as f64 / 255.0)
    }

    /// Drops `crop` pixels from every side.
    pub fn crop_border(&self, crop: usize) -> Result<Self> {
        if 2 * crop >= self.h || 2 * crop >= self.w {
            return Err(Error::shape(format!(
                "border crop {crop} leaves nothing of a {}x{} image",
                self.w, self.h
            )));
        }
        let (h, w) = (self.h - 2 * crop, self.w - 2 * crop);
        let mut values = Vec::with_capacity(self.channels * h * w);
        for c in 0..self.channels {
            for y in 0..h {
                let row = (c * self.h + y + crop) * self.w + crop;
                values.extend_from_slice(&self.values[row..row + w]);
            }
        }
        Self::new(self.channels, h, w, values)
    }

    fn check_same(&self, other: &Self, what: &str) -> Result<()> {
        if (self.channels, self.h, self.w) != (other.channels, other.h, other.w) {
            return Err(Error::shape(format!(
                "{what}: ({}, {}, {}) vs ({}, {}, {})",
                self.channels, self.h, self.w, other.channels, other.h, other.w
            )));
        }
        Ok(())
    }
}

/// `[0, 1]` to 8-bit: clamp, scale, round half away from zero.
pub fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// BT.601 studio-swing luma: `(65.481 R + 128.553 G + 24.966 B + 16) / 255`.
pub fn rgb_to_y(img: &ImagePlane) -> Result<ImagePlane> {
    if img.channels != 3 {
        return Err(Error::shape(format!(
            "rgb_to_y needs 3 channels, got {}",
            img.channels
        )));
    }
    let (r, g, b) = (img.channel(0), img.channel(1), img.channel(2));
    let values = (0..img.h * img.w)
        .map(|i| (65.481 * r[i] + 128.553 * g[i] + 24.966 * b[i] + 16.0) / 255.0)
        .collect();
    ImagePlane::new(1, img.h, img.w, values)
}

/// `10 log10(1 / MSE)` after cropping `border_crop` pixels per side;
/// `f64::INFINITY` for identical images.
pub fn psnr(a: &ImagePlane, b: &ImagePlane, border_crop: usize) -> Result<f64> {
    a.check_same(b, "psnr")?;
    let (a, b) = (a.crop_border(border_crop)?, b.crop_border(border_crop)?);
    // Symmetric in (a, b): the square of the difference does not depend on order.
    let sum: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum();
    if sum == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mse = sum / a.values.len() as f64;
    Ok(10.0 * (1.0 / mse).log10())
}

/// Evaluation pipeline: RGB to Y (optionally rounded to 8-bit levels), then PSNR and SSIM.
pub fn evaluate_y(
    sr: &ImagePlane,
    hr: &ImagePlane,
    border_crop: usize,
    quantize: bool,
) -> Result<(f64, f64)> {
    let prep = |img: &ImagePlane| -> Result<ImagePlane> {
        let y = rgb_to_y(img)?;
        Ok(if quantize { y.quantize8() } else { y })
    };
    let (ya, yb) = (prep(sr)?, prep(hr)?);
    Ok((psnr(&ya, &yb, border_crop)?, ssim(&ya, &yb, border_crop)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rgb(r: f64, g: f64, b: f64) -> ImagePlane {
        ImagePlane::new(3, 1, 1, vec![r, g, b]).unwrap()
    }

    #[test]
    fn luma_endpoints() {
        assert!((rgb_to_y(&rgb(0.0, 0.0, 0.0)).unwrap().values[0] - 16.0 / 255.0).abs() < 1e-15);
        assert!((rgb_to_y(&rgb(1.0, 1.0, 1.0)).unwrap().values[0] - 235.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn psnr_sentinel_and_offset() {
        let a = ImagePlane::from_fn(1, 8, 8, |i| (i % 200) as f64 / 255.0).unwrap();
        assert_eq!(psnr(&a, &a, 0).unwrap(), f64::INFINITY);
        let b = a.map(|v| v + 1.0 / 255.0);
        let p = psnr(&a, &b, 1).unwrap();
        assert!((p - 20.0 * 255f64.log10()).abs() < 1e-9, "{p}");
        assert_eq!(psnr(&a, &b, 0).unwrap(), psnr(&b, &a, 0).unwrap());
    }

    #[test]
    fn shape_and_crop_errors() {
        let a = ImagePlane::from_fn(1, 4, 4, |_| 0.0).unwrap();
        let b = ImagePlane::from_fn(1, 4, 5, |_| 0.0).unwrap();
        assert!(psnr(&a, &b, 0).is_err());
        assert!(psnr(&a, &a, 2).is_err());
    }

    #[test]
    fn quantize_rounds_half_away() {
        // 0.5 * 255 = 127.5 exactly
        assert_eq!(to_u8(0.5), 128);
        assert_eq!(to_u8(-0.2), 0);
        assert_eq!(to_u8(1.7), 255);
    }
}
