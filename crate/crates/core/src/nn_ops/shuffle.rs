use crate::error::{Error, Result};
use crate::tensor::{Real, Shape, Tensor};

/// Sub-pixel rearrangement `(n, c*r*r, h, w) -> (n, c, h*r, w*r)`.
///
/// `out[n][c][y*r + i][x*r + j] = in[n][c*r*r + i*r + j][y][x]`
pub fn pixel_shuffle<T: Real>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let Shape { n, c, h, w } = x.shape();
    if r == 0 || c % (r * r) != 0 {
        return Err(Error::shape(format!(
            "pixel_shuffle: {c} channels not divisible by {r}^2"
        )));
    }
    if r == 1 {
        return Ok(x.clone());
    }
    let oc = c / (r * r);
    let (oh, ow) = (h * r, w * r);
    let mut out = vec![T::zero(); x.numel()];
    for b in 0..n {
        for co in 0..oc {
            for i in 0..r {
                for j in 0..r {
                    let src = x.plane(b, co * r * r + i * r + j);
                    let base = (b * oc + co) * oh * ow;
                    for y in 0..h {
                        let row = base + (y * r + i) * ow + j;
                        for (xx, &v) in src[y * w..(y + 1) * w].iter().enumerate() {
                            out[row + xx * r] = v;
                        }
                    }
                }
            }
        }
    }
    Tensor::from_values((n, oc, oh, ow), out)
}

/// Inverse of [`pixel_shuffle`].
pub fn pixel_unshuffle<T: Real>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let Shape { n, c, h, w } = x.shape();
    if r == 0 || h % r != 0 || w % r != 0 {
        return Err(Error::shape(format!(
            "pixel_unshuffle: {h}x{w} not divisible by {r}"
        )));
    }
    if r == 1 {
        return Ok(x.clone());
    }
    let (ih, iw) = (h / r, w / r);
    let ic = c * r * r;
    let mut out = vec![T::zero(); x.numel()];
    for b in 0..n {
        for co in 0..c {
            let src = x.plane(b, co);
            for i in 0..r {
                for j in 0..r {
                    let base = (b * ic + co * r * r + i * r + j) * ih * iw;
                    for y in 0..ih {
                        for xx in 0..iw {
                            out[base + y * iw + xx] = src[(y * r + i) * w + xx * r + j];
                        }
                    }
                }
            }
        }
    }
    Tensor::from_values((n, ic, ih, iw), out)
}
