use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Real, Shape, Tensor};

/// Below this many multiply-accumulates a kernel runs on the calling thread.
pub(crate) const PAR_THRESHOLD: usize = 1 << 16;

/// Stride-1, "same"-padded 2-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub dilation: usize,
    pub groups: usize,
    pub has_bias: bool,
}

impl ConvSpec {
    pub fn dense(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            dilation: 1,
            groups: 1,
            has_bias: true,
        }
    }

    pub fn pointwise(in_channels: usize, out_channels: usize) -> Self {
        Self::dense(in_channels, out_channels, 1)
    }

    pub fn depthwise(channels: usize, kernel: usize, dilation: usize) -> Self {
        Self {
            in_channels: channels,
            out_channels: channels,
            kernel,
            dilation,
            groups: channels,
            has_bias: true,
        }
    }

    pub fn with_groups(mut self, groups: usize) -> Self {
        self.groups = groups;
        self
    }

    pub fn with_bias(mut self, has_bias: bool) -> Self {
        self.has_bias = has_bias;
        self
    }

    pub fn is_depthwise(&self) -> bool {
        self.groups == self.in_channels && self.in_channels == self.out_channels
    }

    pub fn in_per_group(&self) -> usize {
        self.in_channels / self.groups
    }

    pub fn out_per_group(&self) -> usize {
        self.out_channels / self.groups
    }

    /// `(k - 1) * dilation + 1`
    pub fn effective_kernel(&self) -> usize {
        (self.kernel - 1) * self.dilation + 1
    }

    pub fn padding(&self) -> usize {
        self.effective_kernel() / 2
    }

    pub fn weight_shape(&self) -> Shape {
        Shape::new(
            self.out_channels,
            self.in_per_group(),
            self.kernel,
            self.kernel,
        )
    }

    pub fn weight_count(&self) -> usize {
        self.kernel * self.kernel * self.in_per_group() * self.out_channels
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + if self.has_bias { self.out_channels } else { 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 || self.groups == 0 {
            return Err(Error::shape(format!("degenerate conv {self:?}")));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(Error::shape(format!("kernel {} must be odd", self.kernel)));
        }
        if self.dilation == 0 {
            return Err(Error::shape("dilation must be >= 1"));
        }
        if !self.in_channels.is_multiple_of(self.groups) || !self.out_channels.is_multiple_of(self.groups) {
            return Err(Error::shape(format!(
                "groups {} must divide in {} and out {}",
                self.groups, self.in_channels, self.out_channels
            )));
        }
        Ok(())
    }

    fn check_operands<T: Real>(
        &self,
        x: &Tensor<T>,
        weight: &Tensor<T>,
        bias: Option<&[T]>,
    ) -> Result<()> {
        self.validate()?;
        if x.shape().c != self.in_channels {
            return Err(Error::shape(format!(
                "conv expects {} input channels, got {:?}",
                self.in_channels,
                x.shape()
            )));
        }
        if weight.shape() != self.weight_shape() {
            return Err(Error::shape(format!(
                "conv weight {:?} != expected {:?}",
                weight.shape(),
                self.weight_shape()
            )));
        }
        match (bias, self.has_bias) {
            (Some(b), true) if b.len() == self.out_channels => Ok(()),
            (None, false) => Ok(()),
            (Some(b), _) => Err(Error::shape(format!(
                "bias of length {} for conv {self:?}",
                b.len()
            ))),
            (None, true) => Err(Error::shape("conv declares a bias but none was given")),
        }
    }
}

/// Valid output range `[lo, hi)` along one axis for a tap at input offset `off`.
#[inline]
pub(crate) fn tap_range(len: usize, off: isize) -> (usize, usize) {
    let lo = (-off).max(0) as usize;
    let hi = (len as isize - off).clamp(0, len as isize) as usize;
    (lo.min(hi), hi)
}

/// Accumulates one input plane convolved with one `k x k` filter into `acc`.
#[inline]
pub(crate) fn accumulate_plane<T: Real>(
    acc: &mut [f64],
    input: &[T],
    filter: &[T],
    h: usize,
    w: usize,
    spec: &ConvSpec,
) {
    let k = spec.kernel;
    let pad = spec.padding() as isize;
    let d = spec.dilation as isize;
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
                let start = (y as isize + dy) * w as isize + dx + x0 as isize;
                let src = &input[start as usize..][..x1 - x0];
                let dst = &mut acc[y * w + x0..y * w + x1];
                for (a, &v) in dst.iter_mut().zip(src) {
                    *a += wv * v.acc();
                }
            }
        }
    }
}

/// Stride-1 convolution with zero padding of `effective_kernel / 2`.
///
/// Output element `(n, oc, y, x)` accumulates its group's window in `f64`
/// in `(ic, ky, kx)` order, adds the bias, and rounds once.
pub fn conv2d<T: Real>(
    x: &Tensor<T>,
    spec: &ConvSpec,
    weight: &Tensor<T>,
    bias: Option<&[T]>,
) -> Result<Tensor<T>> {
    spec.check_operands(x, weight, bias)?;
    let Shape { n, h, w, .. } = x.shape();
    let plane = h * w;
    let (cin_g, cout_g) = (spec.in_per_group(), spec.out_per_group());
    let k2 = spec.kernel * spec.kernel;
    let out_shape = Shape::new(n, spec.out_channels, h, w);
    let mut out = vec![T::zero(); out_shape.numel()];

    let compute = |idx: usize, dst: &mut [T]| {
        let (b, oc) = (idx / spec.out_channels, idx % spec.out_channels);
        let g = oc / cout_g;
        let mut acc = vec![0f64; plane];
        for icl in 0..cin_g {
            let ic = g * cin_g + icl;
            let filter = &weight.data()[(oc * cin_g + icl) * k2..][..k2];
            accumulate_plane(&mut acc, x.plane(b, ic), filter, h, w, spec);
        }
        let bv = bias.map_or(0.0, |b| b[oc].acc());
        for (d, a) in dst.iter_mut().zip(&acc) {
            *d = T::from_acc(a + bv);
        }
    };

    let work = out_shape.numel() * cin_g * k2;
    if work >= PAR_THRESHOLD {
        out.par_chunks_mut(plane)
            .enumerate()
            .for_each(|(i, dst)| compute(i, dst));
    } else {
        out.chunks_mut(plane)
            .enumerate()
            .for_each(|(i, dst)| compute(i, dst));
    }
    let out = Tensor::from_values(out_shape, out)?;
    debug_assert!(
        !(x.is_finite() && weight.is_finite()) || out.is_finite(),
        "conv2d produced non-finite output from finite operands"
    );
    Ok(out)
}
