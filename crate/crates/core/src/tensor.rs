//! Dense `(n, c, h, w)` tensors.
//!
//! Storage is generic over [`Real`] so the same kernels can run in 32-bit
//! (inference, training) and 64-bit (finite-difference gradient checks).
//! Reductions inside the kernels always accumulate in `f64`.

use std::fmt;

use num_traits::Float;

use crate::error::{Error, Result};

/// Scalar storage type of a [`Tensor`].
pub trait Real: Float + Default + fmt::Debug + fmt::Display + Send + Sync + 'static {
    /// Rounds an `f64` accumulator to storage precision.
    fn from_acc(v: f64) -> Self;
    /// Widens to the `f64` accumulation type.
    fn acc(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn from_acc(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn acc(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn from_acc(v: f64) -> Self {
        v
    }
    #[inline]
    fn acc(self) -> f64 {
        self
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self { n, c, h, w }
    }

    pub fn numel(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub fn plane(&self) -> usize {
        self.h * self.w
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.c == 0 || self.h == 0 || self.w == 0 {
            return Err(Error::shape(format!("zero-sized dimension in {self:?}")));
        }
        self.n
            .checked_mul(self.c)
            .and_then(|v| v.checked_mul(self.h))
            .and_then(|v| v.checked_mul(self.w))
            .ok_or_else(|| Error::shape(format!("{self:?} overflows usize")))?;
        Ok(())
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.n, self.c, self.h, self.w)
    }
}

impl From<(usize, usize, usize, usize)> for Shape {
    fn from((n, c, h, w): (usize, usize, usize, usize)) -> Self {
        Shape::new(n, c, h, w)
    }
}

#[derive(Clone, PartialEq)]
pub struct Tensor<T: Real = f32> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Real> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

impl<T: Real> Tensor<T> {
    pub fn zeros(shape: impl Into<Shape>) -> Result<Self> {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: impl Into<Shape>, value: T) -> Result<Self> {
        let shape = shape.into();
        shape.validate()?;
        Ok(Self {
            shape,
            data: vec![value; shape.numel()],
        })
    }

    pub fn from_values(shape: impl Into<Shape>, data: Vec<T>) -> Result<Self> {
        let shape = shape.into();
        shape.validate()?;
        if data.len() != shape.numel() {
            return Err(Error::shape(format!(
                "{} values do not fill shape {shape:?}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn from_fn(shape: impl Into<Shape>, mut f: impl FnMut(usize) -> T) -> Result<Self> {
        let shape = shape.into();
        shape.validate()?;
        let data = (0..shape.numel()).map(&mut f).collect();
        Ok(Self { shape, data })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            shape: self.shape,
            data: vec![T::zero(); self.data.len()],
        }
    }

    pub fn ones_like(&self) -> Self {
        Self {
            shape: self.shape,
            data: vec![T::one(); self.data.len()],
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        ((n * self.shape.c + c) * self.shape.h + y) * self.shape.w + x
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> T {
        self.data[self.index(n, c, y, x)]
    }

    /// Contiguous `h * w` plane of one `(n, c)` pair.
    pub fn plane(&self, n: usize, c: usize) -> &[T] {
        let p = self.shape.plane();
        let start = (n * self.shape.c + c) * p;
        &self.data[start..start + p]
    }

    /// Reinterprets the data under a new shape with the same element count.
    pub fn reshape(self, shape: impl Into<Shape>) -> Result<Self> {
        let shape = shape.into();
        shape.validate()?;
        if shape.numel() != self.data.len() {
            return Err(Error::shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        Ok(Self {
            shape,
            data: self.data,
        })
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| U::from_acc(v.acc())).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum_f64(&self) -> f64 {
        self.data.iter().map(|v| v.acc()).sum()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    fn zip_with(&self, other: &Self, op: &str, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::shape(format!(
                "{op}: shape mismatch {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self {
            shape: self.shape,
            data,
        })
    }

    /// Zero border of `pad_h` rows above and below, `pad_w` columns left and right.
    pub fn pad_zero(&self, pad_h: usize, pad_w: usize) -> Self {
        if pad_h == 0 && pad_w == 0 {
            return self.clone();
        }
        let Shape { n, c, h, w } = self.shape;
        let (oh, ow) = (h + 2 * pad_h, w + 2 * pad_w);
        let mut data = vec![T::zero(); n * c * oh * ow];
        for plane in 0..n * c {
            let src = &self.data[plane * h * w..(plane + 1) * h * w];
            let dst = &mut data[plane * oh * ow..(plane + 1) * oh * ow];
            for y in 0..h {
                let row = (y + pad_h) * ow + pad_w;
                dst[row..row + w].copy_from_slice(&src[y * w..(y + 1) * w]);
            }
        }
        Self {
            shape: Shape::new(n, c, oh, ow),
            data,
        }
    }

    /// Removes `crop_h` rows and `crop_w` columns from each side.
    pub fn crop(&self, crop_h: usize, crop_w: usize) -> Result<Self> {
        let Shape { n, c, h, w } = self.shape;
        if 2 * crop_h >= h || 2 * crop_w >= w {
            return Err(Error::shape(format!(
                "crop ({crop_h}, {crop_w}) leaves nothing of {:?}",
                self.shape
            )));
        }
        let (oh, ow) = (h - 2 * crop_h, w - 2 * crop_w);
        let mut data = Vec::with_capacity(n * c * oh * ow);
        for plane in 0..n * c {
            let src = &self.data[plane * h * w..(plane + 1) * h * w];
            for y in crop_h..crop_h + oh {
                data.extend_from_slice(&src[y * w + crop_w..y * w + crop_w + ow]);
            }
        }
        Ok(Self {
            shape: Shape::new(n, c, oh, ow),
            data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constructors() {
        let z = Tensor::<f32>::zeros((1, 1, 2, 2)).unwrap();
        assert_eq!(z.data(), &[0.0; 4]);
        let f = Tensor::<f32>::full((1, 2, 1, 1), 3.0).unwrap();
        assert_eq!(f.data(), &[3.0, 3.0]);
        let v = Tensor::from_values((1, 1, 1, 3), vec![1.0f32, 2.0, 3.0]).unwrap();
        assert_eq!(v.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn zero_sized_dimension_is_rejected() {
        assert!(Tensor::<f32>::zeros((1, 0, 2, 2)).is_err());
        assert!(Tensor::<f32>::from_values((1, 1, 1, 2), vec![1.0]).is_err());
    }

    #[test]
    fn pad_zero_cases() {
        let t = Tensor::from_values((1, 1, 1, 1), vec![5.0f32]).unwrap();
        let p = t.pad_zero(1, 1);
        assert_eq!(p.shape(), Shape::new(1, 1, 3, 3));
        assert_eq!(p.data(), &[0., 0., 0., 0., 5., 0., 0., 0., 0.]);

        assert_eq!(t.pad_zero(0, 0), t);

        let t = Tensor::from_values((1, 1, 2, 2), vec![1.0f32, 2., 3., 4.]).unwrap();
        let p = t.pad_zero(1, 0);
        assert_eq!(p.shape(), Shape::new(1, 1, 4, 2));
        assert_eq!(p.data(), &[0., 0., 1., 2., 3., 4., 0., 0.]);
    }

    #[test]
    fn elementwise() {
        let a = Tensor::from_values((1, 1, 1, 3), vec![1.0f32, 2., 3.]).unwrap();
        let b = Tensor::from_values((1, 1, 1, 3), vec![4.0f32, 5., 6.]).unwrap();
        assert_eq!(a.mul(&b).unwrap().data(), &[4., 10., 18.]);
        assert_eq!(a.add(&a.zeros_like()).unwrap(), a);
        assert_eq!(a.mul(&a.ones_like()).unwrap(), a);
        let c = Tensor::<f32>::zeros((1, 1, 3, 1)).unwrap();
        assert!(matches!(a.add(&c), Err(Error::Shape(_))));
    }

    fn tensor_strategy() -> impl Strategy<Value = Tensor<f32>> {
        (1usize..3, 1usize..4, 1usize..6, 1usize..6).prop_flat_map(|(n, c, h, w)| {
            prop::collection::vec(-1e3f32..1e3, n * c * h * w)
                .prop_map(move |d| Tensor::from_values((n, c, h, w), d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn reshape_round_trip(t in tensor_strategy()) {
            let shape = t.shape();
            let flat = t.clone().reshape((1, 1, 1, shape.numel())).unwrap();
            prop_assert_eq!(flat.data(), t.data());
            prop_assert_eq!(flat.reshape(shape).unwrap(), t);
        }

        #[test]
        fn add_mul_commute(a in tensor_strategy()) {
            let b = a.map(|v| v * 0.37 - 1.5);
            let ab = a.add(&b).unwrap();
            let ba = b.add(&a).unwrap();
            prop_assert!(ab.data().iter().zip(ba.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
            let ab = a.mul(&b).unwrap();
            let ba = b.mul(&a).unwrap();
            prop_assert!(ab.data().iter().zip(ba.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }

        #[test]
        fn pad_then_crop_is_identity(t in tensor_strategy(), ph in 0usize..3, pw in 0usize..3) {
            let back = t.pad_zero(ph, pw).crop(ph, pw).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
