use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Mean absolute error and its (sub)gradient `sign(pred - target) / count`, with `sign(0) = 0`.
pub fn l1_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(format!(
            "l1_loss: {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let count = pred.numel() as f64;
    let mut sum = 0f64;
    let mut grad = Vec::with_capacity(pred.numel());
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        let d = p.acc() - t.acc();
        sum += d.abs();
        let s = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        };
        grad.push(T::from_acc(s / count));
    }
    Ok((sum / count, Tensor::from_values(pred.shape(), grad)?))
}
