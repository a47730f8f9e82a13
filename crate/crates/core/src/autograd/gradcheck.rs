//! Central finite-difference checks of the analytic backward pass in 64-bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::ParamStore;
use super::tape::{Tape, Var};
use crate::error::Result;
use crate::tensor::Tensor;

pub const DEFAULT_STEP: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct GradCheck {
    /// Parameter name, or `input[i]` for the i-th leaf.
    pub name: String,
    pub relative_error: f64,
}

/// `||a - b|| / max(||a||, ||b||)`, 0 when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Fixed random projection turning a tensor output into the scalar `sum(y * r)`.
fn projection(like: &Tensor<f64>, seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(like.shape(), |_| rng.gen_range(-1.0..1.0)).expect("shape already valid")
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Compares tape gradients of `L = sum(f(inputs) * r)` against central differences
/// for every parameter tensor and every input.
pub fn check_gradients<F>(
    params: &ParamStore<f64>,
    inputs: &[Tensor<f64>],
    step: f64,
    projection_seed: u64,
    f: F,
) -> Result<Vec<GradCheck>>
where
    F: Fn(&mut Tape<'_, f64>, &[Var]) -> Result<Var>,
{
    let eval = |p: &ParamStore<f64>, xs: &[Tensor<f64>], r: Option<&Tensor<f64>>| -> Result<(Tensor<f64>, f64)> {
        let mut tape = Tape::new(p);
        let vars: Vec<Var> = xs.iter().map(|x| tape.leaf(x.clone())).collect();
        let y = f(&mut tape, &vars)?;
        let out = tape.value(y).clone();
        let l = r.map_or(0.0, |r| dot(&out, r));
        Ok((out, l))
    };

    let (out, _) = eval(params, inputs, None)?;
    let r = projection(&out, projection_seed);

    let mut tape = Tape::new(params);
    let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone())).collect();
    let y = f(&mut tape, &vars)?;
    let analytic = tape.backward(y, r.clone())?;

    let mut report = Vec::new();
    let mut probe = params.clone();
    for (name, t) in params.iter() {
        let mut numeric = Vec::with_capacity(t.numel());
        for i in 0..t.numel() {
            let orig = t.data()[i];
            probe.get_mut(name)?.data_mut()[i] = orig + step;
            let (_, lp) = eval(&probe, inputs, Some(&r))?;
            probe.get_mut(name)?.data_mut()[i] = orig - step;
            let (_, lm) = eval(&probe, inputs, Some(&r))?;
            probe.get_mut(name)?.data_mut()[i] = orig;
            numeric.push((lp - lm) / (2.0 * step));
        }
        let a = analytic.params.get(name)?;
        report.push(GradCheck {
            name: name.to_owned(),
            relative_error: relative_error(a.data(), &numeric),
        });
    }

    for (k, x) in inputs.iter().enumerate() {
        let mut xs = inputs.to_vec();
        let mut numeric = Vec::with_capacity(x.numel());
        for i in 0..x.numel() {
            let orig = x.data()[i];
            xs[k].data_mut()[i] = orig + step;
            let (_, lp) = eval(params, &xs, Some(&r))?;
            xs[k].data_mut()[i] = orig - step;
            let (_, lm) = eval(params, &xs, Some(&r))?;
            xs[k].data_mut()[i] = orig;
            numeric.push((lp - lm) / (2.0 * step));
        }
        let a = analytic
            .wrt(vars[k])
            .cloned()
            .unwrap_or_else(|| x.zeros_like());
        report.push(GradCheck {
            name: format!("input[{k}]"),
            relative_error: relative_error(a.data(), &numeric),
        });
    }
    Ok(report)
}

/// Largest relative error in a report.
pub fn worst(report: &[GradCheck]) -> f64 {
    report.iter().map(|c| c.relative_error).fold(0.0, f64::max)
}
