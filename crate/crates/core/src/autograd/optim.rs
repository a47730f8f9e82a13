use super::params::ParamStore;
use crate::error::{Error, Result};
use crate::tensor::Real;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.99;
pub const ADAM_EPSILON: f64 = 1e-8;
pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;
pub const EMA_DECAY: f64 = 0.999;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: DEFAULT_LEARNING_RATE,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
        }
    }
}

/// Adam moments for one parameter set.
#[derive(Clone, Debug)]
pub struct OptimizerState<T: Real = f32> {
    pub config: AdamConfig,
    pub m: ParamStore<T>,
    pub v: ParamStore<T>,
    /// Completed steps.
    pub t: u64,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(params: &ParamStore<T>, config: AdamConfig) -> Self {
        Self {
            config,
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update, applied in place.
///
/// ```text
/// m = b1 m + (1 - b1) g          v = b2 v + (1 - b2) g^2
/// p -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// ```
pub fn adam_step<T: Real>(
    params: &mut ParamStore<T>,
    grads: &ParamStore<T>,
    state: &mut OptimizerState<T>,
) -> Result<()> {
    params.check_same_layout(grads)?;
    params.check_same_layout(&state.m)?;
    state.t += 1;
    let AdamConfig {
        learning_rate: lr,
        beta1: b1,
        beta2: b2,
        epsilon: eps,
    } = state.config;
    let t = state.t as i32;
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);

    let moments = state.m.iter_mut().zip(state.v.iter_mut());
    for (((_, p), (_, g)), ((_, m), (_, v))) in params.iter_mut().zip(grads.iter()).zip(moments) {
        let it = p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
        for ((p, g), (m, v)) in it {
            let g = g.acc();
            let mn = b1 * m.acc() + (1.0 - b1) * g;
            let vn = b2 * v.acc() + (1.0 - b2) * g * g;
            let update = lr * (mn / c1) / ((vn / c2).sqrt() + eps);
            *m = T::from_acc(mn);
            *v = T::from_acc(vn);
            *p = T::from_acc(p.acc() - update);
        }
    }
    Ok(())
}

/// Exponential moving average of the weights.
#[derive(Clone, Debug)]
pub struct EmaState<T: Real = f32> {
    pub shadow: ParamStore<T>,
    pub decay: f64,
}

impl<T: Real> EmaState<T> {
    /// Starts from a copy of the current weights.
    pub fn new(params: &ParamStore<T>) -> Self {
        Self {
            shadow: params.clone(),
            decay: EMA_DECAY,
        }
    }

    /// Starts from zeros; read the average through [`EmaState::debiased`].
    pub fn zeros(params: &ParamStore<T>) -> Self {
        Self {
            shadow: params.zeros_like(),
            decay: EMA_DECAY,
        }
    }

    /// `shadow / (1 - decay^t)`: the average of the `t` values seen so far with
    /// weights `decay^(t - k)`, free of the zero start.
    pub fn debiased(&self, t: u64) -> ParamStore<T> {
        let mut out = self.shadow.clone();
        let c = 1.0 - self.decay.powi(t.min(i32::MAX as u64) as i32);
        if c > 0.0 {
            for (_, s) in out.iter_mut() {
                for v in s.data_mut() {
                    *v = T::from_acc(v.acc() / c);
                }
            }
        }
        out
    }
}

/// `shadow = decay * shadow + (1 - decay) * param`
pub fn ema_update<T: Real>(ema: &mut EmaState<T>, params: &ParamStore<T>) -> Result<()> {
    ema.shadow.check_same_layout(params).map_err(|e| {
        Error::shape(format!("ema shadow does not match parameters: {e}"))
    })?;
    let d = ema.decay;
    for ((_, s), (_, p)) in ema.shadow.iter_mut().zip(params.iter()) {
        for (s, p) in s.data_mut().iter_mut().zip(p.data()) {
            *s = T::from_acc(d * s.acc() + (1.0 - d) * p.acc());
        }
    }
    Ok(())
}
