use super::loss::l1_loss;
use super::optim::{adam_step, ema_update, AdamConfig, EmaState, OptimizerState};
use super::tape::{Graph, Tape};
use crate::error::{Error, Result};
use crate::model::{forward_graph, ModelConfig, Network};
use crate::tensor::Tensor;

/// Result of [`train_toy`].
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub weights: Network,
    pub ema: Network,
    /// L1 loss of each step, measured before that step's update.
    pub loss_history: Vec<f64>,
}

/// Overfits one LR/HR pair with full-batch Adam, L1 loss and a weight EMA.
///
/// The EMA starts from zeros and is bias-corrected when read out, so after
/// `t` steps it is a proper weighted average of the `t` iterates rather than
/// still holding `decay^t` of the random initialisation.
///
/// Weights are initialised from `seed`; the run is bit-reproducible.
pub fn train_toy(
    config: ModelConfig,
    lr_patch: &Tensor,
    hr_patch: &Tensor,
    iterations: usize,
    adam: AdamConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    let (ls, hs) = (lr_patch.shape(), hr_patch.shape());
    if hs.n != ls.n || hs.c != ls.c || hs.h != ls.h * config.scale || hs.w != ls.w * config.scale {
        return Err(Error::shape(format!(
            "hr patch {hs:?} is not lr patch {ls:?} times scale {}",
            config.scale
        )));
    }
    let mut net = Network::<f32>::init(config, seed)?;
    let mut opt = OptimizerState::new(net.params(), adam);
    let mut ema = EmaState::zeros(net.params());
    let mut history = Vec::with_capacity(iterations);

    for step in 0..iterations {
        let grads = {
            let mut tape = Tape::new(net.params());
            let x = tape.leaf(lr_patch.clone());
            let y = forward_graph(&mut tape, net.config(), &x)?;
            let (loss, seed_grad) = l1_loss(tape.tensor(&y), hr_patch)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("loss became {loss} at step {step}")));
            }
            history.push(loss);
            tape.backward(y, seed_grad)?.params
        };
        adam_step(net.params_mut(), &grads, &mut opt)?;
        ema_update(&mut ema, net.params())?;
    }

    let shadow = if iterations == 0 {
        net.params().clone()
    } else {
        ema.debiased(iterations as u64)
    };
    let ema = Network::from_params(net.config().clone(), shadow)?;
    Ok(TrainOutcome {
        weights: net,
        ema,
        loss_history: history,
    })
}
