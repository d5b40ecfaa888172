//! Adam optimizer over named parameter tensors.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{sqrt, Tensor};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// First/second moment estimates per parameter plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    /// Fresh state (step 0, zero moments) shaped after the given parameters.
    pub fn new<'a>(lr: f64, params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let m: Vec<Tensor> = params.into_iter().map(Tensor::zeros_like).collect();
        let v = m.clone();
        AdamState {
            step: 0,
            lr,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
            m,
            v,
        }
    }

    pub fn moments(&self, i: usize) -> (&Tensor, &Tensor) {
        (&self.m[i], &self.v[i])
    }
}

/// One Adam update with bias correction, applied in place.
///
/// `params` and `grads` must be aligned with the state's moment vectors;
/// names are used for error reporting only.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut [(String, &mut Tensor)],
    grads: &[Tensor],
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::ShapeMismatch {
            context: "adam_step",
            expected: format!("{} parameters", state.m.len()),
            got: format!("{} params / {} grads", params.len(), grads.len()),
        });
    }
    for ((name, p), g) in params.iter().zip(grads) {
        if !p.same_shape(g) {
            return Err(Error::ShapeMismatch {
                context: "adam_step",
                expected: format!("{name}: {:?}", p.shape()),
                got: format!("{:?}", g.shape()),
            });
        }
        if !g.is_finite() {
            return Err(Error::NonFinite {
                what: format!("gradient of {name}"),
            });
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - libm::pow(state.beta1, t as f64);
    let bc2 = 1.0 - libm::pow(state.beta2, t as f64);

    for (i, ((_, p), g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        let pd = p.data_mut();
        for j in 0..pd.len() {
            let gj = g.data()[j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            pd[j] -= state.lr * m_hat / (sqrt(v_hat) + state.epsilon);
        }
    }
    Ok(())
}
