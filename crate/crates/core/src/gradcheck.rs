//! Finite-difference verification of tape gradients.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Outcome of a gradient check: the worst relative disagreement between
/// the tape gradient and central differences, and where it occurred.
#[derive(Debug, Clone)]
pub struct GradCheck {
    pub loss: f64,
    pub max_rel_error: f64,
    pub worst: Option<(String, usize)>,
}

/// Relative error with an absolute floor so that near-zero coordinate
/// pairs compare absolutely instead of blowing up.
fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Compares the tape gradient of `build`'s scalar loss against central
/// differences `(f(θ+eps) - f(θ-eps)) / (2 eps)` for every coordinate of
/// every named tensor. `build` must push the named tensors' vars in the
/// order given and be deterministic; a non-deterministic loss is detected
/// by evaluating twice and reported as an error.
pub fn check_gradients<F>(tensors: &[(String, Tensor)], build: F, eps: f64) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    assert!(eps > 0.0, "eps must be positive");
    let eval = |ts: &[(String, Tensor)]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ts.iter().map(|(_, t)| tape.input(t.clone())).collect();
        let loss = build(&mut tape, &vars);
        tape.value(loss).item()
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = tensors.iter().map(|(_, t)| tape.input(t.clone())).collect();
    let loss_var = build(&mut tape, &vars);
    let loss = tape.value(loss_var).item();
    if eval(tensors) != loss {
        return Err(Error::NonDeterministicLoss);
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            what: String::from("gradient-check loss"),
        });
    }
    let grads = tape.backward(loss_var);

    let mut check = GradCheck {
        loss,
        max_rel_error: 0.0,
        worst: None,
    };
    let mut work: Vec<(String, Tensor)> = tensors.to_vec();
    for (k, (name, _)) in tensors.iter().enumerate() {
        for j in 0..tensors[k].1.numel() {
            let orig = work[k].1.data()[j];
            work[k].1.data_mut()[j] = orig + eps;
            let plus = eval(&work);
            work[k].1.data_mut()[j] = orig - eps;
            let minus = eval(&work);
            work[k].1.data_mut()[j] = orig;

            let fd = (plus - minus) / (2.0 * eps);
            let analytic = grads.of(vars[k]).data()[j];
            let err = rel_error(analytic, fd);
            if err > check.max_rel_error {
                check.max_rel_error = err;
                check.worst = Some((name.clone(), j));
            }
        }
    }
    Ok(check)
}
