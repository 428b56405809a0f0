//! Dense arrays and a small reverse-mode autodiff tape.
//!
//! Shapes are checked when an op is recorded; there is no broadcasting
//! apart from [`Var::add_bias`] over matrix rows.

mod tape;
mod tensor;

use std::rc::Rc;

pub use tape::{softmax_rows, softplus, softplus_inv, Gradients, Tape, Var, LOG_FLOOR};
pub use tensor::{argmax, matmul, Tensor};

use crate::error::{dim_err, Error, Result};
use crate::scalar::Scalar;

/// Softmax of a logit vector (or each row of a matrix).
pub fn softmax<S: Scalar>(logits: &Tensor<S>) -> Tensor<S> {
    softmax_rows(logits)
}

/// `-Σ_c y_c ln(max(p_c, 1e-12))` for a single probability vector.
pub fn cross_entropy<S: Scalar>(p: &Tensor<S>, y_onehot: &Tensor<S>) -> Result<S> {
    if p.len() != y_onehot.len() {
        return dim_err(format!(
            "cross_entropy lengths differ: {} vs {}",
            p.len(),
            y_onehot.len()
        ));
    }
    let floor = S::lit(LOG_FLOOR);
    Ok(p.data()
        .iter()
        .zip(y_onehot.data())
        .filter(|(_, &y)| y != S::zero())
        .map(|(&pc, &yc)| -yc * pc.max(floor).ln())
        .sum())
}

/// One-hot rows for `labels` over `classes`.
pub fn one_hot<S: Scalar>(labels: &[usize], classes: usize) -> Tensor<S> {
    let mut t = Tensor::zeros(&[labels.len(), classes]);
    for (i, &l) in labels.iter().enumerate() {
        t.data_mut()[i * classes + l] = S::one();
    }
    t
}

/// Step used by the central-difference checks.
pub const FD_STEP: f64 = 1e-5;

/// Denominator floor for relative errors, so that gradients that are zero
/// up to roundoff compare on an absolute scale.
pub const REL_ERR_FLOOR: f64 = 1e-4;

fn rel_err<S: Scalar>(analytic: S, numeric: S) -> S {
    let denom = analytic.abs().max(numeric.abs()).max(S::lit(REL_ERR_FLOOR));
    (analytic - numeric).abs() / denom
}

/// Worst relative error between tape gradients of `f` at `thetas` and
/// central finite differences with step `h`.
pub fn grad_check_many<S, F>(f: F, thetas: &[Tensor<S>], h: S) -> Result<S>
where
    S: Scalar,
    F: for<'t> Fn(&'t Tape<S>, &[Var<'t, S>]) -> Result<Var<'t, S>>,
{
    let eval = |ts: &[Tensor<S>]| -> Result<S> {
        let tape = Tape::new();
        let vars: Vec<_> = ts.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = f(&tape, &vars)?;
        let v = out.value();
        if v.len() != 1 {
            return dim_err("grad_check needs a scalar function");
        }
        let v = v.data()[0];
        if !v.is_finite() {
            return Err(Error::Evaluation("function value is not finite".into()));
        }
        Ok(v)
    };

    let tape = Tape::new();
    let vars: Vec<_> = thetas.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&tape, &vars)?;
    if !out.value().data()[0].is_finite() {
        return Err(Error::Evaluation("function value is not finite".into()));
    }
    let grads = tape.backward(out)?;

    let mut worst = S::zero();
    let mut work: Vec<Tensor<S>> = thetas.to_vec();
    for (ti, var) in vars.iter().enumerate() {
        let analytic = grads.of(*var);
        for j in 0..thetas[ti].len() {
            let orig = thetas[ti].data()[j];
            work[ti].data_mut()[j] = orig + h;
            let up = eval(&work)?;
            work[ti].data_mut()[j] = orig - h;
            let down = eval(&work)?;
            work[ti].data_mut()[j] = orig;
            let numeric = (up - down) / (h + h);
            worst = worst.max(rel_err(analytic.data()[j], numeric));
        }
    }
    Ok(worst)
}

/// Single-tensor form of [`grad_check_many`] with the default step.
pub fn grad_check<S, F>(f: F, theta: &Tensor<S>) -> Result<S>
where
    S: Scalar,
    F: for<'t> Fn(&'t Tape<S>, Var<'t, S>) -> Result<Var<'t, S>>,
{
    grad_check_many(|tape, vs| f(tape, vs[0]), std::slice::from_ref(theta), S::lit(FD_STEP))
}

/// Constant tensor shared with the tape.
pub fn constant<S: Scalar>(t: Tensor<S>) -> Rc<Tensor<S>> {
    Rc::new(t)
}
