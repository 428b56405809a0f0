//! Predictive mean and the epistemic/aleatoric split of the predictive
//! covariance over Monte Carlo draws.

use crate::error::{dim_err, Result};
use crate::ndcalc::Tensor;
use crate::scalar::Scalar;

/// Per-item summary of `T` probability draws.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveSummary<S> {
    /// Mean predictive distribution over the draws.
    pub p_hat: Vec<S>,
    /// Diagonal of the epistemic matrix.
    pub ep_var: Vec<S>,
    /// Diagonal of the aleatoric matrix.
    pub al_var: Vec<S>,
    /// Full `C×C` matrices, when requested.
    pub epistemic: Option<Tensor<S>>,
    pub aleatoric: Option<Tensor<S>>,
}

impl<S: Scalar> PredictiveSummary<S> {
    pub fn classes(&self) -> usize {
        self.p_hat.len()
    }

    pub fn predicted_class(&self) -> usize {
        crate::ndcalc::argmax(&self.p_hat)
    }
}

/// Mean of the draws.
pub fn mean_draw<S: Scalar>(draws: &[&[S]]) -> Result<Vec<S>> {
    let Some(first) = draws.first() else {
        return dim_err("at least one draw is required");
    };
    let c = first.len();
    if draws.iter().any(|d| d.len() != c) {
        return dim_err("draws have different class counts");
    }
    let t = S::from_count(draws.len());
    Ok((0..c)
        .map(|j| draws.iter().map(|d| d[j]).sum::<S>() / t)
        .collect())
}

/// Epistemic matrix `(1/T)Σ(p_t − p̂)(p_t − p̂)ᵀ` and aleatoric matrix
/// `(1/T)Σ(diag(p_t) − p_t p_tᵀ)`.
pub fn decompose<S: Scalar>(draws: &[&[S]], keep_matrices: bool) -> Result<PredictiveSummary<S>> {
    let p_hat = mean_draw(draws)?;
    let c = p_hat.len();
    let t = S::from_count(draws.len());

    if !keep_matrices {
        // diagonals only: ep_c = mean (p_tc − p̂_c)², al_c = mean p_tc (1 − p_tc)
        let mut ep_var = vec![S::zero(); c];
        let mut al_var = vec![S::zero(); c];
        for d in draws {
            for j in 0..c {
                let dev = d[j] - p_hat[j];
                ep_var[j] += dev * dev;
                al_var[j] += d[j] - d[j] * d[j];
            }
        }
        for j in 0..c {
            ep_var[j] /= t;
            al_var[j] /= t;
        }
        return Ok(PredictiveSummary {
            p_hat,
            ep_var,
            al_var,
            epistemic: None,
            aleatoric: None,
        });
    }

    let mut ep = vec![S::zero(); c * c];
    let mut al = vec![S::zero(); c * c];
    for d in draws {
        for i in 0..c {
            let di = d[i] - p_hat[i];
            for j in 0..c {
                ep[i * c + j] += di * (d[j] - p_hat[j]);
                al[i * c + j] -= d[i] * d[j];
            }
            al[i * c + i] += d[i];
        }
    }
    for v in ep.iter_mut().chain(al.iter_mut()) {
        *v /= t;
    }
    let ep_var = (0..c).map(|i| ep[i * c + i]).collect();
    let al_var = (0..c).map(|i| al[i * c + i]).collect();
    Ok(PredictiveSummary {
        p_hat,
        ep_var,
        al_var,
        epistemic: Some(Tensor::matrix(c, c, ep)?),
        aleatoric: Some(Tensor::matrix(c, c, al)?),
    })
}

/// Splits `T` draw matrices `[n×C]` into one summary per row.
pub fn summarize_rows<S: Scalar>(draws: &[Tensor<S>], keep_matrices: bool) -> Result<Vec<PredictiveSummary<S>>> {
    let Some(first) = draws.first() else {
        return dim_err("at least one draw is required");
    };
    let n = first.rows();
    if draws.iter().any(|d| d.shape() != first.shape()) {
        return dim_err("draw matrices differ in shape");
    }
    (0..n)
        .map(|i| {
            let rows: Vec<&[S]> = draws.iter().map(|d| d.row(i)).collect();
            decompose(&rows, keep_matrices)
        })
        .collect()
}
