//! Acquisition scores and batch selection.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::bnn::PredictiveSummary;
use crate::error::{Error, Result};
use crate::ndcalc::LOG_FLOOR;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    FocAL,
    RA,
    EN,
    BALD,
    MS,
    EP,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::FocAL, Method::RA, Method::EN, Method::BALD, Method::MS, Method::EP];

    pub fn name(self) -> &'static str {
        match self {
            Method::FocAL => "FocAL",
            Method::RA => "RA",
            Method::EN => "EN",
            Method::BALD => "BALD",
            Method::MS => "MS",
            Method::EP => "EP",
        }
    }

    /// Whether scoring needs Monte Carlo predictions of the pool.
    pub fn needs_predictions(self) -> bool {
        self != Method::RA
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parameter(format!("unknown acquisition method {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AcquisitionConfig {
    pub method: Method,
    pub lambda_al: f64,
    pub lambda_ood: f64,
    pub k: usize,
    pub batch_size: usize,
    pub samples: usize,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            method: Method::FocAL,
            lambda_al: 0.5,
            lambda_ood: 2.0,
            k: 10,
            batch_size: 10,
            samples: 20,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda_al", self.lambda_al), ("lambda_ood", self.lambda_ood)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Parameter(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        if self.k == 0 || self.batch_size == 0 || self.samples == 0 {
            return Err(Error::Parameter("k, batch size and sample count must be positive".into()));
        }
        Ok(())
    }
}

/// `w_c = N / (max(N_c, 1) · C)`.
pub fn class_weights<S: Scalar>(counts: &[usize]) -> Result<Vec<S>> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::Parameter("class weights need at least one labeled item".into()));
    }
    let c = S::from_count(counts.len());
    let n = S::from_count(total);
    Ok(counts.iter().map(|&k| n / (S::from_count(k.max(1)) * c)).collect())
}

/// The two uncertainty terms of the FocAL score: `wᵀ σ²_ep` and
/// `mean(σ²_al)`.
pub fn focal_terms<S: Scalar>(summary: &PredictiveSummary<S>, weights: &[S]) -> Result<(S, S)> {
    let c = summary.classes();
    if weights.len() != c || summary.al_var.len() != c {
        return Err(Error::Parameter(format!(
            "{} class weights for a {c}-class summary",
            weights.len()
        )));
    }
    let ep = weights.iter().zip(&summary.ep_var).map(|(&w, &v)| w * v).sum::<S>();
    let al = summary.al_var.iter().copied().sum::<S>() / S::from_count(c);
    Ok((ep, al))
}

pub fn focal_score<S: Scalar>(
    summary: &PredictiveSummary<S>,
    ood: S,
    weights: &[S],
    lambda_al: S,
    lambda_ood: S,
) -> Result<S> {
    let (ep, al) = focal_terms(summary, weights)?;
    Ok(ep - lambda_al * al - lambda_ood * ood)
}

pub fn entropy<S: Scalar>(p: &[S]) -> S {
    let floor = S::lit(LOG_FLOOR);
    -p.iter().map(|&v| v * v.max(floor).ln()).sum::<S>()
}

pub fn entropy_score<S: Scalar>(p_hat: &[S]) -> S {
    entropy(p_hat)
}

fn check_draws<S>(draws: &[&[S]]) -> Result<usize> {
    let c = draws.first().map(|d| d.len()).ok_or_else(|| Error::Parameter("no draws".into()))?;
    if draws.iter().any(|d| d.len() != c) {
        return Err(Error::Parameter("draws disagree in class count".into()));
    }
    Ok(c)
}

fn mean_of<S: Scalar>(draws: &[&[S]], c: usize) -> Vec<S> {
    let t = S::from_count(draws.len());
    (0..c).map(|k| draws.iter().map(|d| d[k]).sum::<S>() / t).collect()
}

/// Mutual information `H[p̂] − mean_t H[p_t]`.
pub fn bald_score<S: Scalar>(draws: &[&[S]]) -> Result<S> {
    let c = check_draws(draws)?;
    let p_hat = mean_of(draws, c);
    let t = S::from_count(draws.len());
    Ok(entropy(&p_hat) - draws.iter().map(|d| entropy(d)).sum::<S>() / t)
}

/// Mean over classes of the per-class standard deviation across draws.
pub fn meanstd_score<S: Scalar>(draws: &[&[S]]) -> Result<S> {
    let c = check_draws(draws)?;
    let p_hat = mean_of(draws, c);
    let t = S::from_count(draws.len());
    let total: S = (0..c)
        .map(|k| {
            let var = draws.iter().map(|d| (d[k] - p_hat[k]).powi(2)).sum::<S>() / t;
            var.sqrt()
        })
        .sum();
    Ok(total / S::from_count(c))
}

pub fn epistemic_score<S: Scalar>(summary: &PredictiveSummary<S>) -> S {
    summary.ep_var.iter().copied().sum()
}

/// Ids of the `b` highest scores; equal scores go to the lower id.
pub fn select_batch<S: Scalar>(ids: &[u32], scores: &[S], b: usize) -> Result<Vec<u32>> {
    if ids.len() != scores.len() {
        return Err(Error::Parameter(format!("{} ids for {} scores", ids.len(), scores.len())));
    }
    if b > ids.len() {
        return Err(Error::Parameter(format!("batch of {b} exceeds pool of {}", ids.len())));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::Parameter(format!("score for item {} is NaN", ids[i])));
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &c| {
        scores[c]
            .partial_cmp(&scores[a])
            .expect("no NaN")
            .then(ids[a].cmp(&ids[c]))
    });
    Ok(order[..b].iter().map(|&i| ids[i]).collect())
}

/// `b` ids drawn uniformly without replacement.
pub fn random_batch(ids: &[u32], b: usize, rng: &mut impl Rng) -> Result<Vec<u32>> {
    if b > ids.len() {
        return Err(Error::Parameter(format!("batch of {b} exceeds pool of {}", ids.len())));
    }
    Ok(rand::seq::index::sample(rng, ids.len(), b)
        .into_iter()
        .map(|i| ids[i])
        .collect())
}

/// One line of the optional per-step score dump.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRow {
    pub item_id: u32,
    pub ep_weighted: f64,
    pub al_mean: f64,
    pub ood: f64,
    pub total: f64,
}

pub const SCORE_DUMP_HEADER: &str = "item_id,ep_weighted,al_mean,ood,total,method";

pub fn score_dump_csv(rows: &[ScoreRow], method: Method) -> String {
    let mut out = String::from(SCORE_DUMP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.item_id, r.ep_weighted, r.al_mean, r.ood, r.total, method
        ));
    }
    out
}

/// Scores every pool item for a prediction-based method.
///
/// `draws` holds `T` tensors of shape `[n×C]` aligned with `ids`; `ood` is
/// required for FocAL and ignored otherwise.
pub fn score_pool<S: Scalar>(
    config: &AcquisitionConfig,
    ids: &[u32],
    draws: &[crate::ndcalc::Tensor<S>],
    ood: Option<&[S]>,
    weights: &[S],
) -> Result<Vec<ScoreRow>> {
    let summaries = crate::bnn::summarize_rows(draws, false)?;
    if summaries.len() != ids.len() {
        return Err(Error::Parameter(format!("{} predictions for {} ids", summaries.len(), ids.len())));
    }
    let (lam_al, lam_ood) = (S::lit(config.lambda_al), S::lit(config.lambda_ood));
    let unit = vec![S::one(); summaries.first().map_or(0, |s| s.classes())];
    summaries
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let per_item: Vec<&[S]> = draws.iter().map(|d| d.row(i)).collect();
            let w = if config.method == Method::FocAL { weights } else { &unit };
            let (ep, al) = focal_terms(s, w)?;
            let o = match (config.method, ood) {
                (Method::FocAL, Some(o)) => o[i],
                (Method::FocAL, None) => return Err(Error::State("FocAL scoring needs OoD scores".into())),
                (_, Some(o)) => o[i],
                _ => S::zero(),
            };
            let total = match config.method {
                Method::FocAL => ep - lam_al * al - lam_ood * o,
                Method::EN => entropy_score(&s.p_hat),
                Method::BALD => bald_score(&per_item)?,
                Method::MS => meanstd_score(&per_item)?,
                Method::EP => epistemic_score(s),
                Method::RA => return Err(Error::State("random acquisition has no scores".into())),
            };
            Ok(ScoreRow {
                item_id: ids[i],
                ep_weighted: ep.to_f64_lossy(),
                al_mean: al.to_f64_lossy(),
                ood: o.to_f64_lossy(),
                total: total.to_f64_lossy(),
            })
        })
        .collect()
}
