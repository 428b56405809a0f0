//! Local Outlier Factor in novelty mode: queries are scored against a fixed
//! reference set and never join it.

use crate::error::{dim_err, Error, Result};
use crate::ndcalc::Tensor;
use crate::scalar::Scalar;

/// Floor on the mean reachability distance before inversion.
pub const REACH_FLOOR: f64 = 1e-12;

/// Multiplier turning a LOF value into an OoD score.
pub const OOD_SCALE: f64 = 0.1;

fn distance<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<S>().sqrt()
}

/// Indices whose distance is within the `k`-th smallest one, and that
/// distance. Ties at the boundary are all kept.
fn neighborhood<S: Scalar>(dists: &[(usize, S)], k: usize) -> (S, Vec<(usize, S)>) {
    let mut sorted: Vec<S> = dists.iter().map(|&(_, d)| d).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let kdist = sorted[k - 1];
    (kdist, dists.iter().copied().filter(|&(_, d)| d <= kdist).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct OodIndex<S> {
    reference: Tensor<S>,
    k: usize,
    kdist: Vec<S>,
    lrd: Vec<S>,
}

impl<S: Scalar> OodIndex<S> {
    /// Exact k-NN structure over the rows of `reference`.
    pub fn build(reference: Tensor<S>, k: usize) -> Result<Self> {
        if reference.shape().len() != 2 {
            return dim_err(format!("reference must be a matrix, got {:?}", reference.shape()));
        }
        let n = reference.rows();
        if k == 0 || n < k + 1 {
            return Err(Error::Parameter(format!("LOF needs k >= 1 and at least k+1 reference rows (k={k}, rows={n})")));
        }
        if !reference.is_finite() {
            return Err(Error::Parameter("reference features must be finite".into()));
        }
        let others = |i: usize| -> Vec<(usize, S)> {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, distance(reference.row(i), reference.row(j))))
                .collect()
        };
        let hoods: Vec<(S, Vec<(usize, S)>)> = (0..n).map(|i| neighborhood(&others(i), k)).collect();
        let kdist: Vec<S> = hoods.iter().map(|h| h.0).collect();
        let lrd = hoods.iter().map(|(_, nb)| Self::density(&kdist, nb)).collect();
        Ok(Self {
            reference,
            k,
            kdist,
            lrd,
        })
    }

    fn density(kdist: &[S], neighbors: &[(usize, S)]) -> S {
        let reach: S = neighbors.iter().map(|&(j, d)| kdist[j].max(d)).sum();
        let mean = reach / S::from_count(neighbors.len());
        S::one() / mean.max(S::lit(REACH_FLOOR))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn reference(&self) -> &Tensor<S> {
        &self.reference
    }

    pub fn k_distances(&self) -> &[S] {
        &self.kdist
    }

    pub fn local_densities(&self) -> &[S] {
        &self.lrd
    }

    /// Reference rows within the query's k-distance.
    pub fn neighbors(&self, z: &[S]) -> Result<Vec<usize>> {
        Ok(self.query(z)?.into_iter().map(|(j, _)| j).collect())
    }

    fn query(&self, z: &[S]) -> Result<Vec<(usize, S)>> {
        if z.len() != self.reference.cols() {
            return dim_err(format!("query of length {} for {}-d index", z.len(), self.reference.cols()));
        }
        let d: Vec<(usize, S)> = (0..self.reference.rows())
            .map(|j| (j, distance(z, self.reference.row(j))))
            .collect();
        Ok(neighborhood(&d, self.k).1)
    }

    pub fn lof(&self, z: &[S]) -> Result<S> {
        let nb = self.query(z)?;
        let own = Self::density(&self.kdist, &nb);
        let ratio: S = nb.iter().map(|&(j, _)| self.lrd[j] / own).sum();
        Ok(ratio / S::from_count(nb.len()))
    }

    pub fn score(&self, z: &[S]) -> Result<S> {
        Ok(S::lit(OOD_SCALE) * self.lof(z)?)
    }

    /// Scores for every row of `z`.
    pub fn score_rows(&self, z: &Tensor<S>) -> Result<Vec<S>> {
        (0..z.rows()).map(|i| self.score(z.row(i))).collect()
    }
}
