//! Two-dimensional Gaussian-cluster pools for fast experiments.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Item, LabeledPool, Perturbation, Split};
use crate::error::{Error, Result};
use crate::Tensor;

/// Injected pool outliers: far-field points (tagged as black dots) and
/// points blended between two classes (tagged as merged).
#[derive(Clone, Debug, PartialEq)]
pub struct OutlierSpec {
    pub far: usize,
    /// Far-field points are placed at this multiple of the largest mean norm.
    pub far_radius: f64,
    pub boundary: usize,
}

impl Default for OutlierSpec {
    fn default() -> Self {
        Self {
            far: 0,
            far_radius: 3.0,
            boundary: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterSpec {
    pub means: Vec<[f64; 2]>,
    pub covariances: Vec<[[f64; 2]; 2]>,
    /// Train+pool points per class.
    pub counts: Vec<usize>,
    pub val_per_class: usize,
    pub test_per_class: usize,
    pub initial_labeled: usize,
    pub outliers: OutlierSpec,
}

impl ClusterSpec {
    /// Equal isotropic clusters.
    pub fn isotropic(means: Vec<[f64; 2]>, std: f64, count: usize) -> Self {
        let c = means.len();
        let v = std * std;
        Self {
            means,
            covariances: vec![[[v, 0.0], [0.0, v]]; c],
            counts: vec![count; c],
            val_per_class: 0,
            test_per_class: 0,
            initial_labeled: 0,
            outliers: OutlierSpec::default(),
        }
    }
}

fn cholesky(c: &[[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let sym = (c[0][1] - c[1][0]).abs() <= 1e-12 * (c[0][1].abs() + 1.0);
    if !sym || !(c[0][0] > 0.0) {
        return Err(Error::Parameter(format!("covariance {c:?} is not positive definite")));
    }
    let l00 = c[0][0].sqrt();
    let l10 = c[1][0] / l00;
    let rest = c[1][1] - l10 * l10;
    if !(rest > 0.0) {
        return Err(Error::Parameter(format!("covariance {c:?} is not positive definite")));
    }
    Ok([[l00, 0.0], [l10, rest.sqrt()]])
}

fn draw(mean: &[f64; 2], l: &[[f64; 2]; 2], rng: &mut impl Rng) -> [f64; 2] {
    let z0: f64 = StandardNormal.sample(rng);
    let z1: f64 = StandardNormal.sample(rng);
    [mean[0] + l[0][0] * z0, mean[1] + l[1][0] * z0 + l[1][1] * z1]
}

fn point(p: [f64; 2], label: usize) -> Item {
    Item::new(0, Tensor::vector(p.to_vec()), label)
}

/// Samples a clustered 2-D pool.
///
/// Ids are laid out as train, pool (clean points then outliers), val, test.
/// The first `initial_labeled` of the shuffled clean points are revealed.
pub fn make_gaussian_clusters(spec: &ClusterSpec, rng: &mut impl Rng) -> Result<LabeledPool> {
    let c = spec.means.len();
    if c == 0 || spec.covariances.len() != c || spec.counts.len() != c {
        return Err(Error::Parameter(
            "means, covariances and counts must have one entry per class".into(),
        ));
    }
    if spec.counts.contains(&0) {
        return Err(Error::Parameter("cluster counts must be positive".into()));
    }
    let chol: Vec<_> = spec.covariances.iter().map(cholesky).collect::<Result<_>>()?;

    let mut clean = Vec::new();
    for class in 0..c {
        for _ in 0..spec.counts[class] {
            clean.push(point(draw(&spec.means[class], &chol[class], rng), class));
        }
    }
    if spec.initial_labeled > clean.len() {
        return Err(Error::Data("more initial labels than clean points".into()));
    }
    // Fisher-Yates keeps the stream usage explicit.
    for i in (1..clean.len()).rev() {
        let j = rng.random_range(0..=i);
        clean.swap(i, j);
    }
    for (i, it) in clean.iter_mut().enumerate() {
        it.split = if i < spec.initial_labeled {
            Split::Train
        } else {
            Split::Pool
        };
    }

    let radius = spec
        .means
        .iter()
        .map(|m| (m[0] * m[0] + m[1] * m[1]).sqrt())
        .fold(1.0f64, f64::max)
        * spec.outliers.far_radius;
    for _ in 0..spec.outliers.far {
        let th = rng.random_range(0.0..std::f64::consts::TAU);
        let r = radius * rng.random_range(1.0..1.5);
        let mut it = point([r * th.cos(), r * th.sin()], rng.random_range(0..c));
        it.split = Split::Pool;
        it.perturbation = Perturbation::BlackDots;
        clean.push(it);
    }
    if spec.outliers.boundary > 0 && c < 2 {
        return Err(Error::Parameter("boundary outliers need two classes".into()));
    }
    for _ in 0..spec.outliers.boundary {
        let a = rng.random_range(0..c);
        let b = (a + rng.random_range(1..c)) % c;
        let pa = draw(&spec.means[a], &chol[a], rng);
        let pb = draw(&spec.means[b], &chol[b], rng);
        let alpha = rng.random_range(0.4..=0.6);
        let mut it = point(
            [
                alpha * pa[0] + (1.0 - alpha) * pb[0],
                alpha * pa[1] + (1.0 - alpha) * pb[1],
            ],
            a,
        );
        it.split = Split::Pool;
        it.perturbation = Perturbation::Merged;
        clean.push(it);
    }

    for (split, n) in [(Split::Val, spec.val_per_class), (Split::Test, spec.test_per_class)] {
        for class in 0..c {
            for _ in 0..n {
                let mut it = point(draw(&spec.means[class], &chol[class], rng), class);
                it.split = split;
                clean.push(it);
            }
        }
    }
    clean.sort_by_key(|it| it.split);
    LabeledPool::new(clean, c)
}
