use rand::seq::index::sample;
use rand::Rng;

use super::{perturb_black_dots, perturb_gaussian_blur, perturb_merge, Item, LabeledPool, Split};
use crate::error::{Error, Result};

/// Split sizes and perturbation settings for an image experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    /// Items drawn for the labeled set plus the pool.
    pub train_pool_size: usize,
    pub initial_labeled: usize,
    pub val_size: usize,
    /// Test items kept from the test source; 0 keeps all of them.
    pub test_size: usize,
    /// Pool items receiving each of the three perturbations.
    pub per_perturbation: usize,
    pub black_dots_fraction: f64,
    pub blur_sigma: f64,
    pub merge_alpha: (f64, f64),
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            train_pool_size: 2000,
            initial_labeled: 20,
            val_size: 200,
            test_size: 0,
            per_perturbation: 200,
            black_dots_fraction: 0.75,
            blur_sigma: 4.0,
            merge_alpha: (0.4, 0.6),
        }
    }
}

/// Draws train/pool/val from `source`, keeps `test` as the test split and
/// perturbs `3·per_perturbation` distinct pool items (black dots, blur,
/// merge in equal parts). Labels must already be collapsed to `classes`.
pub fn build_experiment(
    spec: &ExperimentSpec,
    source: &[Item],
    test: &[Item],
    classes: usize,
    rng: &mut impl Rng,
) -> Result<LabeledPool> {
    let need = spec.train_pool_size + spec.val_size;
    if source.len() < need {
        return Err(Error::Data(format!(
            "need {need} source items, have {}",
            source.len()
        )));
    }
    if spec.initial_labeled > spec.train_pool_size {
        return Err(Error::Data("initial labeled set exceeds the sampled set".into()));
    }
    let pool_n = spec.train_pool_size - spec.initial_labeled;
    if 3 * spec.per_perturbation > pool_n {
        return Err(Error::Data(format!(
            "cannot perturb {} of {pool_n} pool items",
            3 * spec.per_perturbation
        )));
    }

    let picked = sample(rng, source.len(), need).into_vec();
    let mut items: Vec<Item> = picked
        .iter()
        .enumerate()
        .map(|(rank, &i)| {
            let mut it = source[i].clone();
            it.split = if rank < spec.initial_labeled {
                Split::Train
            } else if rank < spec.train_pool_size {
                Split::Pool
            } else {
                Split::Val
            };
            it
        })
        .collect();

    let mut others: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, it) in items.iter().take(spec.train_pool_size).enumerate() {
        for (c, list) in others.iter_mut().enumerate() {
            if it.ground_truth() != c {
                list.push(i);
            }
        }
    }

    let targets = sample(rng, pool_n, 3 * spec.per_perturbation).into_vec();
    for (k, &t) in targets.iter().enumerate() {
        let pos = spec.initial_labeled + t;
        let perturbed = match k / spec.per_perturbation {
            0 => perturb_black_dots(&items[pos], spec.black_dots_fraction, rng)?,
            1 => perturb_gaussian_blur(&items[pos], spec.blur_sigma)?,
            _ => {
                let cands = &others[items[pos].ground_truth()];
                if cands.is_empty() {
                    return Err(Error::Data("no merge partner of a different class".into()));
                }
                let partner = &source[picked[cands[rng.random_range(0..cands.len())]]];
                perturb_merge(&items[pos], partner, spec.merge_alpha, rng)?
            }
        };
        items[pos] = perturbed;
    }

    let mut test_idx: Vec<usize> = if spec.test_size == 0 || spec.test_size >= test.len() {
        (0..test.len()).collect()
    } else {
        sample(rng, test.len(), spec.test_size).into_vec()
    };
    test_idx.sort_unstable();
    items.extend(test_idx.into_iter().map(|i| {
        let mut it = test[i].clone();
        it.split = Split::Test;
        it
    }));
    items.sort_by_key(|it| it.split);
    LabeledPool::new(items, classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{collapse_classes, render_digits, ClassMap, Perturbation};
    use crate::rng::stream;

    fn source(n: usize, seed: u64) -> Vec<Item> {
        let raw = render_digits(n, 12, &mut stream(seed, "glyph", 0));
        collapse_classes(raw, &ClassMap::zero_one_rest()).unwrap()
    }

    #[test]
    fn default_split_sizes_and_census() {
        let src = source(2300, 1);
        let test = source(50, 2);
        let pool = build_experiment(&ExperimentSpec::default(), &src, &test, 3, &mut stream(9, "exp", 0)).unwrap();
        assert_eq!(pool.count(Split::Train), 20);
        assert_eq!(pool.count(Split::Pool), 1980);
        assert_eq!(pool.count(Split::Val), 200);
        assert_eq!(pool.count(Split::Test), 50);
        let census = pool.census();
        for p in [Perturbation::BlackDots, Perturbation::GaussianBlur, Perturbation::Merged] {
            assert_eq!(census.per_perturbation[&p.to_string()], 200);
        }
        assert!(pool
            .items()
            .iter()
            .filter(|it| it.perturbation != Perturbation::None)
            .all(|it| it.split == Split::Pool));
        for it in pool.items() {
            assert!(it.pixels.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn insufficient_source() {
        let src = source(100, 1);
        assert!(matches!(
            build_experiment(&ExperimentSpec::default(), &src, &[], 3, &mut stream(9, "exp", 0)),
            Err(Error::Data(_))
        ));
    }
}
