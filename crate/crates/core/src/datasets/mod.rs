//! Labeled/pool/validation/test data for the active learning loop.

mod clusters;
mod container;
mod experiment;
mod glyphs;
mod idx;
mod perturb;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use clusters::{make_gaussian_clusters, ClusterSpec, OutlierSpec};
pub use container::{read_pool, write_pool, PoolManifest, POOL_FORMAT_VERSION, POOL_MAGIC};
pub use experiment::{build_experiment, ExperimentSpec};
pub use glyphs::{render_digit, render_digits};
pub use idx::{load_idx, parse_idx_images, parse_idx_labels, write_idx, IDX_IMAGE_MAGIC, IDX_LABEL_MAGIC};
pub use perturb::{perturb_black_dots, perturb_gaussian_blur, perturb_merge};

use crate::error::{Error, Result};
use crate::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Perturbation {
    None,
    BlackDots,
    GaussianBlur,
    Merged,
}

impl Perturbation {
    pub const ALL: [Perturbation; 4] = [
        Perturbation::None,
        Perturbation::BlackDots,
        Perturbation::GaussianBlur,
        Perturbation::Merged,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(usize::from(c)).copied()
    }
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Perturbation::None => "clean",
            Perturbation::BlackDots => "blackdots",
            Perturbation::GaussianBlur => "blur",
            Perturbation::Merged => "merged",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Split {
    Train,
    Pool,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::Pool, Split::Val, Split::Test];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(usize::from(c)).copied()
    }
}

/// One image (`[H, W]` in `[0, 1]`) or feature point (`[d]`).
#[derive(Clone, Debug, PartialEq)]
pub struct Item {
    pub id: u32,
    pub pixels: Tensor,
    label: usize,
    pub perturbation: Perturbation,
    pub split: Split,
}

impl Item {
    pub fn new(id: u32, pixels: Tensor, label: usize) -> Self {
        Self {
            id,
            pixels,
            label,
            perturbation: Perturbation::None,
            split: Split::Train,
        }
    }

    /// Label as visible to the learner: hidden while the item sits in the pool.
    pub fn revealed_label(&self) -> Option<usize> {
        (self.split != Split::Pool).then_some(self.label)
    }

    /// Ground-truth label regardless of split. Used by evaluation, by
    /// supervised baselines and by the oracle; acquisition never reads it.
    pub fn ground_truth(&self) -> usize {
        self.label
    }

    #[cfg(test)]
    pub(crate) fn set_label(&mut self, label: usize) {
        self.label = label;
    }

    pub fn is_image(&self) -> bool {
        self.pixels.shape().len() == 2
    }

    /// Flattened sample length.
    pub fn dim(&self) -> usize {
        self.pixels.len()
    }
}

/// Per-split / per-class / per-perturbation counts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Census {
    pub classes: usize,
    pub per_split: BTreeMap<String, usize>,
    pub per_class: BTreeMap<String, Vec<usize>>,
    pub per_perturbation: BTreeMap<String, usize>,
}

/// Partitioned dataset driving the loop.
///
/// Item ids equal their index in `items`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledPool {
    items: Vec<Item>,
    classes: usize,
}

impl LabeledPool {
    pub fn new(mut items: Vec<Item>, classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::Parameter("class count must be positive".into()));
        }
        for (i, it) in items.iter_mut().enumerate() {
            if it.label >= classes {
                return Err(Error::Data(format!(
                    "item {} has label {} outside [0, {classes})",
                    it.id, it.label
                )));
            }
            it.id = u32::try_from(i).map_err(|_| Error::Data("too many items".into()))?;
        }
        if let Some(first) = items.first() {
            let shape = first.pixels.shape().to_vec();
            if items.iter().any(|it| it.pixels.shape() != shape.as_slice()) {
                return Err(Error::Data("items have inconsistent sample shapes".into()));
            }
        }
        Ok(Self { items, classes })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn item(&self, id: u32) -> Option<&Item> {
        self.items.get(id as usize)
    }

    pub fn sample_shape(&self) -> Vec<usize> {
        self.items
            .first()
            .map(|it| it.pixels.shape().to_vec())
            .unwrap_or_default()
    }

    pub fn ids(&self, split: Split) -> Vec<u32> {
        self.items
            .iter()
            .filter(|it| it.split == split)
            .map(|it| it.id)
            .collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.items.iter().filter(|it| it.split == split).count()
    }

    /// Revealed labels of `split`; `None` for the pool.
    pub fn labels(&self, split: Split) -> Option<Vec<usize>> {
        (split != Split::Pool).then(|| {
            self.items
                .iter()
                .filter(|it| it.split == split)
                .map(|it| it.label)
                .collect()
        })
    }

    /// Flattened sample rows for `ids`, in the given order.
    pub fn inputs(&self, ids: &[u32]) -> Result<Tensor> {
        let d = self.sample_shape().iter().product::<usize>();
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            let it = self
                .item(id)
                .ok_or_else(|| Error::State(format!("no item with id {id}")))?;
            data.extend_from_slice(it.pixels.data());
        }
        Tensor::matrix(ids.len(), d, data)
    }

    /// Per-class counts of the labeled (train) split.
    pub fn train_class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for it in self.items.iter().filter(|it| it.split == Split::Train) {
            counts[it.label] += 1;
        }
        counts
    }

    /// Reveals the labels of `ids` and moves them from the pool to the
    /// labeled set.
    pub fn oracle_label(&mut self, ids: &[u32]) -> Result<Vec<usize>> {
        let mut seen = BTreeSet::new();
        for &id in ids {
            if !seen.insert(id) {
                return Err(Error::State(format!("item {id} requested twice")));
            }
            match self.items.get(id as usize) {
                Some(it) if it.split == Split::Pool => {}
                _ => return Err(Error::State(format!("item {id} is not in the pool"))),
            }
        }
        Ok(ids
            .iter()
            .map(|&id| {
                let it = &mut self.items[id as usize];
                it.split = Split::Train;
                it.label
            })
            .collect())
    }

    pub fn census(&self) -> Census {
        let mut c = Census {
            classes: self.classes,
            ..Default::default()
        };
        for s in Split::ALL {
            c.per_split.insert(format!("{s:?}").to_lowercase(), 0);
            c.per_class
                .insert(format!("{s:?}").to_lowercase(), vec![0; self.classes]);
        }
        for p in Perturbation::ALL {
            c.per_perturbation.insert(p.to_string(), 0);
        }
        for it in &self.items {
            let key = format!("{:?}", it.split).to_lowercase();
            *c.per_split.get_mut(&key).expect("split key") += 1;
            c.per_class.get_mut(&key).expect("split key")[it.label] += 1;
            *c.per_perturbation
                .get_mut(&it.perturbation.to_string())
                .expect("perturbation key") += 1;
        }
        c
    }
}

/// Relabeling table from source labels to collapsed classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassMap {
    map: BTreeMap<usize, usize>,
    default: Option<usize>,
}

impl ClassMap {
    pub fn new(map: BTreeMap<usize, usize>, default: Option<usize>) -> Self {
        Self { map, default }
    }

    /// Digit 0 → 0, digit 1 → 1, every other digit → 2.
    pub fn zero_one_rest() -> Self {
        Self::new(BTreeMap::from([(0, 0), (1, 1)]), Some(2))
    }

    /// Parses `"0:0,1:1,*:2"`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut default = None;
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (from, to) = part
                .split_once(':')
                .ok_or_else(|| Error::Parameter(format!("bad class mapping entry `{part}`")))?;
            let to: usize = to
                .trim()
                .parse()
                .map_err(|_| Error::Parameter(format!("bad target class in `{part}`")))?;
            if from.trim() == "*" {
                default = Some(to);
            } else {
                let from: usize = from
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parameter(format!("bad source label in `{part}`")))?;
                map.insert(from, to);
            }
        }
        Ok(Self { map, default })
    }

    pub fn apply(&self, label: usize) -> Option<usize> {
        self.map.get(&label).copied().or(self.default)
    }

    pub fn target_classes(&self) -> usize {
        self.map
            .values()
            .copied()
            .chain(self.default)
            .max()
            .map_or(0, |m| m + 1)
    }
}

impl fmt::Display for ClassMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.map.iter().map(|(a, b)| format!("{a}:{b}")).collect();
        if let Some(d) = self.default {
            parts.push(format!("*:{d}"));
        }
        f.write_str(&parts.join(","))
    }
}

/// Relabels every item through `mapping`.
pub fn collapse_classes(items: Vec<Item>, mapping: &ClassMap) -> Result<Vec<Item>> {
    items
        .into_iter()
        .map(|mut it| {
            let to = mapping.apply(it.label).ok_or_else(|| {
                Error::Data(format!("label {} of item {} is not mapped", it.label, it.id))
            })?;
            it.label = to;
            Ok(it)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(id: u32, label: usize) -> Item {
        Item::new(id, Tensor::vector(vec![id as f64, 0.0]), label)
    }

    #[test]
    fn collapse_examples() {
        let map = ClassMap::zero_one_rest();
        let out = collapse_classes(vec![pt(0, 0), pt(1, 1), pt(2, 7)], &map).unwrap();
        let labels: Vec<_> = out.iter().map(Item::ground_truth).collect();
        assert_eq!(labels, vec![0, 1, 2]);
        assert!(collapse_classes(vec![], &map).unwrap().is_empty());
    }

    #[test]
    fn collapse_balanced_counts() {
        let items: Vec<_> = (0..10_000).map(|i| pt(i, (i % 10) as usize)).collect();
        let out = collapse_classes(items, &ClassMap::zero_one_rest()).unwrap();
        let mut counts = [0; 3];
        for it in &out {
            counts[it.ground_truth()] += 1;
        }
        assert_eq!(counts, [1000, 1000, 8000]);
    }

    #[test]
    fn collapse_unmapped_label_is_error() {
        let map = ClassMap::parse("0:0,1:1").unwrap();
        assert!(matches!(
            collapse_classes(vec![pt(0, 5)], &map),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn class_map_text_roundtrip() {
        let m = ClassMap::parse("0:0, 1:1, *:2").unwrap();
        assert_eq!(m, ClassMap::zero_one_rest());
        assert_eq!(m.to_string(), "0:0,1:1,*:2");
        assert_eq!(m.target_classes(), 3);
    }

    fn small_pool() -> LabeledPool {
        let mut items: Vec<_> = (0..12).map(|i| pt(i, (i % 3) as usize)).collect();
        for it in items.iter_mut().skip(2) {
            it.split = Split::Pool;
        }
        items[11].split = Split::Test;
        LabeledPool::new(items, 3).unwrap()
    }

    #[test]
    fn oracle_moves_items() {
        let mut pool = small_pool();
        let ids: Vec<u32> = (2..11).collect();
        let before = (pool.count(Split::Train), pool.count(Split::Pool));
        let labels = pool.oracle_label(&ids).unwrap();
        assert_eq!(labels.len(), 9);
        assert_eq!(pool.count(Split::Train), before.0 + 9);
        assert_eq!(pool.count(Split::Pool), before.1 - 9);
    }

    #[test]
    fn oracle_empty_is_noop() {
        let mut pool = small_pool();
        let before = pool.clone();
        pool.oracle_label(&[]).unwrap();
        assert_eq!(pool, before);
    }

    #[test]
    fn oracle_rejects_repeats_and_non_pool() {
        let mut pool = small_pool();
        assert!(matches!(pool.oracle_label(&[3, 3]), Err(Error::State(_))));
        assert!(matches!(pool.oracle_label(&[0]), Err(Error::State(_))));
        assert!(matches!(pool.oracle_label(&[11]), Err(Error::State(_))));
        assert!(matches!(pool.oracle_label(&[99]), Err(Error::State(_))));
        // failed calls leave the pool untouched
        assert_eq!(pool, small_pool());
    }

    #[test]
    fn pool_labels_are_hidden() {
        let pool = small_pool();
        assert!(pool.labels(Split::Pool).is_none());
        assert!(pool.item(5).unwrap().revealed_label().is_none());
        assert_eq!(pool.item(0).unwrap().revealed_label(), Some(0));
    }
}
