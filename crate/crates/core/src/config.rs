//! Flat `key=value` run configuration with dotted sections.
//!
//! Blank lines and lines starting with `#` are ignored. Every key has a
//! default; unknown keys are rejected.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::acquisition::{AcquisitionConfig, Method};
use crate::alloop::LoopConfig;
use crate::bnn::{Objective, TrainSchedule};
use crate::datasets::{
    build_experiment, collapse_classes, load_idx, make_gaussian_clusters, read_pool, render_digits, ClassMap,
    ClusterSpec, ExperimentSpec, LabeledPool, OutlierSpec,
};
use crate::error::{Error, Result};
use crate::rng::stream;

/// Environment variable that overrides `out_dir`.
pub const OUT_DIR_ENV: &str = "FOCAL_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Glyphs,
    Idx,
    Synthetic2d,
}

impl Source {
    fn name(self) -> &'static str {
        match self {
            Source::Glyphs => "glyphs",
            Source::Idx => "idx",
            Source::Synthetic2d => "synthetic-2d",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetConfig {
    pub source: Source,
    pub train_images: String,
    pub train_labels: String,
    pub test_images: String,
    pub test_labels: String,
    pub collapse: ClassMap,
    pub image_side: usize,
    pub source_size: usize,
    pub test_size: usize,
    pub pool_size: usize,
    pub val_size: usize,
    pub per_perturbation: usize,
    pub black_dots_fraction: f64,
    pub blur_sigma: f64,
    pub merge_alpha_min: f64,
    pub merge_alpha_max: f64,
    pub cluster_classes: usize,
    pub cluster_count: usize,
    pub cluster_separation: f64,
    pub cluster_std: f64,
    pub cluster_far: usize,
    pub cluster_far_radius: f64,
    pub cluster_boundary: usize,
    pub cluster_val_per_class: usize,
    pub cluster_test_per_class: usize,
    pub pool_file: String,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            source: Source::Glyphs,
            train_images: String::new(),
            train_labels: String::new(),
            test_images: String::new(),
            test_labels: String::new(),
            collapse: ClassMap::zero_one_rest(),
            image_side: 16,
            source_size: 3000,
            test_size: 2000,
            pool_size: 2000,
            val_size: 200,
            per_perturbation: 200,
            black_dots_fraction: 0.75,
            blur_sigma: 4.0,
            merge_alpha_min: 0.4,
            merge_alpha_max: 0.6,
            cluster_classes: 3,
            cluster_count: 200,
            cluster_separation: 5.0,
            cluster_std: 1.0,
            cluster_far: 20,
            cluster_far_radius: 3.0,
            cluster_boundary: 20,
            cluster_val_per_class: 50,
            cluster_test_per_class: 100,
            pool_file: String::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub feature_dim: usize,
    pub hidden_width: usize,
    pub init_sigma: f64,
    pub mc_samples: usize,
    pub epochs: usize,
    pub lr: f64,
    pub plateau_patience: usize,
    pub lr_factor: f64,
    pub batch_size: usize,
    pub method: Method,
    pub lambda_al: f64,
    pub lambda_ood: f64,
    pub k: usize,
    pub acquisition_batch: usize,
    pub steps: usize,
    pub initial_labeled: usize,
    pub dump_scores: bool,
    pub seed: u64,
    pub out_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            feature_dim: 32,
            hidden_width: 32,
            init_sigma: 1e-3,
            mc_samples: 20,
            epochs: 200,
            lr: 1e-2,
            plateau_patience: 50,
            lr_factor: 0.5,
            batch_size: 32,
            method: Method::FocAL,
            lambda_al: 0.5,
            lambda_ood: 2.0,
            k: 10,
            acquisition_batch: 10,
            steps: 18,
            initial_labeled: 20,
            dump_scores: false,
            seed: 0,
            out_dir: "focal-out".into(),
        }
    }
}

/// Every key with its default, in documentation order.
pub fn documented_keys() -> Vec<(String, String)> {
    RunConfig::default().pairs()
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config {
        key: key.into(),
        message: format!("cannot parse {v:?}"),
    })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                key: line.into(),
                message: format!("line {} is not key=value", n + 1),
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let d = &mut self.dataset;
        match key {
            "dataset.source" => {
                d.source = match v {
                    "glyphs" => Source::Glyphs,
                    "idx" => Source::Idx,
                    "synthetic-2d" => Source::Synthetic2d,
                    _ => {
                        return Err(Error::Config {
                            key: key.into(),
                            message: format!("unknown source {v:?} (glyphs, idx, synthetic-2d)"),
                        })
                    }
                }
            }
            "dataset.train_images" => d.train_images = v.into(),
            "dataset.train_labels" => d.train_labels = v.into(),
            "dataset.test_images" => d.test_images = v.into(),
            "dataset.test_labels" => d.test_labels = v.into(),
            "dataset.collapse" => {
                d.collapse = ClassMap::parse(v).map_err(|e| Error::Config {
                    key: key.into(),
                    message: e.to_string(),
                })?
            }
            "dataset.image_side" => d.image_side = num(key, v)?,
            "dataset.source_size" => d.source_size = num(key, v)?,
            "dataset.test_size" => d.test_size = num(key, v)?,
            "dataset.pool_size" => d.pool_size = num(key, v)?,
            "dataset.val_size" => d.val_size = num(key, v)?,
            "dataset.per_perturbation" => d.per_perturbation = num(key, v)?,
            "dataset.black_dots_fraction" => d.black_dots_fraction = num(key, v)?,
            "dataset.blur_sigma" => d.blur_sigma = num(key, v)?,
            "dataset.merge_alpha_min" => d.merge_alpha_min = num(key, v)?,
            "dataset.merge_alpha_max" => d.merge_alpha_max = num(key, v)?,
            "dataset.clusters.classes" => d.cluster_classes = num(key, v)?,
            "dataset.clusters.count" => d.cluster_count = num(key, v)?,
            "dataset.clusters.separation" => d.cluster_separation = num(key, v)?,
            "dataset.clusters.std" => d.cluster_std = num(key, v)?,
            "dataset.clusters.far" => d.cluster_far = num(key, v)?,
            "dataset.clusters.far_radius" => d.cluster_far_radius = num(key, v)?,
            "dataset.clusters.boundary" => d.cluster_boundary = num(key, v)?,
            "dataset.clusters.val_per_class" => d.cluster_val_per_class = num(key, v)?,
            "dataset.clusters.test_per_class" => d.cluster_test_per_class = num(key, v)?,
            "dataset.pool_file" => d.pool_file = v.into(),
            "model.feature_dim" => self.feature_dim = num(key, v)?,
            "model.hidden_width" => self.hidden_width = num(key, v)?,
            "model.init_sigma" => self.init_sigma = num(key, v)?,
            "model.mc_samples" => self.mc_samples = num(key, v)?,
            "train.epochs" => self.epochs = num(key, v)?,
            "train.lr" => self.lr = num(key, v)?,
            "train.plateau_patience" => self.plateau_patience = num(key, v)?,
            "train.lr_factor" => self.lr_factor = num(key, v)?,
            "train.batch_size" => self.batch_size = num(key, v)?,
            "acquisition.method" => {
                self.method = v.parse().map_err(|e: Error| Error::Config {
                    key: key.into(),
                    message: e.to_string(),
                })?
            }
            "acquisition.lambda_al" => self.lambda_al = num(key, v)?,
            "acquisition.lambda_ood" => self.lambda_ood = num(key, v)?,
            "acquisition.k" => self.k = num(key, v)?,
            "acquisition.batch" => self.acquisition_batch = num(key, v)?,
            "acquisition.steps" => self.steps = num(key, v)?,
            "acquisition.initial_labeled" => self.initial_labeled = num(key, v)?,
            "acquisition.dump_scores" => self.dump_scores = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "out_dir" => self.out_dir = v.into(),
            _ => {
                return Err(Error::Config {
                    key: key.into(),
                    message: "unknown key".into(),
                })
            }
        }
        Ok(())
    }

    /// Every key with its current value; parsing the echo reproduces `self`.
    pub fn pairs(&self) -> Vec<(String, String)> {
        let d = &self.dataset;
        let p = |k: &str, v: String| (k.to_string(), v);
        vec![
            p("seed", self.seed.to_string()),
            p("out_dir", self.out_dir.clone()),
            p("dataset.source", d.source.name().into()),
            p("dataset.train_images", d.train_images.clone()),
            p("dataset.train_labels", d.train_labels.clone()),
            p("dataset.test_images", d.test_images.clone()),
            p("dataset.test_labels", d.test_labels.clone()),
            p("dataset.collapse", d.collapse.to_string()),
            p("dataset.image_side", d.image_side.to_string()),
            p("dataset.source_size", d.source_size.to_string()),
            p("dataset.test_size", d.test_size.to_string()),
            p("dataset.pool_size", d.pool_size.to_string()),
            p("dataset.val_size", d.val_size.to_string()),
            p("dataset.per_perturbation", d.per_perturbation.to_string()),
            p("dataset.black_dots_fraction", d.black_dots_fraction.to_string()),
            p("dataset.blur_sigma", d.blur_sigma.to_string()),
            p("dataset.merge_alpha_min", d.merge_alpha_min.to_string()),
            p("dataset.merge_alpha_max", d.merge_alpha_max.to_string()),
            p("dataset.clusters.classes", d.cluster_classes.to_string()),
            p("dataset.clusters.count", d.cluster_count.to_string()),
            p("dataset.clusters.separation", d.cluster_separation.to_string()),
            p("dataset.clusters.std", d.cluster_std.to_string()),
            p("dataset.clusters.far", d.cluster_far.to_string()),
            p("dataset.clusters.far_radius", d.cluster_far_radius.to_string()),
            p("dataset.clusters.boundary", d.cluster_boundary.to_string()),
            p("dataset.clusters.val_per_class", d.cluster_val_per_class.to_string()),
            p("dataset.clusters.test_per_class", d.cluster_test_per_class.to_string()),
            p("dataset.pool_file", d.pool_file.clone()),
            p("model.feature_dim", self.feature_dim.to_string()),
            p("model.hidden_width", self.hidden_width.to_string()),
            p("model.init_sigma", self.init_sigma.to_string()),
            p("model.mc_samples", self.mc_samples.to_string()),
            p("train.epochs", self.epochs.to_string()),
            p("train.lr", self.lr.to_string()),
            p("train.plateau_patience", self.plateau_patience.to_string()),
            p("train.lr_factor", self.lr_factor.to_string()),
            p("train.batch_size", self.batch_size.to_string()),
            p("acquisition.method", self.method.to_string()),
            p("acquisition.lambda_al", self.lambda_al.to_string()),
            p("acquisition.lambda_ood", self.lambda_ood.to_string()),
            p("acquisition.k", self.k.to_string()),
            p("acquisition.batch", self.acquisition_batch.to_string()),
            p("acquisition.steps", self.steps.to_string()),
            p("acquisition.initial_labeled", self.initial_labeled.to_string()),
            p("acquisition.dump_scores", self.dump_scores.to_string()),
        ]
    }

    pub fn echo(&self) -> BTreeMap<String, String> {
        self.pairs().into_iter().collect()
    }

    pub fn to_text(&self) -> String {
        self.pairs().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// `out_dir`, unless `FOCAL_OUT` is set.
    pub fn resolved_out_dir(&self) -> PathBuf {
        std::env::var_os(OUT_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(&self.out_dir))
    }

    pub fn loop_config(&self) -> LoopConfig {
        LoopConfig {
            feature_dim: self.feature_dim,
            hidden_width: self.hidden_width,
            init_sigma: self.init_sigma,
            train: TrainSchedule {
                epochs: self.epochs,
                lr: self.lr,
                plateau_patience: self.plateau_patience,
                lr_factor: self.lr_factor,
                batch_size: self.batch_size,
                objective: Objective::Elbo,
                kl_weight: None,
            },
            acquisition: AcquisitionConfig {
                method: self.method,
                lambda_al: self.lambda_al,
                lambda_ood: self.lambda_ood,
                k: self.k,
                batch_size: self.acquisition_batch,
                samples: self.mc_samples,
            },
            steps: self.steps,
            seed: self.seed,
            dump_scores: self.dump_scores,
        }
    }

    pub fn experiment_spec(&self) -> ExperimentSpec {
        let d = &self.dataset;
        ExperimentSpec {
            train_pool_size: d.pool_size,
            initial_labeled: self.initial_labeled,
            val_size: d.val_size,
            test_size: d.test_size,
            per_perturbation: d.per_perturbation,
            black_dots_fraction: d.black_dots_fraction,
            blur_sigma: d.blur_sigma,
            merge_alpha: (d.merge_alpha_min, d.merge_alpha_max),
        }
    }

    /// Loads `dataset.pool_file` if set, otherwise generates the pool from
    /// the dataset section and `seed`.
    pub fn pool(&self) -> Result<LabeledPool> {
        if self.dataset.pool_file.is_empty() {
            self.generate_pool()
        } else {
            read_pool(Path::new(&self.dataset.pool_file))
        }
    }

    pub fn generate_pool(&self) -> Result<LabeledPool> {
        let d = &self.dataset;
        let classes = d.collapse.target_classes();
        let mut rng = stream(self.seed, "experiment", 0);
        match d.source {
            Source::Glyphs => {
                let source = render_digits(d.source_size, d.image_side, &mut stream(self.seed, "glyphs", 0));
                let test = render_digits(d.test_size, d.image_side, &mut stream(self.seed, "glyphs", 1));
                let source = collapse_classes(source, &d.collapse)?;
                let test = collapse_classes(test, &d.collapse)?;
                let mut spec = self.experiment_spec();
                spec.test_size = 0;
                build_experiment(&spec, &source, &test, classes, &mut rng)
            }
            Source::Idx => {
                let missing = [&d.train_images, &d.train_labels, &d.test_images, &d.test_labels]
                    .iter()
                    .any(|p| p.is_empty());
                if missing {
                    return Err(Error::Config {
                        key: "dataset.train_images".into(),
                        message: "idx source needs train/test image and label paths".into(),
                    });
                }
                let source = load_idx(Path::new(&d.train_images), Path::new(&d.train_labels))?;
                let test = load_idx(Path::new(&d.test_images), Path::new(&d.test_labels))?;
                let source = collapse_classes(source, &d.collapse)?;
                let test = collapse_classes(test, &d.collapse)?;
                build_experiment(&self.experiment_spec(), &source, &test, classes, &mut rng)
            }
            Source::Synthetic2d => {
                let c = d.cluster_classes;
                if c < 2 {
                    return Err(Error::Config {
                        key: "dataset.clusters.classes".into(),
                        message: "need at least two classes".into(),
                    });
                }
                let means = (0..c)
                    .map(|i| {
                        let a = std::f64::consts::TAU * i as f64 / c as f64;
                        [d.cluster_separation * a.cos(), d.cluster_separation * a.sin()]
                    })
                    .collect();
                let mut spec = ClusterSpec::isotropic(means, d.cluster_std, d.cluster_count);
                spec.val_per_class = d.cluster_val_per_class;
                spec.test_per_class = d.cluster_test_per_class;
                spec.initial_labeled = self.initial_labeled;
                spec.outliers = OutlierSpec {
                    far: d.cluster_far,
                    far_radius: d.cluster_far_radius,
                    boundary: d.cluster_boundary,
                };
                make_gaussian_clusters(&spec, &mut rng)
            }
        }
    }
}
