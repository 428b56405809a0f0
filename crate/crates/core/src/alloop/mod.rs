//! The acquisition loop: train from scratch, evaluate, score the pool,
//! label the best batch, repeat.

mod metrics;
mod record;

use std::time::Instant;

pub use metrics::{
    accuracy, confusion, f1_from_confusion, kappa_from_confusion, macro_f1, quadratic_kappa, F1Report, Kappa,
};
pub use record::{
    compare, comparison_csv, mean_stderr, perturbed_acquired, ComparisonRow, RunManifest, RunRecord, StepRow,
    ACQ_ORDER, COMPARISON_HEADER, COMPARISON_METRICS,
};

use crate::acquisition::{class_weights, random_batch, score_pool, select_batch, AcquisitionConfig, Method};
use crate::bnn::{train, InputShape, ModelSpec, TrainSchedule, VariationalClassifier};
use crate::datasets::{LabeledPool, Perturbation, Split};
use crate::error::{Error, Result};
use crate::ood::OodIndex;
use crate::rng::{derive_seed, stream};
use crate::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct LoopConfig {
    pub feature_dim: usize,
    pub hidden_width: usize,
    pub init_sigma: f64,
    pub train: TrainSchedule,
    pub acquisition: AcquisitionConfig,
    /// Acquisition steps `S`; the loop trains `S + 1` models.
    pub steps: usize,
    pub seed: u64,
    pub dump_scores: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            feature_dim: 32,
            hidden_width: 32,
            init_sigma: 1e-3,
            train: TrainSchedule::default(),
            acquisition: AcquisitionConfig::default(),
            steps: 18,
            seed: 0,
            dump_scores: false,
        }
    }
}

impl LoopConfig {
    pub fn model_spec(&self, pool: &LabeledPool) -> Result<ModelSpec> {
        let input = match pool.sample_shape().as_slice() {
            [h, w] => InputShape::Image { height: *h, width: *w },
            [d] => InputShape::Vector(*d),
            s => return Err(Error::Data(format!("unsupported sample shape {s:?}"))),
        };
        let mut spec = ModelSpec::new(input, pool.classes());
        spec.feature_dim = self.feature_dim;
        spec.hidden_width = self.hidden_width;
        spec.extractor_hidden = self.feature_dim;
        spec.init_sigma = self.init_sigma;
        Ok(spec)
    }
}

/// A run that stopped early, with every completed step kept.
#[derive(Debug)]
pub struct RunAbort {
    pub partial: RunRecord,
    pub error: Error,
}

impl std::fmt::Display for RunAbort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run aborted after {} steps: {}", self.partial.steps.len(), self.error)
    }
}

impl std::error::Error for RunAbort {}

struct Split2 {
    ids: Vec<u32>,
    x: Tensor,
    y: Vec<usize>,
}

fn labeled(pool: &LabeledPool, split: Split) -> Result<Split2> {
    let ids = pool.ids(split);
    let x = pool.inputs(&ids)?;
    let y = pool.labels(split).unwrap_or_default();
    Ok(Split2 { ids, x, y })
}

/// Trains a fresh model on `x, y` with the loop's schedule.
pub fn fit(
    spec: &ModelSpec,
    config: &LoopConfig,
    x: &Tensor,
    y: &[usize],
    val: Option<(&Tensor, &[usize])>,
    step: u64,
) -> Result<VariationalClassifier<f64>> {
    let mut model = VariationalClassifier::new(spec.clone(), derive_seed(config.seed, "init", step))?;
    train(&mut model, x, y, val, &config.train, &mut stream(config.seed, "train", step))?;
    Ok(model)
}

/// Monte Carlo test predictions with per-item streams.
pub fn evaluate(
    model: &VariationalClassifier<f64>,
    ids: &[u32],
    x: &Tensor,
    samples: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let draws = model.mc_item_draws(&model.features(x)?, ids, samples, seed)?;
    let mut p = Tensor::zeros(draws[0].shape());
    for d in &draws {
        for (a, &v) in p.data_mut().iter_mut().zip(d.data()) {
            *a += v;
        }
    }
    Ok(p.argmax_rows())
}

fn check(pool: &LabeledPool, config: &LoopConfig) -> Result<()> {
    config.acquisition.validate()?;
    let need = config.steps * config.acquisition.batch_size;
    if need > pool.count(Split::Pool) {
        return Err(Error::Parameter(format!(
            "{} steps of {} need {need} pool items, pool has {}",
            config.steps,
            config.acquisition.batch_size,
            pool.count(Split::Pool)
        )));
    }
    if pool.count(Split::Train) == 0 {
        return Err(Error::Parameter("no initially labeled items".into()));
    }
    if pool.count(Split::Test) == 0 {
        return Err(Error::Parameter("no test items".into()));
    }
    if config.acquisition.method == Method::FocAL && pool.count(Split::Train) <= config.acquisition.k {
        return Err(Error::Parameter(format!(
            "LOF with k={} needs more than {} labeled items",
            config.acquisition.k,
            pool.count(Split::Train)
        )));
    }
    Ok(())
}

/// Runs the full loop on `pool`, mutating its splits as labels are
/// acquired. `on_step` sees the record after every completed step.
pub fn run_with(
    pool: &mut LabeledPool,
    config: &LoopConfig,
    mut on_step: impl FnMut(&RunRecord),
) -> std::result::Result<RunRecord, RunAbort> {
    let mut record = RunRecord::new(config.acquisition.method, config.seed, pool.classes());
    match run_steps(pool, config, &mut record, &mut on_step) {
        Ok(()) => Ok(record),
        Err(error) => Err(RunAbort {
            partial: record,
            error,
        }),
    }
}

pub fn run(pool: &mut LabeledPool, config: &LoopConfig) -> std::result::Result<RunRecord, RunAbort> {
    run_with(pool, config, |_| {})
}

fn run_steps(
    pool: &mut LabeledPool,
    config: &LoopConfig,
    record: &mut RunRecord,
    on_step: &mut dyn FnMut(&RunRecord),
) -> Result<()> {
    check(pool, config)?;
    let spec = config.model_spec(pool)?;
    let acq = &config.acquisition;
    let test = labeled(pool, Split::Test)?;
    let val = labeled(pool, Split::Val)?;
    let val_ref = (!val.ids.is_empty()).then_some((&val.x, val.y.as_slice()));
    let mut acquired = [0usize; 4];

    for s in 0..=config.steps {
        let started = Instant::now();
        let step = s as u64;
        let tr = labeled(pool, Split::Train)?;
        let model = fit(&spec, config, &tr.x, &tr.y, val_ref, step)?;

        let preds = evaluate(&model, &test.ids, &test.x, acq.samples, derive_seed(config.seed, "eval", step))?;
        let f1 = macro_f1(&preds, &test.y, pool.classes())?;
        let kappa = quadratic_kappa(&preds, &test.y, pool.classes())?;
        if !f1.zero_by_convention.is_empty() {
            record
                .flags
                .push(format!("step {s}: F1 set to 0 for classes {:?}", f1.zero_by_convention));
        }
        if kappa.degenerate {
            record.flags.push(format!("step {s}: kappa denominator zero, reported as 0"));
        }
        let mut row = StepRow {
            step: s,
            n_labeled: tr.ids.len(),
            accuracy: accuracy(&preds, &test.y)?,
            kappa: kappa.value,
            macro_f1: f1.macro_f1,
            f1_class: f1.per_class,
            acquired,
            seconds: 0.0,
        };

        if s < config.steps {
            let pool_ids = pool.ids(Split::Pool);
            let batch = if acq.method == Method::RA {
                random_batch(&pool_ids, acq.batch_size, &mut stream(config.seed, "random-batch", step))?
            } else {
                let z_pool = model.features(&pool.inputs(&pool_ids)?)?;
                let draws = model.mc_item_draws(&z_pool, &pool_ids, acq.samples, derive_seed(config.seed, "score", step))?;
                let ood = if acq.method == Method::FocAL {
                    let index = OodIndex::build(model.features(&tr.x)?, acq.k)?;
                    Some(index.score_rows(&z_pool)?)
                } else {
                    None
                };
                let weights = class_weights::<f64>(&pool.train_class_counts())?;
                let rows = score_pool(acq, &pool_ids, &draws, ood.as_deref(), &weights)?;
                let totals: Vec<f64> = rows.iter().map(|r| r.total).collect();
                let batch = select_batch(&pool_ids, &totals, acq.batch_size)?;
                if config.dump_scores {
                    record.score_dumps.push((s, rows));
                }
                batch
            };
            pool.oracle_label(&batch)?;
            for id in &batch {
                let tag = pool.item(*id).expect("labeled id exists").perturbation;
                let slot = ACQ_ORDER.iter().position(|&p| p == tag).expect("all tags listed");
                acquired[slot] += 1;
            }
            record.acquired.push(batch);
        }
        row.seconds = started.elapsed().as_secs_f64();
        record.steps.push(row);
        on_step(record);
    }
    Ok(())
}

/// Test accuracy of one model trained on every train and pool item,
/// optionally dropping perturbed ones.
pub fn supervised_baseline(pool: &LabeledPool, config: &LoopConfig, include_perturbed: bool) -> Result<f64> {
    let ids: Vec<u32> = pool
        .items()
        .iter()
        .filter(|it| matches!(it.split, Split::Train | Split::Pool))
        .filter(|it| include_perturbed || it.perturbation == Perturbation::None)
        .map(|it| it.id)
        .collect();
    let y: Vec<usize> = ids
        .iter()
        .map(|&id| pool.item(id).expect("id from pool").ground_truth())
        .collect();
    let x = pool.inputs(&ids)?;
    let spec = config.model_spec(pool)?;
    let val = labeled(pool, Split::Val)?;
    let test = labeled(pool, Split::Test)?;
    let val_ref = (!val.ids.is_empty()).then_some((&val.x, val.y.as_slice()));
    let model = fit(&spec, config, &x, &y, val_ref, u64::MAX)?;
    let preds = evaluate(
        &model,
        &test.ids,
        &test.x,
        config.acquisition.samples,
        derive_seed(config.seed, "eval", u64::MAX),
    )?;
    accuracy(&preds, &test.y)
}
