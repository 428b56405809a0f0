mod common;

use std::collections::BTreeSet;

use focal::acquisition::Method;
use focal::alloop::{
    accuracy, compare, fit, kappa_from_confusion, macro_f1, perturbed_acquired, quadratic_kappa, run, run_with,
    RunRecord, StepRow,
};
use focal::config::RunConfig;
use focal::datasets::{LabeledPool, Perturbation, Split};
use focal::ood::OodIndex;
use focal::rng::stream;
use focal::Error;
use proptest::prelude::*;
use rand::Rng;

const SMALL: &str = "
seed=3
dataset.source=synthetic-2d
dataset.clusters.classes=3
dataset.clusters.count=30
dataset.clusters.far=4
dataset.clusters.boundary=3
dataset.clusters.val_per_class=10
dataset.clusters.test_per_class=20
model.feature_dim=8
model.hidden_width=8
model.mc_samples=5
train.epochs=12
train.lr=0.01
acquisition.k=5
acquisition.batch=4
acquisition.steps=3
acquisition.initial_labeled=12
acquisition.dump_scores=true
";

fn small(extra: &str) -> RunConfig {
    RunConfig::parse(&format!("{SMALL}\n{extra}")).unwrap()
}

#[test]
fn kappa_matches_the_direct_formula() {
    let mut rng = stream(11, "kappa", 0);
    for _ in 0..1000 {
        let c = rng.random_range(2..=6);
        let o = common::random_confusion(c, &mut rng);
        let k = kappa_from_confusion(&o).unwrap();
        assert!(!k.degenerate);
        let want = common::kappa_direct(&o);
        assert!((k.value - want).abs() <= 1e-12, "{} vs {want} for {o:?}", k.value);
    }
}

#[test]
fn kappa_reference_points() {
    let labels = [0, 1, 2, 2, 1, 0, 3];
    assert_eq!(quadratic_kappa(&labels, &labels, 4).unwrap().value, 1.0);
    // O equal to the outer product of its own marginals
    let rows = [2usize, 3, 5];
    let cols = [4usize, 1, 2];
    let o: Vec<Vec<usize>> = rows.iter().map(|r| cols.iter().map(|c| r * c).collect()).collect();
    assert!(kappa_from_confusion(&o).unwrap().value.abs() <= 1e-12);
    let k = quadratic_kappa(&[1, 1, 1], &[1, 1, 1], 3).unwrap();
    assert!(k.degenerate);
    assert_eq!(k.value, 0.0);
}

#[test]
fn accuracy_and_f1_examples() {
    assert_eq!(accuracy(&[0, 1, 2, 1], &[0, 1, 2, 2]).unwrap(), 0.75);
    assert_eq!(accuracy(&[1, 1], &[0, 0]).unwrap(), 0.0);
    assert!(accuracy(&[1], &[0, 0]).is_err());

    let preds: Vec<usize> = [vec![0; 5], vec![1; 5], vec![1; 10]].concat();
    let labels: Vec<usize> = [vec![0; 10], vec![1; 10]].concat();
    let f1 = macro_f1(&preds, &labels, 2).unwrap();
    assert!((f1.per_class[0] - 2.0 / 3.0).abs() < 1e-12);
    assert!((f1.per_class[1] - 0.8).abs() < 1e-12);
    let absent = macro_f1(&[0, 1], &[0, 1], 3).unwrap();
    assert_eq!(absent.per_class, vec![1.0, 1.0, 0.0]);
    assert_eq!(absent.zero_by_convention, vec![2]);
}

fn row(step: usize, n_labeled: usize, accuracy: f64, acquired: [usize; 4]) -> StepRow {
    StepRow {
        step,
        n_labeled,
        accuracy,
        kappa: accuracy,
        macro_f1: accuracy,
        f1_class: vec![accuracy; 2],
        acquired,
        seconds: 0.0,
    }
}

fn record(method: Method, seed: u64, accs: &[f64]) -> RunRecord {
    let mut r = RunRecord::new(method, seed, 2);
    for (i, &a) in accs.iter().enumerate() {
        r.steps.push(row(i, 20 + 10 * i, a, [0; 4]));
    }
    r
}

#[test]
fn comparison_examples() {
    let one = compare(&[record(Method::EN, 0, &[0.5, 0.7])]).unwrap();
    assert!(one.iter().all(|r| r.stderr == 0.0));
    let acc: Vec<f64> = one.iter().filter(|r| r.metric == "accuracy").map(|r| r.mean).collect();
    assert_eq!(acc, vec![0.5, 0.7]);

    let same: Vec<RunRecord> = (0..5).map(|s| record(Method::BALD, s, &[0.6, 0.65])).collect();
    assert!(compare(&same).unwrap().iter().all(|r| r.stderr == 0.0));

    let pair = compare(&[record(Method::FocAL, 0, &[0.8]), record(Method::FocAL, 1, &[0.9])]).unwrap();
    let acc = pair.iter().find(|r| r.metric == "accuracy").unwrap();
    assert!((acc.mean - 0.85).abs() < 1e-12);
    assert!((acc.stderr - 0.05).abs() < 1e-12);

    let mismatch = compare(&[record(Method::EN, 0, &[0.5, 0.7]), record(Method::RA, 0, &[0.5])]);
    assert!(matches!(mismatch, Err(Error::Aggregation(_))));
}

#[test]
fn perturbed_counts_are_cumulative() {
    let mut r = RunRecord::new(Method::EN, 0, 3);
    r.steps.push(row(0, 20, 0.5, [0, 0, 0, 0]));
    r.steps.push(row(1, 30, 0.5, [3, 0, 0, 7]));
    r.steps.push(row(2, 40, 0.5, [3, 0, 2, 15]));
    assert_eq!(perturbed_acquired(&r), vec![0, 3, 5]);
}

fn ids_in(pool: &LabeledPool, split: Split) -> BTreeSet<u32> {
    pool.ids(split).into_iter().collect()
}

#[test]
fn loop_conserves_items_and_never_reacquires() {
    let cfg = small("acquisition.method=focal");
    let mut pool = cfg.pool().unwrap();
    let start_pool = ids_in(&pool, Split::Pool);
    let (val0, test0) = (ids_in(&pool, Split::Val), ids_in(&pool, Split::Test));
    let total = pool.count(Split::Train) + pool.count(Split::Pool);
    let mut seen = Vec::new();
    let rec = run_with(&mut pool, &cfg.loop_config(), |r| seen.push(r.steps.len())).unwrap();
    assert_eq!(seen, vec![1, 2, 3, 4]);
    assert_eq!(rec.steps.len(), 4);
    for (s, step) in rec.steps.iter().enumerate() {
        assert_eq!(step.step, s);
        assert_eq!(step.n_labeled, 12 + 4 * s);
    }
    assert_eq!(pool.count(Split::Train), 12 + 3 * 4);
    assert_eq!(pool.count(Split::Train) + pool.count(Split::Pool), total);
    assert_eq!(ids_in(&pool, Split::Val), val0);
    assert_eq!(ids_in(&pool, Split::Test), test0);

    let mut all = BTreeSet::new();
    for batch in &rec.acquired {
        assert_eq!(batch.len(), 4);
        for id in batch {
            assert!(start_pool.contains(id));
            assert!(all.insert(*id), "item {id} acquired twice");
        }
    }
    let counts = perturbed_acquired(&rec);
    assert!(counts.windows(2).all(|w| w[0] <= w[1]));
    let tagged = all
        .iter()
        .filter(|&&id| pool.item(id).unwrap().perturbation != Perturbation::None)
        .count();
    assert_eq!(*counts.last().unwrap(), tagged);
}

#[test]
fn ood_scores_come_from_the_current_labeled_set() {
    let cfg = small("acquisition.method=focal");
    let lc = cfg.loop_config();
    let fresh = cfg.pool().unwrap();
    let mut pool = fresh.clone();
    let rec = run(&mut pool, &lc).unwrap();
    assert_eq!(rec.score_dumps.len(), 3);

    let spec = lc.model_spec(&fresh).unwrap();
    let val_ids = fresh.ids(Split::Val);
    let vx = fresh.inputs(&val_ids).unwrap();
    let vy = fresh.labels(Split::Val).unwrap();
    let mut replay = fresh.clone();
    for (s, (step, rows)) in rec.score_dumps.iter().enumerate() {
        assert_eq!(*step, s);
        let train_ids = replay.ids(Split::Train);
        let x = replay.inputs(&train_ids).unwrap();
        let y = replay.labels(Split::Train).unwrap();
        let model = fit(&spec, &lc, &x, &y, Some((&vx, &vy)), s as u64).unwrap();
        let index = OodIndex::build(model.features(&x).unwrap(), lc.acquisition.k).unwrap();
        let pool_ids = replay.ids(Split::Pool);
        let want = index.score_rows(&model.features(&replay.inputs(&pool_ids).unwrap()).unwrap()).unwrap();
        assert_eq!(rows.len(), pool_ids.len());
        for ((r, id), w) in rows.iter().zip(&pool_ids).zip(&want) {
            assert_eq!(r.item_id, *id);
            assert_eq!(r.ood, *w);
        }
        replay.oracle_label(&rec.acquired[s]).unwrap();
    }
}

#[test]
fn runs_are_reproducible() {
    let cfg = small("acquisition.method=bald");
    let once = || run(&mut cfg.pool().unwrap(), &cfg.loop_config()).unwrap();
    let (a, b) = (once(), once());
    assert_eq!(a.steps_csv(), b.steps_csv());
    assert_eq!(a.acquired, b.acquired);
    let other = small("acquisition.method=bald\nseed=4");
    let c = run(&mut other.pool().unwrap(), &other.loop_config()).unwrap();
    assert_ne!(a.acquired, c.acquired);
}

#[test]
fn zero_steps_evaluates_the_initial_model_only() {
    let cfg = small("acquisition.steps=0");
    let mut pool = cfg.pool().unwrap();
    let rec = run(&mut pool, &cfg.loop_config()).unwrap();
    assert_eq!(rec.steps.len(), 1);
    assert!(rec.acquired.is_empty());
    assert_eq!(pool.count(Split::Train), 12);
}

#[test]
fn random_acquisition_needs_no_novelty_index() {
    // k larger than the labeled set would make the index impossible to build
    let cfg = small("acquisition.method=ra\nacquisition.k=50");
    let rec = run(&mut cfg.pool().unwrap(), &cfg.loop_config()).unwrap();
    assert_eq!(rec.steps.len(), 4);
    let focal = small("acquisition.method=focal\nacquisition.k=50");
    let abort = run(&mut focal.pool().unwrap(), &focal.loop_config()).unwrap_err();
    assert!(abort.partial.steps.is_empty());
}

#[test]
fn oversized_batches_abort_before_any_step() {
    let cfg = small("acquisition.batch=500");
    let abort = run(&mut cfg.pool().unwrap(), &cfg.loop_config()).unwrap_err();
    assert!(abort.partial.steps.is_empty());
    assert!(matches!(abort.error, Error::Parameter(_)));
}

#[test]
fn run_files_are_written() {
    let cfg = small("acquisition.method=ms\nacquisition.steps=1");
    let rec = run(&mut cfg.pool().unwrap(), &cfg.loop_config()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    rec.write(dir.path(), cfg.echo(), None).unwrap();
    let steps = std::fs::read_to_string(dir.path().join("steps.csv")).unwrap();
    assert_eq!(steps.lines().count(), 3);
    assert!(steps.starts_with("step,n_labeled,accuracy,kappa,macro_f1,f1_class_0,f1_class_1,f1_class_2,"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["method"], "MS");
    let echo: Vec<(String, String)> = manifest["config"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, v)| (k.clone(), v.as_str().unwrap().to_string()))
        .collect();
    let text: String = echo.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    assert!(dir.path().join("scores_step00.csv").exists());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_echo_roundtrips(seed in any::<u64>(), lr in 1e-6f64..1.0, lam in 0.0f64..10.0, k in 1usize..60, b in 1usize..40, m in 0usize..6, dump in any::<bool>(), sigma in 1e-8f64..1.0, dir in "[a-z0-9_/]{1,12}") {
        let mut c = RunConfig::default();
        c.seed = seed;
        c.lr = lr;
        c.lambda_al = lam;
        c.lambda_ood = lam * 0.3;
        c.k = k;
        c.acquisition_batch = b;
        c.method = Method::ALL[m];
        c.dump_scores = dump;
        c.init_sigma = sigma;
        c.out_dir = dir;
        prop_assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }
}
