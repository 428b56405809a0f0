use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::acquisition::{Method, ScoreRow};
use crate::datasets::Perturbation;
use crate::error::{Error, Result};

/// Acquired-item counts in the order of the `acq_*` columns.
pub const ACQ_ORDER: [Perturbation; 4] = [
    Perturbation::BlackDots,
    Perturbation::GaussianBlur,
    Perturbation::Merged,
    Perturbation::None,
];

#[derive(Clone, Debug, PartialEq)]
pub struct StepRow {
    pub step: usize,
    pub n_labeled: usize,
    pub accuracy: f64,
    pub kappa: f64,
    pub macro_f1: f64,
    pub f1_class: Vec<f64>,
    /// Cumulative acquisitions per tag in [`ACQ_ORDER`].
    pub acquired: [usize; 4],
    pub seconds: f64,
}

impl StepRow {
    pub fn acquired_perturbed(&self) -> usize {
        self.acquired[..3].iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: String,
    pub method: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub steps_completed: usize,
    pub aborted: Option<String>,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub method: Method,
    pub seed: u64,
    pub classes: usize,
    pub steps: Vec<StepRow>,
    /// Ids labeled at each acquisition step.
    pub acquired: Vec<Vec<u32>>,
    /// Metric conventions that kicked in (absent classes, degenerate kappa).
    pub flags: Vec<String>,
    /// Per-step score dumps when enabled.
    pub score_dumps: Vec<(usize, Vec<ScoreRow>)>,
}

impl RunRecord {
    pub fn new(method: Method, seed: u64, classes: usize) -> Self {
        Self {
            method,
            seed,
            classes,
            steps: Vec::new(),
            acquired: Vec::new(),
            flags: Vec::new(),
            score_dumps: Vec::new(),
        }
    }

    pub fn steps_csv(&self) -> String {
        let mut out = String::from("step,n_labeled,accuracy,kappa,macro_f1");
        for c in 0..self.classes {
            write!(out, ",f1_class_{c}").unwrap();
        }
        out.push_str(",acq_blackdots,acq_blur,acq_merged,acq_clean\n");
        for r in &self.steps {
            write!(out, "{},{},{},{},{}", r.step, r.n_labeled, r.accuracy, r.kappa, r.macro_f1).unwrap();
            for f in &r.f1_class {
                write!(out, ",{f}").unwrap();
            }
            for a in r.acquired {
                write!(out, ",{a}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from("step,seconds\n");
        for r in &self.steps {
            writeln!(out, "{},{:.3}", r.step, r.seconds).unwrap();
        }
        out
    }

    pub fn manifest(&self, config: BTreeMap<String, String>, aborted: Option<&Error>) -> RunManifest {
        RunManifest {
            format: "focal-run".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            method: self.method.to_string(),
            seed: self.seed,
            config,
            steps_completed: self.steps.len(),
            aborted: aborted.map(|e| e.to_string()),
            flags: self.flags.clone(),
        }
    }

    /// Writes `run_manifest.json`, `steps.csv`, `timing.csv` and any score
    /// dumps into `dir`.
    pub fn write(&self, dir: &Path, config: BTreeMap<String, String>, aborted: Option<&Error>) -> Result<()> {
        fs::create_dir_all(dir)?;
        let manifest = serde_json::to_string_pretty(&self.manifest(config, aborted))?;
        fs::write(dir.join("run_manifest.json"), manifest + "\n")?;
        fs::write(dir.join("steps.csv"), self.steps_csv())?;
        fs::write(dir.join("timing.csv"), self.timing_csv())?;
        for (step, rows) in &self.score_dumps {
            fs::write(
                dir.join(format!("scores_step{step:02}.csv")),
                crate::acquisition::score_dump_csv(rows, self.method),
            )?;
        }
        Ok(())
    }
}

/// Cumulative count of acquired items carrying any perturbation, per step.
pub fn perturbed_acquired(record: &RunRecord) -> Vec<usize> {
    record.steps.iter().map(StepRow::acquired_perturbed).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub method: String,
    pub step: usize,
    pub metric: String,
    pub mean: f64,
    pub stderr: f64,
}

pub const COMPARISON_METRICS: [&str; 4] = ["accuracy", "kappa", "macro_f1", "acquired_perturbed"];

fn metric(row: &StepRow, name: &str) -> f64 {
    match name {
        "accuracy" => row.accuracy,
        "kappa" => row.kappa,
        "macro_f1" => row.macro_f1,
        _ => row.acquired_perturbed() as f64,
    }
}

/// Mean and standard error (sample deviation over `√n`).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-method, per-step mean and standard error across seeds.
pub fn compare(records: &[RunRecord]) -> Result<Vec<ComparisonRow>> {
    let first = records
        .first()
        .ok_or_else(|| Error::Aggregation("no run records to compare".into()))?;
    let grid = |r: &RunRecord| r.steps.iter().map(|s| (s.step, s.n_labeled)).collect::<Vec<_>>();
    let reference = grid(first);
    if let Some(bad) = records.iter().find(|r| grid(r) != reference) {
        return Err(Error::Aggregation(format!(
            "{} seed {} has step grid {:?}, expected {:?}",
            bad.method,
            bad.seed,
            grid(bad),
            reference
        )));
    }
    let mut by_method: BTreeMap<Method, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        by_method.entry(r.method).or_default().push(r);
    }
    let mut out = Vec::new();
    for (method, runs) in by_method {
        for (i, &(step, _)) in reference.iter().enumerate() {
            for name in COMPARISON_METRICS {
                let values: Vec<f64> = runs.iter().map(|r| metric(&r.steps[i], name)).collect();
                let (mean, stderr) = mean_stderr(&values);
                out.push(ComparisonRow {
                    method: method.to_string(),
                    step,
                    metric: name.into(),
                    mean,
                    stderr,
                });
            }
        }
    }
    Ok(out)
}

pub const COMPARISON_HEADER: &str = "method,step,metric,mean,stderr";

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from(COMPARISON_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.method, r.step, r.metric, r.mean, r.stderr).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(method: Method, seed: u64, acc: &[f64]) -> RunRecord {
        let mut r = RunRecord::new(method, seed, 2);
        for (s, &a) in acc.iter().enumerate() {
            r.steps.push(StepRow {
                step: s,
                n_labeled: 20 + 10 * s,
                accuracy: a,
                kappa: a,
                macro_f1: a,
                f1_class: vec![a, a],
                acquired: [s, 0, 0, 0],
                seconds: 0.0,
            });
        }
        r
    }

    fn find<'a>(rows: &'a [ComparisonRow], method: &str, step: usize, metric: &str) -> &'a ComparisonRow {
        rows.iter()
            .find(|r| r.method == method && r.step == step && r.metric == metric)
            .unwrap()
    }

    #[test]
    fn aggregation() {
        let rows = compare(&[record(Method::EN, 0, &[0.5, 0.8]), record(Method::EN, 1, &[0.5, 0.9])]).unwrap();
        let r = find(&rows, "EN", 1, "accuracy");
        assert!((r.mean - 0.85).abs() < 1e-12);
        assert!((r.stderr - 0.05).abs() < 1e-12);
        let single = compare(&[record(Method::RA, 0, &[0.7])]).unwrap();
        assert!(single.iter().all(|r| r.stderr == 0.0));
        assert_eq!(find(&single, "RA", 0, "accuracy").mean, 0.7);
        let same: Vec<_> = (0..5).map(|s| record(Method::MS, s, &[0.6, 0.7])).collect();
        assert!(compare(&same).unwrap().iter().all(|r| r.stderr == 0.0));
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let r = compare(&[record(Method::EN, 0, &[0.5, 0.8]), record(Method::EP, 0, &[0.5])]);
        assert!(matches!(r, Err(Error::Aggregation(_))));
        assert!(compare(&[]).is_err());
    }

    #[test]
    fn cumulative_perturbed() {
        let mut r = record(Method::FocAL, 0, &[0.1, 0.2, 0.3]);
        r.steps[1].acquired = [3, 0, 0, 7];
        r.steps[2].acquired = [3, 0, 2, 15];
        r.steps[0].acquired = [0; 4];
        assert_eq!(perturbed_acquired(&r), vec![0, 3, 5]);
        let csv = r.steps_csv();
        assert!(csv.starts_with("step,n_labeled,accuracy,kappa,macro_f1,f1_class_0,f1_class_1,acq_blackdots"));
        assert_eq!(csv.lines().count(), 4);
    }
}
