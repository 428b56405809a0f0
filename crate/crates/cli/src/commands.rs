use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::{fs, thread};

use focal::alloop::{self, comparison_csv, RunAbort, RunRecord};
use focal::config::RunConfig;
use focal::datasets::{write_pool, PoolManifest};
use focal::Error;

pub const INPUT_ERROR: u8 = 2;
pub const RUN_ABORT: u8 = 3;
pub const AGGREGATION_MISMATCH: u8 = 4;
pub const REFUSE_OVERWRITE: u8 = 5;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self::new(INPUT_ERROR, message)
    }
}

pub type CmdResult = Result<(), Failure>;

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    RunConfig::load(path).map_err(|e| match e {
        Error::Config { key, message } => Failure::input(format!("{}: key {key}: {message}", path.display())),
        other => Failure::input(format!("{}: {other}", path.display())),
    })
}

fn refuse_existing(paths: &[PathBuf]) -> CmdResult {
    if let Some(p) = paths.iter().find(|p| p.exists()) {
        return Err(Failure::new(
            REFUSE_OVERWRITE,
            format!("{} already exists; refusing to overwrite", p.display()),
        ));
    }
    Ok(())
}

fn io_failure(code: u8, what: &str, e: impl std::fmt::Display) -> Failure {
    Failure::new(code, format!("{what}: {e}"))
}

pub fn gen_data(config_path: &Path) -> CmdResult {
    let cfg = load_config(config_path)?;
    let out = cfg.resolved_out_dir();
    let (pool_path, manifest_path) = (out.join("pool.bin"), out.join("pool.json"));
    refuse_existing(&[pool_path.clone(), manifest_path.clone()])?;
    let pool = cfg.generate_pool().map_err(|e| Failure::input(format!("building pool: {e}")))?;
    fs::create_dir_all(&out).map_err(|e| io_failure(INPUT_ERROR, "creating output directory", e))?;
    write_pool(&pool_path, &pool).map_err(|e| io_failure(INPUT_ERROR, "writing pool", e))?;
    let manifest = PoolManifest::new(cfg.seed, cfg.echo(), &pool);
    manifest
        .write(&manifest_path)
        .map_err(|e| io_failure(INPUT_ERROR, "writing manifest", e))?;
    let census = &manifest.census;
    println!("pool written to {}", pool_path.display());
    println!("classes: {}", census.classes);
    for (split, n) in &census.per_split {
        println!("  {split:<6} {n:>6}  per class {:?}", census.per_class.get(split).cloned().unwrap_or_default());
    }
    let perturbed: usize = census
        .per_perturbation
        .iter()
        .filter(|(k, _)| k.as_str() != "clean")
        .map(|(_, v)| v)
        .sum();
    for (tag, n) in &census.per_perturbation {
        println!("  {tag:<10} {n:>6}");
    }
    println!("perturbed pool items: {perturbed}");
    Ok(())
}

fn run_dir_files(dir: &Path) -> Vec<PathBuf> {
    vec![dir.join("run_manifest.json"), dir.join("steps.csv")]
}

/// Runs one config into `dir`; partial results are written on abort.
fn execute(cfg: &RunConfig, dir: &Path) -> Result<RunRecord, Failure> {
    let mut pool = cfg.pool().map_err(|e| Failure::input(format!("loading pool: {e}")))?;
    let lc = cfg.loop_config();
    let echo = cfg.echo();
    let outcome = alloop::run_with(&mut pool, &lc, |rec| {
        // best effort: keep completed steps on disk as the run goes
        let _ = rec.write(dir, echo.clone(), None);
    });
    match outcome {
        Ok(record) => {
            record
                .write(dir, echo, None)
                .map_err(|e| io_failure(RUN_ABORT, "writing run record", e))?;
            Ok(record)
        }
        Err(RunAbort { partial, error }) => {
            let _ = partial.write(dir, echo, Some(&error));
            Err(Failure::new(
                RUN_ABORT,
                format!("{} seed {}: run aborted after {} steps: {error}", cfg.method, cfg.seed, partial.steps.len()),
            ))
        }
    }
}

pub fn run(config_path: &Path) -> CmdResult {
    let cfg = load_config(config_path)?;
    let dir = cfg.resolved_out_dir();
    refuse_existing(&run_dir_files(&dir))?;
    let record = execute(&cfg, &dir)?;
    let last = record.steps.last().expect("completed run has steps");
    println!(
        "{} seed {}: {} steps, final accuracy {:.4}, kappa {:.4}, acquired perturbed {}",
        record.method,
        record.seed,
        record.steps.len(),
        last.accuracy,
        last.kappa,
        last.acquired_perturbed()
    );
    println!("results in {}", dir.display());
    Ok(())
}

pub fn parse_seeds(text: &str) -> Result<Vec<u64>, Failure> {
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || Failure::input(format!("bad seed list entry {part:?}"));
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    if seeds.is_empty() {
        return Err(Failure::input("no seeds given"));
    }
    Ok(seeds)
}

struct Job {
    config: RunConfig,
    dir: PathBuf,
}

pub fn compare(pattern: &str, seeds: &str, parallel: bool, out: Option<PathBuf>) -> CmdResult {
    let seeds = parse_seeds(seeds)?;
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| Failure::input(format!("bad glob {pattern:?}: {e}")))?
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::input(format!("reading glob matches: {e}")))?;
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::input(format!("no config files match {pattern:?}")));
    }
    let configs = paths
        .iter()
        .map(|p| load_config(p).map(|c| (p, c)))
        .collect::<Result<Vec<_>, _>>()?;
    let root = out.unwrap_or_else(|| configs[0].1.resolved_out_dir());

    let mut jobs = Vec::new();
    for (path, cfg) in &configs {
        let stem = path.file_stem().map_or("config".into(), |s| s.to_string_lossy().into_owned());
        for &seed in &seeds {
            let mut config = cfg.clone();
            config.seed = seed;
            jobs.push(Job {
                config,
                dir: root.join(&stem).join(format!("seed{seed}")),
            });
        }
    }
    let mut guarded = vec![root.join("comparison.csv")];
    guarded.extend(jobs.iter().map(|j| j.dir.clone()));
    refuse_existing(&guarded)?;

    let records = if parallel {
        run_concurrently(&jobs)?
    } else {
        jobs.iter()
            .map(|j| {
                let r = execute(&j.config, &j.dir)?;
                eprintln!("done {} seed {}", j.config.method, j.config.seed);
                Ok(r)
            })
            .collect::<Result<Vec<_>, Failure>>()?
    };

    let rows = alloop::compare(&records).map_err(|e| Failure::new(AGGREGATION_MISMATCH, e.to_string()))?;
    fs::create_dir_all(&root).map_err(|e| io_failure(INPUT_ERROR, "creating output directory", e))?;
    let target = root.join("comparison.csv");
    fs::write(&target, comparison_csv(&rows)).map_err(|e| io_failure(INPUT_ERROR, "writing comparison", e))?;
    println!("{} runs aggregated into {}", records.len(), target.display());
    Ok(())
}

fn run_concurrently(jobs: &[Job]) -> Result<Vec<RunRecord>, Failure> {
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len()).max(1);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunRecord, Failure>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                let r = execute(&job.config, &job.dir);
                results.lock().expect("no poisoned workers")[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}
