use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use focal::alloop::{COMPARISON_HEADER, COMPARISON_METRICS};

use crate::commands::{CmdResult, Failure, INPUT_ERROR};

#[derive(Debug, Deserialize)]
struct Row {
    method: String,
    step: usize,
    metric: String,
    mean: f64,
    stderr: f64,
}

#[derive(Debug, Serialize)]
struct Cell {
    mean: f64,
    stderr: f64,
}

/// metric → step → method → cell
type Tables = BTreeMap<String, BTreeMap<usize, BTreeMap<String, Cell>>>;

fn read_rows(input: &Path) -> Result<Vec<Row>, Failure> {
    let mut reader = csv::Reader::from_path(input).map_err(|e| Failure::input(format!("{}: {e}", input.display())))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Failure::input(format!("{}: {e}", input.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.join(",") != COMPARISON_HEADER {
        return Err(Failure::input(format!(
            "{}: expected header {COMPARISON_HEADER:?}, found {:?}",
            input.display(),
            header.join(",")
        )));
    }
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Failure::input(format!("{} row {}: {e}", input.display(), i + 2))))
        .collect()
}

fn render(metric: &str, table: &BTreeMap<usize, BTreeMap<String, Cell>>) -> String {
    let methods: Vec<&String> = {
        let mut m: Vec<&String> = table.values().flat_map(|r| r.keys()).collect();
        m.sort();
        m.dedup();
        m
    };
    let width = 18;
    let mut out = format!("{metric}\n{:>6}", "step");
    for m in &methods {
        out.push_str(&format!("{m:>width$}"));
    }
    out.push('\n');
    for (step, row) in table {
        out.push_str(&format!("{step:>6}"));
        for m in &methods {
            let cell = row
                .get(*m)
                .map_or("-".to_string(), |c| format!("{:.4}±{:.4}", c.mean, c.stderr));
            out.push_str(&format!("{cell:>width$}"));
        }
        out.push('\n');
    }
    out
}

pub fn report(input: &Path, metric: Option<&str>, json: Option<PathBuf>) -> CmdResult {
    let wanted: Vec<&str> = match metric.map(str::trim).filter(|m| !m.is_empty()) {
        Some(m) if COMPARISON_METRICS.contains(&m) => vec![m],
        Some(m) => {
            return Err(Failure::input(format!(
                "unknown metric {m:?} (expected one of {})",
                COMPARISON_METRICS.join(", ")
            )))
        }
        None => COMPARISON_METRICS.to_vec(),
    };
    let rows = read_rows(input)?;
    let mut tables = Tables::new();
    for r in rows {
        if !COMPARISON_METRICS.contains(&r.metric.as_str()) {
            return Err(Failure::input(format!("unknown metric {:?} in {}", r.metric, input.display())));
        }
        if wanted.contains(&r.metric.as_str()) {
            tables.entry(r.metric).or_default().entry(r.step).or_default().insert(
                r.method,
                Cell {
                    mean: r.mean,
                    stderr: r.stderr,
                },
            );
        }
    }
    for m in &wanted {
        if let Some(t) = tables.get(*m) {
            println!("{}", render(m, t));
        }
    }
    let target = json.unwrap_or_else(|| input.with_file_name("report.json"));
    let text = serde_json::to_string_pretty(&tables).expect("tables serialize");
    fs::write(&target, text + "\n").map_err(|e| Failure::new(INPUT_ERROR, format!("{}: {e}", target.display())))?;
    eprintln!("tables written to {}", target.display());
    Ok(())
}
