//! Multi-run commands: hyperparameter sweeps and the CHP model ablation.
//! Their summary tables are rebuilt from the per-run metric files.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use anyhow::{anyhow, Context, Result};
use ices::config::{IcesConfig, SweepParameter};
use ices::environment::IcesModel;
use ices::saferl::report::{report_points, tail_mean, window_mean, Field};
use ices::saferl::{read_metrics, EpisodeMetrics};
use ices::Error;
use serde_json::json;

use crate::commands::{run_files, train_into, FINAL_WINDOW};
use crate::rundir::{self, Provenance};

/// Episodes averaged around each reported point of a sweep summary.
pub const REPORT_WINDOW: usize = 10;

/// Some runs of a grid failed; carries the exit code to use.
#[derive(Debug)]
pub struct GridFailure {
    pub failed: usize,
    pub total: usize,
    pub training_fault: bool,
}

impl fmt::Display for GridFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} of {} runs failed (see failures.csv)",
            self.failed, self.total
        )
    }
}

impl std::error::Error for GridFailure {}

/// Runs `job(0..jobs)` on at most `workers` threads. Results keep job order.
pub fn run_pool<T, F>(jobs: usize, workers: usize, job: F) -> Vec<Result<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<T>>>> = Mutex::new((0..jobs).map(|_| None).collect());
    thread::scope(|s| {
        for _ in 0..workers.clamp(1, jobs.max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs {
                    break;
                }
                let r = catch_unwind(AssertUnwindSafe(|| job(i))).unwrap_or_else(|p| {
                    let msg = p
                        .downcast_ref::<String>()
                        .map(String::as_str)
                        .or_else(|| p.downcast_ref::<&str>().copied())
                        .unwrap_or("unknown panic");
                    Err(anyhow!("panicked: {msg}"))
                });
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

struct Cell {
    dir: PathBuf,
    cfg: IcesConfig,
    seed: u64,
    label: String,
    extra: serde_json::Value,
}

fn run_cells(
    root: &Path,
    model_for: impl Fn(&IcesConfig) -> Result<IcesModel>,
    cells: Vec<Cell>,
    workers: usize,
    prov: &Provenance,
) -> Result<()> {
    let mut models = Vec::with_capacity(cells.len());
    for c in &cells {
        models.push(model_for(&c.cfg)?);
    }
    let results = run_pool(cells.len(), workers, |i| {
        let c = &cells[i];
        fs::create_dir_all(&c.dir).with_context(|| format!("creating {}", c.dir.display()))?;
        let cell_prov = Provenance {
            command: prov.command,
            config_file: prov.config_file,
            extra: Some(c.extra.clone()),
        };
        rundir::write_metadata(&c.dir, &c.cfg, &[c.seed], &cell_prov)?;
        train_into(
            &models[i],
            &c.cfg,
            c.seed,
            &run_files(&c.dir, &c.cfg),
            &c.label,
        )
        .map(|_| ())
    });
    let mut failures = csv::Writer::from_path(root.join("failures.csv"))?;
    failures.write_record(["run", "error"])?;
    let mut failed = 0;
    let mut training_fault = false;
    for (c, r) in cells.iter().zip(&results) {
        if let Err(e) = r {
            failed += 1;
            training_fault |= e
                .downcast_ref::<Error>()
                .is_some_and(Error::is_training_fault);
            let run = c.dir.strip_prefix(root).unwrap_or(&c.dir);
            failures.write_record([run.display().to_string(), format!("{e:#}")])?;
            eprintln!("{}failed: {e:#}", c.label);
        }
    }
    failures.flush()?;
    if failed > 0 {
        return Err(GridFailure {
            failed,
            total: cells.len(),
            training_fault,
        }
        .into());
    }
    Ok(())
}

/// Prints the summary; a failed grid's error wins over a missing summary.
fn finish(summary: Result<String>, outcome: Result<()>) -> Result<()> {
    match (summary, outcome) {
        (Ok(table), outcome) => {
            print!("{table}");
            outcome
        }
        (Err(_), Err(e)) | (Err(e), Ok(())) => Err(e),
    }
}

fn check_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::config("at least one seed is needed").into());
    }
    if let Some(s) = seeds
        .iter()
        .enumerate()
        .find_map(|(i, s)| seeds[..i].contains(s).then_some(s))
    {
        return Err(Error::config(format!("seed {s} is repeated")).into());
    }
    Ok(())
}

/// Shortest text that parses back to `v`: integers without a fraction,
/// other values in the form that needs no padding zeros.
fn fmt_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v}")
    } else {
        format!("{v:?}")
    }
}

fn cell_name(p: SweepParameter, value: f64) -> String {
    format!("{}_{}", p.name(), fmt_value(value))
}

fn parse_cell_name(name: &str) -> Option<(SweepParameter, f64)> {
    SweepParameter::ALL.into_iter().find_map(|p| {
        let v = name
            .strip_prefix(p.name())?
            .strip_prefix('_')?
            .parse()
            .ok()?;
        Some((p, v))
    })
}

pub fn sweep(cfg: &IcesConfig, force: bool, prov: &Provenance) -> Result<()> {
    let param = cfg.sweep.parameter;
    let values = &cfg.sweep.values;
    let seeds = &cfg.run.seeds;
    if values.is_empty() {
        return Err(Error::config("sweep needs at least one value").into());
    }
    check_seeds(seeds)?;
    for (i, v) in values.iter().enumerate() {
        if values[..i].contains(v) {
            return Err(Error::config(format!("sweep value {v} is repeated")).into());
        }
        param
            .apply(&cfg.agent, *v)
            .validate()
            .with_context(|| format!("{param} = {v}"))?;
    }
    let model = cfg.model()?;
    let root = &cfg.run.out;
    rundir::prepare(root, force)?;
    rundir::write_metadata(root, cfg, seeds, prov)?;

    let mut cells = Vec::new();
    for &v in values {
        for &seed in seeds {
            let dir = root.join(cell_name(param, v)).join(format!("seed_{seed}"));
            let mut c = cfg.clone();
            c.agent = param.apply(&cfg.agent, v);
            c.run.seed = seed;
            c.run.out = dir.clone();
            cells.push(Cell {
                dir,
                cfg: c,
                seed,
                label: format!("[{param}={} seed {seed}] ", fmt_value(v)),
                extra: json!({ "parameter": param.name(), "value": v }),
            });
        }
    }
    let outcome = run_cells(root, |_| Ok(model.clone()), cells, cfg.run.workers, prov);
    finish(summarize_sweep(root), outcome)
}

pub fn ablate_chp(cfg: &IcesConfig, force: bool, prov: &Provenance) -> Result<()> {
    let seeds = &cfg.run.seeds;
    check_seeds(seeds)?;
    let root = &cfg.run.out;
    rundir::prepare(root, force)?;
    rundir::write_metadata(root, cfg, seeds, prov)?;
    let mut cells = Vec::new();
    for (name, simplified) in [("detailed", false), ("simplified", true)] {
        for &seed in seeds {
            let dir = root.join(name).join(format!("seed_{seed}"));
            let mut c = cfg.clone();
            c.env.simplified_chp = simplified;
            c.run.seed = seed;
            c.run.out = dir.clone();
            cells.push(Cell {
                dir,
                cfg: c,
                seed,
                label: format!("[{name} seed {seed}] "),
                extra: json!({ "chp_model": name }),
            });
        }
    }
    let outcome = run_cells(root, |c| Ok(c.model()?), cells, cfg.run.workers, prov);
    finish(summarize_ablation(root), outcome)
}

/// Rebuilds the summary of a sweep or ablation directory.
pub fn summarize(dir: &Path) -> Result<String> {
    if dir.join("detailed").is_dir() || dir.join("simplified").is_dir() {
        summarize_ablation(dir)
    } else {
        summarize_sweep(dir)
    }
}

/// Completed runs below `dir`: `seed_<n>` subdirectories holding a final
/// checkpoint, keyed by seed.
fn completed_runs(dir: &Path) -> Result<BTreeMap<u64, Vec<EpisodeMetrics>>> {
    let mut runs = BTreeMap::new();
    if !dir.is_dir() {
        return Ok(runs);
    }
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        let Some(seed) = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("seed_"))
            .and_then(|s| s.parse().ok())
        else {
            continue;
        };
        if path.join("checkpoint.json").is_file() {
            runs.insert(seed, read_metrics(&path.join("metrics.csv"))?);
        }
    }
    Ok(runs)
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs
        .into_iter()
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:.4}"))
}

/// Writes `summary.csv`: one reward row and one cost row per swept value,
/// averaged over seeds at the reported episodes, best final reward first.
pub fn summarize_sweep(dir: &Path) -> Result<String> {
    let mut groups = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        let Some((p, v)) = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(parse_cell_name)
        else {
            continue;
        };
        let runs = completed_runs(&path)?;
        if !runs.is_empty() {
            groups.push((p, v, runs));
        }
    }
    if groups.is_empty() {
        return Err(
            Error::config(format!("no completed sweep runs under {}", dir.display())).into(),
        );
    }
    let total = groups
        .iter()
        .flat_map(|(_, _, runs)| runs.values().flatten())
        .map(|m| m.episode)
        .max()
        .unwrap_or(0);
    let points = report_points(total);
    let final_window = FINAL_WINDOW.min(total.max(1));
    let over_seeds = |runs: &BTreeMap<u64, Vec<EpisodeMetrics>>,
                      f: &dyn Fn(&[EpisodeMetrics]) -> Option<f64>| {
        mean(runs.values().filter_map(|m| f(m)))
    };

    struct Row {
        param: SweepParameter,
        value: f64,
        seeds: usize,
        reward: Vec<Option<f64>>,
        cost: Vec<Option<f64>>,
    }
    let mut rows: Vec<Row> = groups
        .iter()
        .map(|(p, v, runs)| {
            let series = |field| {
                points
                    .iter()
                    .map(|&e| over_seeds(runs, &|m| window_mean(m, e, REPORT_WINDOW, field)))
                    .chain([over_seeds(runs, &|m| tail_mean(m, final_window, field))])
                    .collect()
            };
            Row {
                param: *p,
                value: *v,
                seeds: runs.len(),
                reward: series(Field::Reward),
                cost: series(Field::Cost),
            }
        })
        .collect();
    let final_reward = |r: &Row| {
        r.reward
            .last()
            .copied()
            .flatten()
            .unwrap_or(f64::NEG_INFINITY)
    };
    rows.sort_by(|a, b| {
        final_reward(b)
            .total_cmp(&final_reward(a))
            .then(a.value.total_cmp(&b.value))
    });

    let mut header = vec![
        "parameter".to_string(),
        "value".into(),
        "metric".into(),
        "seeds".into(),
    ];
    header.extend(points.iter().map(|e| format!("ep_{e}")));
    header.push(format!("final_{final_window}"));
    let mut out = csv::Writer::from_path(dir.join("summary.csv"))?;
    out.write_record(&header)?;
    let mut text = header.join("\t") + "\n";
    for r in &rows {
        for (metric, series) in [("reward", &r.reward), ("cost", &r.cost)] {
            let mut rec = vec![
                r.param.name().to_string(),
                fmt_value(r.value),
                metric.into(),
                r.seeds.to_string(),
            ];
            rec.extend(series.iter().copied().map(fmt_opt));
            out.write_record(&rec)?;
            text += &(rec.join("\t") + "\n");
        }
    }
    out.flush()?;
    Ok(text)
}

/// Writes `ablation.csv`: final-window means per model and seed, then the
/// mean over seeds for each model.
pub fn summarize_ablation(dir: &Path) -> Result<String> {
    const FIELDS: [(&str, Field); 8] = [
        ("reward", Field::Reward),
        ("cost", Field::Cost),
        ("cost_e", Field::CostE),
        ("cost_g", Field::CostG),
        ("cost_h", Field::CostH),
        ("chp_power", Field::ChpPower),
        ("chp_heat", Field::ChpHeat),
        ("chp_cost", Field::ChpCost),
    ];
    let mut header = vec!["model", "seed", "episodes"];
    header.extend(FIELDS.iter().map(|(n, _)| *n));
    let mut out = csv::Writer::from_path(dir.join("ablation.csv"))?;
    out.write_record(&header)?;
    let mut text = header.join("\t") + "\n";
    let mut any = false;
    for model in ["detailed", "simplified"] {
        let runs = completed_runs(&dir.join(model))?;
        let mut per_field: Vec<Vec<f64>> = vec![Vec::new(); FIELDS.len()];
        let mut rows = Vec::new();
        for (seed, metrics) in &runs {
            let window = FINAL_WINDOW.min(metrics.len());
            let mut rec = vec![
                model.to_string(),
                seed.to_string(),
                metrics.len().to_string(),
            ];
            for (i, (_, f)) in FIELDS.iter().enumerate() {
                let v = tail_mean(metrics, window, *f);
                if let Some(v) = v {
                    per_field[i].push(v);
                }
                rec.push(fmt_opt(v));
            }
            rows.push(rec);
        }
        if !runs.is_empty() {
            any = true;
            let mut rec = vec![model.to_string(), "mean".into(), String::new()];
            rec.extend(per_field.into_iter().map(|v| fmt_opt(mean(v))));
            rows.push(rec);
        }
        for rec in rows {
            out.write_record(&rec)?;
            text += &(rec.join("\t") + "\n");
        }
    }
    out.flush()?;
    if !any {
        return Err(Error::config(format!(
            "no completed ablation runs under {}",
            dir.display()
        ))
        .into());
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_names_round_trip() {
        for p in SweepParameter::ALL {
            for v in [1.0, 0.0004, 1000.0, 2.5e-7, 1e300, -3.0] {
                assert_eq!(parse_cell_name(&cell_name(p, v)), Some((p, v)));
            }
        }
        assert_eq!(cell_name(SweepParameter::Penalty, 10.0), "penalty_10");
        assert_eq!(cell_name(SweepParameter::ActorLr, 1e300), "actor_lr_1e300");
        assert_eq!(parse_cell_name("seed_1"), None);
        assert_eq!(parse_cell_name("penalty_x"), None);
    }

    #[test]
    fn pool_keeps_order_and_isolates_panics() {
        let out = run_pool(7, 3, |i| {
            if i == 4 {
                panic!("boom");
            }
            Ok(i * i)
        });
        assert_eq!(out.len(), 7);
        for (i, r) in out.iter().enumerate() {
            match r {
                Ok(v) => assert_eq!(*v, i * i),
                Err(e) => {
                    assert_eq!(i, 4);
                    assert!(e.to_string().contains("boom"));
                }
            }
        }
    }

    #[test]
    fn pool_with_no_jobs() {
        assert!(run_pool(0, 4, |_| Ok(())).is_empty());
    }
}
