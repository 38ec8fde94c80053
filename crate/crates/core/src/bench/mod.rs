//! Experiment harness: task × approach × seed grids, aggregate statistics,
//! significance tests, tables and top-down renderings.

pub mod stats;
pub mod svg;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::orchestrator::{
    run_approach, Approach, EpisodeLog, EpisodeStatus, LlmBackend, OrchestratorConfig, ReplayBackend, WireBackend,
    FEEDBACK_CAP,
};
use crate::scene::WorldState;
use crate::sim::Simulator;
use crate::solver::rollout;
use crate::tasks::{make_initial_state, CheckerRegistry, GoalVerdict, TaskSpec};

pub use stats::{aggregate_rows, emit_metric_table, emit_table, z_test, AggregateRow, Metric, Z_CRITICAL};
pub use svg::{emit_svg, svg_string};

pub const RECORDS_FILE: &str = "records.ndjson";
pub const TABLE_FILE: &str = "table.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task: String,
    pub approach: Approach,
    pub seed: u64,
    pub success: bool,
    pub samples_used: usize,
    pub feedback_queries: usize,
    pub seconds_total: f64,
    pub seconds_csp: f64,
    pub seconds_llm: f64,
    /// `None` on success; otherwise the episode status, `goal-not-met`, or an error label.
    pub failure_mode: Option<String>,
}

impl RunRecord {
    pub fn key(&self) -> (String, Approach, u64) {
        (self.task.clone(), self.approach, self.seed)
    }
}

/// Everything persisted for one grid cell besides its record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeFile {
    pub record: RunRecord,
    pub initial_state: Option<WorldState>,
    pub final_state: Option<WorldState>,
    pub goal: Option<GoalVerdict>,
    pub log: Option<EpisodeLog>,
}

#[derive(Debug, Clone)]
pub enum BackendSource {
    /// Fixtures at `<dir>/<task>/<method>.json`.
    Replay { dir: PathBuf },
    Wire { endpoint: String, model: String, key_var: String },
}

impl BackendSource {
    pub fn is_replay(&self) -> bool {
        matches!(self, BackendSource::Replay { .. })
    }

    pub fn open(&self, task: &str, approach: Approach) -> Result<Box<dyn LlmBackend>, String> {
        match self {
            BackendSource::Replay { dir } => {
                let path = dir.join(task).join(format!("{}.json", approach.method().as_str()));
                ReplayBackend::from_file(&path)
                    .map(|b| Box::new(b) as Box<dyn LlmBackend>)
                    .map_err(|e| e.to_string())
            }
            BackendSource::Wire { endpoint, model, key_var } => Ok(Box::new(WireBackend::new(
                endpoint.clone(),
                model.clone(),
                key_var.clone(),
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridOptions {
    pub config: Config,
    pub budget: Option<usize>,
    pub feedback_cap: usize,
    pub workers: usize,
    /// Keep wall-clock numbers for replayed runs (they are zeroed otherwise).
    pub timings: bool,
    /// Write per-cell episode JSON and SVG files.
    pub artifacts: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            config: Config::default(),
            budget: None,
            feedback_cap: FEEDBACK_CAP,
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            timings: false,
            artifacts: true,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("record file line {line}: {source}")]
    BadRecord { line: usize, source: serde_json::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub fn cell_name(task: &str, approach: Approach, seed: u64) -> String {
    format!("{task}__{}__{seed}", approach.as_str())
}

pub fn load_records(path: &Path) -> Result<Vec<RunRecord>, BenchError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| BenchError::BadRecord { line: i + 1, source })?);
    }
    Ok(out)
}

fn sort_records(records: &mut [RunRecord]) {
    records.sort_by_key(RunRecord::key);
}

pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<(), BenchError> {
    let mut f = File::create(path)?;
    for r in records {
        writeln!(f, "{}", serde_json::to_string(r)?)?;
    }
    Ok(())
}

/// Rolls `plan` out from `s0` and returns the state after the last step.
pub fn final_state(sim: &Simulator, plan: &[crate::scene::GroundAction], s0: &WorldState) -> WorldState {
    let registry = sim.config.registry(sim.env);
    let (traces, _) = rollout(sim, plan, s0, registry);
    traces.last().map(|t| t.final_state().clone()).unwrap_or_else(|| s0.clone())
}

/// Runs one grid cell.
pub fn run_cell(task: &TaskSpec, approach: Approach, seed: u64, source: &BackendSource, opts: &GridOptions) -> EpisodeFile {
    let mut record = RunRecord {
        task: task.id.clone(),
        approach,
        seed,
        success: false,
        samples_used: 0,
        feedback_queries: 0,
        seconds_total: 0.0,
        seconds_csp: 0.0,
        seconds_llm: 0.0,
        failure_mode: None,
    };
    let fail = |mut record: RunRecord, label: String, s0: Option<WorldState>| {
        record.failure_mode = Some(label);
        EpisodeFile {
            record,
            initial_state: s0,
            final_state: None,
            goal: None,
            log: None,
        }
    };
    let s0 = match make_initial_state(task, seed, &opts.config) {
        Ok(s) => s,
        Err(e) => return fail(record, format!("scene-error: {e}"), None),
    };
    let backend = match source.open(&task.id, approach) {
        Ok(b) => b,
        Err(e) => return fail(record, format!("backend-error: {e}"), Some(s0)),
    };
    let mut cfg = OrchestratorConfig::new(opts.config.clone(), seed);
    cfg.budget = opts.budget;
    cfg.feedback_cap = opts.feedback_cap;
    let start = std::time::Instant::now();
    let mut log = match run_approach(approach, task, &s0, backend.as_ref(), &cfg) {
        Ok(l) => l,
        Err(e) => return fail(record, format!("backend-error: {e}"), Some(s0)),
    };
    let zero = source.is_replay() && !opts.timings;
    if zero {
        log.zero_timings();
    } else {
        record.seconds_total = start.elapsed().as_secs_f64();
        record.seconds_csp = log.csp_seconds;
        record.seconds_llm = log.llm_seconds;
    }
    record.samples_used = log.samples_used;
    record.feedback_queries = log.feedback_queries();
    let mut final_s = None;
    let mut goal = None;
    if let (EpisodeStatus::Success, Some(plan)) = (log.status, &log.plan) {
        let sim = Simulator::new(task.env, opts.config.clone());
        let end = final_state(&sim, plan, &s0);
        let verdict = CheckerRegistry::builtin()
            .evaluate(task, &end, &opts.config)
            .unwrap_or_else(|e| GoalVerdict::fail(e.to_string()));
        record.success = verdict.success;
        if !verdict.success {
            record.failure_mode = Some("goal-not-met".into());
        }
        final_s = Some(end);
        goal = Some(verdict);
    } else {
        record.failure_mode = Some(log.status.as_str().to_string());
    }
    EpisodeFile {
        record,
        initial_state: Some(s0),
        final_state: final_s,
        goal,
        log: Some(log),
    }
}

fn write_artifacts(out: &Path, ep: &EpisodeFile, config: &Config) -> Result<(), BenchError> {
    let r = &ep.record;
    let name = cell_name(&r.task, r.approach, r.seed);
    let mut json = serde_json::to_string_pretty(ep)?;
    json.push('\n');
    fs::write(out.join("episodes").join(format!("{name}.json")), json)?;
    if let Some(s) = ep.final_state.as_ref().or(ep.initial_state.as_ref()) {
        emit_svg(s, config, &out.join("svg").join(format!("{name}.svg")))?;
    }
    Ok(())
}

/// Runs every missing cell of the grid. Records already in `out/records.ndjson`
/// are kept and skipped. Returns all records of the grid, sorted.
pub fn run_grid(
    tasks: &[TaskSpec],
    approaches: &[Approach],
    seeds: &[u64],
    source: &BackendSource,
    out: &Path,
    opts: &GridOptions,
) -> Result<Vec<RunRecord>, BenchError> {
    fs::create_dir_all(out)?;
    if opts.artifacts {
        fs::create_dir_all(out.join("episodes"))?;
        fs::create_dir_all(out.join("svg"))?;
    }
    let records_path = out.join(RECORDS_FILE);
    let existing = load_records(&records_path)?;
    let done: BTreeSet<(String, Approach, u64)> = existing.iter().map(RunRecord::key).collect();
    let mut cells = Vec::new();
    for t in tasks {
        for a in approaches {
            for s in seeds {
                if !done.contains(&(t.id.clone(), *a, *s)) {
                    cells.push((t, *a, *s));
                }
            }
        }
    }

    let mut records = existing;
    if !cells.is_empty() {
        let mut file = OpenOptions::new().create(true).append(true).open(&records_path)?;
        let next = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel::<EpisodeFile>();
        let workers = opts.workers.clamp(1, cells.len());
        let result: Result<(), BenchError> = std::thread::scope(|scope| {
            for _ in 0..workers {
                let tx = tx.clone();
                let (cells, next) = (&cells, &next);
                scope.spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some((t, a, s)) = cells.get(i) else { break };
                    if tx.send(run_cell(t, *a, *s, source, opts)).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            // single writer: records are appended as cells finish
            for ep in rx {
                if opts.artifacts {
                    write_artifacts(out, &ep, &opts.config)?;
                }
                writeln!(file, "{}", serde_json::to_string(&ep.record)?)?;
                file.flush()?;
                records.push(ep.record);
            }
            Ok(())
        });
        result?;
    }
    sort_records(&mut records);
    write_records(&records_path, &records)?;
    let wanted: BTreeSet<String> = tasks.iter().map(|t| t.id.clone()).collect();
    let approaches: BTreeSet<Approach> = approaches.iter().copied().collect();
    let seeds: BTreeSet<u64> = seeds.iter().copied().collect();
    let grid: Vec<RunRecord> = records
        .iter()
        .filter(|r| wanted.contains(&r.task) && approaches.contains(&r.approach) && seeds.contains(&r.seed))
        .cloned()
        .collect();
    fs::write(out.join(TABLE_FILE), full_report(&records))?;
    Ok(grid)
}

/// Success table followed by the sample, feedback and timing tables.
pub fn full_report(records: &[RunRecord]) -> String {
    let mut s = String::from("Success rate (%)\n");
    s.push_str(&emit_table(records));
    for m in [Metric::Samples, Metric::FeedbackQueries, Metric::SecondsTotal, Metric::SecondsCsp, Metric::SecondsLlm] {
        s.push('\n');
        s.push_str(m.title());
        s.push('\n');
        s.push_str(&emit_metric_table(records, m));
    }
    s
}

/// Column order: catalog order for known tasks, then the rest by name.
pub(crate) fn task_order(records: &[RunRecord]) -> Vec<String> {
    let catalog: Vec<String> = crate::tasks::catalog().into_iter().map(|t| t.id).collect();
    let present: BTreeSet<&str> = records.iter().map(|r| r.task.as_str()).collect();
    let mut out: Vec<String> = catalog.iter().filter(|t| present.contains(t.as_str())).cloned().collect();
    for t in present {
        if !catalog.iter().any(|c| c == t) {
            out.push(t.to_string());
        }
    }
    out
}

pub(crate) fn approach_order(records: &[RunRecord]) -> Vec<Approach> {
    let present: BTreeSet<Approach> = records.iter().map(|r| r.approach).collect();
    Approach::ALL.into_iter().filter(|a| present.contains(a)).collect()
}

pub(crate) fn by_cell(records: &[RunRecord]) -> BTreeMap<(String, Approach), Vec<&RunRecord>> {
    let mut m: BTreeMap<(String, Approach), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        m.entry((r.task.clone(), r.approach)).or_default().push(r);
    }
    m
}
