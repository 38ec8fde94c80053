use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use sketchplan::bench::{self, BackendSource, EpisodeFile, GridOptions};
use sketchplan::orchestrator::Approach;
use sketchplan::tasks::{self, TaskSpec};
use sketchplan::Config;

#[derive(Parser)]
#[command(name = "sketchplan", version, about = "Plan-sketch benchmark harness")]
struct Cli {
    /// JSON file overriding constants and tolerances.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Replay,
    Wire,
}

#[derive(Subcommand)]
enum Command {
    /// Run a task × approach × seed grid and write records, episodes and SVGs.
    Run {
        /// Task ids, comma separated, or `all`.
        #[arg(long, default_value = "all")]
        task: String,
        /// Approach names, comma separated, or `all`.
        #[arg(long, default_value = "all")]
        approach: String,
        /// Seeds as a list and/or ranges, e.g. `0-9` or `0,3,5`.
        #[arg(long, default_value = "0-2")]
        seeds: String,
        /// Per-iteration sample budget override.
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, value_enum, default_value = "replay")]
        backend: BackendKind,
        /// Replay fixture root (`<root>/<task>/<method>.json`).
        #[arg(long)]
        fixtures: Option<PathBuf>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Concurrent grid cells.
        #[arg(long)]
        workers: Option<usize>,
        /// Keep wall-clock timings for replayed runs.
        #[arg(long)]
        timings: bool,
        /// Chat-completions endpoint for the wire backend.
        #[arg(long, default_value = "https://api.openai.com/v1/chat/completions")]
        endpoint: String,
        #[arg(long, default_value = "gpt-4")]
        model: String,
        /// Environment variable holding the API key.
        #[arg(long, default_value = "OPENAI_API_KEY")]
        key_var: String,
    },
    /// Print the result tables for a results directory.
    Table {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Render an episode file to SVG.
    Render {
        #[arg(long)]
        record: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Render the initial scene instead of the final one.
        #[arg(long)]
        initial: bool,
    },
    /// List the task catalog.
    Tasks,
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.parse()?, b.parse()?);
                if a > b {
                    bail!("empty seed range `{part}`");
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse()?),
        }
    }
    out.sort_unstable();
    out.dedup();
    if out.is_empty() {
        bail!("no seeds given");
    }
    Ok(out)
}

fn parse_tasks(s: &str) -> Result<Vec<TaskSpec>> {
    if s == "all" {
        return Ok(tasks::catalog());
    }
    s.split(',')
        .map(|id| tasks::find_task(id.trim()).map_err(Into::into))
        .collect()
}

fn parse_approaches(s: &str) -> Result<Vec<Approach>> {
    if s == "all" {
        return Ok(Approach::ALL.to_vec());
    }
    s.split(',')
        .map(|a| Approach::parse(a.trim()).with_context(|| format!("unknown approach `{a}`")))
        .collect()
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Run {
            task,
            approach,
            seeds,
            budget,
            backend,
            fixtures,
            out,
            workers,
            timings,
            endpoint,
            model,
            key_var,
        } => {
            let tasks = parse_tasks(&task)?;
            let approaches = parse_approaches(&approach)?;
            let seeds = parse_seeds(&seeds)?;
            let source = match backend {
                BackendKind::Replay => BackendSource::Replay {
                    dir: fixtures.unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/replay")),
                },
                BackendKind::Wire => BackendSource::Wire { endpoint, model, key_var },
            };
            let mut opts = GridOptions {
                config,
                budget,
                timings,
                ..GridOptions::default()
            };
            if let Some(w) = workers {
                opts.workers = w;
            }
            let records = bench::run_grid(&tasks, &approaches, &seeds, &source, &out, &opts)?;
            print!("{}", bench::emit_table(&records));
            eprintln!("{} records in {}", records.len(), out.display());
        }
        Command::Table { input } => {
            let records = bench::load_records(&input.join(bench::RECORDS_FILE))?;
            if records.is_empty() {
                bail!("no records in {}", input.display());
            }
            print!("{}", bench::full_report(&records));
        }
        Command::Render { record, out, initial } => {
            let text = std::fs::read_to_string(&record).with_context(|| record.display().to_string())?;
            let ep: EpisodeFile = serde_json::from_str(&text)?;
            let state = if initial {
                ep.initial_state
            } else {
                ep.final_state.or(ep.initial_state)
            };
            let state = state.context("episode file holds no scene")?;
            bench::emit_svg(&state, &config, &out)?;
        }
        Command::Tasks => {
            for t in tasks::catalog() {
                println!("{:<13} {:<15} {:>6}  {}", t.id, t.env.as_str(), t.budget(), t.goal);
            }
        }
    }
    Ok(())
}
