//! Aggregates, the pooled two-proportion z-test, and text tables.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{approach_order, by_cell, task_order, RunRecord};
use crate::orchestrator::Approach;

/// One-tailed critical value at alpha = 0.1.
pub const Z_CRITICAL: f64 = 1.2816;

/// Pooled two-proportion z statistic for "a is better than b", and whether it
/// clears the one-tailed critical value. Degenerate pools give z = 0.
pub fn z_test(successes_a: usize, n_a: usize, successes_b: usize, n_b: usize) -> (f64, bool) {
    assert!(n_a >= 1 && n_b >= 1, "z_test needs at least one trial per arm");
    let (na, nb) = (n_a as f64, n_b as f64);
    let (pa, pb) = (successes_a as f64 / na, successes_b as f64 / nb);
    let pooled = (successes_a + successes_b) as f64 / (na + nb);
    let se = (pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb)).sqrt();
    if se == 0.0 {
        return (0.0, false);
    }
    let z = (pa - pb) / se;
    (z, z > Z_CRITICAL)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Samples,
    FeedbackQueries,
    SecondsTotal,
    SecondsCsp,
    SecondsLlm,
}

impl Metric {
    pub fn title(&self) -> &'static str {
        match self {
            Metric::Samples => "Samples used (mean ± std)",
            Metric::FeedbackQueries => "Feedback queries (mean ± std)",
            Metric::SecondsTotal => "Total seconds (mean ± std)",
            Metric::SecondsCsp => "Solver seconds (mean ± std)",
            Metric::SecondsLlm => "Model seconds (mean ± std)",
        }
    }

    fn of(&self, r: &RunRecord) -> f64 {
        match self {
            Metric::Samples => r.samples_used as f64,
            Metric::FeedbackQueries => r.feedback_queries as f64,
            Metric::SecondsTotal => r.seconds_total,
            Metric::SecondsCsp => r.seconds_csp,
            Metric::SecondsLlm => r.seconds_llm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub task: String,
    pub approach: Approach,
    pub runs: usize,
    pub successes: usize,
    pub success_pct: f64,
    pub samples_mean: f64,
    pub samples_std: f64,
    pub feedback_mean: f64,
    pub feedback_std: f64,
    pub seconds_mean: f64,
    pub seconds_std: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, v.sqrt())
}

pub fn aggregate_rows(records: &[RunRecord]) -> Vec<AggregateRow> {
    let cells = by_cell(records);
    let mut out = Vec::new();
    for task in task_order(records) {
        for a in approach_order(records) {
            let Some(rs) = cells.get(&(task.clone(), a)) else { continue };
            let successes = rs.iter().filter(|r| r.success).count();
            let col = |m: Metric| mean_std(&rs.iter().map(|r| m.of(r)).collect::<Vec<_>>());
            let (samples_mean, samples_std) = col(Metric::Samples);
            let (feedback_mean, feedback_std) = col(Metric::FeedbackQueries);
            let (seconds_mean, seconds_std) = col(Metric::SecondsTotal);
            out.push(AggregateRow {
                task: task.clone(),
                approach: a,
                runs: rs.len(),
                successes,
                success_pct: 100.0 * successes as f64 / rs.len() as f64,
                samples_mean,
                samples_std,
                feedback_mean,
                feedback_std,
                seconds_mean,
                seconds_std,
            });
        }
    }
    out
}

fn render(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate() {
            widths[i] = widths[i].max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::from("|");
        for (i, c) in cells.iter().enumerate() {
            let pad = widths[i] - c.chars().count();
            let _ = write!(s, " {c}{} |", " ".repeat(pad));
        }
        s.push('\n');
        s
    };
    let mut out = line(header);
    out.push('|');
    for w in &widths {
        out.push_str(&"-".repeat(w + 2));
        out.push('|');
    }
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
    }
    out
}

/// Incomplete when some cell is missing or cells differ in seed count.
fn grid_warning(records: &[RunRecord]) -> Option<String> {
    let cells = by_cell(records);
    let tasks = task_order(records);
    let approaches = approach_order(records);
    let sizes: Vec<usize> = tasks
        .iter()
        .flat_map(|t| approaches.iter().map(move |a| (t.clone(), *a)))
        .map(|k| cells.get(&k).map_or(0, Vec::len))
        .collect();
    let complete = sizes.iter().all(|s| *s > 0 && *s == sizes[0]);
    (!complete).then(|| "warning: incomplete grid\n".to_string())
}

/// Success percentages, tasks as columns and approaches as rows. Cells not
/// significantly worse than the column's best are wrapped in `**`.
pub fn emit_table(records: &[RunRecord]) -> String {
    let cells = by_cell(records);
    let tasks = task_order(records);
    let approaches = approach_order(records);
    let mut header = vec!["approach".to_string()];
    header.extend(tasks.iter().cloned());
    let counts = |t: &String, a: Approach| {
        cells
            .get(&(t.clone(), a))
            .map(|rs| (rs.iter().filter(|r| r.success).count(), rs.len()))
    };
    let best: Vec<Option<(usize, usize)>> = tasks
        .iter()
        .map(|t| {
            approaches
                .iter()
                .filter_map(|a| counts(t, *a))
                .max_by(|x, y| (x.0 * y.1).cmp(&(y.0 * x.1)))
        })
        .collect();
    let rows: Vec<Vec<String>> = approaches
        .iter()
        .map(|a| {
            let mut row = vec![a.as_str().to_string()];
            for (t, top) in tasks.iter().zip(&best) {
                row.push(match (counts(t, *a), top) {
                    (Some((s, n)), Some((ts, tn))) => {
                        let pct = format!("{:.0}", 100.0 * s as f64 / n as f64);
                        if z_test(*ts, *tn, s, n).1 {
                            pct
                        } else {
                            format!("**{pct}**")
                        }
                    }
                    _ => "-".to_string(),
                });
            }
            row
        })
        .collect();
    let mut out = render(&header, &rows);
    if let Some(w) = grid_warning(records) {
        out.push_str(&w);
    }
    out
}

pub fn emit_metric_table(records: &[RunRecord], metric: Metric) -> String {
    let cells = by_cell(records);
    let tasks = task_order(records);
    let mut header = vec!["approach".to_string()];
    header.extend(tasks.iter().cloned());
    let rows: Vec<Vec<String>> = approach_order(records)
        .iter()
        .map(|a| {
            let mut row = vec![a.as_str().to_string()];
            for t in &tasks {
                row.push(match cells.get(&(t.clone(), *a)) {
                    Some(rs) => {
                        let (m, s) = mean_std(&rs.iter().map(|r| metric.of(r)).collect::<Vec<_>>());
                        format!("{m:.2} ± {s:.2}")
                    }
                    None => "-".to_string(),
                });
            }
            row
        })
        .collect();
    render(&header, &rows)
}
