//! Sample-and-test search over plan-sketch parameters, failure aggregation, and
//! the Gaussian-perturbation search over a fixed ground plan.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{run_all, ConstraintId, Violation};
use crate::lmp::{eval_domain, eval_plan, sample_vector, LmpError, LmpProgram, ParamVector};
use crate::scene::{ActionParam, GroundAction, WorldState};
use crate::sim::{MotionTrace, Simulator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub budget: usize,
    pub seed: u64,
    pub parallelism: usize,
    /// Stop at the first program error instead of counting it as a failed sample.
    pub abort_on_program_error: bool,
}

impl SolveConfig {
    pub fn new(budget: usize, seed: u64) -> Self {
        SolveConfig {
            budget,
            seed,
            parallelism: 1,
            abort_on_program_error: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("domain: {0}")]
    Domain(LmpError),
    #[error("program: {0}")]
    Program(LmpError),
    #[error("no violations to aggregate")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEntry {
    pub description: String,
    pub count: usize,
    pub action: String,
    pub step_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackSummary {
    /// At most two entries, most frequent first.
    pub entries: Vec<FeedbackEntry>,
}

impl FeedbackSummary {
    /// One line per entry: `Step {i}, Action {name}, Violation:{description}.`
    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("Step {}, Action {}, Violation:{}.", e.step_index, e.action, e.description))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Counts per violation description, with per-description action and step tallies.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub groups: BTreeMap<String, HistogramGroup>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HistogramGroup {
    pub constraint: Option<ConstraintId>,
    pub count: usize,
    pub actions: BTreeMap<String, usize>,
    /// Written as `[[step, count], ...]`: integer map keys do not survive the
    /// buffering serde does inside tagged enums.
    #[serde(with = "pairs")]
    pub steps: BTreeMap<usize, usize>,
}

mod pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<usize, usize>, s: S) -> Result<S::Ok, S::Error> {
        m.iter().collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<usize, usize>, D::Error> {
        Ok(Vec::<(usize, usize)>::deserialize(d)?.into_iter().collect())
    }
}

impl Histogram {
    pub fn add(&mut self, v: &Violation) {
        let g = self.groups.entry(v.description.clone()).or_default();
        g.constraint = Some(v.constraint);
        g.count += 1;
        *g.actions.entry(v.action_name.clone()).or_default() += 1;
        *g.steps.entry(v.step_index).or_default() += 1;
    }

    pub fn merge(&mut self, other: &Histogram) {
        for (d, o) in &other.groups {
            let g = self.groups.entry(d.clone()).or_default();
            g.constraint = g.constraint.or(o.constraint);
            g.count += o.count;
            for (a, c) in &o.actions {
                *g.actions.entry(a.clone()).or_default() += c;
            }
            for (s, c) in &o.steps {
                *g.steps.entry(*s).or_default() += c;
            }
        }
    }

    pub fn total(&self) -> usize {
        self.groups.values().map(|g| g.count).sum()
    }

    /// Top two descriptions by count (ties lexicographic), each with its modal action and step.
    pub fn summary(&self) -> Option<FeedbackSummary> {
        if self.groups.is_empty() {
            return None;
        }
        let mut ranked: Vec<(&String, &HistogramGroup)> = self.groups.iter().collect();
        ranked.sort_by(|a, b| b.1.count.cmp(&a.1.count).then_with(|| a.0.cmp(b.0)));
        let entries = ranked
            .into_iter()
            .take(2)
            .map(|(d, g)| FeedbackEntry {
                description: d.clone(),
                count: g.count,
                action: modal(&g.actions).cloned().unwrap_or_default(),
                step_index: modal(&g.steps).copied().unwrap_or_default(),
            })
            .collect();
        Some(FeedbackSummary { entries })
    }
}

/// Most frequent key; the smallest key wins ties.
fn modal<K: Ord>(m: &BTreeMap<K, usize>) -> Option<&K> {
    let mut best: Option<(&K, usize)> = None;
    for (k, c) in m {
        if best.is_none_or(|(_, bc)| *c > bc) {
            best = Some((k, *c));
        }
    }
    best.map(|(k, _)| k)
}

pub fn aggregate(violations: &[Violation]) -> Result<FeedbackSummary, SolveError> {
    let mut h = Histogram::default();
    for v in violations {
        h.add(v);
    }
    h.summary().ok_or(SolveError::EmptyInput)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Solved {
        plan: Vec<GroundAction>,
        params: ParamVector,
        samples_used: usize,
    },
    Exhausted {
        feedback: FeedbackSummary,
        histogram: Histogram,
        samples_used: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub outcome: Outcome,
    pub seconds: f64,
}

impl SolveResult {
    pub fn is_solved(&self) -> bool {
        matches!(self.outcome, Outcome::Solved { .. })
    }

    pub fn samples_used(&self) -> usize {
        match self.outcome {
            Outcome::Solved { samples_used, .. } | Outcome::Exhausted { samples_used, .. } => samples_used,
        }
    }
}

pub fn program_error_violation(e: impl std::fmt::Display, step_index: usize, action: &str) -> Violation {
    Violation {
        constraint: ConstraintId::ProgramError,
        description: format!("Program error: {e}"),
        step_index,
        action_name: action.to_string(),
    }
}

/// Executes `plan` step by step and checks each trace. Arrange rollouts stop at the
/// first violating step; Drawing rollouts run to the end.
pub fn rollout(
    sim: &Simulator,
    plan: &[GroundAction],
    s0: &WorldState,
    registry: &[ConstraintId],
) -> (Vec<MotionTrace>, Vec<Violation>) {
    let mut traces = Vec::with_capacity(plan.len());
    let mut violations = Vec::new();
    let mut state = s0.clone();
    for (i, a) in plan.iter().enumerate() {
        let mut trace = match sim.execute(&state, a) {
            Ok(t) => t,
            Err(e) => {
                violations.push(program_error_violation(e, i, &a.name));
                break;
            }
        };
        trace.step_index = i;
        let v = run_all(&trace, registry, &sim.config);
        state = trace.final_state().clone();
        traces.push(trace);
        let failed = !v.is_empty();
        violations.extend(v);
        if failed && sim.env.aborts_on_violation() {
            break;
        }
    }
    (traces, violations)
}

enum Attempt {
    Clean(Vec<GroundAction>, ParamVector),
    Failed(Vec<Violation>),
}

struct Found {
    index: usize,
    plan: Vec<GroundAction>,
    params: ParamVector,
}

/// Runs up to `budget` attempts over `parallelism` workers. Worker `k` draws from
/// ChaCha stream `k` of `seed`. Attempts are claimed from a shared counter, so the
/// total never exceeds the budget.
fn search<F>(cfg: &SolveConfig, attempt: F) -> Result<SolveResult, SolveError>
where
    F: Fn(usize, &mut ChaCha8Rng) -> Result<Attempt, SolveError> + Sync,
{
    if cfg.budget == 0 {
        return Err(SolveError::ZeroBudget);
    }
    let start = Instant::now();
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let found: Mutex<Option<Found>> = Mutex::new(None);
    let error: Mutex<Option<SolveError>> = Mutex::new(None);
    let workers = cfg.parallelism.clamp(1, cfg.budget);

    let worker = |k: usize| -> Histogram {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(k as u64);
        let mut hist = Histogram::default();
        while !stop.load(Ordering::SeqCst) {
            let i = next.fetch_add(1, Ordering::SeqCst);
            if i >= cfg.budget {
                break;
            }
            match attempt(i, &mut rng) {
                Ok(Attempt::Clean(plan, params)) => {
                    let mut f = found.lock().expect("no poisoned lock");
                    if f.as_ref().is_none_or(|f| i < f.index) {
                        *f = Some(Found { index: i, plan, params });
                    }
                    stop.store(true, Ordering::SeqCst);
                }
                Ok(Attempt::Failed(vs)) => {
                    for v in &vs {
                        hist.add(v);
                    }
                }
                Err(e) => {
                    error.lock().expect("no poisoned lock").get_or_insert(e);
                    stop.store(true, Ordering::SeqCst);
                }
            }
        }
        hist
    };

    let mut hist = Histogram::default();
    if workers == 1 {
        hist = worker(0);
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers).map(|k| scope.spawn(move || worker(k))).collect();
            for h in handles {
                hist.merge(&h.join().expect("worker panicked"));
            }
        });
    }
    if let Some(e) = error.into_inner().expect("no poisoned lock") {
        return Err(e);
    }
    let seconds = start.elapsed().as_secs_f64();
    let outcome = match found.into_inner().expect("no poisoned lock") {
        Some(f) => Outcome::Solved {
            plan: f.plan,
            params: f.params,
            samples_used: f.index + 1,
        },
        None => Outcome::Exhausted {
            feedback: hist.summary().unwrap_or(FeedbackSummary { entries: vec![] }),
            histogram: hist,
            samples_used: cfg.budget,
        },
    };
    Ok(SolveResult { outcome, seconds })
}

/// Samples parameter vectors from the program's domain until a rollout is violation-free
/// or the budget runs out.
pub fn solve(
    p: &LmpProgram,
    s0: &WorldState,
    sim: &Simulator,
    registry: &[ConstraintId],
    cfg: &SolveConfig,
) -> Result<SolveResult, SolveError> {
    let domain = eval_domain(p, s0, &sim.config).map_err(SolveError::Domain)?;
    let skills = sim.env.skills();
    search(cfg, |_, rng| {
        let params = sample_vector(&domain, rng);
        let plan = match eval_plan(p, s0, &sim.config, &params, &skills) {
            Ok(plan) => plan,
            Err(e) if cfg.abort_on_program_error => return Err(SolveError::Program(e)),
            Err(e) => return Ok(Attempt::Failed(vec![program_error_violation(e, 0, "gen_plan")])),
        };
        let (_, violations) = rollout(sim, &plan, s0, registry);
        Ok(if violations.is_empty() {
            Attempt::Clean(plan, params)
        } else {
            Attempt::Failed(violations)
        })
    })
}

/// Noise scale of attempt `i`: rises linearly from 0 to 1 over the budget.
pub fn gaussian_sigma(i: usize, budget: usize) -> f64 {
    if budget <= 1 {
        0.0
    } else {
        i as f64 / (budget - 1) as f64
    }
}

/// Perturbs every scalar parameter of `plan` with zero-mean noise of scale `sigma`.
pub fn perturb(plan: &[GroundAction], sigma: f64, rng: &mut ChaCha8Rng) -> Vec<GroundAction> {
    if sigma == 0.0 {
        return plan.to_vec();
    }
    let noise = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    plan.iter()
        .map(|a| {
            GroundAction::new(
                a.name.clone(),
                a.params
                    .iter()
                    .map(|p| match p {
                        ActionParam::Scalar(v) => ActionParam::Scalar(v + noise.sample(rng)),
                        other => other.clone(),
                    })
                    .collect(),
            )
        })
        .collect()
}

/// Searches Gaussian perturbations of a fixed ground plan.
pub fn gaussian_solve(
    plan: &[GroundAction],
    s0: &WorldState,
    sim: &Simulator,
    registry: &[ConstraintId],
    cfg: &SolveConfig,
) -> Result<SolveResult, SolveError> {
    search(cfg, |i, rng| {
        let candidate = perturb(plan, gaussian_sigma(i, cfg.budget), rng);
        let (_, violations) = rollout(sim, &candidate, s0, registry);
        Ok(if violations.is_empty() {
            Attempt::Clean(candidate, ParamVector::default())
        } else {
            Attempt::Failed(violations)
        })
    })
}
