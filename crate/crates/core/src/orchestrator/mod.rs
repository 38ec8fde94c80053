//! The outer loop: ask the model for a program, solve it, and report failures back.
//! Also the single-shot and literal-plan baselines.

pub mod backend;
pub mod prompts;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::constraints::Violation;
use crate::lmp::{eval_literal_plan, eval_plan, extract_literal_plan, extract_program, LmpError, ParamVector};
use crate::scene::{GroundAction, WorldState};
use crate::sim::Simulator;
use crate::solver::{
    aggregate, gaussian_solve, rollout, solve, FeedbackEntry, FeedbackSummary, Outcome, SolveConfig, SolveError,
    SolveResult,
};
use crate::tasks::TaskSpec;

pub use backend::{BackendError, ChatMessage, LlmBackend, ReplayBackend, Role, WireBackend};
pub use prompts::{build_feedback_prompt, build_initial_prompt, initial_prompt, PromptBundle};

pub const FEEDBACK_CAP: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrchestratorError {
    #[error("no prompt templates for environment `{0}`")]
    MissingTemplate(String),
    #[error("feedback needs at least one earlier exchange")]
    EmptyHistory,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Which role text and example the prompt uses, and how responses are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Proc3s,
    Cap,
    Llm3,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Proc3s => "proc3s",
            Method::Cap => "cap",
            Method::Llm3 => "llm3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    Proc3s,
    Proc3sNf,
    Cap,
    CapGaussian,
    Llm3,
    Llm3Nf,
    Llm3Gaussian,
}

impl Approach {
    pub const ALL: [Approach; 7] = [
        Approach::Llm3,
        Approach::Llm3Nf,
        Approach::Llm3Gaussian,
        Approach::Cap,
        Approach::CapGaussian,
        Approach::Proc3sNf,
        Approach::Proc3s,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Approach::Proc3s => "proc3s",
            Approach::Proc3sNf => "proc3s_nf",
            Approach::Cap => "cap",
            Approach::CapGaussian => "cap_gaussian",
            Approach::Llm3 => "llm3",
            Approach::Llm3Nf => "llm3_nf",
            Approach::Llm3Gaussian => "llm3_gaussian",
        }
    }

    pub fn parse(s: &str) -> Option<Approach> {
        Approach::ALL.into_iter().find(|a| a.as_str() == s)
    }

    pub fn method(&self) -> Method {
        match self {
            Approach::Proc3s | Approach::Proc3sNf => Method::Proc3s,
            Approach::Cap | Approach::CapGaussian => Method::Cap,
            Approach::Llm3 | Approach::Llm3Nf | Approach::Llm3Gaussian => Method::Llm3,
        }
    }
}

impl std::fmt::Display for Approach {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpisodeStatus {
    Success,
    /// Sampling budget spent without a violation-free plan.
    CspTimeout,
    /// The response held no usable program.
    ParseFailure,
    /// Every feedback iteration was used.
    IterationCap,
    /// A fixed plan violated a constraint and no search was allowed.
    ConstraintViolation,
}

impl EpisodeStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            EpisodeStatus::Success => "success",
            EpisodeStatus::CspTimeout => "csp-timeout",
            EpisodeStatus::ParseFailure => "parse-failure",
            EpisodeStatus::IterationCap => "iteration-cap",
            EpisodeStatus::ConstraintViolation => "constraint-violation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParseOutcome {
    /// Canonical source of what was understood.
    Ok { source: String },
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub prompt: String,
    pub response: String,
    pub parse: ParseOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveResult>,
    /// Violations of a single fixed-plan rollout.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<FeedbackSummary>,
    pub llm_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub task: String,
    pub approach: Approach,
    pub seed: u64,
    pub status: EpisodeStatus,
    pub exchanges: Vec<Exchange>,
    pub plan: Option<Vec<GroundAction>>,
    pub samples_used: usize,
    pub llm_seconds: f64,
    pub csp_seconds: f64,
}

impl EpisodeLog {
    fn new(task: &TaskSpec, approach: Approach, seed: u64) -> Self {
        EpisodeLog {
            task: task.id.clone(),
            approach,
            seed,
            status: EpisodeStatus::ParseFailure,
            exchanges: Vec::new(),
            plan: None,
            samples_used: 0,
            llm_seconds: 0.0,
            csp_seconds: 0.0,
        }
    }

    /// Model queries after the first.
    pub fn feedback_queries(&self) -> usize {
        self.exchanges.len().saturating_sub(1)
    }

    pub fn messages(&self) -> Vec<ChatMessage> {
        let mut out = Vec::with_capacity(2 * self.exchanges.len());
        for e in &self.exchanges {
            out.push(ChatMessage::user(e.prompt.clone()));
            out.push(ChatMessage::assistant(e.response.clone()));
        }
        out
    }

    /// Clears every wall-clock measurement so replayed logs compare byte for byte.
    pub fn zero_timings(&mut self) {
        self.llm_seconds = 0.0;
        self.csp_seconds = 0.0;
        for e in &mut self.exchanges {
            e.llm_seconds = 0.0;
            if let Some(s) = &mut e.solve {
                s.seconds = 0.0;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrchestratorConfig {
    pub config: Config,
    pub seed: u64,
    /// Overrides the task's per-iteration sample budget.
    pub budget: Option<usize>,
    pub feedback_cap: usize,
    pub parallelism: usize,
}

impl OrchestratorConfig {
    pub fn new(config: Config, seed: u64) -> Self {
        OrchestratorConfig {
            config,
            seed,
            budget: None,
            feedback_cap: FEEDBACK_CAP,
            parallelism: 1,
        }
    }

    fn solve_config(&self, task: &TaskSpec, iteration: usize) -> SolveConfig {
        let mut c = SolveConfig::new(self.budget.unwrap_or_else(|| task.budget()), iteration_seed(self.seed, iteration));
        c.parallelism = self.parallelism;
        c
    }
}

/// Solver seed for one iteration of an episode.
pub fn iteration_seed(seed: u64, iteration: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(iteration as u64)
}

fn program_feedback(e: &dyn std::fmt::Display) -> FeedbackSummary {
    FeedbackSummary {
        entries: vec![FeedbackEntry {
            description: format!("Program error: {e}"),
            count: 1,
            action: "gen_plan".into(),
            step_index: 0,
        }],
    }
}

/// Sequential query / evaluate / feedback driver shared by all approaches.
struct Episode<'a> {
    backend: &'a dyn LlmBackend,
    log: EpisodeLog,
    messages: Vec<ChatMessage>,
}

/// What evaluating one response produced.
struct Step {
    parse: ParseOutcome,
    solve: Option<SolveResult>,
    violations: Vec<Violation>,
    /// Final plan when the iteration succeeded.
    plan: Option<Vec<GroundAction>>,
    failure: Option<(EpisodeStatus, FeedbackSummary)>,
}

impl Step {
    fn parse_error(e: &dyn std::fmt::Display) -> Step {
        Step {
            parse: ParseOutcome::Error { message: e.to_string() },
            solve: None,
            violations: vec![],
            plan: None,
            failure: Some((EpisodeStatus::ParseFailure, program_feedback(e))),
        }
    }

    fn from_solve(source: String, r: Result<SolveResult, SolveError>) -> Step {
        match r {
            Err(e) => Step {
                parse: ParseOutcome::Ok { source },
                solve: None,
                violations: vec![],
                plan: None,
                failure: Some((EpisodeStatus::ParseFailure, program_feedback(&e))),
            },
            Ok(r) => {
                let (plan, failure) = match &r.outcome {
                    Outcome::Solved { plan, .. } => (Some(plan.clone()), None),
                    Outcome::Exhausted { feedback, .. } => (None, Some((EpisodeStatus::CspTimeout, feedback.clone()))),
                };
                Step {
                    parse: ParseOutcome::Ok { source },
                    solve: Some(r),
                    violations: vec![],
                    plan,
                    failure,
                }
            }
        }
    }
}

impl<'a> Episode<'a> {
    fn run(
        task: &TaskSpec,
        approach: Approach,
        s0: &WorldState,
        backend: &'a dyn LlmBackend,
        cfg: &OrchestratorConfig,
        feedback_cap: usize,
        mut evaluate: impl FnMut(&str, usize) -> Step,
    ) -> Result<EpisodeLog, OrchestratorError> {
        let first = initial_prompt(task.env, approach.method(), &task.goal, s0);
        let mut ep = Episode {
            backend,
            log: EpisodeLog::new(task, approach, cfg.seed),
            messages: vec![ChatMessage::user(first.clone())],
        };
        let mut prompt = first;
        for iteration in 0..=feedback_cap {
            let t = Instant::now();
            let response = ep.backend.complete(&ep.messages)?;
            let llm_seconds = t.elapsed().as_secs_f64();
            ep.messages.push(ChatMessage::assistant(response.clone()));
            let step = evaluate(&response, iteration);
            if let Some(s) = &step.solve {
                ep.log.samples_used += s.samples_used();
                ep.log.csp_seconds += s.seconds;
            }
            ep.log.llm_seconds += llm_seconds;
            let feedback = step.failure.as_ref().map(|(_, f)| f.clone());
            ep.log.exchanges.push(Exchange {
                prompt: prompt.clone(),
                response,
                parse: step.parse,
                solve: step.solve,
                violations: step.violations,
                feedback: feedback.clone(),
                llm_seconds,
            });
            match step.failure {
                None => {
                    ep.log.status = EpisodeStatus::Success;
                    ep.log.plan = step.plan;
                    return Ok(ep.log);
                }
                Some((status, fs)) => {
                    ep.log.status = status;
                    if iteration == feedback_cap {
                        break;
                    }
                    prompt = build_feedback_prompt(&ep.log, &fs)?;
                    ep.messages.push(ChatMessage::user(prompt.clone()));
                }
            }
        }
        if feedback_cap > 0 {
            ep.log.status = EpisodeStatus::IterationCap;
        }
        Ok(ep.log)
    }
}

fn sim_for(task: &TaskSpec, cfg: &OrchestratorConfig) -> Simulator {
    Simulator::new(task.env, cfg.config.clone())
}

/// Program generation with sampling-based solving and failure feedback.
pub fn run_proc3s(
    task: &TaskSpec,
    s0: &WorldState,
    backend: &dyn LlmBackend,
    cfg: &OrchestratorConfig,
    feedback: bool,
) -> Result<EpisodeLog, OrchestratorError> {
    let sim = sim_for(task, cfg);
    let registry = sim.config.registry(task.env).to_vec();
    let approach = if feedback { Approach::Proc3s } else { Approach::Proc3sNf };
    let cap = if feedback { cfg.feedback_cap } else { 0 };
    Episode::run(task, approach, s0, backend, cfg, cap, |response, iteration| {
        let p = match extract_program(response) {
            Ok(p) => p,
            Err(e) => return Step::parse_error(&e),
        };
        let r = solve(&p, s0, &sim, &registry, &cfg.solve_config(task, iteration));
        Step::from_solve(p.to_source(), r)
    })
}

/// Rolls out a fixed plan, or searches Gaussian perturbations of it.
#[allow(clippy::too_many_arguments)]
fn fixed_plan_step(
    source: String,
    plan: Vec<GroundAction>,
    task: &TaskSpec,
    s0: &WorldState,
    sim: &Simulator,
    cfg: &OrchestratorConfig,
    gaussian: bool,
    iteration: usize,
) -> Step {
    let registry = sim.config.registry(task.env);
    if gaussian {
        return Step::from_solve(source, gaussian_solve(&plan, s0, sim, registry, &cfg.solve_config(task, iteration)));
    }
    let (_, violations) = rollout(sim, &plan, s0, registry);
    if violations.is_empty() {
        return Step {
            parse: ParseOutcome::Ok { source },
            solve: None,
            violations,
            plan: Some(plan),
            failure: None,
        };
    }
    let fs = aggregate(&violations).expect("violations are non-empty");
    Step {
        parse: ParseOutcome::Ok { source },
        solve: None,
        violations,
        plan: None,
        failure: Some((EpisodeStatus::ConstraintViolation, fs)),
    }
}

/// One query for a parameter-free program; its plan is used as is or perturbed.
pub fn run_cap(
    task: &TaskSpec,
    s0: &WorldState,
    backend: &dyn LlmBackend,
    gaussian: bool,
    cfg: &OrchestratorConfig,
) -> Result<EpisodeLog, OrchestratorError> {
    let sim = sim_for(task, cfg);
    let skills = task.env.skills();
    let approach = if gaussian { Approach::CapGaussian } else { Approach::Cap };
    let mut log = Episode::run(task, approach, s0, backend, cfg, 0, |response, iteration| {
        let p = match extract_program(response) {
            Ok(p) => p,
            Err(e) => return Step::parse_error(&e),
        };
        if !p.param_names().is_empty() {
            return Step::parse_error(&LmpError::ArityMismatch("gen_plan must take only the state".into()));
        }
        let plan = match eval_plan(&p, s0, &sim.config, &ParamVector::default(), &skills) {
            Ok(plan) => plan,
            Err(e) => return Step::parse_error(&e),
        };
        fixed_plan_step(p.to_source(), plan, task, s0, &sim, cfg, gaussian, iteration)
    })?;
    if !gaussian && log.status != EpisodeStatus::ParseFailure {
        log.samples_used = 1;
    }
    Ok(log)
}

/// Literal ground plans from the model, optionally with feedback and perturbation.
pub fn run_llm3(
    task: &TaskSpec,
    s0: &WorldState,
    backend: &dyn LlmBackend,
    feedback: bool,
    gaussian: bool,
    cfg: &OrchestratorConfig,
) -> Result<EpisodeLog, OrchestratorError> {
    let sim = sim_for(task, cfg);
    let skills = task.env.skills();
    let approach = match (feedback, gaussian) {
        (_, true) => Approach::Llm3Gaussian,
        (true, false) => Approach::Llm3,
        (false, false) => Approach::Llm3Nf,
    };
    let cap = if feedback { cfg.feedback_cap } else { 0 };
    let mut rollouts = 0;
    let mut log = Episode::run(task, approach, s0, backend, cfg, cap, |response, iteration| {
        let plan = extract_literal_plan(response).and_then(|e| {
            let plan = eval_literal_plan(&e, s0, &sim.config, &skills)?;
            Ok((crate::lmp::printer::expr(&e), plan))
        });
        match plan {
            Ok((source, plan)) => {
                if !gaussian {
                    rollouts += 1;
                }
                fixed_plan_step(source, plan, task, s0, &sim, cfg, gaussian, iteration)
            }
            Err(e) => Step::parse_error(&e),
        }
    })?;
    log.samples_used += rollouts;
    Ok(log)
}

pub fn run_approach(
    approach: Approach,
    task: &TaskSpec,
    s0: &WorldState,
    backend: &dyn LlmBackend,
    cfg: &OrchestratorConfig,
) -> Result<EpisodeLog, OrchestratorError> {
    match approach {
        Approach::Proc3s => run_proc3s(task, s0, backend, cfg, true),
        Approach::Proc3sNf => run_proc3s(task, s0, backend, cfg, false),
        Approach::Cap => run_cap(task, s0, backend, false, cfg),
        Approach::CapGaussian => run_cap(task, s0, backend, true, cfg),
        Approach::Llm3 => run_llm3(task, s0, backend, true, false, cfg),
        Approach::Llm3Nf => run_llm3(task, s0, backend, false, false, cfg),
        Approach::Llm3Gaussian => run_llm3(task, s0, backend, true, true, cfg),
    }
}
