//! Prompt assembly from the bundled template texts.

use serde::{Deserialize, Serialize};

use super::{Method, OrchestratorError};
use crate::scene::{state_to_prompt_text, EnvKind, WorldState};
use crate::solver::FeedbackSummary;

const SYSTEM: &str = include_str!("../../templates/system.txt");
const SKILL_PREFACE: &str = include_str!("../../templates/skill_preface.txt");

fn setup(env: EnvKind) -> &'static str {
    match env {
        EnvKind::Drawing => include_str!("../../templates/setup_drawing.txt"),
        EnvKind::ArrangeBlocks => include_str!("../../templates/setup_arrange_blocks.txt"),
        EnvKind::ArrangeYcb => include_str!("../../templates/setup_arrange_ycb.txt"),
    }
}

fn role(method: Method) -> &'static str {
    match method {
        Method::Proc3s => include_str!("../../templates/role_proc3s.txt"),
        Method::Cap => include_str!("../../templates/role_cap.txt"),
        Method::Llm3 => include_str!("../../templates/role_llm3.txt"),
    }
}

fn example(env: EnvKind, method: Method) -> &'static str {
    use EnvKind::*;
    use Method::*;
    match (env, method) {
        (Drawing, Proc3s) => include_str!("../../templates/example_drawing_proc3s.txt"),
        (Drawing, Cap) => include_str!("../../templates/example_drawing_cap.txt"),
        (Drawing, Llm3) => include_str!("../../templates/example_drawing_llm3.txt"),
        (ArrangeBlocks, Proc3s) => include_str!("../../templates/example_arrange_blocks_proc3s.txt"),
        (ArrangeBlocks, Cap) => include_str!("../../templates/example_arrange_blocks_cap.txt"),
        (ArrangeBlocks, Llm3) => include_str!("../../templates/example_arrange_blocks_llm3.txt"),
        (ArrangeYcb, Proc3s) => include_str!("../../templates/example_arrange_ycb_proc3s.txt"),
        (ArrangeYcb, Cap) => include_str!("../../templates/example_arrange_ycb_cap.txt"),
        (ArrangeYcb, Llm3) => include_str!("../../templates/example_arrange_ycb_llm3.txt"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_prompt: String,
    pub domain_setup_code: String,
    pub skill_preface: String,
    pub domain_skills: String,
    pub method_role: String,
    pub domain_example: String,
}

impl PromptBundle {
    pub fn for_env(env: EnvKind, method: Method) -> Self {
        let skills = env
            .skills()
            .iter()
            .map(|s| s.prompt_text())
            .collect::<Vec<_>>()
            .join("\n\n");
        PromptBundle {
            system_prompt: SYSTEM.trim_end().to_string(),
            domain_setup_code: setup(env).trim_end().to_string(),
            skill_preface: SKILL_PREFACE.trim_end().to_string(),
            domain_skills: skills,
            method_role: role(method).trim_end().to_string(),
            domain_example: example(env, method).trim_end().to_string(),
        }
    }

    /// The six sections in fixed order, separated by blank lines.
    pub fn assemble(&self) -> String {
        [
            &self.system_prompt,
            &self.domain_setup_code,
            &self.skill_preface,
            &self.domain_skills,
            &self.method_role,
            &self.domain_example,
        ]
        .map(String::as_str)
        .join("\n\n")
    }
}

/// Full first-turn prompt for `env` given by name.
pub fn build_initial_prompt(env: &str, method: Method, goal: &str, s0: &WorldState) -> Result<String, OrchestratorError> {
    let env = EnvKind::parse(env).ok_or_else(|| OrchestratorError::MissingTemplate(env.to_string()))?;
    Ok(initial_prompt(env, method, goal, s0))
}

pub fn initial_prompt(env: EnvKind, method: Method, goal: &str, s0: &WorldState) -> String {
    let mut out = PromptBundle::for_env(env, method).assemble();
    out.push_str("\n\nState: ");
    out.push_str(&state_to_prompt_text(s0));
    out.push_str("\nGoal: ");
    out.push_str(goal);
    out.push('\n');
    out
}

/// Feedback turn sent after a failed iteration. The earlier turns stay in the
/// conversation; this is only the new message.
pub fn build_feedback_prompt(prior: &super::EpisodeLog, fs: &FeedbackSummary) -> Result<String, OrchestratorError> {
    if prior.exchanges.is_empty() {
        return Err(OrchestratorError::EmptyHistory);
    }
    Ok(format!(
        "The previous answer failed. Most frequent constraint violations:\n{}\nExplain what went wrong and return a corrected answer.\n",
        fs.to_text()
    ))
}
