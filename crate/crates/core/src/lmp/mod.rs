//! The plan-sketch language: a small, total, sandboxed Python subset in which
//! `gen_plan` and `gen_domain` are written. See `docs/dsl.md` for the grammar.

pub mod ast;
pub mod eval;
pub mod extract;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod sampler;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::Pose;

pub use eval::{eval_domain, eval_literal_plan, eval_plan, EVAL_BUDGET, LOOP_CAP};
pub use extract::{extract_literal_plan, extract_program, fenced_blocks};
pub use parser::{parse, parse_expr};
pub use sampler::{sample, sample_vector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LmpError {
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("unsupported construct `{construct}` at line {line}, column {col}")]
    Unsupported { construct: String, line: usize, col: usize },
    #[error("missing function `{0}`")]
    MissingFunction(String),
    #[error("function `{0}` is defined more than once")]
    DuplicateDefinition(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("evaluation budget of {0} steps exceeded")]
    BudgetExceeded(usize),
    #[error("loop exceeds {0} iterations")]
    LoopCap(usize),
    #[error("arity mismatch: {0}")]
    ArityMismatch(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("plan must be a literal list of actions: {0}")]
    NonLiteral(String),
}

/// A value bound to one plan-sketch parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Scalar(f64),
    Pose(Pose),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(i) => Some(i as f64),
            ParamValue::Scalar(v) => Some(v),
            ParamValue::Pose(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplerSpec {
    Continuous { min: f64, max: f64 },
    Discrete { values: Vec<ParamValue> },
    Grasp,
}

/// Parameter name to sampler, in `gen_plan` parameter order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Domain(pub Vec<(String, SamplerSpec)>);

impl Domain {
    pub fn get(&self, name: &str) -> Option<&SamplerSpec> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Parameter name to value, in `gen_plan` parameter order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(pub Vec<(String, ParamValue)>);

impl ParamVector {
    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(n, _)| n.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmpProgram {
    pub plan_fn: ast::FuncDef,
    pub domain_fn: Option<ast::FuncDef>,
    pub source: String,
}

impl LmpProgram {
    /// `gen_plan` parameters after the state.
    pub fn param_names(&self) -> &[String] {
        &self.plan_fn.params[1..]
    }

    pub fn to_source(&self) -> String {
        let mut s = printer::print_func(&self.plan_fn);
        if let Some(d) = &self.domain_fn {
            s.push('\n');
            s.push_str(&printer::print_func(d));
        }
        s
    }
}
