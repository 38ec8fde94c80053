//! Pulling programs out of free-form model responses.

use super::ast::{Expr, FuncDef, Stmt, Target};
use super::{parse, LmpError, LmpProgram};

/// Contents of each fenced code block with the 1-based line its body starts on.
pub fn fenced_blocks(text: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut current: Option<(usize, String)> = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim_start().starts_with("```") {
            match current.take() {
                Some(block) => out.push(block),
                None => current = Some((i + 2, String::new())),
            }
        } else if let Some((_, body)) = current.as_mut() {
            body.push_str(line);
            body.push('\n');
        }
    }
    if let Some(block) = current {
        out.push(block);
    }
    out
}

fn offset(e: LmpError, start: usize) -> LmpError {
    match e {
        LmpError::Parse { line, col, msg } => LmpError::Parse { line: line + start - 1, col, msg },
        LmpError::Unsupported { construct, line, col } => LmpError::Unsupported {
            construct,
            line: line + start - 1,
            col,
        },
        other => other,
    }
}

fn parse_blocks(text: &str) -> Result<Vec<Stmt>, LmpError> {
    let mut stmts = Vec::new();
    for (start, body) in fenced_blocks(text) {
        stmts.extend(parse(&body).map_err(|e| offset(e, start))?.body);
    }
    Ok(stmts)
}

/// Finds `gen_plan` and `gen_domain` in the fenced code of a response.
pub fn extract_program(text: &str) -> Result<LmpProgram, LmpError> {
    let stmts = parse_blocks(text)?;
    let mut plan: Option<FuncDef> = None;
    let mut domain: Option<FuncDef> = None;
    for s in stmts {
        if let Stmt::Def(f) = s {
            let slot = match f.name.as_str() {
                "gen_plan" => &mut plan,
                "gen_domain" => &mut domain,
                _ => continue,
            };
            if slot.is_some() {
                return Err(LmpError::DuplicateDefinition(f.name));
            }
            *slot = Some(f);
        }
    }
    let plan = plan.ok_or_else(|| LmpError::MissingFunction("gen_plan".into()))?;
    if plan.params.is_empty() {
        return Err(LmpError::ArityMismatch("gen_plan must take the state as its first parameter".into()));
    }
    if domain.is_none() && plan.params.len() > 1 {
        return Err(LmpError::MissingFunction("gen_domain".into()));
    }
    Ok(LmpProgram {
        plan_fn: plan,
        domain_fn: domain,
        source: text.to_string(),
    })
}

/// Finds the top-level `gen_plan = [...]` assignment of a literal-plan response.
pub fn extract_literal_plan(text: &str) -> Result<Expr, LmpError> {
    let mut found: Option<Expr> = None;
    for s in parse_blocks(text)? {
        if let Stmt::Assign(Target::Name(n), e) = s {
            if n == "gen_plan" {
                if found.is_some() {
                    return Err(LmpError::DuplicateDefinition(n));
                }
                found = Some(e);
            }
        }
    }
    found.ok_or_else(|| LmpError::MissingFunction("gen_plan".into()))
}
