//! Source printer. Output re-parses to the same tree; compound expressions are
//! fully parenthesized.

use std::fmt::Write;

use super::ast::{Expr, FuncDef, Module, Stmt, Target, UnaryOp};

pub fn print_module(m: &Module) -> String {
    let mut out = String::new();
    for s in &m.body {
        print_stmt(&mut out, s, 0);
    }
    out
}

pub fn print_func(f: &FuncDef) -> String {
    let mut out = String::new();
    print_stmt(&mut out, &Stmt::Def(f.clone()), 0);
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn print_block(out: &mut String, body: &[Stmt], level: usize) {
    for s in body {
        print_stmt(out, s, level + 1);
    }
}

fn print_stmt(out: &mut String, s: &Stmt, level: usize) {
    indent(out, level);
    match s {
        Stmt::Assign(t, e) => {
            let _ = writeln!(out, "{} = {}", target(t), expr(e));
        }
        Stmt::AugAssign(t, op, e) => {
            let _ = writeln!(out, "{} {}= {}", target(t), op.symbol(), expr(e));
        }
        Stmt::Expr(e) => {
            let _ = writeln!(out, "{}", expr(e));
        }
        Stmt::Return(None) => out.push_str("return\n"),
        Stmt::Return(Some(e)) => {
            let _ = writeln!(out, "return {}", expr(e));
        }
        Stmt::Pass => out.push_str("pass\n"),
        Stmt::If(branches, orelse) => {
            for (i, (c, body)) in branches.iter().enumerate() {
                if i > 0 {
                    indent(out, level);
                }
                let kw = if i == 0 { "if" } else { "elif" };
                let _ = writeln!(out, "{kw} {}:", expr(c));
                print_block(out, body, level);
            }
            if !orelse.is_empty() {
                indent(out, level);
                out.push_str("else:\n");
                print_block(out, orelse, level);
            }
        }
        Stmt::For(t, it, body) => {
            let _ = writeln!(out, "for {} in {}:", target(t), expr(it));
            print_block(out, body, level);
        }
        Stmt::Def(f) => {
            let _ = writeln!(out, "def {}({}):", f.name, f.params.join(", "));
            print_block(out, &f.body, level);
        }
    }
}

fn target(t: &Target) -> String {
    match t {
        Target::Name(n) => n.clone(),
        Target::Unpack(items) => seq("(", items.iter().map(target).collect(), ")", true),
        Target::Index(a, b) => format!("{}[{}]", expr(a), expr(b)),
    }
}

fn seq(open: &str, items: Vec<String>, close: &str, tuple: bool) -> String {
    if tuple && items.len() == 1 {
        format!("{open}{},{close}", items[0])
    } else {
        format!("{open}{}{close}", items.join(", "))
    }
}

fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn expr(e: &Expr) -> String {
    match e {
        Expr::Int(i) => i.to_string(),
        Expr::Float(f) => format!("{f:?}"),
        Expr::Str(s) => quote(s),
        Expr::Bool(true) => "True".into(),
        Expr::Bool(false) => "False".into(),
        Expr::None => "None".into(),
        Expr::Name(n) => n.clone(),
        Expr::List(items) => seq("[", items.iter().map(expr).collect(), "]", false),
        Expr::Tuple(items) => seq("(", items.iter().map(expr).collect(), ")", true),
        Expr::Dict(items) => format!(
            "{{{}}}",
            items
                .iter()
                .map(|(k, v)| format!("{}: {}", expr(k), expr(v)))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        Expr::Unary(UnaryOp::Neg, a) => format!("(-{})", expr(a)),
        Expr::Unary(UnaryOp::Pos, a) => format!("(+{})", expr(a)),
        Expr::Unary(UnaryOp::Not, a) => format!("(not {})", expr(a)),
        Expr::Bin(op, a, b) => format!("({} {} {})", expr(a), op.symbol(), expr(b)),
        Expr::Cmp(first, rest) => {
            let mut s = format!("({}", expr(first));
            for (op, e) in rest {
                let _ = write!(s, " {} {}", op.symbol(), expr(e));
            }
            s.push(')');
            s
        }
        Expr::And(a, b) => format!("({} and {})", expr(a), expr(b)),
        Expr::Or(a, b) => format!("({} or {})", expr(a), expr(b)),
        Expr::IfExp(body, cond, orelse) => format!("({} if {} else {})", expr(body), expr(cond), expr(orelse)),
        Expr::Attr(a, n) => format!("{}.{n}", atom(a)),
        Expr::Index(a, i) => format!("{}[{}]", atom(a), expr(i)),
        Expr::Call(f, args, kwargs) => {
            let mut parts: Vec<String> = args.iter().map(expr).collect();
            parts.extend(kwargs.iter().map(|(k, v)| format!("{k}={}", expr(v))));
            format!("{}({})", atom(f), parts.join(", "))
        }
    }
}

/// Expression in trailer position; numeric literals need parentheses before `.`.
fn atom(e: &Expr) -> String {
    match e {
        Expr::Int(_) | Expr::Float(_) => format!("({})", expr(e)),
        _ => expr(e),
    }
}
