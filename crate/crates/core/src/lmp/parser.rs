//! Recursive-descent parser for the plan-sketch language.

use super::ast::{BinOp, CmpOp, Expr, FuncDef, Module, Stmt, Target, UnaryOp};
use super::lexer::{tokenize, Tok, Token};
use super::LmpError;

const UNSUPPORTED_STMT: [&str; 19] = [
    "while", "import", "from", "class", "try", "with", "global", "nonlocal", "yield", "async", "await", "del",
    "assert", "raise", "break", "continue", "except", "finally", "lambda",
];

const KEYWORDS: [&str; 34] = [
    "def", "return", "if", "elif", "else", "for", "in", "and", "or", "not", "pass", "True", "False", "None",
    "while", "import", "from", "lambda", "class", "try", "with", "global", "nonlocal", "yield", "async", "await",
    "del", "assert", "raise", "break", "continue", "is", "except", "finally",
];

/// Positional and keyword arguments of a call.
type CallArgs = (Vec<Expr>, Vec<(String, Expr)>);

pub fn parse(src: &str) -> Result<Module, LmpError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0, fn_depth: 0 };
    let mut body = Vec::new();
    p.skip_newlines();
    while !p.at(&Tok::Eof) {
        body.extend(p.statement()?);
        p.skip_newlines();
    }
    Ok(Module { body })
}

/// Parses a single expression (used by tests and tooling).
pub fn parse_expr(src: &str) -> Result<Expr, LmpError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0, fn_depth: 0 };
    let e = p.exprlist()?;
    p.skip_newlines();
    if !p.at(&Tok::Eof) {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    fn_depth: usize,
}

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn at(&self, t: &Tok) -> bool {
        &self.peek().tok == t
    }

    fn at_op(&self, op: &str) -> bool {
        matches!(&self.peek().tok, Tok::Op(o) if *o == op)
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Name(n) if n == kw)
    }

    fn advance(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> LmpError {
        let t = self.peek();
        LmpError::Parse {
            line: t.line,
            col: t.col,
            msg: msg.into(),
        }
    }

    fn unsupported(&self, construct: &str) -> LmpError {
        let t = self.peek();
        LmpError::Unsupported {
            construct: construct.into(),
            line: t.line,
            col: t.col,
        }
    }

    fn describe(&self) -> String {
        match &self.peek().tok {
            Tok::Name(n) => format!("`{n}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Float(f) => format!("`{f}`"),
            Tok::Str(_) => "string".into(),
            Tok::Op(o) => format!("`{o}`"),
            Tok::Newline => "end of line".into(),
            Tok::Indent => "indent".into(),
            Tok::Dedent => "dedent".into(),
            Tok::Eof => "end of input".into(),
        }
    }

    fn expect_op(&mut self, op: &str) -> Result<(), LmpError> {
        if self.at_op(op) {
            self.advance();
            Ok(())
        } else {
            Err(self.err(format!("expected `{op}`, found {}", self.describe())))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), LmpError> {
        if self.at_kw(kw) {
            self.advance();
            Ok(())
        } else {
            Err(self.err(format!("expected `{kw}`, found {}", self.describe())))
        }
    }

    fn name(&mut self) -> Result<String, LmpError> {
        match &self.peek().tok {
            Tok::Name(n) if !is_keyword(n) => {
                let n = n.clone();
                self.advance();
                Ok(n)
            }
            _ => Err(self.err(format!("expected a name, found {}", self.describe()))),
        }
    }

    fn skip_newlines(&mut self) {
        while self.at(&Tok::Newline) {
            self.advance();
        }
    }

    fn end_of_statement(&mut self) -> Result<(), LmpError> {
        if self.at(&Tok::Newline) {
            self.advance();
            Ok(())
        } else if self.at(&Tok::Eof) || self.at(&Tok::Dedent) {
            Ok(())
        } else {
            Err(self.err(format!("expected end of line, found {}", self.describe())))
        }
    }

    fn statement(&mut self) -> Result<Vec<Stmt>, LmpError> {
        if self.at_op("@") {
            return Err(self.unsupported("decorator"));
        }
        if let Tok::Name(n) = &self.peek().tok {
            if UNSUPPORTED_STMT.contains(&n.as_str()) {
                return Err(self.unsupported(&n.clone()));
            }
            match n.as_str() {
                "def" => return Ok(vec![self.funcdef()?]),
                "if" => return Ok(vec![self.if_stmt()?]),
                "for" => return Ok(vec![self.for_stmt()?]),
                _ => {}
            }
        }
        let mut out = vec![self.simple()?];
        while self.at_op(";") {
            self.advance();
            if self.at(&Tok::Newline) || self.at(&Tok::Eof) {
                break;
            }
            out.push(self.simple()?);
        }
        self.end_of_statement()?;
        Ok(out)
    }

    fn simple(&mut self) -> Result<Stmt, LmpError> {
        if let Tok::Name(n) = &self.peek().tok {
            if UNSUPPORTED_STMT.contains(&n.as_str()) {
                return Err(self.unsupported(&n.clone()));
            }
            match n.as_str() {
                "pass" => {
                    self.advance();
                    return Ok(Stmt::Pass);
                }
                "return" => {
                    self.advance();
                    if self.at(&Tok::Newline) || self.at(&Tok::Eof) || self.at_op(";") {
                        return Ok(Stmt::Return(None));
                    }
                    return Ok(Stmt::Return(Some(self.exprlist()?)));
                }
                _ => {}
            }
        }
        let lhs = self.exprlist()?;
        if self.at_op(":") {
            // annotated assignment; the annotation is ignored
            self.advance();
            self.expr()?;
            if !self.at_op("=") {
                return Ok(Stmt::Pass);
            }
        }
        if self.at_op("=") {
            self.advance();
            let target = self.to_target(lhs)?;
            let value = self.exprlist()?;
            if self.at_op("=") {
                return Err(self.unsupported("chained assignment"));
            }
            return Ok(Stmt::Assign(target, value));
        }
        let aug = match &self.peek().tok {
            Tok::Op("+=") => Some(BinOp::Add),
            Tok::Op("-=") => Some(BinOp::Sub),
            Tok::Op("*=") => Some(BinOp::Mul),
            Tok::Op("/=") => Some(BinOp::Div),
            Tok::Op("//=") => Some(BinOp::FloorDiv),
            Tok::Op("%=") => Some(BinOp::Mod),
            Tok::Op("**=") => Some(BinOp::Pow),
            _ => None,
        };
        if let Some(op) = aug {
            self.advance();
            let target = self.to_target(lhs)?;
            if matches!(target, Target::Unpack(_)) {
                return Err(self.err("augmented assignment to a tuple"));
            }
            let value = self.exprlist()?;
            return Ok(Stmt::AugAssign(target, op, value));
        }
        Ok(Stmt::Expr(lhs))
    }

    fn to_target(&self, e: Expr) -> Result<Target, LmpError> {
        match e {
            Expr::Name(n) => Ok(Target::Name(n)),
            Expr::Tuple(items) | Expr::List(items) => Ok(Target::Unpack(
                items
                    .into_iter()
                    .map(|i| self.to_target(i))
                    .collect::<Result<_, _>>()?,
            )),
            Expr::Index(a, b) => Ok(Target::Index(a, b)),
            Expr::Attr(..) => Err(self.unsupported("attribute assignment")),
            _ => Err(self.err("cannot assign to this expression")),
        }
    }

    fn block(&mut self) -> Result<Vec<Stmt>, LmpError> {
        self.expect_op(":")?;
        if !self.at(&Tok::Newline) {
            let mut out = vec![self.simple()?];
            while self.at_op(";") {
                self.advance();
                if self.at(&Tok::Newline) || self.at(&Tok::Eof) {
                    break;
                }
                out.push(self.simple()?);
            }
            self.end_of_statement()?;
            return Ok(out);
        }
        self.advance();
        self.skip_newlines();
        if !self.at(&Tok::Indent) {
            return Err(self.err("expected an indented block"));
        }
        self.advance();
        let mut body = Vec::new();
        loop {
            self.skip_newlines();
            if self.at(&Tok::Dedent) {
                self.advance();
                break;
            }
            if self.at(&Tok::Eof) {
                break;
            }
            body.extend(self.statement()?);
        }
        Ok(body)
    }

    fn funcdef(&mut self) -> Result<Stmt, LmpError> {
        if self.fn_depth > 0 {
            return Err(self.unsupported("nested function definition"));
        }
        self.expect_kw("def")?;
        let name = self.name()?;
        self.expect_op("(")?;
        let mut params = Vec::new();
        while !self.at_op(")") {
            if self.at_op("*") || self.at_op("**") {
                return Err(self.unsupported("variadic parameters"));
            }
            let p = self.name()?;
            if params.contains(&p) {
                return Err(self.err(format!("duplicate parameter `{p}`")));
            }
            if self.at_op(":") {
                self.advance();
                self.expr()?;
            }
            if self.at_op("=") {
                return Err(self.unsupported("default parameter values"));
            }
            params.push(p);
            if !self.at_op(",") {
                break;
            }
            self.advance();
        }
        self.expect_op(")")?;
        if self.at_op("->") {
            self.advance();
            self.expr()?;
        }
        self.fn_depth += 1;
        let body = self.block();
        self.fn_depth -= 1;
        Ok(Stmt::Def(FuncDef { name, params, body: body? }))
    }

    fn if_stmt(&mut self) -> Result<Stmt, LmpError> {
        self.advance();
        let mut branches = vec![(self.expr()?, self.block()?)];
        let mut orelse = Vec::new();
        loop {
            self.skip_newlines_before_continuation();
            if self.at_kw("elif") {
                self.advance();
                branches.push((self.expr()?, self.block()?));
            } else if self.at_kw("else") {
                self.advance();
                orelse = self.block()?;
                break;
            } else {
                break;
            }
        }
        Ok(Stmt::If(branches, orelse))
    }

    /// Blank lines between an `if` body and its `elif`/`else` are already dropped by the lexer.
    fn skip_newlines_before_continuation(&mut self) {
        let mut k = 0;
        while self.peek_at(k) == &Tok::Newline {
            k += 1;
        }
        if matches!(self.peek_at(k), Tok::Name(n) if n == "elif" || n == "else") {
            self.pos += k;
        }
    }

    fn for_stmt(&mut self) -> Result<Stmt, LmpError> {
        self.advance();
        let mut items = vec![self.primary()?];
        let mut tuple = false;
        while self.at_op(",") {
            tuple = true;
            self.advance();
            if self.at_kw("in") {
                break;
            }
            items.push(self.primary()?);
        }
        let t = if tuple {
            Expr::Tuple(items)
        } else {
            items.pop().expect("one item")
        };
        let target = self.to_target(t)?;
        self.expect_kw("in")?;
        let iter = self.exprlist()?;
        let body = self.block()?;
        if self.at_kw("else") {
            return Err(self.unsupported("for-else"));
        }
        Ok(Stmt::For(target, iter, body))
    }

    fn exprlist(&mut self) -> Result<Expr, LmpError> {
        let first = self.expr()?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.at_op(",") {
            self.advance();
            if self.ends_exprlist() {
                break;
            }
            items.push(self.expr()?);
        }
        Ok(Expr::Tuple(items))
    }

    fn ends_exprlist(&self) -> bool {
        matches!(self.peek().tok, Tok::Newline | Tok::Eof | Tok::Dedent)
            || self.at_op("=")
            || self.at_op(")")
            || self.at_op("]")
            || self.at_op(":")
            || self.at_op(";")
            || matches!(&self.peek().tok, Tok::Op(o) if o.ends_with('=') && *o != "==" && *o != "!=" && *o != "<=" && *o != ">=")
    }

    fn expr(&mut self) -> Result<Expr, LmpError> {
        if self.at_kw("lambda") {
            return Err(self.unsupported("lambda"));
        }
        let body = self.or_test()?;
        if self.at_kw("if") {
            self.advance();
            let cond = self.or_test()?;
            self.expect_kw("else")?;
            let orelse = self.expr()?;
            return Ok(Expr::IfExp(Box::new(body), Box::new(cond), Box::new(orelse)));
        }
        Ok(body)
    }

    fn or_test(&mut self) -> Result<Expr, LmpError> {
        let mut e = self.and_test()?;
        while self.at_kw("or") {
            self.advance();
            e = Expr::Or(Box::new(e), Box::new(self.and_test()?));
        }
        Ok(e)
    }

    fn and_test(&mut self) -> Result<Expr, LmpError> {
        let mut e = self.not_test()?;
        while self.at_kw("and") {
            self.advance();
            e = Expr::And(Box::new(e), Box::new(self.not_test()?));
        }
        Ok(e)
    }

    fn not_test(&mut self) -> Result<Expr, LmpError> {
        if self.at_kw("not") {
            self.advance();
            return Ok(Expr::Unary(UnaryOp::Not, Box::new(self.not_test()?)));
        }
        self.comparison()
    }

    fn cmp_op(&mut self) -> Option<CmpOp> {
        let op = match &self.peek().tok {
            Tok::Op("==") => CmpOp::Eq,
            Tok::Op("!=") => CmpOp::Ne,
            Tok::Op("<") => CmpOp::Lt,
            Tok::Op("<=") => CmpOp::Le,
            Tok::Op(">") => CmpOp::Gt,
            Tok::Op(">=") => CmpOp::Ge,
            Tok::Name(n) if n == "in" => CmpOp::In,
            Tok::Name(n) if n == "not" && matches!(self.peek_at(1), Tok::Name(m) if m == "in") => {
                self.advance();
                CmpOp::NotIn
            }
            Tok::Name(n) if n == "is" => {
                if matches!(self.peek_at(1), Tok::Name(m) if m == "not") {
                    self.advance();
                    self.advance();
                    return Some(CmpOp::Ne);
                }
                CmpOp::Eq
            }
            _ => return None,
        };
        self.advance();
        Some(op)
    }

    fn comparison(&mut self) -> Result<Expr, LmpError> {
        let first = self.arith()?;
        let mut rest = Vec::new();
        while let Some(op) = self.cmp_op() {
            rest.push((op, self.arith()?));
        }
        if rest.is_empty() {
            Ok(first)
        } else {
            Ok(Expr::Cmp(Box::new(first), rest))
        }
    }

    fn arith(&mut self) -> Result<Expr, LmpError> {
        let mut e = self.term()?;
        loop {
            let op = match &self.peek().tok {
                Tok::Op("+") => BinOp::Add,
                Tok::Op("-") => BinOp::Sub,
                _ => return Ok(e),
            };
            self.advance();
            e = Expr::Bin(op, Box::new(e), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, LmpError> {
        let mut e = self.factor()?;
        loop {
            let op = match &self.peek().tok {
                Tok::Op("*") => BinOp::Mul,
                Tok::Op("/") => BinOp::Div,
                Tok::Op("//") => BinOp::FloorDiv,
                Tok::Op("%") => BinOp::Mod,
                Tok::Op("@") => return Err(self.unsupported("matrix multiplication")),
                _ => return Ok(e),
            };
            self.advance();
            e = Expr::Bin(op, Box::new(e), Box::new(self.factor()?));
        }
    }

    fn factor(&mut self) -> Result<Expr, LmpError> {
        let op = match &self.peek().tok {
            Tok::Op("-") => UnaryOp::Neg,
            Tok::Op("+") => UnaryOp::Pos,
            _ => return self.power(),
        };
        self.advance();
        Ok(Expr::Unary(op, Box::new(self.factor()?)))
    }

    fn power(&mut self) -> Result<Expr, LmpError> {
        let base = self.primary()?;
        if self.at_op("**") {
            self.advance();
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(self.factor()?)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, LmpError> {
        let mut e = self.atom()?;
        loop {
            if self.at_op(".") {
                self.advance();
                let n = self.name()?;
                e = Expr::Attr(Box::new(e), n);
            } else if self.at_op("[") {
                self.advance();
                if self.at_op(":") {
                    return Err(self.unsupported("slicing"));
                }
                let idx = self.exprlist()?;
                if self.at_op(":") {
                    return Err(self.unsupported("slicing"));
                }
                self.expect_op("]")?;
                e = Expr::Index(Box::new(e), Box::new(idx));
            } else if self.at_op("(") {
                self.advance();
                let (args, kwargs) = self.call_args()?;
                e = Expr::Call(Box::new(e), args, kwargs);
            } else {
                return Ok(e);
            }
        }
    }

    fn call_args(&mut self) -> Result<CallArgs, LmpError> {
        let mut args = Vec::new();
        let mut kwargs: Vec<(String, Expr)> = Vec::new();
        while !self.at_op(")") {
            if self.at_op("*") || self.at_op("**") {
                return Err(self.unsupported("argument unpacking"));
            }
            let is_kw = matches!(&self.peek().tok, Tok::Name(n) if !is_keyword(n)) && matches!(self.peek_at(1), Tok::Op("="));
            if is_kw {
                let k = self.name()?;
                self.advance();
                if kwargs.iter().any(|(n, _)| *n == k) {
                    return Err(self.err(format!("repeated keyword argument `{k}`")));
                }
                kwargs.push((k, self.expr()?));
            } else {
                if !kwargs.is_empty() {
                    return Err(self.err("positional argument after keyword argument"));
                }
                args.push(self.expr()?);
                if self.at_kw("for") {
                    return Err(self.unsupported("comprehension"));
                }
            }
            if !self.at_op(",") {
                break;
            }
            self.advance();
        }
        self.expect_op(")")?;
        Ok((args, kwargs))
    }

    fn seq_items(&mut self, close: &str) -> Result<Vec<Expr>, LmpError> {
        let mut items = Vec::new();
        while !self.at_op(close) {
            items.push(self.expr()?);
            if self.at_kw("for") {
                return Err(self.unsupported("comprehension"));
            }
            if !self.at_op(",") {
                break;
            }
            self.advance();
        }
        self.expect_op(close)?;
        Ok(items)
    }

    fn atom(&mut self) -> Result<Expr, LmpError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Int(i) => {
                self.advance();
                Ok(Expr::Int(i))
            }
            Tok::Float(f) => {
                self.advance();
                Ok(Expr::Float(f))
            }
            Tok::Str(s) => {
                self.advance();
                let mut s = s;
                while let Tok::Str(more) = &self.peek().tok {
                    s.push_str(more);
                    self.advance();
                }
                Ok(Expr::Str(s))
            }
            Tok::Name(n) => match n.as_str() {
                "True" => {
                    self.advance();
                    Ok(Expr::Bool(true))
                }
                "False" => {
                    self.advance();
                    Ok(Expr::Bool(false))
                }
                "None" => {
                    self.advance();
                    Ok(Expr::None)
                }
                "lambda" | "yield" | "await" => Err(self.unsupported(&n)),
                _ => Ok(Expr::Name(self.name()?)),
            },
            Tok::Op("(") => {
                self.advance();
                if self.at_op(")") {
                    self.advance();
                    return Ok(Expr::Tuple(vec![]));
                }
                let first = self.expr()?;
                if self.at_kw("for") {
                    return Err(self.unsupported("comprehension"));
                }
                if self.at_op(")") {
                    self.advance();
                    return Ok(first);
                }
                self.expect_op(",")?;
                let mut items = vec![first];
                items.extend(self.seq_items(")")?);
                Ok(Expr::Tuple(items))
            }
            Tok::Op("[") => {
                self.advance();
                Ok(Expr::List(self.seq_items("]")?))
            }
            Tok::Op("{") => {
                self.advance();
                let mut items = Vec::new();
                while !self.at_op("}") {
                    let k = self.expr()?;
                    if self.at_kw("for") {
                        return Err(self.unsupported("comprehension"));
                    }
                    if !self.at_op(":") {
                        return Err(self.unsupported("set literal"));
                    }
                    self.advance();
                    let v = self.expr()?;
                    if self.at_kw("for") {
                        return Err(self.unsupported("comprehension"));
                    }
                    items.push((k, v));
                    if !self.at_op(",") {
                        break;
                    }
                    self.advance();
                }
                self.expect_op("}")?;
                Ok(Expr::Dict(items))
            }
            _ => Err(self.err(format!("unexpected {}", self.describe()))),
        }
    }
}
