//! Indentation-aware tokenizer.

use super::LmpError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Name(String),
    Int(i64),
    Float(f64),
    Str(String),
    Op(&'static str),
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

const OPS: [&str; 33] = [
    "**=", "//=", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "**", "//", "->", "%=", "+", "-", "*", "/",
    "%", "<", ">", "=", "(", ")", "[", "]", "{", "}", ",", ":", ".", "@", ";",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, LmpError> {
    let mut lx = Lexer {
        chars: src.chars().collect(),
        pos: 0,
        line: 1,
        col: 1,
        out: Vec::new(),
        indents: vec![0],
        depth: 0,
    };
    lx.run()?;
    Ok(lx.out)
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    out: Vec<Token>,
    indents: Vec<usize>,
    depth: usize,
}

impl Lexer {
    fn peek(&self, k: usize) -> Option<char> {
        self.chars.get(self.pos + k).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, msg: impl Into<String>) -> LmpError {
        LmpError::Parse {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        }
    }

    fn push(&mut self, tok: Tok, line: usize, col: usize) {
        self.out.push(Token { tok, line, col });
    }

    fn run(&mut self) -> Result<(), LmpError> {
        let mut at_line_start = true;
        loop {
            if at_line_start && self.depth == 0 {
                if !self.indentation()? {
                    continue;
                }
                at_line_start = false;
            }
            let Some(c) = self.peek(0) else { break };
            let (line, col) = (self.line, self.col);
            match c {
                ' ' | '\t' | '\r' => {
                    self.bump();
                }
                '#' => {
                    while let Some(c) = self.peek(0) {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                '\\' if self.peek(1) == Some('\n') => {
                    self.bump();
                    self.bump();
                }
                '\n' => {
                    self.bump();
                    if self.depth == 0 {
                        self.push(Tok::Newline, line, col);
                        at_line_start = true;
                    }
                }
                '"' | '\'' => {
                    let s = self.string()?;
                    self.push(Tok::Str(s), line, col);
                }
                c if c.is_ascii_digit() || (c == '.' && self.peek(1).is_some_and(|d| d.is_ascii_digit())) => {
                    let t = self.number()?;
                    self.push(t, line, col);
                }
                c if c.is_alphabetic() || c == '_' => {
                    let mut s = String::new();
                    while let Some(c) = self.peek(0) {
                        if c.is_alphanumeric() || c == '_' {
                            s.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    // string prefixes
                    if matches!(self.peek(0), Some('"' | '\'')) {
                        let lower = s.to_ascii_lowercase();
                        if lower.contains('f') && lower.len() <= 2 {
                            return Err(LmpError::Unsupported {
                                construct: "f-string".into(),
                                line,
                                col,
                            });
                        }
                        if matches!(lower.as_str(), "r" | "u" | "b" | "rb" | "br") {
                            let s = self.string()?;
                            self.push(Tok::Str(s), line, col);
                            continue;
                        }
                    }
                    self.push(Tok::Name(s), line, col);
                }
                _ => {
                    let rest: String = self.chars[self.pos..self.chars.len().min(self.pos + 3)].iter().collect();
                    let Some(op) = OPS.iter().find(|op| rest.starts_with(**op)) else {
                        return Err(self.err(format!("unexpected character `{c}`")));
                    };
                    for _ in 0..op.len() {
                        self.bump();
                    }
                    match *op {
                        "(" | "[" | "{" => self.depth += 1,
                        ")" | "]" | "}" => self.depth = self.depth.saturating_sub(1),
                        _ => {}
                    }
                    self.push(Tok::Op(op), line, col);
                }
            }
        }
        let (line, col) = (self.line, self.col);
        if !matches!(self.out.last().map(|t| &t.tok), None | Some(Tok::Newline)) {
            self.push(Tok::Newline, line, col);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(Tok::Dedent, line, col);
        }
        self.push(Tok::Eof, line, col);
        Ok(())
    }

    /// Handles leading whitespace. Returns false for blank or comment-only lines.
    fn indentation(&mut self) -> Result<bool, LmpError> {
        let mut width = 0;
        while let Some(c) = self.peek(0) {
            match c {
                ' ' => width += 1,
                '\t' => width = (width / 8 + 1) * 8,
                '\r' => {}
                _ => break,
            }
            self.bump();
        }
        match self.peek(0) {
            None => return Ok(true),
            Some('\n') => {
                self.bump();
                return Ok(false);
            }
            Some('#') => {
                while let Some(c) = self.peek(0) {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
                self.bump();
                return Ok(false);
            }
            _ => {}
        }
        let (line, col) = (self.line, self.col);
        let top = *self.indents.last().expect("indent stack is never empty");
        if width > top {
            self.indents.push(width);
            self.push(Tok::Indent, line, col);
        } else {
            while width < *self.indents.last().expect("indent stack is never empty") {
                self.indents.pop();
                self.push(Tok::Dedent, line, col);
            }
            if width != *self.indents.last().expect("indent stack is never empty") {
                return Err(self.err("inconsistent dedent"));
            }
        }
        Ok(true)
    }

    fn string(&mut self) -> Result<String, LmpError> {
        let q = self.bump().expect("caller saw a quote");
        let triple = self.peek(0) == Some(q) && self.peek(1) == Some(q);
        if triple {
            self.bump();
            self.bump();
        }
        let mut s = String::new();
        loop {
            let Some(c) = self.bump() else {
                return Err(self.err("unterminated string"));
            };
            if c == q {
                if !triple {
                    break;
                }
                if self.peek(0) == Some(q) && self.peek(1) == Some(q) {
                    self.bump();
                    self.bump();
                    break;
                }
                s.push(c);
            } else if c == '\\' {
                let Some(e) = self.bump() else {
                    return Err(self.err("unterminated string"));
                };
                match e {
                    'n' => s.push('\n'),
                    't' => s.push('\t'),
                    '\\' => s.push('\\'),
                    '\'' => s.push('\''),
                    '"' => s.push('"'),
                    '\n' => {}
                    other => {
                        s.push('\\');
                        s.push(other);
                    }
                }
            } else if c == '\n' && !triple {
                return Err(self.err("unterminated string"));
            } else {
                s.push(c);
            }
        }
        Ok(s)
    }

    fn number(&mut self) -> Result<Tok, LmpError> {
        let mut s = String::new();
        let mut is_float = false;
        while let Some(c) = self.peek(0) {
            if c.is_ascii_digit() || c == '_' {
                if c != '_' {
                    s.push(c);
                }
            } else if c == '.' && !is_float {
                is_float = true;
                s.push(c);
            } else if (c == 'e' || c == 'E')
                && (self.peek(1).is_some_and(|d| d.is_ascii_digit())
                    || (matches!(self.peek(1), Some('+' | '-')) && self.peek(2).is_some_and(|d| d.is_ascii_digit())))
            {
                is_float = true;
                s.push(c);
                self.bump();
                s.push(self.peek(0).expect("checked above"));
            } else {
                break;
            }
            self.bump();
        }
        if is_float {
            s.parse::<f64>()
                .map(Tok::Float)
                .map_err(|_| self.err(format!("bad number `{s}`")))
        } else {
            s.parse::<i64>()
                .map(Tok::Int)
                .map_err(|_| self.err(format!("bad number `{s}`")))
        }
    }
}
