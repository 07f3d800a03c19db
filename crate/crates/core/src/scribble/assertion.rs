//! Lexer and parser for the expression language used inside `@{ ... }`.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Functions provided by the evaluator; never counted as free variables.
pub const BUILTINS: &[&str] = &["size"];

const KEYWORDS: &[&str] = &["and", "or", "not", "true", "false", "True", "False"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprToken {
    Int(i64),
    Str(String),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
    Comma,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("unexpected character {0:?} at offset {1}")]
    BadChar(char, usize),
    #[error("unterminated string literal")]
    UnterminatedString,
    #[error("integer literal out of range: {0}")]
    IntRange(String),
    #[error("unexpected token {found}, expected {expected}")]
    Unexpected { found: String, expected: String },
    #[error("unexpected end of expression, expected {0}")]
    Eof(String),
}

pub fn tokenize(src: &str) -> Result<Vec<ExprToken>, ExprError> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (off, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].1.is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().map(|(_, c)| *c).collect();
            let n = text
                .parse()
                .map_err(|_| ExprError::IntRange(text.clone()))?;
            out.push(ExprToken::Int(n));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            out.push(ExprToken::Ident(
                chars[start..i].iter().map(|(_, c)| *c).collect(),
            ));
        } else if c == '"' || c == '\'' {
            let quote = c;
            i += 1;
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None => return Err(ExprError::UnterminatedString),
                    Some((_, '\\')) => {
                        let escaped = chars.get(i + 1).ok_or(ExprError::UnterminatedString)?.1;
                        s.push(match escaped {
                            'n' => '\n',
                            't' => '\t',
                            other => other,
                        });
                        i += 2;
                    }
                    Some((_, ch)) if *ch == quote => {
                        i += 1;
                        break;
                    }
                    Some((_, ch)) => {
                        s.push(*ch);
                        i += 1;
                    }
                }
            }
            out.push(ExprToken::Str(s));
        } else {
            let next = chars.get(i + 1).map(|(_, c)| *c);
            let (tok, width) = match (c, next) {
                ('<', Some('=')) => (ExprToken::Op("<="), 2),
                ('>', Some('=')) => (ExprToken::Op(">="), 2),
                ('=', Some('=')) => (ExprToken::Op("=="), 2),
                ('!', Some('=')) => (ExprToken::Op("!="), 2),
                ('<', _) => (ExprToken::Op("<"), 1),
                ('>', _) => (ExprToken::Op(">"), 1),
                ('+', _) => (ExprToken::Op("+"), 1),
                ('-', _) => (ExprToken::Op("-"), 1),
                ('*', _) => (ExprToken::Op("*"), 1),
                ('/', _) => (ExprToken::Op("/"), 1),
                ('(', _) => (ExprToken::LParen, 1),
                (')', _) => (ExprToken::RParen, 1),
                (',', _) => (ExprToken::Comma, 1),
                _ => return Err(ExprError::BadChar(c, off)),
            };
            out.push(tok);
            i += width;
        }
    }
    Ok(out)
}

/// Identifiers referenced by an assertion, excluding builtins and keywords.
///
/// Falls back to a plain identifier scan when the text does not tokenize, so
/// assertions written for other logic engines still report their variables.
pub fn free_vars(src: &str) -> BTreeSet<String> {
    let idents: Vec<String> = match tokenize(src) {
        Ok(tokens) => tokens
            .into_iter()
            .filter_map(|t| match t {
                ExprToken::Ident(s) => Some(s),
                _ => None,
            })
            .collect(),
        Err(_) => src
            .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .filter(|w| {
                w.chars()
                    .next()
                    .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            })
            .map(str::to_string)
            .collect(),
    };
    idents
        .into_iter()
        .filter(|s| !BUILTINS.contains(&s.as_str()) && !KEYWORDS.contains(&s.as_str()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Or,
    And,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    Add,
    Sub,
    Mul,
    Div,
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BinOp::Or => "or",
            BinOp::And => "and",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Int(i64),
    Str(String),
    Bool(bool),
    Var(String),
    Call(String, Vec<Expr>),
    Not(Box<Expr>),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

pub fn parse_expr(src: &str) -> Result<Expr, ExprError> {
    let tokens = tokenize(src)?;
    let mut p = ExprParser { tokens, pos: 0 };
    let e = p.or()?;
    match p.tokens.get(p.pos) {
        None => Ok(e),
        Some(t) => Err(ExprError::Unexpected {
            found: format!("{t:?}"),
            expected: "end of expression".into(),
        }),
    }
}

struct ExprParser {
    tokens: Vec<ExprToken>,
    pos: usize,
}

impl ExprParser {
    fn peek(&self) -> Option<&ExprToken> {
        self.tokens.get(self.pos)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(ExprToken::Ident(s)) if s == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_op(&mut self, ops: &[&'static str]) -> Option<&'static str> {
        match self.peek() {
            Some(ExprToken::Op(op)) if ops.contains(op) => {
                let op = *op;
                self.pos += 1;
                Some(op)
            }
            _ => None,
        }
    }

    fn or(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.and()?;
        while self.eat_keyword("or") {
            let rhs = self.and()?;
            lhs = Expr::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.not()?;
        while self.eat_keyword("and") {
            let rhs = self.not()?;
            lhs = Expr::Binary(BinOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn not(&mut self) -> Result<Expr, ExprError> {
        if self.eat_keyword("not") {
            return Ok(Expr::Not(Box::new(self.not()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, ExprError> {
        let lhs = self.additive()?;
        let op = match self.eat_op(&["<", "<=", ">", ">=", "==", "!="]) {
            Some("<") => BinOp::Lt,
            Some("<=") => BinOp::Le,
            Some(">") => BinOp::Gt,
            Some(">=") => BinOp::Ge,
            Some("==") => BinOp::Eq,
            Some("!=") => BinOp::Ne,
            _ => return Ok(lhs),
        };
        let rhs = self.additive()?;
        Ok(Expr::Binary(op, Box::new(lhs), Box::new(rhs)))
    }

    fn additive(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.multiplicative()?;
        while let Some(op) = self.eat_op(&["+", "-"]) {
            let rhs = self.multiplicative()?;
            let op = if op == "+" { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn multiplicative(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.eat_op(&["*", "/"]) {
            let rhs = self.unary()?;
            let op = if op == "*" { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat_op(&["-"]).is_some() {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let tok = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| ExprError::Eof("operand".into()))?;
        self.pos += 1;
        match tok {
            ExprToken::Int(n) => Ok(Expr::Int(n)),
            ExprToken::Str(s) => Ok(Expr::Str(s)),
            ExprToken::Ident(s) if s == "true" || s == "True" => Ok(Expr::Bool(true)),
            ExprToken::Ident(s) if s == "false" || s == "False" => Ok(Expr::Bool(false)),
            ExprToken::Ident(s) if KEYWORDS.contains(&s.as_str()) => Err(ExprError::Unexpected {
                found: s,
                expected: "operand".into(),
            }),
            ExprToken::Ident(name) => {
                if self.peek() != Some(&ExprToken::LParen) {
                    return Ok(Expr::Var(name));
                }
                self.pos += 1;
                let mut args = Vec::new();
                if self.peek() == Some(&ExprToken::RParen) {
                    self.pos += 1;
                    return Ok(Expr::Call(name, args));
                }
                loop {
                    args.push(self.or()?);
                    match self.tokens.get(self.pos) {
                        Some(ExprToken::Comma) => self.pos += 1,
                        Some(ExprToken::RParen) => {
                            self.pos += 1;
                            return Ok(Expr::Call(name, args));
                        }
                        Some(t) => {
                            return Err(ExprError::Unexpected {
                                found: format!("{t:?}"),
                                expected: "',' or ')'".into(),
                            })
                        }
                        None => return Err(ExprError::Eof("')'".into())),
                    }
                }
            }
            ExprToken::LParen => {
                let e = self.or()?;
                match self.tokens.get(self.pos) {
                    Some(ExprToken::RParen) => {
                        self.pos += 1;
                        Ok(e)
                    }
                    Some(t) => Err(ExprError::Unexpected {
                        found: format!("{t:?}"),
                        expected: "')'".into(),
                    }),
                    None => Err(ExprError::Eof("')'".into())),
                }
            }
            other => Err(ExprError::Unexpected {
                found: format!("{other:?}"),
                expected: "operand".into(),
            }),
        }
    }
}
