use std::fmt;

use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    /// Raw text between `@{` and the matching `}`.
    Assertion(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Semi,
    Comma,
    Colon,
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "`{s}`"),
            TokenKind::Assertion(_) => f.write_str("assertion"),
            TokenKind::LBrace => f.write_str("`{`"),
            TokenKind::RBrace => f.write_str("`}`"),
            TokenKind::LParen => f.write_str("`(`"),
            TokenKind::RParen => f.write_str("`)`"),
            TokenKind::Semi => f.write_str("`;`"),
            TokenKind::Comma => f.write_str("`,`"),
            TokenKind::Colon => f.write_str("`:`"),
            TokenKind::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub column: usize,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut cur = Cursor {
        chars: src.chars().peekable(),
        line: 1,
        column: 1,
    };
    let mut tokens = Vec::new();
    loop {
        let (line, column) = (cur.line, cur.column);
        let Some(c) = cur.peek() else {
            tokens.push(Token {
                kind: TokenKind::Eof,
                line,
                column,
            });
            return Ok(tokens);
        };
        let kind = match c {
            c if c.is_whitespace() => {
                cur.bump();
                continue;
            }
            '/' => {
                cur.bump();
                if cur.peek() != Some('/') {
                    return Err(ParseError::syntax(line, column, ["`//`"]));
                }
                while let Some(c) = cur.peek() {
                    if c == '\n' {
                        break;
                    }
                    cur.bump();
                }
                continue;
            }
            '{' => single(&mut cur, TokenKind::LBrace),
            '}' => single(&mut cur, TokenKind::RBrace),
            '(' => single(&mut cur, TokenKind::LParen),
            ')' => single(&mut cur, TokenKind::RParen),
            ';' => single(&mut cur, TokenKind::Semi),
            ',' => single(&mut cur, TokenKind::Comma),
            ':' => single(&mut cur, TokenKind::Colon),
            '@' => {
                cur.bump();
                if cur.peek() != Some('{') {
                    return Err(ParseError::syntax(cur.line, cur.column, ["`{`"]));
                }
                cur.bump();
                TokenKind::Assertion(assertion_body(&mut cur, line, column)?)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(c) = cur.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        cur.bump();
                    } else {
                        break;
                    }
                }
                TokenKind::Ident(s)
            }
            _ => {
                return Err(ParseError::syntax(
                    line,
                    column,
                    [
                        "identifier",
                        "`{`",
                        "`}`",
                        "`(`",
                        "`)`",
                        "`;`",
                        "`,`",
                        "`:`",
                        "`@{`",
                    ],
                ))
            }
        };
        tokens.push(Token { kind, line, column });
    }
}

fn single(cur: &mut Cursor<'_>, kind: TokenKind) -> TokenKind {
    cur.bump();
    kind
}

/// Reads up to the `}` matching the already consumed `@{`, honouring nested
/// braces and quoted strings.
fn assertion_body(cur: &mut Cursor<'_>, line: usize, column: usize) -> Result<String, ParseError> {
    let mut depth = 0usize;
    let mut body = String::new();
    let mut quote: Option<char> = None;
    loop {
        let Some(c) = cur.bump() else {
            return Err(ParseError::syntax(
                line,
                column,
                ["`}` closing the assertion"],
            ));
        };
        match quote {
            Some(q) => {
                if c == '\\' {
                    body.push(c);
                    if let Some(n) = cur.bump() {
                        body.push(n);
                    }
                    continue;
                }
                if c == q {
                    quote = None;
                }
            }
            None => match c {
                '"' | '\'' => quote = Some(c),
                '{' => depth += 1,
                '}' if depth == 0 => return Ok(body.trim().to_string()),
                '}' => depth -= 1,
                _ => {}
            },
        }
        body.push(c);
    }
}
