use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};
use super::ParseError;

const KEYWORDS: &[&str] = &[
    "global", "local", "protocol", "role", "at", "from", "to", "choice", "or", "rec", "parallel",
    "and",
];

/// One statement of a block, before sequencing into a continuation tree.
enum Stmt<M> {
    Msg(M),
    Choice(String, Vec<Vec<Stmt<M>>>),
    Rec(String, Vec<Stmt<M>>),
    Parallel(Vec<Vec<Stmt<M>>>),
    Continue(String),
}

struct GlobalMsg {
    assertion: Option<Assertion>,
    sig: MessageSignature,
    src: String,
    dst: String,
}

enum LocalMsg {
    Send(Option<Assertion>, MessageSignature, String),
    Receive(Option<Assertion>, MessageSignature, String),
}

pub(crate) struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    pub fn new(source: &str) -> Result<Self, ParseError> {
        Ok(Self {
            tokens: tokenize(source)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek_at(&self, offset: usize) -> &TokenKind {
        &self.tokens[(self.pos + offset).min(self.tokens.len() - 1)].kind
    }

    fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error<I, S>(&self, expected: I) -> ParseError
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let t = self.peek();
        ParseError::syntax(t.line, t.column, expected)
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Ident(s) if s == kw)
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.is_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.error([format!("`{kw}`")]))
        }
    }

    fn punct(&mut self, kind: TokenKind) -> Result<(), ParseError> {
        if self.peek().kind == kind {
            self.bump();
            Ok(())
        } else {
            Err(self.error([kind.to_string()]))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match &self.peek().kind {
            TokenKind::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(["identifier"])),
        }
    }

    fn eof(&mut self) -> Result<(), ParseError> {
        if self.peek().kind == TokenKind::Eof {
            Ok(())
        } else {
            Err(self.error(["end of input"]))
        }
    }

    pub fn any_file(&mut self) -> Result<Protocol, ParseError> {
        if self.is_keyword("global") {
            self.global_file().map(Protocol::Global)
        } else if self.is_keyword("local") {
            self.local_file().map(Protocol::Local)
        } else {
            Err(self.error(["`global`", "`local`"]))
        }
    }

    pub fn global_file(&mut self) -> Result<GlobalProtocol, ParseError> {
        self.keyword("global")?;
        self.keyword("protocol")?;
        let name = self.ident()?;
        let roles = self.role_list()?;
        let stmts = self.block(&mut Self::global_msg)?;
        self.eof()?;
        Ok(GlobalProtocol {
            name,
            roles,
            body: seq_global(stmts),
        })
    }

    pub fn local_file(&mut self) -> Result<LocalProtocol, ParseError> {
        self.keyword("local")?;
        self.keyword("protocol")?;
        let name = self.ident()?;
        self.keyword("at")?;
        let self_role = self.ident()?;
        let roles = self.role_list()?;
        let stmts = self.block(&mut Self::local_msg)?;
        self.eof()?;
        Ok(LocalProtocol {
            name,
            self_role,
            roles,
            body: seq_local(stmts),
        })
    }

    fn role_list(&mut self) -> Result<Vec<String>, ParseError> {
        self.punct(TokenKind::LParen)?;
        let mut roles = Vec::new();
        loop {
            self.keyword("role")?;
            roles.push(self.ident()?);
            match self.peek().kind {
                TokenKind::Comma => {
                    self.bump();
                }
                TokenKind::RParen => {
                    self.bump();
                    return Ok(roles);
                }
                _ => return Err(self.error(["`,`", "`)`"])),
            }
        }
    }

    fn block<M>(
        &mut self,
        msg: &mut impl FnMut(&mut Self, Option<Assertion>) -> Result<M, ParseError>,
    ) -> Result<Vec<Stmt<M>>, ParseError> {
        self.punct(TokenKind::LBrace)?;
        let mut stmts = Vec::new();
        loop {
            match &self.peek().kind {
                TokenKind::RBrace => {
                    self.bump();
                    return Ok(stmts);
                }
                TokenKind::Assertion(text) => {
                    let (line, column) = (self.peek().line, self.peek().column);
                    if text.is_empty() {
                        return Err(ParseError::syntax(line, column, ["nonempty assertion"]));
                    }
                    let assertion = Assertion::new(text.clone());
                    self.bump();
                    if !matches!(self.peek().kind, TokenKind::Ident(_))
                        || self.at_structural_keyword()
                    {
                        return Err(self.error(["message"]));
                    }
                    stmts.push(Stmt::Msg(msg(self, Some(assertion))?));
                }
                TokenKind::Ident(kw) if kw == "choice" => {
                    self.bump();
                    self.keyword("at")?;
                    let at = self.ident()?;
                    let mut branches = vec![self.block(msg)?];
                    while self.is_keyword("or") {
                        self.bump();
                        branches.push(self.block(msg)?);
                    }
                    stmts.push(Stmt::Choice(at, branches));
                }
                TokenKind::Ident(kw) if kw == "rec" => {
                    self.bump();
                    let var = self.ident()?;
                    let body = self.block(msg)?;
                    stmts.push(Stmt::Rec(var, body));
                }
                TokenKind::Ident(kw) if kw == "parallel" => {
                    self.bump();
                    let mut branches = vec![self.block(msg)?];
                    while self.is_keyword("and") {
                        self.bump();
                        branches.push(self.block(msg)?);
                    }
                    stmts.push(Stmt::Parallel(branches));
                }
                TokenKind::Ident(_) if *self.peek_at(1) == TokenKind::Semi => {
                    let var = self.ident()?;
                    self.bump();
                    stmts.push(Stmt::Continue(var));
                    if self.peek().kind != TokenKind::RBrace {
                        return Err(self.error(["`}` after a recursion jump"]));
                    }
                }
                TokenKind::Ident(_) => stmts.push(Stmt::Msg(msg(self, None)?)),
                _ => {
                    return Err(self.error([
                        "message",
                        "`choice`",
                        "`rec`",
                        "`parallel`",
                        "`@{`",
                        "`}`",
                    ]))
                }
            }
        }
    }

    fn at_structural_keyword(&self) -> bool {
        ["choice", "rec", "parallel"]
            .iter()
            .any(|kw| self.is_keyword(kw))
    }

    fn signature(&mut self) -> Result<MessageSignature, ParseError> {
        let label = self.ident()?;
        let mut payload = Vec::new();
        if self.peek().kind == TokenKind::LParen {
            self.bump();
            if self.peek().kind == TokenKind::RParen {
                self.bump();
                return Ok(MessageSignature::new(label, payload));
            }
            loop {
                payload.push(self.payload_field()?);
                match self.peek().kind {
                    TokenKind::Comma => {
                        self.bump();
                    }
                    TokenKind::RParen => {
                        self.bump();
                        break;
                    }
                    _ => return Err(self.error(["`,`", "`)`"])),
                }
            }
        }
        Ok(MessageSignature::new(label, payload))
    }

    /// `sort:name`, or a bare name. A bare sort keyword (as in `Raw(data)`)
    /// names a field of that sort; any other bare name is untyped `data`.
    fn payload_field(&mut self) -> Result<PayloadField, ParseError> {
        let (line, column) = (self.peek().line, self.peek().column);
        let first = self.ident()?;
        if self.peek().kind == TokenKind::Colon {
            self.bump();
            let sort = Sort::from_keyword(&first).ok_or_else(|| {
                ParseError::syntax(line, column, ["string", "int", "bool", "data"])
            })?;
            let name = self.ident()?;
            return Ok(PayloadField::new(name, sort));
        }
        let sort = Sort::from_keyword(&first).unwrap_or(Sort::Data);
        Ok(PayloadField::new(first, sort))
    }

    fn global_msg(&mut self, assertion: Option<Assertion>) -> Result<GlobalMsg, ParseError> {
        let sig = self.signature()?;
        self.keyword("from")?;
        let src = self.ident()?;
        self.keyword("to")?;
        let dst = self.ident()?;
        self.punct(TokenKind::Semi)?;
        Ok(GlobalMsg {
            assertion,
            sig,
            src,
            dst,
        })
    }

    fn local_msg(&mut self, assertion: Option<Assertion>) -> Result<LocalMsg, ParseError> {
        let sig = self.signature()?;
        let msg = if self.is_keyword("from") {
            self.bump();
            LocalMsg::Receive(assertion, sig, self.ident()?)
        } else if self.is_keyword("to") {
            self.bump();
            LocalMsg::Send(assertion, sig, self.ident()?)
        } else {
            return Err(self.error(["`from`", "`to`"]));
        };
        self.punct(TokenKind::Semi)?;
        Ok(msg)
    }
}

fn seq_global(stmts: Vec<Stmt<GlobalMsg>>) -> GlobalNode {
    stmts
        .into_iter()
        .rev()
        .fold(GlobalNode::End, |next, stmt| match stmt {
            Stmt::Msg(m) => GlobalNode::Interaction {
                assertion: m.assertion,
                sig: m.sig,
                src: m.src,
                dst: m.dst,
                cont: Box::new(next),
            },
            Stmt::Choice(at, branches) => GlobalNode::Choice {
                at,
                branches: branches
                    .into_iter()
                    .map(|b| seq_global(b).then(next.clone()))
                    .collect(),
            },
            Stmt::Rec(var, body) => GlobalNode::Rec {
                var,
                body: Box::new(seq_global(body).then(next)),
            },
            Stmt::Parallel(branches) => GlobalNode::Parallel {
                branches: branches.into_iter().map(seq_global).collect(),
                cont: Box::new(next),
            },
            Stmt::Continue(var) => GlobalNode::Continue(var),
        })
}

fn seq_local(stmts: Vec<Stmt<LocalMsg>>) -> LocalNode {
    stmts
        .into_iter()
        .rev()
        .fold(LocalNode::End, |next, stmt| match stmt {
            Stmt::Msg(LocalMsg::Send(assertion, sig, to)) => LocalNode::Send {
                assertion,
                sig,
                to,
                cont: Box::new(next),
            },
            Stmt::Msg(LocalMsg::Receive(assertion, sig, from)) => LocalNode::Receive {
                assertion,
                sig,
                from,
                cont: Box::new(next),
            },
            Stmt::Choice(at, branches) => LocalNode::Choice {
                at,
                branches: branches
                    .into_iter()
                    .map(|b| seq_local(b).then(next.clone()))
                    .collect(),
            },
            Stmt::Rec(var, body) => LocalNode::Rec {
                var,
                body: Box::new(seq_local(body).then(next)),
            },
            Stmt::Parallel(branches) => LocalNode::Parallel {
                branches: branches.into_iter().map(seq_local).collect(),
                cont: Box::new(next),
            },
            Stmt::Continue(var) => LocalNode::Continue(var),
        })
}
