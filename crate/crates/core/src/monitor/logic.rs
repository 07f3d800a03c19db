//! Assertion evaluators.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};

use thiserror::Error;

use crate::message::Value;
use crate::scribble::assertion::{parse_expr, BinOp, Expr};
use crate::scribble::{Assertion, DEFAULT_ASSERTION_LANGUAGE};

pub type Env = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct EvalError(pub String);

fn err<T>(detail: impl Into<String>) -> Result<T, EvalError> {
    Err(EvalError(detail.into()))
}

/// Decides assertions. Must be deterministic in `(assertion, env)`.
pub trait LogicEngine: Send + Sync {
    fn eval(&self, assertion: &Assertion, env: &Env) -> Result<bool, EvalError>;
}

/// The built-in evaluator for `pyexpr-like` assertions.
#[derive(Debug, Default, Clone, Copy)]
pub struct Builtin;

impl LogicEngine for Builtin {
    fn eval(&self, assertion: &Assertion, env: &Env) -> Result<bool, EvalError> {
        eval_predicate(assertion, env)
    }
}

pub fn eval_predicate(assertion: &Assertion, env: &Env) -> Result<bool, EvalError> {
    if assertion.language_tag != DEFAULT_ASSERTION_LANGUAGE {
        return err(format!(
            "unsupported assertion language {}",
            assertion.language_tag
        ));
    }
    let expr = parse_expr(&assertion.source_text).map_err(|e| EvalError(format!("syntax: {e}")))?;
    match eval(&expr, env)? {
        Value::Bool(b) => Ok(b),
        other => err(format!("assertion evaluated to non-boolean {other}")),
    }
}

fn eval(e: &Expr, env: &Env) -> Result<Value, EvalError> {
    Ok(match e {
        Expr::Int(i) => Value::Int(*i),
        Expr::Str(s) => Value::String(s.clone()),
        Expr::Bool(b) => Value::Bool(*b),
        Expr::Var(v) => match env.get(v) {
            Some(x) => x.clone(),
            None => return err(format!("unbound: {v}")),
        },
        Expr::Call(f, args) => match (f.as_str(), args.as_slice()) {
            ("size", [arg]) => match eval(arg, env)? {
                Value::String(s) => Value::Int(s.len() as i64),
                Value::Bytes(b) => Value::Int(b.len() as i64),
                other => return err(format!("size() of non-sequence {other}")),
            },
            ("size", _) => return err("size() takes one argument"),
            _ => return err(format!("unknown function {f}")),
        },
        Expr::Not(x) => Value::Bool(!as_bool(eval(x, env)?)?),
        Expr::Neg(x) => match eval(x, env)? {
            Value::Int(i) => Value::Int(
                i.checked_neg()
                    .ok_or_else(|| EvalError("overflow".into()))?,
            ),
            other => return err(format!("cannot negate {other}")),
        },
        Expr::Binary(BinOp::And, l, r) => {
            Value::Bool(as_bool(eval(l, env)?)? && as_bool(eval(r, env)?)?)
        }
        Expr::Binary(BinOp::Or, l, r) => {
            Value::Bool(as_bool(eval(l, env)?)? || as_bool(eval(r, env)?)?)
        }
        Expr::Binary(op, l, r) => binary(*op, eval(l, env)?, eval(r, env)?)?,
    })
}

fn as_bool(v: Value) -> Result<bool, EvalError> {
    match v {
        Value::Bool(b) => Ok(b),
        other => err(format!("expected boolean, found {other}")),
    }
}

fn binary(op: BinOp, l: Value, r: Value) -> Result<Value, EvalError> {
    use std::cmp::Ordering;
    let overflow = || EvalError("overflow".into());
    let ord = |want: fn(Ordering) -> bool| -> Result<Value, EvalError> {
        let o = match (&l, &r) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::String(a), Value::String(b)) => a.cmp(b),
            _ => return err(format!("cannot compare {l} {op} {r}")),
        };
        Ok(Value::Bool(want(o)))
    };
    match op {
        BinOp::Eq => Ok(Value::Bool(l == r)),
        BinOp::Ne => Ok(Value::Bool(l != r)),
        BinOp::Lt => ord(Ordering::is_lt),
        BinOp::Le => ord(Ordering::is_le),
        BinOp::Gt => ord(Ordering::is_gt),
        BinOp::Ge => ord(Ordering::is_ge),
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
            let (Value::Int(a), Value::Int(b)) = (&l, &r) else {
                return err(format!("arithmetic on non-integers {l} {op} {r}"));
            };
            let (a, b) = (*a, *b);
            let v = match op {
                BinOp::Add => a.checked_add(b),
                BinOp::Sub => a.checked_sub(b),
                BinOp::Mul => a.checked_mul(b),
                _ if b == 0 => return err("division by zero"),
                // floor division, as the host language of the assertions does
                _ => a.checked_div(b).map(|q| {
                    if a % b != 0 && (a < 0) != (b < 0) {
                        q - 1
                    } else {
                        q
                    }
                }),
            };
            v.map(Value::Int).ok_or_else(overflow)
        }
        BinOp::And | BinOp::Or => unreachable!("short-circuited by the caller"),
    }
}

/// Runs an external program per assertion. The program reads the assertion
/// text on its first input line and the environment as JSON on the second,
/// and answers `true`, `false` or `error:<detail>`.
#[derive(Debug, Clone)]
pub struct ExternalCommand {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl ExternalCommand {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        Self {
            program: program.into(),
            args: Vec::new(),
        }
    }

    pub fn arg(mut self, a: impl Into<String>) -> Self {
        self.args.push(a.into());
        self
    }
}

impl LogicEngine for ExternalCommand {
    fn eval(&self, assertion: &Assertion, env: &Env) -> Result<bool, EvalError> {
        let env_json = serde_json::to_string(env).map_err(|e| EvalError(e.to_string()))?;
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| EvalError(format!("cannot start {}: {e}", self.program.display())))?;
        {
            let mut stdin = child.stdin.take().expect("piped");
            let input = format!(
                "{}\n{}\n",
                assertion.source_text.replace('\n', " "),
                env_json
            );
            // a program that answers without reading everything closes the pipe early
            let _ = stdin.write_all(input.as_bytes());
        }
        let out = child
            .wait_with_output()
            .map_err(|e| EvalError(format!("engine failed: {e}")))?;
        let reply = String::from_utf8_lossy(&out.stdout);
        match reply.trim() {
            "true" => Ok(true),
            "false" => Ok(false),
            r => match r.strip_prefix("error:") {
                Some(detail) => err(detail.trim()),
                None => err(format!("unintelligible engine reply {r:?}")),
            },
        }
    }
}
