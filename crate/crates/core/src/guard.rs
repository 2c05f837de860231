//! Guard and action mini-language.
//!
//! Guards are integer/boolean expressions attached to edges; actions are
//! assignments applied to the [`Context`] when an edge is traversed. Together
//! they turn a plain test model into an extended finite-state machine.
//!
//! ```text
//! expr  := or
//! or    := and ("||" and)*
//! and   := cmp ("&&" cmp)*
//! cmp   := add (("=="|"!="|"<"|"<="|">"|">=") add)?
//! add   := mul (("+"|"-") mul)*
//! mul   := unary ("*" unary)*
//! unary := ("!"|"-") unary | atom
//! atom  := INT | "true" | "false" | IDENT | "(" expr ")"
//! stmt  := IDENT "=" expr
//! ```

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Value {
    Int(i64),
    Bool(bool),
}

impl Value {
    fn type_name(self) -> &'static str {
        match self {
            Value::Int(_) => "integer",
            Value::Bool(_) => "boolean",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// Variable store read by guards and written by actions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Context {
    bindings: BTreeMap<String, Value>,
}

impl Context {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<Value> {
        self.bindings.get(name).copied()
    }

    /// Binds `name` to `value`. Panics if `name` is not a valid identifier.
    pub fn set(&mut self, name: &str, value: Value) {
        assert!(is_identifier(name), "invalid variable name {name:?}");
        self.bindings.insert(name.to_string(), value);
    }

    pub fn with(mut self, name: &str, value: Value) -> Self {
        self.set(name, value);
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Value)> {
        self.bindings.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    /// Sorted `name=value` rendering joined by `;`, used in run logs.
    pub fn digest(&self) -> String {
        self.bindings
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Or => "||",
            BinaryOp::And => "&&",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq
            | BinaryOp::Ne
            | BinaryOp::Lt
            | BinaryOp::Le
            | BinaryOp::Gt
            | BinaryOp::Ge => 3,
            BinaryOp::Add | BinaryOp::Sub => 4,
            BinaryOp::Mul => 5,
        }
    }

    fn is_comparison(self) -> bool {
        self.precedence() == 3
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Var(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn unary(op: UnaryOp, operand: Expr) -> Self {
        Expr::Unary(op, Box::new(operand))
    }

    pub fn var(name: &str) -> Self {
        Expr::Var(name.to_string())
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Unary(..) => 6,
            _ => 7,
        }
    }
}

// Precedence-aware printing: only the parentheses the grammar needs.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(i) => write!(f, "{i}"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Var(name) => f.write_str(name),
            Expr::Unary(op, operand) => {
                f.write_str(match op {
                    UnaryOp::Not => "!",
                    UnaryOp::Neg => "-",
                })?;
                if operand.precedence() < 6 {
                    write!(f, "({operand})")
                } else {
                    write!(f, "{operand}")
                }
            }
            Expr::Binary(op, lhs, rhs) => {
                let prec = op.precedence();
                let wrap_lhs =
                    lhs.precedence() < prec || (op.is_comparison() && lhs.precedence() == prec);
                let wrap_rhs = rhs.precedence() <= prec;
                if wrap_lhs {
                    write!(f, "({lhs})")?;
                } else {
                    write!(f, "{lhs}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if wrap_rhs {
                    write!(f, "({rhs})")
                } else {
                    write!(f, "{rhs}")
                }
            }
        }
    }
}

/// Assignment statement `target = value`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Stmt {
    pub target: String,
    pub value: Expr,
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.target, self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntaxError {
    #[error("unexpected character {ch:?} at offset {pos}")]
    Lexical { pos: usize, ch: char },
    #[error("integer literal at offset {pos} is out of range")]
    IntOutOfRange { pos: usize },
    #[error("{} at offset {pos}: expected {}", found_text(.found), .expected.join(" | "))]
    Unexpected {
        pos: usize,
        found: Option<String>,
        expected: Vec<&'static str>,
    },
}

fn found_text(found: &Option<String>) -> String {
    match found {
        Some(tok) => format!("unexpected token {tok:?}"),
        None => "unexpected end of input".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("undefined variable `{0}`")]
    UndefinedVariable(String),
    #[error("type mismatch: `{op}` cannot be applied to {found}")]
    TypeMismatch {
        op: &'static str,
        found: &'static str,
    },
    #[error("guard evaluated to {0}, expected a boolean")]
    NonBoolean(&'static str),
    #[error("integer overflow")]
    Overflow,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Int(i64),
    Ident(String),
    True,
    False,
    Op(&'static str),
    LParen,
    RParen,
    Assign,
    Semi,
}

impl Tok {
    fn text(&self) -> String {
        match self {
            Tok::Int(i) => i.to_string(),
            Tok::Ident(s) => s.clone(),
            Tok::True => "true".into(),
            Tok::False => "false".into(),
            Tok::Op(s) => (*s).into(),
            Tok::LParen => "(".into(),
            Tok::RParen => ")".into(),
            Tok::Assign => "=".into(),
            Tok::Semi => ";".into(),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, SyntaxError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let two = |s: &str| text[i..].starts_with(s);
        let tok = if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n = text[start..i]
                .parse::<i64>()
                .map_err(|_| SyntaxError::IntOutOfRange { pos: start })?;
            out.push((start, Tok::Int(n)));
            continue;
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &text[start..i];
            out.push((
                start,
                match word {
                    "true" => Tok::True,
                    "false" => Tok::False,
                    _ => Tok::Ident(word.to_string()),
                },
            ));
            continue;
        } else if two("||") {
            Tok::Op("||")
        } else if two("&&") {
            Tok::Op("&&")
        } else if two("==") {
            Tok::Op("==")
        } else if two("!=") {
            Tok::Op("!=")
        } else if two("<=") {
            Tok::Op("<=")
        } else if two(">=") {
            Tok::Op(">=")
        } else {
            let single = match c {
                b'<' => Tok::Op("<"),
                b'>' => Tok::Op(">"),
                b'+' => Tok::Op("+"),
                b'-' => Tok::Op("-"),
                b'*' => Tok::Op("*"),
                b'!' => Tok::Op("!"),
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b'=' => Tok::Assign,
                b';' => Tok::Semi,
                _ => {
                    let ch = text[i..].chars().next().unwrap_or('\u{fffd}');
                    return Err(SyntaxError::Lexical { pos: i, ch });
                }
            };
            out.push((start, single));
            i += 1;
            continue;
        };
        // two-character operators
        out.push((start, tok));
        i += 2;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self, SyntaxError> {
        Ok(Self {
            toks: tokenize(text)?,
            pos: 0,
            end: text.len(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn unexpected(&self, expected: Vec<&'static str>) -> SyntaxError {
        SyntaxError::Unexpected {
            pos: self.offset(),
            found: self.peek().map(Tok::text),
            expected,
        }
    }

    fn eat_op(&mut self, ops: &[&'static str]) -> Option<&'static str> {
        match self.peek() {
            Some(Tok::Op(op)) if ops.contains(op) => {
                let op = *op;
                self.pos += 1;
                Some(op)
            }
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.and()?;
        while self.eat_op(&["||"]).is_some() {
            lhs = Expr::binary(BinaryOp::Or, lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.cmp()?;
        while self.eat_op(&["&&"]).is_some() {
            lhs = Expr::binary(BinaryOp::And, lhs, self.cmp()?);
        }
        Ok(lhs)
    }

    fn cmp(&mut self) -> Result<Expr, SyntaxError> {
        let lhs = self.add()?;
        let op = match self.eat_op(&["==", "!=", "<", "<=", ">", ">="]) {
            Some("==") => BinaryOp::Eq,
            Some("!=") => BinaryOp::Ne,
            Some("<") => BinaryOp::Lt,
            Some("<=") => BinaryOp::Le,
            Some(">") => BinaryOp::Gt,
            Some(">=") => BinaryOp::Ge,
            _ => return Ok(lhs),
        };
        Ok(Expr::binary(op, lhs, self.add()?))
    }

    fn add(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.mul()?;
        while let Some(op) = self.eat_op(&["+", "-"]) {
            let op = if op == "+" {
                BinaryOp::Add
            } else {
                BinaryOp::Sub
            };
            lhs = Expr::binary(op, lhs, self.mul()?);
        }
        Ok(lhs)
    }

    fn mul(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.unary()?;
        while self.eat_op(&["*"]).is_some() {
            lhs = Expr::binary(BinaryOp::Mul, lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        match self.eat_op(&["!", "-"]) {
            Some("!") => Ok(Expr::unary(UnaryOp::Not, self.unary()?)),
            Some(_) => Ok(Expr::unary(UnaryOp::Neg, self.unary()?)),
            None => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        let expr = match self.peek() {
            Some(Tok::Int(i)) => Expr::Int(*i),
            Some(Tok::True) => Expr::Bool(true),
            Some(Tok::False) => Expr::Bool(false),
            Some(Tok::Ident(name)) => Expr::Var(name.clone()),
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(self.unexpected(vec![")"]));
                }
                self.pos += 1;
                return Ok(inner);
            }
            _ => {
                return Err(self.unexpected(vec![
                    "integer",
                    "true",
                    "false",
                    "identifier",
                    "(",
                    "!",
                    "-",
                ]))
            }
        };
        self.pos += 1;
        Ok(expr)
    }

    fn finish(&mut self, allow_semi: bool) -> Result<(), SyntaxError> {
        if allow_semi && self.peek() == Some(&Tok::Semi) {
            self.pos += 1;
        }
        if self.peek().is_some() {
            return Err(self.unexpected(vec!["end of input"]));
        }
        Ok(())
    }
}

pub fn parse_guard(text: &str) -> Result<Expr, SyntaxError> {
    let mut p = Parser::new(text)?;
    let expr = p.expr()?;
    p.finish(false)?;
    Ok(expr)
}

/// Parses one assignment; a single trailing `;` is tolerated.
pub fn parse_stmt(text: &str) -> Result<Stmt, SyntaxError> {
    let mut p = Parser::new(text)?;
    let target = match p.peek() {
        Some(Tok::Ident(name)) => name.clone(),
        _ => return Err(p.unexpected(vec!["identifier"])),
    };
    p.pos += 1;
    if p.peek() != Some(&Tok::Assign) {
        return Err(p.unexpected(vec!["="]));
    }
    p.pos += 1;
    let value = p.expr()?;
    p.finish(true)?;
    Ok(Stmt { target, value })
}

pub fn eval(expr: &Expr, ctx: &Context) -> Result<Value, EvalError> {
    match expr {
        Expr::Int(i) => Ok(Value::Int(*i)),
        Expr::Bool(b) => Ok(Value::Bool(*b)),
        Expr::Var(name) => ctx
            .get(name)
            .ok_or_else(|| EvalError::UndefinedVariable(name.clone())),
        Expr::Unary(UnaryOp::Not, operand) => match eval(operand, ctx)? {
            Value::Bool(b) => Ok(Value::Bool(!b)),
            other => Err(EvalError::TypeMismatch {
                op: "!",
                found: other.type_name(),
            }),
        },
        Expr::Unary(UnaryOp::Neg, operand) => match eval(operand, ctx)? {
            Value::Int(i) => i.checked_neg().map(Value::Int).ok_or(EvalError::Overflow),
            other => Err(EvalError::TypeMismatch {
                op: "-",
                found: other.type_name(),
            }),
        },
        Expr::Binary(op @ (BinaryOp::And | BinaryOp::Or), lhs, rhs) => {
            let short = *op == BinaryOp::Or;
            match eval(lhs, ctx)? {
                Value::Bool(b) if b == short => Ok(Value::Bool(short)),
                Value::Bool(_) => match eval(rhs, ctx)? {
                    Value::Bool(b) => Ok(Value::Bool(b)),
                    other => Err(EvalError::TypeMismatch {
                        op: op.symbol(),
                        found: other.type_name(),
                    }),
                },
                other => Err(EvalError::TypeMismatch {
                    op: op.symbol(),
                    found: other.type_name(),
                }),
            }
        }
        Expr::Binary(op, lhs, rhs) => {
            let l = eval(lhs, ctx)?;
            let r = eval(rhs, ctx)?;
            binary(*op, l, r)
        }
    }
}

fn binary(op: BinaryOp, l: Value, r: Value) -> Result<Value, EvalError> {
    use BinaryOp::*;
    match (op, l, r) {
        (Eq, Value::Int(a), Value::Int(b)) => Ok(Value::Bool(a == b)),
        (Eq, Value::Bool(a), Value::Bool(b)) => Ok(Value::Bool(a == b)),
        (Ne, Value::Int(a), Value::Int(b)) => Ok(Value::Bool(a != b)),
        (Ne, Value::Bool(a), Value::Bool(b)) => Ok(Value::Bool(a != b)),
        (Lt, Value::Int(a), Value::Int(b)) => Ok(Value::Bool(a < b)),
        (Le, Value::Int(a), Value::Int(b)) => Ok(Value::Bool(a <= b)),
        (Gt, Value::Int(a), Value::Int(b)) => Ok(Value::Bool(a > b)),
        (Ge, Value::Int(a), Value::Int(b)) => Ok(Value::Bool(a >= b)),
        (Add, Value::Int(a), Value::Int(b)) => {
            a.checked_add(b).map(Value::Int).ok_or(EvalError::Overflow)
        }
        (Sub, Value::Int(a), Value::Int(b)) => {
            a.checked_sub(b).map(Value::Int).ok_or(EvalError::Overflow)
        }
        (Mul, Value::Int(a), Value::Int(b)) => {
            a.checked_mul(b).map(Value::Int).ok_or(EvalError::Overflow)
        }
        (_, l, r) => {
            let found = if l.type_name() == r.type_name() {
                l.type_name()
            } else {
                "mixed integer/boolean operands"
            };
            Err(EvalError::TypeMismatch {
                op: op.symbol(),
                found,
            })
        }
    }
}

/// Evaluates a guard; the result must be boolean.
pub fn eval_guard(expr: &Expr, ctx: &Context) -> Result<bool, EvalError> {
    match eval(expr, ctx)? {
        Value::Bool(b) => Ok(b),
        other => Err(EvalError::NonBoolean(other.type_name())),
    }
}

/// Applies statements in order to a copy of `ctx`.
pub fn apply_actions(stmts: &[Stmt], ctx: &Context) -> Result<Context, EvalError> {
    let mut next = ctx.clone();
    for stmt in stmts {
        let value = eval(&stmt.value, &next)?;
        next.bindings.insert(stmt.target.clone(), value);
    }
    Ok(next)
}
