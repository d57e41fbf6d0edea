//! A small arithmetic language for integrands over `[0,1]^d`.
//!
//! Grammar, loosest to tightest binding:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' exponent)*        left-associative
//! exponent:= '-' exponent | primary
//! primary := number | x<k> | func '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! `func` is one of `min`, `max` (two or more arguments), `abs`, `exp`, `log`,
//! `sqrt`. Since `^` binds tighter than unary minus, `-x1^2` is `-(x1^2)`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("variable x{index} at position {pos} exceeds dimension {d}")]
    VariableOutOfRange { index: usize, d: usize, pos: usize },
    #[error("unknown function `{name}` at position {pos}")]
    UnknownFunction { name: String, pos: usize },
    #[error("function `{name}` at position {pos} takes {expected} argument(s), got {got}")]
    Arity {
        name: String,
        pos: usize,
        expected: &'static str,
        got: usize,
    },
}

/// Evaluation failed at a specific point.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} at point {point:?}")]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub point: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalErrorKind {
    DivisionByZero,
    LogDomain,
    SqrtDomain,
    PowDomain,
    NonFinite,
}

impl fmt::Display for EvalErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EvalErrorKind::DivisionByZero => "division by zero",
            EvalErrorKind::LogDomain => "log of a non-positive value",
            EvalErrorKind::SqrtDomain => "sqrt of a negative value",
            EvalErrorKind::PowDomain => "power with negative base and fractional exponent",
            EvalErrorKind::NonFinite => "non-finite value",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Min,
    Max,
    Abs,
    Exp,
    Log,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    /// 0-based variable index.
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// Coordinatewise monotonicity of an integrand over the unit cube, derived
/// syntactically from its expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MonotonicityHint {
    /// Nondecreasing in every coordinate.
    CoordinatewiseNondecreasing,
    /// Monotone in every coordinate, nonincreasing in at least one.
    CoordinatewiseNonincreasingInSome,
    Unknown,
}

impl MonotonicityHint {
    /// Whether corner sampling (`m = 2`) yields exact cell extrema.
    pub fn corners_exact(self) -> bool {
        !matches!(self, MonotonicityHint::Unknown)
    }
}

/// A parsed integrand `f : [0,1]^d → ℝ`.
#[derive(Debug, Clone)]
pub struct Integrand {
    source: String,
    arity: usize,
    root: Node,
    hint: MonotonicityHint,
}

impl Integrand {
    pub fn parse(source: &str, d: usize) -> Result<Self, ExprError> {
        let tokens = lex(source)?;
        let mut p = Parser {
            tokens: &tokens,
            pos: 0,
            d,
            end: source.len(),
        };
        let root = p.expr()?;
        if let Some(t) = p.peek() {
            return Err(ExprError::Syntax {
                pos: t.pos,
                message: format!("unexpected {}", t.kind),
            });
        }
        let hint = analyze(&root, d).hint();
        Ok(Integrand {
            source: source.to_string(),
            arity: d,
            root,
            hint,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn monotonicity_hint(&self) -> MonotonicityHint {
        self.hint
    }

    /// True if the expression is `x1*…*xd` with each variable exactly once,
    /// in any order and grouping.
    pub fn is_coordinate_product(&self) -> bool {
        fn factors(node: &Node, out: &mut Vec<usize>) -> bool {
            match node {
                Node::Var(k) => {
                    out.push(*k);
                    true
                }
                Node::Bin(BinOp::Mul, a, b) => factors(a, out) && factors(b, out),
                _ => false,
            }
        }
        let mut vars = Vec::new();
        if !factors(&self.root, &mut vars) {
            return false;
        }
        vars.sort_unstable();
        vars.iter().copied().eq(0..self.arity)
    }

    /// Evaluates at `point`, which must have `arity` coordinates.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        assert_eq!(point.len(), self.arity, "point dimension mismatch");
        let v = eval_node(&self.root, point).map_err(|kind| EvalError {
            kind,
            point: point.to_vec(),
        })?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError {
                kind: EvalErrorKind::NonFinite,
                point: point.to_vec(),
            })
        }
    }
}

/// Parses `source` as an integrand of `d` variables.
pub fn parse_integrand(source: &str, d: usize) -> Result<Integrand, ExprError> {
    Integrand::parse(source, d)
}

fn eval_node(node: &Node, x: &[f64]) -> Result<f64, EvalErrorKind> {
    Ok(match node {
        Node::Const(c) => *c,
        Node::Var(k) => x[*k],
        Node::Neg(a) => -eval_node(a, x)?,
        Node::Bin(op, a, b) => {
            let a = eval_node(a, x)?;
            let b = eval_node(b, x)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(EvalErrorKind::DivisionByZero);
                    }
                    a / b
                }
                BinOp::Pow => {
                    let v = a.powf(b);
                    if v.is_nan() {
                        return Err(EvalErrorKind::PowDomain);
                    }
                    v
                }
            }
        }
        Node::Call(f, args) => match f {
            Func::Min | Func::Max => {
                let mut acc = eval_node(&args[0], x)?;
                for a in &args[1..] {
                    let v = eval_node(a, x)?;
                    acc = if *f == Func::Min {
                        acc.min(v)
                    } else {
                        acc.max(v)
                    };
                }
                acc
            }
            Func::Abs => eval_node(&args[0], x)?.abs(),
            Func::Exp => eval_node(&args[0], x)?.exp(),
            Func::Log => {
                let v = eval_node(&args[0], x)?;
                if v <= 0.0 {
                    return Err(EvalErrorKind::LogDomain);
                }
                v.ln()
            }
            Func::Sqrt => {
                let v = eval_node(&args[0], x)?;
                if v < 0.0 {
                    return Err(EvalErrorKind::SqrtDomain);
                }
                v.sqrt()
            }
        },
    })
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Num(v) => write!(f, "number {v}"),
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Op(c) => write!(f, "`{c}`"),
            TokenKind::LParen => f.write_str("`(`"),
            TokenKind::RParen => f.write_str("`)`"),
            TokenKind::Comma => f.write_str("`,`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    pos: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = match c {
            '+' | '-' | '*' | '/' | '^' => {
                i += 1;
                TokenKind::Op(c)
            }
            '(' => {
                i += 1;
                TokenKind::LParen
            }
            ')' => {
                i += 1;
                TokenKind::RParen
            }
            ',' => {
                i += 1;
                TokenKind::Comma
            }
            '0'..='9' | '.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // optional exponent: e, E followed by optional sign and digits
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| ExprError::Syntax {
                    pos: start,
                    message: format!("malformed number `{text}`"),
                })?;
                TokenKind::Num(v)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                TokenKind::Ident(src[start..i].to_string())
            }
            _ => {
                return Err(ExprError::Syntax {
                    pos: start,
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        out.push(Token { kind, pos: start });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    d: usize,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<&Token> {
        let t = self.tokens.get(self.pos);
        self.pos += 1;
        t
    }

    fn here(&self) -> usize {
        self.peek().map_or(self.end, |t| t.pos)
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Op(c),
                ..
            }) if ops.contains(c) => {
                let c = *c;
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn expect(&mut self, want: TokenKind) -> Result<(), ExprError> {
        let pos = self.here();
        match self.next() {
            Some(t) if t.kind == want => Ok(()),
            Some(t) => Err(ExprError::Syntax {
                pos,
                message: format!("expected {want}, found {}", t.kind),
            }),
            None => Err(ExprError::Syntax {
                pos,
                message: format!("expected {want}, found end of input"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(c) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(c) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.eat_op(&['-', '+']) {
            Some('-') => Ok(Node::Neg(Box::new(self.unary()?))),
            Some(_) => self.unary(),
            None => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.primary()?;
        while self.eat_op(&['^']).is_some() {
            let rhs = self.exponent()?;
            lhs = Node::Bin(BinOp::Pow, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn exponent(&mut self) -> Result<Node, ExprError> {
        if self.eat_op(&['-']).is_some() {
            Ok(Node::Neg(Box::new(self.exponent()?)))
        } else {
            self.primary()
        }
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        let pos = self.here();
        let Some(tok) = self.next() else {
            return Err(ExprError::Syntax {
                pos,
                message: "unexpected end of input".into(),
            });
        };
        match tok.kind.clone() {
            TokenKind::Num(v) => Ok(Node::Const(v)),
            TokenKind::LParen => {
                let e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            TokenKind::Ident(name) => {
                if let Some(k) = variable_index(&name) {
                    if k == 0 || k > self.d {
                        return Err(ExprError::VariableOutOfRange {
                            index: k,
                            d: self.d,
                            pos,
                        });
                    }
                    return Ok(Node::Var(k - 1));
                }
                let func = match name.as_str() {
                    "min" => Func::Min,
                    "max" => Func::Max,
                    "abs" => Func::Abs,
                    "exp" => Func::Exp,
                    "log" => Func::Log,
                    "sqrt" => Func::Sqrt,
                    _ => return Err(ExprError::UnknownFunction { name, pos }),
                };
                self.expect(TokenKind::LParen)?;
                let mut args = vec![self.expr()?];
                while matches!(
                    self.peek(),
                    Some(Token {
                        kind: TokenKind::Comma,
                        ..
                    })
                ) {
                    self.pos += 1;
                    args.push(self.expr()?);
                }
                self.expect(TokenKind::RParen)?;
                let ok = match func {
                    Func::Min | Func::Max => args.len() >= 2,
                    _ => args.len() == 1,
                };
                if !ok {
                    return Err(ExprError::Arity {
                        name,
                        pos,
                        expected: if matches!(func, Func::Min | Func::Max) {
                            "at least 2"
                        } else {
                            "exactly 1"
                        },
                        got: args.len(),
                    });
                }
                Ok(Node::Call(func, args))
            }
            other => Err(ExprError::Syntax {
                pos,
                message: format!("unexpected {other}"),
            }),
        }
    }
}

fn variable_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

// ---------------------------------------------------------------------------
// Monotonicity analysis: interval range plus per-variable direction.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dir {
    Const,
    Up,
    Down,
    Unknown,
}

impl Dir {
    fn flip(self) -> Dir {
        match self {
            Dir::Up => Dir::Down,
            Dir::Down => Dir::Up,
            d => d,
        }
    }

    fn join(self, other: Dir) -> Dir {
        match (self, other) {
            (Dir::Const, d) | (d, Dir::Const) => d,
            (a, b) if a == b => a,
            _ => Dir::Unknown,
        }
    }
}

#[derive(Debug, Clone)]
struct Shape {
    lo: f64,
    hi: f64,
    dirs: Vec<Dir>,
}

impl Shape {
    fn hint(&self) -> MonotonicityHint {
        if self.dirs.contains(&Dir::Unknown) {
            MonotonicityHint::Unknown
        } else if self.dirs.contains(&Dir::Down) {
            MonotonicityHint::CoordinatewiseNonincreasingInSome
        } else {
            MonotonicityHint::CoordinatewiseNondecreasing
        }
    }

    fn map_dirs(mut self, f: impl Fn(Dir) -> Dir) -> Self {
        for d in &mut self.dirs {
            *d = f(*d);
        }
        self
    }

    fn unknown(d: usize) -> Shape {
        Shape {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            dirs: vec![Dir::Unknown; d],
        }
    }
}

fn zip_dirs(a: &Shape, b: &Shape, f: impl Fn(Dir, Dir) -> Dir) -> Vec<Dir> {
    a.dirs.iter().zip(&b.dirs).map(|(&x, &y)| f(x, y)).collect()
}

fn interval_mul(a: &Shape, b: &Shape) -> (f64, f64) {
    let c = [a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi];
    if c.iter().any(|v| v.is_nan()) {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    (
        c.iter().copied().fold(f64::INFINITY, f64::min),
        c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    )
}

fn analyze(node: &Node, d: usize) -> Shape {
    match node {
        Node::Const(c) => Shape {
            lo: *c,
            hi: *c,
            dirs: vec![Dir::Const; d],
        },
        Node::Var(k) => {
            let mut dirs = vec![Dir::Const; d];
            dirs[*k] = Dir::Up;
            Shape {
                lo: 0.0,
                hi: 1.0,
                dirs,
            }
        }
        Node::Neg(a) => {
            let a = analyze(a, d);
            Shape {
                lo: -a.hi,
                hi: -a.lo,
                ..a
            }
            .map_dirs(Dir::flip)
        }
        Node::Bin(op, a, b) => {
            let a = analyze(a, d);
            let b = analyze(b, d);
            match op {
                BinOp::Add => Shape {
                    lo: a.lo + b.lo,
                    hi: a.hi + b.hi,
                    dirs: zip_dirs(&a, &b, Dir::join),
                },
                BinOp::Sub => Shape {
                    lo: a.lo - b.hi,
                    hi: a.hi - b.lo,
                    dirs: zip_dirs(&a, &b, |x, y| x.join(y.flip())),
                },
                BinOp::Mul => {
                    let (lo, hi) = interval_mul(&a, &b);
                    let dirs = if a.lo >= 0.0 && b.lo >= 0.0 {
                        zip_dirs(&a, &b, Dir::join)
                    } else if a.hi <= 0.0 && b.hi <= 0.0 {
                        zip_dirs(&a, &b, |x, y| x.flip().join(y.flip()))
                    } else if a.lo == a.hi {
                        scale_dirs(&b.dirs, a.lo)
                    } else if b.lo == b.hi {
                        scale_dirs(&a.dirs, b.lo)
                    } else {
                        vec![Dir::Unknown; d]
                    };
                    Shape { lo, hi, dirs }
                }
                BinOp::Div => {
                    if b.lo == b.hi && b.lo != 0.0 {
                        let c = 1.0 / b.lo;
                        let (lo, hi) = if c > 0.0 {
                            (a.lo * c, a.hi * c)
                        } else {
                            (a.hi * c, a.lo * c)
                        };
                        Shape {
                            lo,
                            hi,
                            dirs: scale_dirs(&a.dirs, c),
                        }
                    } else if a.lo >= 0.0 && b.lo > 0.0 {
                        Shape {
                            lo: a.lo / b.hi,
                            hi: a.hi / b.lo,
                            dirs: zip_dirs(&a, &b, |x, y| x.join(y.flip())),
                        }
                    } else {
                        Shape::unknown(d)
                    }
                }
                BinOp::Pow => {
                    if b.lo == b.hi && a.lo >= 0.0 {
                        let p = b.lo;
                        if p == 0.0 {
                            Shape {
                                lo: 1.0,
                                hi: 1.0,
                                dirs: vec![Dir::Const; d],
                            }
                        } else if p > 0.0 {
                            Shape {
                                lo: a.lo.powf(p),
                                hi: a.hi.powf(p),
                                ..a
                            }
                        } else {
                            Shape {
                                lo: a.hi.powf(p),
                                hi: a.lo.powf(p),
                                ..a
                            }
                            .map_dirs(Dir::flip)
                        }
                    } else if a.lo == a.hi && a.lo > 0.0 {
                        // c^g: increasing in g for c > 1, decreasing for c < 1
                        let c = a.lo;
                        let (x, y) = (c.powf(b.lo), c.powf(b.hi));
                        Shape {
                            lo: x.min(y),
                            hi: x.max(y),
                            dirs: scale_dirs(&b.dirs, c.ln()),
                        }
                    } else {
                        Shape::unknown(d)
                    }
                }
            }
        }
        Node::Call(f, args) => {
            let shapes: Vec<Shape> = args.iter().map(|a| analyze(a, d)).collect();
            match f {
                Func::Min | Func::Max => {
                    let mut acc = shapes[0].clone();
                    for s in &shapes[1..] {
                        let (lo, hi) = if *f == Func::Min {
                            (acc.lo.min(s.lo), acc.hi.min(s.hi))
                        } else {
                            (acc.lo.max(s.lo), acc.hi.max(s.hi))
                        };
                        acc = Shape {
                            lo,
                            hi,
                            dirs: zip_dirs(&acc, s, Dir::join),
                        };
                    }
                    acc
                }
                Func::Abs => {
                    let a = shapes.into_iter().next().unwrap();
                    if a.lo >= 0.0 {
                        a
                    } else if a.hi <= 0.0 {
                        Shape {
                            lo: -a.hi,
                            hi: -a.lo,
                            ..a
                        }
                        .map_dirs(Dir::flip)
                    } else {
                        Shape {
                            lo: 0.0,
                            hi: a.hi.max(-a.lo),
                            dirs: a
                                .dirs
                                .iter()
                                .map(|&x| {
                                    if x == Dir::Const {
                                        Dir::Const
                                    } else {
                                        Dir::Unknown
                                    }
                                })
                                .collect(),
                        }
                    }
                }
                Func::Exp | Func::Log | Func::Sqrt => {
                    let a = shapes.into_iter().next().unwrap();
                    let g = |v: f64| match f {
                        Func::Exp => v.exp(),
                        Func::Log => {
                            if v > 0.0 {
                                v.ln()
                            } else {
                                f64::NEG_INFINITY
                            }
                        }
                        _ => v.max(0.0).sqrt(),
                    };
                    Shape {
                        lo: g(a.lo),
                        hi: g(a.hi),
                        ..a
                    }
                }
            }
        }
    }
}

fn scale_dirs(dirs: &[Dir], c: f64) -> Vec<Dir> {
    dirs.iter()
        .map(|&x| {
            if c > 0.0 {
                x
            } else if c < 0.0 {
                x.flip()
            } else {
                Dir::Const
            }
        })
        .collect()
}
