//! Scalar expression language used for vector fields, paths, scalings and
//! delay laws.
//!
//! Grammar (EBNF):
//!
//! ```text
//! expr    = term , { ( "+" | "-" ) , term } ;
//! term    = power , { ( "*" | "/" ) , power } ;
//! power   = unary , [ "^" , power ] ;            (* right associative *)
//! unary   = "-" , unary | primary ;
//! primary = number | variable | call | "(" , expr , ")" ;
//! call    = func , "(" , expr , { "," , expr } , ")" ;
//! func    = "sqrt" | "exp" | "ln" | "abs" | "pow" | "min" | "max" ;
//! variable= "x" , index | "y" , index | "s" | "t" | "lambda" ;
//! index   = digit19 , { digit } ;
//! number  = ( digits , [ "." , [ digits ] ] | "." , digits ) , [ ( "e" | "E" ) , [ "+" | "-" ] , digits ] ;
//! ```
//!
//! Unary minus binds tighter than `^`, so `-x1^2` is `(-x1)^2`. There is no
//! implicit multiplication: `x1x2` is an unknown identifier.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

const MAX_DEPTH: usize = 256;

/// A variable reference. State and delayed-state indices are zero based
/// internally and printed one based (`x1` is `X(0)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    X(usize),
    Y(usize),
    S,
    T,
    Lambda,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(i) => write!(f, "x{}", i + 1),
            Var::Y(i) => write!(f, "y{}", i + 1),
            Var::S => f.write_str("s"),
            Var::T => f.write_str("t"),
            Var::Lambda => f.write_str("lambda"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Exp,
    Ln,
    Abs,
    Pow,
    Min,
    Max,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "abs" => Func::Abs,
            "pow" => Func::Pow,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Abs => "abs",
            Func::Pow => "pow",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Pow | Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

/// Expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    Empty,
    UnknownIdentifier(String),
    UnbalancedParens,
    BadNumber,
    ArityMismatch {
        func: &'static str,
        expected: usize,
        found: usize,
    },
    UnexpectedToken,
    UnexpectedEnd,
    NestingTooDeep,
}

/// Parse failure with the byte offset into the source and the set of tokens
/// that would have been accepted there.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{kind} at offset {offset} (expected one of: {})", expected.join(", "))]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
    pub expected: Vec<&'static str>,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Empty => f.write_str("empty expression"),
            ParseErrorKind::UnknownIdentifier(name) => write!(f, "unknown identifier `{name}`"),
            ParseErrorKind::UnbalancedParens => f.write_str("unbalanced parentheses"),
            ParseErrorKind::BadNumber => f.write_str("malformed number"),
            ParseErrorKind::ArityMismatch {
                func,
                expected,
                found,
            } => write!(f, "`{func}` takes {expected} argument(s), got {found}"),
            ParseErrorKind::UnexpectedToken => f.write_str("unexpected token"),
            ParseErrorKind::UnexpectedEnd => f.write_str("unexpected end of input"),
            ParseErrorKind::NestingTooDeep => f.write_str("expression nested too deeply"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("domain error in `{op}` at argument {value}")]
    Domain { op: &'static str, value: f64 },
    #[error("variable `{0}` is not bound")]
    UnboundVariable(Var),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum DiffError {
    #[error("`{0}` is not differentiable")]
    NonDifferentiablePrimitive(&'static str),
}

/// Variable bindings for evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Env<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub s: Option<f64>,
    pub t: Option<f64>,
    pub lambda: Option<f64>,
}

impl<'a> Env<'a> {
    pub fn state(x: &'a [f64]) -> Self {
        Env {
            x,
            ..Env::default()
        }
    }

    pub fn delayed(x: &'a [f64], y: &'a [f64]) -> Self {
        Env {
            x,
            y,
            ..Env::default()
        }
    }

    pub fn s(s: f64) -> Self {
        Env {
            s: Some(s),
            ..Env::default()
        }
    }

    pub fn t(t: f64) -> Self {
        Env {
            t: Some(t),
            ..Env::default()
        }
    }

    fn lookup(&self, var: Var) -> Result<f64, EvalError> {
        let v = match var {
            Var::X(i) => self.x.get(i).copied(),
            Var::Y(i) => self.y.get(i).copied(),
            Var::S => self.s,
            Var::T => self.t,
            Var::Lambda => self.lambda,
        };
        v.ok_or(EvalError::UnboundVariable(var))
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next_token(&mut self) -> Result<(Tok, usize), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = bytes.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        let single = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            self.pos += 1;
            return Ok((tok, start));
        }
        if c.is_ascii_digit() || c == b'.' {
            let mut end = self.pos;
            while end < bytes.len() {
                let b = bytes[end];
                let exp_sign = (b == b'+' || b == b'-')
                    && end > start
                    && matches!(bytes[end - 1], b'e' | b'E');
                if b.is_ascii_digit() || b == b'.' || b == b'e' || b == b'E' || exp_sign {
                    end += 1;
                } else {
                    break;
                }
            }
            self.pos = end;
            let text = &self.src[start..end];
            return match text.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok((Tok::Num(v), start)),
                _ => Err(ParseError {
                    kind: ParseErrorKind::BadNumber,
                    offset: start,
                    expected: Vec::new(),
                }),
            };
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut end = self.pos;
            while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                end += 1;
            }
            self.pos = end;
            return Ok((Tok::Ident(self.src[start..end].to_string()), start));
        }
        Err(ParseError {
            kind: ParseErrorKind::UnexpectedToken,
            offset: start,
            expected: Vec::new(),
        })
    }
}

// ---------------------------------------------------------------------------
// Parser

const EXPECT_OPERAND: &[&str] = &["number", "variable", "function", "(", "-"];
const EXPECT_OPERATOR: &[&str] = &["+", "-", "*", "/", "^", "end of input"];

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    offset: usize,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut lexer = Lexer { src, pos: 0 };
        let (tok, offset) = lexer.next_token()?;
        Ok(Parser {
            lexer,
            tok,
            offset,
            depth: 0,
        })
    }

    fn bump(&mut self) -> Result<(), ParseError> {
        let (tok, offset) = self.lexer.next_token()?;
        self.tok = tok;
        self.offset = offset;
        Ok(())
    }

    fn error(&self, kind: ParseErrorKind, expected: &[&'static str]) -> ParseError {
        ParseError {
            kind,
            offset: self.offset,
            expected: expected.to_vec(),
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error(ParseErrorKind::NestingTooDeep, &[]));
        }
        Ok(())
    }

    // Each parse_* returns the tree and its height so that left-deep chains
    // (`1+1+...`) are bounded as well as nested parentheses.
    fn parse_expr(&mut self) -> Result<(Expr, usize), ParseError> {
        self.enter()?;
        let (mut lhs, mut h) = self.parse_term()?;
        loop {
            let op = match self.tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump()?;
            let (rhs, hr) = self.parse_term()?;
            h = h.max(hr) + 1;
            if h > MAX_DEPTH {
                return Err(self.error(ParseErrorKind::NestingTooDeep, &[]));
            }
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        self.depth -= 1;
        Ok((lhs, h))
    }

    fn parse_term(&mut self) -> Result<(Expr, usize), ParseError> {
        let (mut lhs, mut h) = self.parse_power()?;
        loop {
            let op = match self.tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.bump()?;
            let (rhs, hr) = self.parse_power()?;
            h = h.max(hr) + 1;
            if h > MAX_DEPTH {
                return Err(self.error(ParseErrorKind::NestingTooDeep, &[]));
            }
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok((lhs, h))
    }

    fn parse_power(&mut self) -> Result<(Expr, usize), ParseError> {
        self.enter()?;
        let (base, hb) = self.parse_unary()?;
        let out = if self.tok == Tok::Caret {
            self.bump()?;
            let (exp, he) = self.parse_power()?;
            (
                Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)),
                hb.max(he) + 1,
            )
        } else {
            (base, hb)
        };
        self.depth -= 1;
        Ok(out)
    }

    fn parse_unary(&mut self) -> Result<(Expr, usize), ParseError> {
        if self.tok == Tok::Minus {
            self.enter()?;
            self.bump()?;
            let (inner, h) = self.parse_unary()?;
            self.depth -= 1;
            return Ok((Expr::Neg(Box::new(inner)), h + 1));
        }
        self.parse_primary()
    }

    fn parse_primary(&mut self) -> Result<(Expr, usize), ParseError> {
        match core::mem::replace(&mut self.tok, Tok::End) {
            Tok::Num(v) => {
                self.bump()?;
                Ok((Expr::Num(v), 1))
            }
            Tok::LParen => {
                self.bump()?;
                let inner = self.parse_expr()?;
                self.expect_close()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let start = self.offset;
                self.bump()?;
                if let Some(func) = Func::from_name(&name) {
                    return self.parse_call(func, start);
                }
                match parse_variable(&name) {
                    Some(v) => Ok((Expr::Var(v), 1)),
                    None => Err(ParseError {
                        kind: ParseErrorKind::UnknownIdentifier(name),
                        offset: start,
                        expected: EXPECT_OPERAND.to_vec(),
                    }),
                }
            }
            Tok::End => Err(self.error(ParseErrorKind::UnexpectedEnd, EXPECT_OPERAND)),
            Tok::RParen => Err(self.error(ParseErrorKind::UnbalancedParens, EXPECT_OPERAND)),
            other => {
                self.tok = other;
                Err(self.error(ParseErrorKind::UnexpectedToken, EXPECT_OPERAND))
            }
        }
    }

    fn parse_call(&mut self, func: Func, start: usize) -> Result<(Expr, usize), ParseError> {
        if self.tok != Tok::LParen {
            return Err(self.error(ParseErrorKind::UnexpectedToken, &["("]));
        }
        self.bump()?;
        let mut args = Vec::new();
        let mut h = 0;
        loop {
            let (arg, ha) = self.parse_expr()?;
            h = h.max(ha);
            args.push(arg);
            if self.tok == Tok::Comma {
                self.bump()?;
            } else {
                break;
            }
        }
        self.expect_close()?;
        if args.len() != func.arity() {
            return Err(ParseError {
                kind: ParseErrorKind::ArityMismatch {
                    func: func.name(),
                    expected: func.arity(),
                    found: args.len(),
                },
                offset: start,
                expected: Vec::new(),
            });
        }
        Ok((Expr::Call(func, args), h + 1))
    }

    fn expect_close(&mut self) -> Result<(), ParseError> {
        match self.tok {
            Tok::RParen => self.bump(),
            Tok::End => Err(self.error(ParseErrorKind::UnbalancedParens, &[")"])),
            _ => Err(self.error(
                ParseErrorKind::UnexpectedToken,
                &[")", ",", "+", "-", "*", "/", "^"],
            )),
        }
    }
}

fn parse_variable(name: &str) -> Option<Var> {
    match name {
        "s" => return Some(Var::S),
        "t" => return Some(Var::T),
        "lambda" => return Some(Var::Lambda),
        _ => {}
    }
    let (head, digits) = name.split_at(1);
    if digits.is_empty()
        || !digits.bytes().all(|b| b.is_ascii_digit())
        || digits.starts_with('0')
    {
        return None;
    }
    let idx: usize = digits.parse().ok()?;
    match head {
        "x" => Some(Var::X(idx - 1)),
        "y" => Some(Var::Y(idx - 1)),
        _ => None,
    }
}

/// Parse an expression.
pub fn parse(source: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(source)?;
    if p.tok == Tok::End {
        return Err(p.error(ParseErrorKind::Empty, EXPECT_OPERAND));
    }
    let (expr, _) = p.parse_expr()?;
    match p.tok {
        Tok::End => Ok(expr),
        Tok::RParen => Err(p.error(ParseErrorKind::UnbalancedParens, EXPECT_OPERATOR)),
        _ => Err(p.error(ParseErrorKind::UnexpectedToken, EXPECT_OPERATOR)),
    }
}

impl core::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

// ---------------------------------------------------------------------------
// Evaluation

fn power(base: f64, exp: f64) -> Result<f64, EvalError> {
    if base == 0.0 && exp < 0.0 {
        return Err(EvalError::Domain {
            op: "^",
            value: base,
        });
    }
    if exp.fract() == 0.0 && exp.abs() <= i32::MAX as f64 {
        return Ok(base.powi(exp as i32));
    }
    if base < 0.0 {
        return Err(EvalError::Domain {
            op: "^",
            value: base,
        });
    }
    Ok(base.powf(exp))
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    /// Evaluate in double precision.
    pub fn eval(&self, env: &Env<'_>) -> Result<f64, EvalError> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(v) => env.lookup(*v),
            Expr::Neg(a) => Ok(-a.eval(env)?),
            Expr::Bin(op, a, b) => {
                let a = a.eval(env)?;
                let b = b.eval(env)?;
                match op {
                    BinOp::Add => Ok(a + b),
                    BinOp::Sub => Ok(a - b),
                    BinOp::Mul => Ok(a * b),
                    BinOp::Div => {
                        if b == 0.0 {
                            Err(EvalError::Domain { op: "/", value: b })
                        } else {
                            Ok(a / b)
                        }
                    }
                    BinOp::Pow => power(a, b),
                }
            }
            Expr::Call(func, args) => {
                let a = args[0].eval(env)?;
                match func {
                    Func::Sqrt if a < 0.0 => Err(EvalError::Domain {
                        op: "sqrt",
                        value: a,
                    }),
                    Func::Sqrt => Ok(a.sqrt()),
                    Func::Exp => Ok(a.exp()),
                    Func::Ln if a <= 0.0 => Err(EvalError::Domain { op: "ln", value: a }),
                    Func::Ln => Ok(a.ln()),
                    Func::Abs => Ok(a.abs()),
                    Func::Pow => power(a, args[1].eval(env)?),
                    Func::Min => Ok(a.min(args[1].eval(env)?)),
                    Func::Max => Ok(a.max(args[1].eval(env)?)),
                }
            }
        }
    }

    /// Visit every variable occurrence.
    pub fn for_each_var(&self, f: &mut impl FnMut(Var)) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => f(*v),
            Expr::Neg(a) => a.for_each_var(f),
            Expr::Bin(_, a, b) => {
                a.for_each_var(f);
                b.for_each_var(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.for_each_var(f)),
        }
    }

    pub fn mentions(&self, var: Var) -> bool {
        let mut hit = false;
        self.for_each_var(&mut |v| hit |= v == var);
        hit
    }

    /// True if no abs/min/max call appears.
    pub fn is_smooth(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Var(_) => true,
            Expr::Neg(a) => a.is_smooth(),
            Expr::Bin(_, a, b) => a.is_smooth() && b.is_smooth(),
            Expr::Call(Func::Abs | Func::Min | Func::Max, _) => false,
            Expr::Call(_, args) => args.iter().all(Expr::is_smooth),
        }
    }

    /// Replace variables for which `map` returns `Some`.
    pub fn substitute(&self, map: &impl Fn(Var) -> Option<Expr>) -> Expr {
        match self {
            Expr::Num(v) => Expr::Num(*v),
            Expr::Var(v) => map(*v).unwrap_or(Expr::Var(*v)),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(map))),
            Expr::Bin(op, a, b) => Expr::Bin(
                *op,
                Box::new(a.substitute(map)),
                Box::new(b.substitute(map)),
            ),
            Expr::Call(func, args) => {
                Expr::Call(*func, args.iter().map(|a| a.substitute(map)).collect())
            }
        }
    }

    /// Symbolic partial derivative with light constant folding.
    pub fn differentiate(&self, var: Var) -> Result<Expr, DiffError> {
        Ok(match self {
            Expr::Num(_) => Expr::Num(0.0),
            Expr::Var(v) => Expr::Num(if *v == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.differentiate(var)?),
            Expr::Bin(op, a, b) => {
                let da = a.differentiate(var)?;
                let db = b.differentiate(var)?;
                let (a, b) = (a.as_ref().clone(), b.as_ref().clone());
                match op {
                    BinOp::Add => add(da, db),
                    BinOp::Sub => sub(da, db),
                    BinOp::Mul => add(mul(da, b), mul(a, db)),
                    // (a/b)' = (a' b - a b') / b^2
                    BinOp::Div => div(
                        sub(mul(da, b.clone()), mul(a, db)),
                        pow(b, Expr::Num(2.0)),
                    ),
                    BinOp::Pow => diff_pow(a, b, da, db),
                }
            }
            Expr::Call(func, args) => {
                let a = args[0].clone();
                let da = args[0].differentiate_checked(*func, var)?;
                match func {
                    Func::Sqrt => div(da, mul(Expr::Num(2.0), call1(Func::Sqrt, a))),
                    Func::Exp => mul(call1(Func::Exp, a), da),
                    Func::Ln => div(da, a),
                    Func::Pow => {
                        let b = args[1].clone();
                        let db = args[1].differentiate(var)?;
                        diff_pow(a, b, da, db)
                    }
                    Func::Abs | Func::Min | Func::Max => unreachable!(),
                }
            }
        })
    }

    fn differentiate_checked(&self, func: Func, var: Var) -> Result<Expr, DiffError> {
        match func {
            Func::Abs | Func::Min | Func::Max => {
                Err(DiffError::NonDifferentiablePrimitive(func.name()))
            }
            _ => self.differentiate(var),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Bin(BinOp::Pow, ..) => 3,
            Expr::Neg(_) => 4,
            Expr::Num(v) if v.is_sign_negative() => 4,
            _ => 5,
        }
    }
}

fn diff_pow(a: Expr, b: Expr, da: Expr, db: Expr) -> Expr {
    let db_zero = matches!(db, Expr::Num(z) if z == 0.0);
    let da_zero = matches!(da, Expr::Num(z) if z == 0.0);
    if db_zero {
        // b * a^(b-1) * a'
        let exp = sub(b.clone(), Expr::Num(1.0));
        return mul(mul(b, pow(a, exp)), da);
    }
    let whole = pow(a.clone(), b.clone());
    if da_zero {
        return mul(mul(whole, call1(Func::Ln, a)), db);
    }
    // a^b * (b' ln a + b a'/a)
    mul(
        whole,
        add(mul(db, call1(Func::Ln, a.clone())), div(mul(b, da), a)),
    )
}

fn call1(func: Func, a: Expr) -> Expr {
    Expr::Call(func, alloc::vec![a])
}

fn as_num(e: &Expr) -> Option<f64> {
    match e {
        Expr::Num(v) => Some(*v),
        _ => None,
    }
}

fn folded(v: f64, fallback: impl FnOnce() -> Expr) -> Expr {
    if v.is_finite() {
        Expr::Num(v)
    } else {
        fallback()
    }
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => folded(x + y, || Expr::Bin(BinOp::Add, Box::new(a), Box::new(b))),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => Expr::Bin(BinOp::Add, Box::new(a), Box::new(b)),
    }
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => folded(x - y, || Expr::Bin(BinOp::Sub, Box::new(a), Box::new(b))),
        (_, Some(0.0)) => a,
        (Some(0.0), _) => neg(b),
        _ => Expr::Bin(BinOp::Sub, Box::new(a), Box::new(b)),
    }
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => folded(x * y, || Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b))),
        (Some(0.0), _) | (_, Some(0.0)) => Expr::Num(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        _ => Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b)),
    }
}

pub(crate) fn div(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) if y != 0.0 => {
            folded(x / y, || Expr::Bin(BinOp::Div, Box::new(a), Box::new(b)))
        }
        (Some(0.0), _) => Expr::Num(0.0),
        (_, Some(1.0)) => a,
        _ => Expr::Bin(BinOp::Div, Box::new(a), Box::new(b)),
    }
}

pub(crate) fn pow(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (_, Some(1.0)) => a,
        (_, Some(0.0)) => Expr::Num(1.0),
        (Some(x), Some(y)) => match power(x, y) {
            Ok(v) if v.is_finite() => Expr::Num(v),
            _ => Expr::Bin(BinOp::Pow, Box::new(a), Box::new(b)),
        },
        _ => Expr::Bin(BinOp::Pow, Box::new(a), Box::new(b)),
    }
}

pub(crate) fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

// ---------------------------------------------------------------------------
// Printing

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_operand(f, a, a.precedence() < 4)
            }
            Expr::Bin(op, a, b) => {
                let p = self.precedence();
                let right_assoc = *op == BinOp::Pow;
                let left_parens = a.precedence() < p || (right_assoc && a.precedence() == p);
                let right_parens = b.precedence() < p || (!right_assoc && b.precedence() == p);
                write_operand(f, a, left_parens)?;
                f.write_str(match op {
                    BinOp::Add => " + ",
                    BinOp::Sub => " - ",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                })?;
                write_operand(f, b, right_parens)
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

// ---------------------------------------------------------------------------
// Systems

/// Which variables the component expressions of a system may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariableRoles {
    /// `x1..xn` only.
    State,
    /// `x1..xn` and the delayed state `y1..yn`.
    StateAndDelayed,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SystemError {
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("expected {expected} component expressions, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("component {component}: variable `{var}` is not allowed here")]
    InvalidVariable { component: usize, var: Var },
    #[error("component {component}: {source}")]
    Parse {
        component: usize,
        #[source]
        source: ParseError,
    },
}

/// `n` component expressions over a declared set of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprSystem {
    dim: usize,
    components: Vec<Expr>,
    roles: VariableRoles,
}

impl ExprSystem {
    pub fn new(
        dim: usize,
        components: Vec<Expr>,
        roles: VariableRoles,
    ) -> Result<Self, SystemError> {
        if dim == 0 {
            return Err(SystemError::ZeroDimension);
        }
        if components.len() != dim {
            return Err(SystemError::DimensionMismatch {
                expected: dim,
                found: components.len(),
            });
        }
        for (component, e) in components.iter().enumerate() {
            let mut bad = None;
            e.for_each_var(&mut |v| {
                let ok = match v {
                    Var::X(i) => i < dim,
                    Var::Y(i) => i < dim && roles == VariableRoles::StateAndDelayed,
                    _ => false,
                };
                if !ok && bad.is_none() {
                    bad = Some(v);
                }
            });
            if let Some(var) = bad {
                return Err(SystemError::InvalidVariable { component, var });
            }
        }
        Ok(ExprSystem {
            dim,
            components,
            roles,
        })
    }

    pub fn parse<S: AsRef<str>>(
        dim: usize,
        sources: &[S],
        roles: VariableRoles,
    ) -> Result<Self, SystemError> {
        let components = sources
            .iter()
            .enumerate()
            .map(|(component, s)| {
                parse(s.as_ref()).map_err(|source| SystemError::Parse { component, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(dim, components, roles)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn roles(&self) -> VariableRoles {
        self.roles
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    fn ev(src: &str, x: &[f64]) -> f64 {
        parse(src).unwrap().eval(&Env::state(x)).unwrap()
    }

    #[test]
    fn example_field_component_evaluates() {
        assert_eq!(ev("-5*x1 + x1*x2^2", &[1.0, 1.0]), -4.0);
        assert_eq!(ev("x1 - 2*x2^2", &[4.0, 2.0]), -4.0);
        assert_eq!(ev("0", &[]), 0.0);
        let e = parse("sqrt(s)").unwrap();
        assert_eq!(e.eval(&Env::s(4.0)).unwrap(), 2.0);
    }

    #[test]
    fn parses_structure() {
        let e = parse("-5*x1 + x1*x2^2").unwrap();
        let expected = Expr::Bin(
            BinOp::Add,
            Box::new(Expr::Bin(
                BinOp::Mul,
                Box::new(Expr::Neg(Box::new(Expr::Num(5.0)))),
                Box::new(Expr::Var(Var::X(0))),
            )),
            Box::new(Expr::Bin(
                BinOp::Mul,
                Box::new(Expr::Var(Var::X(0))),
                Box::new(Expr::Bin(
                    BinOp::Pow,
                    Box::new(Expr::Var(Var::X(1))),
                    Box::new(Expr::Num(2.0)),
                )),
            )),
        );
        assert_eq!(e, expected);
        assert_eq!(parse("0").unwrap(), Expr::Num(0.0));
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("2^3^2", &[]), 512.0);
        assert_eq!(ev("-2^2", &[]), 4.0);
        assert_eq!(ev("2*3+4", &[]), 10.0);
        assert_eq!(ev("8/4/2", &[]), 1.0);
        assert_eq!(ev("8-4-2", &[]), 2.0);
        assert_eq!(ev("2^-1", &[]), 0.5);
        assert_eq!(ev("1.5e2 + .5", &[]), 150.5);
        assert_eq!(ev("min(3, x1) + max(1, 2)*abs(-1)", &[1.0]), 3.0);
        assert_eq!(ev("pow(2, 10)", &[]), 1024.0);
    }

    #[test]
    fn unbalanced_parens_reports_offset() {
        let err = parse("x1*(x2").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnbalancedParens);
        assert_eq!(err.offset, 6);
        assert_eq!(err.expected, vec![")"]);
        let err = parse("x1)").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnbalancedParens);
        assert_eq!(err.offset, 2);
    }

    #[test]
    fn error_kinds() {
        assert!(matches!(
            parse("x1x2").unwrap_err().kind,
            ParseErrorKind::UnknownIdentifier(ref n) if n == "x1x2"
        ));
        assert!(matches!(
            parse("foo + 1").unwrap_err().kind,
            ParseErrorKind::UnknownIdentifier(_)
        ));
        assert!(matches!(
            parse("x0").unwrap_err().kind,
            ParseErrorKind::UnknownIdentifier(_)
        ));
        assert_eq!(parse("1e").unwrap_err().kind, ParseErrorKind::BadNumber);
        assert_eq!(parse("1.2.3").unwrap_err().kind, ParseErrorKind::BadNumber);
        let err = parse("sqrt(1, 2)").unwrap_err();
        assert_eq!(
            err.kind,
            ParseErrorKind::ArityMismatch {
                func: "sqrt",
                expected: 1,
                found: 2
            }
        );
        assert_eq!(err.offset, 0);
        assert_eq!(parse("").unwrap_err().kind, ParseErrorKind::Empty);
        assert_eq!(parse("1 +").unwrap_err().kind, ParseErrorKind::UnexpectedEnd);
        assert_eq!(parse("1 # 2").unwrap_err().kind, ParseErrorKind::UnexpectedToken);
        assert_eq!(parse("x1 x2").unwrap_err().kind, ParseErrorKind::UnexpectedToken);
    }

    #[test]
    fn deep_nesting_is_rejected_not_overflowed() {
        let deep = format!("{}1{}", "(".repeat(10_000), ")".repeat(10_000));
        assert_eq!(parse(&deep).unwrap_err().kind, ParseErrorKind::NestingTooDeep);
        let long = "1+".repeat(10_000) + "1";
        assert_eq!(parse(&long).unwrap_err().kind, ParseErrorKind::NestingTooDeep);
        let minus = "-".repeat(10_000) + "1";
        assert_eq!(parse(&minus).unwrap_err().kind, ParseErrorKind::NestingTooDeep);
    }

    #[test]
    fn domain_and_binding_errors() {
        let env = Env::state(&[-1.0]);
        assert!(matches!(
            parse("sqrt(x1)").unwrap().eval(&env),
            Err(EvalError::Domain { op: "sqrt", .. })
        ));
        assert!(matches!(
            parse("ln(0)").unwrap().eval(&env),
            Err(EvalError::Domain { op: "ln", .. })
        ));
        assert!(matches!(
            parse("1/(x1+1)").unwrap().eval(&env),
            Err(EvalError::Domain { op: "/", .. })
        ));
        assert!(matches!(
            parse("x1^0.5").unwrap().eval(&env),
            Err(EvalError::Domain { op: "^", .. })
        ));
        assert_eq!(
            parse("x2").unwrap().eval(&env),
            Err(EvalError::UnboundVariable(Var::X(1)))
        );
        assert_eq!(
            parse("t").unwrap().eval(&env),
            Err(EvalError::UnboundVariable(Var::T))
        );
    }

    #[test]
    fn derivatives() {
        let e = parse("-5*x1 + x1*x2^2").unwrap();
        let d = e.differentiate(Var::X(1)).unwrap();
        for &(a, b) in &[(1.0, 1.0), (3.0, -2.0), (0.5, 4.0)] {
            assert_eq!(d.eval(&Env::state(&[a, b])).unwrap(), 2.0 * a * b);
        }
        assert_eq!(
            parse("x2").unwrap().differentiate(Var::X(0)).unwrap(),
            Expr::Num(0.0)
        );
        assert_eq!(
            parse("x1 - 2*x2^2").unwrap().differentiate(Var::X(0)).unwrap(),
            Expr::Num(1.0)
        );
        assert_eq!(
            parse("abs(x1)").unwrap().differentiate(Var::X(0)),
            Err(DiffError::NonDifferentiablePrimitive("abs"))
        );
        assert_eq!(
            parse("x2 + max(x1, 0)").unwrap().differentiate(Var::X(1)),
            Err(DiffError::NonDifferentiablePrimitive("max"))
        );
    }

    #[test]
    fn printing_is_minimal_and_reparses() {
        for src in [
            "-5*x1 + x1*x2^2",
            "(x1 + x2)*x1",
            "x1 - (x2 - 1)",
            "(2^3)^2",
            "2^3^2",
            "-(x1 + 1)",
            "x1/(x1^2 + 1)*y1^3",
            "sqrt(s) + pow(s, 2)",
        ] {
            let printed = format!("{}", parse(src).unwrap());
            assert_eq!(printed, src);
        }
    }

    #[test]
    fn system_validation() {
        let ok = ExprSystem::parse(2, &["-x1 + y2", "x1 - x2"], VariableRoles::StateAndDelayed);
        assert!(ok.is_ok());
        assert!(matches!(
            ExprSystem::parse(2, &["-x1 + y2", "x1"], VariableRoles::State),
            Err(SystemError::InvalidVariable { component: 0, var: Var::Y(1) })
        ));
        assert!(matches!(
            ExprSystem::parse(2, &["x3", "x1"], VariableRoles::State),
            Err(SystemError::InvalidVariable { .. })
        ));
        assert!(matches!(
            ExprSystem::parse(2, &["x1"], VariableRoles::State),
            Err(SystemError::DimensionMismatch { expected: 2, found: 1 })
        ));
        assert!(matches!(
            ExprSystem::parse(1, &["s*x1"], VariableRoles::State),
            Err(SystemError::InvalidVariable { var: Var::S, .. })
        ));
    }
}
