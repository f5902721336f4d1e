//! Scalar field expressions: AST, parser, printer and jet evaluation.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := unary (('*' | '/') unary)*
//! unary    := '-' unary | factor
//! factor   := base ('^' exponent)?
//! exponent := rational | '(' rational ')'
//! rational := '-'? digits ('/' digits)?
//! base     := number | 'x' digits | 'pi' | 'e' | func '(' expr ')' | '(' expr ')'
//! func     := sin | cos | tan | exp | log | sqrt | atan
//! ```
//!
//! Nodes are reference counted, so a builder may share subtrees; evaluation
//! visits each shared node once per call.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use crate::error::{GeomError, Result};
use crate::jet::{Jet, MAX_ORDER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Atan,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Atan => "atan",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "atan" => Func::Atan,
            _ => return None,
        })
    }
}

/// Reduced fraction with positive denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rational {
    num: i64,
    den: i64,
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Option<Rational> {
        if den == 0 {
            return None;
        }
        fn gcd(a: i64, b: i64) -> i64 {
            if b == 0 {
                a.abs()
            } else {
                gcd(b, a % b)
            }
        }
        let g = gcd(num, den).max(1);
        let s = if den < 0 { -1 } else { 1 };
        Some(Rational { num: s * num / g, den: s * den / g })
    }

    pub fn integer(n: i64) -> Rational {
        Rational { num: n, den: 1 }
    }

    pub fn num(self) -> i64 {
        self.num
    }

    pub fn den(self) -> i64 {
        self.den
    }

    pub fn is_integer(self) -> bool {
        self.den == 1
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.den, self.num < 0) {
            (1, false) => write!(f, "{}", self.num),
            (1, true) => write!(f, "({})", self.num),
            _ => write!(f, "({}/{})", self.num, self.den),
        }
    }
}

#[derive(Debug)]
pub enum Node {
    Const(f64),
    /// Zero-based coordinate index.
    Var(usize),
    Neg(Expr),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Pow(Expr, Rational),
    Func(Func, Expr),
}

/// Shared handle to an expression tree.
#[derive(Debug, Clone)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(v: f64) -> Expr {
        Expr(Arc::new(Node::Const(v)))
    }

    /// Coordinate `x_{index+1}`.
    pub fn var(index: usize) -> Expr {
        Expr(Arc::new(Node::Var(index)))
    }

    pub fn func(f: Func, arg: &Expr) -> Expr {
        Expr(Arc::new(Node::Func(f, arg.clone())))
    }

    pub fn sin(&self) -> Expr {
        Expr::func(Func::Sin, self)
    }
    pub fn cos(&self) -> Expr {
        Expr::func(Func::Cos, self)
    }
    pub fn tan(&self) -> Expr {
        Expr::func(Func::Tan, self)
    }
    pub fn exp(&self) -> Expr {
        Expr::func(Func::Exp, self)
    }
    pub fn log(&self) -> Expr {
        Expr::func(Func::Log, self)
    }
    pub fn sqrt(&self) -> Expr {
        Expr::func(Func::Sqrt, self)
    }
    pub fn atan(&self) -> Expr {
        Expr::func(Func::Atan, self)
    }

    pub fn powi(&self, n: i64) -> Expr {
        Expr(Arc::new(Node::Pow(self.clone(), Rational::integer(n))))
    }

    pub fn pow(&self, r: Rational) -> Expr {
        Expr(Arc::new(Node::Pow(self.clone(), r)))
    }

    /// Constant value if the node is a literal.
    pub fn as_constant(&self) -> Option<f64> {
        match self.node() {
            Node::Const(v) => Some(*v),
            _ => None,
        }
    }

    /// Largest zero-based variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self.node() {
            Node::Const(_) => None,
            Node::Var(i) => Some(*i),
            Node::Neg(a) | Node::Pow(a, _) | Node::Func(_, a) => a.max_var(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
        }
    }

    /// Truncated Taylor expansion at `point` in `point.len()` variables.
    pub fn eval_jet(&self, point: &[f64], order: usize) -> Result<Jet> {
        if order > MAX_ORDER {
            return Err(GeomError::OrderOverflow(order));
        }
        if let Some(m) = self.max_var() {
            if m >= point.len() {
                return Err(GeomError::VariableOutOfRange { index: m + 1, dim: point.len() });
            }
        }
        let mut memo = HashMap::new();
        eval_node(self, point, order, &mut memo)
    }

    /// Value at `point`.
    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        // constant expressions carry no variables; evaluate them in a 1-variable layout
        let point = if point.is_empty() { &[0.0][..] } else { point };
        Ok(self.eval_jet(point, 0)?.value())
    }
}

fn domain(msg: impl Into<String>) -> GeomError {
    GeomError::Domain(msg.into())
}

fn eval_node(e: &Expr, p: &[f64], order: usize, memo: &mut HashMap<usize, Jet>) -> Result<Jet> {
    let shared = Arc::strong_count(&e.0) > 1;
    let key = Arc::as_ptr(&e.0) as usize;
    if shared {
        if let Some(j) = memo.get(&key) {
            return Ok(j.clone());
        }
    }
    let n = p.len();
    let out = match e.node() {
        Node::Const(v) => Jet::constant(n, order, *v),
        Node::Var(i) => Jet::variable(n, order, *i, p[*i]),
        Node::Neg(a) => -eval_node(a, p, order, memo)?,
        Node::Add(a, b) => eval_node(a, p, order, memo)? + eval_node(b, p, order, memo)?,
        Node::Sub(a, b) => eval_node(a, p, order, memo)? - eval_node(b, p, order, memo)?,
        Node::Mul(a, b) => eval_node(a, p, order, memo)? * eval_node(b, p, order, memo)?,
        Node::Div(a, b) => {
            let num = eval_node(a, p, order, memo)?;
            let den = eval_node(b, p, order, memo)?;
            if den.value() == 0.0 {
                return Err(domain(format!("division by zero at {p:?}")));
            }
            num / den
        }
        Node::Pow(a, r) => {
            let base = eval_node(a, p, order, memo)?;
            let v = base.value();
            if r.is_integer() {
                if r.num() < 0 && v == 0.0 {
                    return Err(domain(format!("negative power of zero at {p:?}")));
                }
                base.powi(r.num())
            } else {
                if v < 0.0 || (v == 0.0 && (order > 0 || r.num() < 0)) {
                    return Err(domain(format!("fractional power of {v} at {p:?}")));
                }
                if v == 0.0 {
                    Jet::constant(n, order, 0.0)
                } else {
                    base.powf(r.to_f64())
                }
            }
        }
        Node::Func(f, a) => {
            let x = eval_node(a, p, order, memo)?;
            let v = x.value();
            match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Tan => {
                    if v.cos().abs() < 1e-300 {
                        return Err(domain(format!("tan pole at {p:?}")));
                    }
                    x.tan()
                }
                Func::Exp => x.exp(),
                Func::Log => {
                    if v <= 0.0 {
                        return Err(domain(format!("log of {v} at {p:?}")));
                    }
                    x.ln()
                }
                Func::Sqrt => {
                    if v < 0.0 || (v == 0.0 && order > 0) {
                        return Err(domain(format!("sqrt of {v} at {p:?}")));
                    }
                    if v == 0.0 {
                        Jet::constant(n, order, 0.0)
                    } else {
                        x.sqrt()
                    }
                }
                Func::Atan => x.atan(),
            }
        }
    };
    if !out.value().is_finite() {
        return Err(domain(format!("non-finite value at {p:?}")));
    }
    if shared {
        memo.insert(key, out.clone());
    }
    Ok(out)
}

impl fmt::Display for Expr {
    /// Fully parenthesized form that parses back to an equivalent tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    write!(f, "(-{})", -v)
                } else {
                    write!(f, "{v}")
                }
            }
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Add(a, b) => write!(f, "({a}+{b})"),
            Node::Sub(a, b) => write!(f, "({a}-{b})"),
            Node::Mul(a, b) => write!(f, "({a}*{b})"),
            Node::Div(a, b) => write!(f, "({a}/{b})"),
            Node::Pow(a, r) => write!(f, "({a}^{r})"),
            Node::Func(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// Parses `src` into an expression over the coordinates `x1..x{dim}`.
pub fn parse_expression(src: &str, dim: usize) -> Result<Expr> {
    let mut p = Parser { src: src.as_bytes(), pos: 0, dim };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> GeomError {
        GeomError::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = &lhs + &self.term()?;
            } else if self.eat(b'-') {
                lhs = &lhs - &self.term()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = &lhs * &self.unary()?;
            } else if self.eat(b'/') {
                lhs = &lhs / &self.unary()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            Ok(-&self.unary()?)
        } else {
            self.factor()
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.base()?;
        if self.eat(b'^') {
            let r = if self.eat(b'(') {
                let r = self.rational()?;
                self.expect(b')')?;
                r
            } else {
                self.rational()?
            };
            Ok(base.pow(r))
        } else {
            Ok(base)
        }
    }

    fn digits(&mut self) -> Result<i64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected integer"));
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<i64>().map_err(|_| GeomError::Syntax { offset: start, message: "integer too large".into() })
    }

    fn rational(&mut self) -> Result<Rational> {
        let neg = self.eat(b'-');
        let start = self.pos;
        let num = self.digits()?;
        if self.peek() == Some(b'.') {
            return Err(self.error("exponent must be an integer or a fraction"));
        }
        let den = if self.eat(b'/') { self.digits()? } else { 1 };
        let num = if neg { -num } else { num };
        Rational::new(num, den).ok_or(GeomError::Syntax { offset: start, message: "zero denominator".into() })
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && (s[i].is_ascii_digit() || s[i] == b'.') {
            i += 1;
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            if j < s.len() && s[j].is_ascii_digit() {
                while j < s.len() && s[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = std::str::from_utf8(&s[start..i]).unwrap();
        let v: f64 = text
            .parse()
            .map_err(|_| GeomError::Syntax { offset: start, message: format!("malformed number `{text}`") })?;
        self.pos = i;
        Ok(Expr::constant(v))
    }

    fn base(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let ident = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                if let Some(rest) = ident.strip_prefix('x') {
                    if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                        let index: usize = rest.parse().map_err(|_| GeomError::Syntax {
                            offset: start,
                            message: "variable index too large".into(),
                        })?;
                        if index == 0 || index > self.dim {
                            return Err(GeomError::VariableOutOfRange { index, dim: self.dim });
                        }
                        return Ok(Expr::var(index - 1));
                    }
                }
                match ident {
                    "pi" => return Ok(Expr::constant(std::f64::consts::PI)),
                    "e" => return Ok(Expr::constant(std::f64::consts::E)),
                    _ => {}
                }
                match Func::from_name(ident) {
                    Some(f) => {
                        self.expect(b'(')?;
                        let arg = self.expr()?;
                        self.expect(b')')?;
                        Ok(Expr::func(f, &arg))
                    }
                    None => Err(GeomError::UnknownIdentifier { offset: start, name: ident.to_string() }),
                }
            }
            Some(c) => Err(self.error(&format!("unexpected character `{}`", c as char))),
        }
    }
}

macro_rules! expr_binop {
    ($tr:ident, $method:ident, $variant:ident) => {
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr(Arc::new(Node::$variant(self.clone(), rhs.clone())))
            }
        }
        impl $tr<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr(Arc::new(Node::$variant(self, rhs)))
            }
        }
        impl $tr<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr(Arc::new(Node::$variant(self, rhs.clone())))
            }
        }
        impl $tr<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr(Arc::new(Node::$variant(self.clone(), rhs)))
            }
        }
        impl $tr<f64> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr(Arc::new(Node::$variant(self.clone(), Expr::constant(rhs))))
            }
        }
        impl $tr<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr(Arc::new(Node::$variant(self, Expr::constant(rhs))))
            }
        }
        impl $tr<&Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr(Arc::new(Node::$variant(Expr::constant(self), rhs.clone())))
            }
        }
        impl $tr<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr(Arc::new(Node::$variant(Expr::constant(self), rhs)))
            }
        }
    };
}

expr_binop!(Add, add, Add);
expr_binop!(Sub, sub, Sub);
expr_binop!(Mul, mul, Mul);
expr_binop!(Div, div, Div);

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr(Arc::new(Node::Neg(self.clone())))
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr(Arc::new(Node::Neg(self)))
    }
}
