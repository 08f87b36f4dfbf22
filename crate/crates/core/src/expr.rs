//! Closed-form scalar functions: parsing, symbolic differentiation, evaluation.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | base ('^' ['-'] integer)?
//! base   := number | ident | '(' expr ')' | func '(' expr ')'
//! func   := exp | ln | sin | cos | sqrt
//! ident  := x1 … x9 | t
//! ```
//!
//! Identifiers resolve against an ordered variable list supplied by the
//! caller, so `x2` is variable index 1 only if the list says so.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::index::MultiIndex;
use crate::jet::{JetSource, JetValue, Scalar, Taylor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
    Call(Func, Box<Node>),
}

/// Parsed expression together with the names of its variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    root: Node,
    vars: Vec<String>,
}

pub const ALLOWED_IDENTS: [&str; 10] = ["x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8", "x9", "t"];

/// Parse `text` with variables resolved against `vars` (e.g. `["x1", "x2"]`).
pub fn parse(text: &str, vars: &[&str]) -> Result<Expr> {
    for v in vars {
        if !ALLOWED_IDENTS.contains(v) {
            return Err(Error::InvalidInput(format!(
                "variable name `{v}` is not one of x1…x9, t"
            )));
        }
    }
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        vars,
    };
    let root = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(Expr {
        root,
        vars: vars.iter().map(|s| s.to_string()).collect(),
    })
}

/// Default variable names `x1…xn`.
pub fn default_vars(n: usize) -> Vec<&'static str> {
    ALLOWED_IDENTS[..n.min(9)].to_vec()
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a [&'a str],
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Syntax {
            pos: self.pos,
            message: msg.to_string(),
        }
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

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Node::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Node> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.factor()?;
            return Ok(match inner {
                Node::Num(v) => Node::Num(-v),
                other => Node::Neg(Box::new(other)),
            });
        }
        let base = self.base()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let neg = if self.peek() == Some(b'-') {
                self.pos += 1;
                true
            } else {
                false
            };
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.err("expected integer exponent"));
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            let e: i32 = text
                .parse()
                .map_err(|_| self.err("exponent out of range"))?;
            return Ok(Node::Pow(Box::new(base), if neg { -e } else { e }));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Node> {
        match self.peek() {
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
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                if let Some(f) = Func::from_name(name) {
                    self.expect(b'(')?;
                    let arg = self.expr()?;
                    self.expect(b')')?;
                    return Ok(Node::Call(f, Box::new(arg)));
                }
                match self.vars.iter().position(|v| *v == name) {
                    Some(i) => Ok(Node::Var(i)),
                    None => Err(Error::UnknownIdentifier {
                        name: name.to_string(),
                        pos: start,
                    }),
                }
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        // optional exponent part, e.g. 1e-3
        if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Node::Num)
            .map_err(|_| Error::Syntax {
                pos: start,
                message: format!("malformed number `{text}`"),
            })
    }
}

// constant-folding constructors

fn num(v: f64) -> Node {
    Node::Num(v)
}

fn is_num(n: &Node, v: f64) -> bool {
    matches!(n, Node::Num(x) if *x == v)
}

fn add(a: Node, b: Node) -> Node {
    match (&a, &b) {
        (Node::Num(x), Node::Num(y)) => num(x + y),
        _ if is_num(&a, 0.0) => b,
        _ if is_num(&b, 0.0) => a,
        _ => Node::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Node, b: Node) -> Node {
    match (&a, &b) {
        (Node::Num(x), Node::Num(y)) => num(x - y),
        _ if is_num(&b, 0.0) => a,
        _ if is_num(&a, 0.0) => neg(b),
        _ => Node::Sub(Box::new(a), Box::new(b)),
    }
}

fn neg(a: Node) -> Node {
    match a {
        Node::Num(x) => num(-x),
        Node::Neg(inner) => *inner,
        other => Node::Neg(Box::new(other)),
    }
}

fn mul(a: Node, b: Node) -> Node {
    match (&a, &b) {
        (Node::Num(x), Node::Num(y)) => num(x * y),
        _ if is_num(&a, 0.0) || is_num(&b, 0.0) => num(0.0),
        _ if is_num(&a, 1.0) => b,
        _ if is_num(&b, 1.0) => a,
        _ => Node::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Node, b: Node) -> Node {
    match (&a, &b) {
        (Node::Num(x), Node::Num(y)) if *y != 0.0 => num(x / y),
        _ if is_num(&a, 0.0) => num(0.0),
        _ if is_num(&b, 1.0) => a,
        _ => Node::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Node, e: i32) -> Node {
    match (&a, e) {
        (_, 0) => num(1.0),
        (_, 1) => a,
        (Node::Num(x), _) => num(x.powi(e)),
        _ => Node::Pow(Box::new(a), e),
    }
}

fn call(f: Func, a: Node) -> Node {
    Node::Call(f, Box::new(a))
}

fn diff_node(n: &Node, var: usize) -> Node {
    match n {
        Node::Num(_) => num(0.0),
        Node::Var(i) => num(if *i == var { 1.0 } else { 0.0 }),
        Node::Neg(a) => neg(diff_node(a, var)),
        Node::Add(a, b) => add(diff_node(a, var), diff_node(b, var)),
        Node::Sub(a, b) => sub(diff_node(a, var), diff_node(b, var)),
        Node::Mul(a, b) => add(
            mul(diff_node(a, var), (**b).clone()),
            mul((**a).clone(), diff_node(b, var)),
        ),
        Node::Div(a, b) => {
            // (a'b - ab') / b^2
            let num_part = sub(
                mul(diff_node(a, var), (**b).clone()),
                mul((**a).clone(), diff_node(b, var)),
            );
            div(num_part, pow((**b).clone(), 2))
        }
        Node::Pow(a, e) => mul(
            mul(num(f64::from(*e)), pow((**a).clone(), e - 1)),
            diff_node(a, var),
        ),
        Node::Call(f, a) => {
            let inner = diff_node(a, var);
            let outer = match f {
                Func::Exp => call(Func::Exp, (**a).clone()),
                Func::Ln => div(num(1.0), (**a).clone()),
                Func::Sin => call(Func::Cos, (**a).clone()),
                Func::Cos => neg(call(Func::Sin, (**a).clone())),
                Func::Sqrt => div(num(0.5), call(Func::Sqrt, (**a).clone())),
            };
            mul(outer, inner)
        }
    }
}

fn eval_node(n: &Node, x: &[f64]) -> Result<f64> {
    Ok(match n {
        Node::Num(v) => *v,
        Node::Var(i) => x[*i],
        Node::Neg(a) => -eval_node(a, x)?,
        Node::Add(a, b) => eval_node(a, x)? + eval_node(b, x)?,
        Node::Sub(a, b) => eval_node(a, x)? - eval_node(b, x)?,
        Node::Mul(a, b) => eval_node(a, x)? * eval_node(b, x)?,
        Node::Div(a, b) => {
            let d = eval_node(b, x)?;
            if d == 0.0 {
                return Err(singular("division by zero", x));
            }
            eval_node(a, x)? / d
        }
        Node::Pow(a, e) => {
            let v = eval_node(a, x)?;
            if v == 0.0 && *e < 0 {
                return Err(singular("division by zero", x));
            }
            v.powi(*e)
        }
        Node::Call(f, a) => {
            let v = eval_node(a, x)?;
            match f {
                Func::Exp => v.exp(),
                Func::Ln => {
                    if v <= 0.0 {
                        return Err(singular("ln of nonpositive argument", x));
                    }
                    v.ln()
                }
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Sqrt => {
                    if v < 0.0 {
                        return Err(singular("sqrt of negative argument", x));
                    }
                    v.sqrt()
                }
            }
        }
    })
}

fn singular(what: &'static str, x: &[f64]) -> Error {
    Error::Singular {
        what,
        point: x.to_vec(),
    }
}

fn taylor_node<T: Scalar>(n: &Node, x: &[f64], bound: &MultiIndex) -> Result<Taylor<T>> {
    Ok(match n {
        Node::Num(v) => Taylor::constant(bound, T::from_f(*v)),
        Node::Var(i) => Taylor::variable(bound, *i, T::from_f(x[*i])),
        Node::Neg(a) => taylor_node::<T>(a, x, bound)?.neg(),
        Node::Add(a, b) => taylor_node::<T>(a, x, bound)?.add(&taylor_node(b, x, bound)?),
        Node::Sub(a, b) => taylor_node::<T>(a, x, bound)?.sub(&taylor_node(b, x, bound)?),
        Node::Mul(a, b) => taylor_node::<T>(a, x, bound)?.mul(&taylor_node(b, x, bound)?),
        Node::Div(a, b) => {
            let d = taylor_node::<T>(b, x, bound)?;
            if d.value() == T::zero() {
                return Err(singular("division by zero", x));
            }
            taylor_node::<T>(a, x, bound)?.div(&d)
        }
        Node::Pow(a, e) => {
            let base = taylor_node::<T>(a, x, bound)?;
            if *e < 0 && base.value() == T::zero() {
                return Err(singular("division by zero", x));
            }
            base.powi(*e)
        }
        Node::Call(f, a) => {
            let u = taylor_node::<T>(a, x, bound)?;
            match f {
                Func::Exp => u.exp(),
                Func::Ln => {
                    if u.value() <= T::zero() {
                        return Err(singular("ln of nonpositive argument", x));
                    }
                    u.ln()
                }
                Func::Sin => u.sin(),
                Func::Cos => u.cos(),
                Func::Sqrt => {
                    if u.value() <= T::zero() {
                        // the derivatives of sqrt blow up at 0
                        return Err(singular("sqrt of nonpositive argument", x));
                    }
                    u.sqrt()
                }
            }
        }
    })
}

fn precedence(n: &Node) -> u8 {
    match n {
        Node::Add(..) | Node::Sub(..) => 1,
        Node::Mul(..) | Node::Div(..) => 2,
        Node::Neg(..) => 3,
        Node::Pow(..) => 4,
        Node::Num(v) if *v < 0.0 => 3,
        _ => 5,
    }
}

fn write_node(n: &Node, vars: &[String], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let wrap = |child: &Node, min: u8, f: &mut fmt::Formatter<'_>| -> fmt::Result {
        if precedence(child) < min {
            write!(f, "(")?;
            write_node(child, vars, f)?;
            write!(f, ")")
        } else {
            write_node(child, vars, f)
        }
    };
    match n {
        Node::Num(v) if *v < 0.0 => write!(f, "-{}", -v),
        Node::Num(v) => write!(f, "{v}"),
        Node::Var(i) => write!(f, "{}", vars[*i]),
        Node::Neg(a) => {
            write!(f, "-")?;
            // `-x^2` already means -(x^2); a negative literal needs parens
            wrap(a, 4, f)
        }
        Node::Add(a, b) => {
            wrap(a, 1, f)?;
            write!(f, " + ")?;
            wrap(b, 2, f)
        }
        Node::Sub(a, b) => {
            wrap(a, 1, f)?;
            write!(f, " - ")?;
            wrap(b, 2, f)
        }
        Node::Mul(a, b) => {
            wrap(a, 2, f)?;
            write!(f, "*")?;
            wrap(b, 3, f)
        }
        Node::Div(a, b) => {
            wrap(a, 2, f)?;
            write!(f, "/")?;
            wrap(b, 3, f)
        }
        Node::Pow(a, e) => {
            wrap(a, 5, f)?;
            write!(f, "^{e}")
        }
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(a, vars, f)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, &self.vars, f)
    }
}

impl Expr {
    pub fn constant(v: f64, vars: &[&str]) -> Expr {
        Expr {
            root: Node::Num(v),
            vars: vars.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    /// True if the tree contains no variable.
    pub fn is_constant(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::Num(_) => true,
                Node::Var(_) => false,
                Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => walk(a),
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    walk(a) && walk(b)
                }
            }
        }
        walk(&self.root)
    }

    /// Exact symbolic derivative with respect to variable `var`.
    pub fn diff(&self, var: usize) -> Expr {
        Expr {
            root: diff_node(&self.root, var),
            vars: self.vars.clone(),
        }
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        self.check_point(point)?;
        eval_node(&self.root, point)
    }

    fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: point.len(),
            });
        }
        Ok(())
    }

    /// Truncated Taylor series of the expression around `point`.
    pub fn taylor<T: Scalar>(&self, point: &[f64], bound: &MultiIndex) -> Result<Taylor<T>> {
        self.check_point(point)?;
        if bound.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: bound.dim(),
            });
        }
        taylor_node(&self.root, point, bound)
    }

    /// All derivatives `∂^γ e(point)`, `γ ≤ bound`, by Taylor propagation.
    pub fn eval_jet(&self, point: &[f64], bound: &MultiIndex) -> Result<JetValue> {
        let t: Taylor<f64> = self.taylor(point, bound)?;
        let jet = t.to_jet(point);
        if jet.derivatives().iter().any(|v| !v.is_finite()) {
            return Err(singular("non-finite derivative", point));
        }
        Ok(jet)
    }

    /// Same jet, computed by repeated symbolic differentiation and evaluation.
    pub fn eval_jet_symbolic(&self, point: &[f64], bound: &MultiIndex) -> Result<JetValue> {
        self.check_point(point)?;
        let mut cache: HashMap<MultiIndex, Expr> = HashMap::new();
        cache.insert(MultiIndex::zero(self.dim()), self.clone());
        let mut err = None;
        let jet = JetValue::from_fn(point, bound, |gamma| {
            let d = self.derivative_cached(gamma, &mut cache);
            match d.eval(point) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NAN
                }
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(jet),
        }
    }

    fn derivative_cached(&self, gamma: &MultiIndex, cache: &mut HashMap<MultiIndex, Expr>) -> Expr {
        if let Some(e) = cache.get(gamma) {
            return e.clone();
        }
        let axis = gamma
            .as_slice()
            .iter()
            .position(|&g| g > 0)
            .expect("zero index is always cached");
        let parent = gamma.checked_sub(&MultiIndex::unit(self.dim(), axis)).unwrap();
        let d = self.derivative_cached(&parent, cache).diff(axis);
        cache.insert(gamma.clone(), d.clone());
        d
    }
}

impl JetSource for Expr {
    fn jet(&self, point: &[f64], bound: &MultiIndex) -> Result<JetValue> {
        self.eval_jet(point, bound)
    }
}
