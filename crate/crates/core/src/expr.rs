//! A small arithmetic expression language over named variables.
//!
//! Supports numbers, variables, `+ - * / ^`, unary minus and the functions
//! `abs sqrt exp ln log sin cos max min`. Gradients come from forward-mode
//! dual numbers, so they are exact up to rounding.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Abs,
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
    Max,
    Min,
}

impl Func {
    fn from_name(s: &str) -> Option<(Func, usize)> {
        Some(match s {
            "abs" => (Func::Abs, 1),
            "sqrt" => (Func::Sqrt, 1),
            "exp" => (Func::Exp, 1),
            "ln" | "log" => (Func::Ln, 1),
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "max" => (Func::Max, 2),
            "min" => (Func::Min, 2),
            _ => return None,
        })
    }
}

/// A parsed expression bound to an ordered variable list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ExprSource", into = "ExprSource")]
pub struct Expr {
    src: String,
    vars: Vec<String>,
    root: Node,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ExprSource {
    expr: String,
    vars: Vec<String>,
}

impl TryFrom<ExprSource> for Expr {
    type Error = Error;
    fn try_from(s: ExprSource) -> Result<Self> {
        let vars: Vec<&str> = s.vars.iter().map(String::as_str).collect();
        Expr::parse(&s.expr, &vars)
    }
}

impl From<Expr> for ExprSource {
    fn from(e: Expr) -> Self {
        ExprSource { expr: e.src, vars: e.vars }
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.src == other.src && self.vars == other.vars
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.src)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<f64>().map_err(|_| Error::Expr(format!("bad number '{s}'")))?;
            out.push(Tok::Num(v));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(Error::Expr(format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    vars: &'a [&'a str],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(Error::Expr(format!("expected '{c}' at token {}", self.pos)))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Bin(Op::Add, Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Bin(Op::Sub, Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Bin(Op::Mul, Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Bin(Op::Div, Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Node::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.toks.get(self.pos).cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.eat('(') {
                    let (func, arity) = Func::from_name(&name).ok_or_else(|| Error::Expr(format!("unknown function '{name}'")))?;
                    let mut args = vec![self.expr()?];
                    while self.eat(',') {
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    if args.len() != arity {
                        return Err(Error::Expr(format!("{name} takes {arity} argument(s)")));
                    }
                    Ok(Node::Call(func, args))
                } else if name == "pi" && !self.vars.contains(&"pi") {
                    Ok(Node::Num(std::f64::consts::PI))
                } else {
                    let idx = self.vars.iter().position(|v| *v == name).ok_or_else(|| Error::Expr(format!("unknown variable '{name}'")))?;
                    Ok(Node::Var(idx))
                }
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            other => Err(Error::Expr(format!("unexpected token {other:?}"))),
        }
    }
}

/// Value with a dense tangent vector.
#[derive(Debug, Clone)]
struct Dual {
    v: f64,
    d: Vec<f64>,
}

impl Dual {
    fn constant(v: f64, n: usize) -> Self {
        Dual { v, d: vec![0.0; n] }
    }

    fn map(self, v: f64, dv: f64) -> Self {
        Dual { v, d: self.d.into_iter().map(|x| x * dv).collect() }
    }

    fn combine(a: Dual, b: Dual, v: f64, da: f64, db: f64) -> Dual {
        let d = a.d.iter().zip(&b.d).map(|(x, y)| da * x + db * y).collect();
        Dual { v, d }
    }
}

impl Expr {
    pub fn parse(src: &str, vars: &[&str]) -> Result<Expr> {
        let toks = tokenize(src)?;
        let mut p = Parser { toks, pos: 0, vars };
        let root = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(Error::Expr(format!("trailing input in '{src}'")));
        }
        Ok(Expr { src: src.to_string(), vars: vars.iter().map(|s| s.to_string()).collect(), root })
    }

    pub fn constant(v: f64) -> Expr {
        Expr { src: format!("{v:?}"), vars: Vec::new(), root: Node::Num(v) }
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        eval_node(&self.root, x)
    }

    /// Value and gradient.
    pub fn grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let d = dual_node(&self.root, x);
        (d.v, d.d)
    }
}

fn eval_node(n: &Node, x: &[f64]) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Var(i) => x[*i],
        Node::Neg(a) => -eval_node(a, x),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval_node(a, x), eval_node(b, x));
            match op {
                Op::Add => a + b,
                Op::Sub => a - b,
                Op::Mul => a * b,
                Op::Div => a / b,
                Op::Pow => pow(a, b),
            }
        }
        Node::Call(f, args) => {
            let a = eval_node(&args[0], x);
            match f {
                Func::Abs => a.abs(),
                Func::Sqrt => a.sqrt(),
                Func::Exp => a.exp(),
                Func::Ln => a.ln(),
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Max => a.max(eval_node(&args[1], x)),
                Func::Min => a.min(eval_node(&args[1], x)),
            }
        }
    }
}

fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() < 64.0 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

fn dual_node(n: &Node, x: &[f64]) -> Dual {
    let dim = x.len();
    match n {
        Node::Num(v) => Dual::constant(*v, dim),
        Node::Var(i) => {
            let mut d = Dual::constant(x[*i], dim);
            d.d[*i] = 1.0;
            d
        }
        Node::Neg(a) => {
            let a = dual_node(a, x);
            let v = -a.v;
            a.map(v, -1.0)
        }
        Node::Bin(op, a, b) => {
            let (a, b) = (dual_node(a, x), dual_node(b, x));
            let (av, bv) = (a.v, b.v);
            match op {
                Op::Add => Dual::combine(a, b, av + bv, 1.0, 1.0),
                Op::Sub => Dual::combine(a, b, av - bv, 1.0, -1.0),
                Op::Mul => Dual::combine(a, b, av * bv, bv, av),
                Op::Div => Dual::combine(a, b, av / bv, 1.0 / bv, -av / (bv * bv)),
                Op::Pow => {
                    let v = pow(av, bv);
                    let da = if bv == 0.0 { 0.0 } else { bv * pow(av, bv - 1.0) };
                    let const_exp = b.d.iter().all(|d| *d == 0.0);
                    let db = if const_exp || av <= 0.0 { 0.0 } else { v * av.ln() };
                    Dual::combine(a, b, v, da, db)
                }
            }
        }
        Node::Call(f, args) => {
            let a = dual_node(&args[0], x);
            let av = a.v;
            match f {
                Func::Abs => a.map(
                    av.abs(),
                    if av > 0.0 {
                        1.0
                    } else if av < 0.0 {
                        -1.0
                    } else {
                        0.0
                    },
                ),
                Func::Sqrt => {
                    let v = av.sqrt();
                    a.map(v, if v > 0.0 { 0.5 / v } else { 0.0 })
                }
                Func::Exp => {
                    let v = av.exp();
                    a.map(v, v)
                }
                Func::Ln => a.map(av.ln(), 1.0 / av),
                Func::Sin => a.map(av.sin(), av.cos()),
                Func::Cos => a.map(av.cos(), -av.sin()),
                Func::Max | Func::Min => {
                    let b = dual_node(&args[1], x);
                    let pick_a = if matches!(f, Func::Max) { av >= b.v } else { av <= b.v };
                    if pick_a {
                        a
                    } else {
                        b
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_functions() {
        let e = Expr::parse("(x-1)^2 + 2*y^2 - -3", &["x", "y"]).unwrap();
        assert_eq!(e.eval(&[3.0, 1.0]), 4.0 + 2.0 + 3.0);
        let e = Expr::parse("max(abs(x), 1e-1) + sqrt(4) - ln(exp(2))", &["x"]).unwrap();
        assert!((e.eval(&[-0.5]) - 0.5).abs() < 1e-15);
        let e = Expr::parse("2^3^2", &[]).unwrap();
        assert_eq!(e.eval(&[]), 512.0);
        assert_eq!(Expr::parse("-x^2", &["x"]).unwrap().eval(&[3.0]), -9.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let e = Expr::parse("x*y + exp(x/3) - y^3 / (1 + x^2) + abs(y - 0.3)", &["x", "y"]).unwrap();
        let p = [0.7, -1.2];
        let (_, g) = e.grad(&p);
        for i in 0..2 {
            let h = 1e-6;
            let mut a = p;
            let mut b = p;
            a[i] += h;
            b[i] -= h;
            let fd = (e.eval(&a) - e.eval(&b)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn errors() {
        assert!(Expr::parse("x +", &["x"]).is_err());
        assert!(Expr::parse("z", &["x"]).is_err());
        assert!(Expr::parse("foo(x)", &["x"]).is_err());
        assert!(Expr::parse("max(x)", &["x"]).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let e = Expr::parse("x^2 + y", &["x", "y"]).unwrap();
        let s = serde_json::to_string(&e).unwrap();
        let f: Expr = serde_json::from_str(&s).unwrap();
        assert_eq!(e, f);
        assert_eq!(f.eval(&[2.0, 1.0]), 5.0);
    }
}
