//! A small expression language for user Hamiltonians and time profiles.
//!
//! Grammar: numbers, `+ - * / ^`, parentheses, the functions `sin cos exp
//! ln sqrt`, and the variables `t`, `p1..pn`, `q1..qn`, `z1..z2n` (with
//! `z_k = p_k` and `z_{n+k} = q_k`), `r2 = |z|^2` and `pi`. `^` binds
//! tightest and associates to the right.
//!
//! ```
//! use hamloop::models::Expr;
//! let e = Expr::parse("sqrt(1 + r2) - 1", 1).unwrap();
//! assert!((e.value(0.0, &[3.0, 4.0]).unwrap() - (26f64.sqrt() - 1.0)).abs() < 1e-15);
//! ```

use crate::error::{Error, Result};
use crate::models::{check_point, Hamiltonian, ModelParams};
use crate::symplectic::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Time,
    Coord(usize),
    R2,
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression over `t` and `z in R^{2n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    n: usize,
    root: Node,
    source: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn lex(src: &str) -> Result<Vec<Tok>> {
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
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| Error::Config(format!("bad number '{text}'")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(Error::Config(format!("unexpected character '{c}' in expression")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [Tok],
    pos: usize,
    n: usize,
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

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                Op::Add
            } else if self.eat('-') {
                Op::Sub
            } else {
                return Ok(lhs);
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                Op::Mul
            } else if self.eat('/') {
                Op::Div
            } else {
                return Ok(lhs);
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            // Right associative; the exponent may carry its own sign.
            let exp = self.unary()?;
            return Ok(Node::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let tok = self.peek().cloned().ok_or_else(|| Error::Config("expression ended early".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(Error::Config("missing ')'".into()));
                }
                Ok(e)
            }
            Tok::Sym(c) => Err(Error::Config(format!("unexpected '{c}'"))),
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "exp" => Some(Func::Exp),
                    "ln" => Some(Func::Ln),
                    "sqrt" => Some(Func::Sqrt),
                    _ => None,
                };
                if let Some(f) = func {
                    if !self.eat('(') {
                        return Err(Error::Config(format!("'{name}' needs parentheses")));
                    }
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return Err(Error::Config("missing ')'".into()));
                    }
                    return Ok(Node::Call(f, Box::new(arg)));
                }
                self.variable(&name)
            }
        }
    }

    fn variable(&self, name: &str) -> Result<Node> {
        match name {
            "t" => return Ok(Node::Time),
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            "r2" if self.n > 0 => return Ok(Node::R2),
            _ => {}
        }
        let index = |prefix: &str, limit: usize| -> Option<usize> {
            let k: usize = name.strip_prefix(prefix)?.parse().ok()?;
            (1..=limit).contains(&k).then_some(k - 1)
        };
        let n = self.n;
        if let Some(k) = index("p", n) {
            return Ok(Node::Coord(k));
        }
        if let Some(k) = index("q", n) {
            return Ok(Node::Coord(n + k));
        }
        if let Some(k) = index("z", 2 * n) {
            return Ok(Node::Coord(k));
        }
        Err(Error::Config(format!("unknown variable '{name}'")))
    }
}

/// Value, gradient and Hessian with respect to `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vector,
    pub hess: Matrix,
}

impl Jet {
    fn constant(v: f64, d: usize) -> Self {
        Self { value: v, grad: Vector::zeros(d), hess: Matrix::zeros(d, d) }
    }

    fn is_constant(&self) -> bool {
        self.grad.iter().all(|v| *v == 0.0) && self.hess.iter().all(|v| *v == 0.0)
    }

    // g(self) for a scalar g with derivatives g1, g2 at self.value.
    fn chain(self, v: f64, g1: f64, g2: f64) -> Self {
        let hess = self.hess * g1 + &self.grad * self.grad.transpose() * g2;
        Self { value: v, grad: self.grad * g1, hess }
    }

    fn mul(self, o: Self) -> Self {
        let cross = &self.grad * o.grad.transpose();
        let hess = &self.hess * o.value + &o.hess * self.value + &cross + cross.transpose();
        Self { value: self.value * o.value, grad: &self.grad * o.value + &o.grad * self.value, hess }
    }

    fn recip(self) -> Self {
        let v = self.value;
        self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    fn ln(self) -> Self {
        let v = self.value;
        self.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    fn powc(self, c: f64) -> Self {
        let v = self.value;
        if c == 0.0 {
            let d = self.grad.len();
            return Self::constant(1.0, d);
        }
        self.chain(v.powf(c), c * v.powf(c - 1.0), c * (c - 1.0) * v.powf(c - 2.0))
    }
}

impl Expr {
    /// Parse an expression over `t` and `z in R^{2n}`; `n = 0` allows `t`
    /// and `pi` only.
    pub fn parse(src: &str, n: usize) -> Result<Self> {
        let toks = lex(src)?;
        let mut p = Parser { toks: &toks, pos: 0, n };
        let root = p.expr()?;
        if p.pos != toks.len() {
            return Err(Error::Config(format!("trailing input in expression '{src}'")));
        }
        Ok(Self { n, root, source: src.to_string() })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn half_dim(&self) -> usize {
        self.n
    }

    pub fn value(&self, t: f64, z: &[f64]) -> Result<f64> {
        check_point(self.n, z)?;
        let v = scalar(&self.root, t, z);
        if !v.is_finite() {
            return Err(Error::Evaluation { t, what: format!("'{}' is not finite", self.source) });
        }
        Ok(v)
    }

    pub fn jet(&self, t: f64, z: &[f64]) -> Result<Jet> {
        check_point(self.n, z)?;
        let j = jet(&self.root, t, z);
        if !j.value.is_finite() || j.grad.iter().chain(j.hess.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Evaluation { t, what: format!("derivatives of '{}' are not finite", self.source) });
        }
        Ok(j)
    }
}

fn scalar(node: &Node, t: f64, z: &[f64]) -> f64 {
    match node {
        Node::Num(v) => *v,
        Node::Time => t,
        Node::Coord(k) => z[*k],
        Node::R2 => z.iter().map(|v| v * v).sum(),
        Node::Neg(a) => -scalar(a, t, z),
        Node::Bin(op, a, b) => {
            let (x, y) = (scalar(a, t, z), scalar(b, t, z));
            match op {
                Op::Add => x + y,
                Op::Sub => x - y,
                Op::Mul => x * y,
                Op::Div => x / y,
                Op::Pow => x.powf(y),
            }
        }
        Node::Call(f, a) => {
            let x = scalar(a, t, z);
            match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Ln => x.ln(),
                Func::Sqrt => x.sqrt(),
            }
        }
    }
}

fn jet(node: &Node, t: f64, z: &[f64]) -> Jet {
    let d = z.len();
    match node {
        Node::Num(v) => Jet::constant(*v, d),
        Node::Time => Jet::constant(t, d),
        Node::Coord(k) => {
            let mut j = Jet::constant(z[*k], d);
            j.grad[*k] = 1.0;
            j
        }
        Node::R2 => {
            let v = Vector::from_column_slice(z);
            Jet { value: v.norm_squared(), grad: &v * 2.0, hess: Matrix::identity(d, d) * 2.0 }
        }
        Node::Neg(a) => {
            let j = jet(a, t, z);
            Jet { value: -j.value, grad: -j.grad, hess: -j.hess }
        }
        Node::Bin(op, a, b) => {
            let (x, y) = (jet(a, t, z), jet(b, t, z));
            match op {
                Op::Add => Jet { value: x.value + y.value, grad: x.grad + y.grad, hess: x.hess + y.hess },
                Op::Sub => Jet { value: x.value - y.value, grad: x.grad - y.grad, hess: x.hess - y.hess },
                Op::Mul => x.mul(y),
                Op::Div => x.mul(y.recip()),
                Op::Pow if y.is_constant() => x.powc(y.value),
                Op::Pow => y.mul(x.ln()).exp(),
            }
        }
        Node::Call(f, a) => {
            let x = jet(a, t, z);
            let v = x.value;
            match f {
                Func::Sin => x.chain(v.sin(), v.cos(), -v.sin()),
                Func::Cos => x.chain(v.cos(), -v.sin(), -v.cos()),
                Func::Exp => x.exp(),
                Func::Ln => x.ln(),
                Func::Sqrt => {
                    let s = v.sqrt();
                    x.chain(s, 0.5 / s, -0.25 / (s * v))
                }
            }
        }
    }
}

/// A Hamiltonian given by an expression, with author-declared constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionModel {
    expr: Expr,
    period: Option<f64>,
    params: ModelParams,
}

impl ExpressionModel {
    pub fn new(expr: Expr, period: Option<f64>, params: ModelParams) -> Result<Self> {
        if expr.half_dim() == 0 {
            return Err(Error::InvalidDimension("expression model needs n >= 1".into()));
        }
        if let Some(p) = period {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidArgument(format!("period must be positive, got {p}")));
            }
        }
        params.validate()?;
        Ok(Self { expr, period, params })
    }
}

impl Hamiltonian for ExpressionModel {
    fn half_dim(&self) -> usize {
        self.expr.half_dim()
    }

    fn period(&self) -> Option<f64> {
        self.period
    }

    fn value(&self, t: f64, z: &[f64]) -> Result<f64> {
        self.expr.value(t, z)
    }

    fn gradient(&self, t: f64, z: &[f64]) -> Result<Vector> {
        Ok(self.expr.jet(t, z)?.grad)
    }

    fn hessian(&self, t: f64, z: &[f64]) -> Result<Matrix> {
        Ok(self.expr.jet(t, z)?.hess)
    }

    fn params(&self) -> ModelParams {
        self.params
    }

    fn name(&self) -> String {
        format!("expression({})", self.expr.source())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::testing::fd_errors;
    use crate::models::{soft_power_model, Hamiltonian};

    #[test]
    fn precedence_and_associativity() {
        let e = |s: &str| Expr::parse(s, 0).unwrap().value(0.0, &[]).unwrap();
        assert_eq!(e("1 + 2 * 3"), 7.0);
        assert_eq!(e("2 ^ 3 ^ 2"), 512.0);
        assert_eq!(e("-2 ^ 2"), -4.0);
        assert_eq!(e("2 ^ -1"), 0.5);
        assert_eq!(e("(1 + 2) * 3 - 4 / 2"), 7.0);
        assert_eq!(e("1.5e1"), 15.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Expr::parse("p2", 1).is_err());
        assert!(Expr::parse("1 +", 1).is_err());
        assert!(Expr::parse("sin 1", 1).is_err());
        assert!(Expr::parse("r2", 0).is_err());
        assert!(Expr::parse("1 $ 2", 1).is_err());
        assert!(Expr::parse("(1", 1).is_err());
    }

    #[test]
    fn variables_alias() {
        let e = Expr::parse("z1 * 10 + z4 - p1 * 10 - q2", 2).unwrap();
        assert_eq!(e.value(0.0, &[1.0, 2.0, 3.0, 4.0]).unwrap(), 0.0);
    }

    #[test]
    fn matches_builtin_soft_power() {
        let e = Expr::parse("(1 + r2)^(1.75/2) - 1", 1).unwrap();
        let m = ExpressionModel::new(e, None, soft_power_model(1, 1.75).unwrap().params()).unwrap();
        let s = soft_power_model(1, 1.75).unwrap();
        for z in [[0.5, -2.0], [10.0, 3.0], [0.0, 0.0]] {
            assert!((m.value(0.0, &z).unwrap() - s.value(0.0, &z).unwrap()).abs() < 1e-13);
            assert!((m.gradient(0.0, &z).unwrap() - s.gradient(0.0, &z).unwrap()).amax() < 1e-12);
            assert!((m.hessian(0.0, &z).unwrap() - s.hessian(0.0, &z).unwrap()).amax() < 1e-12);
        }
    }

    #[test]
    fn jets_match_finite_differences() {
        let src = "(1 + 0.2*sin(t)) * (sqrt(1 + p1^2 + 2*q1^2) - 1) + exp(-r2) * cos(p1 * q1) + ln(2 + p1^2) / (3 + q1^2) \
                   + (1 + r2)^(0.5 + 0.1*p1^2)";
        let e = Expr::parse(src, 1).unwrap();
        let m = ExpressionModel::new(e, Some(2.0 * std::f64::consts::PI), soft_power_model(1, 1.75).unwrap().params())
            .unwrap();
        for (t, z) in [(0.3, [0.4, -1.1]), (2.0, [-2.0, 0.7]), (5.0, [1.5, 1.5])] {
            let (eg, eh) = fd_errors(&m, t, &z);
            assert!(eg < 1e-8 && eh < 1e-6, "{eg} {eh}");
        }
    }

    #[test]
    fn non_finite_is_an_evaluation_error() {
        let e = Expr::parse("ln(p1)", 1).unwrap();
        assert!(matches!(e.value(1.5, &[-1.0, 0.0]), Err(Error::Evaluation { .. })));
    }
}
