//! Scalar expressions in `x` and `y` with exact first and second derivatives.
//!
//! Walls given as text (for example `x^2 + y^2/4 - 1`) are parsed into a
//! small AST and evaluated on [`Jet2`], a second-order forward-mode jet, so
//! gradients and Hessians are exact rather than finite-differenced.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use thiserror::Error;

/// Value, gradient and Hessian of a scalar function of `(x, y)` at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dxy: f64,
    pub dyy: f64,
}

impl Jet2 {
    pub fn constant(v: f64) -> Self {
        Self { v, dx: 0.0, dy: 0.0, dxx: 0.0, dxy: 0.0, dyy: 0.0 }
    }

    pub fn var_x(x: f64) -> Self {
        Self { dx: 1.0, ..Self::constant(x) }
    }

    pub fn var_y(y: f64) -> Self {
        Self { dy: 1.0, ..Self::constant(y) }
    }

    /// Chain rule for `g(self)` given `g`, `g'` and `g''` at `self.v`.
    pub fn compose(self, g: f64, g1: f64, g2: f64) -> Self {
        Self {
            v: g,
            dx: g1 * self.dx,
            dy: g1 * self.dy,
            dxx: g1 * self.dxx + g2 * self.dx * self.dx,
            dxy: g1 * self.dxy + g2 * self.dx * self.dy,
            dyy: g1 * self.dyy + g2 * self.dy * self.dy,
        }
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.compose(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.compose(c, -s, -c)
    }

    pub fn tan(self) -> Self {
        let t = self.v.tan();
        let sec2 = 1.0 + t * t;
        self.compose(t, sec2, 2.0 * t * sec2)
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.compose(e, e, e)
    }

    pub fn ln(self) -> Self {
        let v = self.v;
        self.compose(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.compose(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn sinh(self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.compose(s, c, s)
    }

    pub fn cosh(self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.compose(c, s, c)
    }

    pub fn tanh(self) -> Self {
        let t = self.v.tanh();
        let d = 1.0 - t * t;
        self.compose(t, d, -2.0 * t * d)
    }

    pub fn atan(self) -> Self {
        let v = self.v;
        let d = 1.0 / (1.0 + v * v);
        self.compose(v.atan(), d, -2.0 * v * d * d)
    }

    pub fn powi(self, n: i32) -> Self {
        let v = self.v;
        let nf = n as f64;
        let g2 = if n == 0 || n == 1 { 0.0 } else { nf * (nf - 1.0) * v.powi(n - 2) };
        let g1 = if n == 0 { 0.0 } else { nf * v.powi(n - 1) };
        self.compose(v.powi(n), g1, g2)
    }

    pub fn powf(self, p: f64) -> Self {
        let v = self.v;
        self.compose(v.powf(p), p * v.powf(p - 1.0), p * (p - 1.0) * v.powf(p - 2.0))
    }

    pub fn grad(&self) -> [f64; 2] {
        [self.dx, self.dy]
    }

    pub fn hessian(&self) -> [[f64; 2]; 2] {
        [[self.dxx, self.dxy], [self.dxy, self.dyy]]
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v + o.v,
            dx: self.dx + o.dx,
            dy: self.dy + o.dy,
            dxx: self.dxx + o.dxx,
            dxy: self.dxy + o.dxy,
            dyy: self.dyy + o.dyy,
        }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        self + (-o)
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        Jet2 {
            v: -self.v,
            dx: -self.dx,
            dy: -self.dy,
            dxx: -self.dxx,
            dxy: -self.dxy,
            dyy: -self.dyy,
        }
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v * o.v,
            dx: self.dx * o.v + self.v * o.dx,
            dy: self.dy * o.v + self.v * o.dy,
            dxx: self.dxx * o.v + 2.0 * self.dx * o.dx + self.v * o.dxx,
            dxy: self.dxy * o.v + self.dx * o.dy + self.dy * o.dx + self.v * o.dxy,
            dyy: self.dyy * o.v + 2.0 * self.dy * o.dy + self.v * o.dyy,
        }
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    fn div(self, o: Jet2) -> Jet2 {
        let r = o.v;
        let inv = o.compose(1.0 / r, -1.0 / (r * r), 2.0 / (r * r * r));
        self * inv
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("unexpected character '{ch}' at position {pos}")]
    UnexpectedChar { ch: char, pos: usize },
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("unknown identifier '{0}'")]
    UnknownIdent(String),
    #[error("trailing input at position {0}")]
    Trailing(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
    Atan,
}

impl Func {
    fn lookup(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "atan" => Func::Atan,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Atan => "atan",
        }
    }

    fn apply(self, a: Jet2) -> Jet2 {
        match self {
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Tan => a.tan(),
            Func::Exp => a.exp(),
            Func::Ln => a.ln(),
            Func::Sqrt => a.sqrt(),
            Func::Sinh => a.sinh(),
            Func::Cosh => a.cosh(),
            Func::Tanh => a.tanh(),
            Func::Atan => a.atan(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    X,
    Y,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression in the variables `x` and `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self, ExprError> {
        let mut p = Parser { chars: src.char_indices().collect(), pos: 0 };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(ExprError::Trailing(p.chars[p.pos].0));
        }
        Ok(Self { source: src.to_string(), root })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.jet(x, y).v
    }

    pub fn jet(&self, x: f64, y: f64) -> Jet2 {
        eval_node(&self.root, Jet2::var_x(x), Jet2::var_y(y))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", display_node(&self.root))
    }
}

fn display_node(n: &Node) -> String {
    match n {
        Node::Num(v) => format!("{v}"),
        Node::X => "x".into(),
        Node::Y => "y".into(),
        Node::Neg(a) => format!("(-{})", display_node(a)),
        Node::Add(a, b) => format!("({} + {})", display_node(a), display_node(b)),
        Node::Sub(a, b) => format!("({} - {})", display_node(a), display_node(b)),
        Node::Mul(a, b) => format!("({} * {})", display_node(a), display_node(b)),
        Node::Div(a, b) => format!("({} / {})", display_node(a), display_node(b)),
        Node::Pow(a, b) => format!("({}^{})", display_node(a), display_node(b)),
        Node::Call(f, a) => format!("{}({})", f.name(), display_node(a)),
    }
}

fn eval_node(n: &Node, x: Jet2, y: Jet2) -> Jet2 {
    match n {
        Node::Num(v) => Jet2::constant(*v),
        Node::X => x,
        Node::Y => y,
        Node::Neg(a) => -eval_node(a, x, y),
        Node::Add(a, b) => eval_node(a, x, y) + eval_node(b, x, y),
        Node::Sub(a, b) => eval_node(a, x, y) - eval_node(b, x, y),
        Node::Mul(a, b) => eval_node(a, x, y) * eval_node(b, x, y),
        Node::Div(a, b) => eval_node(a, x, y) / eval_node(b, x, y),
        Node::Pow(a, b) => {
            let base = eval_node(a, x, y);
            match constant_value(b) {
                Some(p) if p.fract() == 0.0 && p.abs() < 64.0 => base.powi(p as i32),
                Some(p) => base.powf(p),
                None => (eval_node(b, x, y) * base.ln()).exp(),
            }
        }
        Node::Call(f, a) => f.apply(eval_node(a, x, y)),
    }
}

fn constant_value(n: &Node) -> Option<f64> {
    match n {
        Node::Num(v) => Some(*v),
        Node::Neg(a) => constant_value(a).map(|v| -v),
        Node::Add(a, b) => Some(constant_value(a)? + constant_value(b)?),
        Node::Sub(a, b) => Some(constant_value(a)? - constant_value(b)?),
        Node::Mul(a, b) => Some(constant_value(a)? * constant_value(b)?),
        Node::Div(a, b) => Some(constant_value(a)? / constant_value(b)?),
        Node::Pow(a, b) => {
            let (a, b) = (constant_value(a)?, constant_value(b)?);
            Some(if b.fract() == 0.0 && b.abs() < 64.0 { a.powi(b as i32) } else { a.powf(b) })
        }
        _ => None,
    }
}

struct Parser {
    chars: Vec<(usize, char)>,
    pos: usize,
}

impl Parser {
    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].1.is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(c) = self.peek() {
            match c {
                '+' => {
                    self.pos += 1;
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                '-' => {
                    self.pos += 1;
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(c) = self.peek() {
            match c {
                '*' => {
                    self.pos += 1;
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                '/' => {
                    self.pos += 1;
                    lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    // right associative, binds tighter than unary minus on the left: -x^2 = -(x^2)
    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let Some(c) = self.peek() else {
            return Err(ExprError::UnexpectedEnd);
        };
        if c == '(' {
            self.pos += 1;
            let inner = self.expr()?;
            self.expect(')')?;
            return Ok(inner);
        }
        if c.is_ascii_digit() || c == '.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() {
            let start = self.pos;
            while self.pos < self.chars.len()
                && (self.chars[self.pos].1.is_ascii_alphanumeric() || self.chars[self.pos].1 == '_')
            {
                self.pos += 1;
            }
            let name: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
            return match name.as_str() {
                "x" => Ok(Node::X),
                "y" => Ok(Node::Y),
                "pi" => Ok(Node::Num(std::f64::consts::PI)),
                "e" => Ok(Node::Num(std::f64::consts::E)),
                _ => {
                    let f = Func::lookup(&name).ok_or(ExprError::UnknownIdent(name))?;
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    Ok(Node::Call(f, Box::new(arg)))
                }
            };
        }
        Err(ExprError::UnexpectedChar { ch: c, pos: self.chars[self.pos].0 })
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let mut seen_exp = false;
        while self.pos < self.chars.len() {
            let c = self.chars[self.pos].1;
            if c.is_ascii_digit() || c == '.' {
                self.pos += 1;
            } else if (c == 'e' || c == 'E') && !seen_exp {
                // only an exponent if followed by a digit or sign+digit
                let next = self.chars.get(self.pos + 1).map(|c| c.1);
                let next2 = self.chars.get(self.pos + 2).map(|c| c.1);
                let ok = matches!(next, Some(d) if d.is_ascii_digit())
                    || (matches!(next, Some('+') | Some('-'))
                        && matches!(next2, Some(d) if d.is_ascii_digit()));
                if !ok {
                    break;
                }
                seen_exp = true;
                self.pos += 2;
            } else {
                break;
            }
        }
        let text: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
        text.parse::<f64>()
            .map(Node::Num)
            .map_err(|_| ExprError::UnexpectedChar { ch: self.chars[start].1, pos: self.chars[start].0 })
    }

    fn expect(&mut self, want: char) -> Result<(), ExprError> {
        match self.peek() {
            Some(c) if c == want => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => Err(ExprError::UnexpectedChar { ch: c, pos: self.chars[self.pos].0 }),
            None => Err(ExprError::UnexpectedEnd),
        }
    }
}
