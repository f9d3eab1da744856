//! A small arithmetic language for scenario files.
//!
//! Values are scalars or vectors. Variables: `q`, `p` (vectors), `t`
//! (scalar), components `q[1]`, `p[2]` or `q1`, `p2` (1-based). Operators
//! `+ - * / ^` with the usual precedence, `^` right-associative. Functions:
//! `sin cos tan exp log sqrt abs atan2 min max dot norm norm2`; constant `pi`.
//! Vector literals `[a, b, ...]`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("{0}")]
    Eval(String),
}

impl From<ExprError> for hjsub::Error {
    fn from(e: ExprError) -> Self {
        hjsub::Error::InvalidArgument(e.to_string())
    }
}

type Result<T> = std::result::Result<T, ExprError>;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Value {
    pub fn scalar(self) -> Result<f64> {
        match self {
            Value::Scalar(x) => Ok(x),
            Value::Vector(v) => Err(ExprError::Eval(format!("expected a scalar, got a vector of length {}", v.len()))),
        }
    }

    fn vector(self, what: &str) -> Result<Vec<f64>> {
        match self {
            Value::Vector(v) => Ok(v),
            Value::Scalar(_) => Err(ExprError::Eval(format!("{what} needs a vector argument"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    Q,
    P,
    T,
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
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(String, Vec<Node>),
    Index(Box<Node>, Box<Node>),
    List(Vec<Node>),
}

const FUNCTIONS: &[(&str, usize)] = &[
    ("sin", 1),
    ("cos", 1),
    ("tan", 1),
    ("exp", 1),
    ("log", 1),
    ("sqrt", 1),
    ("abs", 1),
    ("norm", 1),
    ("norm2", 1),
    ("atan2", 2),
    ("min", 2),
    ("max", 2),
    ("dot", 2),
];

/// A parsed expression together with its source text.
#[derive(Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

/// Variable bindings for evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Env<'a> {
    pub q: &'a [f64],
    pub p: &'a [f64],
    pub t: f64,
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let mut parser = Parser { src: source.as_bytes(), pos: 0 };
        let root = parser.expr()?;
        parser.skip_ws();
        if parser.pos != parser.src.len() {
            return Err(parser.error("unexpected trailing input"));
        }
        Ok(Self { source: source.to_string(), root })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Whether the expression mentions `p`.
    pub fn uses_momentum(&self) -> bool {
        uses(&self.root, Var::P)
    }

    pub fn eval(&self, env: &Env) -> Result<Value> {
        eval(&self.root, env)
    }

    pub fn eval_scalar(&self, env: &Env) -> Result<f64> {
        self.eval(env)?.scalar()
    }
}

fn uses(n: &Node, var: Var) -> bool {
    match n {
        Node::Num(_) => false,
        Node::Var(v) => *v == var,
        Node::Neg(a) => uses(a, var),
        Node::Bin(_, a, b) | Node::Index(a, b) => uses(a, var) || uses(b, var),
        Node::Call(_, args) | Node::List(args) => args.iter().any(|a| uses(a, var)),
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> ExprError {
        ExprError::Parse { pos: self.pos, msg: msg.to_string() }
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

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat(b'+') {
                BinOp::Add
            } else if self.eat(b'-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat(b'*') {
                BinOp::Mul
            } else if self.eat(b'/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.postfix()?;
        if self.eat(b'^') {
            // -x^2 parses as -(x^2); x^-1 is allowed
            let exponent = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn postfix(&mut self) -> Result<Node> {
        let mut node = self.primary()?;
        while self.eat(b'[') {
            let index = self.expr()?;
            self.expect(b']')?;
            node = Node::Index(Box::new(node), Box::new(index));
        }
        Ok(node)
    }

    fn primary(&mut self) -> Result<Node> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(b'[') => {
                self.pos += 1;
                let mut items = vec![self.expr()?];
                while self.eat(b',') {
                    items.push(self.expr()?);
                }
                self.expect(b']')?;
                Ok(Node::List(items))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(c) => Err(self.error(&format!("unexpected character `{}`", c as char))),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-') {
                self.pos += 1;
            }
            if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse().map(Node::Num).map_err(|_| ExprError::Parse { pos: start, msg: format!("bad number `{text}`") })
    }

    fn identifier(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii").to_string();
        if self.peek() == Some(b'(') {
            let Some(&(_, arity)) = FUNCTIONS.iter().find(|(f, _)| *f == name) else {
                return Err(ExprError::Parse { pos: start, msg: format!("unknown function `{name}`") });
            };
            self.pos += 1;
            let mut args = vec![self.expr()?];
            while self.eat(b',') {
                args.push(self.expr()?);
            }
            self.expect(b')')?;
            if args.len() != arity {
                return Err(ExprError::Parse {
                    pos: start,
                    msg: format!("`{name}` takes {arity} argument(s), got {}", args.len()),
                });
            }
            return Ok(Node::Call(name, args));
        }
        match name.as_str() {
            "q" => Ok(Node::Var(Var::Q)),
            "p" => Ok(Node::Var(Var::P)),
            "t" => Ok(Node::Var(Var::T)),
            "pi" => Ok(Node::Num(std::f64::consts::PI)),
            _ => {
                // q1, p2, ... as shorthand for q[1], p[2]
                let (head, digits) = name.split_at(1);
                let var = match head {
                    "q" => Var::Q,
                    "p" => Var::P,
                    _ => return Err(ExprError::Parse { pos: start, msg: format!("unknown name `{name}`") }),
                };
                let k: usize = digits
                    .parse()
                    .map_err(|_| ExprError::Parse { pos: start, msg: format!("unknown name `{name}`") })?;
                Ok(Node::Index(Box::new(Node::Var(var)), Box::new(Node::Num(k as f64))))
            }
        }
    }
}

fn zip_with(a: Value, b: Value, f: impl Fn(f64, f64) -> f64) -> Result<Value> {
    Ok(match (a, b) {
        (Value::Scalar(x), Value::Scalar(y)) => Value::Scalar(f(x, y)),
        (Value::Scalar(x), Value::Vector(v)) => Value::Vector(v.into_iter().map(|y| f(x, y)).collect()),
        (Value::Vector(v), Value::Scalar(y)) => Value::Vector(v.into_iter().map(|x| f(x, y)).collect()),
        (Value::Vector(u), Value::Vector(v)) => {
            if u.len() != v.len() {
                return Err(ExprError::Eval(format!("vector lengths {} and {} differ", u.len(), v.len())));
            }
            Value::Vector(u.into_iter().zip(v).map(|(x, y)| f(x, y)).collect())
        }
    })
}

fn eval(n: &Node, env: &Env) -> Result<Value> {
    Ok(match n {
        Node::Num(x) => Value::Scalar(*x),
        Node::Var(Var::Q) => Value::Vector(env.q.to_vec()),
        Node::Var(Var::P) => Value::Vector(env.p.to_vec()),
        Node::Var(Var::T) => Value::Scalar(env.t),
        Node::Neg(a) => zip_with(Value::Scalar(0.0), eval(a, env)?, |_, x| -x)?,
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, env)?, eval(b, env)?);
            match op {
                BinOp::Add => zip_with(a, b, |x, y| x + y)?,
                BinOp::Sub => zip_with(a, b, |x, y| x - y)?,
                BinOp::Mul => {
                    if matches!((&a, &b), (Value::Vector(_), Value::Vector(_))) {
                        return Err(ExprError::Eval("vector * vector is ambiguous; use dot(a, b)".into()));
                    }
                    zip_with(a, b, |x, y| x * y)?
                }
                BinOp::Div => {
                    if matches!(b, Value::Vector(_)) {
                        return Err(ExprError::Eval("cannot divide by a vector".into()));
                    }
                    zip_with(a, b, |x, y| x / y)?
                }
                BinOp::Pow => {
                    let e = b.scalar()?;
                    let base = a.scalar()?;
                    // integer powers keep negative bases real
                    Value::Scalar(if e.fract() == 0.0 && e.abs() <= 64.0 { base.powi(e as i32) } else { base.powf(e) })
                }
            }
        }
        Node::Index(v, i) => {
            let v = eval(v, env)?.vector("indexing")?;
            let i = eval(i, env)?.scalar()?;
            if i.fract() != 0.0 || i < 1.0 || i as usize > v.len() {
                return Err(ExprError::Eval(format!("index {i} out of range 1..={}", v.len())));
            }
            Value::Scalar(v[i as usize - 1])
        }
        Node::List(items) => {
            let mut out = Vec::with_capacity(items.len());
            for it in items {
                out.push(eval(it, env)?.scalar()?);
            }
            Value::Vector(out)
        }
        Node::Call(name, args) => {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(eval(a, env)?);
            }
            call(name, vals)?
        }
    })
}

fn call(name: &str, mut args: Vec<Value>) -> Result<Value> {
    let unary = |f: fn(f64) -> f64, v: Value| zip_with(Value::Scalar(0.0), v, move |_, x| f(x));
    Ok(match name {
        "sin" => unary(f64::sin, args.remove(0))?,
        "cos" => unary(f64::cos, args.remove(0))?,
        "tan" => unary(f64::tan, args.remove(0))?,
        "exp" => unary(f64::exp, args.remove(0))?,
        "log" => unary(f64::ln, args.remove(0))?,
        "sqrt" => unary(f64::sqrt, args.remove(0))?,
        "abs" => unary(f64::abs, args.remove(0))?,
        "atan2" => {
            let b = args.remove(1);
            zip_with(args.remove(0), b, f64::atan2)?
        }
        "min" => {
            let b = args.remove(1);
            zip_with(args.remove(0), b, f64::min)?
        }
        "max" => {
            let b = args.remove(1);
            zip_with(args.remove(0), b, f64::max)?
        }
        "dot" => {
            let b = args.remove(1).vector("dot")?;
            let a = args.remove(0).vector("dot")?;
            if a.len() != b.len() {
                return Err(ExprError::Eval(format!("dot of vectors of lengths {} and {}", a.len(), b.len())));
            }
            Value::Scalar(a.iter().zip(&b).map(|(x, y)| x * y).sum())
        }
        "norm2" => Value::Scalar(args.remove(0).vector("norm2")?.iter().map(|x| x * x).sum()),
        "norm" => Value::Scalar(args.remove(0).vector("norm")?.iter().map(|x| x * x).sum::<f64>().sqrt()),
        _ => unreachable!("checked at parse time"),
    })
}
