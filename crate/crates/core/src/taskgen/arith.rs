//! Arithmetic tasks A1–A3: random integer expression trees with 1–3
//! operators, rendered fully parenthesised with ASCII operators.

use std::fmt;

use rand::Rng;
use serde_json::json;

use super::{finalize, require_even, rng_for, Draft, LabeledStatement, Meta, Result, TaskId, TaskgenError};

pub const OPERAND_RANGE: std::ops::RangeInclusive<i64> = 1..=99;
pub const MAX_OFFSET: i64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    const ALL: [ArithOp; 4] = [ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div];

    pub fn symbol(self) -> char {
        match self {
            ArithOp::Add => '+',
            ArithOp::Sub => '-',
            ArithOp::Mul => '*',
            ArithOp::Div => '/',
        }
    }

    /// `None` for division by zero or a non-integer quotient.
    fn apply(self, a: i64, b: i64) -> Option<i64> {
        match self {
            ArithOp::Add => a.checked_add(b),
            ArithOp::Sub => a.checked_sub(b),
            ArithOp::Mul => a.checked_mul(b),
            ArithOp::Div => (b != 0 && a % b == 0).then(|| a / b),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(i64),
    Bin(Box<Node>, ArithOp, Box<Node>),
}

impl Node {
    fn eval(&self) -> Option<i64> {
        match self {
            Node::Num(v) => Some(*v),
            Node::Bin(l, op, r) => op.apply(l.eval()?, r.eval()?),
        }
    }

    fn write(&self, out: &mut String, root: bool) {
        match self {
            Node::Num(v) => out.push_str(&v.to_string()),
            Node::Bin(l, op, r) => {
                if !root {
                    out.push('(');
                }
                l.write(out, false);
                out.push(' ');
                out.push(op.symbol());
                out.push(' ');
                r.write(out, false);
                if !root {
                    out.push(')');
                }
            }
        }
    }

    fn collect(&self, operands: &mut Vec<i64>, operators: &mut Vec<ArithOp>) {
        match self {
            Node::Num(v) => operands.push(*v),
            Node::Bin(l, op, r) => {
                l.collect(operands, operators);
                operators.push(*op);
                r.collect(operands, operators);
            }
        }
    }
}

/// Tree shapes with `ops` internal nodes (Catalan many: 1, 2, 5).
#[derive(Debug, Clone)]
enum Shape {
    Leaf,
    Bin(Box<Shape>, Box<Shape>),
}

fn shapes(ops: usize) -> Vec<Shape> {
    if ops == 0 {
        return vec![Shape::Leaf];
    }
    let mut out = Vec::new();
    for left in 0..ops {
        for l in shapes(left) {
            for r in shapes(ops - 1 - left) {
                out.push(Shape::Bin(Box::new(l.clone()), Box::new(r)));
            }
        }
    }
    out
}

fn fill(shape: &Shape, rng: &mut impl Rng) -> Node {
    match shape {
        Shape::Leaf => Node::Num(rng.random_range(OPERAND_RANGE)),
        Shape::Bin(l, r) => {
            let left = fill(l, rng);
            let op = ArithOp::ALL[rng.random_range(0..4)];
            Node::Bin(Box::new(left), op, Box::new(fill(r, rng)))
        }
    }
}

/// An expression with its true value and the value stated in the
/// statement.
#[derive(Debug, Clone, PartialEq)]
pub struct ArithExpression {
    root: Node,
    pub value: i64,
    pub stated: i64,
}

impl ArithExpression {
    /// Draws a uniformly random tree shape and rejection-samples operands
    /// and operators until every division is exact.
    pub fn random(ops: usize, rng: &mut impl Rng) -> Self {
        let all = shapes(ops);
        let shape = &all[rng.random_range(0..all.len())];
        loop {
            let root = fill(shape, rng);
            if let Some(value) = root.eval() {
                return Self { root, value, stated: value };
            }
        }
    }

    pub fn operands(&self) -> Vec<i64> {
        let (mut a, mut o) = (Vec::new(), Vec::new());
        self.root.collect(&mut a, &mut o);
        a
    }

    pub fn operators(&self) -> Vec<ArithOp> {
        let (mut a, mut o) = (Vec::new(), Vec::new());
        self.root.collect(&mut a, &mut o);
        o
    }

    pub fn expression(&self) -> String {
        let mut s = String::new();
        self.root.write(&mut s, true);
        s
    }

    pub fn is_correct(&self) -> bool {
        self.stated == self.value
    }
}

impl fmt::Display for ArithExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.expression(), self.stated)
    }
}

fn random_offset(rng: &mut impl Rng) -> i64 {
    let magnitude = rng.random_range(1..=MAX_OFFSET);
    if rng.random_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

/// A1–A3. True items state the value; false items state value + offset with
/// offset uniform over [−10, −1] ∪ [1, 10].
pub fn gen_arith(n_ops: usize, n: usize, seed: u64) -> Result<Vec<LabeledStatement>> {
    let task = match n_ops {
        1 => TaskId::A1,
        2 => TaskId::A2,
        3 => TaskId::A3,
        other => return Err(TaskgenError::InvalidOps(other)),
    };
    require_even(n)?;
    let mut rng = rng_for(seed);
    let mut drafts = Vec::with_capacity(n);
    for i in 0..n {
        let label = i < n / 2;
        let mut expr = ArithExpression::random(n_ops, &mut rng);
        if !label {
            expr.stated = expr.value + random_offset(&mut rng);
        }
        let mut meta = Meta::new();
        meta.insert("expression".into(), json!(expr.expression()));
        meta.insert("stated".into(), json!(expr.stated));
        meta.insert("n_ops".into(), json!(n_ops));
        drafts.push(Draft {
            text: expr.to_string(),
            label,
            meta,
        });
    }
    Ok(finalize(task, drafts, &mut rng))
}

// ── Parsing ─────────────────────────────────────────────────────────────────

/// Evaluates an integer expression written with `+ - * /` (also `×`, `÷`
/// and `−`), standard precedence, left associativity. Division must be
/// exact.
pub fn parse_and_eval(src: &str) -> Result<i64> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens: &tokens, pos: 0, src };
    let v = p.expr()?;
    if p.pos != tokens.len() {
        return Err(p.error());
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok {
    Num(i64),
    Op(ArithOp),
    Open,
    Close,
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            ' ' | '\t' => {
                chars.next();
            }
            '0'..='9' => {
                let mut v: i64 = 0;
                while let Some(&d) = chars.peek() {
                    let Some(digit) = d.to_digit(10) else { break };
                    v = v
                        .checked_mul(10)
                        .and_then(|v| v.checked_add(i64::from(digit)))
                        .ok_or_else(|| TaskgenError::Parse(src.into()))?;
                    chars.next();
                }
                out.push(Tok::Num(v));
            }
            '+' => {
                chars.next();
                out.push(Tok::Op(ArithOp::Add));
            }
            '-' | '−' => {
                chars.next();
                out.push(Tok::Op(ArithOp::Sub));
            }
            '*' | '×' => {
                chars.next();
                out.push(Tok::Op(ArithOp::Mul));
            }
            '/' | '÷' => {
                chars.next();
                out.push(Tok::Op(ArithOp::Div));
            }
            '(' => {
                chars.next();
                out.push(Tok::Open);
            }
            ')' => {
                chars.next();
                out.push(Tok::Close);
            }
            _ => return Err(TaskgenError::Parse(src.into())),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Tok],
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn error(&self) -> TaskgenError {
        TaskgenError::Parse(self.src.into())
    }

    fn peek(&self) -> Option<Tok> {
        self.tokens.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<i64> {
        let mut acc = self.term()?;
        while let Some(Tok::Op(op @ (ArithOp::Add | ArithOp::Sub))) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = op.apply(acc, rhs).ok_or_else(|| self.error())?;
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<i64> {
        let mut acc = self.factor()?;
        while let Some(Tok::Op(op @ (ArithOp::Mul | ArithOp::Div))) = self.peek() {
            self.pos += 1;
            let rhs = self.factor()?;
            acc = op.apply(acc, rhs).ok_or_else(|| self.error())?;
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<i64> {
        match self.peek() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(v)
            }
            Some(Tok::Op(ArithOp::Sub)) => {
                self.pos += 1;
                Ok(-self.factor()?)
            }
            Some(Tok::Open) => {
                self.pos += 1;
                let v = self.expr()?;
                if self.peek() != Some(Tok::Close) {
                    return Err(self.error());
                }
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.error()),
        }
    }
}
