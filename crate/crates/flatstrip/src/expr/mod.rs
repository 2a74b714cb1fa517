//! Scalar expressions in named variables with exact second-order jets.
//!
//! Parsing produces a plain AST annotated with byte spans so every error,
//! including evaluation-time domain violations, can point back into the
//! source text. Evaluation propagates (value, gradient, Hessian) triples
//! through every node, so derivatives are exact up to rounding; nothing in
//! the crate differentiates an expression numerically.

mod jet;
mod parser;

pub use jet::{Jet1, Jet2};

use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
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
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    pub kind: NodeKind,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub enum NodeKind {
    Constant(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    /// Integer power, evaluated by repeated jet multiplication; valid for any
    /// base sign.
    PowInt(Box<Node>, i64),
    /// Real power, requires a strictly positive base at evaluation time.
    PowReal(Box<Node>, f64),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalErrorKind {
    DivisionByZero,
    LogNonPositive,
    SqrtNonPositive,
    PowNonPositiveBase,
    NonFinite,
}

impl fmt::Display for EvalErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            EvalErrorKind::DivisionByZero => "division by zero",
            EvalErrorKind::LogNonPositive => "log of a non-positive value",
            EvalErrorKind::SqrtNonPositive => "sqrt of a non-positive value",
            EvalErrorKind::PowNonPositiveBase => "real power of a non-positive base",
            EvalErrorKind::NonFinite => "non-finite value",
        };
        f.write_str(msg)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("exponent at byte {offset} must be a constant")]
    NonConstantExponent { offset: usize },
    #[error("invalid variable name `{name}`")]
    InvalidVariable { name: String },
    #[error("expected {expected} coordinates, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("{kind} at byte {offset}")]
    Eval { kind: EvalErrorKind, offset: usize },
}

/// A parsed expression together with its ordered variable list.
#[derive(Debug, Clone)]
pub struct Expression {
    root: Node,
    vars: Vec<String>,
}

/// Parse `text` over the ordered variable list `vars`.
pub fn parse_expression(text: &str, vars: &[&str]) -> Result<Expression, ExprError> {
    Expression::parse(text, vars)
}

impl Expression {
    pub fn parse(text: &str, vars: &[&str]) -> Result<Expression, ExprError> {
        for name in vars {
            let mut chars = name.chars();
            let head_ok = chars
                .next()
                .is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
            let tail_ok = chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !head_ok || !tail_ok || Func::from_name(name).is_some() {
                return Err(ExprError::InvalidVariable {
                    name: (*name).to_string(),
                });
            }
        }
        let root = parser::parse(text, vars)?;
        Ok(Expression {
            root,
            vars: vars.iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Value at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        Ok(self.eval_jet1(x)?.value)
    }

    /// Value and gradient at `x`.
    pub fn eval_jet1(&self, x: &[f64]) -> Result<Jet1, ExprError> {
        self.check_arity(x)?;
        jet::eval1(&self.root, x)
    }

    /// Value, gradient and Hessian at `x`. The Hessian is stored as a packed
    /// upper triangle, so its symmetry is structural rather than numerical.
    pub fn eval_jet2(&self, x: &[f64]) -> Result<Jet2, ExprError> {
        self.check_arity(x)?;
        let jet = jet::eval2(&self.root, x)?;
        if let Some(kind) = jet.non_finite() {
            return Err(ExprError::Eval {
                kind,
                offset: self.root.span.start,
            });
        }
        Ok(jet)
    }

    /// Structural equality ignoring source spans; constants compare by bits.
    pub fn ast_eq(&self, other: &Expression) -> bool {
        self.vars == other.vars && node_eq(&self.root, &other.root)
    }

    fn check_arity(&self, x: &[f64]) -> Result<(), ExprError> {
        if x.len() != self.vars.len() {
            return Err(ExprError::ArityMismatch {
                expected: self.vars.len(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

fn node_eq(a: &Node, b: &Node) -> bool {
    use NodeKind::*;
    match (&a.kind, &b.kind) {
        (Constant(x), Constant(y)) => x.to_bits() == y.to_bits(),
        (Var(i), Var(j)) => i == j,
        (Neg(x), Neg(y)) => node_eq(x, y),
        (Add(x1, x2), Add(y1, y2))
        | (Sub(x1, x2), Sub(y1, y2))
        | (Mul(x1, x2), Mul(y1, y2))
        | (Div(x1, x2), Div(y1, y2)) => node_eq(x1, y1) && node_eq(x2, y2),
        (PowInt(x, k), PowInt(y, l)) => k == l && node_eq(x, y),
        (PowReal(x, r), PowReal(y, s)) => r.to_bits() == s.to_bits() && node_eq(x, y),
        (Call(f, x), Call(g, y)) => f == g && node_eq(x, y),
        _ => false,
    }
}

// Binding powers shared by the parser and the printer; higher binds tighter.
pub(crate) const BP_ADD: u8 = 1;
pub(crate) const BP_MUL: u8 = 3;
pub(crate) const BP_NEG: u8 = 5;
pub(crate) const BP_POW: u8 = 7;

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_node(&self.root, &self.vars, 0, f)
    }
}

fn fmt_node(
    node: &Node,
    vars: &[String],
    parent_bp: u8,
    f: &mut fmt::Formatter<'_>,
) -> fmt::Result {
    use NodeKind::*;
    let bp = match &node.kind {
        Constant(_) | Var(_) | Call(..) => u8::MAX,
        Add(..) | Sub(..) => BP_ADD,
        Mul(..) | Div(..) => BP_MUL,
        Neg(_) => BP_NEG,
        PowInt(..) | PowReal(..) => BP_POW,
    };
    let parens = bp < parent_bp;
    if parens {
        f.write_str("(")?;
    }
    match &node.kind {
        Constant(c) => {
            if *c < 0.0 || c.is_sign_negative() {
                write!(f, "({c})")?;
            } else {
                write!(f, "{c}")?;
            }
        }
        Var(i) => f.write_str(&vars[*i])?,
        Neg(a) => {
            f.write_str("-")?;
            fmt_node(a, vars, BP_NEG, f)?;
        }
        Add(a, b) => {
            fmt_node(a, vars, BP_ADD, f)?;
            f.write_str(" + ")?;
            fmt_node(b, vars, BP_ADD + 1, f)?;
        }
        Sub(a, b) => {
            fmt_node(a, vars, BP_ADD, f)?;
            f.write_str(" - ")?;
            fmt_node(b, vars, BP_ADD + 1, f)?;
        }
        Mul(a, b) => {
            fmt_node(a, vars, BP_MUL, f)?;
            f.write_str("*")?;
            fmt_node(b, vars, BP_MUL + 1, f)?;
        }
        Div(a, b) => {
            fmt_node(a, vars, BP_MUL, f)?;
            f.write_str("/")?;
            fmt_node(b, vars, BP_MUL + 1, f)?;
        }
        PowInt(a, k) => {
            fmt_node(a, vars, BP_POW + 1, f)?;
            write!(f, "^{k}")?;
        }
        PowReal(a, r) => {
            fmt_node(a, vars, BP_POW + 1, f)?;
            write!(f, "^{r}")?;
        }
        Call(func, a) => {
            f.write_str(func.name())?;
            f.write_str("(")?;
            fmt_node(a, vars, 0, f)?;
            f.write_str(")")?;
        }
    }
    if parens {
        f.write_str(")")?;
    }
    Ok(())
}
