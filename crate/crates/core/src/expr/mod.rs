//! Scenario expression language.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := power (('*' | '/') power)*
//! power   := unary ('^' power)?            right associative
//! unary   := '-' unary | primary
//! primary := number | ident | ident '(' args ')' | '(' expr ')'
//! ```
//!
//! Unary minus binds tighter than `^`, so `-x1^2` is `(-x1)^2`; write
//! `-(x1^2)` or `0 - x1^2` for the other reading. Functions: `sin cos tan
//! sinh cosh tanh exp log sqrt abs pow(a, b)`. Constants: `pi`, `e`.
//! There is no implicit multiplication.

mod eval;
mod parse;

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;

use thiserror::Error;

pub use eval::{eval, Env, Field};
pub use parse::parse;

pub type Span = Range<usize>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("unbound variable `{name}`")]
    UnboundVariable { name: String },

    #[error("division by zero in bytes {}..{}", span.start, span.end)]
    DivisionByZero { span: Span },

    #[error("{func} is undefined at {arg} (bytes {}..{})", span.start, span.end)]
    Domain {
        func: &'static str,
        arg: f64,
        span: Span,
    },

    #[error("non-finite value in bytes {}..{}", span.start, span.end)]
    NonFinite { span: Span },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Abs,
    Pow,
}

impl Func {
    const ALL: [Func; 11] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
        Func::Pow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Pow => "pow",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Pow => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Num(f64),
    Var(String),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    /// Byte range in the source text.
    pub span: Span,
}

/// Parsed expression. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Ast {
    root: Node,
}

impl Ast {
    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Free identifiers (variables and parameters), sorted.
    pub fn identifiers(&self) -> BTreeSet<String> {
        fn walk(node: &Node, out: &mut BTreeSet<String>) {
            match &node.kind {
                NodeKind::Num(_) => {}
                NodeKind::Var(name) => {
                    out.insert(name.clone());
                }
                NodeKind::Neg(a) => walk(a, out),
                NodeKind::Binary(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                NodeKind::Call(_, args) => args.iter().for_each(|a| walk(a, out)),
            }
        }
        let mut out = BTreeSet::new();
        walk(&self.root, &mut out);
        out
    }

    /// Reject any identifier for which `allowed` is false.
    pub fn validate(&self, allowed: impl Fn(&str) -> bool) -> Result<(), ExprError> {
        fn walk(node: &Node, allowed: &dyn Fn(&str) -> bool) -> Result<(), ExprError> {
            match &node.kind {
                NodeKind::Num(_) => Ok(()),
                NodeKind::Var(name) if allowed(name) => Ok(()),
                NodeKind::Var(name) => Err(ExprError::UnknownIdentifier {
                    name: name.clone(),
                    offset: node.span.start,
                }),
                NodeKind::Neg(a) => walk(a, allowed),
                NodeKind::Binary(_, a, b) => {
                    walk(a, allowed)?;
                    walk(b, allowed)
                }
                NodeKind::Call(_, args) => args.iter().try_for_each(|a| walk(a, allowed)),
            }
        }
        walk(&self.root, &allowed)
    }

    /// Highest `k` among referenced coordinates `x1..xk`, or 0.
    pub fn max_coordinate_index(&self) -> usize {
        self.identifiers()
            .iter()
            .filter_map(|id| coordinate_index(id))
            .max()
            .unwrap_or(0)
    }
}

/// `x<k>` with `k >= 1` maps to `Some(k)`.
pub(crate) fn coordinate_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            NodeKind::Num(v) => write!(f, "{v:?}"),
            NodeKind::Var(name) => f.write_str(name),
            NodeKind::Neg(a) => write!(f, "(-{a})"),
            NodeKind::Binary(op, a, b) => write!(f, "({a}{}{b})", op.symbol()),
            NodeKind::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Fully parenthesised; reparsing the output yields the same tree shape.
impl fmt::Display for Ast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}
