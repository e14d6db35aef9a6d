use std::collections::{BTreeMap, HashMap};
use std::fmt;

use super::{coordinate_index, parse, Ast, BinOp, ExprError, Func, Node, NodeKind, Span};
use crate::scalar::{Scalar, ScalarError, ScalarField};

/// Variable bindings (over any scalar) and named real parameters.
#[derive(Debug, Clone)]
pub struct Env<S> {
    pub vars: HashMap<String, S>,
    pub params: HashMap<String, f64>,
}

impl<S> Default for Env<S> {
    fn default() -> Self {
        Self {
            vars: HashMap::new(),
            params: HashMap::new(),
        }
    }
}

impl<S> Env<S> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(mut self, name: &str, value: S) -> Self {
        self.vars.insert(name.to_string(), value);
        self
    }

    pub fn param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }
}

/// Name-resolved tree: variables are slot indices, parameters are folded in.
#[derive(Debug, Clone)]
enum Bound {
    Const(f64),
    Slot(usize),
    Neg(Box<Bound>),
    Binary(BinOp, Box<Bound>, Box<Bound>, Span),
    Call(Func, Vec<Bound>, Span),
}

fn bind(node: &Node, resolve: &dyn Fn(&str) -> Option<Resolved>) -> Result<Bound, ExprError> {
    let bound = match &node.kind {
        NodeKind::Num(v) => Bound::Const(*v),
        NodeKind::Var(name) => match resolve(name) {
            Some(Resolved::Slot(i)) => Bound::Slot(i),
            Some(Resolved::Value(v)) => Bound::Const(v),
            None => {
                return Err(ExprError::UnboundVariable { name: name.clone() });
            }
        },
        NodeKind::Neg(a) => Bound::Neg(Box::new(bind(a, resolve)?)),
        NodeKind::Binary(op, a, b) => Bound::Binary(
            *op,
            Box::new(bind(a, resolve)?),
            Box::new(bind(b, resolve)?),
            node.span.clone(),
        ),
        NodeKind::Call(f, args) => Bound::Call(
            *f,
            args.iter()
                .map(|a| bind(a, resolve))
                .collect::<Result<_, _>>()?,
            node.span.clone(),
        ),
    };
    Ok(fold(bound))
}

/// Collapse nodes whose children are all constants. Uses the same `f64`
/// arithmetic as evaluation, so results are unchanged bit for bit.
fn fold(node: Bound) -> Bound {
    let all_const = match &node {
        Bound::Neg(a) => matches!(**a, Bound::Const(_)),
        Bound::Binary(_, a, b, _) => {
            matches!(**a, Bound::Const(_)) && matches!(**b, Bound::Const(_))
        }
        Bound::Call(_, args, _) => args.iter().all(|a| matches!(a, Bound::Const(_))),
        _ => false,
    };
    if !all_const {
        return node;
    }
    match eval_bound::<f64>(&node, &[]) {
        Ok(v) => Bound::Const(v),
        Err(_) => node,
    }
}

enum Resolved {
    Slot(usize),
    Value(f64),
}

fn domain(err: ScalarError, span: &Span) -> ExprError {
    match err {
        ScalarError::Domain { op, arg } => ExprError::Domain {
            func: op,
            arg,
            span: span.clone(),
        },
        ScalarError::NonFinite(_) => ExprError::NonFinite { span: span.clone() },
    }
}

fn finite<S: Scalar>(v: S, span: &Span) -> Result<S, ExprError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ExprError::NonFinite { span: span.clone() })
    }
}

fn eval_bound<S: Scalar>(node: &Bound, slots: &[S]) -> Result<S, ExprError> {
    match node {
        Bound::Const(v) => Ok(S::constant(*v)),
        Bound::Slot(i) => Ok(slots[*i].clone()),
        Bound::Neg(a) => Ok(-eval_bound(a, slots)?),
        Bound::Binary(op, a, b, span) => {
            let lhs = eval_bound(a, slots)?;
            let rhs = eval_bound(b, slots)?;
            let out = match op {
                BinOp::Add => lhs + rhs,
                BinOp::Sub => lhs - rhs,
                BinOp::Mul => lhs * rhs,
                BinOp::Div => {
                    if rhs.value() == 0.0 {
                        return Err(ExprError::DivisionByZero { span: span.clone() });
                    }
                    lhs / rhs
                }
                BinOp::Pow => lhs.pow(&rhs).map_err(|e| domain(e, span))?,
            };
            finite(out, span)
        }
        Bound::Call(func, args, span) => {
            let a = eval_bound(&args[0], slots)?;
            let out = match func {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Tan => a.tan(),
                Func::Sinh => a.sinh(),
                Func::Cosh => a.cosh(),
                Func::Tanh => a.tanh(),
                Func::Exp => a.exp(),
                Func::Abs => a.abs(),
                Func::Log => a.ln().map_err(|e| domain(e, span))?,
                Func::Sqrt => a.sqrt().map_err(|e| domain(e, span))?,
                Func::Pow => {
                    let b = eval_bound(&args[1], slots)?;
                    a.pow(&b).map_err(|e| domain(e, span))?
                }
            };
            finite(out, span)
        }
    }
}

/// Evaluate `ast` with every free identifier looked up in `env`
/// (variables first, then parameters).
pub fn eval<S: Scalar>(ast: &Ast, env: &Env<S>) -> Result<S, ExprError> {
    let names: Vec<&String> = env.vars.keys().collect();
    let slots: Vec<S> = names.iter().map(|n| env.vars[*n].clone()).collect();
    let resolve = |name: &str| {
        names
            .iter()
            .position(|n| n.as_str() == name)
            .map(Resolved::Slot)
            .or_else(|| env.params.get(name).copied().map(Resolved::Value))
    };
    let bound = bind(ast.root(), &resolve)?;
    eval_bound(&bound, &slots)
}

/// An expression compiled against the coordinate layout `(x1..xn, u, w)`
/// with parameters substituted.
#[derive(Clone)]
pub struct Field {
    label: String,
    source: String,
    root: Bound,
    dim: usize,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Field({}: {})", self.label, self.source)
    }
}

impl Field {
    /// Compile `text` for an `n`-dimensional configuration space.
    /// Parameter names may not shadow coordinates.
    pub fn compile(
        label: impl Into<String>,
        text: &str,
        n: usize,
        params: &BTreeMap<String, f64>,
    ) -> Result<Field, ExprError> {
        let ast = parse(text)?;
        let slot_of = |name: &str| -> Option<usize> {
            match name {
                "u" => Some(n),
                "w" => Some(n + 1),
                _ => coordinate_index(name).filter(|k| *k <= n).map(|k| k - 1),
            }
        };
        ast.validate(|name| slot_of(name).is_some() || params.contains_key(name))?;
        let resolve = |name: &str| {
            slot_of(name)
                .map(Resolved::Slot)
                .or_else(|| params.get(name).copied().map(Resolved::Value))
        };
        Ok(Field {
            label: label.into(),
            source: text.to_string(),
            root: bind(ast.root(), &resolve)?,
            dim: n + 2,
        })
    }

    pub fn constant(label: impl Into<String>, value: f64, n: usize) -> Field {
        Field {
            label: label.into(),
            source: format!("{value:?}"),
            root: Bound::Const(value),
            dim: n + 2,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Number of coordinates expected, `n + 2`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.root, Bound::Const(v) if v == 0.0)
    }

    /// Evaluate at `coords = (x1..xn, u, w)`.
    pub fn eval_at<S: Scalar>(&self, coords: &[S]) -> Result<S, ExprError> {
        assert_eq!(coords.len(), self.dim, "field `{}` arity", self.label);
        eval_bound(&self.root, coords)
    }
}

impl ScalarField for Field {
    fn eval<S: Scalar>(&self, coords: &[S]) -> crate::Result<S> {
        self.eval_at(coords)
            .map_err(|source| crate::Error::FieldEval {
                field: self.label.clone(),
                source,
            })
    }
}
