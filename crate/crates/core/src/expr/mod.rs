//! Symbolic expressions over the jet variables `t`, `x` and the dependent
//! variable `w` (spelled `v` or `u` in input).
//!
//! Trees are immutable and cheaply clonable. Besides the parseable node
//! kinds, an expression may contain [`Node::Call`] nodes: opaque functions of
//! one argument (fixed antiderivatives) that know their own derivative. They
//! print with a label that the parser rejects.

mod diff;
mod eval;
pub mod num;
mod parse;
mod sample;
mod simplify;

use std::fmt;
use std::sync::Arc;

pub use eval::{DomainKind, EvalError};
pub use num::Num;
pub use parse::{parse, ParseError};
pub use sample::{as_constant, probably_zero, BoxError, SampleBox, ZeroTestError, ZERO_CEILING};

/// One of the three jet coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    T,
    X,
    /// The dependent variable: `v` for the potential class, `u` otherwise.
    W,
}

impl Var {
    pub const ALL: [Var; 3] = [Var::T, Var::X, Var::W];

    pub fn index(self) -> usize {
        match self {
            Var::T => 0,
            Var::X => 1,
            Var::W => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::X => "x",
            Var::W => "v",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Ln,
    Sqrt,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

/// An opaque scalar function of one real argument with a symbolic
/// derivative, written in terms of `t`.
pub trait TimeFn: Send + Sync + fmt::Debug {
    fn label(&self) -> String;
    fn value(&self, t: f64) -> Result<f64, EvalError>;
    /// Derivative as an expression in `t`.
    fn derivative(&self) -> &Expr;
}

#[derive(Clone, Debug)]
pub enum Node {
    Const(Num),
    Var(Var),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    Pow(Expr, Num),
    Func(Func, Expr),
    Call(Arc<dyn TimeFn>, Expr),
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        use Node::*;
        match (self, other) {
            (Const(a), Const(b)) => a == b,
            (Var(a), Var(b)) => a == b,
            (Add(a, b), Add(c, d))
            | (Sub(a, b), Sub(c, d))
            | (Mul(a, b), Mul(c, d))
            | (Div(a, b), Div(c, d)) => a == c && b == d,
            (Neg(a), Neg(b)) => a == b,
            (Pow(a, p), Pow(b, q)) => p == q && a == b,
            (Func(f, a), Func(g, b)) => f == g && a == b,
            (Call(f, a), Call(g, b)) => same_fn(f, g) && a == b,
            _ => false,
        }
    }
}

fn same_fn(a: &Arc<dyn TimeFn>, b: &Arc<dyn TimeFn>) -> bool {
    std::ptr::addr_eq(Arc::as_ptr(a), Arc::as_ptr(b))
}

#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || *self.0 == *other.0
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl Expr {
    /// Wrap a node without any folding.
    pub fn raw(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(c: Num) -> Expr {
        Expr::raw(Node::Const(c))
    }

    pub fn int(n: i64) -> Expr {
        Expr::constant(Num::int(n))
    }

    pub fn rational(p: i64, q: i64) -> Expr {
        Expr::constant(Num::ratio(p, q))
    }

    /// A float constant; integral values are stored exactly.
    pub fn num(v: f64) -> Expr {
        Expr::constant(Num::from_f64(v))
    }

    pub fn var(v: Var) -> Expr {
        Expr::raw(Node::Var(v))
    }

    pub fn t() -> Expr {
        Expr::var(Var::T)
    }

    pub fn x() -> Expr {
        Expr::var(Var::X)
    }

    pub fn w() -> Expr {
        Expr::var(Var::W)
    }

    pub fn call(f: Arc<dyn TimeFn>, arg: Expr) -> Expr {
        Expr::raw(Node::Call(f, arg))
    }

    pub fn as_const(&self) -> Option<Num> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const().is_some_and(|c| c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.as_const().is_some_and(|c| c.is_one())
    }

    // Light folding constructors. They never change the value where the
    // input is defined; a few of them (0*a, a-a) enlarge the domain.

    pub fn add(self, b: Expr) -> Expr {
        match (self.as_const(), b.as_const()) {
            (Some(x), Some(y)) if x.add(y).is_finite() => Expr::constant(x.add(y)),
            (Some(x), _) if x.is_zero() => b,
            (_, Some(y)) if y.is_zero() => self,
            (_, Some(y)) if y.is_negative() => self.sub(Expr::constant(y.neg())),
            _ => match b.node() {
                Node::Neg(inner) => self.sub(inner.clone()),
                _ => Expr::raw(Node::Add(self, b)),
            },
        }
    }

    pub fn sub(self, b: Expr) -> Expr {
        match (self.as_const(), b.as_const()) {
            (Some(x), Some(y)) if x.sub(y).is_finite() => Expr::constant(x.sub(y)),
            (_, Some(y)) if y.is_zero() => self,
            (Some(x), _) if x.is_zero() => b.neg(),
            _ if self == b => Expr::int(0),
            _ => match b.node() {
                Node::Neg(inner) => self.add(inner.clone()),
                _ => Expr::raw(Node::Sub(self, b)),
            },
        }
    }

    pub fn mul(self, b: Expr) -> Expr {
        match (self.as_const(), b.as_const()) {
            (Some(x), Some(y)) if x.mul(y).is_finite() => Expr::constant(x.mul(y)),
            (Some(x), _) if x.is_zero() => Expr::int(0),
            (_, Some(y)) if y.is_zero() => Expr::int(0),
            (Some(x), _) if x.is_one() => b,
            (_, Some(y)) if y.is_one() => self,
            (Some(x), _) if x == Num::int(-1) => b.neg(),
            (_, Some(_)) => b.mul(self),
            _ => Expr::raw(Node::Mul(self, b)),
        }
    }

    pub fn div(self, b: Expr) -> Expr {
        match (self.as_const(), b.as_const()) {
            (_, Some(y)) if y.is_one() => self,
            (Some(x), Some(y)) => match x.div(y) {
                Some(q) if q.is_finite() => Expr::constant(q),
                _ => Expr::raw(Node::Div(self, b)),
            },
            (Some(x), None) if x.is_zero() => Expr::int(0),
            (None, Some(y)) => match Num::int(1).div(y) {
                Some(inv @ Num::Rat(_)) => Expr::constant(inv).mul(self),
                _ => Expr::raw(Node::Div(self, b)),
            },
            _ => Expr::raw(Node::Div(self, b)),
        }
    }

    pub fn neg(self) -> Expr {
        match self.node() {
            Node::Const(c) => Expr::constant(c.neg()),
            Node::Neg(inner) => inner.clone(),
            _ => Expr::raw(Node::Neg(self)),
        }
    }

    pub fn pow(self, r: Num) -> Expr {
        if r.is_zero() {
            return Expr::int(1);
        }
        if r.is_one() {
            return self;
        }
        if let (Some(c), Some(n)) = (self.as_const(), r.as_integer()) {
            if let Some(p) = c.powi(n) {
                if p.is_finite() {
                    return Expr::constant(p);
                }
            }
        }
        if let Node::Pow(base, s) = self.node() {
            if s.as_integer().is_some() && r.as_integer().is_some() {
                return base.clone().pow(s.mul(r));
            }
        }
        Expr::raw(Node::Pow(self, r))
    }

    pub fn powi(self, n: i64) -> Expr {
        self.pow(Num::int(n))
    }

    pub fn exp(self) -> Expr {
        if self.is_zero() {
            return Expr::int(1);
        }
        Expr::raw(Node::Func(Func::Exp, self))
    }

    pub fn ln(self) -> Expr {
        if self.is_one() {
            return Expr::int(0);
        }
        if let Node::Func(Func::Exp, inner) = self.node() {
            return inner.clone();
        }
        Expr::raw(Node::Func(Func::Ln, self))
    }

    pub fn sqrt(self) -> Expr {
        Expr::raw(Node::Func(Func::Sqrt, self))
    }

    pub fn abs(self) -> Expr {
        if let Some(c) = self.as_const() {
            return Expr::constant(if c.is_negative() { c.neg() } else { c });
        }
        Expr::raw(Node::Func(Func::Abs, self))
    }

    pub fn func(f: Func, arg: Expr) -> Expr {
        match f {
            Func::Exp => arg.exp(),
            Func::Ln => arg.ln(),
            Func::Sqrt => arg.sqrt(),
            Func::Abs => arg.abs(),
        }
    }

    /// Number of nodes in the tree.
    pub fn node_count(&self) -> usize {
        match self.node() {
            Node::Const(_) | Node::Var(_) => 1,
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                1 + a.node_count() + b.node_count()
            }
            Node::Neg(a) | Node::Pow(a, _) | Node::Func(_, a) | Node::Call(_, a) => 1 + a.node_count(),
        }
    }

    pub fn depends_on(&self, v: Var) -> bool {
        match self.node() {
            Node::Const(_) => false,
            Node::Var(u) => *u == v,
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.depends_on(v) || b.depends_on(v)
            }
            Node::Neg(a) | Node::Pow(a, _) | Node::Func(_, a) | Node::Call(_, a) => a.depends_on(v),
        }
    }

    /// Replace every occurrence of `v` by `with`.
    pub fn substitute(&self, v: Var, with: &Expr) -> Expr {
        match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(u) if *u == v => with.clone(),
            Node::Var(_) => self.clone(),
            Node::Add(a, b) => a.substitute(v, with).add(b.substitute(v, with)),
            Node::Sub(a, b) => a.substitute(v, with).sub(b.substitute(v, with)),
            Node::Mul(a, b) => a.substitute(v, with).mul(b.substitute(v, with)),
            Node::Div(a, b) => a.substitute(v, with).div(b.substitute(v, with)),
            Node::Neg(a) => a.substitute(v, with).neg(),
            Node::Pow(a, r) => a.substitute(v, with).pow(*r),
            Node::Func(f, a) => Expr::func(*f, a.substitute(v, with)),
            Node::Call(f, a) => Expr::call(f.clone(), a.substitute(v, with)),
        }
    }

    /// Simultaneous substitution of all three variables.
    pub fn substitute_all(&self, with: &[Expr; 3]) -> Expr {
        match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(u) => with[u.index()].clone(),
            Node::Add(a, b) => a.substitute_all(with).add(b.substitute_all(with)),
            Node::Sub(a, b) => a.substitute_all(with).sub(b.substitute_all(with)),
            Node::Mul(a, b) => a.substitute_all(with).mul(b.substitute_all(with)),
            Node::Div(a, b) => a.substitute_all(with).div(b.substitute_all(with)),
            Node::Neg(a) => a.substitute_all(with).neg(),
            Node::Pow(a, r) => a.substitute_all(with).pow(*r),
            Node::Func(f, a) => Expr::func(*f, a.substitute_all(with)),
            Node::Call(f, a) => Expr::call(f.clone(), a.substitute_all(with)),
        }
    }

    /// Precedence level used by the printer: 1 sum, 2 product, 3 unary
    /// minus, 4 power, 5 atom.
    fn level(&self) -> u8 {
        match self.node() {
            Node::Const(c) if c.is_negative() => 3,
            // `p/q` reads as a quotient next to `^`
            Node::Const(c) if c.as_integer().is_none() && matches!(c, Num::Rat(_)) => 4,
            Node::Const(_) | Node::Var(_) | Node::Func(..) | Node::Call(..) => 5,
            Node::Pow(..) => 4,
            Node::Neg(_) => 3,
            Node::Mul(..) | Node::Div(..) => 2,
            Node::Add(..) | Node::Sub(..) => 1,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.level() < min {
            write!(f, "(")?;
            self.fmt_at(f, 0)?;
            return write!(f, ")");
        }
        match self.node() {
            Node::Const(c) => write!(f, "{c}"),
            Node::Var(v) => write!(f, "{}", v.name()),
            Node::Add(a, b) => {
                a.fmt_at(f, 1)?;
                write!(f, " + ")?;
                b.fmt_at(f, 2)
            }
            Node::Sub(a, b) => {
                a.fmt_at(f, 1)?;
                write!(f, " - ")?;
                b.fmt_at(f, 2)
            }
            Node::Mul(a, b) => {
                a.fmt_at(f, 2)?;
                write!(f, " * ")?;
                b.fmt_at(f, 3)
            }
            Node::Div(a, b) => {
                a.fmt_at(f, 2)?;
                write!(f, " / ")?;
                b.fmt_at(f, 3)
            }
            Node::Neg(a) => {
                write!(f, "-")?;
                // a bare literal after '-' would be folded into a constant
                if matches!(a.node(), Node::Const(c) if !c.is_negative()) {
                    write!(f, "(")?;
                    a.fmt_at(f, 0)?;
                    write!(f, ")")
                } else {
                    a.fmt_at(f, 3)
                }
            }
            Node::Pow(a, r) => {
                a.fmt_at(f, 5)?;
                match r.as_integer() {
                    Some(n) if n >= 0 => write!(f, "^{n}"),
                    _ => write!(f, "^({r})"),
                }
            }
            Node::Func(func, a) => {
                write!(f, "{}(", func.name())?;
                a.fmt_at(f, 0)?;
                write!(f, ")")
            }
            Node::Call(func, a) => {
                write!(f, "{}(", func.label())?;
                a.fmt_at(f, 0)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident) => {
        impl std::ops::$tr for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$m(self, rhs)
            }
        }
        impl std::ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                Expr::$m(self.clone(), rhs.clone())
            }
        }
        impl std::ops::$tr<f64> for Expr {
            type Output = Expr;
            fn $m(self, rhs: f64) -> Expr {
                Expr::$m(self, Expr::num(rhs))
            }
        }
        impl std::ops::$tr<Expr> for f64 {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$m(Expr::num(self), rhs)
            }
        }
    };
}

binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);
binop!(Div, div);

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folding_constructors() {
        let x = Expr::x();
        assert_eq!(x.clone() + Expr::int(0), x);
        assert_eq!(Expr::int(0) * x.clone(), Expr::int(0));
        assert_eq!((x.clone() * 1.0).to_string(), "x");
        assert_eq!((Expr::int(2) * Expr::int(3)).to_string(), "6");
        assert_eq!((x.clone() / 2.0).to_string(), "1/2 * x");
        assert_eq!(x.clone().powi(2).powi(3).to_string(), "x^6");
        assert_eq!(x.clone().exp().ln(), x);
    }

    #[test]
    fn printer_parenthesizes_by_precedence() {
        let e = parse("(t + x) * (t - x) / x^2").unwrap();
        assert_eq!(e.to_string(), "(t + x) * (t - x) / x^2");
        let e = parse("a").err().unwrap();
        assert!(matches!(e, ParseError::UnknownIdentifier { .. }));
        let e = parse("-(2) + -3 * x^(-1/2)").unwrap();
        assert_eq!(e.to_string(), "-(2) + -3 * x^(-1/2)");
    }

    #[test]
    fn substitution() {
        let e = parse("t*x^2 + 1").unwrap();
        let s = e.substitute(Var::X, &parse("t + 1").unwrap());
        assert_eq!(s.eval_at(2.0, 0.0, 0.0).unwrap(), 19.0);
    }
}
