use std::fmt;

use super::{Expr, Func, Node, Var};
use crate::dual::{Dual2, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    DivisionByZero,
    LogOfNonPositive,
    SqrtOfNegative,
    NegativeBaseFractionalPower,
    /// A derivative was requested where the function has none (abs or sqrt at 0).
    NonDifferentiable,
    NonFinite,
    Quadrature(String),
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainKind::DivisionByZero => write!(f, "division by zero"),
            DomainKind::LogOfNonPositive => write!(f, "logarithm of a non-positive number"),
            DomainKind::SqrtOfNegative => write!(f, "square root of a negative number"),
            DomainKind::NegativeBaseFractionalPower => write!(f, "fractional power of a negative number"),
            DomainKind::NonDifferentiable => write!(f, "not differentiable"),
            DomainKind::NonFinite => write!(f, "non-finite value"),
            DomainKind::Quadrature(msg) => write!(f, "quadrature failed: {msg}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("variable `{}` is not bound", .0.name())]
    Unbound(Var),
    #[error("{kind} in `{at}`")]
    Domain { kind: DomainKind, at: String },
}

impl EvalError {
    pub fn domain(kind: DomainKind, at: impl fmt::Display) -> EvalError {
        let mut at = at.to_string();
        if at.len() > 120 {
            let cut = (0..=117).rev().find(|&i| at.is_char_boundary(i)).unwrap_or(0);
            at.truncate(cut);
            at.push_str("...");
        }
        EvalError::Domain { kind, at }
    }

    pub fn kind(&self) -> Option<&DomainKind> {
        match self {
            EvalError::Domain { kind, .. } => Some(kind),
            EvalError::Unbound(_) => None,
        }
    }
}

impl Expr {
    /// Evaluate on any [`Scalar`]; unbound slots are `None`.
    pub fn eval<S: Scalar>(&self, env: &[Option<S>; 3]) -> Result<S, EvalError> {
        let out = self.eval_inner(env)?;
        if !out.all_finite() {
            return Err(EvalError::domain(DomainKind::NonFinite, self));
        }
        Ok(out)
    }

    fn eval_inner<S: Scalar>(&self, env: &[Option<S>; 3]) -> Result<S, EvalError> {
        let fail = |kind| Err(EvalError::domain(kind, self));
        Ok(match self.node() {
            Node::Const(c) => S::from_f64(c.to_f64()),
            Node::Var(v) => env[v.index()].ok_or(EvalError::Unbound(*v))?,
            Node::Add(a, b) => a.eval_inner(env)? + b.eval_inner(env)?,
            Node::Sub(a, b) => a.eval_inner(env)? - b.eval_inner(env)?,
            Node::Mul(a, b) => a.eval_inner(env)? * b.eval_inner(env)?,
            Node::Div(a, b) => {
                let num = a.eval_inner(env)?;
                let den = b.eval_inner(env)?;
                if den.value() == 0.0 {
                    return fail(DomainKind::DivisionByZero);
                }
                num / den
            }
            Node::Neg(a) => -a.eval_inner(env)?,
            Node::Pow(a, r) => {
                let base = a.eval_inner(env)?;
                let v = base.value();
                match r.as_integer() {
                    Some(n) => {
                        if v == 0.0 && n < 0 {
                            return fail(DomainKind::DivisionByZero);
                        }
                        let Ok(n) = i32::try_from(n) else {
                            return fail(DomainKind::NonFinite);
                        };
                        let d1 = f64::from(n) * ipow(v, n - 1);
                        let d2 = if n == 1 { 0.0 } else { f64::from(n) * f64::from(n - 1) * ipow(v, n - 2) };
                        base.apply(v.powi(n), d1, d2)
                    }
                    None => {
                        let r = r.to_f64();
                        if v < 0.0 {
                            return fail(DomainKind::NegativeBaseFractionalPower);
                        }
                        if v == 0.0 {
                            if r < 0.0 {
                                return fail(DomainKind::DivisionByZero);
                            }
                            if S::DERIVATIVES && r < 2.0 {
                                return fail(DomainKind::NonDifferentiable);
                            }
                        }
                        let d1 = if S::DERIVATIVES { r * v.powf(r - 1.0) } else { 0.0 };
                        let d2 = if S::DERIVATIVES { r * (r - 1.0) * v.powf(r - 2.0) } else { 0.0 };
                        base.apply(v.powf(r), d1, d2)
                    }
                }
            }
            Node::Func(func, a) => {
                let arg = a.eval_inner(env)?;
                let v = arg.value();
                match func {
                    Func::Exp => {
                        let e = v.exp();
                        arg.apply(e, e, e)
                    }
                    Func::Ln => {
                        if v <= 0.0 {
                            return fail(DomainKind::LogOfNonPositive);
                        }
                        arg.apply(v.ln(), 1.0 / v, -1.0 / (v * v))
                    }
                    Func::Sqrt => {
                        if v < 0.0 {
                            return fail(DomainKind::SqrtOfNegative);
                        }
                        if v == 0.0 && S::DERIVATIVES {
                            return fail(DomainKind::NonDifferentiable);
                        }
                        let s = v.sqrt();
                        arg.apply(s, 0.5 / s, -0.25 / (s * v))
                    }
                    Func::Abs => {
                        if v == 0.0 && S::DERIVATIVES {
                            return fail(DomainKind::NonDifferentiable);
                        }
                        arg.apply(v.abs(), v.signum(), 0.0)
                    }
                }
            }
            Node::Call(op, a) => {
                let arg = a.eval_inner(env)?;
                let tv = arg.value();
                let value = op.value(tv)?;
                if S::DERIVATIVES {
                    // derivatives come from the symbolic derivative, evaluated
                    // to first order in its own argument
                    let d = op.derivative().eval(&[Some(Dual2::var(tv, 0)), None, None])?;
                    arg.apply(value, d.v, d.g[0])
                } else {
                    arg.apply(value, 0.0, 0.0)
                }
            }
        })
    }

    /// Plain evaluation with all three variables bound.
    pub fn evaluate(&self, point: &[f64; 3]) -> Result<f64, EvalError> {
        self.eval(&point.map(Some))
    }

    pub fn eval_at(&self, t: f64, x: f64, w: f64) -> Result<f64, EvalError> {
        self.evaluate(&[t, x, w])
    }

    /// Value with gradient and Hessian with respect to the dual seeds.
    pub fn eval_dual(&self, seeds: &[Dual2; 3]) -> Result<Dual2, EvalError> {
        self.eval(&seeds.map(Some))
    }
}

/// `v^n` that treats `0^k` for `k < 0` as 0; only used for derivative
/// coefficients that are multiplied by a vanishing factor.
fn ipow(v: f64, n: i32) -> f64 {
    if v == 0.0 && n < 0 {
        0.0
    } else {
        v.powi(n)
    }
}
