//! Fixed antiderivatives `∫ g(t) dt` with a chosen base point, and the
//! exponentials `exp(c ∫ g dt)` built from them.
//!
//! Polynomials times `exp(affine t)` are integrated symbolically; anything
//! else goes through cached adaptive quadrature. Either way the result can be
//! embedded in an [`Expr`] whose derivative is exactly the integrand, so
//! transformation components built from antiderivatives differentiate
//! exactly.

pub mod quadrature;

use std::sync::Arc;

use crate::expr::{EvalError, Expr, Node, Num, TimeFn, Var};
use quadrature::CumulativeCache;

/// Default absolute quadrature tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Default base point of every fixed antiderivative.
pub const DEFAULT_BASE: f64 = 0.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("integrand `{0}` depends on x or the dependent variable")]
    NotTimeOnly(String),
    #[error("quadrature tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
    #[error("base point must be finite, got {0}")]
    BadBase(f64),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone)]
enum Backend {
    /// `A(t)` in closed form.
    Symbolic(Expr),
    Numeric(Arc<NumericIntegral>),
}

#[derive(Debug)]
struct NumericIntegral {
    integrand: Expr,
    label: String,
    cache: CumulativeCache,
}

impl TimeFn for NumericIntegral {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn value(&self, t: f64) -> Result<f64, EvalError> {
        let g = |s: f64| self.integrand.eval::<f64>(&[Some(s), None, None]);
        self.cache.value(&g, t)
    }

    fn derivative(&self) -> &Expr {
        &self.integrand
    }
}

/// A fixed antiderivative `A` of `g` with `A(t0) = 0`.
#[derive(Debug, Clone)]
pub struct Antiderivative {
    integrand: Expr,
    t0: f64,
    tol: f64,
    backend: Backend,
}

/// Build the antiderivative of `g` (an expression in `t` only) vanishing at
/// `t0`. Quadrature, when needed, uses absolute tolerance `tol`.
pub fn make_antiderivative(g: &Expr, t0: f64, tol: f64) -> Result<Antiderivative, AnalysisError> {
    Antiderivative::new(g, t0, tol)
}

impl Antiderivative {
    pub fn new(g: &Expr, t0: f64, tol: f64) -> Result<Antiderivative, AnalysisError> {
        if g.depends_on(Var::X) || g.depends_on(Var::W) {
            return Err(AnalysisError::NotTimeOnly(g.to_string()));
        }
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(AnalysisError::BadTolerance(tol));
        }
        if !t0.is_finite() {
            return Err(AnalysisError::BadBase(t0));
        }
        let integrand = g.simplify();
        let backend = match symbolic_primitive(&integrand) {
            Some(primitive) => {
                // subtract the value at t0 as computed by the very same
                // evaluation, so that A(t0) is exactly 0
                let at_base = primitive.eval_at(t0, 0.0, 0.0)?;
                Backend::Symbolic(primitive.sub(Expr::constant(Num::from_f64(at_base))))
            }
            None => Backend::Numeric(Arc::new(NumericIntegral {
                label: format!("A[{integrand}; {t0}]"),
                integrand: integrand.clone(),
                cache: CumulativeCache::new(t0, tol),
            })),
        };
        Ok(Antiderivative {
            integrand,
            t0,
            tol,
            backend,
        })
    }

    pub fn integrand(&self) -> &Expr {
        &self.integrand
    }

    pub fn base_point(&self) -> f64 {
        self.t0
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn is_symbolic(&self) -> bool {
        matches!(self.backend, Backend::Symbolic(_))
    }

    pub fn value(&self, t: f64) -> Result<f64, EvalError> {
        match &self.backend {
            Backend::Symbolic(e) => e.eval_at(t, 0.0, 0.0),
            Backend::Numeric(n) => n.value(t),
        }
    }

    /// `A(arg)` as an expression.
    pub fn at(&self, arg: &Expr) -> Expr {
        match &self.backend {
            Backend::Symbolic(e) => e.substitute(Var::T, arg),
            Backend::Numeric(n) => Expr::call(n.clone(), arg.clone()),
        }
    }

    /// `A(t)` as an expression.
    pub fn expr(&self) -> Expr {
        self.at(&Expr::t())
    }

    /// The same integrand with another base point.
    pub fn rebased(&self, t0: f64) -> Result<Antiderivative, AnalysisError> {
        Antiderivative::new(&self.integrand, t0, self.tol)
    }
}

/// `λ(t) = exp(c A(t))` for a fixed antiderivative `A` of `g`.
#[derive(Debug, Clone)]
pub struct ExpAntiderivative {
    inner: Antiderivative,
    c: f64,
}

pub fn exp_antiderivative(g: &Expr, c: f64, t0: f64, tol: f64) -> Result<ExpAntiderivative, AnalysisError> {
    Ok(ExpAntiderivative {
        inner: Antiderivative::new(g, t0, tol)?,
        c,
    })
}

impl ExpAntiderivative {
    pub fn inner(&self) -> &Antiderivative {
        &self.inner
    }

    pub fn coefficient(&self) -> f64 {
        self.c
    }

    pub fn value(&self, t: f64) -> Result<f64, EvalError> {
        Ok((self.c * self.inner.value(t)?).exp())
    }

    /// `λ'(t) = c g(t) λ(t)`.
    pub fn derivative(&self, t: f64) -> Result<f64, EvalError> {
        Ok(self.c * self.inner.integrand.eval_at(t, 0.0, 0.0)? * self.value(t)?)
    }

    pub fn at(&self, arg: &Expr) -> Expr {
        Expr::num(self.c).mul(self.inner.at(arg)).exp()
    }

    pub fn expr(&self) -> Expr {
        self.at(&Expr::t())
    }
}

/// `exp(a t + b)` factors and powers of `t` in one term.
struct TermShape {
    coeff: Num,
    power: i64,
    /// Rate `a` and offset `b` of the exponential factor.
    rate: Num,
    offset: Num,
}

fn term_shape(coeff: Num, atoms: &[(Expr, i64)]) -> Option<TermShape> {
    let mut shape = TermShape {
        coeff,
        power: 0,
        rate: Num::int(0),
        offset: Num::int(0),
    };
    for (atom, e) in atoms {
        match atom.node() {
            Node::Var(Var::T) if *e >= 0 => shape.power += e,
            Node::Func(crate::expr::Func::Exp, arg) => {
                let c = arg.coefficients(Var::T)?;
                let (b, a) = match c.as_slice() {
                    [b] => (b.as_const()?, Num::int(0)),
                    [b, a] => (b.as_const()?, a.as_const()?),
                    _ => return None,
                };
                let n = Num::int(*e);
                shape.rate = shape.rate.add(a.mul(n));
                shape.offset = shape.offset.add(b.mul(n));
            }
            _ if !atom.depends_on(Var::T) => {
                let v = atom.eval_at(0.0, 0.0, 0.0).ok()?.powi(i32::try_from(*e).ok()?);
                shape.coeff = shape.coeff.mul(Num::from_f64(v));
            }
            _ => return None,
        }
    }
    Some(shape)
}

/// A primitive of `g` when it is a sum of `c t^k exp(a t + b)` terms.
fn symbolic_primitive(g: &Expr) -> Option<Expr> {
    let terms = g.terms()?;
    let t = Expr::t();
    let mut out = Expr::int(0);
    for (coeff, atoms) in terms {
        let s = term_shape(coeff, &atoms)?;
        let k = s.power;
        let piece = if s.rate.is_zero() {
            let c = s.coeff.div(Num::int(k + 1))?;
            let scale = if s.offset.is_zero() {
                Expr::constant(c)
            } else {
                Expr::constant(c).mul(Expr::constant(s.offset).exp())
            };
            scale.mul(t.clone().powi(k + 1))
        } else {
            // ∫ t^k e^{at} = e^{at} Σ_j (-1)^j k!/(k-j)! t^{k-j} / a^{j+1}
            let mut poly = Expr::int(0);
            let mut falling = Num::int(1);
            for j in 0..=k {
                let sign = if j % 2 == 0 { Num::int(1) } else { Num::int(-1) };
                let c = s.coeff.mul(sign).mul(falling).div(s.rate.powi(j + 1)?)?;
                poly = poly.add(Expr::constant(c).mul(t.clone().powi(k - j)));
                falling = falling.mul(Num::int(k - j));
            }
            let exponent = Expr::constant(s.rate).mul(t.clone()).add(Expr::constant(s.offset));
            poly.mul(exponent.exp())
        };
        out = out.add(piece);
    }
    out.coefficients(Var::X)?;
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn anti(g: &str, t0: f64) -> Antiderivative {
        make_antiderivative(&parse(g).unwrap(), t0, DEFAULT_TOL).unwrap()
    }

    #[test]
    fn symbolic_examples() {
        let a = anti("2*t", 0.0);
        assert!(a.is_symbolic());
        assert_eq!(a.expr().to_string(), "t^2");
        let a = anti("1", 3.0);
        assert_eq!(a.expr().to_string(), "t - 3");
        let a = anti("t*exp(2*t)", 0.5);
        assert!(a.is_symbolic());
        assert_eq!(a.value(0.5).unwrap(), 0.0);
        let exact = |t: f64| (2.0 * t - 1.0) * (2.0 * t).exp() / 4.0;
        assert!((a.value(1.3).unwrap() - (exact(1.3) - exact(0.5))).abs() < 1e-12);
    }

    #[test]
    fn numeric_gaussian() {
        let a = anti("exp(-t^2)", 0.0);
        assert!(!a.is_symbolic());
        assert_eq!(a.value(0.0).unwrap(), 0.0);
        assert!((a.value(1.0).unwrap() - 0.746_824_132_812_427).abs() < 1e-10);
    }

    #[test]
    fn derivative_of_embedded_antiderivative_is_integrand() {
        let a = anti("1/(1+t^2)", 0.0);
        let e = a.expr().diff(Var::T);
        assert!((e.eval_at(0.7, 0.0, 0.0).unwrap() - 1.0 / 1.49).abs() < 1e-15);
        assert!((a.value(1.0).unwrap() - std::f64::consts::FRAC_PI_4).abs() < 1e-10);
    }

    #[test]
    fn exp_antiderivative_examples() {
        let one = parse("1").unwrap();
        let l = exp_antiderivative(&one, 2.0, 0.0, DEFAULT_TOL).unwrap();
        assert!((l.value(1.0).unwrap() - 2f64.exp()).abs() < 1e-12);
        let zero = parse("0").unwrap();
        let l = exp_antiderivative(&zero, 2.0, 0.0, DEFAULT_TOL).unwrap();
        assert_eq!(l.value(0.4).unwrap(), 1.0);
        let l = exp_antiderivative(&parse("t").unwrap(), 2.0, 0.0, DEFAULT_TOL).unwrap();
        assert!((l.derivative(1.0).unwrap() / l.value(1.0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_time_integrands() {
        let g = parse("x*t").unwrap();
        assert!(matches!(
            make_antiderivative(&g, 0.0, DEFAULT_TOL),
            Err(AnalysisError::NotTimeOnly(_))
        ));
    }

    #[test]
    fn singular_integrand_names_the_point() {
        let a = anti("1/(t-1/2)", 0.0);
        let err = a.value(1.0).unwrap_err();
        assert!(err.to_string().contains("t = 0.5"), "{err}");
    }
}
