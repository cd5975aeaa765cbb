//! Solutions `F(t, x)` of `F_t + f F_xx = 0` for constant `f`, the free
//! function of the constant-coefficient group.

use serde::{Deserialize, Serialize};

use crate::classes::ZERO_TOL;
use crate::expr::{parse, probably_zero, Expr, SampleBox, Var};

use super::TransformError;

/// Catalog entry, serialized as `{"kind": "...", ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum HeatKind {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `x`
    Linear,
    /// `x^2 - 2 f t`
    Quadratic,
    /// `x^3 - 6 f t x`
    Cubic,
    /// `exp(a (x - a f t))`
    Exponential {
        a: f64,
    },
    /// Any expression in `t, x`, checked against the heat equation.
    Expr {
        expr: String,
    },
}

#[derive(Debug, Clone)]
pub struct HeatSolution {
    pub kind: HeatKind,
    pub expr: Expr,
    /// The constant `f` the solution is built for.
    pub f: f64,
}

/// `F_t + f F_xx`.
pub fn heat_residual(e: &Expr, f: f64) -> Expr {
    e.diff(Var::T).add(Expr::num(f).mul(e.diff_n(Var::X, 2)))
}

/// Build a catalog solution for `f`; user expressions are accepted only if
/// they pass the heat-equation zero test on `sbox`.
pub fn heat_solution(kind: &HeatKind, f: f64, sbox: &SampleBox) -> Result<HeatSolution, TransformError> {
    if !(f != 0.0 && f.is_finite()) {
        return Err(TransformError::InvalidParams(format!("heat solution needs a nonzero constant f, got {f}")));
    }
    let (t, x, fc) = (Expr::t(), Expr::x(), Expr::num(f));
    let expr = match kind {
        HeatKind::Zero => Expr::int(0),
        HeatKind::Constant { value } => Expr::num(*value),
        HeatKind::Linear => x,
        HeatKind::Quadratic => x.powi(2).sub(Expr::int(2).mul(fc).mul(t)),
        HeatKind::Cubic => x.clone().powi(3).sub(Expr::int(6).mul(fc).mul(t).mul(x)),
        HeatKind::Exponential { a } => {
            let a = Expr::num(*a);
            a.clone().mul(x.sub(a.mul(fc).mul(t))).exp()
        }
        HeatKind::Expr { expr } => {
            let e = parse(expr).map_err(|err| TransformError::InvalidParams(format!("F2: {err}")))?;
            if e.depends_on(Var::W) {
                return Err(TransformError::NotHeatSolution(expr.clone()));
            }
            if !probably_zero(&heat_residual(&e, f), sbox, ZERO_TOL)? {
                return Err(TransformError::NotHeatSolution(expr.clone()));
            }
            e
        }
    };
    Ok(HeatSolution {
        kind: kind.clone(),
        expr,
        f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_solves_the_heat_equation() {
        let b = SampleBox::standard(4);
        for f in [1.0, -0.5] {
            for kind in [
                HeatKind::Zero,
                HeatKind::Constant { value: 3.0 },
                HeatKind::Linear,
                HeatKind::Quadratic,
                HeatKind::Cubic,
                HeatKind::Exponential { a: 1.0 },
                HeatKind::Exponential { a: -0.7 },
            ] {
                let h = heat_solution(&kind, f, &b).unwrap();
                assert!(probably_zero(&heat_residual(&h.expr, f), &b, ZERO_TOL).unwrap(), "{kind:?}");
            }
        }
        let q = heat_solution(&HeatKind::Quadratic, 1.0, &b).unwrap();
        assert_eq!(q.expr.eval_at(0.5, 2.0, 0.0).unwrap(), 3.0);
        let e = heat_solution(&HeatKind::Exponential { a: 1.0 }, 1.0, &b).unwrap();
        assert!((e.expr.eval_at(0.5, 2.0, 0.0).unwrap() - 1.5f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn user_expressions_are_checked() {
        let b = SampleBox::standard(4);
        let ok = HeatKind::Expr {
            expr: "x^2 + 2*t".into(),
        };
        assert!(heat_solution(&ok, -1.0, &b).is_ok());
        let bad = HeatKind::Expr { expr: "x^2".into() };
        assert!(matches!(heat_solution(&bad, -1.0, &b), Err(TransformError::NotHeatSolution(_))));
    }

    #[test]
    fn serde_shape() {
        let k: HeatKind = serde_json::from_str(r#"{"kind":"quadratic"}"#).unwrap();
        assert_eq!(k, HeatKind::Quadratic);
        let k: HeatKind = serde_json::from_str(r#"{"kind":"exponential","a":2}"#).unwrap();
        assert_eq!(k, HeatKind::Exponential { a: 2.0 });
    }
}
