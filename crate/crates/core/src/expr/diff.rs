use super::{Expr, Func, Node, Num, Var};

impl Expr {
    /// Exact partial derivative.
    ///
    /// `abs` differentiates to `a' * a / abs(a)`, so `ln(abs(a))` gets the
    /// usual `a'/a` away from `a = 0`.
    pub fn diff(&self, v: Var) -> Expr {
        if !self.depends_on(v) {
            return Expr::int(0);
        }
        match self.node() {
            Node::Const(_) => Expr::int(0),
            Node::Var(u) => Expr::int(i64::from(*u == v)),
            Node::Add(a, b) => a.diff(v).add(b.diff(v)),
            Node::Sub(a, b) => a.diff(v).sub(b.diff(v)),
            Node::Mul(a, b) => a.diff(v).mul(b.clone()).add(a.clone().mul(b.diff(v))),
            Node::Div(a, b) => {
                let da = a.diff(v);
                let db = b.diff(v);
                if db.is_zero() {
                    return da.div(b.clone());
                }
                da.mul(b.clone())
                    .sub(a.clone().mul(db))
                    .div(b.clone().powi(2))
            }
            Node::Neg(a) => a.diff(v).neg(),
            Node::Pow(a, r) => Expr::constant(*r)
                .mul(a.clone().pow(r.sub(Num::int(1))))
                .mul(a.diff(v)),
            Node::Func(f, a) => {
                let da = a.diff(v);
                let outer = match f {
                    Func::Exp => self.clone(),
                    Func::Ln => return da.div(a.clone()),
                    Func::Sqrt => return da.div(Expr::int(2).mul(self.clone())),
                    Func::Abs => return da.mul(a.clone()).div(self.clone()),
                };
                outer.mul(da)
            }
            Node::Call(op, a) => op
                .derivative()
                .substitute(Var::T, a)
                .mul(a.diff(v)),
        }
    }

    /// `n`-th partial derivative.
    pub fn diff_n(&self, v: Var, n: usize) -> Expr {
        (0..n).fold(self.clone(), |e, _| e.diff(v))
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::{parse, Var};

    fn d(s: &str, v: Var) -> String {
        parse(s).unwrap().diff(v).simplify().to_string()
    }

    #[test]
    fn textbook_derivatives() {
        assert_eq!(d("t*x^2+1", Var::X), "2 * t * x");
        assert_eq!(parse("x^3").unwrap().diff_n(Var::X, 3).simplify().to_string(), "6");
        assert_eq!(d("exp(2*t)", Var::T), "2 * exp(2 * t)");
        assert_eq!(d("v^2 + x", Var::W), "2 * v");
    }

    #[test]
    fn log_of_abs_differentiates_like_log() {
        let e = parse("ln(abs(x))").unwrap().diff(Var::X);
        for x in [-2.0, -0.3, 0.4, 5.0] {
            assert!((e.eval_at(0.0, x, 0.0).unwrap() - 1.0 / x).abs() < 1e-14);
        }
    }
}
