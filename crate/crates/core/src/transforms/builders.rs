//! Closed-form transformations of each equivalence group.

use crate::analysis::{make_antiderivative, Antiderivative, DEFAULT_TOL};
use crate::classes::{decompose_quadratic, Family, QuadraticDecomposition, ZERO_TOL};
use crate::expr::{as_constant, probably_zero, Expr, SampleBox, Var};

use super::heat::heat_solution;
use super::params::{
    normalize_projective, C2Params, CUsualParams, GbeParams, P2LinearParams, P2Params, P3Params, Params, UsualPotParams,
};
use super::{PointTransformation, TransformError};

fn c(v: f64) -> Expr {
    Expr::num(v)
}

fn anti(g: Expr, t0: f64) -> Result<Expr, TransformError> {
    Ok(make_antiderivative(&g, t0, DEFAULT_TOL)?.expr())
}

/// Build from a parameter record. Groups whose maps depend on the
/// arbitrary element need `f`; `sbox` is used to analyse it.
pub fn build(p: &Params, f: Option<&Expr>, sbox: &SampleBox) -> Result<PointTransformation, TransformError> {
    p.validate()?;
    let need = || f.ok_or(TransformError::NeedsF(p.group()));
    match p {
        Params::UsualPot(q) => build_usual_pot(q),
        Params::CUsual(q) => build_c_usual(q),
        Params::Gbe(q) => build_gbe(q),
        Params::P3(q) => {
            let value = as_constant(need()?, &[Var::T, Var::X], sbox, ZERO_TOL)?
                .ok_or_else(|| TransformError::InvalidParams("p3 needs a constant f".into()))?;
            build_p3(q, value, sbox)
        }
        Params::P2(q) => build_p2(q, &decompose_quadratic(need()?, sbox)?),
        Params::C2(q) => build_c2(q, &decompose_quadratic(need()?, sbox)?),
        Params::P2Linear(q) => {
            let dec = decompose_quadratic(need()?, sbox)?;
            if !probably_zero(&dec.f2, sbox, ZERO_TOL)? {
                return Err(TransformError::InvalidParams("p2-linear needs f_xx = 0".into()));
            }
            build_p2_linear(q, &dec)
        }
    }
}

fn finish(t: Expr, x: Expr, w: Expr, family: Family, factor: Expr, p: Params) -> Result<PointTransformation, TransformError> {
    let label = p.group();
    Ok(PointTransformation::from_components(t, x, w, family)?
        .with_factor(factor)
        .with_params(p)
        .with_label(label))
}

pub fn build_usual_pot(p: &UsualPotParams) -> Result<PointTransformation, TransformError> {
    Params::UsualPot(*p).validate()?;
    let (t, x, v) = (Expr::t(), Expr::x(), Expr::w());
    let scale = p.kappa * p.kappa / p.alpha;
    let tn = c(p.alpha).mul(t.clone()).add(c(p.beta));
    let xn = c(p.kappa).mul(x.clone().add(c(p.mu1).mul(t.clone())).add(c(p.mu0)));
    let vn = c(scale).mul(
        v.add(c(p.mu1 / 2.0).mul(x))
            .add(c(p.mu1 * p.mu1 / 4.0).mul(t))
            .add(c(p.nu)),
    );
    finish(tn, xn, vn, Family::P, c(scale), Params::UsualPot(*p))
}

pub fn build_c_usual(p: &CUsualParams) -> Result<PointTransformation, TransformError> {
    Params::CUsual(*p).validate()?;
    let (t, x, u) = (Expr::t(), Expr::x(), Expr::w());
    let tn = c(p.alpha).mul(t.clone()).add(c(p.beta));
    let xn = c(p.kappa).mul(x.add(c(p.mu1).mul(t)).add(c(p.mu0)));
    let un = c(p.kappa / p.alpha).mul(u.add(c(p.mu1 / 2.0)));
    finish(tn, xn, un, Family::C, c(p.kappa * p.kappa / p.alpha), Params::CUsual(*p))
}

/// `γ t + δ` and the Möbius time `(α t + β)/(γ t + δ)`.
fn moebius(alpha: f64, beta: f64, gamma: f64, delta: f64) -> (Expr, Expr) {
    let t = Expr::t();
    let d = c(gamma).mul(t.clone()).add(c(delta));
    let tn = c(alpha).mul(t).add(c(beta)).div(d.clone());
    (d, tn)
}

pub fn build_gbe(p: &GbeParams) -> Result<PointTransformation, TransformError> {
    let original = Params::Gbe(*p);
    original.validate()?;
    let Params::Gbe(q) = normalize_projective(&original)? else { unreachable!() };
    let delta_ = q.alpha * q.delta - q.beta * q.gamma;
    let (t, x, u) = (Expr::t(), Expr::x(), Expr::w());
    let (d, tn) = moebius(q.alpha, q.beta, q.gamma, q.delta);
    let xn = c(q.kappa).mul(x.clone()).add(c(q.mu1).mul(t)).add(c(q.mu0)).div(d.clone());
    let un = c(q.kappa)
        .mul(d.clone())
        .mul(u)
        .sub(c(q.kappa * q.gamma).mul(x))
        .add(c(q.mu1 * q.delta - q.mu0 * q.gamma))
        .div(c(delta_));
    Ok(finish(tn, xn, un, Family::L, c(q.kappa * q.kappa / delta_), original)?.with_guard(d))
}

/// The Möbius group of `P_f` with constant `f`, with `F²` from the heat
/// catalog. Projective parameters are normalized before use, so `k` refers
/// to the canonical representative.
pub fn build_p3(p: &P3Params, f: f64, sbox: &SampleBox) -> Result<PointTransformation, TransformError> {
    let original = Params::P3(p.clone());
    original.validate()?;
    if !(f != 0.0 && f.is_finite()) {
        return Err(TransformError::InvalidParams(format!("p3 needs a nonzero constant f, got {f}")));
    }
    let Params::P3(q) = normalize_projective(&original)? else { unreachable!() };
    let delta_ = q.alpha * q.delta - q.beta * q.gamma;
    let heat = heat_solution(&q.f2, f, sbox)?;
    let (t, x, v) = (Expr::t(), Expr::x(), Expr::w());
    let (d, tn) = moebius(q.alpha, q.beta, q.gamma, q.delta);
    let xn = c(q.kappa).mul(x.clone().add(c(q.mu1).mul(t.clone())).add(c(q.mu0))).div(d.clone());
    // ln|F¹|, written out to keep the exponentials from overflowing
    let ln_f1 = if q.gamma != 0.0 {
        let s = c(q.gamma).mul(x).add(c(q.mu0 * q.gamma - q.mu1 * q.delta));
        c(q.k.abs().ln())
            .add(Expr::rational(1, 2).mul(d.clone().abs().ln()))
            .sub(s.powi(2).div(c(4.0 * f * q.gamma).mul(d.clone())))
    } else {
        c(q.k.abs().ln()).add(c(2.0 * q.mu1).mul(x).add(c(q.mu1 * q.mu1).mul(t)).div(c(4.0 * f)))
    };
    let inner = v.div(c(f)).exp().add(heat.expr.clone());
    let scale = q.kappa * q.kappa * f / delta_;
    let vn = c(scale).mul(ln_f1.add(inner.clone().abs().ln()));
    let mut out = finish(tn, xn, vn, Family::P, c(q.kappa * q.kappa / delta_), original)?.with_guard(d);
    if !heat.expr.is_zero() {
        out = out.with_guard(inner);
    }
    Ok(out)
}

/// `λ = exp(2∫f2)`, `1/λ`, as expressions.
pub fn lambda_pair(dec: &QuadraticDecomposition, t0: f64) -> Result<(Expr, Expr), TransformError> {
    let a = make_antiderivative(&dec.f2, t0, DEFAULT_TOL)?;
    let lam = c(2.0).mul(a.expr()).exp();
    let inv = c(-2.0).mul(a.expr()).exp();
    Ok((lam, inv))
}

/// `X¹ = 1/(c1 ∫dt/λ + c2)` together with its denominator.
fn x1(inv_lam: &Expr, c1: f64, c2: f64, t0: f64) -> Result<(Expr, Expr), TransformError> {
    let den = c(c1).mul(anti(inv_lam.clone(), t0)?).add(c(c2));
    Ok((Expr::int(1).div(den.clone()), den))
}

/// The group of the subclass with `f_xxx = 0`; antiderivatives are fixed
/// by vanishing at `t0`.
pub fn build_p2(p: &P2Params, dec: &QuadraticDecomposition) -> Result<PointTransformation, TransformError> {
    Params::P2(*p).validate()?;
    let t0 = p.t0;
    let (x, v) = (Expr::x(), Expr::w());
    let (_, inv_lam) = lambda_pair(dec, t0)?;
    let (x1, den) = x1(&inv_lam, p.c1, p.c2, t0)?;
    let a2 = anti(dec.f1.clone().mul(inv_lam.clone()), t0)?;
    let a2c3 = a2.add(c(p.c3));
    let x2 = c(p.c1 / 2.0).mul(x1.clone()).mul(a2c3.clone());
    let b1 = anti(x1.clone().powi(2), t0)?;
    let b2 = anti(x1.clone().powi(2).mul(a2c3), t0)?;
    let b3 = anti(x2.clone().powi(2), t0)?;
    let b4 = anti(dec.f0.clone().mul(inv_lam.clone()).mul(x1.clone()), t0)?;
    let tn = b1.div(c(p.c0)).add(c(p.c5));
    let xn = x1.clone().mul(x.clone()).add(c(p.c1).mul(b2)).add(c(p.c4));
    let vn = c(p.c0)
        .mul(
            v.sub(c(p.c1 / 4.0).mul(x1.clone()).mul(inv_lam).mul(x.clone().powi(2)))
                .add(x2.mul(x))
                .add(b3)
                .add(c(p.c1 / 2.0).mul(b4)),
        )
        .add(c(p.c6));
    Ok(finish(tn, xn, vn, Family::P, c(p.c0), Params::P2(*p))?.with_guard(den))
}

/// Möbius form of the `f2 = 0` group (f = f1(t) x + f0(t)). Projective
/// parameters are normalized first, so `ν` refers to the canonical tuple.
pub fn build_p2_linear(p: &P2LinearParams, dec: &QuadraticDecomposition) -> Result<PointTransformation, TransformError> {
    let original = Params::P2Linear(*p);
    original.validate()?;
    let Params::P2Linear(q) = normalize_projective(&original)? else { unreachable!() };
    let t0 = q.t0;
    if q.gamma * t0 + q.delta == 0.0 {
        return Err(TransformError::InvalidParams(format!("base point t0 = {t0} is the pole of the Möbius time")));
    }
    let delta_ = q.alpha * q.delta - q.beta * q.gamma;
    let (t, x, v) = (Expr::t(), Expr::x(), Expr::w());
    let (d, tn) = moebius(q.alpha, q.beta, q.gamma, q.delta);
    let g = anti(dec.f1.clone(), t0)?;
    let gn = c(q.gamma).mul(g.clone()).add(c(q.nu));
    let h1 = anti(g.div(d.clone().powi(2)), t0)?;
    let h2 = anti(gn.clone().div(d.clone()).powi(2), t0)?;
    let h3 = anti(dec.f0.clone().div(d.clone()), t0)?;
    let at_b = c(q.alpha).mul(t).add(c(q.beta));
    let xn = c(q.kappa)
        .mul(x.clone().add(c(q.nu / delta_).mul(at_b)))
        .div(d.clone())
        .add(c(q.gamma * q.kappa).mul(h1))
        .add(c(q.c4));
    let quad = c(q.gamma)
        .mul(x.clone().powi(2))
        .sub(c(2.0).mul(gn).mul(x))
        .div(c(4.0).mul(d.clone()));
    let vn = c(q.kappa * q.kappa / delta_)
        .mul(v.sub(quad).add(c(0.25).mul(h2)).add(c(q.gamma / 2.0).mul(h3)))
        .add(c(q.c5));
    Ok(finish(tn, xn, vn, Family::P, c(q.kappa * q.kappa / delta_), original)?.with_guard(d))
}

/// The group of the conserved-form subclass with `f_xxx = 0`.
pub fn build_c2(p: &C2Params, dec: &QuadraticDecomposition) -> Result<PointTransformation, TransformError> {
    Params::C2(*p).validate()?;
    let t0 = p.t0;
    let (x, u) = (Expr::x(), Expr::w());
    let (_, inv_lam) = lambda_pair(dec, t0)?;
    let (x1, den) = x1(&inv_lam, p.c1, p.c2, t0)?;
    let a2 = anti(dec.f1.clone().mul(inv_lam.clone()), t0)?;
    let shift = c(p.c1).mul(a2).add(c(p.c3));
    let b1 = anti(x1.clone().powi(2), t0)?;
    let b2 = anti(x1.clone().powi(2).mul(shift.clone()), t0)?;
    let tn = b1.div(c(p.c0)).add(c(p.c5));
    let xn = x1.mul(x.clone()).add(b2).add(c(p.c4));
    let un = c(p.c0).mul(
        u.mul(den.clone())
            .sub(c(p.c1 / 2.0).mul(inv_lam).mul(x))
            .add(c(0.5).mul(shift)),
    );
    Ok(finish(tn, xn, un, Family::C, c(p.c0), Params::C2(*p))?.with_guard(den))
}

/// Fixed antiderivative helper re-exported for callers assembling their own
/// maps (e.g. the hat transformation).
pub fn antiderivative_expr(g: &Expr, t0: f64) -> Result<Expr, TransformError> {
    Ok(Antiderivative::new(g, t0, DEFAULT_TOL)?.expr())
}
