//! Maps between the classes: potentials of conserved-form and generalized
//! Burgers equations, the hat transformation, and the Cole–Hopf
//! linearization of constant-coefficient potential equations.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{make_antiderivative, AnalysisError, DEFAULT_TOL};
use crate::classes::{
    conserved_current_check, decompose_quadratic, l_characteristic, residual_with, Characteristic, ClassError,
    Equation, Family, Jet2, CURRENT_TOL, ZERO_TOL,
};
use crate::expr::{probably_zero, EvalError, Expr, SampleBox, Var, ZeroTestError};
use crate::groupoid::{pushforward_jet, verify_transport, GroupoidError};
use crate::report::VerificationReport;
use crate::transforms::{build_c_usual, build_usual_pot, CUsualParams, PointTransformation, TransformError, UsualPotParams};

/// Step of the Richardson-extrapolated central differences.
const FD_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MapError {
    #[error("f_xxx does not vanish; the hat map needs f quadratic in x")]
    NotQuadratic,
    #[error("linearization needs a nonzero constant f, got {0}")]
    BadConstant(f64),
    #[error(transparent)]
    Class(#[from] ClassError),
    #[error(transparent)]
    Groupoid(#[from] GroupoidError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    ZeroTest(#[from] ZeroTestError),
}

/// A potential equation attached to a `C` or `L` equation.
#[derive(Debug, Clone)]
pub struct PotentialLink {
    pub source: Equation,
    /// `λ(t)` (for `L`).
    pub lambda: Option<Expr>,
    /// `t' = ½∫λ`, `x' = λx + ∫f¹λ`, `v' = v` (for `L`).
    pub hat: Option<PointTransformation>,
    /// Coefficient of the potential equation in source variables: `f` for
    /// `C`, `2λf` for `L`.
    pub target_f: Expr,
    pub report: VerificationReport,
}

/// Summary used by reports.
#[derive(Debug, Clone, Serialize)]
pub struct LinkSummary {
    pub family: Family,
    pub lambda: Option<String>,
    pub hat: Option<[String; 3]>,
    pub target_f: String,
}

impl PotentialLink {
    pub fn summary(&self) -> LinkSummary {
        LinkSummary {
            family: self.source.family,
            lambda: self.lambda.as_ref().map(Expr::to_string),
            hat: self.hat.as_ref().and_then(|h| h.components()).map(|c| c.clone().map(|e| e.to_string())),
            target_f: self.target_f.to_string(),
        }
    }
}

/// Richardson-extrapolated central difference of `g` at 0.
fn fd(g: impl Fn(f64) -> Result<f64, EvalError>) -> Result<f64, EvalError> {
    let d = |h: f64| -> Result<f64, EvalError> { Ok((g(h)? - g(-h)?) / (2.0 * h)) };
    Ok((4.0 * d(FD_STEP / 2.0)? - d(FD_STEP)?) / 3.0)
}

/// Local realization of a third-order jet along `x`:
/// `(w_t, w_x, w_xx)` at `x + s`.
fn along_x(j: &Jet2, s: f64) -> Jet2 {
    let (w_tx, w_xxx) = (j.w_tx.unwrap_or(0.0), j.w_xxx.unwrap_or(0.0));
    Jet2::new(
        j.t,
        j.x + s,
        j.w + j.w_x * s + 0.5 * j.w_xx * s * s + w_xxx * s * s * s / 6.0,
        j.w_t + w_tx * s,
        j.w_x + j.w_xx * s + 0.5 * w_xxx * s * s,
        j.w_xx + w_xxx * s,
    )
}

fn third_order_jets(sbox: &SampleBox, n: usize) -> Vec<Jet2> {
    let sbox = sbox.clone().with_n(n);
    (0..n)
        .into_par_iter()
        .filter_map(|i| {
            let p = sbox.point(i)?;
            Some(Jet2::random(&mut sbox.rng(i), p, 1.0))
        })
        .collect()
}

/// `D_x` of the `P` residual against the `C` residual under
/// `u = m v_x` (`m = 1` is the potential; other values are controls).
/// `D_x` is a finite difference of the jet's local realization.
pub fn potential_identity(f: &Expr, sbox: &SampleBox, n: usize, m: f64) -> Result<VerificationReport, MapError> {
    let f_x = f.diff(Var::X);
    let at = |e: &Expr, t: f64, x: f64| e.eval::<f64>(&[Some(t), Some(x), None]);
    let rows: Vec<Result<(Vec<f64>, f64), EvalError>> = third_order_jets(sbox, n)
        .into_par_iter()
        .map(|v| {
            let dx_res = fd(|s| {
                let w = along_x(&v, s);
                Ok(residual_with(Family::P, at(f, w.t, w.x)?, 0.0, &w))
            })?;
            let u = Jet2::new(v.t, v.x, m * v.w_x, m * v.w_tx.unwrap_or(0.0), m * v.w_xx, m * v.w_xxx.unwrap_or(0.0));
            let res_c = residual_with(Family::C, at(f, v.t, v.x)?, at(&f_x, v.t, v.x)?, &u);
            Ok((v.to_vec(), dx_res - res_c))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(VerificationReport::from_samples(&rows, CURRENT_TOL))
}

/// `C_f → P_f` through `u = v_x`, `v_t = -(u² + f u_x)`.
pub fn potentialize_c(f: &Expr, sbox: &SampleBox, n: usize) -> Result<PotentialLink, MapError> {
    let source = Equation::new(Family::C, f.clone(), sbox.clone())?;
    let report = potential_identity(f, sbox, n, 1.0)?;
    Ok(PotentialLink {
        source,
        lambda: None,
        hat: None,
        target_f: f.clone(),
        report,
    })
}

/// The hat transformation for `L_f` with `f_xxx = 0`, its `λ`, and the
/// intermediate potential equation's coefficient data.
pub fn hat_transformation(f: &Expr, sbox: &SampleBox, t0: f64) -> Result<(PointTransformation, Expr), MapError> {
    if !probably_zero(&f.diff_n(Var::X, 3), sbox, ZERO_TOL)? {
        return Err(MapError::NotQuadratic);
    }
    let dec = decompose_quadratic(f, sbox)?;
    let lambda = l_characteristic(f, sbox, t0)?.expr();
    let half = Expr::rational(1, 2);
    let tn = half.mul(make_antiderivative(&lambda, t0, DEFAULT_TOL)?.expr());
    let xn = lambda
        .clone()
        .mul(Expr::x())
        .add(make_antiderivative(&dec.f1.clone().mul(lambda.clone()), t0, DEFAULT_TOL)?.expr());
    let hat = PointTransformation::from_components(tn, xn, Expr::w(), Family::P)?
        .with_factor(Expr::int(2).mul(lambda.clone()))
        .with_label("hat");
    Ok((hat, lambda))
}

/// `L_f → P_f'` with `f' = 2λf`: `v_x = λu` gives the intermediate
/// equation `v_t + v_x²/(2λ) + f v_xx - f_x v_x = 0`, which the hat map
/// carries to the potential equation. The report merges the hat-map
/// residual, the `D_x` identity of the intermediate equation and the
/// `λ`-current identity.
pub fn potentialize_l(f: &Expr, sbox: &SampleBox, t0: f64, n: usize) -> Result<PotentialLink, MapError> {
    let source = Equation::new(Family::L, f.clone(), sbox.clone())?;
    let (hat, lambda) = hat_transformation(f, sbox, t0)?;
    let fx = f.diff(Var::X);
    let at = |e: &Expr, t: f64, x: f64| e.eval::<f64>(&[Some(t), Some(x), None]);
    let lam = |t: f64| lambda.eval_at(t, 0.0, 0.0);
    let intermediate = |j: &Jet2| -> Result<f64, EvalError> {
        Ok(j.w_x * j.w_x / (2.0 * lam(j.t)?) + at(f, j.t, j.x)? * j.w_xx - at(&fx, j.t, j.x)? * j.w_x)
    };
    let target_f = Expr::int(2).mul(lambda.clone()).mul(f.clone());
    let sampled = sbox.clone().with_n(n);
    let hat_report = verify_transport(
        &hat,
        &sampled,
        |j| Ok(-intermediate(j)?),
        |src, _, pushed| {
            let ft = at(&target_f, src.t, src.x)?;
            Ok(residual_with(Family::P, ft, 0.0, pushed))
        },
    )?;
    // D_x(intermediate residual) = λ residual_L under v_x = λu
    let dlam = |t: f64| fd(|s| lam(t + s));
    let rows: Vec<Result<(Vec<f64>, f64), EvalError>> = third_order_jets(sbox, n)
        .into_par_iter()
        .map(|u| {
            let (l, dl) = (lam(u.t)?, dlam(u.t)?);
            // v and v_t do not enter D_x of the residual's x-dependence
            let mut v = Jet2::new(u.t, u.x, 0.0, 0.0, l * u.w, l * u.w_x);
            v.w_tx = Some(dl * u.w + l * u.w_t);
            v.w_xxx = Some(l * u.w_xx);
            let dx_res = fd(|s| {
                let w = along_x(&v, s);
                Ok(w.w_t + intermediate(&w)?)
            })?;
            let res_l = residual_with(Family::L, at(f, u.t, u.x)?, 0.0, &u);
            Ok((u.to_vec(), dx_res - l * res_l))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let scale = rows.iter().fold(0.0f64, |m, r| m.max(r.0.iter().fold(0.0, |a: f64, v| a.max(v.abs()))));
    let dx_report = VerificationReport::from_samples(&rows, CURRENT_TOL * (1.0 + scale));
    let current = conserved_current_check(Family::L, f, sbox, n, &Characteristic::Canonical)?;
    Ok(PotentialLink {
        source,
        lambda: Some(lambda),
        hat: Some(hat),
        target_f,
        report: hat_report.merge(&dx_report).merge(&current),
    })
}

/// The Cole–Hopf change `(t, x, v) ↦ (t, x, e^{v/f})` with its report.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub transform: PointTransformation,
    pub f: f64,
    pub report: VerificationReport,
}

/// `ṽ = e^{v/f}` maps `P_f` (constant `f`) to `ṽ_t + f ṽ_xx = 0`; checked
/// as the off-shell identity `ṽ_t + f ṽ_xx = (ṽ/f)(v_t + v_x² + f v_xx)`
/// together with the round trip `v = f ln ṽ`.
pub fn linearize_p3(f: f64, sbox: &SampleBox, n: usize) -> Result<Linearization, MapError> {
    if !(f != 0.0 && f.is_finite()) {
        return Err(MapError::BadConstant(f));
    }
    let fc = Expr::num(f);
    let transform = PointTransformation::from_components(Expr::t(), Expr::x(), Expr::w().div(fc.clone()).exp(), Family::P)?
        .with_label("cole-hopf");
    let inverse = PointTransformation::from_components(Expr::t(), Expr::x(), fc.mul(Expr::w().ln()), Family::P)?;
    let sampled = sbox.clone().with_n(n);
    let identity = verify_transport(
        &transform,
        &sampled,
        |j| Ok(j.w_t),
        |src, d, pushed| Ok(pushed.w_t + f * pushed.w_xx - d[2].v / f * residual_with(Family::P, f, 0.0, src)),
    )?;
    let round_trip = verify_transport(
        &transform,
        &sampled,
        |j| Ok(j.w_t),
        |src, _, pushed| {
            let back = pushforward_jet(&inverse, pushed)?;
            let diff = [back.t - src.t, back.x - src.x, back.w - src.w, back.w_t - src.w_t, back.w_x - src.w_x, back.w_xx - src.w_xx];
            Ok(diff.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        },
    )?;
    Ok(Linearization {
        transform,
        f,
        report: identity.merge(&round_trip),
    })
}

/// Heat residual `ṽ_t + f' ṽ_xx` of `P_f` jets (on-shell) after `t`:
/// zero when `t` maps `P_f` into solutions of the heat equation with
/// coefficient `f'`.
pub fn heat_report(t: &PointTransformation, f: f64, f_heat: f64, sbox: &SampleBox) -> Result<VerificationReport, MapError> {
    Ok(verify_transport(
        t,
        sbox,
        |j| Ok(-(j.w_x * j.w_x + f * j.w_xx)),
        |_, _, pushed| Ok(pushed.w_t + f_heat * pushed.w_xx),
    )?)
}

/// The potentialization triangle: a usual-pot transformation followed by
/// `u' = v'_x'` agrees with `u = v_x` followed by the C-usual
/// transformation with the same parameters, on `u` and `u_x`.
pub fn triangle_check(p: &CUsualParams, sbox: &SampleBox) -> Result<VerificationReport, MapError> {
    let c = build_c_usual(p)?;
    let pot = build_usual_pot(&UsualPotParams {
        alpha: p.alpha,
        beta: p.beta,
        kappa: p.kappa,
        mu1: p.mu1,
        mu0: p.mu0,
        nu: 0.0,
    })?;
    let report = verify_transport(
        &pot,
        sbox,
        |j| Ok(j.w_t),
        |src, _, vt| {
            // u_t and u_xx do not enter u' and u'_x'
            let u = Jet2::new(src.t, src.x, src.w_x, 0.0, src.w_xx, 0.0);
            let d = c.jet_at(&u.base())?;
            let ut = pushforward_jet(&c, &u)?;
            let drift = (d[0].v - vt.t).abs().max((d[1].v - vt.x).abs());
            Ok(drift.max((ut.w - vt.w_x).abs()).max((ut.w_x - vt.w_xx).abs()))
        },
    )?;
    Ok(report)
}
