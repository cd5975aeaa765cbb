//! Admissible transformations: jet pushforward, verification on sampled
//! jets, the classifying equations, subclass preservation and a restricted
//! equivalence decision.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::DEFAULT_TOL;
use crate::classes::{classify, residual_with, ClassError, Equation, Family, Jet2, Subclass, ZERO_TOL};
use crate::dual::Dual2;
use crate::expr::{as_constant, probably_zero, EvalError, Expr, SampleBox, Var, ZeroTestError};
use crate::report::{jet_tolerance, VerificationReport};
use crate::transforms::{
    build, build_c_usual, build_p3, build_usual_pot, CUsualParams, HeatKind, P3Params, Params, PointTransformation,
    TransformError, UsualPotParams,
};

/// Points where `|T_t X_x W_w|` falls below this are not sampled.
pub const DEGENERACY_FLOOR: f64 = 1e-8;

/// Derivative slots of sampled jets are uniform in `[-DERIV_SCALE, DERIV_SCALE]`.
pub const DERIV_SCALE: f64 = 1.0;

const MAX_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GroupoidError {
    #[error("too few admissible sample points ({got} of {wanted})")]
    Starved { got: usize, wanted: usize },
    #[error("degenerate transformation at ({}, {}, {}): T_t = {t_t}, X_x = {x_x}", .at[0], .at[1], .at[2])]
    Degenerate { at: [f64; 3], t_t: f64, x_x: f64 },
    #[error("the transformation has no symbolic components")]
    NotSymbolic,
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Class(#[from] ClassError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    ZeroTest(#[from] ZeroTestError),
}

/// The arbitrary element of the target equation.
#[derive(Debug, Clone)]
pub enum Target {
    /// The transformation's closed-form rule `f' = g f` (evaluated at the
    /// source point).
    Induced,
    /// An explicit `f'(t', x')` in the new variables.
    Expr(Expr),
}

/// Transformed jet by the chain rule:
///
/// * `w'_x' = (W_x + W_w w_x)/X_x`
/// * `w'_x'x' = (W_xx + 2 W_xw w_x + W_ww w_x^2 + W_w w_xx)/X_x^2 - X_xx (W_x + W_w w_x)/X_x^3`
/// * `w'_t' = (W_t + W_w w_t - (W_x + W_w w_x) X_t/X_x)/T_t`
pub fn pushforward_jet(t: &PointTransformation, jet: &Jet2) -> Result<Jet2, GroupoidError> {
    let d = t.jet_at(&jet.base())?;
    push_with(&d, jet)
}

fn push_with(d: &[Dual2; 3], j: &Jet2) -> Result<Jet2, GroupoidError> {
    let (t_t, x_t, x_x, x_xx) = (d[0].d(0), d[1].d(0), d[1].d(1), d[1].dd(1, 1));
    if t_t == 0.0 || x_x == 0.0 {
        return Err(GroupoidError::Degenerate {
            at: j.base(),
            t_t,
            x_x,
        });
    }
    let w = &d[2];
    let (w_t, w_x, w_w) = (w.d(0), w.d(1), w.d(2));
    let (w_xx, w_xw, w_ww) = (w.dd(1, 1), w.dd(1, 2), w.dd(2, 2));
    let first = w_x + w_w * j.w_x;
    let wx = first / x_x;
    let wxx = (w_xx + 2.0 * w_xw * j.w_x + w_ww * j.w_x * j.w_x + w_w * j.w_xx) / (x_x * x_x)
        - x_xx * first / (x_x * x_x * x_x);
    let wt = (w_t + w_w * j.w_t - first * x_t / x_x) / t_t;
    Ok(Jet2::new(d[0].v, d[1].v, w.v, wt, wx, wxx))
}

/// One admissible sample: the base point's transformation jet and a random
/// source jet with free `w_t`.
struct Sample {
    jet: Jet2,
    d: [Dual2; 3],
}

/// Sample `i`: points from stream `i` of the box until one is in the domain
/// and nondegenerate.
fn sample(t: &PointTransformation, sbox: &SampleBox, i: usize) -> Option<Sample> {
    let mut rng = sbox.rng(i);
    for _ in 0..MAX_ATTEMPTS {
        let p = sbox.draw(&mut rng);
        if sbox.is_excluded(&p) {
            continue;
        }
        let Ok(d) = t.jet_at(&p) else { continue };
        let nd = d[0].d(0) * d[1].d(1) * d[2].d(2);
        if !(nd.abs() >= DEGENERACY_FLOOR) || !d.iter().all(Dual2::is_finite) {
            continue;
        }
        let mut jr = ChaCha8Rng::seed_from_u64(rng.random());
        return Some(Sample {
            jet: Jet2::random(&mut jr, p, DERIV_SCALE),
            d,
        });
    }
    None
}

fn samples(t: &PointTransformation, sbox: &SampleBox) -> Result<Vec<Sample>, GroupoidError> {
    let out: Vec<Sample> = (0..sbox.n).into_par_iter().filter_map(|i| sample(t, sbox, i)).collect();
    if 2 * out.len() < sbox.n {
        return Err(GroupoidError::Starved {
            got: out.len(),
            wanted: sbox.n,
        });
    }
    Ok(out)
}

/// Evaluate `f'` and `f'_x'` at the image of a sample.
struct TargetEval {
    target: Target,
    /// Induced rule `g f` and its `x`-derivative, in source variables.
    induced: Option<(Expr, Expr)>,
    expr_x: Option<Expr>,
}

impl TargetEval {
    fn new(t: &PointTransformation, f: &Expr, target: &Target) -> Result<TargetEval, GroupoidError> {
        Ok(match target {
            Target::Induced => {
                let g = t.factor().ok_or(TransformError::NoRule)?;
                let tf = g.clone().mul(f.clone());
                let tf_x = tf.diff(Var::X);
                TargetEval {
                    target: target.clone(),
                    induced: Some((tf, tf_x)),
                    expr_x: None,
                }
            }
            Target::Expr(e) => TargetEval {
                target: target.clone(),
                induced: None,
                expr_x: Some(e.diff(Var::X)),
            },
        })
    }

    fn at(&self, src: &Jet2, d: &[Dual2; 3]) -> Result<(f64, f64), EvalError> {
        match (&self.target, &self.induced, &self.expr_x) {
            (Target::Induced, Some((tf, tf_x)), _) => {
                let env = [Some(src.t), Some(src.x), None];
                Ok((tf.eval::<f64>(&env)?, tf_x.eval::<f64>(&env)? / d[1].d(1)))
            }
            (Target::Expr(e), _, Some(e_x)) => {
                let env = [Some(d[0].v), Some(d[1].v), None];
                Ok((e.eval::<f64>(&env)?, e_x.eval::<f64>(&env)?))
            }
            _ => unreachable!("constructed consistently"),
        }
    }
}

/// Admissibility of `t` from `P/C/L_f` to the same family with the target
/// arbitrary element: each sampled jet is closed on the source equation,
/// pushed forward, and the target residual is recorded. Failed target
/// evaluations count as NaN residuals. Tolerance:
/// [`jet_tolerance`] of the largest jet entry seen.
pub fn verify_admissible(
    t: &PointTransformation,
    family: Family,
    f: &Expr,
    target: &Target,
    sbox: &SampleBox,
) -> Result<VerificationReport, GroupoidError> {
    let source = Equation::new(family, f.clone(), sbox.clone())?;
    let tgt = TargetEval::new(t, f, target)?;
    verify_transport(
        t,
        sbox,
        |j| crate::classes::solve_wt(&source, j),
        |src, d, pushed| {
            let (ft, ft_x) = tgt.at(src, d)?;
            Ok(residual_with(family, ft, ft_x, pushed))
        },
    )
}

/// Generic transport check: `close` supplies the source `w_t`, `residual`
/// evaluates the target equation at the pushed jet.
pub fn verify_transport(
    t: &PointTransformation,
    sbox: &SampleBox,
    close: impl Fn(&Jet2) -> Result<f64, EvalError> + Sync,
    residual: impl Fn(&Jet2, &[Dual2; 3], &Jet2) -> Result<f64, GroupoidError> + Sync,
) -> Result<VerificationReport, GroupoidError> {
    let rows: Vec<(Vec<f64>, f64, f64)> = samples(t, sbox)?
        .into_par_iter()
        .map(|s| {
            let mut j = s.jet;
            j.w_tx = None;
            j.w_xxx = None;
            let outcome = close(&j).map_err(GroupoidError::from).and_then(|wt| {
                j.w_t = wt;
                let pushed = push_with(&s.d, &j)?;
                let r = residual(&j, &s.d, &pushed)?;
                Ok((r, j.magnitude().max(pushed.magnitude())))
            });
            match outcome {
                Ok((r, scale)) => (j.to_vec(), r, scale),
                Err(_) => (j.to_vec(), f64::NAN, 0.0),
            }
        })
        .collect();
    let scale = rows.iter().fold(0.0f64, |m, r| m.max(r.2));
    let pairs: Vec<(Vec<f64>, f64)> = rows.into_iter().map(|(p, r, _)| (p, r)).collect();
    Ok(VerificationReport::from_samples(&pairs, jet_tolerance(scale, DEFAULT_TOL)))
}

/// The classifying equations of the potential class (coefficients of
/// `v_x^2`, `v_x`, `1` and `v_xx` after multiplying the transformed
/// equation by `X_x^2`, with `f'` the target coefficient):
///
/// * `W_w^2 - (X_x^2/T_t) W_w + f' W_ww`
/// * `2 W_x W_w - (X_t X_x/T_t) W_w + 2 f' W_xw - f' (X_xx/X_x) W_w`
/// * `(X_x^2/T_t) W_t - (X_t X_x/T_t) W_x + W_x^2 + f' W_xx - f' (X_xx/X_x) W_x`
/// * `(f' - X_x^2 f/T_t) W_w`
///
/// Each point contributes the largest of the four magnitudes.
pub fn check_classifying_equations(
    t: &PointTransformation,
    f: &Expr,
    target: &Target,
    sbox: &SampleBox,
) -> Result<VerificationReport, GroupoidError> {
    let tgt = TargetEval::new(t, f, target)?;
    let rows: Vec<(Vec<f64>, f64, f64)> = samples(t, sbox)?
        .into_par_iter()
        .map(|s| {
            let j = s.jet;
            let d = &s.d;
            let eval = || -> Result<(f64, f64), EvalError> {
                let (ft, _) = tgt.at(&j, d)?;
                let f0 = f.eval::<f64>(&[Some(j.t), Some(j.x), None])?;
                let (t_t, x_t, x_x, x_xx) = (d[0].d(0), d[1].d(0), d[1].d(1), d[1].dd(1, 1));
                let w = &d[2];
                let (w_t, w_x, w_w) = (w.d(0), w.d(1), w.d(2));
                let (w_xx, w_xw, w_ww) = (w.dd(1, 1), w.dd(1, 2), w.dd(2, 2));
                let r = x_x * x_x / t_t;
                let q = x_t * x_x / t_t;
                let h = x_xx / x_x;
                let terms: [&[f64]; 4] = [
                    &[w_w * w_w, -r * w_w, ft * w_ww],
                    &[2.0 * w_x * w_w, -q * w_w, 2.0 * ft * w_xw, -ft * h * w_w],
                    &[r * w_t, -q * w_x, w_x * w_x, ft * w_xx, -ft * h * w_x],
                    &[ft * w_w, -r * f0 * w_w],
                ];
                let mut worst: f64 = 0.0;
                let mut scale: f64 = 0.0;
                for eq in terms {
                    worst = worst.max(eq.iter().sum::<f64>().abs());
                    scale = eq.iter().fold(scale, |m, v| m.max(v.abs()));
                }
                Ok((worst, scale))
            };
            match eval() {
                Ok((r, scale)) => (j.base().to_vec(), r, scale),
                Err(_) => (j.base().to_vec(), f64::NAN, 0.0),
            }
        })
        .collect();
    let scale = rows.iter().fold(0.0f64, |m, r| m.max(r.2));
    let pairs: Vec<(Vec<f64>, f64)> = rows.into_iter().map(|(p, r, _)| (p, r)).collect();
    Ok(VerificationReport::from_samples(&pairs, jet_tolerance(scale, DEFAULT_TOL)))
}

/// The target coefficient pulled back to source variables, `f' ∘ (T, X)`.
fn pulled_target(t: &PointTransformation, f: &Expr, target: &Target) -> Result<Expr, GroupoidError> {
    let c = t.components().ok_or(GroupoidError::NotSymbolic)?;
    Ok(match target {
        Target::Induced => t.factor().ok_or(TransformError::NoRule)?.clone().mul(f.clone()),
        Target::Expr(e) => e.substitute_all(&[c[0].clone(), c[1].clone(), Expr::w()]),
    })
}

/// Subclass of the target equation, decided from source variables with
/// `∂_x' = ∂_x / X_x` and `∂_t' = (∂_t - (X_t/X_x) ∂_x)/T_t`.
pub fn image_subclass(
    t: &PointTransformation,
    family: Family,
    f: &Expr,
    target: &Target,
    sbox: &SampleBox,
) -> Result<Subclass, GroupoidError> {
    let c = t.components().ok_or(GroupoidError::NotSymbolic)?;
    let ft = pulled_target(t, f, target)?;
    if family == Family::L {
        return Ok(Subclass::L);
    }
    let x_x = c[1].diff(Var::X);
    let x_t = c[1].diff(Var::T);
    let t_t = c[0].diff(Var::T);
    let dx = |e: &Expr| e.diff(Var::X).div(x_x.clone());
    let third = dx(&dx(&dx(&ft)));
    let cubic_free = probably_zero(&third, sbox, ZERO_TOL)?;
    Ok(match (family, cubic_free) {
        (Family::P, false) => Subclass::P1,
        (Family::C, false) => Subclass::C1,
        (Family::C, true) => Subclass::C2,
        _ => {
            let dt = ft.diff(Var::T).sub(x_t.div(x_x.clone()).mul(ft.diff(Var::X))).div(t_t);
            let constant = probably_zero(&dx(&ft), sbox, ZERO_TOL)? && probably_zero(&dt, sbox, ZERO_TOL)?;
            if constant {
                Subclass::P3
            } else {
                Subclass::P2
            }
        }
    })
}

/// Whether source and target subclasses agree (they must, for an admissible
/// transformation).
pub fn check_subclass_preserved(
    t: &PointTransformation,
    family: Family,
    f: &Expr,
    target: &Target,
    sbox: &SampleBox,
) -> Result<bool, GroupoidError> {
    let source = classify(family, f, sbox)?;
    Ok(source == image_subclass(t, family, f, target, sbox)?)
}

/// Outcome of [`decide_equivalence`].
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Decision {
    Equivalent { witness: Params, report: VerificationReport },
    Inequivalent { reason: String },
    Undecided { reason: String },
}

/// Default number of starts of the template search.
pub const DEFAULT_BUDGET: usize = 24;

/// Equivalence of `f1` and `f2` within `family`, on a common box:
///
/// * different subclasses: inequivalent;
/// * both constant (`P`): a Möbius witness scaling time by `a/b`;
/// * both with `f_xxx ≠ 0` (`P`, `C`): a search over the usual group for
///   `f2(αt + β, κ(x + μ1 t + μ0)) = (κ²/α) f1(t, x)`;
/// * otherwise undecided.
///
/// "Equivalent" is only returned with a witness that passed
/// [`verify_admissible`].
pub fn decide_equivalence(
    family: Family,
    f1: &Expr,
    f2: &Expr,
    sbox: &SampleBox,
    budget: usize,
) -> Result<Decision, GroupoidError> {
    let s1 = classify(family, f1, sbox)?;
    let s2 = classify(family, f2, sbox)?;
    if s1 != s2 {
        return Ok(Decision::Inequivalent {
            reason: format!("subclasses differ ({s1} vs {s2}); no point transformation maps one into the other"),
        });
    }
    let target = Target::Expr(f2.clone());
    let verified = |t: PointTransformation| -> Result<Option<Decision>, GroupoidError> {
        let report = verify_admissible(&t, family, f1, &target, sbox)?;
        Ok(report.passed().then(|| Decision::Equivalent {
            witness: t.params().cloned().expect("builder output carries parameters"),
            report,
        }))
    };
    match s1 {
        Subclass::P3 => {
            let a = as_constant(f1, &[Var::T, Var::X], sbox, ZERO_TOL)?.expect("classified constant");
            let b = as_constant(f2, &[Var::T, Var::X], sbox, ZERO_TOL)?.expect("classified constant");
            let p = P3Params {
                alpha: a / b,
                beta: 0.0,
                gamma: 0.0,
                delta: 1.0,
                kappa: 1.0,
                mu1: 0.0,
                mu0: 0.0,
                k: 1.0,
                f2: HeatKind::Zero,
            };
            let t = build_p3(&p, a, sbox)?;
            Ok(verified(t)?.unwrap_or(Decision::Undecided {
                reason: "orbit witness failed verification".into(),
            }))
        }
        Subclass::P1 | Subclass::C1 => {
            for theta in template_search(f1, f2, sbox, budget) {
                let [alpha, beta, kappa, mu1, mu0] = theta;
                let t = if family == Family::P {
                    build_usual_pot(&UsualPotParams { alpha, beta, kappa, mu1, mu0, nu: 0.0 })
                } else {
                    build_c_usual(&CUsualParams { alpha, beta, kappa, mu1, mu0 })
                };
                let Ok(t) = t else { continue };
                if let Some(d) = verified(t)? {
                    return Ok(d);
                }
            }
            Ok(Decision::Undecided {
                reason: format!("no usual-group witness found within {budget} starts"),
            })
        }
        other => Ok(Decision::Undecided {
            reason: format!("no decision procedure for subclass {other}; supply a candidate transformation to verify"),
        }),
    }
}

const FIT_POINTS: usize = 40;
const FIT_ITER: usize = 200;
const FIT_TOL: f64 = 1e-11;

/// Candidate `(α, β, κ, μ1, μ0)` with a small template residual, best first.
fn template_search(f1: &Expr, f2: &Expr, sbox: &SampleBox, budget: usize) -> Vec<[f64; 5]> {
    let pts: Vec<[f64; 3]> = sbox.clone().with_n(FIT_POINTS).points();
    let f1v: Vec<Option<f64>> = pts.iter().map(|p| f1.evaluate(p).ok()).collect();
    let resid = |th: &[f64; 5]| -> Option<Vec<f64>> {
        let [alpha, beta, kappa, mu1, mu0] = *th;
        if alpha.abs() < 1e-8 || kappa.abs() < 1e-8 {
            return None;
        }
        pts.iter()
            .zip(&f1v)
            .map(|(p, a)| {
                let a = (*a)?;
                let tn = alpha * p[0] + beta;
                let xn = kappa * (p[1] + mu1 * p[0] + mu0);
                let b = f2.eval_at(tn, xn, 0.0).ok()?;
                let r = (b - kappa * kappa / alpha * a) / (1.0 + a.abs());
                r.is_finite().then_some(r)
            })
            .collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(sbox.seed ^ 0x7e3a_11d5);
    let mut found: Vec<(f64, [f64; 5])> = Vec::new();
    for start in 0..budget.max(1) {
        let theta0 = if start == 0 {
            [1.0, 0.0, 1.0, 0.0, 0.0]
        } else {
            let mag = |rng: &mut ChaCha8Rng| {
                let m = rng.random_range(-1.6f64..1.6).exp();
                if rng.random_bool(0.5) {
                    m
                } else {
                    -m
                }
            };
            let alpha = mag(&mut rng);
            let kappa = mag(&mut rng);
            [alpha, rng.random_range(-1.0..1.0), kappa, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
        };
        if let Some((cost, th)) = levenberg_marquardt(&resid, theta0) {
            if cost <= FIT_TOL {
                found.push((cost, th));
            }
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    found.into_iter().map(|(_, th)| th).collect()
}

/// Least squares by Levenberg–Marquardt with a forward-difference Jacobian;
/// returns the final max-norm residual.
fn levenberg_marquardt(resid: &dyn Fn(&[f64; 5]) -> Option<Vec<f64>>, theta0: [f64; 5]) -> Option<(f64, [f64; 5])> {
    use nalgebra::{DMatrix, DVector};
    let norm2 = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    let mut th = theta0;
    let mut r = resid(&th)?;
    let mut cost = norm2(&r);
    let mut damping = 1e-3;
    for _ in 0..FIT_ITER {
        let m = r.len();
        let mut jac = DMatrix::<f64>::zeros(m, 5);
        for k in 0..5 {
            let h = 1e-7 * (1.0 + th[k].abs());
            let mut tp = th;
            tp[k] += h;
            let rp = resid(&tp)?;
            for i in 0..m {
                jac[(i, k)] = (rp[i] - r[i]) / h;
            }
        }
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * rv;
        let mut improved = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for k in 0..5 {
                a[(k, k)] += damping * (1.0 + jtj[(k, k)]);
            }
            let Some(step) = a.lu().solve(&(-&jtr)) else {
                damping *= 10.0;
                continue;
            };
            let mut cand = th;
            for k in 0..5 {
                cand[k] += step[k];
            }
            if let Some(rc) = resid(&cand) {
                let c = norm2(&rc);
                if c < cost {
                    th = cand;
                    r = rc;
                    cost = c;
                    damping = (damping / 3.0).max(1e-12);
                    improved = true;
                    break;
                }
            }
            damping *= 10.0;
        }
        let max = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max <= FIT_TOL * 1e-2 || !improved {
            break;
        }
    }
    let max = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Some((max, th))
}

/// Build the parameters' transformation and verify it against its induced
/// target in one step.
pub fn verify_params(p: &Params, f: &Expr, family: Family, sbox: &SampleBox) -> Result<VerificationReport, GroupoidError> {
    let t = build(p, Some(f), sbox)?;
    verify_admissible(&t, family, f, &Target::Induced, sbox)
}
