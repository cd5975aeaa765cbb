//! The three equation families, their residuals on jets, subclass
//! classification and the conserved-current identities.
//!
//! * `P`: `v_t + v_x^2 + f v_xx = 0`
//! * `C`: `u_t + 2 u u_x + (f u_x)_x = 0`
//! * `L`: `u_t + u u_x + f u_xx = 0`

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{exp_antiderivative, AnalysisError, ExpAntiderivative, DEFAULT_BASE, DEFAULT_TOL};
use crate::expr::{as_constant, probably_zero, EvalError, Expr, SampleBox, Var, ZeroTestError};
use crate::report::VerificationReport;

/// Tolerance handed to the probabilistic zero tests.
pub const ZERO_TOL: f64 = 1e-10;

/// `|f|` must stay above this on the working box.
pub const NONVANISHING_FLOOR: f64 = 1e-6;

/// Pass threshold of the conserved-current identities.
pub const CURRENT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    P,
    C,
    L,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::P => "P",
            Family::C => "C",
            Family::L => "L",
        })
    }
}

impl FromStr for Family {
    type Err = ClassError;

    fn from_str(s: &str) -> Result<Family, ClassError> {
        match s {
            "P" | "p" => Ok(Family::P),
            "C" | "c" => Ok(Family::C),
            "L" | "l" => Ok(Family::L),
            _ => Err(ClassError::UnknownFamily(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassError {
    #[error("unknown equation family `{0}` (expected P, C or L)")]
    UnknownFamily(String),
    #[error("f must not depend on the dependent variable: `{0}`")]
    DependsOnW(String),
    #[error("f vanishes on the box (near or across zero at f({t}, {x}) = {value:e})")]
    Vanishing { t: f64, x: f64, value: f64 },
    #[error("f_xxx does not vanish, so f is not quadratic in x")]
    NotQuadratic,
    #[error("coefficient `{0}` of the quadratic decomposition still depends on x")]
    XDependence(String),
    #[error("family {0} has no conserved current to check")]
    NoCurrent(Family),
    #[error("classification is indeterminate: {0}")]
    Indeterminate(#[from] ZeroTestError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Second-order jet `(t, x, w, w_t, w_x, w_xx)`, with optional third-order
/// slots used by the potentialization identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jet2 {
    pub t: f64,
    pub x: f64,
    pub w: f64,
    pub w_t: f64,
    pub w_x: f64,
    pub w_xx: f64,
    pub w_tx: Option<f64>,
    pub w_xxx: Option<f64>,
}

impl Jet2 {
    pub fn new(t: f64, x: f64, w: f64, w_t: f64, w_x: f64, w_xx: f64) -> Jet2 {
        Jet2 {
            t,
            x,
            w,
            w_t,
            w_x,
            w_xx,
            w_tx: None,
            w_xxx: None,
        }
    }

    /// Base point and derivatives drawn from the box; derivative slots are
    /// uniform in `[-deriv, deriv]` and the third-order slots are filled.
    pub fn random(rng: &mut impl Rng, point: [f64; 3], deriv: f64) -> Jet2 {
        let mut d = || rng.random_range(-deriv..=deriv);
        Jet2 {
            t: point[0],
            x: point[1],
            w: point[2],
            w_t: d(),
            w_x: d(),
            w_xx: d(),
            w_tx: Some(d()),
            w_xxx: Some(d()),
        }
    }

    pub fn base(&self) -> [f64; 3] {
        [self.t, self.x, self.w]
    }

    pub fn is_finite(&self) -> bool {
        [self.t, self.x, self.w, self.w_t, self.w_x, self.w_xx]
            .iter()
            .chain(self.w_tx.iter())
            .chain(self.w_xxx.iter())
            .all(|v| v.is_finite())
    }

    /// Largest absolute entry, the scale of the default tolerance.
    pub fn magnitude(&self) -> f64 {
        self.to_vec().iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.t, self.x, self.w, self.w_t, self.w_x, self.w_xx];
        v.extend(self.w_tx);
        v.extend(self.w_xxx);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subclass {
    P1,
    P2,
    P3,
    C1,
    C2,
    L,
}

impl fmt::Display for Subclass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// An equation of a family with a fixed arbitrary element `f(t, x)`.
#[derive(Debug, Clone)]
pub struct Equation {
    pub family: Family,
    pub f: Expr,
    f_x: Expr,
    pub sbox: SampleBox,
}

impl Equation {
    /// Fails if `f` involves the dependent variable or comes within
    /// [`NONVANISHING_FLOOR`] of zero at a sample point of the box.
    pub fn new(family: Family, f: Expr, sbox: SampleBox) -> Result<Equation, ClassError> {
        check_nonvanishing(&f, &sbox)?;
        Ok(Equation {
            family,
            f_x: f.diff(Var::X),
            f,
            sbox,
        })
    }

    pub fn f_x(&self) -> &Expr {
        &self.f_x
    }

    pub fn f_at(&self, t: f64, x: f64) -> Result<f64, EvalError> {
        self.f.eval::<f64>(&[Some(t), Some(x), None])
    }

    pub fn residual(&self, jet: &Jet2) -> Result<f64, EvalError> {
        residual(self, jet)
    }
}

fn check_nonvanishing(f: &Expr, sbox: &SampleBox) -> Result<(), ClassError> {
    if f.depends_on(Var::W) {
        return Err(ClassError::DependsOnW(f.to_string()));
    }
    let mut sign = None;
    for p in sbox.points() {
        let value = f.eval::<f64>(&[Some(p[0]), Some(p[1]), None])?;
        // a sign change on the (connected) box means f crosses zero
        let flipped = sign.is_some_and(|s: bool| s != (value > 0.0));
        if !(value.abs() > NONVANISHING_FLOOR) || flipped {
            return Err(ClassError::Vanishing {
                t: p[0],
                x: p[1],
                value,
            });
        }
        sign = Some(value > 0.0);
    }
    Ok(())
}

/// The family's residual given the values of `f` and `f_x` at the jet.
pub fn residual_with(family: Family, f: f64, f_x: f64, j: &Jet2) -> f64 {
    match family {
        Family::P => j.w_t + j.w_x * j.w_x + f * j.w_xx,
        Family::C => j.w_t + 2.0 * j.w * j.w_x + f_x * j.w_x + f * j.w_xx,
        Family::L => j.w_t + j.w * j.w_x + f * j.w_xx,
    }
}

/// Off-shell residual: `w_t` is a free coordinate of the jet.
pub fn residual(eq: &Equation, jet: &Jet2) -> Result<f64, EvalError> {
    let env = [Some(jet.t), Some(jet.x), None];
    let f = eq.f.eval::<f64>(&env)?;
    let f_x = if eq.family == Family::C {
        eq.f_x.eval::<f64>(&env)?
    } else {
        0.0
    };
    Ok(residual_with(eq.family, f, f_x, jet))
}

/// The `w_t` that puts the jet on the equation (the incoming `w_t` is
/// ignored).
pub fn solve_wt(eq: &Equation, jet: &Jet2) -> Result<f64, EvalError> {
    let mut j = *jet;
    j.w_t = 0.0;
    Ok(-residual(eq, &j)?)
}

/// Subclass of `f` within `family`, decided by probabilistic zero tests of
/// `f_xxx` and of the derivatives of `f`.
pub fn classify(family: Family, f: &Expr, sbox: &SampleBox) -> Result<Subclass, ClassError> {
    check_nonvanishing(f, sbox)?;
    if family == Family::L {
        return Ok(Subclass::L);
    }
    let cubic_free = probably_zero(&f.diff_n(Var::X, 3), sbox, ZERO_TOL)?;
    Ok(match (family, cubic_free) {
        (Family::P, false) => Subclass::P1,
        (Family::P, true) => match as_constant(f, &[Var::T, Var::X], sbox, ZERO_TOL)? {
            Some(_) => Subclass::P3,
            None => Subclass::P2,
        },
        (Family::C, false) => Subclass::C1,
        (Family::C, true) => Subclass::C2,
        (Family::L, _) => Subclass::L,
    })
}

/// `f = f2(t) x^2 + f1(t) x + f0(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticDecomposition {
    pub f2: Expr,
    pub f1: Expr,
    pub f0: Expr,
}

impl QuadraticDecomposition {
    pub fn reconstruct(&self) -> Expr {
        let x = Expr::x();
        self.f2.clone().mul(x.clone().powi(2)).add(self.f1.clone().mul(x)).add(self.f0.clone())
    }
}

/// `f2 = f_xx/2`, `f1 = f_x - x f_xx`, `f0 = f + x^2 f_xx/2 - x f_x`.
pub fn decompose_quadratic(f: &Expr, sbox: &SampleBox) -> Result<QuadraticDecomposition, ClassError> {
    if f.depends_on(Var::W) {
        return Err(ClassError::DependsOnW(f.to_string()));
    }
    if !probably_zero(&f.diff_n(Var::X, 3), sbox, ZERO_TOL)? {
        return Err(ClassError::NotQuadratic);
    }
    let x = Expr::x();
    let f_x = f.diff(Var::X);
    let f_xx = f_x.diff(Var::X);
    let half = Expr::rational(1, 2);
    let f2 = half.clone().mul(f_xx.clone());
    let f1 = f_x.clone().sub(x.clone().mul(f_xx.clone()));
    let f0 = f
        .clone()
        .add(half.mul(x.clone().powi(2)).mul(f_xx))
        .sub(x.mul(f_x));
    let clean = |c: Expr| -> Result<Expr, ClassError> {
        let c = c.simplify();
        if !c.depends_on(Var::X) {
            return Ok(c);
        }
        if !probably_zero(&c.diff(Var::X), sbox, ZERO_TOL)? {
            return Err(ClassError::XDependence(c.to_string()));
        }
        // numerically x-free: pin x anywhere
        Ok(c.substitute(Var::X, &Expr::int(0)).simplify())
    };
    Ok(QuadraticDecomposition {
        f2: clean(f2)?,
        f1: clean(f1)?,
        f0: clean(f0)?,
    })
}

/// The characteristic `λ = exp(∫ f_xx dt)` of the conservation law of an
/// `L` equation with `f_xxx = 0`.
pub fn l_characteristic(f: &Expr, sbox: &SampleBox, t0: f64) -> Result<ExpAntiderivative, ClassError> {
    let dec = decompose_quadratic(f, sbox)?;
    Ok(exp_antiderivative(&dec.f2, 2.0, t0, DEFAULT_TOL)?)
}

/// How to obtain λ for the `L` current check.
#[derive(Debug, Clone)]
pub enum Characteristic {
    /// `exp(∫ f_xx dt)` with the default base point.
    Canonical,
    /// Any function of `t` (used for negative controls).
    Given(Expr),
}

/// A scalar field of `(dt, dx)` around a jet.
type Field<'a> = Box<dyn Fn(f64, f64) -> Result<f64, EvalError> + 'a>;

/// Richardson-extrapolated central difference of `g` at 0.
fn total_derivative(g: impl Fn(f64) -> Result<f64, EvalError>, h: f64) -> Result<f64, EvalError> {
    let d = |h: f64| -> Result<f64, EvalError> { Ok((g(h)? - g(-h)?) / (2.0 * h)) };
    Ok((4.0 * d(h / 2.0)? - d(h)?) / 3.0)
}

/// Off-shell check of the divergence identities
///
/// * `C`: `D_t(u) + D_x(u^2 + f u_x) = residual`
/// * `L`: `D_t(λ u) + D_x(λ (u^2/2 + f u_x - f_x u)) = λ residual`
///
/// at `n` random jets. Total derivatives are taken by finite differences of
/// the jet's local quadratic realization `U(t, x)`, independently of the
/// closed-form residual.
pub fn conserved_current_check(
    family: Family,
    f: &Expr,
    sbox: &SampleBox,
    n: usize,
    characteristic: &Characteristic,
) -> Result<VerificationReport, ClassError> {
    let eq = Equation::new(family, f.clone(), sbox.clone())?;
    let f_x = f.diff(Var::X);
    let lambda: Expr = match (family, characteristic) {
        (Family::P, _) => return Err(ClassError::NoCurrent(Family::P)),
        (Family::C, _) => Expr::int(1),
        (Family::L, Characteristic::Canonical) => l_characteristic(f, sbox, DEFAULT_BASE)?.expr(),
        (Family::L, Characteristic::Given(e)) => e.clone(),
    };
    let fx = |t: f64, x: f64| f.eval::<f64>(&[Some(t), Some(x), None]);
    let fxx = |t: f64, x: f64| f_x.eval::<f64>(&[Some(t), Some(x), None]);
    let lam = |t: f64| lambda.eval_at(t, 0.0, 0.0);
    const H: f64 = 1e-3;
    let sbox = sbox.clone().with_n(n);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let Some(p) = sbox.point(i) else { continue };
        let mut rng = sbox.rng(i);
        let j = Jet2::random(&mut rng, p, 1.0);
        let u_tx = j.w_tx.unwrap_or(0.0);
        // local realization of the jet
        let u = |dt: f64, dx: f64| j.w + j.w_t * dt + j.w_x * dx + 0.5 * j.w_xx * dx * dx + u_tx * dt * dx;
        let u_x = |dt: f64, dx: f64| j.w_x + j.w_xx * dx + u_tx * dt;
        let (density, flux): (Field, Field) =
            match family {
                Family::C => (
                    Box::new(|dt, dx| Ok(u(dt, dx))),
                    Box::new(|dt, dx| {
                        let uu = u(dt, dx);
                        Ok(uu * uu + fx(j.t + dt, j.x + dx)? * u_x(dt, dx))
                    }),
                ),
                _ => (
                    Box::new(|dt, dx| Ok(lam(j.t + dt)? * u(dt, dx))),
                    Box::new(|dt, dx| {
                        let (t, x) = (j.t + dt, j.x + dx);
                        let uu = u(dt, dx);
                        Ok(lam(t)? * (0.5 * uu * uu + fx(t, x)? * u_x(dt, dx) - fxx(t, x)? * uu))
                    }),
                ),
            };
        let dt_density = total_derivative(|s| density(s, 0.0), H)?;
        let dx_flux = total_derivative(|s| flux(0.0, s), H)?;
        let weight = if family == Family::C { 1.0 } else { lam(j.t)? };
        let r = dt_density + dx_flux - weight * eq.residual(&j)?;
        samples.push((j.to_vec(), r));
    }
    Ok(VerificationReport::from_samples(&samples, CURRENT_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn eq(family: Family, f: &str) -> Equation {
        Equation::new(family, parse(f).unwrap(), SampleBox::standard(1)).unwrap()
    }

    #[test]
    fn residual_examples() {
        let j = Jet2::new(0.0, 0.0, 0.0, 1.0, 1.0, 2.0);
        assert_eq!(eq(Family::P, "-1").residual(&j).unwrap(), 0.0);
        let j = Jet2::new(0.5, 0.3, 2.0, 0.0, 3.0, -6.0);
        assert_eq!(eq(Family::L, "1").residual(&j).unwrap(), 0.0);
        let sbox = SampleBox::standard(1).with_bounds(Var::X, 0.5, 2.0).unwrap();
        let c = Equation::new(Family::C, parse("x").unwrap(), sbox).unwrap();
        let j = Jet2::new(0.5, 1.7, 0.0, 0.0, 1.0, 0.0);
        assert_eq!(c.residual(&j).unwrap(), 1.0);
    }

    #[test]
    fn solve_wt_examples() {
        let j = Jet2::new(0.5, 0.0, 0.0, 99.0, 1.0, 2.0);
        assert_eq!(solve_wt(&eq(Family::P, "-1"), &j).unwrap(), 1.0);
        let j = Jet2::new(0.5, 0.2, 0.7, 99.0, 0.0, 0.0);
        assert_eq!(solve_wt(&eq(Family::P, "exp(x) + t"), &j).unwrap(), 0.0);
        let j = Jet2::new(0.5, 0.3, 2.0, 99.0, 3.0, -6.0);
        assert_eq!(solve_wt(&eq(Family::L, "1"), &j).unwrap(), 0.0);
    }

    #[test]
    fn classification_examples() {
        let b = SampleBox::standard(3);
        let c = |fam, f: &str| classify(fam, &parse(f).unwrap(), &b).unwrap();
        assert_eq!(c(Family::P, "-1"), Subclass::P3);
        assert_eq!(c(Family::P, "t*x + 1"), Subclass::P2);
        assert_eq!(c(Family::P, "exp(x)"), Subclass::P1);
        assert_eq!(c(Family::P, "t*x + 1 + 0*x^3"), Subclass::P2);
        assert_eq!(c(Family::C, "x^3 + 2"), Subclass::C1);
        assert_eq!(c(Family::C, "x^2 + 1"), Subclass::C2);
        assert_eq!(c(Family::L, "exp(x)"), Subclass::L);
        assert!(matches!(
            classify(Family::P, &parse("x - 0.7").unwrap(), &SampleBox::standard(3)),
            Err(ClassError::Vanishing { .. })
        ));
    }

    #[test]
    fn quadratic_decomposition_examples() {
        let b = SampleBox::standard(5);
        let d = decompose_quadratic(&parse("3*x^2 + t*x + 5").unwrap(), &b).unwrap();
        assert_eq!((d.f2.to_string(), d.f1.to_string(), d.f0.to_string()), ("3".into(), "t".into(), "5".into()));
        let d = decompose_quadratic(&parse("(t+1)*x").unwrap(), &b).unwrap();
        assert_eq!((d.f2.to_string(), d.f1.to_string(), d.f0.to_string()), ("0".into(), "t + 1".into(), "0".into()));
        assert_eq!(
            decompose_quadratic(&parse("exp(x)").unwrap(), &b),
            Err(ClassError::NotQuadratic)
        );
    }

    #[test]
    fn conserved_currents() {
        let b = SampleBox::standard(9);
        for f in ["-1", "t*x + 1", "exp(x) + 2", "x^3 + 3", "x^2 + 2"] {
            let r = conserved_current_check(Family::C, &parse(f).unwrap(), &b, 100, &Characteristic::Canonical).unwrap();
            assert!(r.passed(), "{f}: {r:?}");
        }
        let f = parse("x^2").unwrap();
        let lambda = l_characteristic(&f, &b, 0.0).unwrap();
        assert!((lambda.value(1.0).unwrap() - 2f64.exp()).abs() < 1e-12);
        let r = conserved_current_check(Family::L, &f, &b, 100, &Characteristic::Canonical).unwrap();
        assert!(r.passed(), "{r:?}");
        let wrong = Characteristic::Given(Expr::int(1));
        let r = conserved_current_check(Family::L, &f, &b, 100, &wrong).unwrap();
        assert!(!r.passed() && r.max_residual > 1e-3);
        assert!(matches!(
            conserved_current_check(Family::P, &f, &b, 10, &wrong),
            Err(ClassError::NoCurrent(Family::P))
        ));
    }
}
