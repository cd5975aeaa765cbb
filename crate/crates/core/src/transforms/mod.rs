//! Point transformations `t' = T(t)`, `x' = X(t, x)`, `w' = W(t, x, w)`:
//! builders for every equivalence group, composition, inversion and the
//! induced action on the arbitrary element.
//!
//! Components are symbolic trees (possibly containing fixed
//! antiderivatives), so all partial derivatives up to second order are
//! evaluated exactly with [`Dual2`] numbers.

pub mod builders;
pub mod heat;
pub mod params;

use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix3;

use crate::analysis::AnalysisError;
use crate::classes::{ClassError, Family};
use crate::dual::{hidx, lift_map, Dual2};
use crate::expr::{EvalError, Expr, SampleBox, Var, ZeroTestError};

pub use builders::{
    build, build_c2, build_c_usual, build_gbe, build_p2, build_p2_linear, build_p3, build_usual_pot,
};
pub use heat::{heat_solution, HeatKind, HeatSolution};
pub use params::{
    group_inverse, group_law, normalize_projective, rescale_projective, C2Params, CUsualParams, GbeParams,
    P2LinearParams, P2Params, P3Params, Params, UsualPotParams,
};

/// Guard expressions (denominators, logarithm arguments) must exceed this
/// in magnitude at an admitted point.
pub const GUARD_FLOOR: f64 = 1e-8;

/// Relative agreement required between a closed-form rule and its generic
/// counterpart.
pub const RULE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransformError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("parameter document: {0}")]
    Schema(String),
    #[error("group `{0}` has no projective parameters")]
    NotProjective(&'static str),
    #[error("`{0}` does not solve the heat equation F_t + f F_xx = 0")]
    NotHeatSolution(String),
    #[error("group `{0}` needs the arbitrary element f")]
    NeedsF(&'static str),
    #[error("point ({}, {}, {}) is outside the domain: {why}", .at[0], .at[1], .at[2])]
    Domain { at: [f64; 3], why: String },
    #[error("cannot invert the {component} component at target value {target}")]
    Inversion { component: &'static str, target: f64 },
    #[error("the transformation carries no closed-form rule for f")]
    NoRule,
    #[error("closed-form f rule disagrees with X_x^2/T_t at ({}, {}): {closed} vs {generic}", .at[0], .at[1])]
    RuleMismatch { at: [f64; 2], closed: f64, generic: f64 },
    #[error("composed parameters disagree with the composed maps by {0:e}")]
    GroupLawMismatch(f64),
    #[error("too few admissible sample points ({got} of {wanted})")]
    Starved { got: usize, wanted: usize },
    #[error("component `{0}` has the wrong dependencies for a point transformation")]
    Shape(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Class(#[from] ClassError),
    #[error(transparent)]
    ZeroTest(#[from] ZeroTestError),
}

#[derive(Debug)]
enum Kind {
    Components([Expr; 3]),
    /// `second ∘ first`
    Composite(PointTransformation, PointTransformation),
    /// Numeric inverse, searched for near `search`.
    Inverse(PointTransformation, SampleBox),
}

#[derive(Debug)]
struct Inner {
    kind: Kind,
    /// Expressions in `(t, x, w)` that must stay away from zero.
    guards: Vec<Expr>,
    /// `g(t, x)` with `f'(T, X) = g f(t, x)`, when known in closed form.
    factor: Option<Expr>,
    family: Family,
    params: Option<Params>,
    label: String,
}

/// An invertible point transformation of `(t, x, w)`, shared cheaply.
#[derive(Debug, Clone)]
pub struct PointTransformation(Arc<Inner>);

impl fmt::Display for PointTransformation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0.kind {
            Kind::Components([t, x, w]) => write!(f, "{}: t' = {t}, x' = {x}, w' = {w}", self.0.label),
            _ => f.write_str(&self.0.label),
        }
    }
}

fn constants(p: &[f64; 3]) -> [Dual2; 3] {
    p.map(Dual2::constant)
}

fn values(d: &[Dual2; 3]) -> [f64; 3] {
    [d[0].v, d[1].v, d[2].v]
}

impl PointTransformation {
    /// Symbolic components; `T` may depend on `t` only and `X` not on `w`.
    pub fn from_components(t: Expr, x: Expr, w: Expr, family: Family) -> Result<PointTransformation, TransformError> {
        if t.depends_on(Var::X) || t.depends_on(Var::W) {
            return Err(TransformError::Shape(t.to_string()));
        }
        if x.depends_on(Var::W) {
            return Err(TransformError::Shape(x.to_string()));
        }
        Ok(PointTransformation(Arc::new(Inner {
            kind: Kind::Components([t, x, w]),
            guards: Vec::new(),
            factor: None,
            family,
            params: None,
            label: "custom".into(),
        })))
    }

    pub fn identity(family: Family) -> PointTransformation {
        PointTransformation::from_components(Expr::t(), Expr::x(), Expr::w(), family)
            .expect("identity has the right shape")
            .with_factor(Expr::int(1))
            .with_label("identity")
    }

    fn edit(self, f: impl FnOnce(&mut Inner)) -> PointTransformation {
        let mut inner = Arc::try_unwrap(self.0).unwrap_or_else(|shared| Inner {
            kind: match &shared.kind {
                Kind::Components(c) => Kind::Components(c.clone()),
                Kind::Composite(a, b) => Kind::Composite(a.clone(), b.clone()),
                Kind::Inverse(a, s) => Kind::Inverse(a.clone(), s.clone()),
            },
            guards: shared.guards.clone(),
            factor: shared.factor.clone(),
            family: shared.family,
            params: shared.params.clone(),
            label: shared.label.clone(),
        });
        f(&mut inner);
        PointTransformation(Arc::new(inner))
    }

    pub fn with_guard(self, g: Expr) -> PointTransformation {
        self.edit(|i| i.guards.push(g))
    }

    pub fn with_factor(self, g: Expr) -> PointTransformation {
        self.edit(|i| i.factor = Some(g))
    }

    pub fn with_params(self, p: Params) -> PointTransformation {
        self.edit(|i| i.params = Some(p))
    }

    pub fn with_label(self, label: impl Into<String>) -> PointTransformation {
        let label = label.into();
        self.edit(|i| i.label = label)
    }

    pub fn with_family(self, family: Family) -> PointTransformation {
        self.edit(|i| i.family = family)
    }

    pub fn components(&self) -> Option<&[Expr; 3]> {
        match &self.0.kind {
            Kind::Components(c) => Some(c),
            _ => None,
        }
    }

    pub fn guards(&self) -> &[Expr] {
        &self.0.guards
    }

    /// Closed-form `g(t, x)` with `f' ∘ (T, X) = g f`.
    pub fn factor(&self) -> Option<&Expr> {
        self.0.factor.as_ref()
    }

    pub fn family(&self) -> Family {
        self.0.family
    }

    pub fn params(&self) -> Option<&Params> {
        self.0.params.as_ref()
    }

    pub fn label(&self) -> &str {
        &self.0.label
    }

    /// Apply to dual inputs: the result carries the derivatives of the
    /// composite `y ↦ (T, X, W)(y)`.
    pub fn apply(&self, y: &[Dual2; 3]) -> Result<[Dual2; 3], TransformError> {
        match &self.0.kind {
            Kind::Components(c) => {
                let p = values(y);
                self.check_guards(&p)?;
                let env = [Some(y[0]), Some(y[1]), Some(y[2])];
                let mut out = [Dual2::constant(0.0); 3];
                for (o, e) in out.iter_mut().zip(c) {
                    *o = e.eval::<Dual2>(&env).map_err(|err| domain(&p, err))?;
                }
                Ok(out)
            }
            Kind::Composite(first, second) => second.apply(&first.apply(y)?),
            Kind::Inverse(inner, search) => {
                let target = values(y);
                let p = preimage(inner, target, search, 3)?;
                let fwd = inner.apply(&Dual2::seeds(p[0], p[1], p[2]))?;
                let (k, hess) = inverse_derivatives(&fwd, &p)?;
                Ok(lift_map(p, k, hess, y))
            }
        }
    }

    fn check_guards(&self, p: &[f64; 3]) -> Result<(), TransformError> {
        for g in &self.0.guards {
            let v = g.evaluate(p).map_err(|err| domain(p, err))?;
            if !(v.abs() > GUARD_FLOOR) {
                return Err(TransformError::Domain {
                    at: *p,
                    why: format!("`{g}` vanishes"),
                });
            }
        }
        Ok(())
    }

    /// Image of a point.
    pub fn map_point(&self, p: &[f64; 3]) -> Result<[f64; 3], TransformError> {
        match &self.0.kind {
            Kind::Components(c) => {
                self.check_guards(p)?;
                let mut out = [0.0; 3];
                for (o, e) in out.iter_mut().zip(c) {
                    *o = e.evaluate(p).map_err(|err| domain(p, err))?;
                }
                Ok(out)
            }
            _ => Ok(values(&self.apply(&constants(p))?)),
        }
    }

    /// Values and all first and second partials at `p`.
    pub fn jet_at(&self, p: &[f64; 3]) -> Result<[Dual2; 3], TransformError> {
        self.apply(&Dual2::seeds(p[0], p[1], p[2]))
    }

    /// `T_t X_x W_w` at `p`.
    pub fn nondegeneracy(&self, p: &[f64; 3]) -> Result<f64, TransformError> {
        let d = self.jet_at(p)?;
        Ok(d[0].d(0) * d[1].d(1) * d[2].d(2))
    }

    /// Single component `i` with derivatives, skipping the other components
    /// (and the guards) where possible.
    fn component(&self, i: usize, y: &[Dual2; 3]) -> Result<Dual2, TransformError> {
        match &self.0.kind {
            Kind::Components(c) => {
                let env = [Some(y[0]), Some(y[1]), Some(y[2])];
                c[i].eval::<Dual2>(&env).map_err(|err| domain(&values(y), err))
            }
            _ => Ok(self.apply(y)?[i]),
        }
    }
}

fn domain(p: &[f64; 3], err: impl fmt::Display) -> TransformError {
    TransformError::Domain {
        at: *p,
        why: err.to_string(),
    }
}

/// Jacobian and packed Hessians of an inverse map.
type InverseJet = ([[f64; 3]; 3], [[f64; 6]; 3]);

/// `K = J⁻¹` and the Hessians of the inverse map from the forward jet.
fn inverse_derivatives(fwd: &[Dual2; 3], p: &[f64; 3]) -> Result<InverseJet, TransformError> {
    let j = Matrix3::from_fn(|i, a| fwd[i].g[a]);
    let k = j.try_inverse().ok_or_else(|| TransformError::Domain {
        at: *p,
        why: "singular Jacobian".into(),
    })?;
    let mut hess = [[0.0; 6]; 3];
    for (i, row) in hess.iter_mut().enumerate() {
        for a in 0..3 {
            for b in a..3 {
                let mut acc = 0.0;
                for (jj, f) in fwd.iter().enumerate() {
                    let mut inner = 0.0;
                    for kk in 0..3 {
                        for l in 0..3 {
                            inner += f.h[hidx(kk, l)] * k[(kk, a)] * k[(l, b)];
                        }
                    }
                    acc += k[(i, jj)] * inner;
                }
                row[hidx(a, b)] = -acc;
            }
        }
    }
    Ok((std::array::from_fn(|i| std::array::from_fn(|a| k[(i, a)])), hess))
}

const COMPONENT: [&str; 3] = ["t", "x", "w"];
const GRID: usize = 64;
const MAX_ITER: usize = 200;

/// Solve the triangular system `inner(p)[i] = target[i]` for the first
/// `count` coordinates, searching a widened copy of the box.
fn preimage(inner: &PointTransformation, target: [f64; 3], search: &SampleBox, count: usize) -> Result<[f64; 3], TransformError> {
    let mut p = [0.0; 3];
    for (i, v) in Var::ALL.iter().enumerate() {
        let (lo, hi) = search.bounds(*v);
        p[i] = 0.5 * (lo + hi);
    }
    for i in 0..count {
        let (lo, hi) = search.bounds(Var::ALL[i]);
        let g = |s: f64| -> Option<(f64, f64)> {
            let mut q = p;
            q[i] = s;
            let d = inner.component(i, &Dual2::seeds(q[0], q[1], q[2])).ok()?;
            (d.v.is_finite() && d.g[i].is_finite()).then(|| (d.v - target[i], d.g[i]))
        };
        p[i] = solve_monotone(&g, lo, hi, target[i]).ok_or(TransformError::Inversion {
            component: COMPONENT[i],
            target: target[i],
        })?;
    }
    Ok(p)
}

/// A root of `g` (value, derivative) near `[lo, hi]`: sign changes on a grid
/// over the interval widened by its width on each side, refined by
/// safeguarded Newton; brackets nearest the middle are tried first and
/// jumps across poles are rejected by the final residual.
fn solve_monotone(g: &dyn Fn(f64) -> Option<(f64, f64)>, lo: f64, hi: f64, target: f64) -> Option<f64> {
    let width = hi - lo;
    let (a, b) = (lo - width, hi + width);
    let grid: Vec<(f64, Option<f64>)> = (0..=GRID)
        .map(|k| {
            let s = a + (b - a) * k as f64 / GRID as f64;
            (s, g(s).map(|r| r.0))
        })
        .collect();
    if let Some((s, _)) = grid.iter().find(|(_, v)| *v == Some(0.0)) {
        return Some(*s);
    }
    let mid = 0.5 * (lo + hi);
    let mut brackets: Vec<(f64, f64)> = grid
        .windows(2)
        .filter_map(|w| match (w[0].1, w[1].1) {
            (Some(u), Some(v)) if (u < 0.0) != (v < 0.0) => Some((w[0].0, w[1].0)),
            _ => None,
        })
        .collect();
    brackets.sort_by(|x, y| (0.5 * (x.0 + x.1) - mid).abs().total_cmp(&(0.5 * (y.0 + y.1) - mid).abs()));
    let accept = 1e-12 * (1.0 + target.abs());
    brackets.into_iter().find_map(|(l, h)| {
        let s = refine(g, l, h)?;
        let (r, _) = g(s)?;
        (r.abs() <= accept).then_some(s)
    })
}

fn refine(g: &dyn Fn(f64) -> Option<(f64, f64)>, mut lo: f64, mut hi: f64) -> Option<f64> {
    let (flo, _) = g(lo)?;
    let lo_neg = flo < 0.0;
    let mut s = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        let (v, d) = g(s)?;
        if v == 0.0 {
            return Some(s);
        }
        if (v < 0.0) == lo_neg {
            lo = s;
        } else {
            hi = s;
        }
        let newton = s - v / d;
        let next = if newton > lo.min(hi) && newton < lo.max(hi) && d != 0.0 {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - s).abs() <= 2.0 * f64::EPSILON * (1.0 + s.abs()) || (hi - lo).abs() <= 2.0 * f64::EPSILON * (1.0 + s.abs()) {
            return Some(next);
        }
        s = next;
    }
    Some(s)
}

/// `second ∘ first`. Symbolic components are composed symbolically, so the
/// result keeps exact derivatives, guards and the closed-form f rule.
pub fn compose(first: &PointTransformation, second: &PointTransformation) -> PointTransformation {
    let params = match (first.params(), second.params()) {
        (Some(a), Some(b)) => group_law(a, b),
        _ => None,
    };
    let label = format!("({}) ∘ ({})", second.label(), first.label());
    let composed = match (first.components(), second.components()) {
        (Some(c1), Some(c2)) => {
            let sub = |e: &Expr| e.substitute_all(c1);
            let mut guards = first.guards().to_vec();
            guards.extend(second.guards().iter().map(sub));
            let factor = match (first.factor(), second.factor()) {
                (Some(g1), Some(g2)) => Some(sub(g2).mul(g1.clone())),
                _ => None,
            };
            PointTransformation(Arc::new(Inner {
                kind: Kind::Components([sub(&c2[0]), sub(&c2[1]), sub(&c2[2])]),
                guards,
                factor,
                family: second.family(),
                params: None,
                label: label.clone(),
            }))
        }
        _ => PointTransformation(Arc::new(Inner {
            kind: Kind::Composite(first.clone(), second.clone()),
            guards: Vec::new(),
            factor: None,
            family: second.family(),
            params: None,
            label,
        })),
    };
    match params {
        Some(p) => composed.with_params(p),
        None => composed,
    }
}

/// Sample points of `sbox` in the domain of `t` (at least half of them).
fn admitted_points(t: &PointTransformation, sbox: &SampleBox) -> Result<Vec<[f64; 3]>, TransformError> {
    let pts: Vec<[f64; 3]> = sbox.points().into_iter().filter(|p| t.map_point(p).is_ok()).collect();
    if 2 * pts.len() < sbox.n {
        return Err(TransformError::Starved {
            got: pts.len(),
            wanted: sbox.n,
        });
    }
    Ok(pts)
}

/// [`compose`], checking on the box that the image of `first` lies in the
/// domain of `second` and, when a group law applies, that the composed
/// parameters rebuild the same maps.
pub fn compose_on(first: &PointTransformation, second: &PointTransformation, sbox: &SampleBox) -> Result<PointTransformation, TransformError> {
    let c = compose(first, second);
    let pts = admitted_points(first, sbox)?;
    for p in &pts {
        second.map_point(&first.map_point(p)?)?;
    }
    if let Some(params) = c.params() {
        let rebuilt = build(params, None, sbox)?;
        let mut worst: f64 = 0.0;
        for p in &pts {
            let (a, b) = (c.map_point(p)?, rebuilt.map_point(p)?);
            for (u, v) in a.iter().zip(&b) {
                worst = worst.max((u - v).abs() / (1.0 + u.abs()));
            }
        }
        if !(worst <= RULE_TOL) {
            return Err(TransformError::GroupLawMismatch(worst));
        }
    }
    Ok(c)
}

/// Inverse transformation: closed form for groups with a group inverse,
/// otherwise componentwise numeric inversion searched near `sbox` (the
/// source box of `t`).
pub fn invert(t: &PointTransformation, sbox: &SampleBox) -> Result<PointTransformation, TransformError> {
    if let Some(inv) = t.params().and_then(group_inverse) {
        return build(&inv, None, sbox).map(|b| b.with_family(t.family()));
    }
    Ok(PointTransformation(Arc::new(Inner {
        kind: Kind::Inverse(t.clone(), sbox.clone()),
        guards: Vec::new(),
        factor: None,
        family: t.family(),
        params: None,
        label: format!("inverse of {}", t.label()),
    })))
}

/// `f'` as a function of the new variables: `(X_x^2/T_t) f` at the
/// numerically inverted point.
#[derive(Debug, Clone)]
pub struct PushedCoefficient {
    transform: PointTransformation,
    f: Expr,
    search: SampleBox,
}

impl PushedCoefficient {
    pub fn transform(&self) -> &PointTransformation {
        &self.transform
    }

    /// Preimage `(t, x)` of `(t', x')`.
    pub fn preimage(&self, tn: f64, xn: f64) -> Result<[f64; 2], TransformError> {
        let p = preimage(&self.transform, [tn, xn, 0.0], &self.search, 2)?;
        Ok([p[0], p[1]])
    }

    /// Generic rule `f' = X_x^2 f / T_t`.
    pub fn value(&self, tn: f64, xn: f64) -> Result<f64, TransformError> {
        let [t, x] = self.preimage(tn, xn)?;
        generic_rule(&self.transform, &self.f, t, x, &self.search)
    }

    /// Closed-form rule `g f`, if the transformation has one.
    pub fn closed_form(&self, tn: f64, xn: f64) -> Option<Result<f64, TransformError>> {
        let g = self.transform.factor()?;
        Some(self.preimage(tn, xn).and_then(|[t, x]| {
            let env = [t, x, 0.0];
            Ok(g.evaluate(&env)? * self.f.evaluate(&env)?)
        }))
    }
}

/// `X_x^2 f / T_t` at source `(t, x)`; `w` is irrelevant for `T` and `X`
/// and is pinned inside the box.
fn generic_rule(t: &PointTransformation, f: &Expr, tt: f64, x: f64, sbox: &SampleBox) -> Result<f64, TransformError> {
    let (wlo, whi) = sbox.bounds(Var::W);
    let p = [tt, x, 0.5 * (wlo + whi)];
    let tx = [t.component(0, &Dual2::seeds(p[0], p[1], p[2]))?, t.component(1, &Dual2::seeds(p[0], p[1], p[2]))?];
    Ok(tx[1].d(1) * tx[1].d(1) / tx[0].d(0) * f.evaluate(&p)?)
}

/// Induced arbitrary element. Checks on `sbox` that `(T, X)` is inverted
/// consistently and, for group builders, that the closed-form rule agrees
/// with `X_x^2 f / T_t` to [`RULE_TOL`].
pub fn pushforward_f(t: &PointTransformation, f: &Expr, sbox: &SampleBox) -> Result<PushedCoefficient, TransformError> {
    let pushed = PushedCoefficient {
        transform: t.clone(),
        f: f.clone(),
        search: sbox.clone(),
    };
    for p in admitted_points(t, sbox)? {
        let img = t.map_point(&p)?;
        let back = pushed.preimage(img[0], img[1])?;
        if (back[0] - p[0]).abs() > 1e-8 * (1.0 + p[0].abs()) || (back[1] - p[1]).abs() > 1e-8 * (1.0 + p[1].abs()) {
            return Err(TransformError::Inversion {
                component: "x",
                target: img[1],
            });
        }
        if let Some(g) = t.factor() {
            let generic = generic_rule(t, f, p[0], p[1], sbox)?;
            let closed = g.evaluate(&p)? * f.evaluate(&p)?;
            if !((closed - generic).abs() <= RULE_TOL * (1.0 + generic.abs())) {
                return Err(TransformError::RuleMismatch {
                    at: [p[0], p[1]],
                    closed,
                    generic,
                });
            }
        }
    }
    Ok(pushed)
}
