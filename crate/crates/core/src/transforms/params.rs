//! Parameter records of the equivalence groups, their validation, projective
//! normalization and the closed-form group laws.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::DEFAULT_BASE;
use crate::classes::Family;

use super::heat::HeatKind;
use super::TransformError;

fn default_base() -> f64 {
    DEFAULT_BASE
}

/// `t' = αt + β`, `x' = κ(x + μ1 t + μ0)`,
/// `v' = (κ²/α)(v + μ1 x/2 + μ1² t/4 + ν)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UsualPotParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub mu1: f64,
    pub mu0: f64,
    pub nu: f64,
}

/// Möbius group of the constant-coefficient equations. `k` is taken
/// relative to the normalized tuple (first nonzero of `α, β, γ, δ` equal
/// to 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct P3Params {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub kappa: f64,
    pub mu1: f64,
    pub mu0: f64,
    pub k: f64,
    #[serde(rename = "F2", default)]
    pub f2: HeatKind,
}

/// Group of the quadratic-in-`x` subclass; `c6` is the additive constant
/// of `v'`, independent of `c5` in `t'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct P2Params {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    #[serde(default)]
    pub c6: f64,
    #[serde(default = "default_base")]
    pub t0: f64,
}

/// Möbius form of the `f2 = 0` group; `ν` is relative to the normalized
/// tuple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct P2LinearParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub kappa: f64,
    pub nu: f64,
    pub c4: f64,
    pub c5: f64,
    #[serde(default = "default_base")]
    pub t0: f64,
}

/// `t' = αt + β`, `x' = κ(x + μ1 t + μ0)`, `u' = (κ/α)(u + μ1/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CUsualParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub mu1: f64,
    pub mu0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct C2Params {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    #[serde(default = "default_base")]
    pub t0: f64,
}

/// Projective group of the generalized Burgers equations: the matrix
/// `[[κ, μ1, μ0], [0, α, β], [0, γ, δ]]` up to a nonzero multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbeParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub kappa: f64,
    pub mu1: f64,
    pub mu0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "group", rename_all = "kebab-case")]
pub enum Params {
    UsualPot(UsualPotParams),
    #[serde(alias = "P3")]
    P3(P3Params),
    #[serde(alias = "P2")]
    P2(P2Params),
    P2Linear(P2LinearParams),
    CUsual(CUsualParams),
    #[serde(alias = "C2")]
    C2(C2Params),
    #[serde(alias = "GBE")]
    Gbe(GbeParams),
}

/// Group names accepted by [`Params::from_value`], with their required
/// fields.
const SCHEMA: [(&str, &[&str]); 7] = [
    ("usual-pot", &["alpha", "beta", "kappa", "mu1", "mu0", "nu"]),
    ("p3", &["alpha", "beta", "gamma", "delta", "kappa", "mu1", "mu0", "k"]),
    ("p2", &["c0", "c1", "c2", "c3", "c4", "c5"]),
    ("p2-linear", &["alpha", "beta", "gamma", "delta", "kappa", "nu", "c4", "c5"]),
    ("c-usual", &["alpha", "beta", "kappa", "mu1", "mu0"]),
    ("c2", &["c0", "c1", "c2", "c3", "c4", "c5"]),
    ("gbe", &["alpha", "beta", "gamma", "delta", "kappa", "mu1", "mu0"]),
];

pub fn group_names() -> impl Iterator<Item = &'static str> {
    SCHEMA.iter().map(|(g, _)| *g)
}

fn canonical_group(g: &str) -> Option<&'static str> {
    let lower = g.to_ascii_lowercase();
    group_names().find(|n| *n == lower)
}

/// Re-encode non-integer numbers as plain `f64`. With arbitrary-precision
/// numbers, a literal that is not the shortest representation of its `f64`
/// (such as 17-digit output) would otherwise not deserialize inside tagged
/// enums.
fn plain_numbers(v: &mut Value) {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            if let Some(x) = n.as_f64().and_then(serde_json::Number::from_f64) {
                *n = x;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(plain_numbers),
        Value::Object(m) => m.values_mut().for_each(plain_numbers),
        _ => {}
    }
}

impl Params {
    /// Parse a parameter document, reporting every missing field at once.
    pub fn from_value(mut v: Value) -> Result<Params, TransformError> {
        let obj = v
            .as_object_mut()
            .ok_or_else(|| TransformError::Schema("parameter document must be a JSON object".into()))?;
        let group = obj
            .get("group")
            .and_then(Value::as_str)
            .ok_or_else(|| TransformError::Schema("missing field `group`".into()))?;
        let canon = canonical_group(group).ok_or_else(|| {
            TransformError::Schema(format!(
                "unknown group `{group}` (expected one of {})",
                group_names().collect::<Vec<_>>().join(", ")
            ))
        })?;
        let required = SCHEMA.iter().find(|(g, _)| *g == canon).map(|(_, r)| *r).unwrap_or(&[]);
        let missing: Vec<&str> = required.iter().copied().filter(|k| !obj.contains_key(*k)).collect();
        if !missing.is_empty() {
            return Err(TransformError::Schema(format!(
                "group `{canon}` is missing field(s): {}",
                missing.join(", ")
            )));
        }
        obj.insert("group".into(), Value::String(canon.into()));
        plain_numbers(&mut v);
        serde_json::from_value(v).map_err(|e| TransformError::Schema(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Params, TransformError> {
        let v: Value = serde_json::from_str(text).map_err(|e| TransformError::Schema(e.to_string()))?;
        Params::from_value(v)
    }

    pub fn group(&self) -> &'static str {
        match self {
            Params::UsualPot(_) => "usual-pot",
            Params::P3(_) => "p3",
            Params::P2(_) => "p2",
            Params::P2Linear(_) => "p2-linear",
            Params::CUsual(_) => "c-usual",
            Params::C2(_) => "c2",
            Params::Gbe(_) => "gbe",
        }
    }

    /// The family whose equations the group acts on.
    pub fn family(&self) -> Family {
        match self {
            Params::UsualPot(_) | Params::P3(_) | Params::P2(_) | Params::P2Linear(_) => Family::P,
            Params::CUsual(_) | Params::C2(_) => Family::C,
            Params::Gbe(_) => Family::L,
        }
    }

    /// Whether building needs the arbitrary element (not only the
    /// parameters).
    pub fn needs_f(&self) -> bool {
        matches!(self, Params::P3(_) | Params::P2(_) | Params::P2Linear(_) | Params::C2(_))
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        let bad = |why: &str| Err(TransformError::InvalidParams(format!("{}: {why}", self.group())));
        let finite = serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_object().cloned())
            .map(|o| o.values().all(|x| !x.is_number() || x.as_f64().is_some_and(f64::is_finite)))
            .unwrap_or(false);
        if !finite {
            return bad("parameters must be finite");
        }
        match self {
            Params::UsualPot(p) if p.alpha == 0.0 || p.kappa == 0.0 => bad("α and κ must be nonzero"),
            Params::CUsual(p) if p.alpha == 0.0 || p.kappa == 0.0 => bad("α and κ must be nonzero"),
            Params::P3(p) if p.alpha * p.delta - p.beta * p.gamma == 0.0 => bad("αδ − βγ must be nonzero"),
            Params::P3(p) if p.kappa == 0.0 || p.k == 0.0 => bad("κ and k must be nonzero"),
            Params::P2(p) if p.c0 == 0.0 || (p.c1 == 0.0 && p.c2 == 0.0) => bad("c0 ≠ 0 and (c1, c2) ≠ (0, 0) required"),
            Params::C2(p) if p.c0 == 0.0 || (p.c1 == 0.0 && p.c2 == 0.0) => bad("c0 ≠ 0 and (c1, c2) ≠ (0, 0) required"),
            Params::P2Linear(p) if p.alpha * p.delta - p.beta * p.gamma == 0.0 => bad("αδ − βγ must be nonzero"),
            Params::P2Linear(p) if p.kappa == 0.0 => bad("κ must be nonzero"),
            Params::Gbe(p) if p.alpha * p.delta - p.beta * p.gamma == 0.0 => bad("αδ − βγ must be nonzero"),
            Params::Gbe(p) if p.kappa == 0.0 => bad("κ must be nonzero"),
            _ => Ok(()),
        }
    }
}

/// First nonzero entry of `(α, β, γ, δ)`.
fn leading(tuple: [f64; 4]) -> Result<f64, TransformError> {
    tuple
        .into_iter()
        .find(|v| *v != 0.0)
        .ok_or_else(|| TransformError::InvalidParams("projective tuple (α, β, γ, δ) is all zero".into()))
}

/// Canonical representative of a projective record: the tuple is divided
/// by its first nonzero entry among `(α, β, γ, δ)`. For the Burgers group
/// `μ1, μ0` scale along; in the potential groups they (and `k`, `ν`) do not.
pub fn normalize_projective(p: &Params) -> Result<Params, TransformError> {
    match p {
        Params::P3(q) => {
            let s = leading([q.alpha, q.beta, q.gamma, q.delta])?;
            Ok(Params::P3(P3Params {
                alpha: q.alpha / s,
                beta: q.beta / s,
                gamma: q.gamma / s,
                delta: q.delta / s,
                kappa: q.kappa / s,
                ..q.clone()
            }))
        }
        Params::P2Linear(q) => {
            let s = leading([q.alpha, q.beta, q.gamma, q.delta])?;
            Ok(Params::P2Linear(P2LinearParams {
                alpha: q.alpha / s,
                beta: q.beta / s,
                gamma: q.gamma / s,
                delta: q.delta / s,
                kappa: q.kappa / s,
                ..*q
            }))
        }
        Params::Gbe(q) => {
            let s = leading([q.alpha, q.beta, q.gamma, q.delta])?;
            Ok(Params::Gbe(GbeParams {
                alpha: q.alpha / s,
                beta: q.beta / s,
                gamma: q.gamma / s,
                delta: q.delta / s,
                kappa: q.kappa / s,
                mu1: q.mu1 / s,
                mu0: q.mu0 / s,
            }))
        }
        other => Err(TransformError::NotProjective(other.group())),
    }
}

/// Scale the projective tuple by `s` (without normalizing).
pub fn rescale_projective(p: &Params, s: f64) -> Result<Params, TransformError> {
    let mut out = p.clone();
    match &mut out {
        Params::P3(q) => {
            for v in [&mut q.alpha, &mut q.beta, &mut q.gamma, &mut q.delta, &mut q.kappa] {
                *v *= s;
            }
        }
        Params::P2Linear(q) => {
            for v in [&mut q.alpha, &mut q.beta, &mut q.gamma, &mut q.delta, &mut q.kappa] {
                *v *= s;
            }
        }
        Params::Gbe(q) => {
            for v in [&mut q.alpha, &mut q.beta, &mut q.gamma, &mut q.delta, &mut q.kappa, &mut q.mu1, &mut q.mu0] {
                *v *= s;
            }
        }
        other => return Err(TransformError::NotProjective(other.group())),
    }
    Ok(out)
}

fn usual_law(a: &UsualPotParams, b: &UsualPotParams) -> UsualPotParams {
    let mu1 = a.mu1 + a.alpha * b.mu1 / a.kappa;
    let mu0 = a.mu0 + (b.mu1 * a.beta + b.mu0) / a.kappa;
    let nu = a.nu
        + (a.alpha / (a.kappa * a.kappa))
            * (b.mu1 * a.kappa * a.mu0 / 2.0 + b.mu1 * b.mu1 * a.beta / 4.0 + b.nu);
    UsualPotParams {
        alpha: a.alpha * b.alpha,
        beta: b.alpha * a.beta + b.beta,
        kappa: a.kappa * b.kappa,
        mu1,
        mu0,
        nu,
    }
}

fn usual_inverse(a: &UsualPotParams) -> UsualPotParams {
    let mu1 = -a.kappa * a.mu1 / a.alpha;
    let mu0 = -a.kappa * a.mu0 - mu1 * a.beta;
    let nu = -a.kappa * a.kappa * a.nu / a.alpha - mu1 * a.kappa * a.mu0 / 2.0 - mu1 * mu1 * a.beta / 4.0;
    UsualPotParams {
        alpha: 1.0 / a.alpha,
        beta: -a.beta / a.alpha,
        kappa: 1.0 / a.kappa,
        mu1,
        mu0,
        nu,
    }
}

fn c_to_pot(c: &CUsualParams) -> UsualPotParams {
    UsualPotParams {
        alpha: c.alpha,
        beta: c.beta,
        kappa: c.kappa,
        mu1: c.mu1,
        mu0: c.mu0,
        nu: 0.0,
    }
}

fn pot_to_c(p: &UsualPotParams) -> CUsualParams {
    CUsualParams {
        alpha: p.alpha,
        beta: p.beta,
        kappa: p.kappa,
        mu1: p.mu1,
        mu0: p.mu0,
    }
}

type Mat3 = nalgebra::Matrix3<f64>;

fn gbe_matrix(p: &GbeParams) -> Mat3 {
    Mat3::new(p.kappa, p.mu1, p.mu0, 0.0, p.alpha, p.beta, 0.0, p.gamma, p.delta)
}

fn gbe_from_matrix(m: &Mat3) -> GbeParams {
    GbeParams {
        kappa: m[(0, 0)],
        mu1: m[(0, 1)],
        mu0: m[(0, 2)],
        alpha: m[(1, 1)],
        beta: m[(1, 2)],
        gamma: m[(2, 1)],
        delta: m[(2, 2)],
    }
}

/// Parameters of `second ∘ first` when both lie in the same usual group
/// with a closed-form law (usual potential, usual conserved-form, Burgers).
pub fn group_law(first: &Params, second: &Params) -> Option<Params> {
    match (first, second) {
        (Params::UsualPot(a), Params::UsualPot(b)) => Some(Params::UsualPot(usual_law(a, b))),
        (Params::CUsual(a), Params::CUsual(b)) => Some(Params::CUsual(pot_to_c(&usual_law(&c_to_pot(a), &c_to_pot(b))))),
        (Params::Gbe(a), Params::Gbe(b)) => Some(Params::Gbe(gbe_from_matrix(&(gbe_matrix(b) * gbe_matrix(a))))),
        _ => None,
    }
}

/// Closed-form inverse within the same usual group.
pub fn group_inverse(p: &Params) -> Option<Params> {
    match p {
        Params::UsualPot(a) => Some(Params::UsualPot(usual_inverse(a))),
        Params::CUsual(a) => Some(Params::CUsual(pot_to_c(&usual_inverse(&c_to_pot(a))))),
        Params::Gbe(a) => gbe_matrix(a).try_inverse().map(|m| Params::Gbe(gbe_from_matrix(&m))),
        _ => None,
    }
}

/// The identity element of the usual potential group.
pub fn usual_identity() -> UsualPotParams {
    UsualPotParams {
        alpha: 1.0,
        beta: 0.0,
        kappa: 1.0,
        mu1: 0.0,
        mu0: 0.0,
        nu: 0.0,
    }
}
