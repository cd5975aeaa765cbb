//! Sampling boxes and probabilistic zero / constancy tests.
//!
//! These are Schwartz–Zippel style checks: an expression that vanishes at
//! `n` random points of a box is declared zero. It is not a proof.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EvalError, Expr, Node, Var};

/// No threshold used by [`probably_zero`] ever exceeds this.
pub const ZERO_CEILING: f64 = 1e-6;

/// Samples are kept this fraction of the interval width away from the ends.
pub const EDGE_MARGIN: f64 = 1e-3;

const MAX_ATTEMPTS: usize = 64;

pub type Exclusion = Arc<dyn Fn(&[f64; 3]) -> bool + Send + Sync>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoxError {
    #[error("interval for `{}` must have positive length, got [{lo}, {hi}]", .var.name())]
    EmptyInterval { var: Var, lo: f64, hi: f64 },
    #[error("sample count must be at least 1")]
    NoSamples,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ZeroTestError {
    #[error("indeterminate: {failed} of {total} sample evaluations failed (first: {first})")]
    Indeterminate { failed: usize, total: usize, first: EvalError },
    #[error("no admissible sample points in the box")]
    Starved,
}

/// Per-variable closed intervals, a sample count, a seed and an optional
/// predicate marking points to avoid.
#[derive(Clone)]
pub struct SampleBox {
    bounds: [(f64, f64); 3],
    pub n: usize,
    pub seed: u64,
    exclude: Option<Exclusion>,
}

impl fmt::Debug for SampleBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampleBox")
            .field("bounds", &self.bounds)
            .field("n", &self.n)
            .field("seed", &self.seed)
            .field("exclude", &self.exclude.is_some())
            .finish()
    }
}

impl SampleBox {
    pub fn new(t: (f64, f64), x: (f64, f64), w: (f64, f64), n: usize, seed: u64) -> Result<SampleBox, BoxError> {
        let bounds = [t, x, w];
        for (v, &(lo, hi)) in Var::ALL.iter().zip(&bounds) {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(BoxError::EmptyInterval { var: *v, lo, hi });
            }
        }
        if n == 0 {
            return Err(BoxError::NoSamples);
        }
        Ok(SampleBox {
            bounds,
            n,
            seed,
            exclude: None,
        })
    }

    /// Box used when nothing else is specified: `t ∈ [0.1, 1.1]`,
    /// `x ∈ [0.2, 1.2]`, `w ∈ [-1, 1]`, 50 samples. Both `t` and `x` stay
    /// away from 0, where many simple coefficients vanish or blow up.
    pub fn standard(seed: u64) -> SampleBox {
        SampleBox::new((0.1, 1.1), (0.2, 1.2), (-1.0, 1.0), 50, seed).expect("valid constant box")
    }

    pub fn bounds(&self, v: Var) -> (f64, f64) {
        self.bounds[v.index()]
    }

    pub fn with_bounds(mut self, v: Var, lo: f64, hi: f64) -> Result<SampleBox, BoxError> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(BoxError::EmptyInterval { var: v, lo, hi });
        }
        self.bounds[v.index()] = (lo, hi);
        Ok(self)
    }

    pub fn with_n(mut self, n: usize) -> SampleBox {
        self.n = n.max(1);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> SampleBox {
        self.seed = seed;
        self
    }

    /// Add a predicate; a point is rejected if any predicate holds.
    pub fn excluding(mut self, pred: Exclusion) -> SampleBox {
        self.exclude = Some(match self.exclude.take() {
            None => pred,
            Some(old) => Arc::new(move |p: &[f64; 3]| old(p) || pred(p)),
        });
        self
    }

    pub fn is_excluded(&self, p: &[f64; 3]) -> bool {
        self.exclude.as_ref().is_some_and(|f| f(p))
    }

    pub fn contains(&self, p: &[f64; 3]) -> bool {
        self.bounds.iter().zip(p).all(|(&(lo, hi), &v)| v >= lo && v <= hi)
    }

    /// The deterministic generator for sample `i`: one ChaCha stream per
    /// sample, so results do not depend on evaluation order.
    pub fn rng(&self, i: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(i as u64);
        rng
    }

    /// A uniform point away from the edges, not checked against exclusions.
    pub fn draw(&self, rng: &mut impl Rng) -> [f64; 3] {
        let mut p = [0.0; 3];
        for (slot, &(lo, hi)) in p.iter_mut().zip(&self.bounds) {
            let m = EDGE_MARGIN * (hi - lo);
            *slot = rng.random_range(lo + m..=hi - m);
        }
        p
    }

    /// Sample point `i`, or `None` if every attempt hit an exclusion.
    pub fn point(&self, i: usize) -> Option<[f64; 3]> {
        let mut rng = self.rng(i);
        (0..MAX_ATTEMPTS)
            .map(|_| self.draw(&mut rng))
            .find(|p| !self.is_excluded(p))
    }

    /// The `n` sample points (fewer if exclusions starve some streams).
    pub fn points(&self) -> Vec<[f64; 3]> {
        (0..self.n).filter_map(|i| self.point(i)).collect()
    }
}

/// Additive terms at the top of the tree.
fn summands(e: &Expr, out: &mut Vec<Expr>) {
    match e.node() {
        Node::Add(a, b) | Node::Sub(a, b) => {
            summands(a, out);
            summands(b, out);
        }
        Node::Neg(a) => summands(a, out),
        _ => out.push(e.clone()),
    }
}

/// Largest magnitude among the top-level terms of `e` at `p`: the size of
/// the numbers that had to cancel.
fn local_scale(terms: &[Expr], p: &[f64; 3]) -> f64 {
    terms
        .iter()
        .filter_map(|t| t.evaluate(p).ok())
        .fold(0.0, |m: f64, v| m.max(v.abs()))
}

/// Whether `e` vanishes identically on the box, decided by simplification
/// and then sampling: `|e| <= min(tol * (1 + scale), ZERO_CEILING)` at every
/// sample point, where `scale` is the size of the largest top-level term.
pub fn probably_zero(e: &Expr, sbox: &SampleBox, tol: f64) -> Result<bool, ZeroTestError> {
    let s = e.simplify();
    if let Some(c) = s.as_const() {
        return Ok(c.to_f64().abs() <= tol.min(ZERO_CEILING));
    }
    let mut terms = Vec::new();
    summands(e, &mut terms);
    let points = sbox.points();
    if points.is_empty() {
        return Err(ZeroTestError::Starved);
    }
    let mut failed = 0;
    let mut first = None;
    let mut nonzero = false;
    for p in &points {
        match s.evaluate(p) {
            Ok(v) => {
                let bound = (tol * (1.0 + local_scale(&terms, p))).min(ZERO_CEILING);
                if !(v.abs() <= bound) {
                    nonzero = true;
                }
            }
            Err(err) => {
                failed += 1;
                first.get_or_insert(err);
            }
        }
    }
    if 2 * failed > points.len() {
        return Err(ZeroTestError::Indeterminate {
            failed,
            total: points.len(),
            first: first.expect("at least one failure recorded"),
        });
    }
    Ok(!nonzero)
}

/// `Some(c)` if `e` does not vary with any of `vars` on the box, where `c`
/// is its value at the first admissible sample.
pub fn as_constant(e: &Expr, vars: &[Var], sbox: &SampleBox, tol: f64) -> Result<Option<f64>, ZeroTestError> {
    let s = e.simplify();
    if let Some(c) = s.as_const() {
        return Ok(Some(c.to_f64()));
    }
    for v in vars {
        if !probably_zero(&s.diff(*v), sbox, tol)? {
            return Ok(None);
        }
    }
    let mut first = None;
    for p in sbox.points() {
        match s.evaluate(&p) {
            Ok(v) => return Ok(Some(v)),
            Err(err) => {
                first.get_or_insert(err);
            }
        }
    }
    Err(match first {
        Some(first) => ZeroTestError::Indeterminate {
            failed: sbox.n,
            total: sbox.n,
            first,
        },
        None => ZeroTestError::Starved,
    })
}
