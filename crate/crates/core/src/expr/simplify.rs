//! Light simplification: constant folding plus collection of like terms in a
//! Laurent polynomial over "atoms" (the variables and any non-polynomial
//! subtree, e.g. `exp(2 * t)` or an antiderivative call).
//!
//! Nothing here rewrites across a domain restriction: `exp(ln(x))` stays
//! as it is. The only domain-enlarging rewrites are cancellations such as
//! `x / x -> 1`.

use std::collections::{BTreeMap, HashMap};

use super::{Expr, Node, Num, Var};

/// Give up on expansion beyond this many terms.
const MAX_TERMS: usize = 256;
/// Largest power of a multi-term base that is expanded.
const MAX_EXPAND: i64 = 6;

/// Sorted `(atom, exponent)` pairs with nonzero exponents.
type Mono = Vec<(usize, i64)>;

#[derive(Clone, Debug, Default)]
struct Poly(BTreeMap<Mono, Num>);

fn mono_mul(a: &Mono, b: &Mono) -> Mono {
    let mut out: Mono = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&(ka, ea)), Some(&(kb, eb))) if ka == kb => {
                i += 1;
                j += 1;
                (ka, ea + eb)
            }
            (Some(&p), Some(&(kb, _))) if p.0 < kb => {
                i += 1;
                p
            }
            (Some(_), Some(&q)) | (None, Some(&q)) => {
                j += 1;
                q
            }
            (Some(&p), None) => {
                i += 1;
                p
            }
            (None, None) => unreachable!(),
        };
        if next.1 != 0 {
            out.push(next);
        }
    }
    out
}

/// Sum that snaps float cancellation noise to an exact zero.
fn add_coeff(a: Num, b: Num) -> Num {
    let s = a.add(b);
    if let Num::Float(v) = s {
        if v.abs() <= 4.0 * f64::EPSILON * (a.to_f64().abs() + b.to_f64().abs()) {
            return Num::int(0);
        }
    }
    s
}

impl Poly {
    fn constant(c: Num) -> Poly {
        let mut p = Poly::default();
        if !c.is_zero() {
            p.0.insert(Vec::new(), c);
        }
        p
    }

    fn atom(id: usize, exp: i64) -> Poly {
        let mut p = Poly::default();
        p.0.insert(vec![(id, exp)], Num::int(1));
        p
    }

    fn single(&self) -> Option<(&Mono, Num)> {
        if self.0.len() == 1 {
            self.0.iter().next().map(|(m, c)| (m, *c))
        } else {
            None
        }
    }

    fn add_term(&mut self, m: Mono, c: Num) {
        let entry = self.0.entry(m);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                if !c.is_zero() {
                    v.insert(c);
                }
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = add_coeff(*o.get(), c);
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    fn add(mut self, other: Poly) -> Poly {
        for (m, c) in other.0 {
            self.add_term(m, c);
        }
        self
    }

    fn scale(self, c: Num) -> Poly {
        let mut out = Poly::default();
        for (m, v) in self.0 {
            out.add_term(m, v.mul(c));
        }
        out
    }

    fn mul(&self, other: &Poly) -> Option<Poly> {
        if self.0.len() * other.0.len() > MAX_TERMS * 4 {
            return None;
        }
        let mut out = Poly::default();
        for (ma, ca) in &self.0 {
            for (mb, cb) in &other.0 {
                out.add_term(mono_mul(ma, mb), ca.mul(*cb));
            }
        }
        (out.0.len() <= MAX_TERMS).then_some(out)
    }

    fn all_finite(&self) -> bool {
        self.0.values().all(Num::is_finite)
    }
}

struct Ctx {
    atoms: Vec<Expr>,
    keys: HashMap<String, usize>,
}

impl Ctx {
    fn new() -> Ctx {
        let mut ctx = Ctx {
            atoms: Vec::new(),
            keys: HashMap::new(),
        };
        for v in Var::ALL {
            ctx.intern(Expr::var(v));
        }
        ctx
    }

    fn intern(&mut self, e: Expr) -> usize {
        let key = e.to_string();
        if let Some(&id) = self.keys.get(&key) {
            return id;
        }
        self.atoms.push(e);
        self.keys.insert(key, self.atoms.len() - 1);
        self.atoms.len() - 1
    }

    fn opaque(&mut self, e: Expr, exp: i64) -> Poly {
        if let Some(c) = e.as_const() {
            if let Some(p) = c.powi(exp) {
                return Poly::constant(p);
            }
        }
        let id = self.intern(e);
        Poly::atom(id, exp)
    }

    fn poly_of(&mut self, e: &Expr) -> Option<Poly> {
        let p = match e.node() {
            Node::Const(c) => Poly::constant(*c),
            Node::Var(v) => Poly::atom(v.index(), 1),
            Node::Add(a, b) => self.poly_of(a)?.add(self.poly_of(b)?),
            Node::Sub(a, b) => self.poly_of(a)?.add(self.poly_of(b)?.scale(Num::int(-1))),
            Node::Neg(a) => self.poly_of(a)?.scale(Num::int(-1)),
            Node::Mul(a, b) => self.poly_of(a)?.mul(&self.poly_of(b)?)?,
            Node::Div(a, b) => {
                let pa = self.poly_of(a)?;
                let pb = self.poly_of(b)?;
                let inv = self.pow(pb, -1)?;
                pa.mul(&inv)?
            }
            Node::Pow(a, r) => {
                let pa = self.poly_of(a)?;
                match r.as_integer() {
                    Some(n) => self.pow(pa, n)?,
                    None => {
                        let base = self.expr_of(&pa);
                        self.opaque(base.pow(*r), 1)
                    }
                }
            }
            Node::Func(f, a) => {
                let arg = self.simplified(a);
                self.opaque(Expr::func(*f, arg), 1)
            }
            Node::Call(op, a) => {
                let arg = self.simplified(a);
                self.opaque(Expr::call(op.clone(), arg), 1)
            }
        };
        p.all_finite().then_some(p)
    }

    fn pow(&mut self, p: Poly, n: i64) -> Option<Poly> {
        if n == 0 {
            return Some(Poly::constant(Num::int(1)));
        }
        if p.0.is_empty() {
            // 0^n: keep the division by zero visible
            return (n > 0).then(Poly::default);
        }
        if let Some((m, c)) = p.single() {
            let coeff = c.powi(n)?;
            let mono: Mono = m.iter().map(|&(k, e)| (k, e * n)).collect();
            let mut out = Poly::default();
            out.add_term(mono, coeff);
            return Some(out);
        }
        if (1..=MAX_EXPAND).contains(&n) {
            let mut acc = p.clone();
            for _ in 1..n {
                acc = acc.mul(&p)?;
            }
            return Some(acc);
        }
        let base = self.expr_of(&p);
        Some(self.opaque(base, n))
    }

    fn simplified(&mut self, e: &Expr) -> Expr {
        match self.poly_of(e) {
            Some(p) => best(e, self.expr_of(&p)),
            None => best(e, fold(e)),
        }
    }

    fn expr_of(&self, p: &Poly) -> Expr {
        let mut terms: Vec<(&Mono, &Num)> = p.0.iter().collect();
        // highest total degree first, constant last
        terms.sort_by_key(|(m, _)| std::cmp::Reverse(m.iter().map(|&(_, e)| e.max(0)).sum::<i64>()));
        let mut acc: Option<Expr> = None;
        for (m, c) in terms {
            let negative = c.is_negative();
            let mag = if negative { c.neg() } else { *c };
            let mut num = Expr::constant(mag);
            let mut den = Expr::int(1);
            for &(k, e) in m {
                let a = self.atoms[k].clone();
                if e > 0 {
                    num = num.mul(a.powi(e));
                } else {
                    den = den.mul(a.powi(-e));
                }
            }
            let term = num.div(den);
            acc = Some(match acc {
                None if negative => term.neg(),
                None => term,
                Some(s) if negative => s.sub(term),
                Some(s) => s.add(term),
            });
        }
        acc.unwrap_or_else(|| Expr::int(0))
    }
}

/// Rebuild bottom-up through the folding constructors.
fn fold(e: &Expr) -> Expr {
    e.substitute_all(&[Expr::t(), Expr::x(), Expr::w()])
}

fn best(a: &Expr, b: Expr) -> Expr {
    if b.node_count() <= a.node_count() {
        b
    } else {
        a.clone()
    }
}

/// `coefficient * prod(atom^exponent)`.
pub type Term = (Num, Vec<(Expr, i64)>);

impl Expr {
    /// Semantically equal (on the common domain), never larger tree.
    pub fn simplify(&self) -> Expr {
        let folded = best(self, fold(self));
        let mut ctx = Ctx::new();
        match ctx.poly_of(self) {
            Some(p) => best(&folded, ctx.expr_of(&p)),
            None => folded,
        }
    }

    /// Coefficients of `v^0, v^1, ...` when the expression is a polynomial
    /// in `v` (after simplification) with `v`-free coefficients.
    pub fn coefficients(&self, v: Var) -> Option<Vec<Expr>> {
        let mut ctx = Ctx::new();
        let p = ctx.poly_of(self)?;
        let id = v.index();
        let mut by_degree: BTreeMap<i64, Poly> = BTreeMap::new();
        for (m, c) in &p.0 {
            let deg = m.iter().find(|(k, _)| *k == id).map_or(0, |&(_, e)| e);
            if deg < 0 {
                return None;
            }
            let rest: Mono = m.iter().copied().filter(|(k, _)| *k != id).collect();
            if rest.iter().any(|&(k, _)| ctx.atoms[k].depends_on(v)) {
                return None;
            }
            by_degree.entry(deg).or_default().add_term(rest, *c);
        }
        let top = by_degree.keys().next_back().copied().unwrap_or(0);
        Some(
            (0..=top)
                .map(|d| by_degree.get(&d).map_or_else(|| Expr::int(0), |p| ctx.expr_of(p)))
                .collect(),
        )
    }

    /// The collected terms `coefficient * prod(atom^exponent)`, or `None`
    /// if expansion blows up.
    pub fn terms(&self) -> Option<Vec<Term>> {
        let mut ctx = Ctx::new();
        let p = ctx.poly_of(self)?;
        Some(
            p.0.iter()
                .map(|(m, c)| (*c, m.iter().map(|&(k, e)| (ctx.atoms[k].clone(), e)).collect()))
                .collect(),
        )
    }
}
