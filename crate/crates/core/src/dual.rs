//! Second-order forward-mode dual numbers over the jet coordinates `(t, x, w)`.
//!
//! A [`Dual2`] carries a value, its gradient and its (symmetric) Hessian with
//! respect to the three seed variables. Every component map of a point
//! transformation is evaluated on these numbers, so first and second partial
//! derivatives come out exact up to rounding.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Number of seed variables: `t`, `x` and the dependent variable `w`.
pub const NVARS: usize = 3;

/// Packed upper-triangular Hessian index for `i <= j`.
#[inline]
pub const fn hidx(i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    // rows: (0,0) (0,1) (0,2) (1,1) (1,2) (2,2)
    match (a, b) {
        (0, 0) => 0,
        (0, 1) => 1,
        (0, 2) => 2,
        (1, 1) => 3,
        (1, 2) => 4,
        _ => 5,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual2 {
    pub v: f64,
    pub g: [f64; NVARS],
    pub h: [f64; 6],
}

impl Dual2 {
    pub const fn constant(v: f64) -> Self {
        Dual2 {
            v,
            g: [0.0; NVARS],
            h: [0.0; 6],
        }
    }

    /// Seed variable `i` at value `v`.
    pub fn var(v: f64, i: usize) -> Self {
        let mut d = Dual2::constant(v);
        d.g[i] = 1.0;
        d
    }

    /// The three seeds `(t, x, w)` at a point.
    pub fn seeds(t: f64, x: f64, w: f64) -> [Dual2; 3] {
        [Dual2::var(t, 0), Dual2::var(x, 1), Dual2::var(w, 2)]
    }

    #[inline]
    pub fn d(&self, i: usize) -> f64 {
        self.g[i]
    }

    #[inline]
    pub fn dd(&self, i: usize, j: usize) -> f64 {
        self.h[hidx(i, j)]
    }

    /// Apply a univariate function with value `f0`, first derivative `f1`
    /// and second derivative `f2` at `self.v`.
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let mut out = Dual2::constant(f0);
        for i in 0..NVARS {
            out.g[i] = f1 * self.g[i];
        }
        for i in 0..NVARS {
            for j in i..NVARS {
                let k = hidx(i, j);
                out.h[k] = f2 * self.g[i] * self.g[j] + f1 * self.h[k];
            }
        }
        out
    }

    pub fn recip(&self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn exp(&self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(&self) -> Self {
        let r = 1.0 / self.v;
        self.chain(self.v.ln(), r, -r * r)
    }

    pub fn sqrt(&self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn abs(&self) -> Self {
        let s = if self.v < 0.0 { -1.0 } else { 1.0 };
        self.chain(self.v.abs(), s, 0.0)
    }

    pub fn powf(&self, r: f64) -> Self {
        if r == 0.0 {
            return Dual2::constant(1.0);
        }
        let p = self.v.powf(r);
        let d1 = r * self.v.powf(r - 1.0);
        let d2 = r * (r - 1.0) * self.v.powf(r - 2.0);
        self.chain(p, d1, d2)
    }

    pub fn powi(&self, n: i32) -> Self {
        if n == 0 {
            return Dual2::constant(1.0);
        }
        let d1 = f64::from(n) * self.v.powi(n - 1);
        let d2 = if n == 1 {
            0.0
        } else {
            f64::from(n) * f64::from(n - 1) * self.v.powi(n - 2)
        };
        self.chain(self.v.powi(n), d1, d2)
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.g.iter().all(|g| g.is_finite()) && self.h.iter().all(|h| h.is_finite())
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = *self;
        out.v *= c;
        out.g.iter_mut().for_each(|g| *g *= c);
        out.h.iter_mut().for_each(|h| *h *= c);
        out
    }
}

impl Add for Dual2 {
    type Output = Dual2;
    fn add(self, o: Dual2) -> Dual2 {
        let mut out = self;
        out.v += o.v;
        for i in 0..NVARS {
            out.g[i] += o.g[i];
        }
        for k in 0..6 {
            out.h[k] += o.h[k];
        }
        out
    }
}

impl Sub for Dual2 {
    type Output = Dual2;
    fn sub(self, o: Dual2) -> Dual2 {
        self + (-o)
    }
}

impl Neg for Dual2 {
    type Output = Dual2;
    fn neg(self) -> Dual2 {
        self.scale(-1.0)
    }
}

impl Mul for Dual2 {
    type Output = Dual2;
    fn mul(self, o: Dual2) -> Dual2 {
        let mut out = Dual2::constant(self.v * o.v);
        for i in 0..NVARS {
            out.g[i] = self.g[i] * o.v + self.v * o.g[i];
        }
        for i in 0..NVARS {
            for j in i..NVARS {
                let k = hidx(i, j);
                out.h[k] = self.h[k] * o.v
                    + self.g[i] * o.g[j]
                    + self.g[j] * o.g[i]
                    + self.v * o.h[k];
            }
        }
        out
    }
}

impl Div for Dual2 {
    type Output = Dual2;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Dual2) -> Dual2 {
        self * o.recip()
    }
}

/// Lift a vector map `z = G(y)` known through its value, Jacobian and
/// Hessians at `y.v` onto dual inputs `y` (second-order chain rule).
///
/// `hess[i][hidx(a, b)]` is `d²G_i / dy_a dy_b`.
pub fn lift_map(
    value: [f64; 3],
    jac: [[f64; 3]; 3],
    hess: [[f64; 6]; 3],
    y: &[Dual2; 3],
) -> [Dual2; 3] {
    let mut out = [Dual2::constant(0.0); 3];
    for i in 0..3 {
        let mut o = Dual2::constant(value[i]);
        for s in 0..NVARS {
            o.g[s] = (0..3).map(|a| jac[i][a] * y[a].g[s]).sum();
        }
        for s in 0..NVARS {
            for r in s..NVARS {
                let k = hidx(s, r);
                let mut acc = 0.0;
                for a in 0..3 {
                    acc += jac[i][a] * y[a].h[k];
                    for b in 0..3 {
                        acc += hess[i][hidx(a, b)] * y[a].g[s] * y[b].g[r];
                    }
                }
                o.h[k] = acc;
            }
        }
        out[i] = o;
    }
    out
}

/// Numbers an expression can be evaluated on: plain `f64` or [`Dual2`].
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    /// Whether derivative information is carried (and must be supplied to
    /// [`Scalar::apply`]).
    const DERIVATIVES: bool;

    fn from_f64(c: f64) -> Self;
    fn value(&self) -> f64;
    /// Apply a univariate function given its value and, when
    /// [`Scalar::DERIVATIVES`] is set, its first two derivatives.
    fn apply(&self, f0: f64, f1: f64, f2: f64) -> Self;
    fn all_finite(&self) -> bool;
}

impl Scalar for f64 {
    const DERIVATIVES: bool = false;
    fn from_f64(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn apply(&self, f0: f64, _f1: f64, _f2: f64) -> Self {
        f0
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Dual2 {
    const DERIVATIVES: bool = true;
    fn from_f64(c: f64) -> Self {
        Dual2::constant(c)
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn apply(&self, f0: f64, f1: f64, f2: f64) -> Self {
        self.chain(f0, f1, f2)
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn product_rule_second_order() {
        let [t, x, _] = Dual2::seeds(0.7, -1.3, 0.0);
        // f = t^2 x^3
        let f = t.powi(2) * x.powi(3);
        assert!(close(f.d(0), 2.0 * 0.7 * (-1.3f64).powi(3)));
        assert!(close(f.d(1), 3.0 * 0.49 * 1.69));
        assert!(close(f.dd(0, 1), 2.0 * 0.7 * 3.0 * 1.69));
        assert!(close(f.dd(1, 1), 0.49 * 6.0 * -1.3));
        assert!(close(f.dd(0, 0), 2.0 * (-1.3f64).powi(3)));
    }

    #[test]
    fn quotient_and_exp() {
        let [t, x, w] = Dual2::seeds(0.5, 2.0, -0.25);
        let f = (t * w).exp() / x;
        let e = (0.5f64 * -0.25).exp();
        assert!(close(f.v, e / 2.0));
        assert!(close(f.d(2), 0.5 * e / 2.0));
        assert!(close(f.dd(1, 1), 2.0 * e / 8.0));
        assert!(close(f.dd(0, 2), (1.0 + 0.5 * -0.25) * e / 2.0));
    }

    #[test]
    fn lift_identity_map_is_identity() {
        let y = Dual2::seeds(0.3, 0.4, 0.5);
        let jac = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let out = lift_map([0.3, 0.4, 0.5], jac, [[0.0; 6]; 3], &y);
        assert_eq!(out, y);
    }
}
