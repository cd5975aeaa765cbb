//! Numeric constants: exact rationals where possible, floats otherwise.

use std::fmt;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Signed, ToPrimitive, Zero};

pub type Rational = Ratio<i64>;

#[derive(Clone, Copy, Debug)]
pub enum Num {
    Rat(Rational),
    Float(f64),
}

impl PartialEq for Num {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Num::Rat(a), Num::Rat(b)) => a == b,
            (Num::Float(a), Num::Float(b)) => a.to_bits() == b.to_bits() || a == b,
            _ => false,
        }
    }
}

impl Num {
    pub fn int(n: i64) -> Num {
        Num::Rat(Rational::from_integer(n))
    }

    pub fn ratio(p: i64, q: i64) -> Num {
        Num::Rat(Rational::new(p, q))
    }

    /// Floats that are exactly small integers are stored as rationals.
    pub fn from_f64(v: f64) -> Num {
        if v.is_finite() && v.fract() == 0.0 && v.abs() < 1e15 {
            Num::int(v as i64)
        } else {
            Num::Float(v)
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Num::Rat(r) => r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN),
            Num::Float(f) => f,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Num::Rat(r) => r.is_zero(),
            Num::Float(f) => *f == 0.0,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Num::Rat(r) => *r == Rational::from_integer(1),
            Num::Float(f) => *f == 1.0,
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Num::Rat(r) => r.is_negative(),
            Num::Float(f) => f.is_sign_negative(),
        }
    }

    pub fn as_integer(&self) -> Option<i64> {
        match self {
            Num::Rat(r) if r.is_integer() => Some(*r.numer()),
            _ => None,
        }
    }

    fn lift(self, other: Num, op: impl Fn(Rational, Rational) -> Option<Rational>, fop: impl Fn(f64, f64) -> f64) -> Num {
        if let (Num::Rat(a), Num::Rat(b)) = (self, other) {
            if let Some(r) = op(a, b) {
                return Num::Rat(r);
            }
        }
        Num::Float(fop(self.to_f64(), other.to_f64()))
    }

    pub fn add(self, o: Num) -> Num {
        self.lift(o, |a, b| a.checked_add(&b), |a, b| a + b)
    }

    pub fn sub(self, o: Num) -> Num {
        self.lift(o, |a, b| a.checked_sub(&b), |a, b| a - b)
    }

    pub fn mul(self, o: Num) -> Num {
        self.lift(o, |a, b| a.checked_mul(&b), |a, b| a * b)
    }

    /// `None` on division by zero.
    pub fn div(self, o: Num) -> Option<Num> {
        if o.is_zero() {
            return None;
        }
        Some(self.lift(o, |a, b| a.checked_div(&b), |a, b| a / b))
    }

    pub fn neg(self) -> Num {
        match self {
            Num::Rat(r) => Num::Rat(-r),
            Num::Float(f) => Num::Float(-f),
        }
    }

    /// Integer power; `None` for `0^negative`.
    pub fn powi(self, n: i64) -> Option<Num> {
        if n < 0 {
            return Num::int(1).div(self.powi(-n)?);
        }
        let mut acc = Num::int(1);
        for _ in 0..n {
            acc = acc.mul(self);
        }
        Some(acc)
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Num::Rat(_) => true,
            Num::Float(f) => f.is_finite(),
        }
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num::Rat(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Num::Rat(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            // Debug formatting is the shortest representation that round-trips
            Num::Float(v) => write!(f, "{v:?}"),
        }
    }
}
