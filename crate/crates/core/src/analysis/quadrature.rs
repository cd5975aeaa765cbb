//! Adaptive Gauss–Kronrod (7/15) quadrature and a cumulative-grid cache.

use std::sync::Mutex;

use crate::expr::{DomainKind, EvalError};

// 15-point Kronrod abscissae (non-negative half, descending) and weights;
// every other abscissa is a 7-point Gauss node.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Subinterval budget of the global adaptive scheme.
const MAX_INTERVALS: usize = 400;

/// Spacing of the cached cumulative grid.
pub const GRID_STEP: f64 = 0.25;

struct Rule {
    kronrod: f64,
    error: f64,
    /// Integral of |f|, for the round-off floor.
    abs: f64,
}

fn singular(t: f64, why: impl std::fmt::Display) -> EvalError {
    // six significant digits are plenty to name the point
    let shown: f64 = format!("{t:.5e}").parse().unwrap_or(t);
    EvalError::domain(
        DomainKind::Quadrature(format!("integrand singular near t = {shown}")),
        why,
    )
}

fn gk15(f: &dyn Fn(f64) -> Result<f64, EvalError>, a: f64, b: f64) -> Result<Rule, EvalError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let eval = |t: f64| -> Result<f64, EvalError> {
        match f(t) {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(v) => Err(singular(t, format!("value {v}"))),
            Err(e) => Err(singular(t, e)),
        }
    };
    let fc = eval(c)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut abs = WGK[7] * fc.abs();
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = eval(c - dx)?;
        let f2 = eval(c + dx)?;
        kronrod += WGK[j] * (f1 + f2);
        abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Ok(Rule {
        kronrod: kronrod * h,
        error: ((kronrod - gauss) * h).abs(),
        abs: abs * h.abs(),
    })
}

/// `∫_a^b f` to absolute tolerance `tol`: global adaptive bisection of the
/// subinterval with the largest error estimate.
pub fn integrate(f: &dyn Fn(f64) -> Result<f64, EvalError>, a: f64, b: f64, tol: f64) -> Result<f64, EvalError> {
    if a == b {
        return Ok(0.0);
    }
    let mut parts = vec![(a, b, gk15(f, a, b)?)];
    loop {
        let (value, error, abs) = parts.iter().fold((0.0, 0.0, 0.0), |(v, e, s), (_, _, r)| {
            (v + r.kronrod, e + r.error, s + r.abs)
        });
        if error <= tol || error <= 50.0 * f64::EPSILON * abs {
            return Ok(value);
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2.error.total_cmp(&y.1 .2.error))
            .map(|(i, _)| i)
            .expect("at least one subinterval");
        let (lo, hi, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if parts.len() + 2 > MAX_INTERVALS || mid == lo || mid == hi {
            return Err(singular(mid, "adaptive quadrature did not converge"));
        }
        parts.push((lo, mid, gk15(f, lo, mid)?));
        parts.push((mid, hi, gk15(f, mid, hi)?));
    }
}

/// Cumulative integrals at the nodes `t0 + k * GRID_STEP`, extended on
/// demand. Each cell is integrated independently with the same tolerance,
/// so a node's value does not depend on which evaluations came first.
#[derive(Debug, Default)]
pub struct Grid {
    /// `forward[k] = ∫_{t0}^{t0 + k h}`
    forward: Vec<f64>,
    /// `backward[k] = ∫_{t0}^{t0 - k h}`
    backward: Vec<f64>,
}

#[derive(Debug)]
pub struct CumulativeCache {
    t0: f64,
    tol: f64,
    grid: Mutex<Grid>,
}

/// Beyond this many cells we refuse rather than allocate.
const MAX_CELLS: i64 = 1 << 20;

impl CumulativeCache {
    pub fn new(t0: f64, tol: f64) -> CumulativeCache {
        CumulativeCache {
            t0,
            tol,
            grid: Mutex::new(Grid {
                forward: vec![0.0],
                backward: vec![0.0],
            }),
        }
    }

    fn node(&self, k: i64) -> f64 {
        self.t0 + k as f64 * GRID_STEP
    }

    /// `∫_{t0}^{t} f`.
    pub fn value(&self, f: &dyn Fn(f64) -> Result<f64, EvalError>, t: f64) -> Result<f64, EvalError> {
        if t == self.t0 {
            return Ok(0.0);
        }
        if !t.is_finite() {
            return Err(EvalError::domain(DomainKind::NonFinite, format!("t = {t}")));
        }
        let k = ((t - self.t0) / GRID_STEP).trunc();
        if k.abs() >= MAX_CELLS as f64 {
            return Err(singular(t, "too far from the base point"));
        }
        let k = k as i64;
        let base = self.cumulative(f, k)?;
        Ok(base + integrate(f, self.node(k), t, self.tol * 0.1)?)
    }

    fn cumulative(&self, f: &dyn Fn(f64) -> Result<f64, EvalError>, k: i64) -> Result<f64, EvalError> {
        let idx = k.unsigned_abs() as usize;
        {
            let grid = self.grid.lock().unwrap_or_else(|p| p.into_inner());
            let side = if k >= 0 { &grid.forward } else { &grid.backward };
            if let Some(v) = side.get(idx) {
                return Ok(*v);
            }
        }
        // Extend outside the lock: the integrand may itself consult other
        // caches (nested antiderivatives). Whoever finishes first stores the
        // cells; the values are identical either way.
        let (mut have, mut acc) = {
            let grid = self.grid.lock().unwrap_or_else(|p| p.into_inner());
            let side = if k >= 0 { &grid.forward } else { &grid.backward };
            (side.len() - 1, side[side.len() - 1])
        };
        let sign = if k >= 0 { 1 } else { -1 };
        let mut fresh = Vec::new();
        while have < idx {
            let a = self.node(sign * have as i64);
            let b = self.node(sign * (have as i64 + 1));
            acc += integrate(f, a, b, self.tol * 0.1)?;
            fresh.push(acc);
            have += 1;
        }
        let mut grid = self.grid.lock().unwrap_or_else(|p| p.into_inner());
        let side = if k >= 0 { &mut grid.forward } else { &mut grid.backward };
        let start = idx + 1 - fresh.len();
        for (i, v) in fresh.into_iter().enumerate() {
            if side.len() == start + i {
                side.push(v);
            }
        }
        Ok(side[idx])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok(f: fn(f64) -> f64) -> impl Fn(f64) -> Result<f64, EvalError> {
        move |t| Ok(f(t))
    }

    #[test]
    fn gaussian_integral() {
        let f = ok(|t| (-t * t).exp());
        let v = integrate(&f, 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 0.746_824_132_812_427).abs() < 1e-12);
    }

    #[test]
    fn polynomial_exact_and_reversed_limits() {
        let f = ok(|t| 3.0 * t * t);
        assert!((integrate(&f, 0.0, 2.0, 1e-12).unwrap() - 8.0).abs() < 1e-13);
        assert!((integrate(&f, 2.0, 0.0, 1e-12).unwrap() + 8.0).abs() < 1e-13);
    }

    #[test]
    fn pole_is_reported_with_location() {
        let f = ok(|t| 1.0 / (t - 0.5));
        let err = integrate(&f, 0.0, 1.0, 1e-10).unwrap_err();
        assert!(err.to_string().contains("near t = 0.5"), "{err}");
    }

    #[test]
    fn cache_is_history_independent() {
        let f = ok(|t| t.cos() * (0.3 * t).exp());
        let a = CumulativeCache::new(0.0, 1e-10);
        let b = CumulativeCache::new(0.0, 1e-10);
        let far = a.value(&f, 3.7).unwrap();
        let near = a.value(&f, -1.2).unwrap();
        assert_eq!(b.value(&f, -1.2).unwrap(), near);
        assert_eq!(b.value(&f, 3.7).unwrap(), far);
        let exact = |t: f64| ((0.3 * t).exp() * (0.3 * t.cos() + t.sin()) - 0.3) / 1.09;
        assert!((far - exact(3.7)).abs() < 1e-10);
        assert!((near - exact(-1.2)).abs() < 1e-10);
    }
}
