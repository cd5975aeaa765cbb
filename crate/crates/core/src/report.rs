//! Residual statistics over sampled jets.

use serde::{Deserialize, Serialize};

/// Relative part of the default pass threshold.
pub const REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// The sample with the largest residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Offender {
    /// Sample coordinates: `(t, x, w, w_t, w_x, w_xx, ...)` for jets.
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub n: usize,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub tolerance: f64,
    pub worst: Option<Offender>,
    pub verdict: Verdict,
}

impl VerificationReport {
    /// Summarize `(sample, |residual|)` pairs. Passing requires at least one
    /// sample and `max <= tolerance`; a NaN residual always fails.
    pub fn from_samples(samples: &[(Vec<f64>, f64)], tolerance: f64) -> VerificationReport {
        let n = samples.len();
        let mut max = 0.0f64;
        let mut sum = 0.0;
        let mut worst: Option<&(Vec<f64>, f64)> = None;
        for s in samples {
            let r = s.1.abs();
            sum += r;
            // a NaN sticks as the maximum
            let replaces = worst.is_none() || (r.is_nan() && !max.is_nan()) || r > max;
            if replaces {
                max = r;
                worst = Some(s);
            }
        }
        let pass = n > 0 && max <= tolerance;
        VerificationReport {
            n,
            max_residual: max,
            mean_residual: if n > 0 { sum / n as f64 } else { 0.0 },
            tolerance,
            worst: worst.map(|(p, v)| Offender {
                point: p.clone(),
                value: *v,
            }),
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Combine two reports over disjoint samples; the tolerance is the
    /// smaller of the two.
    pub fn merge(&self, other: &VerificationReport) -> VerificationReport {
        let n = self.n + other.n;
        let tolerance = self.tolerance.min(other.tolerance);
        let max_residual = if self.max_residual.is_nan() || other.max_residual.is_nan() {
            f64::NAN
        } else {
            self.max_residual.max(other.max_residual)
        };
        let worst = match (&self.worst, &other.worst) {
            (Some(a), Some(b)) => Some(if b.value.abs() > a.value.abs() { b.clone() } else { a.clone() }),
            (a, b) => a.clone().or_else(|| b.clone()),
        };
        let mean_residual = if n > 0 {
            (self.mean_residual * self.n as f64 + other.mean_residual * other.n as f64) / n as f64
        } else {
            0.0
        };
        let pass = n > 0 && max_residual <= tolerance;
        VerificationReport {
            n,
            max_residual,
            mean_residual,
            tolerance,
            worst,
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        }
    }
}

/// `REL_TOL * (1 + scale) + 10 * quad_tol`, the default pass threshold for
/// jets whose largest entry has magnitude `scale`.
pub fn jet_tolerance(scale: f64, quad_tol: f64) -> f64 {
    REL_TOL * (1.0 + scale) + 10.0 * quad_tol
}
