//! Inter-arrival (gap) laws `p(t) = ell(t) / (C t^(1+alpha))`, `t = 1, 2, ...`,
//! with `ell` slowly varying and support either bounded (`t <= t_max`) or the
//! whole of the positive integers.
//!
//! Everything a law exposes is exact up to f64 rounding: the normalization over
//! infinite support is a head sum plus an Euler-Maclaurin tail (see
//! [`crate::numerics::powerlog_sum`]), the mean and Laplace moments come from
//! the same machinery, and tail masses carry a certified-accuracy story rather
//! than a truncate-and-hope one.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{self, adaptive_simpson, powerlog_converges};

/// Slowly varying prefactor `ell(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlowlyVarying {
    /// `ell(t) = c`
    Constant { c: f64 },
    /// `ell(t) = c (1 + ln t)^beta`
    LogPower { c: f64, beta: f64 },
}

impl SlowlyVarying {
    pub fn c(&self) -> f64 {
        match *self {
            SlowlyVarying::Constant { c } | SlowlyVarying::LogPower { c, .. } => c,
        }
    }

    pub fn beta(&self) -> f64 {
        match *self {
            SlowlyVarying::Constant { .. } => 0.0,
            SlowlyVarying::LogPower { beta, .. } => beta,
        }
    }

    /// `ln ell(t)` for real `t >= 1`.
    pub fn ln_ell(&self, t: f64) -> f64 {
        match *self {
            SlowlyVarying::Constant { c } => c.ln(),
            SlowlyVarying::LogPower { c, beta } => c.ln() + beta * (1.0 + t.ln()).ln(),
        }
    }
}

/// Declarative description of a gap law; the validated, normalized object is
/// [`InterArrivalLaw`]. Round-trips losslessly through serde.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawSpec {
    /// Tail exponent: `p(t) ~ ell(t) / t^(1+alpha)`. Must be >= 1.
    pub alpha: f64,
    pub ell: SlowlyVarying,
    /// `Some(t_max)` truncates the support to `1..=t_max`; `None` keeps the
    /// full heavy tail.
    #[serde(default)]
    pub t_max: Option<u64>,
}

impl LawSpec {
    /// Unbounded law with constant prefactor: `p(t) = 1 / (C t^(1+alpha))`.
    pub fn polynomial(alpha: f64) -> Self {
        LawSpec { alpha, ell: SlowlyVarying::Constant { c: 1.0 }, t_max: None }
    }

    /// Bounded law with constant prefactor on `1..=t_max`.
    pub fn truncated(alpha: f64, t_max: u64) -> Self {
        LawSpec { alpha, ell: SlowlyVarying::Constant { c: 1.0 }, t_max: Some(t_max) }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LawError {
    #[error("alpha = {0} outside the supported range [1, 32]")]
    AlphaOutOfRange(f64),
    #[error("slowly varying prefactor must have c > 0 (got {0})")]
    NonPositivePrefactor(f64),
    #[error("|beta| = {0} too large (supported range [-8, 8])")]
    BetaOutOfRange(f64),
    #[error("bounded support needs 1 <= t_max <= 10^7 (got {0})")]
    BadTruncation(u64),
    #[error("law parameter is not finite")]
    NonFinite,
    #[error("Laplace argument phi must be >= 0 and finite (got {0})")]
    InvalidPhi(f64),
    #[error("moment of order {order} diverges at phi = 0 for this law")]
    DivergentMoment { order: u8 },
}

/// A mean that may be infinite (alpha = 1 with too weak a log correction).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mean {
    Finite(f64),
    Infinite,
}

impl Mean {
    pub fn finite(self) -> Option<f64> {
        match self {
            Mean::Finite(v) => Some(v),
            Mean::Infinite => None,
        }
    }
}

/// Validated, normalized gap law. Immutable once built.
#[derive(Debug, Clone)]
pub struct InterArrivalLaw {
    spec: LawSpec,
    /// `ln C` with `C = sum_t ell(t) t^(-1-alpha)` over the support.
    log_norm: f64,
    /// `t_max` for bounded laws; for unbounded laws, the certified point past
    /// which the relative tail mass is below [`TAIL_CERT`]. Diagnostic only:
    /// `log_p` never truncates an unbounded law.
    cutoff: u64,
    mean: Mean,
}

/// Relative tail mass defining the certified effective support of an
/// unbounded law.
pub const TAIL_CERT: f64 = 1e-14;

/// Switch point between direct Laplace summation and the head-plus-integral
/// route (the direct route needs ~55/phi terms).
const MAX_DIRECT_TERMS: f64 = 2e6;

impl InterArrivalLaw {
    pub fn build(spec: LawSpec) -> Result<Self, LawError> {
        let alpha = spec.alpha;
        let c = spec.ell.c();
        let beta = spec.ell.beta();
        if !alpha.is_finite() || !c.is_finite() || !beta.is_finite() {
            return Err(LawError::NonFinite);
        }
        if !(1.0..=32.0).contains(&alpha) {
            return Err(LawError::AlphaOutOfRange(alpha));
        }
        if c <= 0.0 {
            return Err(LawError::NonPositivePrefactor(c));
        }
        if beta.abs() > 8.0 {
            return Err(LawError::BetaOutOfRange(beta));
        }
        let s = alpha + 1.0;
        let (log_norm, cutoff, mean) = match spec.t_max {
            Some(t_max) => {
                if t_max == 0 || t_max > 10_000_000 {
                    return Err(LawError::BadTruncation(t_max));
                }
                let mut norm = numerics::Kahan::default();
                let mut first = numerics::Kahan::default();
                for t in 1..=t_max {
                    let w = (spec.ell.ln_ell(t as f64) - s * (t as f64).ln()).exp();
                    norm.add(w);
                    first.add(t as f64 * w);
                }
                let norm = norm.total();
                (norm.ln(), t_max, Mean::Finite(first.total() / norm))
            }
            None => {
                // s = alpha + 1 >= 2, so the normalizing series always converges
                let series = numerics::powerlog_sum(s, beta).expect("s >= 2 converges");
                let norm = c * series;
                let mean = if powerlog_converges(alpha, beta) {
                    Mean::Finite(
                        numerics::powerlog_sum(alpha, beta).expect("checked") / series,
                    )
                } else {
                    Mean::Infinite
                };
                let mut t = 64u64;
                while c * numerics::powerlog_tail(s, beta, t as f64) / norm > TAIL_CERT {
                    t = t.saturating_mul(2);
                    if t >= 1 << 62 {
                        break;
                    }
                }
                (norm.ln(), t, mean)
            }
        };
        Ok(InterArrivalLaw { spec, log_norm, cutoff, mean })
    }

    pub fn spec(&self) -> &LawSpec {
        &self.spec
    }

    pub fn alpha(&self) -> f64 {
        self.spec.alpha
    }

    /// Largest gap the dynamic programs need to scan for horizon `n`:
    /// `min(n, t_max)` for bounded laws, `n` otherwise.
    pub fn scan_limit(&self, n: usize) -> usize {
        match self.spec.t_max {
            Some(t_max) => n.min(t_max.try_into().unwrap_or(usize::MAX)),
            None => n,
        }
    }

    /// `t_max`, or the certified effective support of an unbounded law
    /// (relative tail mass below [`TAIL_CERT`] past this point).
    pub fn cutoff(&self) -> u64 {
        self.cutoff
    }

    /// `ln p(t)`. Exact formula at every `t >= 1`; `-inf` at `t = 0` and
    /// beyond a bounded support.
    pub fn log_p(&self, t: u64) -> f64 {
        if t == 0 {
            return f64::NEG_INFINITY;
        }
        if let Some(t_max) = self.spec.t_max {
            if t > t_max {
                return f64::NEG_INFINITY;
            }
        }
        let tf = t as f64;
        self.spec.ell.ln_ell(tf) - (self.spec.alpha + 1.0) * tf.ln() - self.log_norm
    }

    /// `ln p(t)` for `t = 0..=t_hi` as a dense vector (`[0] = -inf`).
    pub fn log_p_dense(&self, t_hi: usize) -> Vec<f64> {
        (0..=t_hi as u64).map(|t| self.log_p(t)).collect()
    }

    /// `E[T]`, possibly infinite.
    pub fn mean(&self) -> Mean {
        self.mean
    }

    /// `P[T > t]`, accurate to ~1e-15 relative (exact partial sums for bounded
    /// laws, Euler-Maclaurin for unbounded ones).
    pub fn tail_mass(&self, t: u64) -> f64 {
        match self.spec.t_max {
            Some(t_max) => {
                if t >= t_max {
                    return 0.0;
                }
                let mut acc = 0.0;
                for u in (t + 1)..=t_max {
                    acc += self.log_p(u).exp();
                }
                acc
            }
            None => {
                let beta = self.spec.ell.beta();
                let s = self.spec.alpha + 1.0;
                let anchor = 64.max(t);
                let mut acc = self.spec.ell.c()
                    * numerics::powerlog_tail(s, beta, anchor as f64)
                    / self.log_norm.exp();
                for u in (t + 1)..=anchor {
                    acc += self.log_p(u).exp();
                }
                acc
            }
        }
    }

    /// Laplace moments `m_k(phi) = sum_t t^k e^(-phi t) p(t)` for `k = 0, 1, 2`.
    ///
    /// At `phi = 0` a divergent moment is reported as an error rather than a
    /// number; for `phi > 0` all three are finite for every admissible law.
    pub fn laplace_moments(&self, phi: f64) -> Result<(f64, f64, f64), LawError> {
        if !phi.is_finite() || phi < 0.0 || (phi > 0.0 && phi < 1e-250) {
            return Err(LawError::InvalidPhi(phi));
        }
        let alpha = self.spec.alpha;
        let beta = self.spec.ell.beta();
        if phi == 0.0 {
            return match self.spec.t_max {
                Some(t_max) => Ok(self.laplace_head(0.0, t_max)),
                None => {
                    let m1 = match self.mean {
                        Mean::Finite(m) => m,
                        Mean::Infinite => return Err(LawError::DivergentMoment { order: 1 }),
                    };
                    if !powerlog_converges(alpha - 1.0, beta) {
                        return Err(LawError::DivergentMoment { order: 2 });
                    }
                    let series = (self.log_norm - self.spec.ell.c().ln()).exp();
                    let m2 = numerics::powerlog_sum(alpha - 1.0, beta).expect("checked") / series;
                    Ok((1.0, m1, m2))
                }
            };
        }
        // t beyond which even the t^2-weighted summand is < e^-50 of its peak
        let t_need = (55.0 + 2.0 * (1.0 + 2.0 / phi).ln()) / phi;
        match self.spec.t_max {
            Some(t_max) => Ok(self.laplace_head(phi, t_max.min(t_need.ceil() as u64))),
            None => {
                if t_need <= MAX_DIRECT_TERMS {
                    Ok(self.laplace_head(phi, t_need.ceil() as u64))
                } else {
                    let s = alpha + 1.0;
                    let n0 = 100_000u64;
                    let (mut m0, mut m1, mut m2) = self.laplace_head(phi, n0);
                    m0 += self.damped_tail(phi, s, n0 as f64);
                    m1 += self.damped_tail(phi, s - 1.0, n0 as f64);
                    m2 += self.damped_tail(phi, s - 2.0, n0 as f64);
                    Ok((m0, m1, m2))
                }
            }
        }
    }

    /// Direct `sum_{t<=t_hi}` of all three damped moments (normalized).
    fn laplace_head(&self, phi: f64, t_hi: u64) -> (f64, f64, f64) {
        let mut m = [numerics::Kahan::default(); 3];
        for t in 1..=t_hi {
            let tf = t as f64;
            let w = (self.log_p(t) - phi * tf).exp();
            m[0].add(w);
            m[1].add(tf * w);
            m[2].add(tf * tf * w);
        }
        (m[0].total(), m[1].total(), m[2].total())
    }

    /// `sum_{t > n0} t^k e^(-phi t) p(t)` written as
    /// `(c/C) sum_{t > n0} t^(-s_eff) (1+ln t)^beta e^(-phi t)` with
    /// `s_eff = 1 + alpha - k`, by Euler-Maclaurin: the tail integral
    /// (adaptive quadrature in u = ln t, which stays overflow-safe for every
    /// admissible exponent) minus `f(n0)/2 + f'(n0)/12`.
    fn damped_tail(&self, phi: f64, s_eff: f64, n0: f64) -> f64 {
        let beta = self.spec.ell.beta();
        let g = |u: f64| {
            let t = u.exp();
            ((1.0 - s_eff) * u - phi * t).exp() * (1.0 + u).powf(beta)
        };
        // past t_hi even the heaviest summand is < e^-55 of its peak
        let t_hi = (60.0 + 2.0 * (1.0 + 2.0 / phi).ln()) / phi;
        let (a, b) = (n0.ln(), t_hi.ln());
        // probe the magnitude first: the tail integral ranges over hundreds
        // of orders across admissible (phi, s_eff), and an absolute tolerance
        // far below the integral's own rounding floor would make the
        // subdivision grind through millions of nodes
        let mut peak = 0.0f64;
        for i in 0..=32 {
            let u = a + (b - a) * i as f64 / 32.0;
            peak = peak.max(g(u).abs());
        }
        let scale = (peak * (b - a)).max(1e-300);
        let coarse = adaptive_simpson(&g, a, b, 1e-9 * scale);
        let tol = (1e-13 * coarse.abs()).max(1e-14 * scale).max(1e-300);
        let integral = adaptive_simpson(&g, a, b, tol);
        let u0 = 1.0 + n0.ln();
        let f0 = (-s_eff * n0.ln() - phi * n0).exp() * u0.powf(beta);
        let fp0 = f0 * (beta / (n0 * u0) - s_eff / n0 - phi);
        (self.spec.ell.c() / self.log_norm.exp()) * (integral - 0.5 * f0 - fp0 / 12.0)
    }
}
