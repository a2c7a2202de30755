//! The disorder-free (pure) model in closed form.
//!
//! With no charges, every thermodynamic quantity of the pinning model reduces
//! to Laplace-transform algebra on the gap law. Writing
//! `m_k(phi) = sum_t t^k p(t) e^(-phi t)`:
//!
//! * the free energy `f(h)` is the unique root of `ln m_0(f) + h = 0` for
//!   `h > 0`, and `0` for `h <= 0`;
//! * the contact density is `rho(h) = m_0(f) / m_1(f)` (the inverse mean of
//!   the tilted gap law), with critical density `rho_c = 1 / E[T]`
//!   (`0` when the mean diverges);
//! * the large-deviation rate of `L_n / n` is the Legendre transform of
//!   `s -> f(h + s)`, which works out to an affine piece on `[0, rho_c]`
//!   (partial condensation: the missing length is carried by one big jump)
//!   glued to a strictly convex piece on `(rho_c, 1]`;
//! * the fluctuation coefficient `v(h) = Var~[T] / E~[T]^3` gives
//!   `Var[L_n] ~ n v(h)` under the tilted renewal.
//!
//! The conditional geometry dichotomy lives here too: conditioned on a
//! contact fraction `r`, the largest gap is macroscopic (`~ (1 - r/rho_c) n`)
//! for `r < rho_c` and logarithmic (`~ ln n / f(iota(r))`) for `r > rho_c`,
//! where `iota` inverts `rho`.

use thiserror::Error;

use crate::dp::{convolve_blocked, BlockSummary};
use crate::law::{InterArrivalLaw, LawError, Mean};
use crate::numerics::bisect;

#[derive(Debug, Error, PartialEq)]
pub enum PureError {
    #[error("contact fraction {0} outside [0, 1]")]
    DensityOutOfRange(f64),
    #[error("pinning strength must be finite (got {0})")]
    BadPinning(f64),
    #[error(transparent)]
    Law(#[from] LawError),
}

/// Largest pinning strength the density inverse will search up to; covers
/// every density representable away from 1 by more than ~1e-200.
const IOTA_H_CAP: f64 = 512.0;

/// Closed-form curves of the pure model for one gap law.
#[derive(Debug, Clone)]
pub struct PureCurves {
    law: InterArrivalLaw,
}

/// Limit shape of the largest gap conditioned on contact fraction `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GapPrediction {
    /// `r < rho_c`: one macroscopic gap of `fraction * n` sites swallows the
    /// length the renewal does not need.
    BigJump { fraction: f64 },
    /// `r > rho_c`: all gaps are short; the largest is `~ ln(n) / rate`.
    LogGap { rate: f64 },
    /// `r` within 1e-12 of `rho_c`: the crossover itself, no clean law.
    Boundary,
}

impl GapPrediction {
    /// Size the prediction to a concrete polymer length.
    pub fn typical_size(&self, n: usize) -> Option<f64> {
        match self {
            GapPrediction::BigJump { fraction } => Some(fraction * n as f64),
            GapPrediction::LogGap { rate } => Some((n as f64).ln() / rate),
            GapPrediction::Boundary => None,
        }
    }
}

impl PureCurves {
    pub fn new(law: &InterArrivalLaw) -> Self {
        PureCurves { law: law.clone() }
    }

    pub fn law(&self) -> &InterArrivalLaw {
        &self.law
    }

    /// Free energy `f(h)`: positive root of `ln m_0(f) + h = 0` for `h > 0`,
    /// zero at and below the critical point `h = 0`.
    pub fn free_energy(&self, h: f64) -> Result<f64, PureError> {
        if !h.is_finite() {
            return Err(PureError::BadPinning(h));
        }
        if h <= 1e-240 {
            // 0 <= f(h) <= h: indistinguishable from zero long before the
            // Laplace evaluations lose meaning
            return Ok(0.0);
        }
        // m_0(phi) <= e^-phi gives g(h) <= 0; g(0) = h > 0; g decreasing.
        // Below ~1e-249 the transform is 1 to every representable digit, so
        // treat ln m_0 as 0 there instead of asking for an impossible phi.
        let g = |phi: f64| {
            if phi < 1e-249 {
                return h;
            }
            let (m0, _, _) = self.law.laplace_moments(phi).expect("phi in [0, h] is valid");
            m0.ln() + h
        };
        Ok(bisect(g, 0.0, h))
    }

    /// Critical contact density `1 / E[T]` (`0` for infinite-mean laws).
    pub fn rho_c(&self) -> f64 {
        match self.law.mean() {
            Mean::Finite(m) => 1.0 / m,
            Mean::Infinite => 0.0,
        }
    }

    /// Contact density `rho(h) = m_0(f) / m_1(f)`; `0` for `h < 0` and
    /// `rho_c` at `h = 0` (the right limit).
    pub fn rho(&self, h: f64) -> Result<f64, PureError> {
        if !h.is_finite() {
            return Err(PureError::BadPinning(h));
        }
        if h < 0.0 {
            return Ok(0.0);
        }
        if h == 0.0 {
            return Ok(self.rho_c());
        }
        let f = self.free_energy(h)?;
        let (m0, m1, _) = self.law.laplace_moments(f)?;
        Ok(m0 / m1)
    }

    /// Inverse of `rho`: the pinning strength at which the typical contact
    /// fraction is `r`. Zero on `[0, rho_c]`, `+inf` at `r = 1`; capped at
    /// [`IOTA_H_CAP`] for fractions within ~1e-200 of 1.
    pub fn iota(&self, r: f64) -> Result<f64, PureError> {
        if !(0.0..=1.0).contains(&r) {
            return Err(PureError::DensityOutOfRange(r));
        }
        if r <= self.rho_c() {
            return Ok(0.0);
        }
        if r == 1.0 {
            return Ok(f64::INFINITY);
        }
        let g = |h: f64| self.rho(h).expect("positive h is valid") - r;
        let mut hi = 1.0f64;
        while g(hi) < 0.0 {
            hi *= 2.0;
            if hi >= IOTA_H_CAP {
                return Ok(IOTA_H_CAP);
            }
        }
        // walk the lower bracket down until the density drops below r;
        // rho -> rho_c < r as h -> 0+, so this terminates at a safe h
        let mut lo = hi / 16.0;
        while g(lo) >= 0.0 {
            lo /= 16.0;
            if lo < 1e-200 {
                return Ok(0.0);
            }
        }
        Ok(bisect(g, lo, hi))
    }

    /// Large-deviation rate `I_h(r)` of the contact fraction under the free
    /// model: affine `f(h) - r h` on `[0, rho_c]`, the Legendre branch
    /// `r (iota(r) - h) - f(iota(r)) + f(h)` on `(rho_c, 1)`, and the exact
    /// all-contacts cost `f(h) - h - ln p(1)` at `r = 1`.
    pub fn rate(&self, h: f64, r: f64) -> Result<f64, PureError> {
        if !(0.0..=1.0).contains(&r) {
            return Err(PureError::DensityOutOfRange(r));
        }
        let f_h = self.free_energy(h)?;
        if r <= self.rho_c() {
            return Ok((f_h - r * h).max(0.0));
        }
        if r == 1.0 {
            return Ok((f_h - h - self.law.log_p(1)).max(0.0));
        }
        let iota = self.iota(r)?;
        let f_i = self.free_energy(iota)?;
        Ok((r * (iota - h) - f_i + f_h).max(0.0))
    }

    /// Fluctuation coefficient `v(h) = Var~[T] / E~[T]^3` of the contact
    /// number: `Var[L_n] ~ n v(h)`. Needs two tilted moments, so it exists
    /// for all `h > 0`, and at `h = 0` only when the gap law has finite
    /// variance.
    pub fn variance_coeff(&self, h: f64) -> Result<f64, PureError> {
        let f = self.free_energy(h)?;
        let (m0, m1, m2) = self.law.laplace_moments(f)?;
        let et = m1 / m0;
        let et2 = m2 / m0;
        Ok((et2 - et * et) / (et * et * et))
    }

    /// Limit of the largest gap conditioned on `L_n = r n`. The conditional
    /// law does not depend on `h`, so neither does the prediction.
    pub fn predict_max_gap(&self, r: f64) -> Result<GapPrediction, PureError> {
        if !(0.0..=1.0).contains(&r) || r == 0.0 {
            return Err(PureError::DensityOutOfRange(r));
        }
        let rho_c = self.rho_c();
        if (r - rho_c).abs() <= 1e-12 {
            return Ok(GapPrediction::Boundary);
        }
        if r < rho_c {
            return Ok(GapPrediction::BigJump { fraction: 1.0 - r / rho_c });
        }
        let rate = self.free_energy(self.iota(r)?)?;
        Ok(GapPrediction::LogGap { rate })
    }
}

/// `ln P[T_1 + ... + T_l = t]` for `t = 0..=t_hi`: the `l`-fold convolution
/// of the gap law, computed with the same blocked log-domain kernel as the
/// partition-function tables.
pub fn ln_gap_sum_law(law: &InterArrivalLaw, l: usize, t_hi: usize) -> Vec<f64> {
    let lp = law.log_p_dense(law.scan_limit(t_hi));
    let pb = BlockSummary::of(&lp[1..]);
    // S_0 is the point mass at 0
    let mut cur = vec![f64::NEG_INFINITY; t_hi + 1];
    cur[0] = 0.0;
    let mut next = vec![f64::NEG_INFINITY; t_hi + 1];
    for _ in 0..l {
        convolve_blocked(&pb, &lp, &cur[..], &mut next[1..]);
        next[0] = f64::NEG_INFINITY;
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}
