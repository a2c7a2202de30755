//! Observables: quenched estimates from tables, gap statistics from sampled
//! paths, exact window densities, local-CLT residuals, and empirical rate
//! values.

use thiserror::Error;

use crate::dp::{ln_moments, FreeTable};
use crate::sampler::RenewalPath;

#[derive(Debug, Error, PartialEq)]
pub enum ObservableError {
    #[error("accumulators carry different tags: {a:?} vs {b:?}")]
    TagMismatch { a: String, b: String },
    #[error("window length {w} outside 1..={n}")]
    BadWindow { w: usize, n: usize },
}

/// Per-environment estimates read off one free table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuenchedEstimate {
    /// `ln Z_n / n`
    pub free_energy_density: f64,
    /// `E[L_n] / n`
    pub contact_density: f64,
    /// `Var[L_n] / n`
    pub variance_density: f64,
    /// Half-width of the nominal 95% concentration band for the free-energy
    /// density (see [`estimate_quenched`]).
    pub error_bar: f64,
}

/// Reads the quenched free-energy density, contact density, and variance
/// density from a built free table.
///
/// The error bar solves `u^2 = c (n + u)` with `c = ln 40`, giving the
/// half-width `u / n` of a band of the bounded-difference form
/// `2 exp(-u^2 / (c n + c u)) = 5%`, normalized to a unit influence constant
/// per charge; rescale externally for other disorder scales.
pub fn estimate_quenched(free: &FreeTable) -> QuenchedEstimate {
    let n = free.n() as f64;
    let c = 40.0f64.ln();
    let u = 0.5 * (c + (c * c + 4.0 * c * n).sqrt());
    QuenchedEstimate {
        free_energy_density: free.log_partition() / n,
        contact_density: free.contact_mean() / n,
        variance_density: free.contact_var() / n,
        error_bar: u / n,
    }
}

/// Streaming collector of gap statistics over sampled paths. Tagged with an
/// arbitrary configuration string so that results from different runs cannot
/// be merged by accident; merging is associative and order-insensitive.
#[derive(Debug, Clone, PartialEq)]
pub struct GapAccumulator {
    tag: String,
    maxima: Vec<u32>,
    second_maxima: Vec<u32>,
}

impl GapAccumulator {
    pub fn new(tag: impl Into<String>) -> Self {
        GapAccumulator { tag: tag.into(), maxima: Vec::new(), second_maxima: Vec::new() }
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn count(&self) -> usize {
        self.maxima.len()
    }

    /// Records the largest and second-largest gap of one path.
    pub fn observe(&mut self, path: &RenewalPath) {
        let (mut first, mut second) = (0u32, 0u32);
        for g in path.gaps() {
            if g >= first {
                second = first;
                first = g;
            } else if g > second {
                second = g;
            }
        }
        self.maxima.push(first);
        self.second_maxima.push(second);
    }

    /// Merges two collectors observed under the same configuration tag.
    pub fn merge(mut self, other: GapAccumulator) -> Result<GapAccumulator, ObservableError> {
        if self.tag != other.tag {
            return Err(ObservableError::TagMismatch { a: self.tag, b: other.tag });
        }
        self.maxima.extend(other.maxima);
        self.second_maxima.extend(other.second_maxima);
        Ok(self)
    }

    pub fn report(&self) -> GapReport {
        GapReport {
            count: self.count(),
            max_gap_median: quantile(&self.maxima, 0.5),
            max_gap_q10: quantile(&self.maxima, 0.1),
            max_gap_q90: quantile(&self.maxima, 0.9),
            second_gap_median: quantile(&self.second_maxima, 0.5),
        }
    }
}

/// Summary quantiles of the collected gap maxima.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub count: usize,
    pub max_gap_median: f64,
    pub max_gap_q10: f64,
    pub max_gap_q90: f64,
    pub second_gap_median: f64,
}

/// Nearest-rank-with-interpolation quantile of an unsorted sample;
/// NaN on an empty sample.
fn quantile(xs: &[u32], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut sorted: Vec<u32> = xs.to_vec();
    sorted.sort_unstable();
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] as f64 * (1.0 - frac) + sorted[hi] as f64 * frac
}

/// Exact maximum contact density over all site windows of length at least
/// `w`: `max { L(I)/|I| : |I| >= w }` with `I` ranging over integer
/// intervals of `1..=n`.
///
/// Splitting any window of length `>= 2w` in half shows the maximum is
/// attained at some length in `[w, 2w)`, so scanning those lengths alone
/// is exact and costs `O(n w)` instead of `O(n^2)`.
pub fn window_density_max(path: &RenewalPath, w: usize) -> Result<f64, ObservableError> {
    let n = path.n() as usize;
    if w == 0 || w > n {
        return Err(ObservableError::BadWindow { w, n });
    }
    let prefix = contact_prefix(path);
    let mut best = 0.0f64;
    let len_hi = (2 * w - 1).min(n);
    for len in w..=len_hi {
        for start in 1..=(n - len + 1) {
            let contacts = (prefix[start + len - 1] - prefix[start - 1]) as f64;
            let density = contacts / len as f64;
            if density > best {
                best = density;
            }
        }
    }
    Ok(best)
}

/// Quadratic-time reference for [`window_density_max`]: scans every window
/// of every admissible length.
pub fn window_density_max_naive(path: &RenewalPath, w: usize) -> Result<f64, ObservableError> {
    let n = path.n() as usize;
    if w == 0 || w > n {
        return Err(ObservableError::BadWindow { w, n });
    }
    let prefix = contact_prefix(path);
    let mut best = 0.0f64;
    for len in w..=n {
        for start in 1..=(n - len + 1) {
            let contacts = (prefix[start + len - 1] - prefix[start - 1]) as f64;
            let density = contacts / len as f64;
            if density > best {
                best = density;
            }
        }
    }
    Ok(best)
}

/// `prefix[a]` = number of contacts in `1..=a`.
fn contact_prefix(path: &RenewalPath) -> Vec<u32> {
    let n = path.n() as usize;
    let mut prefix = vec![0u32; n + 1];
    for &s in path.contact_sites() {
        prefix[s as usize] = 1;
    }
    for a in 1..=n {
        prefix[a] += prefix[a - 1];
    }
    prefix
}

/// Local-CLT residual of a contact-number law given as log probabilities:
/// `sup_l | sqrt(2 pi Var) P[l] - exp(-(l - mean)^2 / (2 Var)) |`.
/// Infinite when the law is degenerate (vanishing variance).
pub fn lclt_residual(ln_dist: &[f64]) -> f64 {
    let (mean, var) = ln_moments(ln_dist);
    if !(var > 1e-12) {
        return f64::INFINITY;
    }
    let norm = (2.0 * std::f64::consts::PI * var).sqrt();
    let mut worst = 0.0f64;
    for (l, &lp) in ln_dist.iter().enumerate() {
        let p = if lp == f64::NEG_INFINITY { 0.0 } else { lp.exp() };
        let d = l as f64 - mean;
        let gauss = (-d * d / (2.0 * var)).exp();
        let resid = (norm * p - gauss).abs();
        if resid > worst {
            worst = resid;
        }
    }
    worst
}

/// Empirical large-deviation rate at contact fraction `r`:
/// `-(1/n) ln P[L_n = floor(r n)]`, or `None` where that probability is
/// exactly zero.
pub fn empirical_rate(ln_dist: &[f64], r: f64) -> Option<f64> {
    assert!((0.0..=1.0).contains(&r), "contact fraction must be in [0, 1]");
    let n = ln_dist.len() - 1;
    let l = (r * n as f64).floor() as usize;
    let lp = ln_dist[l.min(n)];
    if lp == f64::NEG_INFINITY {
        None
    } else {
        Some(-lp / n as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{ChargeSequence, DisorderSpec};
    use crate::dp::{ln_contact_distribution, ConstrainedTable, FreeTable, PolymerParams};
    use crate::law::{InterArrivalLaw, LawSpec};
    use crate::sampler::sample_free;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quenched_estimate_reads_table_and_bar_solves_its_equation() {
        let law = InterArrivalLaw::build(LawSpec::polynomial(2.0)).unwrap();
        let n = 90;
        let charges = ChargeSequence::generate(DisorderSpec::gaussian(1.0, 3), n).unwrap();
        let free = FreeTable::build(PolymerParams { n, h: 0.7 }, &charges, &law).unwrap();
        let est = estimate_quenched(&free);
        assert_relative_eq!(est.free_energy_density, free.log_partition() / n as f64);
        assert_relative_eq!(est.contact_density, free.contact_mean() / n as f64);
        assert_relative_eq!(est.variance_density, free.contact_var() / n as f64);
        // u = n * error_bar satisfies u^2 = c (n + u) with c = ln 40
        let u = est.error_bar * n as f64;
        let c = 40.0f64.ln();
        assert_relative_eq!(u * u, c * (n as f64 + u), max_relative = 1e-12);
        assert!(est.contact_density > 0.0 && est.contact_density <= 1.0);
    }

    #[test]
    fn gap_accumulator_quantiles_and_merge() {
        let paths: Vec<RenewalPath> = vec![
            RenewalPath::new(vec![0, 1, 2, 10]),   // gaps 1,1,8 -> max 8, second 1
            RenewalPath::new(vec![0, 5, 10]),      // gaps 5,5 -> max 5, second 5
            RenewalPath::new(vec![0, 10]),         // gap 10 -> max 10, second 0
            RenewalPath::new(vec![0, 3, 6, 8, 10]) // gaps 3,3,2,2 -> max 3, second 3
        ];
        let mut a = GapAccumulator::new("cfg");
        let mut b = GapAccumulator::new("cfg");
        a.observe(&paths[0]);
        a.observe(&paths[1]);
        b.observe(&paths[2]);
        b.observe(&paths[3]);
        // merge in either order gives identical reports
        let ab = a.clone().merge(b.clone()).unwrap().report();
        let ba = b.clone().merge(a.clone()).unwrap().report();
        assert_eq!(ab, ba);
        assert_eq!(ab.count, 4);
        // maxima {8,5,10,3}: median interpolates 5..8, q10 of sorted {3,5,8,10}
        assert_relative_eq!(ab.max_gap_median, 6.5);
        assert_relative_eq!(ab.max_gap_q10, 3.6);
        assert_relative_eq!(ab.max_gap_q90, 9.4);
        // seconds {1,5,0,3}: median 2.0
        assert_relative_eq!(ab.second_gap_median, 2.0);
        let c = GapAccumulator::new("other");
        assert!(matches!(
            a.merge(c),
            Err(ObservableError::TagMismatch { .. })
        ));
    }

    #[test]
    fn window_density_hand_case() {
        // contacts {1, 2, 10}: the window [1,2] has density 1
        let p = RenewalPath::new(vec![0, 1, 2, 10]);
        assert_relative_eq!(window_density_max(&p, 2).unwrap(), 1.0);
        // w = 4: best is [1,4] or [7,10]: 2/4
        assert_relative_eq!(window_density_max(&p, 4).unwrap(), 0.5);
        // w = n: whole interval only: 3/10
        assert_relative_eq!(window_density_max(&p, 10).unwrap(), 0.3);
        assert!(window_density_max(&p, 0).is_err());
        assert!(window_density_max(&p, 11).is_err());
    }

    #[test]
    fn window_density_halving_scan_equals_naive() {
        let law = InterArrivalLaw::build(LawSpec::polynomial(2.0)).unwrap();
        let n = 60;
        let charges = ChargeSequence::generate(DisorderSpec::gaussian(1.0, 17), n).unwrap();
        let free = FreeTable::build(PolymerParams { n, h: 0.2 }, &charges, &law).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..25 {
            let path = sample_free(&free, &charges, &law, &mut rng).unwrap();
            for w in [1usize, 3, 7, 16, 59, 60] {
                let fast = window_density_max(&path, w).unwrap();
                let slow = window_density_max_naive(&path, w).unwrap();
                assert_relative_eq!(fast, slow, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn lclt_residual_matches_direct_computation() {
        let law = InterArrivalLaw::build(LawSpec::truncated(1.0, 2)).unwrap();
        let n = 40;
        let charges = ChargeSequence::generate(DisorderSpec::zero(), n).unwrap();
        let cons = ConstrainedTable::build(n, &charges, &law, n).unwrap();
        let dist = ln_contact_distribution(&cons, 0.3).unwrap();
        let resid = lclt_residual(&dist);
        assert!(resid.is_finite() && resid >= 0.0);
        // recompute the sup by hand
        let (mean, var) = ln_moments(&dist);
        let norm = (2.0 * std::f64::consts::PI * var).sqrt();
        let want = dist
            .iter()
            .enumerate()
            .map(|(l, &lp)| {
                let p = if lp == f64::NEG_INFINITY { 0.0 } else { lp.exp() };
                let d = l as f64 - mean;
                (norm * p - (-d * d / (2.0 * var)).exp()).abs()
            })
            .fold(0.0f64, f64::max);
        assert_relative_eq!(resid, want, epsilon = 1e-15);
        // a point mass has no meaningful residual
        let degenerate = vec![f64::NEG_INFINITY, 0.0];
        assert_eq!(lclt_residual(&degenerate), f64::INFINITY);
    }

    #[test]
    fn empirical_rate_indexing_and_gaps_in_support() {
        let law = InterArrivalLaw::build(LawSpec::truncated(1.0, 2)).unwrap();
        let n = 30;
        let charges = ChargeSequence::generate(DisorderSpec::zero(), n).unwrap();
        let cons = ConstrainedTable::build(n, &charges, &law, n).unwrap();
        let dist = ln_contact_distribution(&cons, 0.0).unwrap();
        // two-point gaps cannot reach density below 1/2
        assert_eq!(empirical_rate(&dist, 0.3), None);
        // r = 1 hits l = n exactly
        let at_one = empirical_rate(&dist, 1.0).unwrap();
        assert_relative_eq!(at_one, -dist[n] / n as f64, epsilon = 1e-15);
        // a supported fraction gives the stated formula
        let r = 0.8;
        let l = (r * n as f64).floor() as usize;
        assert_relative_eq!(
            empirical_rate(&dist, r).unwrap(),
            -dist[l] / n as f64,
            epsilon = 1e-15
        );
    }
}
