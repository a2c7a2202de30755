//! Exact path sampling by backward decomposition of the partition-function
//! tables. No Metropolis chains, no burn-in: every draw is an independent
//! exact sample.
//!
//! Free model: from the identity
//! `Z_m = e^(h + omega_m) sum_t p(t) Z_{m-t}`, the last gap of an `m`-polymer
//! has law `P[T = t] = p(t) Z_{m-t} e^(h + omega_m) / Z_m`; sampling gaps
//! backward from `n` until reaching 0 draws a path with its exact Gibbs
//! probability. Conditioned on the contact number, the same walk runs on the
//! `(m, l)`-indexed constrained table. Soft conditioning and general
//! contact-number functionals first draw `l` from the exact reweighted
//! contact law, then run the conditioned walk.

use rand::Rng;
use thiserror::Error;

use crate::disorder::ChargeSequence;
use crate::dp::{ConstrainedTable, FreeTable};
use crate::law::InterArrivalLaw;
use crate::numerics::log_sum_exp;

#[derive(Debug, Error, PartialEq)]
pub enum SampleError {
    #[error("contact number {l} outside 1..={max}")]
    ContactCountOutOfRange { l: usize, max: usize },
    #[error("no path of {n} steps with exactly {l} contacts has positive weight")]
    ImpossibleContactCount { n: usize, l: usize },
    #[error("conditioning window is empty or carries no weight")]
    EmptyWindow,
    #[error("contact functional returned NaN at l = {l}")]
    BadFunctional { l: usize },
    #[error("need {need} charges but the sequence has {got}")]
    ChargesTooShort { need: usize, got: usize },
}

/// A renewal trajectory `0 = S_0 < S_1 < ... < S_L = n`, stored as the full
/// site list including both endpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenewalPath {
    sites: Vec<u32>,
}

impl RenewalPath {
    /// Builds from the full site list; validates shape.
    pub fn new(sites: Vec<u32>) -> Self {
        assert!(sites.first() == Some(&0), "path must start at 0");
        assert!(sites.windows(2).all(|w| w[0] < w[1]), "sites must increase");
        RenewalPath { sites }
    }

    /// All sites including 0 and `n`.
    pub fn sites(&self) -> &[u32] {
        &self.sites
    }

    /// Sites excluding 0 (the contacts counted by `L_n`).
    pub fn contact_sites(&self) -> &[u32] {
        &self.sites[1..]
    }

    /// `L_n`: number of contacts in `1..=n`.
    pub fn contacts(&self) -> usize {
        self.sites.len() - 1
    }

    /// Endpoint `n`.
    pub fn n(&self) -> u32 {
        *self.sites.last().unwrap()
    }

    /// Consecutive gaps `S_i - S_{i-1}`.
    pub fn gaps(&self) -> impl Iterator<Item = u32> + '_ {
        self.sites.windows(2).map(|w| w[1] - w[0])
    }

    /// Largest gap `M_n`.
    pub fn max_gap(&self) -> u32 {
        self.gaps().max().unwrap_or(0)
    }
}

fn check_charges(n: usize, charges: &ChargeSequence) -> Result<(), SampleError> {
    if charges.len() < n {
        return Err(SampleError::ChargesTooShort { need: n, got: charges.len() });
    }
    Ok(())
}

/// One exact draw from the free model `P_{n,h,omega}`.
pub fn sample_free(
    free: &FreeTable,
    charges: &ChargeSequence,
    law: &InterArrivalLaw,
    rng: &mut impl Rng,
) -> Result<RenewalPath, SampleError> {
    let n = free.n();
    let h = free.params().h;
    check_charges(n, charges)?;
    let mut sites = vec![n as u32];
    let mut m = n;
    while m > 0 {
        // ln of the t-term normalizer: Z_m = e^(h+omega_m) * sum_t p(t) Z_{m-t}
        let ln_norm = free.log_z(m) - h - charges.charge(m);
        let u: f64 = rng.gen();
        let mut cum = 0.0f64;
        let mut chosen = 0usize;
        let mut last_valid = 0usize;
        let t_hi = m.min(law.scan_limit(n));
        for t in 1..=t_hi {
            let lw = law.log_p(t as u64) + free.log_z(m - t) - ln_norm;
            if lw == f64::NEG_INFINITY {
                continue;
            }
            last_valid = t;
            cum += lw.exp();
            if u <= cum {
                chosen = t;
                break;
            }
        }
        if chosen == 0 {
            // u fell in the rounding sliver past the accumulated mass
            chosen = last_valid;
        }
        debug_assert!(chosen >= 1);
        m -= chosen;
        sites.push(m as u32);
    }
    sites.reverse();
    Ok(RenewalPath::new(sites))
}

/// One exact draw from the model conditioned on `L_n = l` (pinning strength
/// drops out of the conditional law).
pub fn sample_conditioned(
    cons: &ConstrainedTable,
    charges: &ChargeSequence,
    law: &InterArrivalLaw,
    l: usize,
    rng: &mut impl Rng,
) -> Result<RenewalPath, SampleError> {
    let n = cons.n();
    check_charges(n, charges)?;
    if l < 1 || l > cons.l_max() {
        return Err(SampleError::ContactCountOutOfRange { l, max: cons.l_max() });
    }
    if cons.log_z(n, l) == f64::NEG_INFINITY {
        return Err(SampleError::ImpossibleContactCount { n, l });
    }
    let mut sites = vec![n as u32];
    let mut m = n;
    let mut rem = l;
    while rem > 0 {
        if rem == 1 {
            // exactly one contact left: it must close the remaining stretch
            sites.push(0);
            break;
        }
        let ln_norm = cons.log_z(m, rem) - charges.charge(m);
        let u: f64 = rng.gen();
        let mut cum = 0.0f64;
        let mut chosen = 0usize;
        let mut last_valid = 0usize;
        // t <= m - (rem - 1): must leave room for the remaining contacts
        let t_hi = (m - (rem - 1)).min(law.scan_limit(n));
        for t in 1..=t_hi {
            let lw = law.log_p(t as u64) + cons.log_z(m - t, rem - 1) - ln_norm;
            if lw == f64::NEG_INFINITY {
                continue;
            }
            last_valid = t;
            cum += lw.exp();
            if u <= cum {
                chosen = t;
                break;
            }
        }
        if chosen == 0 {
            chosen = last_valid;
        }
        debug_assert!(chosen >= 1);
        m -= chosen;
        rem -= 1;
        sites.push(m as u32);
    }
    sites.reverse();
    Ok(RenewalPath::new(sites))
}

/// Draws a contact number from log weights over an inclusive `l` range, then
/// a path conditioned on it. Returns the pair `(l, path)`.
fn sample_via_contact_weights(
    cons: &ConstrainedTable,
    charges: &ChargeSequence,
    law: &InterArrivalLaw,
    l_lo: usize,
    l_hi: usize,
    extra: impl Fn(usize) -> f64,
    rng: &mut impl Rng,
) -> Result<(usize, RenewalPath), SampleError> {
    let n = cons.n();
    check_charges(n, charges)?;
    let lo = l_lo.max(1);
    let hi = l_hi.min(cons.l_max()).min(n);
    if lo > hi {
        return Err(SampleError::EmptyWindow);
    }
    let mut weights = Vec::with_capacity(hi - lo + 1);
    for l in lo..=hi {
        let e = extra(l);
        if e.is_nan() {
            return Err(SampleError::BadFunctional { l });
        }
        weights.push(e + cons.log_z(n, l));
    }
    let norm = log_sum_exp(&weights);
    if norm == f64::NEG_INFINITY {
        return Err(SampleError::EmptyWindow);
    }
    let u: f64 = rng.gen();
    let mut cum = 0.0f64;
    let mut pick = hi;
    for (i, &w) in weights.iter().enumerate() {
        cum += (w - norm).exp();
        if u <= cum {
            pick = lo + i;
            break;
        }
    }
    let path = sample_conditioned(cons, charges, law, pick, rng)?;
    Ok((pick, path))
}

/// Soft conditioning: contact number drawn from the free-model law restricted
/// to `l_lo..=l_hi`, then an exact conditioned path. The full window
/// `1..=n` reproduces the free model.
pub fn sample_soft(
    cons: &ConstrainedTable,
    charges: &ChargeSequence,
    law: &InterArrivalLaw,
    h: f64,
    l_lo: usize,
    l_hi: usize,
    rng: &mut impl Rng,
) -> Result<(usize, RenewalPath), SampleError> {
    sample_via_contact_weights(cons, charges, law, l_lo, l_hi, |l| h * l as f64, rng)
}

/// General contact-fraction functional: `P[path] ∝ w(path) e^(n U(L/n))`.
/// `U(r) = h r` reproduces the free model.
pub fn sample_functional(
    cons: &ConstrainedTable,
    charges: &ChargeSequence,
    law: &InterArrivalLaw,
    u_fn: impl Fn(f64) -> f64,
    rng: &mut impl Rng,
) -> Result<(usize, RenewalPath), SampleError> {
    let n = cons.n();
    sample_via_contact_weights(
        cons,
        charges,
        law,
        1,
        n,
        |l| n as f64 * u_fn(l as f64 / n as f64),
        rng,
    )
}

/// Exact log probability of a path under the free model (chain-rule check
/// value; matches the sampler's draw law term by term).
pub fn free_path_log_prob(
    free: &FreeTable,
    charges: &ChargeSequence,
    law: &InterArrivalLaw,
    path: &RenewalPath,
) -> f64 {
    let h = free.params().h;
    let mut lw = 0.0f64;
    for gap in path.gaps() {
        lw += law.log_p(gap as u64);
    }
    for &s in path.contact_sites() {
        lw += h + charges.charge(s as usize);
    }
    lw - free.log_partition()
}

/// Exact log probability of a path under the contact-conditioned model.
pub fn conditioned_path_log_prob(
    cons: &ConstrainedTable,
    charges: &ChargeSequence,
    law: &InterArrivalLaw,
    path: &RenewalPath,
) -> f64 {
    let l = path.contacts();
    let mut lw = 0.0f64;
    for gap in path.gaps() {
        lw += law.log_p(gap as u64);
    }
    for &s in path.contact_sites() {
        lw += charges.charge(s as usize);
    }
    lw - cons.log_z(cons.n(), l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::DisorderSpec;
    use crate::dp::PolymerParams;
    use crate::law::LawSpec;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(
        n: usize,
        h: f64,
        seed: u64,
    ) -> (InterArrivalLaw, ChargeSequence, FreeTable, ConstrainedTable) {
        let law = InterArrivalLaw::build(LawSpec::polynomial(2.0)).unwrap();
        let charges = ChargeSequence::generate(DisorderSpec::gaussian(1.0, seed), n).unwrap();
        let free = FreeTable::build(PolymerParams { n, h }, &charges, &law).unwrap();
        let cons = ConstrainedTable::build(n, &charges, &law, n).unwrap();
        (law, charges, free, cons)
    }

    #[test]
    fn path_accessors() {
        let p = RenewalPath::new(vec![0, 2, 3, 7]);
        assert_eq!(p.contacts(), 3);
        assert_eq!(p.n(), 7);
        assert_eq!(p.gaps().collect::<Vec<_>>(), vec![2, 1, 4]);
        assert_eq!(p.max_gap(), 4);
        assert_eq!(p.contact_sites(), &[2, 3, 7]);
    }

    #[test]
    #[should_panic(expected = "must start at 0")]
    fn path_must_start_at_zero() {
        RenewalPath::new(vec![1, 3]);
    }

    #[test]
    fn free_paths_are_structurally_valid_and_reproducible() {
        let (law, charges, free, _) = setup(60, 0.5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let p1 = sample_free(&free, &charges, &law, &mut rng).unwrap();
        assert_eq!(p1.n(), 60);
        assert!(p1.contacts() >= 1);
        let mut rng2 = ChaCha8Rng::seed_from_u64(10);
        let p2 = sample_free(&free, &charges, &law, &mut rng2).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn conditioned_paths_have_exact_contact_count() {
        let (law, charges, _, cons) = setup(40, 0.0, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for l in [1usize, 2, 7, 19, 40] {
            let p = sample_conditioned(&cons, &charges, &law, l, &mut rng).unwrap();
            assert_eq!(p.contacts(), l, "l = {l}");
            assert_eq!(p.n(), 40);
        }
    }

    #[test]
    fn conditioned_rejects_out_of_range() {
        let (law, charges, _, cons) = setup(12, 0.0, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            sample_conditioned(&cons, &charges, &law, 0, &mut rng).unwrap_err(),
            SampleError::ContactCountOutOfRange { l: 0, max: 12 }
        );
        assert_eq!(
            sample_conditioned(&cons, &charges, &law, 13, &mut rng).unwrap_err(),
            SampleError::ContactCountOutOfRange { l: 13, max: 12 }
        );
        // two-point law cannot reach l < n/2
        let law2 = InterArrivalLaw::build(LawSpec::truncated(1.0, 2)).unwrap();
        let charges2 = ChargeSequence::generate(DisorderSpec::zero(), 12).unwrap();
        let cons2 = ConstrainedTable::build(12, &charges2, &law2, 12).unwrap();
        assert_eq!(
            sample_conditioned(&cons2, &charges2, &law2, 3, &mut rng).unwrap_err(),
            SampleError::ImpossibleContactCount { n: 12, l: 3 }
        );
    }

    #[test]
    fn soft_window_restricts_contact_numbers() {
        let (law, charges, _, cons) = setup(30, 0.8, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let (l, p) = sample_soft(&cons, &charges, &law, 0.8, 10, 14, &mut rng).unwrap();
            assert!((10..=14).contains(&l));
            assert_eq!(p.contacts(), l);
        }
        assert_eq!(
            sample_soft(&cons, &charges, &law, 0.8, 20, 5, &mut rng).unwrap_err(),
            SampleError::EmptyWindow
        );
    }

    #[test]
    fn functional_with_nan_is_rejected() {
        let (law, charges, _, cons) = setup(10, 0.0, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let err = sample_functional(&cons, &charges, &law, |_| f64::NAN, &mut rng).unwrap_err();
        assert!(matches!(err, SampleError::BadFunctional { .. }));
    }

    #[test]
    fn sampled_frequencies_match_exact_path_probabilities() {
        // small polymer: empirical path frequencies vs exact probabilities,
        // with a generous 6-sigma binomial allowance
        use std::collections::HashMap;
        let (law, charges, free, _) = setup(6, 0.4, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let trials = 20_000usize;
        let mut counts: HashMap<Vec<u32>, usize> = HashMap::new();
        for _ in 0..trials {
            let p = sample_free(&free, &charges, &law, &mut rng).unwrap();
            *counts.entry(p.sites().to_vec()).or_default() += 1;
        }
        for (sites, count) in counts {
            let path = RenewalPath::new(sites);
            let prob = free_path_log_prob(&free, &charges, &law, &path).exp();
            let sigma = (prob * (1.0 - prob) / trials as f64).sqrt();
            let freq = count as f64 / trials as f64;
            assert!(
                (freq - prob).abs() <= 6.0 * sigma + 1e-9,
                "path {:?}: freq {freq} vs prob {prob}",
                path.sites()
            );
        }
    }

    #[test]
    fn chain_rule_identity_against_enumeration() {
        // the closed-form path probability equals the enumeration oracle's
        use crate::enumeration::EnumeratedPaths;
        let n = 11;
        let (law, charges, free, cons) = setup(n, -0.3, 9);
        let oracle = EnumeratedPaths::build(n, &charges, &law).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let p = sample_free(&free, &charges, &law, &mut rng).unwrap();
            assert_relative_eq!(
                free_path_log_prob(&free, &charges, &law, &p),
                oracle.log_prob_free(p.contact_sites(), -0.3),
                epsilon = 1e-11
            );
            let l = p.contacts();
            let q = sample_conditioned(&cons, &charges, &law, l, &mut rng).unwrap();
            assert_relative_eq!(
                conditioned_path_log_prob(&cons, &charges, &law, &q),
                oracle.log_prob_conditioned(q.contact_sites(), l),
                epsilon = 1e-11
            );
        }
    }
}
