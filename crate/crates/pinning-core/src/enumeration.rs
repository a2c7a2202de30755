//! Exhaustive path enumeration for small polymers.
//!
//! Every renewal path through `{0, ..., n}` that ends at `n` is indexed by the
//! set of interior contact sites, i.e. a bitmask over `1..n`. Enumerating all
//! `2^(n-1)` masks gives exact reference values — partition functions, contact
//! laws, marginals, per-path probabilities under arbitrary contact-number
//! reweightings — that the dynamic-programming tables and samplers are tested
//! against. Practical up to `n` ≈ 22.

use thiserror::Error;

use crate::disorder::ChargeSequence;
use crate::law::InterArrivalLaw;
use crate::numerics::{log_sum_exp, Kahan};

/// Largest polymer the enumerator accepts (`2^(n-1)` paths).
pub const MAX_ENUM_N: usize = 22;

#[derive(Debug, Error, PartialEq)]
pub enum EnumError {
    #[error("enumeration over 2^(n-1) paths needs n <= {cap}, got {n}")]
    TooLarge { n: usize, cap: usize },
    #[error("need {need} charges but the sequence has {got}")]
    ChargesTooShort { need: usize, got: usize },
    #[error("polymer length must be >= 1")]
    EmptyPolymer,
}

/// All paths of an `n`-polymer with their `h`-free log weights
/// `sum_i ln p(gap_i) + sum_contacts omega`.
#[derive(Debug)]
pub struct EnumeratedPaths {
    n: usize,
    /// indexed by interior-contact bitmask (bit `i` = site `i+1`)
    base_log_w: Vec<f64>,
}

impl EnumeratedPaths {
    pub fn build(
        n: usize,
        charges: &ChargeSequence,
        law: &InterArrivalLaw,
    ) -> Result<Self, EnumError> {
        if n == 0 {
            return Err(EnumError::EmptyPolymer);
        }
        if n > MAX_ENUM_N {
            return Err(EnumError::TooLarge { n, cap: MAX_ENUM_N });
        }
        if charges.len() < n {
            return Err(EnumError::ChargesTooShort { need: n, got: charges.len() });
        }
        let masks = 1usize << (n - 1);
        let mut base_log_w = vec![0.0f64; masks];
        for (mask, slot) in base_log_w.iter_mut().enumerate() {
            let mut w = 0.0f64;
            let mut last = 0u32;
            for site in 1..n as u32 {
                if mask >> (site - 1) & 1 == 1 {
                    w += law.log_p((site - last) as u64) + charges.charge(site as usize);
                    last = site;
                }
            }
            w += law.log_p((n as u32 - last) as u64) + charges.charge(n);
            *slot = w;
        }
        Ok(EnumeratedPaths { n, base_log_w })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn path_count(&self) -> usize {
        self.base_log_w.len()
    }

    /// Contact number of a path (counts site `n`, not site `0`).
    fn contacts(mask: usize) -> usize {
        mask.count_ones() as usize + 1
    }

    /// Interior-contact bitmask of an explicit site list (sites strictly
    /// increasing in `1..=n`, last entry `n`).
    pub fn mask_of_sites(&self, sites: &[u32]) -> usize {
        assert_eq!(sites.last().copied(), Some(self.n as u32), "path must end at n");
        let mut mask = 0usize;
        for &s in &sites[..sites.len() - 1] {
            assert!(s >= 1 && (s as usize) < self.n, "interior site out of range");
            mask |= 1 << (s - 1);
        }
        mask
    }

    /// `ln` of the weighted partition sum `sum_paths base_w(path) *
    /// e^(weight(L(path)))`; `weight(l) = h*l` gives the free model.
    pub fn log_z_weighted(&self, weight: impl Fn(usize) -> f64) -> f64 {
        let mut max = f64::NEG_INFINITY;
        for (mask, &b) in self.base_log_w.iter().enumerate() {
            let v = b + weight(Self::contacts(mask));
            if v > max {
                max = v;
            }
        }
        if max == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let mut acc = Kahan::default();
        for (mask, &b) in self.base_log_w.iter().enumerate() {
            let v = b + weight(Self::contacts(mask));
            if v > f64::NEG_INFINITY {
                acc.add((v - max).exp());
            }
        }
        max + acc.total().ln()
    }

    /// Free log partition function at pinning strength `h`.
    pub fn log_z(&self, h: f64) -> f64 {
        self.log_z_weighted(|l| h * l as f64)
    }

    /// Constrained log partition function `ln Z_{n,l}` (`h`-free).
    pub fn log_z_constrained(&self, l: usize) -> f64 {
        let terms: Vec<f64> = self
            .base_log_w
            .iter()
            .enumerate()
            .filter(|(mask, _)| Self::contacts(*mask) == l)
            .map(|(_, &b)| b)
            .collect();
        log_sum_exp(&terms)
    }

    /// Log probability of one explicit path under the reweighted model
    /// `P[path] ∝ base_w(path) e^(weight(L))`.
    pub fn log_prob_weighted(&self, sites: &[u32], weight: impl Fn(usize) -> f64) -> f64 {
        let mask = self.mask_of_sites(sites);
        self.base_log_w[mask] + weight(Self::contacts(mask)) - self.log_z_weighted(&weight)
    }

    /// Log probability of a path under the free model.
    pub fn log_prob_free(&self, sites: &[u32], h: f64) -> f64 {
        self.log_prob_weighted(sites, |l| h * l as f64)
    }

    /// Log probability of a path under the model conditioned on its own
    /// contact number (`-inf` if the path's contact number differs from `l`).
    pub fn log_prob_conditioned(&self, sites: &[u32], l: usize) -> f64 {
        let mask = self.mask_of_sites(sites);
        if Self::contacts(mask) != l {
            return f64::NEG_INFINITY;
        }
        self.base_log_w[mask] - self.log_z_constrained(l)
    }

    /// `ln P[L_n = l]` for `l = 0..=n` under the reweighted model.
    pub fn ln_contact_law_weighted(&self, weight: impl Fn(usize) -> f64) -> Vec<f64> {
        let log_z = self.log_z_weighted(&weight);
        let mut per_l_max = vec![f64::NEG_INFINITY; self.n + 1];
        for (mask, &b) in self.base_log_w.iter().enumerate() {
            let l = Self::contacts(mask);
            let v = b + weight(l);
            if v > per_l_max[l] {
                per_l_max[l] = v;
            }
        }
        let mut per_l_acc = vec![Kahan::default(); self.n + 1];
        for (mask, &b) in self.base_log_w.iter().enumerate() {
            let l = Self::contacts(mask);
            let v = b + weight(l);
            if v > f64::NEG_INFINITY {
                per_l_acc[l].add((v - per_l_max[l]).exp());
            }
        }
        (0..=self.n)
            .map(|l| {
                if per_l_max[l] == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    per_l_max[l] + per_l_acc[l].total().ln() - log_z
                }
            })
            .collect()
    }

    /// `ln P[L_n = l]` under the free model.
    pub fn ln_contact_law(&self, h: f64) -> Vec<f64> {
        self.ln_contact_law_weighted(|l| h * l as f64)
    }

    /// `P[site a is a contact]` for `a = 0..=n` under the free model.
    pub fn contact_marginals(&self, h: f64) -> Vec<f64> {
        let log_z = self.log_z(h);
        let mut marg = vec![0.0f64; self.n + 1];
        for (mask, &b) in self.base_log_w.iter().enumerate() {
            let p = (b + h * Self::contacts(mask) as f64 - log_z).exp();
            let mut bits = mask;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                marg[i + 1] += p;
                bits &= bits - 1;
            }
        }
        marg[0] = 1.0;
        marg[self.n] = 1.0;
        for p in marg.iter_mut() {
            *p = p.clamp(0.0, 1.0);
        }
        marg
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::DisorderSpec;
    use crate::law::LawSpec;
    use approx::assert_relative_eq;

    fn zero(n: usize) -> ChargeSequence {
        ChargeSequence::generate(DisorderSpec::zero(), n).unwrap()
    }

    #[test]
    fn two_site_partition_matches_hand_formula() {
        let law = InterArrivalLaw::build(LawSpec::truncated(1.0, 2)).unwrap();
        let e = EnumeratedPaths::build(2, &zero(2), &law).unwrap();
        assert_eq!(e.path_count(), 2);
        for h in [-0.5f64, 0.0, 1.3] {
            let z = (h.exp() * 0.2 + (2.0 * h).exp() * 0.64f64).ln();
            assert_relative_eq!(e.log_z(h), z, epsilon = 1e-12);
        }
    }

    #[test]
    fn three_site_paths_with_three_point_law() {
        // p = {36, 9, 4}/49; paths to 3: {3}, {1,3}, {2,3}, {1,2,3}
        let law = InterArrivalLaw::build(LawSpec::truncated(1.0, 3)).unwrap();
        let e = EnumeratedPaths::build(3, &zero(3), &law).unwrap();
        assert_eq!(e.path_count(), 4);
        let (p1, p2, p3): (f64, f64, f64) = (36.0 / 49.0, 9.0 / 49.0, 4.0 / 49.0);
        let z0 = p3 + 2.0 * p1 * p2 + p1 * p1 * p1;
        assert_relative_eq!(e.log_z(0.0), z0.ln(), epsilon = 1e-12);
        assert_relative_eq!(e.log_z_constrained(2), (2.0 * p1 * p2).ln(), epsilon = 1e-12);
        assert_relative_eq!(
            e.log_prob_free(&[1, 3], 0.0),
            (p1 * p2 / z0).ln(),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            e.log_prob_conditioned(&[2, 3], 2),
            0.5f64.ln(),
            epsilon = 1e-12
        );
        assert_eq!(e.log_prob_conditioned(&[3], 2), f64::NEG_INFINITY);
        // marginal of site 2 = (p2*p1 + p1^3) / z0
        let marg = e.contact_marginals(0.0);
        assert_relative_eq!(marg[2], (p2 * p1 + p1 * p1 * p1) / z0, epsilon = 1e-12);
        assert_eq!(marg[0], 1.0);
        assert_eq!(marg[3], 1.0);
    }

    #[test]
    fn contact_law_sums_to_one_and_respects_weighting() {
        let law = InterArrivalLaw::build(LawSpec::polynomial(2.0)).unwrap();
        let charges = ChargeSequence::generate(DisorderSpec::gaussian(1.0, 7), 9).unwrap();
        let e = EnumeratedPaths::build(9, &charges, &law).unwrap();
        let ln_law = e.ln_contact_law(0.7);
        let total: f64 = ln_law.iter().filter(|v| v.is_finite()).map(|v| v.exp()).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        // a hard window weight reduces to conditioning
        let target = 3usize;
        let window = move |l: usize| if l == target { 0.0 } else { f64::NEG_INFINITY };
        let lw = e.ln_contact_law_weighted(window);
        assert_relative_eq!(lw[target], 0.0, epsilon = 1e-12);
        for (l, &v) in lw.iter().enumerate() {
            if l != target {
                assert_eq!(v, f64::NEG_INFINITY);
            }
        }
    }

    #[test]
    fn guards() {
        let law = InterArrivalLaw::build(LawSpec::truncated(1.0, 2)).unwrap();
        assert_eq!(
            EnumeratedPaths::build(0, &zero(0), &law).unwrap_err(),
            EnumError::EmptyPolymer
        );
        assert_eq!(
            EnumeratedPaths::build(30, &zero(30), &law).unwrap_err(),
            EnumError::TooLarge { n: 30, cap: MAX_ENUM_N }
        );
        assert_eq!(
            EnumeratedPaths::build(5, &zero(2), &law).unwrap_err(),
            EnumError::ChargesTooShort { need: 5, got: 2 }
        );
    }
}
