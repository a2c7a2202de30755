//! Charge (disorder) sequences `omega_1, omega_2, ...`: i.i.d. centered draws
//! with a fixed menu of marginals, generated reproducibly.
//!
//! Each index gets its own counter-based RNG stream keyed by `(seed, index)`,
//! so the value at index `a` never depends on how many neighbours were
//! generated, in what order, or on how the work was split across threads:
//! regenerating any prefix, suffix, or extension of a sequence reproduces the
//! same bits. That is what makes shifted (suffix) sequences and charge-prefix
//! ladders exact rather than approximately reseeded.

use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Marginal distribution of a single charge. All menu entries are centered
/// (mean zero) and have every exponential moment finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisorderKind {
    /// No disorder: every charge is exactly 0.
    Zero,
    /// Centered gaussian with standard deviation `sigma > 0`.
    Gaussian { sigma: f64 },
    /// Uniform on `[-b, b]`, `b > 0`.
    Uniform { b: f64 },
    /// `+b` or `-b` with probability 1/2 each, `b > 0`.
    Rademacher { b: f64 },
}

/// A disorder kind plus the master seed of its stream family. Serializes
/// flat: the kind's tag and parameters sit next to `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    #[serde(flatten)]
    pub kind: DisorderKind,
    pub seed: u64,
}

impl DisorderSpec {
    pub fn zero() -> Self {
        DisorderSpec { kind: DisorderKind::Zero, seed: 0 }
    }

    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        DisorderSpec { kind: DisorderKind::Gaussian { sigma }, seed }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DisorderError {
    #[error("disorder scale must be positive and finite (got {0})")]
    BadScale(f64),
    #[error("shift by {shift} exceeds sequence length {len}")]
    ShiftTooLarge { shift: usize, len: usize },
}

/// A realized charge sequence `omega_{off+1}, ..., omega_{off+len}`, i.e. the
/// environment seen by a polymer of length `len` after shifting the origin by
/// `off`. Site `a` of the polymer reads `charge(a) = omega_{off+a}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeSequence {
    spec: DisorderSpec,
    offset: u64,
    values: Vec<f64>,
}

impl ChargeSequence {
    /// Generate the first `len` charges of the environment.
    pub fn generate(spec: DisorderSpec, len: usize) -> Result<Self, DisorderError> {
        match spec.kind {
            DisorderKind::Zero => {}
            DisorderKind::Gaussian { sigma: s }
            | DisorderKind::Uniform { b: s }
            | DisorderKind::Rademacher { b: s } => {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(DisorderError::BadScale(s));
                }
            }
        }
        let values = (1..=len as u64).map(|a| draw(spec, a)).collect();
        Ok(ChargeSequence { spec, offset: 0, values })
    }

    pub fn spec(&self) -> DisorderSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Charge at polymer site `a`, `1 <= a <= len`.
    #[inline]
    pub fn charge(&self, a: usize) -> f64 {
        self.values[a - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The environment as seen from origin `off + i`: drops the first `i`
    /// charges. `shift(i).shift(j)` equals `shift(i + j)`.
    pub fn shift(&self, i: usize) -> Result<Self, DisorderError> {
        if i > self.values.len() {
            return Err(DisorderError::ShiftTooLarge { shift: i, len: self.values.len() });
        }
        Ok(ChargeSequence {
            spec: self.spec,
            offset: self.offset + i as u64,
            values: self.values[i..].to_vec(),
        })
    }
}

/// One charge from the per-index stream `(seed, index)`. Index streams are
/// independent ChaCha8 streams of the master seed, so any subset of indices
/// can be generated in any order with identical results.
fn draw(spec: DisorderSpec, index: u64) -> f64 {
    match spec.kind {
        DisorderKind::Zero => 0.0,
        kind => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(index);
            match kind {
                DisorderKind::Zero => unreachable!(),
                DisorderKind::Gaussian { sigma } => {
                    let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
                    sigma * z
                }
                DisorderKind::Uniform { b } => rng.gen_range(-b..=b),
                DisorderKind::Rademacher { b } => {
                    if rng.gen::<bool>() {
                        b
                    } else {
                        -b
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_disorder_is_zero() {
        let seq = ChargeSequence::generate(DisorderSpec::zero(), 16).unwrap();
        assert!(seq.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn regeneration_is_bit_identical_and_prefix_stable() {
        let spec = DisorderSpec::gaussian(1.0, 12345);
        let a = ChargeSequence::generate(spec, 100).unwrap();
        let b = ChargeSequence::generate(spec, 100).unwrap();
        assert_eq!(a, b);
        // a longer sequence extends the shorter one without disturbing it
        let long = ChargeSequence::generate(spec, 250).unwrap();
        assert_eq!(&long.values()[..100], a.values());
    }

    #[test]
    fn different_seeds_and_indices_decorrelate() {
        let a = ChargeSequence::generate(DisorderSpec::gaussian(1.0, 1), 50).unwrap();
        let b = ChargeSequence::generate(DisorderSpec::gaussian(1.0, 2), 50).unwrap();
        assert_ne!(a.values(), b.values());
        let distinct = a
            .values()
            .iter()
            .filter(|&&v| a.values().iter().filter(|&&w| w == v).count() == 1)
            .count();
        assert!(distinct >= 49, "gaussian draws should not repeat");
    }

    #[test]
    fn shift_matches_suffix_and_composes() {
        let spec = DisorderSpec { kind: DisorderKind::Uniform { b: 2.0 }, seed: 9 };
        let seq = ChargeSequence::generate(spec, 40).unwrap();
        let s7 = seq.shift(7).unwrap();
        assert_eq!(s7.values(), &seq.values()[7..]);
        assert_eq!(s7.charge(1), seq.charge(8));
        let s12 = seq.shift(5).unwrap().shift(7).unwrap();
        assert_eq!(s12, seq.shift(12).unwrap());
        // full shift leaves an empty environment; beyond errors
        assert_eq!(seq.shift(40).unwrap().len(), 0);
        assert!(matches!(
            seq.shift(41),
            Err(DisorderError::ShiftTooLarge { shift: 41, len: 40 })
        ));
    }

    #[test]
    fn marginal_shapes() {
        let n = 4000;
        let g = ChargeSequence::generate(DisorderSpec::gaussian(2.0, 7), n).unwrap();
        let mean = g.values().iter().sum::<f64>() / n as f64;
        let var = g.values().iter().map(|v| v * v).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.15, "gaussian sample mean {mean}");
        assert!((var - 4.0).abs() < 0.4, "gaussian sample var {var}");

        let u =
            ChargeSequence::generate(DisorderSpec { kind: DisorderKind::Uniform { b: 3.0 }, seed: 7 }, n)
                .unwrap();
        assert!(u.values().iter().all(|&v| (-3.0..=3.0).contains(&v)));
        let umean = u.values().iter().sum::<f64>() / n as f64;
        assert!(umean.abs() < 0.1, "uniform sample mean {umean}");

        let r = ChargeSequence::generate(
            DisorderSpec { kind: DisorderKind::Rademacher { b: 1.5 }, seed: 3 },
            n,
        )
        .unwrap();
        assert!(r.values().iter().all(|&v| v == 1.5 || v == -1.5));
        let plus = r.values().iter().filter(|&&v| v > 0.0).count();
        assert!((plus as f64 / n as f64 - 0.5).abs() < 0.05);
    }

    #[test]
    fn bad_scales_rejected() {
        assert!(matches!(
            ChargeSequence::generate(DisorderSpec::gaussian(0.0, 1), 4),
            Err(DisorderError::BadScale(_))
        ));
        assert!(matches!(
            ChargeSequence::generate(
                DisorderSpec { kind: DisorderKind::Uniform { b: f64::NAN }, seed: 1 },
                4
            ),
            Err(DisorderError::BadScale(_))
        ));
    }

    #[test]
    fn spec_serde_round_trip() {
        let spec = DisorderSpec { kind: DisorderKind::Rademacher { b: 0.5 }, seed: 77 };
        let json = serde_json::to_string(&spec).unwrap();
        let back: DisorderSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }
}
